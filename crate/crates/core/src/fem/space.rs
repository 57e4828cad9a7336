use std::sync::{Arc, OnceLock};

use super::quadrature::{QuadraturePurpose, QuadratureRule};
use super::reference::ReferenceElement;
use crate::assembly::SparsityPattern;
use crate::mesh::Mesh;
use crate::{Error, Result};

/// Affine map `x = origin + J ξ` of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    pub origin: [f64; 2],
    pub jacobian: [[f64; 2]; 2],
    /// `J^{-T}`, maps reference gradients to physical gradients.
    pub inv_jacobian_t: [[f64; 2]; 2],
    /// `|det J|`.
    pub det: f64,
}

impl CellGeometry {
    pub fn map(&self, xi: [f64; 2]) -> [f64; 2] {
        let j = &self.jacobian;
        [
            self.origin[0] + j[0][0] * xi[0] + j[0][1] * xi[1],
            self.origin[1] + j[1][0] * xi[0] + j[1][1] * xi[1],
        ]
    }

    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        let m = &self.inv_jacobian_t;
        [m[0][0] * g[0] + m[0][1] * g[1], m[1][0] * g[0] + m[1][1] * g[1]]
    }
}

/// Continuous degree-k Lagrange space with periodic DOF identification.
#[derive(Debug)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    reference: ReferenceElement,
    ndof: usize,
    connectivity: Vec<usize>,
    dof_coords: Vec<[f64; 2]>,
    geometry: Vec<CellGeometry>,
    basis_integrals: OnceLock<Vec<f64>>,
    pattern: OnceLock<Arc<SparsityPattern>>,
}

impl FeSpace {
    /// Builds the P`degree` space on `mesh`.
    ///
    /// Nodes live on a lattice refined `degree` times; DOFs are numbered
    /// lexicographically (x major) over lattice points wrapped into `[0, L)`.
    pub fn new(mesh: impl Into<Arc<Mesh>>, degree: usize) -> Result<Arc<Self>> {
        let mesh = mesh.into();
        if !(1..=2).contains(&degree) {
            return Err(Error::invalid(format!("unsupported polynomial degree {degree} (expected 1 or 2)")));
        }
        let dim = mesh.dim();
        let reference = ReferenceElement::new(dim, degree);
        let nloc = reference.num_basis();
        let div = mesh.divisions().to_vec();
        let lattice: Vec<usize> = div.iter().map(|&n| degree * n).collect();
        let ndof: usize = lattice.iter().product();

        let raw_grid = |v: usize| -> [usize; 2] {
            match dim {
                1 => [v, 0],
                _ => [v % (div[0] + 1), v / (div[0] + 1)],
            }
        };
        let pairs = reference.node_vertex_pairs();
        let mut connectivity = Vec::with_capacity(mesh.num_cells() * nloc);
        let mut geometry = Vec::with_capacity(mesh.num_cells());
        for cell in mesh.cells() {
            for &(a, b) in &pairs {
                let (ga, gb) = (raw_grid(cell[a]), raw_grid(cell[b]));
                // Lattice coordinate of the midpoint is (degree*ga + degree*gb)/2.
                let mut idx = 0;
                for d in 0..dim {
                    let l = (degree * (ga[d] + gb[d]) / 2) % lattice[d];
                    idx = idx * lattice[d] + l;
                }
                connectivity.push(idx);
            }
            geometry.push(cell_geometry(&mesh, cell));
        }

        let spacing: Vec<f64> = (0..dim).map(|d| mesh.spacing(d) / degree as f64).collect();
        let dof_coords = (0..ndof)
            .map(|idx| match dim {
                1 => [idx as f64 * spacing[0], 0.0],
                _ => {
                    let (ix, iy) = (idx / lattice[1], idx % lattice[1]);
                    [ix as f64 * spacing[0], iy as f64 * spacing[1]]
                }
            })
            .collect();

        Ok(Arc::new(Self {
            mesh,
            reference,
            ndof,
            connectivity,
            dof_coords,
            geometry,
            basis_integrals: OnceLock::new(),
            pattern: OnceLock::new(),
        }))
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn degree(&self) -> usize {
        self.reference.degree()
    }

    pub fn reference(&self) -> &ReferenceElement {
        &self.reference
    }

    pub fn ndof(&self) -> usize {
        self.ndof
    }

    pub fn num_cells(&self) -> usize {
        self.geometry.len()
    }

    /// DOFs per cell.
    pub fn dofs_per_cell(&self) -> usize {
        self.reference.num_basis()
    }

    /// Global DOF indices of `cell`, in local node order.
    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        let n = self.dofs_per_cell();
        &self.connectivity[cell * n..(cell + 1) * n]
    }

    pub fn geometry(&self, cell: usize) -> &CellGeometry {
        &self.geometry[cell]
    }

    /// Coordinates of the Lagrange node of each DOF (master copy, in `[0, L)`).
    pub fn dof_coords(&self) -> &[[f64; 2]] {
        &self.dof_coords
    }

    pub fn domain_measure(&self) -> f64 {
        self.mesh.domain_measure()
    }

    pub fn quadrature(&self, purpose: QuadraturePurpose) -> QuadratureRule {
        QuadratureRule::for_cell(self.dim(), purpose.exactness(self.degree()))
    }

    /// `∫ φ_i dx` for every DOF (the row sums of the mass matrix).
    pub fn basis_integrals(&self) -> &[f64] {
        self.basis_integrals.get_or_init(|| {
            let tab = Tabulation::new(self, &self.quadrature(QuadraturePurpose::Assembly));
            let mut out = vec![0.0; self.ndof];
            for cell in 0..self.num_cells() {
                let det = self.geometry[cell].det;
                for (a, &dof) in self.cell_dofs(cell).iter().enumerate() {
                    let s: f64 = (0..tab.num_points()).map(|q| tab.weights[q] * tab.value(q, a)).sum();
                    out[dof] += det * s;
                }
            }
            out
        })
    }

    pub(crate) fn pattern(&self) -> &Arc<SparsityPattern> {
        self.pattern.get_or_init(|| Arc::new(SparsityPattern::new(self)))
    }

    /// Cell containing the physical point `x` (wrapped periodically) and the
    /// reference coordinates of `x` in it.
    pub fn locate(&self, x: &[f64]) -> Result<(usize, [f64; 2])> {
        let mesh = &self.mesh;
        let dim = mesh.dim();
        if x.len() < dim || x[..dim].iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("point {x:?} is not a finite {dim}D point")));
        }
        let div = mesh.divisions();
        let mut grid = [0usize; 2];
        let mut frac = [0.0; 2];
        let mut wrapped = [0.0; 2];
        for d in 0..dim {
            let len = mesh.extents()[d];
            let w = x[d].rem_euclid(len);
            let u = w / mesh.spacing(d);
            let i = (u.floor() as usize).min(div[d] - 1);
            grid[d] = i;
            frac[d] = u - i as f64;
            wrapped[d] = w;
        }
        let cell = match dim {
            1 => grid[0],
            _ => 2 * (grid[1] * div[0] + grid[0]) + usize::from(frac[1] > frac[0]),
        };
        let g = &self.geometry[cell];
        let r = [wrapped[0] - g.origin[0], wrapped[1] - g.origin[1]];
        // ξ = J⁻¹ r, with J⁻¹ the transpose of the stored J^{-T}.
        let m = &g.inv_jacobian_t;
        let xi = match dim {
            1 => [r[0] * m[0][0], 0.0],
            _ => [m[0][0] * r[0] + m[1][0] * r[1], m[0][1] * r[0] + m[1][1] * r[1]],
        };
        Ok((cell, xi))
    }

    /// Whether two space handles refer to the same space.
    pub fn same(a: &Arc<FeSpace>, b: &Arc<FeSpace>) -> bool {
        Arc::ptr_eq(a, b)
    }
}

fn cell_geometry(mesh: &Mesh, cell: &[usize]) -> CellGeometry {
    let v = mesh.vertices();
    let o = v[cell[0]];
    match mesh.dim() {
        1 => {
            let len = v[cell[1]][0] - o[0];
            CellGeometry {
                origin: o,
                jacobian: [[len, 0.0], [0.0, 1.0]],
                inv_jacobian_t: [[1.0 / len, 0.0], [0.0, 1.0]],
                det: len.abs(),
            }
        }
        _ => {
            let (a, b) = (v[cell[1]], v[cell[2]]);
            let j = [[a[0] - o[0], b[0] - o[0]], [a[1] - o[1], b[1] - o[1]]];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            // J^{-1} = [[j11, -j01], [-j10, j00]] / det; store its transpose.
            let inv_t = [[j[1][1] / det, -j[1][0] / det], [-j[0][1] / det, j[0][0] / det]];
            CellGeometry {
                origin: o,
                jacobian: j,
                inv_jacobian_t: inv_t,
                det: det.abs(),
            }
        }
    }
}

/// Basis values and reference gradients tabulated at the points of a rule.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub nbasis: usize,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    values: Vec<f64>,
    grads: Vec<[f64; 2]>,
}

impl Tabulation {
    pub fn new(space: &FeSpace, rule: &QuadratureRule) -> Self {
        let re = space.reference();
        let nbasis = re.num_basis();
        let mut values = vec![0.0; rule.len() * nbasis];
        let mut grads = vec![[0.0; 2]; rule.len() * nbasis];
        for (q, &p) in rule.points().iter().enumerate() {
            re.eval(p, &mut values[q * nbasis..(q + 1) * nbasis]);
            re.eval_grad(p, &mut grads[q * nbasis..(q + 1) * nbasis]);
        }
        Self {
            nbasis,
            points: rule.points().to_vec(),
            weights: rule.weights().to_vec(),
            values,
            grads,
        }
    }

    pub fn num_points(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn value(&self, q: usize, a: usize) -> f64 {
        self.values[q * self.nbasis + a]
    }

    #[inline]
    pub fn values_at(&self, q: usize) -> &[f64] {
        &self.values[q * self.nbasis..(q + 1) * self.nbasis]
    }

    #[inline]
    pub fn ref_grad(&self, q: usize, a: usize) -> [f64; 2] {
        self.grads[q * self.nbasis + a]
    }
}
