//! Dense reference implementation of the discrete operators and one scheme
//! step, written against physical coordinates only.
//!
//! The basis, the quadrature and the DOF lookup are all independent of the
//! library: local nodes are placed geometrically and matched to global DOFs
//! through `FeSpace::dof_coords` modulo the periodic extents.

#![allow(dead_code)]

use std::f64::consts::PI;

use gppfem::fem::FeSpace;
use gppfem::C64;

/// 6-point Gauss-Legendre on [-1, 1], exact to degree 11.
const GAUSS6: [(f64, f64); 6] = [
    (-0.932_469_514_203_152_1, 0.171_324_492_379_170_3),
    (-0.661_209_386_466_264_5, 0.360_761_573_048_138_6),
    (-0.238_619_186_083_196_9, 0.467_913_934_572_691_0),
    (0.238_619_186_083_196_9, 0.467_913_934_572_691_0),
    (0.661_209_386_466_264_5, 0.360_761_573_048_138_6),
    (0.932_469_514_203_152_1, 0.171_324_492_379_170_3),
];

/// Quadrature point on a cell in barycentric coordinates, with weight
/// already multiplied by the cell measure.
struct Point {
    bary: Vec<f64>,
    weight: f64,
}

pub struct DenseOracle {
    dim: usize,
    degree: usize,
    ndof: usize,
    /// Per cell: global DOF of each local node.
    dofs: Vec<Vec<usize>>,
    /// Per cell: physical vertex coordinates.
    verts: Vec<Vec<[f64; 2]>>,
    points: Vec<Vec<Point>>,
}

impl DenseOracle {
    pub fn new(space: &FeSpace) -> Self {
        let mesh = space.mesh();
        let dim = space.dim();
        let degree = space.degree();
        let extents = mesh.extents().to_vec();
        let coords = space.dof_coords();
        let lookup = |p: [f64; 2]| -> usize {
            let wrap = |x: f64, l: f64| {
                let r = x.rem_euclid(l);
                if (r - l).abs() < 1e-9 * l {
                    0.0
                } else {
                    r
                }
            };
            let q = [wrap(p[0], extents[0]), if dim == 2 { wrap(p[1], extents[1]) } else { 0.0 }];
            let hits: Vec<usize> = (0..coords.len())
                .filter(|&i| (coords[i][0] - q[0]).abs() < 1e-9 && (coords[i][1] - q[1]).abs() < 1e-9)
                .collect();
            assert_eq!(hits.len(), 1, "node {p:?} matched {} DOFs", hits.len());
            hits[0]
        };
        let mut dofs = Vec::new();
        let mut verts = Vec::new();
        let mut points = Vec::new();
        for cell in mesh.cells() {
            let v: Vec<[f64; 2]> = cell.iter().map(|&i| mesh.vertices()[i]).collect();
            let nodes = local_nodes(&v, dim, degree);
            dofs.push(nodes.iter().map(|&p| lookup(p)).collect());
            points.push(cell_points(&v, dim));
            verts.push(v);
        }
        Self {
            dim,
            degree,
            ndof: space.ndof(),
            dofs,
            verts,
            points,
        }
    }

    pub fn ndof(&self) -> usize {
        self.ndof
    }

    fn basis(&self, bary: &[f64]) -> Vec<f64> {
        lagrange(bary, self.degree)
    }

    /// Physical gradients of the local basis at `bary`.
    fn grads(&self, cell: usize, bary: &[f64]) -> Vec<[f64; 2]> {
        let v = &self.verts[cell];
        // Gradients of the barycentric coordinates.
        let lam_grad: Vec<[f64; 2]> = if self.dim == 1 {
            let h = v[1][0] - v[0][0];
            vec![[-1.0 / h, 0.0], [1.0 / h, 0.0]]
        } else {
            let det = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
            (0..3)
                .map(|i| {
                    let (a, b) = (v[(i + 1) % 3], v[(i + 2) % 3]);
                    [(a[1] - b[1]) / det, (b[0] - a[0]) / det]
                })
                .collect()
        };
        let dl = lagrange_dlambda(bary, self.degree);
        dl.iter()
            .map(|row| {
                let mut g = [0.0; 2];
                for (k, d) in row.iter().enumerate() {
                    g[0] += d * lam_grad[k][0];
                    g[1] += d * lam_grad[k][1];
                }
                g
            })
            .collect()
    }

    fn assemble(&self, mut local: impl FnMut(usize, &Point, &[f64], &[[f64; 2]], &mut [Vec<f64>])) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.ndof]; self.ndof];
        for cell in 0..self.dofs.len() {
            let n = self.dofs[cell].len();
            let mut block = vec![vec![0.0; n]; n];
            for p in &self.points[cell] {
                let phi = self.basis(&p.bary);
                let grad = self.grads(cell, &p.bary);
                local(cell, p, &phi, &grad, &mut block);
            }
            for (i, &gi) in self.dofs[cell].iter().enumerate() {
                for (j, &gj) in self.dofs[cell].iter().enumerate() {
                    a[gi][gj] += block[i][j];
                }
            }
        }
        a
    }

    pub fn mass(&self) -> Vec<Vec<f64>> {
        self.assemble(|_, p, phi, _, block| {
            for i in 0..phi.len() {
                for j in 0..phi.len() {
                    block[i][j] += p.weight * phi[i] * phi[j];
                }
            }
        })
    }

    pub fn stiffness(&self) -> Vec<Vec<f64>> {
        self.assemble(|_, p, _, g, block| {
            for i in 0..g.len() {
                for j in 0..g.len() {
                    block[i][j] += p.weight * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                }
            }
        })
    }

    fn interp<T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>>(
        &self,
        cell: usize,
        phi: &[f64],
        nodal: &[T],
        zero: T,
    ) -> T {
        self.dofs[cell].iter().zip(phi).fold(zero, |acc, (&d, &s)| acc + nodal[d] * s)
    }

    /// `∫ c_h φ_i φ_j` for the finite element function with nodal values `c`.
    pub fn weighted_mass(&self, c: &[f64]) -> Vec<Vec<f64>> {
        self.assemble(|cell, p, phi, _, block| {
            let ch = self.interp(cell, phi, c, 0.0);
            for i in 0..phi.len() {
                for j in 0..phi.len() {
                    block[i][j] += p.weight * ch * phi[i] * phi[j];
                }
            }
        })
    }

    /// `∫ |ψ_h|² φ_i`.
    pub fn density_load(&self, psi: &[C64]) -> Vec<f64> {
        let mut b = vec![0.0; self.ndof];
        for cell in 0..self.dofs.len() {
            for p in &self.points[cell] {
                let phi = self.basis(&p.bary);
                let v = self.interp(cell, &phi, psi, C64::new(0.0, 0.0));
                for (&d, s) in self.dofs[cell].iter().zip(&phi) {
                    b[d] += p.weight * v.norm_sqr() * s;
                }
            }
        }
        b
    }

    /// `∫ f φ_i` for a function of the physical point.
    pub fn load(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        let mut b = vec![0.0; self.ndof];
        for cell in 0..self.dofs.len() {
            let v = &self.verts[cell];
            for p in &self.points[cell] {
                let phi = self.basis(&p.bary);
                let mut x = [0.0; 2];
                for (k, l) in p.bary.iter().enumerate() {
                    x[0] += l * v[k][0];
                    x[1] += l * v[k][1];
                }
                let fx = f(x);
                for (&d, s) in self.dofs[cell].iter().zip(&phi) {
                    b[d] += p.weight * fx * s;
                }
            }
        }
        b
    }

    /// Zero-mean solution of `K x = b` from the bordered system
    /// `[K w; wᵀ 0]` with `w = M·1`.
    pub fn zero_mean_solve(&self, k: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let w: Vec<f64> = self.mass().iter().map(|row| row.iter().sum()).collect();
        let n = self.ndof;
        let mut a = vec![vec![0.0; n + 1]; n + 1];
        for i in 0..n {
            a[i][..n].copy_from_slice(&k[i]);
            a[i][n] = w[i];
            a[n][i] = w[i];
        }
        let mut rhs = b.to_vec();
        rhs.push(0.0);
        let mut x = gauss_solve_real(a, rhs);
        x.truncate(n);
        x
    }

    /// One step of the scheme from `ψ^n` and `Z^{n-1/2}`.
    /// Returns `(ψ₊^{n+1}, ψ₋^{n+1}, Z₊^{n+1/2}, Z₋^{n+1/2}, φ^{n+1/2})`.
    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &self,
        psi: [&[C64]; 2],
        z_prev: [&[f64]; 2],
        g: f64,
        big_g: f64,
        q: f64,
        tau: f64,
    ) -> (Vec<C64>, Vec<C64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let m = self.mass();
        let k = self.stiffness();
        let n = self.ndof;
        let relax = |p: &[C64], zp: &[f64]| -> Vec<f64> {
            let b: Vec<f64> = self.density_load(p).iter().map(|v| 2.0 * v).collect();
            let z = gauss_solve_real(m.clone(), b);
            z.iter().zip(zp).map(|(a, b)| a - b).collect()
        };
        let zp = relax(psi[0], z_prev[0]);
        let zm = relax(psi[1], z_prev[1]);
        let phi = if q == 0.0 {
            vec![0.0; n]
        } else {
            let diff: Vec<f64> = zp.iter().zip(&zm).map(|(a, b)| a - b).collect();
            let rhs: Vec<f64> = matvec(&m, &diff).iter().map(|v| 4.0 * PI * q * v).collect();
            self.zero_mean_solve(&k, &rhs)
        };
        let cp: Vec<f64> = (0..n).map(|i| g * zp[i] + big_g * zm[i] + q * phi[i]).collect();
        let cm: Vec<f64> = (0..n).map(|i| g * zm[i] + big_g * zp[i] - q * phi[i]).collect();
        let wave = |p: &[C64], c: &[f64]| -> Vec<C64> {
            let w = self.weighted_mass(c);
            let it = C64::new(0.0, 1.0 / tau);
            let lhs: Vec<Vec<C64>> = (0..n)
                .map(|i| (0..n).map(|j| it * m[i][j] - 0.25 * k[i][j] - 0.5 * w[i][j]).collect())
                .collect();
            let rhs: Vec<C64> = (0..n)
                .map(|i| (0..n).map(|j| (it * m[i][j] + 0.25 * k[i][j] + 0.5 * w[i][j]) * p[j]).sum())
                .collect();
            gauss_solve_complex(lhs, rhs)
        };
        let pp = wave(psi[0], &cp);
        let pm = wave(psi[1], &cm);
        (pp, pm, zp, zm, phi)
    }
}

/// Physical positions of the local nodes: vertices, then edge midpoints.
fn local_nodes(v: &[[f64; 2]], dim: usize, degree: usize) -> Vec<[f64; 2]> {
    let mut nodes = v.to_vec();
    if degree == 2 {
        let mid = |a: [f64; 2], b: [f64; 2]| [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
        if dim == 1 {
            nodes.push(mid(v[0], v[1]));
        } else {
            // Edge opposite vertex 0, 1, 2 in turn.
            nodes.push(mid(v[1], v[2]));
            nodes.push(mid(v[2], v[0]));
            nodes.push(mid(v[0], v[1]));
        }
    }
    nodes
}

/// Lagrange basis in barycentric coordinates, ordered like `local_nodes`.
fn lagrange(l: &[f64], degree: usize) -> Vec<f64> {
    match (l.len(), degree) {
        (_, 1) => l.to_vec(),
        (2, 2) => vec![l[0] * (2.0 * l[0] - 1.0), l[1] * (2.0 * l[1] - 1.0), 4.0 * l[0] * l[1]],
        (3, 2) => vec![
            l[0] * (2.0 * l[0] - 1.0),
            l[1] * (2.0 * l[1] - 1.0),
            l[2] * (2.0 * l[2] - 1.0),
            4.0 * l[1] * l[2],
            4.0 * l[2] * l[0],
            4.0 * l[0] * l[1],
        ],
        _ => unreachable!(),
    }
}

/// `∂φ_a / ∂λ_k` for each basis function `a`.
fn lagrange_dlambda(l: &[f64], degree: usize) -> Vec<Vec<f64>> {
    let m = l.len();
    let unit = |k: usize, s: f64| {
        let mut r = vec![0.0; m];
        r[k] = s;
        r
    };
    let pair = |i: usize, j: usize| {
        let mut r = vec![0.0; m];
        r[i] = 4.0 * l[j];
        r[j] = 4.0 * l[i];
        r
    };
    let mut out: Vec<Vec<f64>> = Vec::new();
    if degree == 1 {
        for k in 0..m {
            out.push(unit(k, 1.0));
        }
        return out;
    }
    for k in 0..m {
        out.push(unit(k, 4.0 * l[k] - 1.0));
    }
    if m == 2 {
        out.push(pair(0, 1));
    } else {
        out.push(pair(1, 2));
        out.push(pair(2, 0));
        out.push(pair(0, 1));
    }
    out
}

fn cell_points(v: &[[f64; 2]], dim: usize) -> Vec<Point> {
    if dim == 1 {
        let h = v[1][0] - v[0][0];
        return GAUSS6
            .iter()
            .map(|&(x, w)| {
                let s = 0.5 * (x + 1.0);
                Point {
                    bary: vec![1.0 - s, s],
                    weight: 0.5 * w * h,
                }
            })
            .collect();
    }
    let area = 0.5 * ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1])).abs();
    // Collapsed square: (u, s) ∈ [0,1]² ↦ λ₁ = u(1−s), λ₂ = us, Jacobian u.
    let mut pts = Vec::new();
    for &(xu, wu) in &GAUSS6 {
        for &(xs, ws) in &GAUSS6 {
            let u = 0.5 * (xu + 1.0);
            let s = 0.5 * (xs + 1.0);
            let (l1, l2) = (u * (1.0 - s), u * s);
            pts.push(Point {
                bary: vec![1.0 - l1 - l2, l1, l2],
                weight: 0.25 * wu * ws * u * 2.0 * area,
            });
        }
    }
    pts
}

pub fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

pub fn gauss_solve_real(a: Vec<Vec<f64>>, b: Vec<f64>) -> Vec<f64> {
    let ac = a.into_iter().map(|r| r.into_iter().map(|v| C64::new(v, 0.0)).collect()).collect();
    let bc = b.into_iter().map(|v| C64::new(v, 0.0)).collect();
    gauss_solve_complex(ac, bc).into_iter().map(|v| v.re).collect()
}

/// Gaussian elimination with partial pivoting.
pub fn gauss_solve_complex(mut a: Vec<Vec<C64>>, mut b: Vec<C64>) -> Vec<C64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let d = a[col][col];
        assert!(d.norm() > 0.0, "singular matrix in dense oracle");
        for r in col + 1..n {
            let f = a[r][col] / d;
            if f.norm() == 0.0 {
                continue;
            }
            for c in col..n {
                let v = a[col][c];
                a[r][c] -= f * v;
            }
            let v = b[col];
            b[r] -= f * v;
        }
    }
    let mut x = vec![C64::new(0.0, 0.0); n];
    for r in (0..n).rev() {
        let s: C64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

pub fn max_abs<T: Copy>(a: &[T], b: &[T], f: impl Fn(T, T) -> f64) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).fold(0.0, f64::max)
}
