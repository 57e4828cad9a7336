//! Sparse assembly of mass, stiffness and weighted-mass matrices and of
//! load vectors on periodic Lagrange spaces.
//!
//! Element kernels are computed for `a <= b` and mirrored, then scattered in
//! cell order into a CSR pattern shared by every matrix of the space, so all
//! assembled matrices are bit-for-bit symmetric.

use std::sync::Arc;

use crate::fem::{ComplexField, FeSpace, QuadraturePurpose, RealField, Scalar, Tabulation};
use crate::{Error, Result, C64};

/// CSR sparsity of the global matrices of one space, plus the scatter map
/// from `(cell, a, b)` to the value slot.
#[derive(Debug)]
pub struct SparsityPattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    nloc: usize,
    cell_slots: Vec<usize>,
}

impl SparsityPattern {
    pub(crate) fn new(space: &FeSpace) -> Self {
        let n = space.ndof();
        let nloc = space.dofs_per_cell();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for cell in 0..space.num_cells() {
            let dofs = space.cell_dofs(cell);
            for &i in dofs {
                rows[i].extend_from_slice(dofs);
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        let mut cell_slots = Vec::with_capacity(space.num_cells() * nloc * nloc);
        for cell in 0..space.num_cells() {
            let dofs = space.cell_dofs(cell);
            for &i in dofs {
                let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
                for &j in dofs {
                    let k = cols.binary_search(&j).expect("pattern contains every cell coupling");
                    cell_slots.push(row_ptr[i] + k);
                }
            }
        }
        Self {
            n,
            row_ptr,
            col_idx,
            nloc,
            cell_slots,
        }
    }

    /// Pattern from explicit sorted rows; no cell scatter map.
    pub fn from_rows(rows: &[Vec<usize>]) -> Result<Self> {
        let n = rows.len();
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        for row in rows {
            if row.windows(2).any(|w| w[0] >= w[1]) || row.iter().any(|&j| j >= n) {
                return Err(Error::invalid("rows must hold strictly increasing in-range column indices"));
            }
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            nloc: 0,
            cell_slots: Vec::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    fn slots(&self, cell: usize) -> &[usize] {
        let m = self.nloc * self.nloc;
        &self.cell_slots[cell * m..(cell + 1) * m]
    }

    fn find(&self, i: usize, j: usize) -> Option<usize> {
        let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        cols.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }
}

/// Square CSR matrix with sorted column indices.
#[derive(Debug, Clone)]
pub struct SparseMatrix<T> {
    pattern: Arc<SparsityPattern>,
    values: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let values = vec![T::zero(); pattern.nnz()];
        Self { pattern, values }
    }

    pub fn from_parts(pattern: Arc<SparsityPattern>, values: Vec<T>) -> Result<Self> {
        if values.len() != pattern.nnz() {
            return Err(Error::invalid("value count does not match the sparsity pattern"));
        }
        Ok(Self { pattern, values })
    }

    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(i, j, _) in triplets {
            if i >= n || j >= n {
                return Err(Error::invalid(format!("triplet ({i}, {j}) outside a {n}x{n} matrix")));
            }
            rows[i].push(j);
        }
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
        }
        let pattern = Arc::new(SparsityPattern::from_rows(&rows)?);
        let mut m = Self::zeros(pattern);
        for &(i, j, v) in triplets {
            let k = m.pattern.find(i, j).expect("triplet is in pattern");
            m.values[k] += v;
        }
        Ok(m)
    }

    pub fn nrows(&self) -> usize {
        self.pattern.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let (s, e) = (self.pattern.row_ptr[i], self.pattern.row_ptr[i + 1]);
        (&self.pattern.col_idx[s..e], &self.values[s..e])
    }

    /// Entry `(i, j)`, zero outside the pattern.
    pub fn get(&self, i: usize, j: usize) -> T {
        self.pattern.find(i, j).map_or(T::zero(), |k| self.values[k])
    }

    /// `A x` for any scalar type that can be scaled by `T`.
    pub fn mul_vec<U>(&self, x: &[U]) -> Vec<U>
    where
        U: Scalar + std::ops::Mul<T, Output = U>,
    {
        assert_eq!(x.len(), self.nrows());
        (0..self.nrows())
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).fold(U::zero(), |acc, (&j, &a)| acc + x[j] * a)
            })
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let n = self.nrows();
        let mut d = vec![vec![T::zero(); n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        d
    }

    /// `max |A_ij - A_ji|` over the pattern.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs_sqr().sqrt());
            }
        }
        worst
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            pattern: self.pattern.clone(),
            values: self.values.iter().map(|&v| v * alpha).collect(),
        }
    }
}

impl SparseMatrix<C64> {
    /// `Σ_k α_k A_k` for real matrices sharing one pattern.
    pub fn combine(terms: &[(C64, &SparseMatrix<f64>)]) -> Result<Self> {
        let (_, first) = terms.first().ok_or_else(|| Error::invalid("empty combination"))?;
        let pattern = first.pattern.clone();
        if terms.iter().any(|(_, m)| !Arc::ptr_eq(&m.pattern, &pattern)) {
            return Err(Error::invalid("combined matrices must share a sparsity pattern"));
        }
        let values = (0..pattern.nnz())
            .map(|k| terms.iter().fold(C64::new(0.0, 0.0), |acc, (a, m)| acc + a * m.values[k]))
            .collect();
        Ok(Self { pattern, values })
    }
}

/// Reusable per-space assembler: tabulated basis on the assembly rule and
/// physical gradients per cell.
struct Kernel<'a> {
    space: &'a FeSpace,
    tab: Tabulation,
}

impl<'a> Kernel<'a> {
    fn new(space: &'a FeSpace, purpose: QuadraturePurpose) -> Self {
        let tab = Tabulation::new(space, &space.quadrature(purpose));
        Self { space, tab }
    }

    /// Assembles `Σ_cells Σ_q w_q |J| f(cell, q, a, b)` into the space pattern.
    fn assemble(&self, mut local: impl FnMut(usize, &mut [f64])) -> SparseMatrix<f64> {
        let pattern = self.space.pattern().clone();
        let nloc = self.space.dofs_per_cell();
        let mut values = vec![0.0; pattern.nnz()];
        let mut block = vec![0.0; nloc * nloc];
        for cell in 0..self.space.num_cells() {
            block.fill(0.0);
            local(cell, &mut block);
            for a in 0..nloc {
                for b in 0..a {
                    block[a * nloc + b] = block[b * nloc + a];
                }
            }
            for (&slot, &v) in pattern.slots(cell).iter().zip(&block) {
                values[slot] += v;
            }
        }
        SparseMatrix { pattern, values }
    }
}

/// `M_ij = ∫ φ_i φ_j dx`.
pub fn assemble_mass(space: &FeSpace) -> SparseMatrix<f64> {
    let k = Kernel::new(space, QuadraturePurpose::Assembly);
    let nloc = space.dofs_per_cell();
    k.assemble(|cell, block| {
        let det = space.geometry(cell).det;
        for q in 0..k.tab.num_points() {
            let w = k.tab.weights[q] * det;
            let phi = k.tab.values_at(q);
            for a in 0..nloc {
                for b in a..nloc {
                    block[a * nloc + b] += w * (phi[a] * phi[b]);
                }
            }
        }
    })
}

/// `K_ij = ∫ ∇φ_i · ∇φ_j dx`.
pub fn assemble_stiffness(space: &FeSpace) -> SparseMatrix<f64> {
    let k = Kernel::new(space, QuadraturePurpose::Assembly);
    let nloc = space.dofs_per_cell();
    let mut grads = vec![[0.0; 2]; nloc];
    k.assemble(|cell, block| {
        let geo = space.geometry(cell);
        for q in 0..k.tab.num_points() {
            let w = k.tab.weights[q] * geo.det;
            for (a, g) in grads.iter_mut().enumerate() {
                *g = geo.grad(k.tab.ref_grad(q, a));
            }
            for a in 0..nloc {
                for b in a..nloc {
                    let dot = grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1];
                    block[a * nloc + b] += w * dot;
                }
            }
        }
    })
}

/// `W_ij = ∫ c_h φ_i φ_j dx` with `c_h` evaluated from its expansion.
pub fn assemble_weighted_mass(space: &Arc<FeSpace>, c: &RealField) -> Result<SparseMatrix<f64>> {
    c.check_space(space)?;
    let k = Kernel::new(space, QuadraturePurpose::Assembly);
    let nloc = space.dofs_per_cell();
    let coeff = c.values();
    Ok(k.assemble(|cell, block| {
        let det = space.geometry(cell).det;
        let dofs = space.cell_dofs(cell);
        for q in 0..k.tab.num_points() {
            let phi = k.tab.values_at(q);
            let ch: f64 = dofs.iter().zip(phi).map(|(&d, &p)| coeff[d] * p).sum();
            let w = k.tab.weights[q] * det * ch;
            for a in 0..nloc {
                for b in a..nloc {
                    block[a * nloc + b] += w * (phi[a] * phi[b]);
                }
            }
        }
    }))
}

/// `b_i = ∫ |ψ_h|² φ_i dx`, integrated exactly by the assembly rule.
pub fn assemble_density_load(space: &Arc<FeSpace>, psi: &ComplexField) -> Result<Vec<f64>> {
    psi.check_space(space)?;
    let tab = Tabulation::new(space, &space.quadrature(QuadraturePurpose::Assembly));
    let values = psi.values();
    let mut b = vec![0.0; space.ndof()];
    for cell in 0..space.num_cells() {
        let det = space.geometry(cell).det;
        let dofs = space.cell_dofs(cell);
        for q in 0..tab.num_points() {
            let phi = tab.values_at(q);
            let p = dofs.iter().zip(phi).fold(C64::new(0.0, 0.0), |acc, (&d, &s)| acc + values[d] * s);
            let w = tab.weights[q] * det * p.norm_sqr();
            for (&d, &s) in dofs.iter().zip(phi) {
                b[d] += w * s;
            }
        }
    }
    Ok(b)
}

/// `b_i = ∫ f φ_i dx` with the error-grade rule.
pub fn assemble_load<T: Scalar>(space: &FeSpace, f: impl Fn(&[f64]) -> T) -> Vec<T> {
    let tab = Tabulation::new(space, &space.quadrature(QuadraturePurpose::Error));
    let dim = space.dim();
    let mut b = vec![T::zero(); space.ndof()];
    for cell in 0..space.num_cells() {
        let geo = space.geometry(cell);
        let dofs = space.cell_dofs(cell);
        for q in 0..tab.num_points() {
            let x = geo.map(tab.points[q]);
            let fx = f(&x[..dim]) * (tab.weights[q] * geo.det);
            for (&d, &s) in dofs.iter().zip(tab.values_at(q)) {
                b[d] += fx * s;
            }
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::build_space;
    use crate::mesh::Mesh;

    fn space_1d(n: usize, k: usize, l: f64) -> Arc<FeSpace> {
        build_space(Mesh::interval(l, n).unwrap(), k).unwrap()
    }

    #[test]
    fn p1_mass_rows() {
        let (l, n) = (2.0, 5);
        let hc = l / n as f64;
        let m = assemble_mass(&space_1d(n, 1, l));
        for i in 0..n {
            let (left, right) = ((i + n - 1) % n, (i + 1) % n);
            assert!((m.get(i, i) - 4.0 * hc / 6.0).abs() < 1e-15);
            assert!((m.get(i, left) - hc / 6.0).abs() < 1e-15);
            assert!((m.get(i, right) - hc / 6.0).abs() < 1e-15);
            let (_, vals) = m.row(i);
            assert!((vals.iter().sum::<f64>() - hc).abs() < 1e-15);
        }
    }

    #[test]
    fn p1_stiffness_rows() {
        let (l, n) = (3.0, 6);
        let hc = l / n as f64;
        let k = assemble_stiffness(&space_1d(n, 1, l));
        for i in 0..n {
            assert!((k.get(i, i) - 2.0 / hc).abs() < 1e-13);
            assert!((k.get(i, (i + 1) % n) + 1.0 / hc).abs() < 1e-13);
            assert!((k.get(i, (i + n - 1) % n) + 1.0 / hc).abs() < 1e-13);
        }
    }

    #[test]
    fn stiffness_kernel_and_symmetry() {
        for space in [
            space_1d(7, 2, 1.5),
            build_space(Mesh::rectangle(1.0, 2.0, 4, 3).unwrap(), 1).unwrap(),
            build_space(Mesh::rectangle(1.0, 2.0, 4, 3).unwrap(), 2).unwrap(),
        ] {
            let k = assemble_stiffness(&space);
            let m = assemble_mass(&space);
            assert_eq!(k.max_asymmetry(), 0.0);
            assert_eq!(m.max_asymmetry(), 0.0);
            let ones = vec![1.0; space.ndof()];
            assert!(k.mul_vec(&ones).iter().all(|v| v.abs() < 1e-13));
        }
    }

    #[test]
    fn weighted_mass_constant_coefficient() {
        let space = build_space(Mesh::rectangle(1.0, 1.0, 3, 3).unwrap(), 2).unwrap();
        let m = assemble_mass(&space);
        let w1 = assemble_weighted_mass(&space, &RealField::constant(&space, 1.0)).unwrap();
        let w5 = assemble_weighted_mass(&space, &RealField::constant(&space, 5.0)).unwrap();
        for k in 0..m.nnz() {
            assert!((w1.values()[k] - m.values()[k]).abs() < 1e-14);
            assert!((w5.values()[k] - 5.0 * m.values()[k]).abs() < 1e-14);
        }
        assert_eq!(w5.max_asymmetry(), 0.0);
    }

    #[test]
    fn weighted_mass_space_mismatch() {
        let a = space_1d(4, 1, 1.0);
        let b = space_1d(4, 1, 1.0);
        let c = RealField::constant(&b, 1.0);
        assert!(matches!(assemble_weighted_mass(&a, &c), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn density_load_simple_cases() {
        let space = space_1d(6, 2, 2.0);
        let zero = assemble_density_load(&space, &ComplexField::zeros(&space)).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        let one = assemble_density_load(&space, &ComplexField::constant(&space, C64::new(1.0, 0.0))).unwrap();
        for (a, b) in one.iter().zip(space.basis_integrals()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn load_of_one_is_row_sums() {
        let space = build_space(Mesh::rectangle(1.0, 1.0, 3, 4).unwrap(), 1).unwrap();
        let m = assemble_mass(&space);
        let b = assemble_load(&space, |_| 1.0);
        let rs = m.mul_vec(&vec![1.0; space.ndof()]);
        for (x, y) in b.iter().zip(rs) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!(assemble_load(&space, |_| 0.0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn combine_requires_shared_pattern() {
        let s = space_1d(4, 1, 1.0);
        let m = assemble_mass(&s);
        let k = assemble_stiffness(&s);
        let a = SparseMatrix::combine(&[(C64::new(0.0, 2.0), &m), (C64::new(-0.25, 0.0), &k)]).unwrap();
        assert_eq!(a.get(0, 0), C64::new(-0.25 * k.get(0, 0), 2.0 * m.get(0, 0)));
        let other = assemble_mass(&space_1d(4, 1, 1.0));
        assert!(SparseMatrix::combine(&[(C64::new(1.0, 0.0), &m), (C64::new(1.0, 0.0), &other)]).is_err());
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = SparseMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, -1.0)]).unwrap();
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 0), -1.0);
        assert_eq!(m.get(0, 1), 0.0);
    }
}
