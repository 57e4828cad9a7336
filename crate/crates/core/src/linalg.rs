//! Linear solvers for the three system families of a time step: SPD mass
//! solves, complex non-Hermitian wave updates, and the periodic Poisson
//! problem with a zero-mean constraint.
//!
//! The direct path uses faer's sparse Cholesky/LU. Our CSR arrays are handed
//! to faer as CSC, i.e. faer sees `Aᵀ`; we factorise that and solve with the
//! transpose, which is exact for any `A`. The iterative path (Jacobi-CG,
//! projected CG, Jacobi-BiCGSTAB) keeps the same residual contracts.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{MatMut, Par, Side};

use crate::assembly::{SparseMatrix, SparsityPattern};
use crate::fem::Scalar;
use crate::{Error, Result, C64};

/// Relative residual required from SPD solves.
pub const SPD_TOL: f64 = 1e-12;
/// Relative residual required from complex solves.
pub const COMPLEX_TOL: f64 = 1e-11;
/// Relative residual required from zero-mean solves.
pub const ZERO_MEAN_TOL: f64 = 1e-11;
/// `|Σ b_i| <= COMPAT_TOL · ‖b‖` for a consistent periodic Poisson right-hand side.
pub const COMPAT_TOL: f64 = 1e-10;

const MAX_REFINEMENT: usize = 3;
/// Normwise backward error treated as round-off level; accepted when the
/// relative residual target is below what `A·x` can be computed to.
pub const BACKWARD_TOL: f64 = 1e-14;
/// Target relative residual for refinement with a stale factorisation.
const REUSE_TOL: f64 = 1e-13;
const MAX_REUSE_ITERS: usize = 12;

static PARALLELISM_SET: AtomicBool = AtomicBool::new(false);

/// Selects threaded (`true`) or sequential factorisations process-wide.
/// Sequential is the default and the reference for bit-reproducible runs.
pub fn set_parallelism(parallel: bool) {
    PARALLELISM_SET.store(true, Ordering::SeqCst);
    faer::set_global_parallelism(if parallel { Par::rayon(0) } else { Par::Seq });
}

fn ensure_parallelism() {
    if !PARALLELISM_SET.swap(true, Ordering::SeqCst) {
        faer::set_global_parallelism(Par::Seq);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    #[default]
    Direct,
    Iterative,
    /// Direct, but wave-update factorisations are kept across steps and used
    /// to precondition refinement until it stops contracting.
    Reuse,
}

impl std::str::FromStr for SolverKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "direct" => Ok(SolverKind::Direct),
            "iterative" => Ok(SolverKind::Iterative),
            "reuse" => Ok(SolverKind::Reuse),
            other => Err(format!("unknown solver `{other}` (expected direct, iterative or reuse)")),
        }
    }
}

fn norm<T: Scalar>(v: &[T]) -> f64 {
    v.iter().map(|x| x.abs_sqr()).sum::<f64>().sqrt()
}

fn residual<T>(a: &SparseMatrix<T>, x: &[T], b: &[T]) -> Vec<T>
where
    T: Scalar + std::ops::Mul<T, Output = T>,
{
    a.mul_vec(x).into_iter().zip(b).map(|(ax, &bi)| bi - ax).collect()
}

fn inf_norm<T: Scalar>(v: &[T]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs_sqr().sqrt()))
}

/// `‖r‖∞ / (‖A‖∞ ‖x‖∞ + ‖b‖∞)`.
fn backward_error<T: Scalar>(a: &SparseMatrix<T>, x: &[T], r: &[T], b: &[T]) -> f64 {
    let a_norm = (0..a.nrows())
        .map(|i| a.row(i).1.iter().map(|v| v.abs_sqr().sqrt()).sum::<f64>())
        .fold(0.0, f64::max);
    inf_norm(r) / (a_norm * inf_norm(x) + inf_norm(b))
}

/// Relative residual, and whether it passes `tol` (or is at round-off level).
fn accept<T: Scalar>(a: &SparseMatrix<T>, x: &[T], r: &[T], b: &[T], bn: f64, tol: f64) -> (bool, f64) {
    let rel = norm(r) / bn;
    let ok = rel <= tol || (rel.is_finite() && backward_error(a, x, r, b) <= BACKWARD_TOL);
    (ok, rel)
}

fn to_faer<T: Scalar>(a: &SparseMatrix<T>) -> SparseColMat<usize, T> {
    ensure_parallelism();
    let p = a.pattern();
    // CSR of A is CSC of Aᵀ.
    let symbolic = SymbolicSparseColMat::new_checked(p.n(), p.n(), p.row_ptr().to_vec(), None, p.col_idx().to_vec());
    SparseColMat::new(symbolic, a.values().to_vec())
}

fn failure(context: &str, residual: f64) -> Error {
    Error::SolverFailure {
        context: context.to_string(),
        residual,
    }
}

/// Solves `A x = b` once with `A` symmetric positive definite.
pub fn solve_spd(a: &SparseMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    SpdSolver::new(a, SolverKind::Direct)?.solve(b)
}

/// Solves `A x = b` once for a nonsingular complex `A`.
pub fn solve_complex(a: &SparseMatrix<C64>, b: &[C64]) -> Result<Vec<C64>> {
    ComplexSolver::new(a, SolverKind::Direct)?.solve(b)
}

/// Solves `K x = b`, `∫ x = 0` for a periodic stiffness matrix `K` whose
/// kernel is the constants; `weights[i] = ∫ φ_i dx`.
pub fn solve_zero_mean(k: &SparseMatrix<f64>, weights: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    ZeroMeanSolver::new(k, weights, SolverKind::Direct)?.solve(b)
}

enum SpdBackend {
    Cholesky(Llt<usize, f64>),
    Cg { inv_diag: Vec<f64> },
}

/// Factorised (or preconditioned) SPD operator, reusable across solves.
pub struct SpdSolver {
    matrix: SparseMatrix<f64>,
    backend: SpdBackend,
}

impl SpdSolver {
    pub fn new(a: &SparseMatrix<f64>, kind: SolverKind) -> Result<Self> {
        let backend = match kind {
            SolverKind::Direct | SolverKind::Reuse => {
                let fa = to_faer(a);
                let symbolic = SymbolicLlt::try_new(fa.symbolic(), Side::Lower)
                    .map_err(|e| Error::Internal(format!("symbolic Cholesky: {e:?}")))?;
                let llt = Llt::try_new_with_symbolic(symbolic, fa.as_ref(), Side::Lower)
                    .map_err(|_| failure("Cholesky factorisation (matrix not SPD)", f64::NAN))?;
                SpdBackend::Cholesky(llt)
            }
            SolverKind::Iterative => SpdBackend::Cg {
                inv_diag: inverse_diagonal(a)?,
            },
        };
        Ok(Self {
            matrix: a.clone(),
            backend,
        })
    }

    pub fn matrix(&self) -> &SparseMatrix<f64> {
        &self.matrix
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let bn = norm(b);
        if bn == 0.0 {
            return Ok(vec![0.0; b.len()]);
        }
        match &self.backend {
            SpdBackend::Cholesky(llt) => {
                let apply = |rhs: &mut [f64]| {
                    let n = rhs.len();
                    llt.solve_in_place(MatMut::from_column_major_slice_mut(rhs, n, 1));
                };
                refine(&self.matrix, b, bn, SPD_TOL, "SPD solve", apply)
            }
            SpdBackend::Cg { inv_diag } => {
                let x = cg(&self.matrix, b, inv_diag, SPD_TOL * 0.5, None);
                check(&self.matrix, &x, b, bn, SPD_TOL, "SPD solve (CG)")?;
                Ok(x)
            }
        }
    }

    /// Solves a real or complex right-hand side (real and imaginary parts separately).
    pub fn solve_scalar<T: Scalar>(&self, b: &[T]) -> Result<Vec<T>> {
        let re = self.solve(&b.iter().map(|v| v.re()).collect::<Vec<_>>())?;
        if !T::IS_COMPLEX {
            return Ok(re.into_iter().map(T::from_real).collect());
        }
        let im = self.solve(&b.iter().map(|v| v.im()).collect::<Vec<_>>())?;
        Ok(re.into_iter().zip(im).map(|(r, i)| T::from_parts(r, i)).collect())
    }
}

/// Direct solve followed by iterative refinement until the residual contract holds.
fn refine<T>(
    a: &SparseMatrix<T>,
    b: &[T],
    bn: f64,
    tol: f64,
    context: &str,
    apply: impl Fn(&mut [T]),
) -> Result<Vec<T>>
where
    T: Scalar + std::ops::Mul<T, Output = T>,
{
    let mut x = b.to_vec();
    apply(&mut x);
    for _ in 0..MAX_REFINEMENT {
        let mut r = residual(a, &x, b);
        let (ok, rel) = accept(a, &x, &r, b, bn, tol);
        if !rel.is_finite() {
            return Err(failure(context, rel));
        }
        if ok {
            return Ok(x);
        }
        apply(&mut r);
        for (xi, ri) in x.iter_mut().zip(r) {
            *xi += ri;
        }
    }
    check(a, &x, b, bn, tol, context)?;
    Ok(x)
}

fn check<T>(a: &SparseMatrix<T>, x: &[T], b: &[T], bn: f64, tol: f64, context: &str) -> Result<()>
where
    T: Scalar + std::ops::Mul<T, Output = T>,
{
    match accept(a, x, &residual(a, x, b), b, bn, tol) {
        (true, _) => Ok(()),
        (false, rel) => Err(failure(context, rel)),
    }
}

fn inverse_diagonal<T>(a: &SparseMatrix<T>) -> Result<Vec<T>>
where
    T: Scalar + std::ops::Mul<T, Output = T> + std::ops::Div<Output = T>,
{
    (0..a.nrows())
        .map(|i| {
            let d = a.get(i, i);
            if d.abs_sqr() == 0.0 {
                Err(failure("Jacobi preconditioner (zero diagonal)", f64::NAN))
            } else {
                Ok(T::from_real(1.0) / d)
            }
        })
        .collect()
}

/// Jacobi-preconditioned CG. With `project`, iterates are kept orthogonal
/// to the constants in the `weights` inner product (singular periodic case).
fn cg(a: &SparseMatrix<f64>, b: &[f64], inv_diag: &[f64], tol: f64, project: Option<&[f64]>) -> Vec<f64> {
    let n = b.len();
    let bn = norm(b);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let proj = |v: &mut [f64]| {
        if let Some(w) = project {
            let ws: f64 = w.iter().sum();
            let m: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / ws;
            v.iter_mut().for_each(|x| *x -= m);
        }
    };
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(r, d)| r * d).collect();
    proj(&mut z);
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for _ in 0..(20 * n).max(1000) {
        let ap = a.mul_vec(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap == 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= tol * bn {
            break;
        }
        z = r.iter().zip(inv_diag).map(|(r, d)| r * d).collect();
        proj(&mut z);
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    proj(&mut x);
    x
}

/// Jacobi-preconditioned BiCGSTAB for complex systems.
fn bicgstab(a: &SparseMatrix<C64>, b: &[C64], inv_diag: &[C64], tol: f64) -> Vec<C64> {
    let n = b.len();
    let bn = norm(b);
    let dot = |u: &[C64], v: &[C64]| u.iter().zip(v).fold(C64::new(0.0, 0.0), |acc, (a, b)| acc + a.conj() * b);
    let precond = |v: &[C64]| v.iter().zip(inv_diag).map(|(v, d)| v * d).collect::<Vec<_>>();
    let mut x: Vec<C64> = precond(b);
    let mut r = residual(a, &x, b);
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0));
    let mut v = vec![C64::new(0.0, 0.0); n];
    let mut p = vec![C64::new(0.0, 0.0); n];
    for _ in 0..(10 * n).max(1000) {
        if norm(&r) <= tol * bn {
            break;
        }
        let rho_new = dot(&r_hat, &r);
        if rho_new.norm() == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let y = precond(&p);
        v = a.mul_vec(&y);
        alpha = rho / dot(&r_hat, &v);
        let s: Vec<C64> = r.iter().zip(&v).map(|(r, v)| r - alpha * v).collect();
        if norm(&s) <= tol * bn {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            break;
        }
        let z = precond(&s);
        let t = a.mul_vec(&z);
        let tt = dot(&t, &t);
        omega = if tt.norm() == 0.0 { C64::new(0.0, 0.0) } else { dot(&t, &s) / tt };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        if omega.norm() == 0.0 {
            break;
        }
    }
    x
}

/// Symbolic LU analysis of a complex system pattern, shared by every
/// numeric factorisation with that pattern.
#[derive(Clone)]
pub struct ComplexAnalysis {
    pattern: Arc<SparsityPattern>,
    symbolic: SymbolicLu<usize>,
}

impl ComplexAnalysis {
    pub fn new(a: &SparseMatrix<C64>) -> Result<Self> {
        let fa = to_faer(a);
        let symbolic =
            SymbolicLu::try_new(fa.symbolic()).map_err(|e| Error::Internal(format!("symbolic LU: {e:?}")))?;
        Ok(Self {
            pattern: a.pattern().clone(),
            symbolic,
        })
    }

    fn factor(&self, a: &SparseMatrix<C64>) -> Result<Lu<usize, C64>> {
        if !Arc::ptr_eq(a.pattern(), &self.pattern) {
            return Err(Error::invalid("symbolic analysis belongs to a different sparsity pattern"));
        }
        let fa = to_faer(a);
        Lu::try_new_with_symbolic(self.symbolic.clone(), fa.as_ref())
            .map_err(|e| failure(&format!("complex LU factorisation ({e:?})"), f64::INFINITY))
    }
}

/// A complex LU kept across solves with slowly varying matrices of one pattern.
///
/// Each solve refines against the current matrix, preconditioned by the stored
/// factors; the matrix is refactored only when refinement stops contracting.
#[derive(Default)]
pub struct FactorCache {
    lu: Mutex<Option<Lu<usize, C64>>>,
    factorizations: AtomicUsize,
}

impl FactorCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of numeric factorisations performed so far.
    pub fn factorizations(&self) -> usize {
        self.factorizations.load(Ordering::Relaxed)
    }

    pub fn solve(&self, a: &SparseMatrix<C64>, analysis: &ComplexAnalysis, b: &[C64]) -> Result<Vec<C64>> {
        if !Arc::ptr_eq(a.pattern(), &analysis.pattern) {
            return Err(Error::invalid("symbolic analysis belongs to a different sparsity pattern"));
        }
        let bn = norm(b);
        if bn == 0.0 {
            return Ok(vec![C64::new(0.0, 0.0); b.len()]);
        }
        let mut slot = self.lu.lock().map_err(|_| Error::Internal("factor cache poisoned".into()))?;
        if let Some(x) = slot.as_ref().and_then(|lu| stale_refine(a, lu, b, bn)) {
            return Ok(x);
        }
        let lu = analysis.factor(a)?;
        self.factorizations.fetch_add(1, Ordering::Relaxed);
        let x = match stale_refine(a, &lu, b, bn) {
            Some(x) => x,
            None => refine(a, b, bn, COMPLEX_TOL, "complex solve", |v: &mut [C64]| {
                let n = v.len();
                lu.solve_transpose_in_place(MatMut::from_column_major_slice_mut(v, n, 1));
            })?,
        };
        *slot = Some(lu);
        Ok(x)
    }
}

/// Refinement `x ← x + LU⁻¹(b − A x)`; `None` once it stops contracting
/// above the acceptance level.
fn stale_refine(a: &SparseMatrix<C64>, lu: &Lu<usize, C64>, b: &[C64], bn: f64) -> Option<Vec<C64>> {
    let apply = |v: &mut [C64]| {
        let n = v.len();
        lu.solve_transpose_in_place(MatMut::from_column_major_slice_mut(v, n, 1));
    };
    let mut x = b.to_vec();
    apply(&mut x);
    let mut prev = f64::INFINITY;
    for _ in 0..MAX_REUSE_ITERS {
        let mut r = residual(a, &x, b);
        let rel = norm(&r) / bn;
        if !rel.is_finite() {
            return None;
        }
        if rel <= REUSE_TOL {
            return Some(x);
        }
        if rel > 0.5 * prev {
            // Stagnated: fine if only round-off is left.
            return accept(a, &x, &r, b, bn, 0.1 * COMPLEX_TOL).0.then_some(x);
        }
        prev = rel;
        apply(&mut r);
        x.iter_mut().zip(r).for_each(|(xi, ri)| *xi += ri);
    }
    accept(a, &x, &residual(a, &x, b), b, bn, 0.1 * COMPLEX_TOL).0.then_some(x)
}

enum ComplexBackend {
    Lu(Lu<usize, C64>),
    BiCgStab { inv_diag: Vec<C64> },
}

pub struct ComplexSolver {
    matrix: SparseMatrix<C64>,
    backend: ComplexBackend,
}

impl ComplexSolver {
    pub fn new(a: &SparseMatrix<C64>, kind: SolverKind) -> Result<Self> {
        match kind {
            SolverKind::Direct | SolverKind::Reuse => Self::with_analysis(a, &ComplexAnalysis::new(a)?),
            SolverKind::Iterative => Ok(Self {
                matrix: a.clone(),
                backend: ComplexBackend::BiCgStab {
                    inv_diag: inverse_diagonal(a)?,
                },
            }),
        }
    }

    /// Direct factorisation reusing a symbolic analysis of the same pattern.
    pub fn with_analysis(a: &SparseMatrix<C64>, analysis: &ComplexAnalysis) -> Result<Self> {
        Ok(Self {
            matrix: a.clone(),
            backend: ComplexBackend::Lu(analysis.factor(a)?),
        })
    }

    pub fn solve(&self, b: &[C64]) -> Result<Vec<C64>> {
        let bn = norm(b);
        if bn == 0.0 {
            return Ok(vec![C64::new(0.0, 0.0); b.len()]);
        }
        match &self.backend {
            ComplexBackend::Lu(lu) => {
                let apply = |rhs: &mut [C64]| {
                    let n = rhs.len();
                    lu.solve_transpose_in_place(MatMut::from_column_major_slice_mut(rhs, n, 1));
                };
                refine(&self.matrix, b, bn, COMPLEX_TOL, "complex solve", apply)
            }
            ComplexBackend::BiCgStab { inv_diag } => {
                let x = bicgstab(&self.matrix, b, inv_diag, COMPLEX_TOL * 0.5);
                check(&self.matrix, &x, b, bn, COMPLEX_TOL, "complex solve (BiCGSTAB)")?;
                Ok(x)
            }
        }
    }
}

enum ZeroMeanBackend {
    /// Cholesky of `K` with the last DOF pinned to zero. `K·1 = 0`, so for a
    /// compatible right-hand side the dropped equation holds automatically.
    Pinned(Llt<usize, f64>),
    Cg {
        inv_diag: Vec<f64>,
    },
}

/// Periodic Poisson solver returning the zero-mean solution.
pub struct ZeroMeanSolver {
    stiffness: SparseMatrix<f64>,
    weights: Vec<f64>,
    measure: f64,
    backend: ZeroMeanBackend,
}

impl ZeroMeanSolver {
    pub fn new(k: &SparseMatrix<f64>, weights: &[f64], kind: SolverKind) -> Result<Self> {
        let n = k.nrows();
        if weights.len() != n {
            return Err(Error::invalid("constraint weights must have one entry per DOF"));
        }
        let measure: f64 = weights.iter().sum();
        if !(measure > 0.0) {
            return Err(Error::invalid("constraint weights must have a positive sum"));
        }
        let backend = match kind {
            SolverKind::Direct | SolverKind::Reuse => {
                if n < 2 {
                    return Err(Error::invalid("zero-mean Poisson solve needs at least two DOFs"));
                }
                let m = n - 1;
                let mut triplets = Vec::with_capacity(k.nnz());
                for i in 0..m {
                    let (cols, vals) = k.row(i);
                    triplets.extend(cols.iter().zip(vals).filter(|(&j, _)| j < m).map(|(&j, &v)| (i, j, v)));
                }
                let fa = to_faer(&SparseMatrix::from_triplets(m, &triplets)?);
                let symbolic = SymbolicLlt::try_new(fa.symbolic(), Side::Lower)
                    .map_err(|e| Error::Internal(format!("symbolic Cholesky: {e:?}")))?;
                let llt = Llt::try_new_with_symbolic(symbolic, fa.as_ref(), Side::Lower)
                    .map_err(|_| failure("pinned Poisson Cholesky (mesh not connected?)", f64::NAN))?;
                ZeroMeanBackend::Pinned(llt)
            }
            SolverKind::Iterative => ZeroMeanBackend::Cg {
                inv_diag: inverse_diagonal(k)?,
            },
        };
        Ok(Self {
            stiffness: k.clone(),
            weights: weights.to_vec(),
            measure,
            backend,
        })
    }

    /// `(Σ_i w_i x_i) / Σ_i w_i`.
    pub fn mean(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() / self.measure
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.solve_scaled(b, 0.0)
    }

    /// Like [`solve`](Self::solve), with the compatibility test measured
    /// against `max(‖b‖, reference)`. A right-hand side formed as a
    /// difference of two nearly equal loads passes the size of those loads.
    pub fn solve_scaled(&self, b: &[f64], reference: f64) -> Result<Vec<f64>> {
        let n = self.stiffness.nrows();
        if b.len() != n {
            return Err(Error::invalid("right-hand side length does not match the matrix"));
        }
        let bn = norm(b);
        if bn == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let sum: f64 = b.iter().sum();
        let tolerance = COMPAT_TOL * bn.max(reference);
        if sum.abs() > tolerance {
            return Err(Error::Compatibility { sum: sum.abs(), tolerance });
        }
        let bc = self.compatible_part(b);
        let mut x = match &self.backend {
            ZeroMeanBackend::Pinned(llt) => {
                let pinned = |r: &[f64]| {
                    let mut v = r[..n - 1].to_vec();
                    llt.solve_in_place(MatMut::from_column_major_slice_mut(&mut v, n - 1, 1));
                    v.push(0.0);
                    v
                };
                let mut x = pinned(&bc);
                for _ in 0..3 {
                    let r = self.compatible_part(&residual(&self.stiffness, &x, &bc));
                    if accept(&self.stiffness, &x, &r, &bc, bn, 0.1 * ZERO_MEAN_TOL).0 {
                        break;
                    }
                    x.iter_mut().zip(pinned(&r)).for_each(|(xi, d)| *xi += d);
                }
                x
            }
            ZeroMeanBackend::Cg { inv_diag } => {
                cg(&self.stiffness, &bc, inv_diag, ZERO_MEAN_TOL * 0.5, Some(&self.weights))
            }
        };
        let m = self.mean(&x);
        x.iter_mut().for_each(|v| *v -= m);
        // Rounding in K's row sums leaves a residual component along the
        // constraint weights that no x can remove; only the rest is checked.
        let r = self.compatible_part(&residual(&self.stiffness, &x, &bc));
        match accept(&self.stiffness, &x, &r, &bc, bn, ZERO_MEAN_TOL) {
            (true, _) => Ok(x),
            (false, rel) => Err(failure("zero-mean Poisson solve", rel)),
        }
    }

    /// `v − (Σv / Σw)·w`: the part of `v` in the range of `K`.
    fn compatible_part(&self, v: &[f64]) -> Vec<f64> {
        let shift = v.iter().sum::<f64>() / self.measure;
        v.iter().zip(&self.weights).map(|(vi, w)| vi - shift * w).collect()
    }
}
