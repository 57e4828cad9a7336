use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::Arc;

use super::space::FeSpace;
use crate::{Error, Result, C64};

/// Scalar entries of fields, vectors and matrices: `f64` or [`C64`].
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + Default
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Mul<f64, Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + 'static
{
    const IS_COMPLEX: bool;
    fn zero() -> Self;
    fn from_real(x: f64) -> Self;
    /// Builds a scalar from real and imaginary parts; a real scalar drops `im`.
    fn from_parts(re: f64, im: f64) -> Self;
    fn re(self) -> f64;
    fn im(self) -> f64;
    fn conj(self) -> Self;
    fn abs_sqr(self) -> f64;
    fn is_finite(self) -> bool;
}

impl Scalar for f64 {
    const IS_COMPLEX: bool = false;
    fn zero() -> Self {
        0.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn from_parts(re: f64, _im: f64) -> Self {
        re
    }
    fn re(self) -> f64 {
        self
    }
    fn im(self) -> f64 {
        0.0
    }
    fn conj(self) -> Self {
        self
    }
    fn abs_sqr(self) -> f64 {
        self * self
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Scalar for C64 {
    const IS_COMPLEX: bool = true;
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        C64::new(x, 0.0)
    }
    fn from_parts(re: f64, im: f64) -> Self {
        C64::new(re, im)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn im(self) -> f64 {
        self.im
    }
    fn conj(self) -> Self {
        C64::conj(&self)
    }
    fn abs_sqr(self) -> f64 {
        self.norm_sqr()
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Coefficient vector of a finite element function.
#[derive(Debug, Clone)]
pub struct Field<T> {
    space: Arc<FeSpace>,
    values: Vec<T>,
}

pub type RealField = Field<f64>;
pub type ComplexField = Field<C64>;

impl<T: Scalar> Field<T> {
    pub fn zeros(space: &Arc<FeSpace>) -> Self {
        Self {
            space: space.clone(),
            values: vec![T::zero(); space.ndof()],
        }
    }

    pub fn constant(space: &Arc<FeSpace>, value: T) -> Self {
        Self {
            space: space.clone(),
            values: vec![value; space.ndof()],
        }
    }

    pub fn from_values(space: &Arc<FeSpace>, values: Vec<T>) -> Result<Self> {
        if values.len() != space.ndof() {
            return Err(Error::invalid(format!(
                "field has {} coefficients but the space has {} DOFs",
                values.len(),
                space.ndof()
            )));
        }
        Ok(Self {
            space: space.clone(),
            values,
        })
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(space: &Arc<FeSpace>, f: impl Fn(&[f64]) -> T) -> Self {
        let dim = space.dim();
        let values = space.dof_coords().iter().map(|p| f(&p[..dim])).collect();
        Self {
            space: space.clone(),
            values,
        }
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `Σ_i values[dof(cell, i)] · φ_i(ξ)` at reference point `xi`.
    pub fn evaluate(&self, cell: usize, xi: [f64; 2]) -> Result<T> {
        if cell >= self.space.num_cells() {
            return Err(Error::invalid(format!(
                "cell {cell} out of range (mesh has {} cells)",
                self.space.num_cells()
            )));
        }
        let re = self.space.reference();
        let mut phi = vec![0.0; re.num_basis()];
        re.eval(xi, &mut phi);
        Ok(self
            .space
            .cell_dofs(cell)
            .iter()
            .zip(&phi)
            .fold(T::zero(), |acc, (&d, &p)| acc + self.values[d] * p))
    }

    /// Value at the physical point `x`, wrapped into the periodic domain.
    pub fn evaluate_at(&self, x: &[f64]) -> Result<T> {
        let (cell, xi) = self.space.locate(x)?;
        self.evaluate(cell, xi)
    }

    pub fn check_space(&self, space: &Arc<FeSpace>) -> Result<()> {
        if FeSpace::same(&self.space, space) {
            Ok(())
        } else {
            Err(Error::invalid("field lives on a different finite element space"))
        }
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: T, other: &Field<T>) -> Result<Field<T>> {
        other.check_space(&self.space)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| a + alpha * b).collect();
        Ok(Field {
            space: self.space.clone(),
            values,
        })
    }

    pub fn scale(&self, alpha: f64) -> Field<T> {
        Field {
            space: self.space.clone(),
            values: self.values.iter().map(|&v| v * alpha).collect(),
        }
    }
}

impl RealField {
    /// `(∫ field dx) / |Ω|`, via the exact basis integrals.
    pub fn mean(&self) -> f64 {
        let w = self.space.basis_integrals();
        let s: f64 = self.values.iter().zip(w).map(|(v, w)| v * w).sum();
        s / self.space.domain_measure()
    }

    /// `∫ field dx`.
    pub fn integral(&self) -> f64 {
        self.mean() * self.space.domain_measure()
    }

    pub fn to_complex(&self) -> ComplexField {
        Field {
            space: self.space.clone(),
            values: self.values.iter().map(|&v| C64::new(v, 0.0)).collect(),
        }
    }
}

impl ComplexField {
    pub fn re(&self) -> RealField {
        Field {
            space: self.space.clone(),
            values: self.values.iter().map(|v| v.re).collect(),
        }
    }

    pub fn im(&self) -> RealField {
        Field {
            space: self.space.clone(),
            values: self.values.iter().map(|v| v.im).collect(),
        }
    }
}
