//! Periodic Lagrange finite element spaces, quadrature and fields.

mod field;
mod quadrature;
mod reference;
mod space;

pub use field::{ComplexField, Field, RealField, Scalar};
pub use quadrature::{gauss_legendre, QuadraturePurpose, QuadratureRule};
pub use reference::ReferenceElement;
pub use space::{CellGeometry, FeSpace, Tabulation};

use std::sync::Arc;

use crate::assembly;
use crate::linalg::{SolverKind, SpdSolver};
use crate::Result;

/// Builds the degree-`degree` periodic Lagrange space on `mesh`.
pub fn build_space(mesh: impl Into<Arc<crate::mesh::Mesh>>, degree: usize) -> Result<Arc<FeSpace>> {
    FeSpace::new(mesh, degree)
}

/// Quadrature rule of the given purpose for `space`.
pub fn default_quadrature(space: &FeSpace, purpose: QuadraturePurpose) -> QuadratureRule {
    space.quadrature(purpose)
}

/// L2 projection of `f` onto `space`: solves `M u = (f, φ_i)`.
pub fn l2_project<T: Scalar>(space: &Arc<FeSpace>, f: impl Fn(&[f64]) -> T) -> Result<Field<T>> {
    let mass = assembly::assemble_mass(space);
    let solver = SpdSolver::new(&mass, SolverKind::Direct)?;
    l2_project_with(&solver, space, f)
}

/// L2 projection reusing a factorised mass matrix of `space`.
pub fn l2_project_with<T: Scalar>(
    mass_solver: &SpdSolver,
    space: &Arc<FeSpace>,
    f: impl Fn(&[f64]) -> T,
) -> Result<Field<T>> {
    let b = assembly::assemble_load(space, f);
    let u = mass_solver.solve_scalar(&b).map_err(|e| match e {
        crate::Error::SolverFailure { residual, .. } => crate::Error::Internal(format!(
            "mass matrix solve failed in L2 projection (residual {residual:.3e}); assembly is inconsistent"
        )),
        other => other,
    })?;
    Field::from_values(space, u)
}

/// `(∫ field dx) / |Ω|`.
pub fn field_mean(field: &RealField) -> f64 {
    field.mean()
}
