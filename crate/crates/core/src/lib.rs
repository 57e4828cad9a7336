//! Relaxation Crank–Nicolson finite elements for the coupled
//! Gross–Pitaevskii–Poisson system on periodic domains.
//!
//! The crate is organised bottom-up:
//!
//! * [`mesh`]: uniform periodic interval and rectangle meshes.
//! * [`fem`]: periodic Lagrange spaces (P1/P2), quadrature, fields, L2 projection.
//! * [`assembly`]: sparse mass, stiffness, weighted-mass matrices and load vectors.
//! * [`linalg`]: the SPD, complex and zero-mean linear solvers used per step.
//! * [`scheme`]: the decoupled linear time stepper.
//! * [`diagnostics`]: discrete masses, modified energy, L2 errors and rate tables.
//! * [`problems`]: the built-in exact-solution catalog.
//! * [`harness`]: config parsing, run/converge commands and CSV output.

pub mod assembly;
pub mod diagnostics;
pub mod error;
pub mod fem;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod problems;
pub mod scheme;

pub use error::{Error, Result};

/// Complex scalar used for wave functions.
pub type C64 = num_complex::Complex64;
