//! Discrete masses, modified energy, compatibility residual, L2 errors and
//! convergence-rate tables.

use std::f64::consts::PI;

use crate::assembly::SparseMatrix;
use crate::fem::{ComplexField, Field, QuadraturePurpose, RealField, Scalar, Tabulation};
use crate::problems::ExactSolution;
use crate::scheme::{Level, Operators, Params};
use crate::{Error, Result, C64};

/// Diagnostics at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub t: f64,
    pub mass_plus: f64,
    pub mass_minus: f64,
    pub energy: f64,
    /// `∫ (Z₊ − Z₋) dx` at the newest half level.
    pub compat_residual: f64,
    pub err_psi_plus: Option<f64>,
    pub err_psi_minus: Option<f64>,
    /// Error of `φ^{n-1/2}` against the exact potential at `t_n − τ/2`.
    pub err_phi: Option<f64>,
}

/// `M = Re(ψᴴ M ψ)`.
pub fn discrete_mass(psi: &ComplexField, mass: &SparseMatrix<f64>) -> f64 {
    let mpsi = mass.mul_vec(psi.values());
    let v = psi
        .values()
        .iter()
        .zip(&mpsi)
        .fold(C64::new(0.0, 0.0), |acc, (a, b)| acc + a.conj() * b);
    debug_assert!(
        v.im.abs() <= 1e-13 * v.re.abs().max(f64::MIN_POSITIVE) || v.im.abs() < 1e-300,
        "mass has imaginary part {}",
        v.im
    );
    v.re
}

/// Inputs of the modified energy at level `n`.
pub struct EnergyInputs<'a> {
    pub psi_plus: &'a ComplexField,
    pub psi_minus: &'a ComplexField,
    /// `Z₊^{n+1/2}`, `Z₋^{n+1/2}`.
    pub z_plus_next: &'a RealField,
    pub z_minus_next: &'a RealField,
    /// `Z₊^{n-1/2}`, `Z₋^{n-1/2}`.
    pub z_plus_prev: &'a RealField,
    pub z_minus_prev: &'a RealField,
    pub phi_next: Option<&'a RealField>,
    pub phi_prev: Option<&'a RealField>,
}

fn real_form(a: &SparseMatrix<f64>, u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(a.mul_vec(v)).map(|(x, y)| x * y).sum()
}

fn complex_energy(k: &SparseMatrix<f64>, psi: &ComplexField) -> f64 {
    let kp = k.mul_vec(psi.values());
    psi.values().iter().zip(&kp).map(|(a, b)| (a.conj() * b).re).sum()
}

/// Modified discrete energy
/// `E = ½(∇ψ₊,∇ψ₊) + ½(∇ψ₋,∇ψ₋) + ½g(Z₊'Z₊ + Z₋'Z₋) + ½G(Z₋'Z₊ + Z₊'Z₋) + (∇φ,∇φ')/8π`,
/// primes marking the `n+1/2` level. The potential term is dropped when `q = 0`.
pub fn discrete_energy(inputs: &EnergyInputs, params: &Params, ops: &Operators) -> Result<f64> {
    let (m, k) = (ops.mass(), ops.stiffness());
    let kinetic = 0.5 * (complex_energy(k, inputs.psi_plus) + complex_energy(k, inputs.psi_minus));
    let (zpn, zmn) = (inputs.z_plus_next.values(), inputs.z_minus_next.values());
    let (zpp, zmp) = (inputs.z_plus_prev.values(), inputs.z_minus_prev.values());
    let self_term = 0.5 * params.g * (real_form(m, zpn, zpp) + real_form(m, zmn, zmp));
    let cross_term = 0.5 * params.big_g * (real_form(m, zmn, zpp) + real_form(m, zpn, zmp));
    let potential = if params.is_gpe() {
        0.0
    } else {
        match (inputs.phi_prev, inputs.phi_next) {
            (Some(a), Some(b)) => real_form(k, a.values(), b.values()) / (8.0 * PI),
            _ => return Err(Error::invalid("energy with q != 0 needs both half-level potentials")),
        }
    };
    let e = kinetic + self_term + cross_term + potential;
    if !e.is_finite() {
        return Err(Error::Internal("energy is not finite".into()));
    }
    Ok(e)
}

/// `∫ (Z₊ − Z₋) dx`.
pub fn compat_residual(z_plus: &RealField, z_minus: &RealField) -> f64 {
    let w = z_plus.space().basis_integrals();
    z_plus
        .values()
        .iter()
        .zip(z_minus.values())
        .zip(w)
        .map(|((a, b), w)| (a - b) * w)
        .sum()
}

/// `‖v_h − v(·, t)‖_{L2}` using the error-grade quadrature.
pub fn l2_error<T: Scalar>(field: &Field<T>, exact: impl Fn(&[f64], f64) -> T, t: f64) -> f64 {
    let space = field.space();
    let tab = Tabulation::new(space, &space.quadrature(QuadraturePurpose::Error));
    let dim = space.dim();
    let values = field.values();
    let mut sum = 0.0;
    for cell in 0..space.num_cells() {
        let geo = space.geometry(cell);
        let dofs = space.cell_dofs(cell);
        for q in 0..tab.num_points() {
            let uh = dofs
                .iter()
                .zip(tab.values_at(q))
                .fold(T::zero(), |acc, (&d, &s)| acc + values[d] * s);
            let x = geo.map(tab.points[q]);
            sum += tab.weights[q] * geo.det * (uh - exact(&x[..dim], t)).abs_sqr();
        }
    }
    sum.sqrt()
}

/// Diagnostics for one level of a run.
pub fn record(
    level: &Level,
    params: &Params,
    ops: &Operators,
    exact: Option<&dyn ExactSolution>,
) -> Result<DiagnosticsRecord> {
    let s = level.state;
    let energy = discrete_energy(
        &EnergyInputs {
            psi_plus: &s.psi_plus,
            psi_minus: &s.psi_minus,
            z_plus_next: &level.half.z_plus,
            z_minus_next: &level.half.z_minus,
            z_plus_prev: &s.z_plus,
            z_minus_prev: &s.z_minus,
            phi_next: level.half.phi.as_ref(),
            phi_prev: level.phi_prev,
        },
        params,
        ops,
    )?;
    let (mut ep, mut em, mut ef) = (None, None, None);
    if let Some(ex) = exact {
        ep = Some(l2_error(&s.psi_plus, |x, t| ex.psi_plus(x, t), level.t));
        em = Some(l2_error(&s.psi_minus, |x, t| ex.psi_minus(x, t), level.t));
        if let Some(phi) = level.phi_prev {
            ef = Some(l2_error(phi, |x, t| ex.phi(x, t), level.t - 0.5 * params.tau));
        }
    }
    Ok(DiagnosticsRecord {
        step: level.n,
        t: level.t,
        mass_plus: discrete_mass(&s.psi_plus, ops.mass()),
        mass_minus: discrete_mass(&s.psi_minus, ops.mass()),
        energy,
        compat_residual: compat_residual(&level.half.z_plus, &level.half.z_minus),
        err_psi_plus: ep,
        err_psi_minus: em,
        err_phi: ef,
    })
}

/// Largest `|x_n − x_0| / |x_0|` over a series (absolute when `x_0 = 0`).
pub fn max_relative_drift(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut it = values.into_iter();
    let Some(first) = it.next() else { return 0.0 };
    let scale = if first == 0.0 { 1.0 } else { first.abs() };
    it.map(|v| (v - first).abs() / scale).fold(0.0, f64::max)
}

/// One row of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub resolution: f64,
    pub error: f64,
    /// `log2(e_{j-1} / e_j)`; absent for the first row.
    pub rate: Option<f64>,
}

/// Observed orders for a halving sequence of resolutions (`h` or `τ`).
pub fn rate_table(entries: &[(f64, f64)]) -> Result<Vec<RateRow>> {
    if entries.len() < 2 {
        return Err(Error::invalid("a rate table needs at least two entries"));
    }
    for w in entries.windows(2) {
        let ratio = w[1].0 / w[0].0;
        if !((ratio - 0.5).abs() <= 1e-9) {
            return Err(Error::invalid(format!(
                "resolutions must halve: {} -> {} (ratio {ratio})",
                w[0].0, w[1].0
            )));
        }
    }
    Ok(entries
        .iter()
        .enumerate()
        .map(|(j, &(resolution, error))| RateRow {
            resolution,
            error,
            rate: (j > 0).then(|| (entries[j - 1].1 / error).log2()),
        })
        .collect())
}
