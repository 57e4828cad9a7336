//! Relaxation Crank–Nicolson stepper.
//!
//! One step from level `n` to `n + 1`:
//! 1. density relaxation `M (Z^{n+1/2} + Z^{n-1/2}) = 2 (|ψ^n|², φ_i)` per species,
//! 2. zero-mean Poisson solve `K φ^{n+1/2} = 4πq M (Z₊ − Z₋)^{n+1/2}` (skipped when `q = 0`),
//! 3. the two linear wave updates
//!    `((i/τ)M − K/4 − W(c)/2) ψ^{n+1} = ((i/τ)M + K/4 + W(c)/2) ψ^n`
//!    with `c₊ = gZ₊ + GZ₋ + qφ` and `c₋ = gZ₋ + GZ₊ − qφ`.
//!
//! Steps 1–2 form a [`HalfStep`]; the modified energy at level `n` needs it,
//! so [`run_with`] computes the half step, reports the level, then finishes
//! the step.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::assembly::{assemble_density_load, assemble_mass, assemble_stiffness, assemble_weighted_mass, SparseMatrix};
use crate::diagnostics::{self, DiagnosticsRecord};
use crate::fem::{l2_project_with, ComplexField, FeSpace, RealField};
use crate::linalg::{ComplexAnalysis, ComplexSolver, FactorCache, SolverKind, SpdSolver, ZeroMeanSolver};
use crate::problems::ExactSolution;
use crate::{Error, Result, C64};

/// Relative tolerance on equal initial masses.
pub const MASS_COMPAT_TOL: f64 = 1e-10;

/// Physical and time-grid parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    /// Self-interaction coefficient `g`.
    pub g: f64,
    /// Interspecies coefficient `G`.
    pub big_g: f64,
    /// Charge parameter `q`; zero selects the coupled-GPE reduction.
    pub q: f64,
    pub tau: f64,
    pub t_final: f64,
    /// `N = T / τ`.
    pub steps: usize,
}

impl Params {
    pub fn new(g: f64, big_g: f64, q: f64, tau: f64, t_final: f64) -> Result<Self> {
        for (name, v) in [("g", g), ("G", big_g), ("q", q)] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite")));
            }
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::invalid(format!("time step must be positive, got {tau}")));
        }
        if !(t_final >= 0.0 && t_final.is_finite()) {
            return Err(Error::invalid(format!("final time must be nonnegative, got {t_final}")));
        }
        let steps = (t_final / tau).round();
        if (steps * tau - t_final).abs() > 1e-12 * t_final.max(1.0) {
            return Err(Error::invalid(format!("T = {t_final} is not an integer multiple of tau = {tau}")));
        }
        Ok(Self {
            g,
            big_g,
            q,
            tau,
            t_final,
            steps: steps as usize,
        })
    }

    pub fn is_gpe(&self) -> bool {
        self.q == 0.0
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.tau
    }
}

/// Unknowns at level `n`: `ψ^n`, `Z^{n-1/2}` and `φ^{n-1/2}`.
#[derive(Debug, Clone)]
pub struct SchemeState {
    pub n: usize,
    pub psi_plus: ComplexField,
    pub psi_minus: ComplexField,
    pub z_plus: RealField,
    pub z_minus: RealField,
    /// Absent before the first step and whenever `q = 0`.
    pub phi: Option<RealField>,
}

/// Half-level quantities `Z^{n+1/2}`, `φ^{n+1/2}` produced from level `n`.
#[derive(Debug, Clone)]
pub struct HalfStep {
    pub z_plus: RealField,
    pub z_minus: RealField,
    pub phi: Option<RealField>,
}

/// Matrices and factorisations shared by every step on one space.
pub struct Operators {
    space: Arc<FeSpace>,
    mass: SparseMatrix<f64>,
    stiffness: SparseMatrix<f64>,
    mass_solver: SpdSolver,
    poisson: Option<ZeroMeanSolver>,
    analysis: Option<ComplexAnalysis>,
    /// Per-species factorisations for `SolverKind::Reuse`.
    caches: [FactorCache; 2],
    kind: SolverKind,
    parallel: bool,
}

impl Operators {
    /// Operators for `params`; the Poisson factorisation is built only when `q ≠ 0`.
    pub fn new(space: &Arc<FeSpace>, params: &Params, kind: SolverKind) -> Result<Self> {
        let mut ops = Self::gpe_only(space, kind)?;
        if !params.is_gpe() {
            ops.poisson = Some(ZeroMeanSolver::new(&ops.stiffness, space.basis_integrals(), kind)?);
        }
        Ok(ops)
    }

    /// Operators for the coupled-GPE reduction; never assembles a Poisson solver.
    pub fn gpe_only(space: &Arc<FeSpace>, kind: SolverKind) -> Result<Self> {
        let mass = assemble_mass(space);
        let stiffness = assemble_stiffness(space);
        let mass_solver = SpdSolver::new(&mass, kind)?;
        let analysis = match kind {
            SolverKind::Direct | SolverKind::Reuse => {
                Some(ComplexAnalysis::new(&SparseMatrix::combine(&[(C64::new(1.0, 0.0), &mass)])?)?)
            }
            SolverKind::Iterative => None,
        };
        Ok(Self {
            space: space.clone(),
            mass,
            stiffness,
            mass_solver,
            poisson: None,
            analysis,
            caches: Default::default(),
            kind,
            parallel: false,
        })
    }

    /// Runs the two species' solves concurrently.
    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn mass(&self) -> &SparseMatrix<f64> {
        &self.mass
    }

    pub fn stiffness(&self) -> &SparseMatrix<f64> {
        &self.stiffness
    }

    pub fn mass_solver(&self) -> &SpdSolver {
        &self.mass_solver
    }

    pub fn poisson(&self) -> Option<&ZeroMeanSolver> {
        self.poisson.as_ref()
    }

    pub fn kind(&self) -> SolverKind {
        self.kind
    }

    pub fn parallel(&self) -> bool {
        self.parallel
    }

    /// Complex factorisations performed so far by the reuse caches.
    pub fn reused_factorizations(&self) -> usize {
        self.caches.iter().map(FactorCache::factorizations).sum()
    }

    fn join<A: Send, B: Send>(&self, a: impl FnOnce() -> A + Send, b: impl FnOnce() -> B + Send) -> (A, B) {
        if self.parallel {
            rayon::join(a, b)
        } else {
            (a(), b())
        }
    }
}

/// How `ψ^0` and `Z^{-1/2}` are obtained from the initial data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitMode {
    /// L2 projections of `ψ₀` and `|ψ₀|²`.
    #[default]
    Projection,
    /// Nodal interpolants of `ψ₀` and `|ψ₀|²`.
    Interpolation,
}

impl std::str::FromStr for InitMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "projection" => Ok(InitMode::Projection),
            "interpolation" => Ok(InitMode::Interpolation),
            other => Err(format!("unknown init `{other}` (expected projection or interpolation)")),
        }
    }
}

/// `ψ^0 = P ψ₀`, `Z^{-1/2} = P |ψ₀|²` with `P` the L2 projection.
pub fn initialize(
    ops: &Operators,
    psi0_plus: impl Fn(&[f64]) -> C64,
    psi0_minus: impl Fn(&[f64]) -> C64,
) -> Result<SchemeState> {
    initialize_with(ops, InitMode::Projection, psi0_plus, psi0_minus)
}

/// Initial state using `mode`; rejects initial data with unequal discrete masses.
pub fn initialize_with(
    ops: &Operators,
    mode: InitMode,
    psi0_plus: impl Fn(&[f64]) -> C64,
    psi0_minus: impl Fn(&[f64]) -> C64,
) -> Result<SchemeState> {
    let space = ops.space();
    let (psi_plus, psi_minus, z_plus, z_minus) = match mode {
        InitMode::Projection => {
            let solver = ops.mass_solver();
            (
                l2_project_with(solver, space, &psi0_plus)?,
                l2_project_with(solver, space, &psi0_minus)?,
                l2_project_with(solver, space, |x| psi0_plus(x).norm_sqr())?,
                l2_project_with(solver, space, |x| psi0_minus(x).norm_sqr())?,
            )
        }
        InitMode::Interpolation => (
            ComplexField::interpolate(space, &psi0_plus),
            ComplexField::interpolate(space, &psi0_minus),
            RealField::interpolate(space, |x| psi0_plus(x).norm_sqr()),
            RealField::interpolate(space, |x| psi0_minus(x).norm_sqr()),
        ),
    };

    let mp = diagnostics::discrete_mass(&psi_plus, ops.mass());
    let mm = diagnostics::discrete_mass(&psi_minus, ops.mass());
    if (mp - mm).abs() > MASS_COMPAT_TOL * mp.max(mm) {
        return Err(Error::config(
            "initial data",
            format!("species masses differ ({mp:.12e} vs {mm:.12e}); the periodic Poisson problem needs equal masses"),
        ));
    }
    Ok(SchemeState {
        n: 0,
        psi_plus,
        psi_minus,
        z_plus,
        z_minus,
        phi: None,
    })
}

fn relax_one(ops: &Operators, psi: &ComplexField, z_old: &RealField) -> Result<RealField> {
    let space = ops.space();
    let mut b = assemble_density_load(space, psi)?;
    b.iter_mut().for_each(|v| *v *= 2.0);
    let mut z = ops.mass_solver().solve(&b)?;
    for (zi, old) in z.iter_mut().zip(z_old.values()) {
        *zi -= old;
    }
    RealField::from_values(space, z)
}

/// `Z^{n+1/2} = M⁻¹(2 (|ψ^n|², φ_i)) − Z^{n-1/2}` for both species.
pub fn relax_density(state: &SchemeState, ops: &Operators) -> Result<(RealField, RealField)> {
    let (zp, zm) = ops.join(
        || relax_one(ops, &state.psi_plus, &state.z_plus),
        || relax_one(ops, &state.psi_minus, &state.z_minus),
    );
    Ok((zp?, zm?))
}

/// Zero-mean `φ` with `K φ = 4πq M (Z₊ − Z₋)`; the zero field when `q = 0`.
pub fn solve_potential(z_plus: &RealField, z_minus: &RealField, params: &Params, ops: &Operators) -> Result<RealField> {
    let space = ops.space();
    z_plus.check_space(space)?;
    z_minus.check_space(space)?;
    if params.is_gpe() {
        return Ok(RealField::zeros(space));
    }
    let poisson = ops
        .poisson()
        .ok_or_else(|| Error::invalid("operators were built without a Poisson solver but q != 0"))?;
    let diff: Vec<f64> = z_plus.values().iter().zip(z_minus.values()).map(|(a, b)| a - b).collect();
    let scale = 4.0 * PI * params.q;
    let rhs: Vec<f64> = ops.mass().mul_vec(&diff).into_iter().map(|v| scale * v).collect();
    let load = |z: &RealField| ops.mass().mul_vec(z.values()).iter().map(|v| v * v).sum::<f64>().sqrt();
    let reference = scale.abs() * load(z_plus).max(load(z_minus));
    RealField::from_values(space, poisson.solve_scaled(&rhs, reference)?)
}

/// Nodal interaction coefficients `(c₊, c₋)`; the `φ` terms are omitted when `phi` is absent.
pub fn interaction_coefficients(
    z_plus: &RealField,
    z_minus: &RealField,
    phi: Option<&RealField>,
    params: &Params,
) -> Result<(RealField, RealField)> {
    let space = z_plus.space();
    z_minus.check_space(space)?;
    let (g, gg, q) = (params.g, params.big_g, params.q);
    let zp = z_plus.values();
    let zm = z_minus.values();
    let mut cp: Vec<f64> = zp.iter().zip(zm).map(|(&a, &b)| g * a + gg * b).collect();
    let mut cm: Vec<f64> = zm.iter().zip(zp).map(|(&a, &b)| g * a + gg * b).collect();
    if let Some(phi) = phi {
        phi.check_space(space)?;
        for ((p, m), &f) in cp.iter_mut().zip(cm.iter_mut()).zip(phi.values()) {
            *p += q * f;
            *m -= q * f;
        }
    }
    Ok((RealField::from_values(space, cp)?, RealField::from_values(space, cm)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Species {
    Plus,
    Minus,
}

/// One Crank–Nicolson wave update with interaction coefficient `c`, always
/// with a fresh factorisation.
pub fn advance_wave(psi: &ComplexField, c: &RealField, params: &Params, ops: &Operators) -> Result<ComplexField> {
    let (lhs, rhs) = wave_system(psi, c, params, ops)?;
    let solver = match &ops.analysis {
        Some(analysis) => ComplexSolver::with_analysis(&lhs, analysis)?,
        None => ComplexSolver::new(&lhs, ops.kind())?,
    };
    ComplexField::from_values(ops.space(), solver.solve(&rhs)?)
}

/// As [`advance_wave`], but under `SolverKind::Reuse` the factorisation kept
/// for `species` is reused while it still preconditions well.
pub fn advance_species(
    psi: &ComplexField,
    c: &RealField,
    species: Species,
    params: &Params,
    ops: &Operators,
) -> Result<ComplexField> {
    match (ops.kind(), &ops.analysis) {
        (SolverKind::Reuse, Some(analysis)) => {
            let (lhs, rhs) = wave_system(psi, c, params, ops)?;
            let cache = &ops.caches[species as usize];
            ComplexField::from_values(ops.space(), cache.solve(&lhs, analysis, &rhs)?)
        }
        _ => advance_wave(psi, c, params, ops),
    }
}

fn wave_system(
    psi: &ComplexField,
    c: &RealField,
    params: &Params,
    ops: &Operators,
) -> Result<(SparseMatrix<C64>, Vec<C64>)> {
    psi.check_space(ops.space())?;
    let w = assemble_weighted_mass(ops.space(), c)?;
    let it = C64::new(0.0, 1.0 / params.tau);
    let lhs = SparseMatrix::combine(&[
        (it, ops.mass()),
        (C64::new(-0.25, 0.0), ops.stiffness()),
        (C64::new(-0.5, 0.0), &w),
    ])?;
    let rhs_op = SparseMatrix::combine(&[
        (it, ops.mass()),
        (C64::new(0.25, 0.0), ops.stiffness()),
        (C64::new(0.5, 0.0), &w),
    ])?;
    let rhs = rhs_op.mul_vec(psi.values());
    Ok((lhs, rhs))
}

/// Density relaxation and Poisson solve from level `n`.
pub fn half_step(state: &SchemeState, params: &Params, ops: &Operators) -> Result<HalfStep> {
    let (z_plus, z_minus) = relax_density(state, ops)?;
    let phi = if params.is_gpe() {
        None
    } else {
        Some(solve_potential(&z_plus, &z_minus, params, ops)?)
    };
    Ok(HalfStep { z_plus, z_minus, phi })
}

/// Wave updates completing the step started by `half`.
pub fn complete_step(state: &SchemeState, half: HalfStep, params: &Params, ops: &Operators) -> Result<SchemeState> {
    let (cp, cm) = interaction_coefficients(&half.z_plus, &half.z_minus, half.phi.as_ref(), params)?;
    let (pp, pm) = ops.join(
        || advance_species(&state.psi_plus, &cp, Species::Plus, params, ops),
        || advance_species(&state.psi_minus, &cm, Species::Minus, params, ops),
    );
    Ok(SchemeState {
        n: state.n + 1,
        psi_plus: pp?,
        psi_minus: pm?,
        z_plus: half.z_plus,
        z_minus: half.z_minus,
        phi: half.phi,
    })
}

/// One full step `n → n + 1`.
pub fn step(state: &SchemeState, params: &Params, ops: &Operators) -> Result<SchemeState> {
    let half = half_step(state, params, ops)?;
    complete_step(state, half, params, ops)
}

/// One step of the coupled-GPE scheme (no potential at all).
pub fn step_gpe(state: &SchemeState, params: &Params, ops: &Operators) -> Result<SchemeState> {
    let (z_plus, z_minus) = relax_density(state, ops)?;
    let (g, gg) = (params.g, params.big_g);
    let cp: Vec<f64> = z_plus.values().iter().zip(z_minus.values()).map(|(&a, &b)| g * a + gg * b).collect();
    let cm: Vec<f64> = z_minus.values().iter().zip(z_plus.values()).map(|(&a, &b)| g * a + gg * b).collect();
    let space = ops.space();
    let cp = RealField::from_values(space, cp)?;
    let cm = RealField::from_values(space, cm)?;
    Ok(SchemeState {
        n: state.n + 1,
        psi_plus: advance_species(&state.psi_plus, &cp, Species::Plus, params, ops)?,
        psi_minus: advance_species(&state.psi_minus, &cm, Species::Minus, params, ops)?,
        z_plus,
        z_minus,
        phi: None,
    })
}

/// `φ^{n-1/2}`: stored in the state after the first step, recomputed from
/// `Z^{-1/2}` at level 0. Absent when `q = 0`.
pub fn previous_potential(state: &SchemeState, params: &Params, ops: &Operators) -> Result<Option<RealField>> {
    if params.is_gpe() {
        return Ok(None);
    }
    match &state.phi {
        Some(phi) => Ok(Some(phi.clone())),
        None => solve_potential(&state.z_plus, &state.z_minus, params, ops).map(Some),
    }
}

/// Everything known at level `n` once its half step is done.
pub struct Level<'a> {
    pub n: usize,
    pub t: f64,
    pub state: &'a SchemeState,
    pub half: &'a HalfStep,
    /// `φ^{n-1/2}`.
    pub phi_prev: Option<&'a RealField>,
}

/// Runs `params.steps` steps from `initial`, calling `observe` at every level
/// `0..=N` (the last level gets an extra half step so its energy is defined).
pub fn run_with(
    ops: &Operators,
    params: &Params,
    initial: SchemeState,
    mut observe: impl FnMut(&Level) -> Result<()>,
) -> Result<SchemeState> {
    let mut state = initial;
    let first = state.n;
    let mut phi_prev = previous_potential(&state, params, ops).map_err(|e| e.at_step(first))?;
    for n in first..=first + params.steps {
        let half = half_step(&state, params, ops).map_err(|e| e.at_step(n))?;
        observe(&Level {
            n,
            t: params.time(n),
            state: &state,
            half: &half,
            phi_prev: phi_prev.as_ref(),
        })?;
        if n == first + params.steps {
            break;
        }
        phi_prev = half.phi.clone();
        state = complete_step(&state, half, params, ops).map_err(|e| e.at_step(n))?;
    }
    Ok(state)
}

/// Run configuration for [`run`].
#[derive(Clone, Copy)]
pub struct RunOptions<'a> {
    /// Record every `stride`-th level (the final level is always recorded).
    pub stride: usize,
    pub exact: Option<&'a dyn ExactSolution>,
}

impl Default for RunOptions<'_> {
    fn default() -> Self {
        Self { stride: 1, exact: None }
    }
}

/// Runs the scheme and collects diagnostics records.
pub fn run(
    ops: &Operators,
    params: &Params,
    initial: SchemeState,
    options: RunOptions,
) -> Result<(SchemeState, Vec<DiagnosticsRecord>)> {
    if options.stride == 0 {
        return Err(Error::invalid("diagnostics stride must be at least 1"));
    }
    let last = initial.n + params.steps;
    let mut records = Vec::new();
    let state = run_with(ops, params, initial, |level| {
        if level.n % options.stride == 0 || level.n == last {
            records.push(diagnostics::record(level, params, ops, options.exact).map_err(|e| e.at_step(level.n))?);
        }
        Ok(())
    })?;
    Ok((state, records))
}
