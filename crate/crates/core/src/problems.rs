//! Catalog of exact-solution problems plus a hook for user-defined ones.
//!
//! Catalog names: `density_wave_1d`, `gpe_plane_wave_2d`, `density_wave_2d`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::Mesh;
use crate::scheme::Params;
use crate::{Error, Result, C64};

pub const CATALOG: [&str; 3] = ["density_wave_1d", "gpe_plane_wave_2d", "density_wave_2d"];

/// Exact solution `(ψ₊, ψ₋, φ)` with analytic Laplacians.
pub trait ExactSolution: Send + Sync {
    fn psi_plus(&self, x: &[f64], t: f64) -> C64;
    fn psi_minus(&self, x: &[f64], t: f64) -> C64;
    fn phi(&self, x: &[f64], t: f64) -> f64;
    fn laplacian_psi_plus(&self, x: &[f64], t: f64) -> C64;
    fn laplacian_psi_minus(&self, x: &[f64], t: f64) -> C64;
    fn laplacian_phi(&self, x: &[f64], t: f64) -> f64;
    /// The same family with every temporal frequency multiplied by `factor`.
    fn with_frequency_scaled(&self, factor: f64) -> Arc<dyn ExactSolution>;
}

pub type InitialData = Arc<dyn Fn(&[f64]) -> C64 + Send + Sync>;

/// `ψ₊ = U₀ e^{-iμt} cos(2πx/l0)`, `ψ₋ = U₀ e^{-iμt} sin(2πx/l0)`, `φ = Φ₀ cos(4πx/l0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityWave1d {
    pub u0: f64,
    pub l0: f64,
    pub mu: f64,
    pub phi0: f64,
}

impl DensityWave1d {
    fn k(&self) -> f64 {
        2.0 * PI / self.l0
    }

    fn phase(&self, t: f64) -> C64 {
        C64::from_polar(1.0, -self.mu * t)
    }
}

impl ExactSolution for DensityWave1d {
    fn psi_plus(&self, x: &[f64], t: f64) -> C64 {
        self.phase(t) * (self.u0 * (self.k() * x[0]).cos())
    }
    fn psi_minus(&self, x: &[f64], t: f64) -> C64 {
        self.phase(t) * (self.u0 * (self.k() * x[0]).sin())
    }
    fn phi(&self, x: &[f64], _t: f64) -> f64 {
        self.phi0 * (2.0 * self.k() * x[0]).cos()
    }
    fn laplacian_psi_plus(&self, x: &[f64], t: f64) -> C64 {
        self.psi_plus(x, t) * -(self.k() * self.k())
    }
    fn laplacian_psi_minus(&self, x: &[f64], t: f64) -> C64 {
        self.psi_minus(x, t) * -(self.k() * self.k())
    }
    fn laplacian_phi(&self, x: &[f64], t: f64) -> f64 {
        -4.0 * self.k() * self.k() * self.phi(x, t)
    }
    fn with_frequency_scaled(&self, factor: f64) -> Arc<dyn ExactSolution> {
        Arc::new(Self {
            mu: self.mu * factor,
            ..*self
        })
    }
}

/// Plane waves `ψ₊ = a₀ e^{i(a₁t + a₂(x+y) + x₁)}`, `ψ₋ = b₀ e^{i(b₁t + b₂(x+y) + x₂)}`, `φ = 0`.
///
/// `amp_plus`/`amp_minus` are the amplitudes (`A₀`, `B₀`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWave2d {
    pub amp_plus: f64,
    pub freq_plus: f64,
    pub wave_plus: f64,
    pub shift_plus: f64,
    pub amp_minus: f64,
    pub freq_minus: f64,
    pub wave_minus: f64,
    pub shift_minus: f64,
}

impl ExactSolution for PlaneWave2d {
    fn psi_plus(&self, x: &[f64], t: f64) -> C64 {
        C64::from_polar(
            self.amp_plus,
            self.freq_plus * t + self.wave_plus * (x[0] + x[1]) + self.shift_plus,
        )
    }
    fn psi_minus(&self, x: &[f64], t: f64) -> C64 {
        C64::from_polar(
            self.amp_minus,
            self.freq_minus * t + self.wave_minus * (x[0] + x[1]) + self.shift_minus,
        )
    }
    fn phi(&self, _x: &[f64], _t: f64) -> f64 {
        0.0
    }
    fn laplacian_psi_plus(&self, x: &[f64], t: f64) -> C64 {
        self.psi_plus(x, t) * (-2.0 * self.wave_plus * self.wave_plus)
    }
    fn laplacian_psi_minus(&self, x: &[f64], t: f64) -> C64 {
        self.psi_minus(x, t) * (-2.0 * self.wave_minus * self.wave_minus)
    }
    fn laplacian_phi(&self, _x: &[f64], _t: f64) -> f64 {
        0.0
    }
    fn with_frequency_scaled(&self, factor: f64) -> Arc<dyn ExactSolution> {
        Arc::new(Self {
            freq_plus: self.freq_plus * factor,
            freq_minus: self.freq_minus * factor,
            ..*self
        })
    }
}

/// `ψ₊ = e^{-iμt}(U₀ₓ cos kx + iU₀ᵧ cos ky)`, `ψ₋ = e^{-iμt}(U₀ₓ sin kx + iU₀ᵧ sin ky)`,
/// `φ = Φ₀ₓ cos 2kx + Φ₀ᵧ cos 2ky`, `k = 2π/l0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityWave2d {
    pub u0x: f64,
    pub u0y: f64,
    pub l0: f64,
    pub mu: f64,
    pub phi0x: f64,
    pub phi0y: f64,
}

impl DensityWave2d {
    fn k(&self) -> f64 {
        2.0 * PI / self.l0
    }
}

impl ExactSolution for DensityWave2d {
    fn psi_plus(&self, x: &[f64], t: f64) -> C64 {
        let k = self.k();
        C64::from_polar(1.0, -self.mu * t) * C64::new(self.u0x * (k * x[0]).cos(), self.u0y * (k * x[1]).cos())
    }
    fn psi_minus(&self, x: &[f64], t: f64) -> C64 {
        let k = self.k();
        C64::from_polar(1.0, -self.mu * t) * C64::new(self.u0x * (k * x[0]).sin(), self.u0y * (k * x[1]).sin())
    }
    fn phi(&self, x: &[f64], _t: f64) -> f64 {
        let k2 = 2.0 * self.k();
        self.phi0x * (k2 * x[0]).cos() + self.phi0y * (k2 * x[1]).cos()
    }
    fn laplacian_psi_plus(&self, x: &[f64], t: f64) -> C64 {
        self.psi_plus(x, t) * -(self.k() * self.k())
    }
    fn laplacian_psi_minus(&self, x: &[f64], t: f64) -> C64 {
        self.psi_minus(x, t) * -(self.k() * self.k())
    }
    fn laplacian_phi(&self, x: &[f64], t: f64) -> f64 {
        -4.0 * self.k() * self.k() * self.phi(x, t)
    }
    fn with_frequency_scaled(&self, factor: f64) -> Arc<dyn ExactSolution> {
        Arc::new(Self {
            mu: self.mu * factor,
            ..*self
        })
    }
}

/// A problem: domain, coefficients, initial data and optional exact solution.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub dim: usize,
    pub extents: Vec<f64>,
    pub g: f64,
    pub big_g: f64,
    pub q: f64,
    pub initial_plus: InitialData,
    pub initial_minus: InitialData,
    pub exact: Option<Arc<dyn ExactSolution>>,
    /// Named derived constants (`l0`, `U0`, `Phi0`, `mu`, ...).
    pub constants: Vec<(&'static str, f64)>,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("extents", &self.extents)
            .field("g", &self.g)
            .field("G", &self.big_g)
            .field("q", &self.q)
            .field("exact", &self.exact.is_some())
            .field("constants", &self.constants)
            .finish()
    }
}

fn l0_of(g: f64, big_g: f64, q: f64) -> f64 {
    (2.0 * PI * (big_g - g)).sqrt() / q
}

impl ProblemSpec {
    /// User-defined problem; initial data from closures, exact solution optional.
    #[allow(clippy::too_many_arguments)]
    pub fn custom(
        name: impl Into<String>,
        extents: Vec<f64>,
        g: f64,
        big_g: f64,
        q: f64,
        initial_plus: InitialData,
        initial_minus: InitialData,
        exact: Option<Arc<dyn ExactSolution>>,
    ) -> Result<Self> {
        if !(1..=2).contains(&extents.len()) || extents.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::invalid("extents must be one or two positive lengths"));
        }
        Ok(Self {
            name: name.into(),
            dim: extents.len(),
            extents,
            g,
            big_g,
            q,
            initial_plus,
            initial_minus,
            exact,
            constants: Vec::new(),
        })
    }

    fn from_exact(
        name: &str,
        extents: Vec<f64>,
        (g, big_g, q): (f64, f64, f64),
        exact: Arc<dyn ExactSolution>,
        constants: Vec<(&'static str, f64)>,
    ) -> Self {
        let (ep, em) = (exact.clone(), exact.clone());
        Self {
            name: name.to_string(),
            dim: extents.len(),
            extents,
            g,
            big_g,
            q,
            initial_plus: Arc::new(move |x| ep.psi_plus(x, 0.0)),
            initial_minus: Arc::new(move |x| em.psi_minus(x, 0.0)),
            exact: Some(exact),
            constants,
        }
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.iter().find(|(n, _)| *n == name).map(|&(_, v)| v)
    }

    pub fn params(&self, tau: f64, t_final: f64) -> Result<Params> {
        Params::new(self.g, self.big_g, self.q, tau, t_final)
    }

    /// Uniform periodic mesh with `n` divisions per axis.
    pub fn mesh(&self, n: usize) -> Result<Mesh> {
        match self.dim {
            1 => Mesh::interval(self.extents[0], n),
            _ => Mesh::rectangle(self.extents[0], self.extents[1], n, n),
        }
    }

    /// Deterministic random `(x, t)` samples with `x ∈ Ω`, `t ∈ [0, t_max]`.
    pub fn sample_points(&self, count: usize, t_max: f64, seed: u64) -> Vec<(Vec<f64>, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let x = self.extents.iter().map(|&l| rng.gen_range(0.0..l)).collect();
                (x, rng.gen_range(0.0..=t_max))
            })
            .collect()
    }

    /// Largest PDE residual of the exact solution at `samples`.
    pub fn residual_check(&self, samples: &[(Vec<f64>, f64)]) -> Result<f64> {
        let exact = self
            .exact
            .as_deref()
            .ok_or_else(|| Error::invalid(format!("problem `{}` has no exact solution", self.name)))?;
        Ok(residual_check(exact, self.g, self.big_g, self.q, samples))
    }
}

/// `d/dt f` by a Richardson-extrapolated centred difference (fourth order).
fn time_derivative(f: impl Fn(f64) -> C64, t: f64, delta: f64) -> C64 {
    let d = |h: f64| (f(t + h) - f(t - h)) / (2.0 * h);
    (d(0.5 * delta) * 4.0 - d(delta)) / 3.0
}

/// Largest pointwise residual of the three model equations
/// `iψ±_t = −½Δψ± + (g|ψ±|² + G|ψ∓|² ± qφ)ψ±`, `−Δφ = 4πq(|ψ₊|² − |ψ₋|²)`
/// with analytic space derivatives and finite differences in time.
pub fn residual_check(exact: &dyn ExactSolution, g: f64, big_g: f64, q: f64, samples: &[(Vec<f64>, f64)]) -> f64 {
    const DELTA: f64 = 1e-4;
    let i = C64::new(0.0, 1.0);
    let mut worst: f64 = 0.0;
    for (x, t) in samples {
        let (x, t) = (x.as_slice(), *t);
        let pp = exact.psi_plus(x, t);
        let pm = exact.psi_minus(x, t);
        let phi = exact.phi(x, t);
        let (dp, dm) = (pp.norm_sqr(), pm.norm_sqr());
        let dt_p = time_derivative(|s| exact.psi_plus(x, s), t, DELTA);
        let dt_m = time_derivative(|s| exact.psi_minus(x, s), t, DELTA);
        let r_plus = i * dt_p + exact.laplacian_psi_plus(x, t) * 0.5 - pp * (g * dp + big_g * dm + q * phi);
        let r_minus = i * dt_m + exact.laplacian_psi_minus(x, t) * 0.5 - pm * (g * dm + big_g * dp - q * phi);
        let r_phi = -exact.laplacian_phi(x, t) - 4.0 * PI * q * (dp - dm);
        worst = worst.max(r_plus.norm()).max(r_minus.norm()).max(r_phi.abs());
    }
    worst
}

/// Example 1: one-dimensional density wave.
pub fn density_wave_1d() -> ProblemSpec {
    let (q, big_g, g) = (1.0, 2.0, 1.0);
    let l0 = l0_of(g, big_g, q);
    let u0 = 2.0 * 5f64.sqrt();
    let phi0 = (big_g - g) * u0 * u0 / (2.0 * q);
    let mu = 2.0 * PI * PI / (l0 * l0) + 0.5 * (big_g + g) * u0 * u0;
    let exact = DensityWave1d { u0, l0, mu, phi0 };
    ProblemSpec::from_exact(
        "density_wave_1d",
        vec![8.0 * l0],
        (g, big_g, q),
        Arc::new(exact),
        vec![("l0", l0), ("L", 8.0 * l0), ("U0", u0), ("Phi0", phi0), ("mu", mu)],
    )
}

/// Example 2: two-dimensional plane waves of the coupled GPE (`q = 0`).
pub fn gpe_plane_wave_2d() -> ProblemSpec {
    let (q, big_g, g) = (0.0, 2.0, 1.0);
    let l = 5.0;
    let (a0, b0) = (4.5, 4.5);
    let (a2, b2) = (4.0 * PI / 5.0, 4.0 * PI / 5.0);
    let (x1, x2) = (0.0, PI / 5.0);
    let a1 = -(a2 * a2 + g * a0 * a0 + big_g * b0 * b0);
    let b1 = -(b2 * b2 + big_g * a0 * a0 + g * b0 * b0);
    let exact = PlaneWave2d {
        amp_plus: a0,
        freq_plus: a1,
        wave_plus: a2,
        shift_plus: x1,
        amp_minus: b0,
        freq_minus: b1,
        wave_minus: b2,
        shift_minus: x2,
    };
    ProblemSpec::from_exact(
        "gpe_plane_wave_2d",
        vec![l, l],
        (g, big_g, q),
        Arc::new(exact),
        vec![
            ("L", l),
            ("amp_plus", a0),
            ("amp_minus", b0),
            ("A1", a1),
            ("A2", a2),
            ("B1", b1),
            ("B2", b2),
            ("X1", x1),
            ("X2", x2),
        ],
    )
}

/// Example 3: two-dimensional density wave on `[0, l0]²`.
pub fn density_wave_2d() -> ProblemSpec {
    let (q, big_g, g) = (1.0, 2.0, 1.0);
    let l0 = l0_of(g, big_g, q);
    let (u0x, u0y) = (2.0 * 5f64.sqrt(), 2.0 * 5f64.sqrt());
    let phi0x = (big_g - g) * u0x * u0x / (2.0 * q);
    let phi0y = (big_g - g) * u0y * u0y / (2.0 * q);
    let mu = 2.0 * PI * PI / (l0 * l0) + 0.5 * (big_g + g) * (u0x * u0x + u0y * u0y);
    let exact = DensityWave2d {
        u0x,
        u0y,
        l0,
        mu,
        phi0x,
        phi0y,
    };
    ProblemSpec::from_exact(
        "density_wave_2d",
        vec![l0, l0],
        (g, big_g, q),
        Arc::new(exact),
        vec![
            ("l0", l0),
            ("L", l0),
            ("U0x", u0x),
            ("U0y", u0y),
            ("Phi0x", phi0x),
            ("Phi0y", phi0y),
            ("mu", mu),
        ],
    )
}

/// Looks up a catalog problem by name.
pub fn catalog_get(name: &str) -> Result<ProblemSpec> {
    match name {
        "density_wave_1d" => Ok(density_wave_1d()),
        "gpe_plane_wave_2d" => Ok(gpe_plane_wave_2d()),
        "density_wave_2d" => Ok(density_wave_2d()),
        other => Err(Error::invalid(format!(
            "unknown problem `{other}` (catalog: {})",
            CATALOG.join(", ")
        ))),
    }
}
