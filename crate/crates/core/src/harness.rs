//! Experiment driver behind the `gppfem` binary: config parsing, single runs
//! and convergence sweeps, CSV output.
//!
//! Config format: one `key=value` per line, `#` starts a comment.
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `problem` | catalog name | required |
//! | `degree` | 1 or 2 | required |
//! | `n` | divisions per axis | required unless `nx`/`ny` |
//! | `nx`, `ny` | divisions per axis (2D) | `n` |
//! | `tau` | time step | required |
//! | `T` | final time | required |
//! | `stride` | diagnostics stride | 1 |
//! | `output` | output directory | `output` |
//! | `solver` | `direct`, `iterative` or `reuse` | `direct` |
//! | `parallel` | `true`/`false` | `false` |
//! | `init` | `interpolation` or `projection` of the initial data | `interpolation` |
//!
//! The default `init=interpolation` reproduces the reference error tables;
//! `init=projection` uses L2 projections.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::diagnostics::{rate_table, DiagnosticsRecord, RateRow};
use crate::fem::{build_space, RealField};
use crate::linalg::SolverKind;
use crate::problems::{catalog_get, ProblemSpec};
use crate::scheme::{initialize_with, run, run_with, InitMode, Operators, RunOptions, SchemeState};
use crate::{Error, Result};

/// Rows of 2D P2 space sweeps at or above this many divisions need `--extended`.
pub const EXTENDED_DIVISIONS: usize = 160;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    Space,
    Time,
}

impl std::str::FromStr for Sweep {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "space" => Ok(Sweep::Space),
            "time" => Ok(Sweep::Time),
            other => Err(format!("unknown sweep `{other}` (expected space or time)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: String,
    pub degree: usize,
    /// Divisions per axis; one entry per dimension.
    pub divisions: Vec<usize>,
    pub tau: f64,
    pub t_final: f64,
    pub stride: usize,
    pub output: PathBuf,
    pub solver: SolverKind,
    pub parallel: bool,
    pub init: InitMode,
}

fn line_error(line: usize, key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
        line: Some(line),
    }
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, value: &str, what: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| line_error(line, key, format!("expected {what}, got `{value}`")))
}

fn positive_count(line: usize, key: &str, value: &str) -> Result<usize> {
    let n: usize = parse_value(line, key, value, "a positive integer")?;
    if n == 0 {
        return Err(line_error(line, key, "must be at least 1"));
    }
    Ok(n)
}

/// Parses the flat `key=value` config format.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut problem = None;
    let mut degree = None;
    let (mut n, mut nx, mut ny) = (None, None, None);
    let (mut tau, mut t_final) = (None, None);
    let mut stride = 1;
    let mut output = PathBuf::from("output");
    let mut solver = SolverKind::Direct;
    let mut parallel = false;
    let mut init = InitMode::Interpolation;
    let mut seen = std::collections::HashSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| line_error(line, content, "expected key=value"))?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(line_error(line, key, "duplicate key"));
        }
        match key {
            "problem" => {
                catalog_get(value).map_err(|e| line_error(line, key, e.to_string()))?;
                problem = Some(value.to_string());
            }
            "degree" => {
                let k: usize = parse_value(line, key, value, "an integer")?;
                if !(1..=2).contains(&k) {
                    return Err(line_error(line, key, format!("unsupported degree {k} (expected 1 or 2)")));
                }
                degree = Some(k);
            }
            "n" => n = Some(positive_count(line, key, value)?),
            "nx" => nx = Some(positive_count(line, key, value)?),
            "ny" => ny = Some(positive_count(line, key, value)?),
            "tau" => {
                let v: f64 = parse_value(line, key, value, "a number")?;
                if !(v > 0.0 && v.is_finite()) {
                    return Err(line_error(line, key, "must be positive"));
                }
                tau = Some(v);
            }
            "T" => {
                let v: f64 = parse_value(line, key, value, "a number")?;
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(line_error(line, key, "must be nonnegative"));
                }
                t_final = Some(v);
            }
            "stride" => stride = positive_count(line, key, value)?,
            "output" => output = PathBuf::from(value),
            "solver" => solver = value.parse().map_err(|e: String| line_error(line, key, e))?,
            "parallel" => parallel = parse_value(line, key, value, "true or false")?,
            "init" => init = value.parse().map_err(|e: String| line_error(line, key, e))?,
            other => return Err(line_error(line, other, "unknown key")),
        }
    }

    let problem = problem.ok_or_else(|| Error::config("problem", "missing problem"))?;
    let degree = degree.ok_or_else(|| Error::config("degree", "missing degree"))?;
    let tau = tau.ok_or_else(|| Error::config("tau", "missing tau"))?;
    let t_final = t_final.ok_or_else(|| Error::config("T", "missing T"))?;
    let dim = catalog_get(&problem)?.dim;
    let divisions = match dim {
        1 => {
            if nx.is_some() || ny.is_some() {
                return Err(Error::config("nx", "nx/ny apply to 2D problems; use n"));
            }
            vec![n.ok_or_else(|| Error::config("n", "missing n"))?]
        }
        _ => {
            let x = nx.or(n).ok_or_else(|| Error::config("n", "missing n (or nx and ny)"))?;
            let y = ny.or(n).ok_or_else(|| Error::config("ny", "missing ny"))?;
            vec![x, y]
        }
    };
    let steps = (t_final / tau).round();
    if (steps * tau - t_final).abs() > 1e-12 * t_final.max(1.0) {
        return Err(Error::config("T", format!("T = {t_final} is not an integer multiple of tau = {tau}")));
    }
    Ok(RunConfig {
        problem,
        degree,
        divisions,
        tau,
        t_final,
        stride,
        output,
        solver,
        parallel,
        init,
    })
}

/// Reads and parses a config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// C `%.{prec}e`: mantissa, `e`, sign, at least two exponent digits.
pub fn format_sci(x: f64, prec: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.prec$e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// C `%.2f`.
pub fn format_rate(rate: Option<f64>) -> String {
    // Flat columns give ±tiny rates; print them as 0.00, never -0.00.
    rate.map(|r| format!("{:.2}", if r.abs() < 0.005 { 0.0 } else { r }))
        .unwrap_or_default()
}

fn map_config(e: Error, key: &str) -> Error {
    match e {
        Error::InvalidArgument(message) => Error::config(key, message),
        other => other,
    }
}

struct Setup {
    spec: ProblemSpec,
    ops: Operators,
    params: crate::scheme::Params,
}

fn setup(cfg: &RunConfig, divisions: &[usize], tau: f64) -> Result<Setup> {
    let spec = catalog_get(&cfg.problem).map_err(|e| map_config(e, "problem"))?;
    if let Some(exact) = &spec.exact {
        let samples = spec.sample_points(20, 1.0, 0);
        let r = crate::problems::residual_check(exact.as_ref(), spec.g, spec.big_g, spec.q, &samples);
        if r > 1e-6 {
            eprintln!("warning: exact solution of `{}` has PDE residual {r:.3e}", spec.name);
        }
    }
    let mesh = match spec.dim {
        1 => crate::mesh::Mesh::interval(spec.extents[0], divisions[0]),
        _ => crate::mesh::Mesh::rectangle(spec.extents[0], spec.extents[1], divisions[0], divisions[1]),
    }
    .map_err(|e| map_config(e, "n"))?;
    let space = build_space(mesh, cfg.degree).map_err(|e| map_config(e, "degree"))?;
    let params = spec.params(tau, cfg.t_final).map_err(|e| map_config(e, "tau"))?;
    let ops = Operators::new(&space, &params, cfg.solver)?.with_parallel(cfg.parallel);
    Ok(Setup { spec, ops, params })
}

fn initial_state(s: &Setup, mode: InitMode) -> Result<SchemeState> {
    let (p, m) = (s.spec.initial_plus.clone(), s.spec.initial_minus.clone());
    initialize_with(&s.ops, mode, move |x| p(x), move |x| m(x))
}

/// Output of [`cmd_run`].
#[derive(Debug)]
pub struct RunReport {
    pub records: Vec<DiagnosticsRecord>,
    pub diagnostics_path: PathBuf,
    pub snapshot_path: PathBuf,
}

/// Diagnostics CSV text.
pub fn diagnostics_csv(records: &[DiagnosticsRecord], with_errors: bool) -> String {
    let mut out = String::from("step,t,mass_plus,mass_minus,energy,compat_residual");
    if with_errors {
        out.push_str(",err_psi_plus,err_psi_minus,err_phi");
    }
    out.push('\n');
    let opt = |v: Option<f64>| v.map(|v| format_sci(v, 6)).unwrap_or_default();
    for r in records {
        let _ = write!(
            out,
            "{},{},{},{},{},{}",
            r.step,
            format_sci(r.t, 6),
            format_sci(r.mass_plus, 6),
            format_sci(r.mass_minus, 6),
            format_sci(r.energy, 6),
            format_sci(r.compat_residual, 6)
        );
        if with_errors {
            let _ = write!(out, ",{},{},{}", opt(r.err_psi_plus), opt(r.err_psi_minus), opt(r.err_phi));
        }
        out.push('\n');
    }
    out
}

/// Snapshot CSV text: DOF coordinates, `Re/Im ψ±` and `φ`.
pub fn snapshot_csv(state: &SchemeState) -> String {
    let space = state.psi_plus.space();
    let dim = space.dim();
    let mut out = String::from(if dim == 1 { "x" } else { "x,y" });
    out.push_str(",re_psi_plus,im_psi_plus,re_psi_minus,im_psi_minus,phi\n");
    let zero = RealField::zeros(space);
    let phi = state.phi.as_ref().unwrap_or(&zero);
    for (i, c) in space.dof_coords().iter().enumerate() {
        for v in &c[..dim] {
            out.push_str(&format_sci(*v, 6));
            out.push(',');
        }
        let (p, m) = (state.psi_plus.values()[i], state.psi_minus.values()[i]);
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            format_sci(p.re, 6),
            format_sci(p.im, 6),
            format_sci(m.re, 6),
            format_sci(m.im, 6),
            format_sci(phi.values()[i], 6)
        );
    }
    out
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}

/// Single simulation: writes `diagnostics.csv` and `snapshot.csv` to the output directory.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunReport> {
    let s = setup(cfg, &cfg.divisions, cfg.tau)?;
    let state = initial_state(&s, cfg.init)?;
    let options = RunOptions {
        stride: cfg.stride,
        exact: s.spec.exact.as_deref(),
    };
    let (final_state, records) = run(&s.ops, &s.params, state, options)?;
    let diagnostics_path = write_file(
        &cfg.output,
        "diagnostics.csv",
        &diagnostics_csv(&records, s.spec.exact.is_some()),
    )?;
    let snapshot_path = write_file(&cfg.output, "snapshot.csv", &snapshot_csv(&final_state))?;
    Ok(RunReport {
        records,
        diagnostics_path,
        snapshot_path,
    })
}

/// Errors at `t = T` of one run: `(e_ψ₊, e_ψ₋, e_φ)`, `e_φ` for `φ^{N-1/2}`.
pub fn final_errors(cfg: &RunConfig, divisions: &[usize], tau: f64) -> Result<(f64, f64, Option<f64>)> {
    let s = setup(cfg, divisions, tau)?;
    let exact = s
        .spec
        .exact
        .clone()
        .ok_or_else(|| Error::config("problem", "convergence studies need an exact solution"))?;
    let state = initial_state(&s, cfg.init)?;
    let last = s.params.steps;
    let mut out = None;
    run_with(&s.ops, &s.params, state, |level| {
        if level.n == last {
            let ex = exact.as_ref();
            let ep = crate::diagnostics::l2_error(&level.state.psi_plus, |x, t| ex.psi_plus(x, t), level.t);
            let em = crate::diagnostics::l2_error(&level.state.psi_minus, |x, t| ex.psi_minus(x, t), level.t);
            let ef = level
                .phi_prev
                .map(|phi| crate::diagnostics::l2_error(phi, |x, t| ex.phi(x, t), level.t - 0.5 * tau));
            out = Some((ep, em, ef));
        }
        Ok(())
    })?;
    out.ok_or_else(|| Error::Internal("run ended before its final level".into()))
}

/// One convergence study.
#[derive(Debug, Clone)]
pub struct ConvergeTable {
    pub sweep: Sweep,
    /// Row labels, e.g. `h = L/100` or `tau = 5.000e-03`.
    pub labels: Vec<String>,
    pub psi_plus: Vec<RateRow>,
    pub psi_minus: Vec<RateRow>,
    pub phi: Option<Vec<RateRow>>,
    /// Labels of rows skipped for lack of `--extended`.
    pub skipped: Vec<String>,
}

impl ConvergeTable {
    pub fn csv(&self) -> String {
        let mut out = String::from("resolution,e_psi_plus,rate,e_psi_minus,rate");
        if self.phi.is_some() {
            out.push_str(",e_phi,rate");
        }
        out.push('\n');
        for (j, (p, m)) in self.psi_plus.iter().zip(&self.psi_minus).enumerate() {
            let _ = write!(
                out,
                "{:e},{},{},{},{}",
                p.resolution,
                format_sci(p.error, 6),
                format_rate(p.rate),
                format_sci(m.error, 6),
                format_rate(m.rate)
            );
            if let Some(phi) = &self.phi {
                let _ = write!(out, ",{},{}", format_sci(phi[j].error, 6), format_rate(phi[j].rate));
            }
            out.push('\n');
        }
        out
    }

    /// Human-readable table with 3-significant-digit errors.
    pub fn display(&self) -> String {
        let mut out = format!("{:<18}{:>11}{:>7}{:>11}{:>7}", "", "e_psi+", "rate", "e_psi-", "rate");
        if self.phi.is_some() {
            let _ = write!(out, "{:>11}{:>7}", "e_phi", "rate");
        }
        out.push('\n');
        let rate = |r: Option<f64>| r.map(|r| format!("{r:.2}")).unwrap_or_else(|| "--".into());
        for (j, (p, m)) in self.psi_plus.iter().zip(&self.psi_minus).enumerate() {
            let _ = write!(
                out,
                "{:<18}{:>11}{:>7}{:>11}{:>7}",
                self.labels[j],
                format_sci(p.error, 2),
                rate(p.rate),
                format_sci(m.error, 2),
                rate(m.rate)
            );
            if let Some(phi) = &self.phi {
                let _ = write!(out, "{:>11}{:>7}", format_sci(phi[j].error, 2), rate(phi[j].rate));
            }
            out.push('\n');
        }
        for label in &self.skipped {
            let _ = writeln!(out, "{label:<18}(extended; rerun with --extended)");
        }
        out
    }
}

/// Space (`n` doubling) or time (`τ` halving) sweep over `levels` runs.
pub fn cmd_converge(cfg: &RunConfig, sweep: Sweep, levels: usize, extended: bool) -> Result<ConvergeTable> {
    if levels < 2 {
        return Err(Error::config("levels", "a convergence study needs at least 2 levels"));
    }
    let spec = catalog_get(&cfg.problem).map_err(|e| map_config(e, "problem"))?;
    let (mut labels, mut skipped) = (Vec::new(), Vec::new());
    let (mut ep, mut em, mut ef) = (Vec::new(), Vec::new(), Vec::new());
    for j in 0..levels {
        let scale = 1usize << j;
        let (divisions, tau): (Vec<usize>, f64) = match sweep {
            Sweep::Space => (cfg.divisions.iter().map(|&n| n * scale).collect(), cfg.tau),
            Sweep::Time => (cfg.divisions.clone(), cfg.tau / scale as f64),
        };
        let (label, resolution) = match sweep {
            Sweep::Space => (
                format!("h = L/{}", divisions[0]),
                spec.extents[0] / divisions[0] as f64,
            ),
            Sweep::Time => (format!("tau = {}", format_sci(tau, 3)), tau),
        };
        let gated = sweep == Sweep::Space
            && spec.dim == 2
            && cfg.degree == 2
            && divisions[0] >= EXTENDED_DIVISIONS
            && !extended;
        if gated {
            skipped.push(label);
            continue;
        }
        let (p, m, f) = final_errors(cfg, &divisions, tau)?;
        labels.push(label);
        ep.push((resolution, p));
        em.push((resolution, m));
        if let Some(f) = f {
            ef.push((resolution, f));
        }
    }
    if ep.len() < 2 {
        return Err(Error::config("levels", "fewer than 2 rows left after extended gating"));
    }
    let phi = if spec.q != 0.0 && ef.len() == ep.len() {
        Some(rate_table(&ef)?)
    } else {
        None
    };
    let table = ConvergeTable {
        sweep,
        labels,
        psi_plus: rate_table(&ep)?,
        psi_minus: rate_table(&em)?,
        phi,
        skipped,
    };
    let name = match sweep {
        Sweep::Space => "converge_space.csv",
        Sweep::Time => "converge_time.csv",
    };
    write_file(&cfg.output, name, &table.csv())?;
    Ok(table)
}

/// Process exit code for an error: 2 for configuration problems, 3 for solver failures.
pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::Config { .. } | Error::InvalidArgument(_) => 2,
        Error::SolverFailure { .. } | Error::Compatibility { .. } => 3,
        _ => 1,
    }
}
