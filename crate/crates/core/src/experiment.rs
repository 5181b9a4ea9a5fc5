//! Runs a parsed [`ExperimentSpec`] and writes its artifacts.
//!
//! Every run first does all numerical work, then writes `config.txt` (the
//! full effective configuration), the experiment's CSV and snapshot files,
//! and `summary.txt` with one PASS/FAIL line per check. A run that fails
//! writes only `error.txt`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::analysis::{self, ConvergenceSpec, DecayStudyConfig};
use crate::config::{ExperimentKind, ExperimentSpec, ForcingKind, HistoryKind, InitialKind};
use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::forcing::{ForcingSpec, Manufactured};
use crate::grid::{StaggeredGrid, VelocityField};
use crate::kernel::{self, HistoryBuffer, KernelParams};
use crate::snapshot;
use crate::special::upper_incomplete_gamma;
use crate::steady::{self, SteadyConfig};
use crate::transient::{self, FluidConfig, HistoryMode, TransientSolver};

/// Exit status for a run whose checks all pass.
pub const EXIT_PASS: i32 = 0;
/// Exit status for a completed run with at least one failed check.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Exit status for unusable input: bad arguments, config or files.
pub const EXIT_USAGE: i32 = 2;
/// Exit status for a numerical failure.
pub const EXIT_NUMERICAL: i32 = 3;

/// Exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse { .. } | Error::Validation { .. } | Error::Argument(_) | Error::Io(_) => {
            EXIT_USAGE
        }
        Error::Domain(_)
        | Error::Approximation { .. }
        | Error::Solver { .. }
        | Error::Iteration { .. }
        | Error::NonFinite { .. } => EXIT_NUMERICAL,
    }
}

fn error_class(err: &Error) -> &'static str {
    match err {
        Error::Parse { .. } => "parse",
        Error::Validation { .. } => "validation",
        Error::Argument(_) => "argument",
        Error::Io(_) => "io",
        Error::Domain(_) => "domain",
        Error::Approximation { .. } => "approximation",
        Error::Solver { .. } => "solver",
        Error::Iteration { .. } => "iteration",
        Error::NonFinite { .. } => "non_finite",
    }
}

/// Hex SHA-256 of the rendered configuration.
pub fn config_hash(spec: &ExperimentSpec) -> String {
    let digest = Sha256::digest(spec.render().as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// One named PASS/FAIL check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

/// What a completed run produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub kind: ExperimentKind,
    pub config_hash: String,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    /// Files written, relative to the output directory.
    pub files: Vec<String>,
}

impl ExperimentOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            EXIT_PASS
        } else {
            EXIT_CHECK_FAILED
        }
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "kind = {}", self.kind.name());
        let _ = writeln!(s, "config_hash = {}", self.config_hash);
        for c in &self.checks {
            let _ = writeln!(s, "{}", c.line());
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning = {w}");
        }
        let _ = writeln!(
            s,
            "overall = {}",
            if self.passed() { "PASS" } else { "FAIL" }
        );
        s
    }
}

/// Artifacts collected in memory and flushed once the numerical work is done.
struct Artifacts {
    dir: PathBuf,
    pending: Vec<Pending>,
}

enum Pending {
    Text(String, String),
    Velocity(String, VelocityField, &'static str, f64),
    Scalar(String, crate::grid::ScalarField, &'static str, f64),
}

impl Artifacts {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            pending: Vec::new(),
        }
    }

    fn text(&mut self, name: &str, body: String) {
        self.pending.push(Pending::Text(name.into(), body));
    }

    fn csv(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        let body = String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))?;
        self.text(name, body);
        Ok(())
    }

    fn flush(self, spec: &ExperimentSpec) -> Result<Vec<String>> {
        fs::create_dir_all(&self.dir)?;
        let ext = match spec.output.snapshot_format {
            snapshot::SnapshotFormat::Csv => "csv",
            snapshot::SnapshotFormat::Binary => "bin",
        };
        let fmt = spec.output.snapshot_format;
        let mut files = Vec::new();
        for p in self.pending {
            match p {
                Pending::Text(name, body) => {
                    fs::write(self.dir.join(&name), body)?;
                    files.push(name);
                }
                Pending::Velocity(stem, w, role, t) => {
                    let name = format!("{stem}.{ext}");
                    snapshot::write_velocity(&self.dir.join(&name), &w, role, t, fmt)?;
                    files.push(name);
                }
                Pending::Scalar(stem, q, role, t) => {
                    let name = format!("{stem}.{ext}");
                    snapshot::write_scalar(&self.dir.join(&name), &q, role, t, fmt)?;
                    files.push(name);
                }
            }
        }
        Ok(files)
    }
}

/// Write the machine-readable error record `error.txt`.
pub fn write_error_record(out_dir: &Path, kind: Option<ExperimentKind>, err: &Error) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let mut s = String::new();
    let _ = writeln!(s, "status = error");
    if let Some(k) = kind {
        let _ = writeln!(s, "kind = {}", k.name());
    }
    let _ = writeln!(s, "class = {}", error_class(err));
    let _ = writeln!(s, "exit_code = {}", exit_code(err));
    let _ = writeln!(s, "message = {}", err.to_string().replace('\n', " "));
    match err {
        Error::Parse { line, .. } => {
            let _ = writeln!(s, "line = {line}");
        }
        Error::Validation { key, .. } => {
            let _ = writeln!(s, "key = {key}");
        }
        Error::NonFinite { step, time } => {
            let _ = writeln!(s, "step = {step}");
            let _ = writeln!(s, "time = {time:.16e}");
        }
        Error::Iteration { history, .. } => {
            for (k, r) in history.iter().enumerate() {
                let _ = writeln!(s, "residual_{k} = {r:.16e}");
            }
        }
        _ => {}
    }
    fs::write(out_dir.join("error.txt"), s)?;
    Ok(())
}

pub fn kernel_params(spec: &ExperimentSpec) -> Result<KernelParams> {
    KernelParams::new(spec.kernel.beta, spec.kernel.delta, spec.kernel.rho)
}

pub fn grid(spec: &ExperimentSpec) -> Result<StaggeredGrid> {
    StaggeredGrid::new(spec.grid.lx, spec.grid.ly, spec.grid.nx, spec.grid.ny)
}

fn history_mode(spec: &ExperimentSpec) -> HistoryMode {
    match spec.fluid.history {
        HistoryKind::Direct => HistoryMode::Direct,
        HistoryKind::Soe => HistoryMode::Soe {
            tol: spec.fluid.soe_tol,
        },
    }
}

/// The steady forcing f̄ described by the `[forcing]` section.
pub fn steady_forcing(spec: &ExperimentSpec) -> Result<VelocityField> {
    let g = grid(spec)?;
    let f = &spec.forcing;
    Ok(f.fbar_profile.sample(g, f.fbar_amplitude, spec.seed))
}

/// Transient forcing described by the `[forcing]` section.
pub fn forcing(spec: &ExperimentSpec) -> Result<ForcingSpec> {
    let g = grid(spec)?;
    let f = &spec.forcing;
    match f.kind {
        ForcingKind::Zero => Ok(ForcingSpec::Zero),
        ForcingKind::Steady => Ok(ForcingSpec::Steady(steady_forcing(spec)?)),
        ForcingKind::Decaying => {
            let pert = f.perturbation_profile.sample(
                g,
                f.perturbation_amplitude,
                spec.seed.wrapping_add(1),
            );
            ForcingSpec::decaying(steady_forcing(spec)?, pert, f.rate)
        }
        ForcingKind::Manufactured => Ok(ForcingSpec::Manufactured(Manufactured::new(
            f.manufactured_alpha,
            spec.fluid.mu,
            kernel_params(spec)?,
        )?)),
    }
}

/// Steady problem for the `[steady]` section with the configured f̄.
pub fn steady_config(spec: &ExperimentSpec) -> Result<SteadyConfig> {
    let mut c = SteadyConfig::new(spec.fluid.mu, kernel_params(spec)?, steady_forcing(spec)?);
    c.method = spec.steady.method;
    c.tol = spec.steady.tol;
    c.max_iters = spec.steady.max_iters;
    c.seed = spec.seed;
    c.mu0_trials = spec.steady.mu0_trials;
    c.sup_samples = spec.steady.sup_samples;
    Ok(c)
}

/// Transient problem for the `[fluid]`, `[grid]` and `[forcing]` sections.
pub fn fluid_config(spec: &ExperimentSpec) -> Result<FluidConfig> {
    let g = grid(spec)?;
    let kernel = kernel_params(spec)?;
    let amp = spec.fluid.initial_amplitude;
    let initial_velocity = match spec.fluid.initial {
        InitialKind::Zero => VelocityField::zeros(g),
        InitialKind::RandomSmooth => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(2));
            let w = VelocityField::random_smooth(g, 4, &mut rng);
            Discretization::new(g).leray_project(&w)?.scaled(amp)
        }
        InitialKind::Manufactured => {
            Manufactured::new(spec.forcing.manufactured_alpha, spec.fluid.mu, kernel)?
                .velocity_div_free(g, 0.0)?
                .scaled(amp)
        }
        InitialKind::Steady => steady::solve(&steady_config(spec)?)?.velocity.scaled(amp),
    };
    let config = FluidConfig {
        mu: spec.fluid.mu,
        kernel,
        grid: g,
        dt: spec.fluid.dt,
        t_end: spec.fluid.t_end,
        forcing: forcing(spec)?,
        initial_velocity,
        history_mode: history_mode(spec),
        advection: spec.fluid.advection,
    };
    config.validate()?;
    Ok(config)
}

pub fn convergence_spec(spec: &ExperimentSpec) -> Result<ConvergenceSpec> {
    Ok(ConvergenceSpec {
        refine: spec.analysis.refine,
        mu: spec.fluid.mu,
        kernel: kernel_params(spec)?,
        alpha: spec.forcing.manufactured_alpha,
        base_n: spec.analysis.base_n,
        base_dt: spec.analysis.base_dt,
        t_end: spec.fluid.t_end,
        levels: spec.analysis.levels,
        history_mode: history_mode(spec),
    })
}

/// Validate, run and write the artifacts of one experiment.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path) -> Result<ExperimentOutcome> {
    spec.validate()?;
    let hash = config_hash(spec);
    let mut art = Artifacts::new(out_dir);
    art.text("config.txt", spec.render());
    let (checks, warnings) = match spec.kind {
        ExperimentKind::KernelCheck => kernel_check(spec, &mut art)?,
        ExperimentKind::RunTransient => run_transient(spec, &mut art)?,
        ExperimentKind::SolveSteady => solve_steady(spec, &mut art)?,
        ExperimentKind::DecayStudy => decay_study(spec, &hash, &mut art)?,
        ExperimentKind::ConvergenceStudy => convergence_study(spec, &mut art)?,
    };
    let mut outcome = ExperimentOutcome {
        kind: spec.kind,
        config_hash: hash,
        checks,
        warnings,
        files: Vec::new(),
    };
    art.text("summary.txt", outcome.summary());
    outcome.files = art.flush(spec)?;
    Ok(outcome)
}

type Checks = (Vec<Check>, Vec<String>);

fn kernel_check(spec: &ExperimentSpec, art: &mut Artifacts) -> Result<Checks> {
    let params = kernel_params(spec)?;
    let k = &spec.kernel;
    let (dt, n) = (k.dt, k.n);
    let weights = kernel::make_weights(&params, dt, n)?;
    let mut checks = Vec::new();
    let mut warnings = Vec::new();
    if let Some(idx) = weights.underflow_from() {
        warnings.push(format!("weights underflow to zero from index {idx}"));
    }

    // Partial sums against the closed-form integral over [0, m·Δt].
    let mut worst = 0.0f64;
    let mut acc = 0.0;
    for m in 1..=n {
        acc += weights.get(m - 1);
        let exact = crate::special::kernel_primitive(&params, 0.0, m as f64 * dt)?;
        worst = worst.max((acc - exact).abs() / exact.max(f64::MIN_POSITIVE));
    }
    checks.push(Check::new(
        "partial_sums",
        worst <= 1e-12,
        format!("max relative deviation {worst:.3e} (tol 1e-12)"),
    ));

    // Σ ω_k plus the analytic tail recovers the total mass.
    let a = 1.0 - params.beta();
    let horizon = n as f64 * dt;
    let tail = params.delta().powf(-a) * upper_incomplete_gamma(a, params.delta() * horizon)?;
    let mass = params.moment()?;
    let mass_dev = ((weights.partial_sum(n) + tail) - mass).abs() / mass;
    checks.push(Check::new(
        "total_mass",
        mass_dev <= 1e-10,
        format!("sum + tail = mass to {mass_dev:.3e} (tol 1e-10)"),
    ));

    let w = weights.as_slice();
    let live = weights.underflow_from().unwrap_or(n);
    let monotone = w[..live].iter().all(|&x| x > 0.0) && w[..live].windows(2).all(|p| p[1] < p[0]);
    checks.push(Check::new(
        "weights_positive_decreasing",
        monotone,
        format!("{live} nonzero weights"),
    ));

    if n <= 2000 {
        let (lo, hi) = kernel::symmetrized_spectrum(&weights);
        checks.push(Check::new(
            "symmetrized_spectrum",
            lo >= -1e-12 * hi.abs().max(f64::MIN_POSITIVE),
            format!("eigenvalues in [{lo:.6e}, {hi:.6e}]"),
        ));
    } else {
        warnings.push(format!("spectrum check skipped for n = {n} > 2000"));
    }

    let cert = kernel::positivity_certificate(&weights, k.trials, spec.seed)?;
    checks.push(Check::new(
        "positivity_certificate",
        cert.is_nonnegative(1e-12),
        format!(
            "min normalized form {:.6e} over {} trials",
            cert.min_value, cert.trials
        ),
    ));

    // Compressed history against the direct convolution on one random sequence.
    let soe = kernel::fit_soe(&params, dt, (n as f64 + 1.0) * dt, k.soe_tol)?;
    let measured = kernel::soe_measured_error(&params, &soe);
    checks.push(Check::new(
        "soe_fit",
        measured <= k.soe_tol,
        format!(
            "{} modes, measured error {measured:.3e} (tol {:.1e})",
            soe.len(),
            k.soe_tol
        ),
    ));
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(3));
    let y: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut buffer = HistoryBuffer::compressed(&soe, &params, dt, &0.0)?;
    let mut conv_worst = 0.0f64;
    for m in 1..=n {
        let fast = kernel::convolve_soe_step(&mut buffer, &y[m - 1], dt)?;
        let mut exact = 0.0;
        let mut scale = 0.0;
        for j in 0..m {
            exact += w[m - 1 - j] * y[j];
            scale += w[m - 1 - j] * y[j].abs();
        }
        conv_worst = conv_worst.max((fast - exact).abs() / scale.max(f64::MIN_POSITIVE));
    }
    checks.push(Check::new(
        "soe_convolution",
        conv_worst <= 2.0 * k.soe_tol,
        format!(
            "max scaled deviation from direct {conv_worst:.3e} (tol {:.1e})",
            2.0 * k.soe_tol
        ),
    ));

    art.csv("weights.csv", |out| weights.write_csv(out))?;
    art.csv("soe_modes.csv", |out| {
        use std::io::Write;
        writeln!(out, "mode,amplitude,rate")?;
        for (i, m) in soe.modes.iter().enumerate() {
            writeln!(out, "{i},{:.16e},{:.16e}", m.amplitude, m.rate)?;
        }
        Ok(())
    })?;
    Ok((checks, warnings))
}

fn run_transient(spec: &ExperimentSpec, art: &mut Artifacts) -> Result<Checks> {
    let config = fluid_config(spec)?;
    let exact = match &config.forcing {
        ForcingSpec::Manufactured(m) => Some(*m),
        _ => None,
    };
    // Membership of u0 in the Stokes operator domain has no discrete test;
    // check solenoidality and that A_h u0 is finite instead.
    let u0 = &config.initial_velocity;
    let u0_div = crate::ops::divergence_residual(u0);
    let a_u0 = Discretization::new(config.grid).stokes_operator(u0)?.l2();
    let initial = Check::new(
        "initial_data",
        u0_div <= 1e-8 && a_u0.is_finite(),
        format!("divergence {u0_div:.3e}, |A_h u0| = {a_u0:.6e}"),
    );
    let mut solver = TransientSolver::new(config)?;
    let out = solver.run(spec.fluid.cadence)?;
    let state = &out.final_state;

    let max_div = out
        .records
        .iter()
        .map(|r| r.div_residual)
        .fold(0.0, f64::max);
    let min_mem = out.records.iter().map(|r| r.mem_form).fold(0.0, f64::min);
    let mem_scale = out
        .records
        .iter()
        .map(|r| r.mem_form.abs())
        .fold(1.0, f64::max);
    let mut checks = vec![
        initial,
        Check::new(
            "divergence",
            max_div <= 1e-8,
            format!("max discrete divergence {max_div:.3e} (tol 1e-8)"),
        ),
        Check::new(
            "memory_form_nonnegative",
            min_mem >= -1e-10 * mem_scale,
            format!("min cumulative memory form {min_mem:.3e}"),
        ),
    ];
    if let Some(m) = exact {
        let u = m.velocity(*state.velocity.grid(), state.time)?;
        let err = state.velocity.sub(&u).l2() / u.l2().max(f64::MIN_POSITIVE);
        checks.push(Check::new(
            "manufactured_error",
            err.is_finite(),
            format!("relative L2 error {err:.6e} at t = {}", state.time),
        ));
    }

    art.csv("diagnostics.csv", |o| {
        transient::write_diagnostics(&out.records, o)
    })?;
    if spec.output.snapshots {
        art.pending.push(Pending::Velocity(
            "velocity".into(),
            state.velocity.clone(),
            "velocity",
            state.time,
        ));
        art.pending.push(Pending::Scalar(
            "pressure".into(),
            state.pressure.clone(),
            "pressure",
            state.time,
        ));
    }
    Ok((checks, out.warnings))
}

fn solve_steady(spec: &ExperimentSpec, art: &mut Artifacts) -> Result<Checks> {
    let config = steady_config(spec)?;
    let sol = steady::solve(&config)?;
    let d = &sol.diagnostics;
    let checks = vec![
        Check::new(
            "residual",
            sol.residual <= config.tol,
            format!(
                "relative residual {:.3e} after {} iterations (tol {:.1e})",
                sol.residual, sol.iterations, config.tol
            ),
        ),
        Check::new(
            "apriori_bound",
            d.apriori_ok,
            format!(
                "nu_eff |u|_1 = {:.6e} vs |f|_-1 = {:.6e}",
                d.nu_eff * d.ubar_h1,
                d.fbar_dual
            ),
        ),
    ];
    let mut warnings = Vec::new();
    if !d.uniqueness.small_data() {
        warnings.push(format!(
            "uniqueness indicator {:.3e} is not below 1: small-data regime not established",
            d.uniqueness.value
        ));
    }
    if d.mu0_est.violates_coercivity() {
        warnings
            .push("mu0 estimate is nonpositive: coercivity assumption fails empirically".into());
    }
    art.csv("steady_summary.txt", |o| sol.write_summary(o))?;
    if spec.output.snapshots {
        art.pending.push(Pending::Velocity(
            "velocity".into(),
            sol.velocity.clone(),
            "steady_velocity",
            0.0,
        ));
        art.pending.push(Pending::Scalar(
            "pressure".into(),
            sol.pressure.clone(),
            "steady_pressure",
            0.0,
        ));
    }
    Ok((checks, warnings))
}

fn decay_study(spec: &ExperimentSpec, hash: &str, art: &mut Artifacts) -> Result<Checks> {
    let config = DecayStudyConfig {
        fluid: fluid_config(spec)?,
        steady: steady_config(spec)?,
        margin: spec.analysis.margin,
        cadence: spec.fluid.cadence,
        config_hash: hash.to_string(),
    };
    let report = analysis::decay_study(&config)?;
    let checks = report
        .fits
        .iter()
        .map(|s| {
            Check::new(
                s.name,
                s.pass,
                format!(
                    "alpha {:.6} vs expected {:.6}, r2 {:.6}",
                    s.fit.alpha, s.alpha_expect, s.fit.r_squared
                ),
            )
        })
        .collect();
    art.csv("decay_fits.csv", |o| report.write_fit_csv(o))?;
    art.csv("decay_series.csv", |o| report.write_series_csv(o))?;
    art.csv("decay_summary.txt", |o| report.write_summary(o))?;
    if spec.output.snapshots {
        let s = &report.steady;
        art.pending.push(Pending::Velocity(
            "steady_velocity".into(),
            s.velocity.clone(),
            "steady_velocity",
            0.0,
        ));
        art.pending.push(Pending::Scalar(
            "steady_pressure".into(),
            s.pressure.clone(),
            "steady_pressure",
            0.0,
        ));
    }
    Ok((checks, report.warnings.clone()))
}

fn convergence_study(spec: &ExperimentSpec, art: &mut Artifacts) -> Result<Checks> {
    let cs = convergence_spec(spec)?;
    let table = analysis::convergence_table(&cs)?;
    let expected = spec.analysis.effective_expected_order();
    let tol = spec.analysis.order_tolerance;
    let orders = table.orders();
    let last = orders.last().copied().unwrap_or(f64::NAN);
    let listed: Vec<String> = orders.iter().map(|o| format!("{o:.3}")).collect();
    let checks = vec![Check::new(
        format!("{}_order", table.refine.name()),
        (last - expected).abs() <= tol,
        format!(
            "observed orders [{}], finest {last:.3} (expected {expected} +- {tol})",
            listed.join(", ")
        ),
    )];
    art.csv("convergence.csv", |o| table.write_csv(o))?;
    Ok((checks, Vec::new()))
}
