//! Decay-rate fitting, the decay study against the steady state, the
//! reformulated steady residual and refinement tables.

use std::io::Write;

use crate::discretization::Discretization;
use crate::error::{argument, domain, Error, Result};
use crate::forcing::{ForcingSpec, Manufactured};
use crate::grid::{StaggeredGrid, VelocityField};
use crate::kernel::{make_weights, KernelParams};
use crate::ops;
use crate::special::kernel_tail;
use crate::steady::{self, effective_viscosity, SteadyConfig, SteadySolution};
use crate::transient::{FluidConfig, HistoryMode, TransientSolver};

/// Fits below this r² are flagged unreliable.
pub const MIN_RELIABLE_R2: f64 = 0.98;
/// Safety margin in α_expect = min(α₀, alpha_max·(1 − margin)).
pub const DEFAULT_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub alpha: f64,
    pub kappa: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub points: usize,
}

impl DecayFit {
    pub fn reliable(&self) -> bool {
        self.r_squared >= MIN_RELIABLE_R2
    }
}

/// Least-squares fit of log y = log κ − α t over the samples with t in `window`.
pub fn fit_decay(t: &[f64], y: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    if t.len() != y.len() {
        return argument(format!("{} times but {} values", t.len(), y.len()));
    }
    let idx: Vec<usize> = (0..t.len())
        .filter(|&i| t[i] >= window.0 && t[i] <= window.1)
        .collect();
    if idx.len() < 8 {
        return argument(format!(
            "decay fit needs at least 8 points in the window, got {}",
            idx.len()
        ));
    }
    let bad: Vec<usize> = idx
        .iter()
        .copied()
        .filter(|&i| !(y[i] > 0.0) || !y[i].is_finite())
        .collect();
    if !bad.is_empty() {
        return domain(format!(
            "decay fit needs positive values; offending indices {bad:?}"
        ));
    }
    let n = idx.len() as f64;
    let tm = idx.iter().map(|&i| t[i]).sum::<f64>() / n;
    let lm = idx.iter().map(|&i| y[i].ln()).sum::<f64>() / n;
    let (mut stt, mut stl, mut sll) = (0.0, 0.0, 0.0);
    for &i in &idx {
        let (dt, dl) = (t[i] - tm, y[i].ln() - lm);
        stt += dt * dt;
        stl += dt * dl;
        sll += dl * dl;
    }
    if stt == 0.0 {
        return argument("decay fit window holds a single time value");
    }
    let slope = stl / stt;
    let ss_res = (sll - slope * stl).max(0.0);
    let r_squared = if sll <= 1e-28 * n {
        1.0
    } else {
        (1.0 - ss_res / sll).clamp(0.0, 1.0)
    };
    Ok(DecayFit {
        alpha: -slope,
        kappa: (lm - slope * tm).exp(),
        r_squared,
        window,
        points: idx.len(),
    })
}

/// Window over the last 60% of a run of length `t_end`, without the final 2%.
pub fn default_window(t_end: f64) -> (f64, f64) {
    (0.4 * t_end, 0.98 * t_end)
}

/// Admissible decay rate ½ min{δ, μ₀γ₀/2} from measured constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayBound {
    pub delta: f64,
    pub mu0_est: f64,
    pub gamma0_h: f64,
    pub alpha_max: f64,
}

impl DecayBound {
    pub fn new(delta: f64, mu0_est: f64, gamma0_h: f64) -> Self {
        let alpha_max = (0.5 * delta.min(mu0_est * gamma0_h / 2.0)).max(0.0);
        Self {
            delta,
            mu0_est,
            gamma0_h,
            alpha_max,
        }
    }

    pub fn alpha_expect(&self, alpha0: f64, margin: f64) -> f64 {
        alpha0.min(self.alpha_max * (1.0 - margin))
    }
}

#[derive(Debug, Clone)]
pub struct DecayStudyConfig {
    /// Transient run; its forcing must be the decaying variant.
    pub fluid: FluidConfig,
    /// Steady problem with the limiting forcing f̄.
    pub steady: SteadyConfig,
    pub margin: f64,
    /// Sample the decay series every `cadence` steps.
    pub cadence: usize,
    /// Hash of the configuration this study came from, echoed in reports.
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFit {
    pub name: &'static str,
    pub fit: DecayFit,
    pub alpha_expect: f64,
    pub pass: bool,
    /// See [`weighted_growth`].
    pub weighted_growth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecaySample {
    pub t: f64,
    pub z_l2: f64,
    pub z_h1: f64,
    pub z_a: f64,
    pub eta_l2: f64,
}

#[derive(Debug, Clone)]
pub struct DecayReport {
    pub bound: DecayBound,
    pub alpha0: f64,
    pub alpha_expect: f64,
    pub margin: f64,
    pub fits: Vec<SeriesFit>,
    pub samples: Vec<DecaySample>,
    pub steady: SteadySolution,
    pub config_hash: String,
    pub warnings: Vec<String>,
}

pub const FIT_COLUMNS: &str =
    "series_name,alpha,kappa,r2,window_start,window_end,alpha_expect,pass";

impl DecayReport {
    pub fn all_pass(&self) -> bool {
        self.fits.iter().all(|f| f.pass)
    }

    pub fn write_fit_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{FIT_COLUMNS}")?;
        for s in &self.fits {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                s.name,
                s.fit.alpha,
                s.fit.kappa,
                s.fit.r_squared,
                s.fit.window.0,
                s.fit.window.1,
                s.alpha_expect,
                s.pass
            )?;
        }
        Ok(())
    }

    pub fn write_series_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,z_l2,z_h1,z_a_norm,eta_l2")?;
        for s in &self.samples {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                s.t, s.z_l2, s.z_h1, s.z_a, s.eta_l2
            )?;
        }
        Ok(())
    }

    pub fn write_summary<W: Write>(&self, mut out: W) -> Result<()> {
        let b = &self.bound;
        writeln!(out, "config_hash = {}", self.config_hash)?;
        writeln!(out, "delta = {:.16e}", b.delta)?;
        writeln!(out, "mu0_est = {:.16e}", b.mu0_est)?;
        writeln!(out, "gamma0_h = {:.16e}", b.gamma0_h)?;
        writeln!(out, "alpha_max = {:.16e}", b.alpha_max)?;
        writeln!(out, "alpha0 = {:.16e}", self.alpha0)?;
        writeln!(out, "margin = {:.16e}", self.margin)?;
        writeln!(out, "alpha_expect = {:.16e}", self.alpha_expect)?;
        writeln!(out, "note = mu0 is a sampled estimate; the coercivity assumption it stands for cannot be verified")?;
        for s in &self.fits {
            writeln!(
                out,
                "{} {}: alpha = {:.6}, r2 = {:.6}, reliable = {}, weighted_growth = {:.4}",
                if s.pass { "PASS" } else { "FAIL" },
                s.name,
                s.fit.alpha,
                s.fit.r_squared,
                s.fit.reliable(),
                s.weighted_growth
            )?;
        }
        for w in &self.warnings {
            writeln!(out, "warning = {w}")?;
        }
        writeln!(
            out,
            "overall = {}",
            if self.all_pass() { "PASS" } else { "FAIL" }
        )?;
        Ok(())
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Late growth of the weighted series w(t) = e^{α t}·y(t): the maximum of w
/// over the second half of `window` divided by the median of w over the whole
/// window. Values up to 2 mean no late growth at rate α.
pub fn weighted_growth(t: &[f64], y: &[f64], window: (f64, f64), alpha: f64) -> f64 {
    let mid = 0.5 * (window.0 + window.1);
    let inside: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(&ti, _)| ti >= window.0 && ti <= window.1)
        .map(|(&ti, &yi)| (ti, (alpha * ti).exp() * yi))
        .collect();
    if inside.is_empty() {
        return f64::NAN;
    }
    let med = median(inside.iter().map(|p| p.1).collect());
    let late = inside
        .iter()
        .filter(|p| p.0 >= mid)
        .map(|p| p.1)
        .fold(0.0, f64::max);
    late / med
}

/// Solve the steady problem, run the transient problem, and fit the decay of
/// z = u − ū and η = p − p̄ in four norms.
pub fn decay_study(config: &DecayStudyConfig) -> Result<DecayReport> {
    let alpha0 = match &config.fluid.forcing {
        ForcingSpec::Decaying { rate, .. } => *rate,
        ForcingSpec::Steady(_) | ForcingSpec::Zero => f64::INFINITY,
        ForcingSpec::Manufactured(_) => {
            return argument("decay study needs a decaying or steady forcing")
        }
    };
    if let Some(fbar) = config.fluid.forcing.steady_part(config.fluid.grid) {
        if fbar != config.steady.fbar {
            return argument("steady forcing differs from the limit of the transient forcing");
        }
    }
    if config.steady.grid != config.fluid.grid {
        return argument("steady and transient grids differ");
    }
    if !(0.0..1.0).contains(&config.margin) {
        return argument(format!("margin must lie in [0, 1), got {}", config.margin));
    }
    let steady = steady::solve(&config.steady)?;
    let mut solver = TransientSolver::new(config.fluid.clone())?;
    let disc = solver.discretization().clone();
    let gamma0 = disc.poincare_constant()?;
    let bound = DecayBound::new(
        config.fluid.kernel.delta(),
        steady.diagnostics.mu0_est.value,
        gamma0,
    );
    let alpha_expect = bound.alpha_expect(alpha0, config.margin);

    let cadence = config.cadence.max(1);
    let mut samples = Vec::new();
    let state = solver.initial_state()?;
    let ubar = steady.velocity.clone();
    let pbar = steady.pressure.clone();
    let out = solver.run_from(state, usize::MAX, |s| {
        if s.step % cadence == 0 {
            let z = s.velocity.sub(&ubar);
            let mut eta = s.pressure.sub(&pbar);
            eta.subtract_mean();
            let n = disc.norms(&z)?;
            samples.push(DecaySample {
                t: s.time,
                z_l2: n.l2,
                z_h1: n.h1_semi,
                z_a: n.a_norm,
                eta_l2: eta.l2(),
            });
        }
        Ok(())
    })?;

    let window = default_window(config.fluid.t_end);
    let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
    type Series = (&'static str, fn(&DecaySample) -> f64);
    let series: [Series; 4] = [
        ("z_l2", |s| s.z_l2),
        ("z_h1", |s| s.z_h1),
        ("z_a_norm", |s| s.z_a),
        ("eta_l2", |s| s.eta_l2),
    ];
    let mut fits = Vec::new();
    for (name, get) in series {
        let y: Vec<f64> = samples.iter().map(get).collect();
        let fit = fit_decay(&t, &y, window)?;
        let growth = weighted_growth(&t, &y, window, alpha_expect);
        fits.push(SeriesFit {
            name,
            fit,
            alpha_expect,
            pass: fit.alpha >= alpha_expect && fit.reliable(),
            weighted_growth: growth,
        });
    }
    let mut warnings = out.warnings;
    if steady.diagnostics.mu0_est.violates_coercivity() {
        warnings
            .push("mu0 estimate is nonpositive: coercivity assumption fails empirically".into());
    }
    Ok(DecayReport {
        bound,
        alpha0,
        alpha_expect,
        margin: config.margin,
        fits,
        samples,
        steady,
        config_hash: config.config_hash.clone(),
        warnings,
    })
}

/// r(t) = ‖[ρ Σ ω_k − (ρ·moment − tail(t))] Δ_h ū‖₀ at each sample time.
///
/// The first factor is the product-integration convolution of the constant
/// history ū; in the continuum the bracket vanishes identically.
pub fn steady_reformulation_residual(
    ubar: &VelocityField,
    kernel: &KernelParams,
    dt: f64,
    times: &[f64],
) -> Result<Vec<f64>> {
    let rho = kernel.rho();
    if rho == 0.0 {
        return Ok(vec![0.0; times.len()]);
    }
    let moment = kernel.moment()?;
    let lap_norm = ops::laplacian(ubar).l2();
    let mut steps = Vec::with_capacity(times.len());
    for &t in times {
        let n = (t / dt).round();
        if !(t >= 0.0) || (n * dt - t).abs() > 1e-9 * dt.max(t) {
            return argument(format!("sample time {t} is not a multiple of dt = {dt}"));
        }
        steps.push(n as usize);
    }
    let n_max = steps.iter().copied().max().unwrap_or(0);
    let weights = make_weights(kernel, dt, n_max.max(1))?;
    let mut out = Vec::with_capacity(times.len());
    for (&t, &n) in times.iter().zip(&steps) {
        // Convolution of the constant unit history over n steps.
        let conv = weights.partial_sum(n);
        let bracket = rho * conv - (rho * moment - kernel_tail(kernel, t)?);
        out.push(bracket.abs() * lap_norm);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Refinement {
    #[default]
    /// Steady manufactured solution, grids n₀·2^k.
    SteadySpace,
    /// Transient manufactured solution at fixed Δt, grids n₀·2^k.
    TransientSpace,
    /// Transient manufactured solution on a fixed grid, Δt₀/2^k; errors are
    /// differences of successive levels (self-convergence).
    TransientTime,
}

impl Refinement {
    pub fn name(self) -> &'static str {
        match self {
            Refinement::SteadySpace => "steady_space",
            Refinement::TransientSpace => "transient_space",
            Refinement::TransientTime => "transient_time",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "steady_space" => Some(Refinement::SteadySpace),
            "transient_space" => Some(Refinement::TransientSpace),
            "transient_time" => Some(Refinement::TransientTime),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceSpec {
    pub refine: Refinement,
    pub mu: f64,
    pub kernel: KernelParams,
    /// Decay rate of the manufactured profile.
    pub alpha: f64,
    pub base_n: usize,
    pub base_dt: f64,
    pub t_end: f64,
    pub levels: usize,
    pub history_mode: HistoryMode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    /// Grid cells per side or time step.
    pub parameter: f64,
    pub error: f64,
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub refine: Refinement,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn orders(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.order).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "study,level,parameter,error,order")?;
        for (k, r) in self.rows.iter().enumerate() {
            let order = r.order.map(|o| format!("{o:.16e}")).unwrap_or_default();
            writeln!(
                out,
                "{},{k},{:.16e},{:.16e},{order}",
                self.refine.name(),
                r.parameter,
                r.error
            )?;
        }
        Ok(())
    }
}

fn rel_error(a: &VelocityField, b: &VelocityField) -> f64 {
    a.sub(b).l2() / b.l2().max(f64::MIN_POSITIVE)
}

fn transient_manufactured(
    spec: &ConvergenceSpec,
    n: usize,
    dt: f64,
) -> Result<(VelocityField, VelocityField)> {
    let grid = StaggeredGrid::unit_square(n)?;
    let m = Manufactured::new(spec.alpha, spec.mu, spec.kernel)?;
    let config = FluidConfig {
        mu: spec.mu,
        kernel: spec.kernel,
        grid,
        dt,
        t_end: spec.t_end,
        forcing: ForcingSpec::Manufactured(m),
        initial_velocity: m.velocity_div_free(grid, 0.0)?,
        history_mode: spec.history_mode,
        advection: true,
    };
    let mut solver = TransientSolver::new(config)?;
    let out = solver.run(usize::MAX)?;
    Ok((
        out.final_state.velocity,
        m.velocity(grid, out.final_state.time)?,
    ))
}

/// Errors per refinement level and observed orders log₂(e_k / e_{k+1}).
pub fn convergence_table(spec: &ConvergenceSpec) -> Result<ConvergenceTable> {
    if spec.levels < 2 {
        return argument("a convergence study needs at least two levels");
    }
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    match spec.refine {
        Refinement::SteadySpace => {
            let nu = effective_viscosity(spec.mu, &spec.kernel)?;
            for k in 0..spec.levels {
                let n = spec.base_n << k;
                let grid = StaggeredGrid::unit_square(n)?;
                let mut c = SteadyConfig::new(
                    spec.mu,
                    spec.kernel,
                    Manufactured::steady_forcing(grid, nu)?,
                );
                c.tol = 1e-12;
                let disc = Discretization::new(grid);
                let sol = steady::solve_stokes_iteration_with(&disc, &c)?;
                let exact = Manufactured::steady_velocity(grid)?;
                rows.push(ConvergenceRow {
                    parameter: n as f64,
                    error: rel_error(&sol.velocity, &exact),
                    order: None,
                });
            }
        }
        Refinement::TransientSpace => {
            for k in 0..spec.levels {
                let n = spec.base_n << k;
                let (u, exact) = transient_manufactured(spec, n, spec.base_dt)?;
                rows.push(ConvergenceRow {
                    parameter: n as f64,
                    error: rel_error(&u, &exact),
                    order: None,
                });
            }
        }
        Refinement::TransientTime => {
            let mut sols = Vec::new();
            for k in 0..=spec.levels {
                let dt = spec.base_dt / (1u64 << k) as f64;
                sols.push((dt, transient_manufactured(spec, spec.base_n, dt)?.0));
            }
            for k in 0..spec.levels {
                rows.push(ConvergenceRow {
                    parameter: sols[k].0,
                    error: sols[k].1.sub(&sols[k + 1].1).l2() / sols[k + 1].1.l2(),
                    order: None,
                });
            }
        }
    }
    for k in 1..rows.len() {
        let (a, b) = (rows[k - 1].error, rows[k].error);
        if a > 0.0 && b > 0.0 {
            rows[k].order = Some((a / b).log2());
        }
    }
    if rows.iter().any(|r| !r.error.is_finite()) {
        return Err(Error::NonFinite {
            step: 0,
            time: spec.t_end,
        });
    }
    Ok(ConvergenceTable {
        refine: spec.refine,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential() {
        let t: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let y: Vec<f64> = t.iter().map(|&t| 3.0 * (-0.7 * t).exp()).collect();
        let f = fit_decay(&t, &y, (0.0, 10.0)).unwrap();
        assert!((f.alpha - 0.7).abs() < 1e-10);
        assert!((f.kappa - 3.0).abs() < 1e-10);
        assert!((f.r_squared - 1.0).abs() < 1e-10);
        assert_eq!(f.points, 20);
    }

    #[test]
    fn constant_series_has_zero_rate() {
        let t: Vec<f64> = (0..10).map(f64::from).collect();
        let f = fit_decay(&t, &[2.0; 10], (0.0, 9.0)).unwrap();
        assert!(f.alpha.abs() < 1e-14);
        assert_eq!(f.r_squared, 1.0);
    }

    #[test]
    fn fit_errors() {
        let t: Vec<f64> = (0..10).map(f64::from).collect();
        let mut y = vec![1.0; 10];
        y[3] = 0.0;
        y[7] = -1.0;
        match fit_decay(&t, &y, (0.0, 9.0)) {
            Err(Error::Domain(msg)) => assert!(msg.contains("[3, 7]"), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert!(fit_decay(&t, &[1.0; 10], (0.0, 5.0)).is_err());
    }

    #[test]
    fn bound_formula() {
        let b = DecayBound::new(1.0, 1.0, 19.74);
        assert_eq!(b.alpha_max, 0.5);
        assert_eq!(b.alpha_expect(0.2, 0.1), 0.2);
        assert!((b.alpha_expect(0.6, 0.1) - 0.45).abs() < 1e-15);
        assert_eq!(DecayBound::new(1.0, -0.1, 19.74).alpha_max, 0.0);
    }

    #[test]
    fn window_is_last_sixty_percent() {
        assert_eq!(default_window(10.0), (4.0, 9.8));
    }
}
