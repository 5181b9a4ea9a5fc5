//! Steady state with effective viscosity ν_eff = μ + ρΓ(1−β)/δ^{1−β}.
//!
//! Both solvers work on the discrete system
//! `ν_eff(−Δ_h)ū + advect(ū, ū) + ∇_h p̄ = f̄`, `div_h ū = 0`.

use std::io::Write;

use crate::discretization::{Discretization, Mu0Estimate};
use crate::error::{argument, Error, Result};
use crate::grid::{ScalarField, StaggeredGrid, VelocityField};
use crate::kernel::KernelParams;
use crate::ops;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SteadyMethod {
    #[default]
    StokesIteration,
    Newton,
}

impl SteadyMethod {
    pub fn name(self) -> &'static str {
        match self {
            SteadyMethod::StokesIteration => "stokes_iteration",
            SteadyMethod::Newton => "newton",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "stokes_iteration" => Some(SteadyMethod::StokesIteration),
            "newton" => Some(SteadyMethod::Newton),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SteadyConfig {
    pub mu: f64,
    pub kernel: KernelParams,
    pub grid: StaggeredGrid,
    pub fbar: VelocityField,
    pub method: SteadyMethod,
    /// Residual tolerance relative to ‖f̄‖₀.
    pub tol: f64,
    pub max_iters: usize,
    /// Seed for the sampled constants (μ₀ and the sup of b).
    pub seed: u64,
    pub mu0_trials: usize,
    pub sup_samples: usize,
}

impl SteadyConfig {
    pub fn new(mu: f64, kernel: KernelParams, fbar: VelocityField) -> Self {
        Self {
            mu,
            kernel,
            grid: *fbar.grid(),
            fbar,
            method: SteadyMethod::StokesIteration,
            tol: 1e-10,
            max_iters: 200,
            seed: 0,
            mu0_trials: 4,
            sup_samples: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return argument(format!("mu must be positive, got {}", self.mu));
        }
        if !(self.tol > 0.0) {
            return argument(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iters == 0 {
            return argument("max_iters must be at least 1");
        }
        if *self.fbar.grid() != self.grid {
            return argument("fbar lives on a different grid");
        }
        if self.mu0_trials == 0 || self.sup_samples == 0 {
            return argument("mu0_trials and sup_samples must be at least 1");
        }
        Ok(())
    }

    pub fn nu_eff(&self) -> Result<f64> {
        effective_viscosity(self.mu, &self.kernel)
    }
}

/// μ + ρ Γ(1−β)/δ^{1−β}.
pub fn effective_viscosity(mu: f64, kernel: &KernelParams) -> Result<f64> {
    if kernel.rho() == 0.0 {
        return Ok(mu);
    }
    Ok(mu + kernel.rho() * kernel.moment()?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniquenessIndicator {
    /// N_h ‖f̄‖₋₁ / ν_eff²
    pub value: f64,
    /// Sampled sup of |b(u,v,w)| / (|u|₁|v|₁|w|₁).
    pub sup_b: f64,
    pub samples: usize,
}

impl UniquenessIndicator {
    pub fn small_data(&self) -> bool {
        self.value < 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyDiagnostics {
    pub nu_eff: f64,
    pub ubar_h1: f64,
    pub fbar_dual: f64,
    /// |ū|₁ ≤ 1.05 ‖f̄‖₋₁ / ν_eff
    pub apriori_ok: bool,
    pub mu0_est: Mu0Estimate,
    pub uniqueness: UniquenessIndicator,
}

#[derive(Debug, Clone)]
pub struct SteadySolution {
    pub velocity: VelocityField,
    pub pressure: ScalarField,
    /// Final residual relative to ‖f̄‖₀.
    pub residual: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub method: SteadyMethod,
    pub diagnostics: SteadyDiagnostics,
}

impl SteadySolution {
    /// Line-oriented `key = value` summary.
    pub fn write_summary<W: Write>(&self, mut out: W) -> Result<()> {
        let d = &self.diagnostics;
        writeln!(out, "method = {}", self.method.name())?;
        writeln!(out, "residual = {:.16e}", self.residual)?;
        writeln!(out, "iterations = {}", self.iterations)?;
        writeln!(out, "nu_eff = {:.16e}", d.nu_eff)?;
        writeln!(out, "ubar_h1 = {:.16e}", d.ubar_h1)?;
        writeln!(out, "fbar_dual = {:.16e}", d.fbar_dual)?;
        writeln!(out, "apriori_ok = {}", d.apriori_ok)?;
        writeln!(out, "mu0_est = {:.16e}", d.mu0_est.value)?;
        writeln!(out, "mu0_trials = {}", d.mu0_est.trials)?;
        writeln!(
            out,
            "mu0_violates_coercivity = {}",
            d.mu0_est.violates_coercivity()
        )?;
        writeln!(out, "uniqueness_indicator = {:.16e}", d.uniqueness.value)?;
        writeln!(out, "sup_b = {:.16e}", d.uniqueness.sup_b)?;
        writeln!(out, "sup_b_samples = {}", d.uniqueness.samples)?;
        writeln!(out, "small_data_regime = {}", d.uniqueness.small_data())?;
        for (k, r) in self.residual_history.iter().enumerate() {
            writeln!(out, "residual_{k} = {r:.16e}")?;
        }
        Ok(())
    }
}

/// Discrete ‖f‖₋₁: solve −Δ_h ω = f and return |ω|₁.
pub fn dual_norm(disc: &Discretization, f: &VelocityField) -> Result<f64> {
    let w = disc.helmholtz_solve(0.0, 1.0, f)?;
    Ok(ops::h1_semi_sq(&w).max(0.0).sqrt())
}

pub fn uniqueness_indicator(
    disc: &Discretization,
    config: &SteadyConfig,
) -> Result<UniquenessIndicator> {
    let nu = config.nu_eff()?;
    let sup_b = disc.trilinear_sup_estimate(config.sup_samples, config.seed);
    let value = sup_b * dual_norm(disc, &config.fbar)? / (nu * nu);
    Ok(UniquenessIndicator {
        value,
        sup_b,
        samples: config.sup_samples,
    })
}

/// `f̄ + ν Δ_h u − advect(u,u)`: the momentum defect before removing gradients.
fn momentum_defect(nu: f64, fbar: &VelocityField, u: &VelocityField) -> VelocityField {
    let mut r = fbar.clone();
    r.add_scaled(nu, &ops::laplacian(u));
    r.add_scaled(-1.0, &ops::advect(u, u));
    r
}

/// Pressure that best balances the defect, and the remaining residual norm.
fn residual_and_pressure(
    disc: &Discretization,
    nu: f64,
    fbar: &VelocityField,
    u: &VelocityField,
) -> Result<(f64, ScalarField)> {
    let w = momentum_defect(nu, fbar, u);
    let (q, _) = disc.pressure_poisson_solve(&ops::divergence(&w))?;
    let p = q.scaled(-1.0);
    let mut r = w;
    r.add_scaled(-1.0, &ops::gradient(&p));
    Ok((r.l2(), p))
}

/// Absolute residual ‖f̄ − ν(−Δ_h)u − advect(u,u) − ∇_h p‖₀ of a given pair.
pub fn steady_residual(nu: f64, fbar: &VelocityField, u: &VelocityField, p: &ScalarField) -> f64 {
    let mut r = momentum_defect(nu, fbar, u);
    r.add_scaled(-1.0, &ops::gradient(p));
    r.l2()
}

struct Tracker {
    history: Vec<f64>,
    increases: usize,
}

impl Tracker {
    fn push(&mut self, r: f64) -> Result<()> {
        if let Some(&last) = self.history.last() {
            if r > last {
                self.increases += 1;
            } else {
                self.increases = 0;
            }
        }
        self.history.push(r);
        let first = self.history[0];
        if !r.is_finite() || self.increases >= 5 || r > 1e6 * first {
            return Err(Error::Iteration {
                reason: "steady iteration diverged".into(),
                history: self.history.clone(),
            });
        }
        Ok(())
    }
}

fn inner_tol(config: &SteadyConfig) -> f64 {
    (config.tol * 0.1).clamp(1e-14, 1e-6)
}

fn stokes_step(
    disc: &Discretization,
    nu: f64,
    config: &SteadyConfig,
    u: &VelocityField,
) -> Result<VelocityField> {
    let mut rhs = config.fbar.clone();
    rhs.add_scaled(-1.0, &ops::advect(u, u));
    let (next, _, _) = disc.stokes_solve(0.0, nu, &rhs, inner_tol(config))?;
    Ok(next)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    disc: &Discretization,
    config: &SteadyConfig,
    velocity: VelocityField,
    pressure: ScalarField,
    residual: f64,
    iterations: usize,
    residual_history: Vec<f64>,
    method: SteadyMethod,
) -> Result<SteadySolution> {
    let nu_eff = config.nu_eff()?;
    let ubar_h1 = ops::h1_semi_sq(&velocity).max(0.0).sqrt();
    let fbar_dual = dual_norm(disc, &config.fbar)?;
    let diagnostics = SteadyDiagnostics {
        nu_eff,
        ubar_h1,
        fbar_dual,
        apriori_ok: ubar_h1 <= 1.05 * fbar_dual / nu_eff,
        mu0_est: disc.mu0_estimate(&velocity, config.mu, config.mu0_trials, config.seed)?,
        uniqueness: uniqueness_indicator(disc, config)?,
    };
    Ok(SteadySolution {
        velocity,
        pressure,
        residual,
        iterations,
        residual_history,
        method,
        diagnostics,
    })
}

fn zero_solution(
    disc: &Discretization,
    config: &SteadyConfig,
    method: SteadyMethod,
) -> Result<SteadySolution> {
    let g = config.grid;
    finish(
        disc,
        config,
        VelocityField::zeros(g),
        ScalarField::zeros(g),
        0.0,
        1,
        vec![0.0],
        method,
    )
}

/// Picard iteration: each step is one Stokes solve with the advection lagged.
pub fn solve_stokes_iteration(config: &SteadyConfig) -> Result<SteadySolution> {
    config.validate()?;
    let disc = Discretization::new(config.grid);
    solve_stokes_iteration_with(&disc, config)
}

pub fn solve_stokes_iteration_with(
    disc: &Discretization,
    config: &SteadyConfig,
) -> Result<SteadySolution> {
    let method = SteadyMethod::StokesIteration;
    let f_norm = config.fbar.l2();
    if f_norm == 0.0 {
        return zero_solution(disc, config, method);
    }
    let nu = config.nu_eff()?;
    let mut u = VelocityField::zeros(config.grid);
    let mut tracker = Tracker {
        history: Vec::new(),
        increases: 0,
    };
    for it in 1..=config.max_iters {
        u = stokes_step(disc, nu, config, &u)?;
        let (r, p) = residual_and_pressure(disc, nu, &config.fbar, &u)?;
        let rel = r / f_norm;
        tracker.push(rel)?;
        if rel <= config.tol {
            return finish(disc, config, u, p, rel, it, tracker.history, method);
        }
    }
    Err(Error::Iteration {
        reason: format!(
            "no convergence within {} Stokes iterations",
            config.max_iters
        ),
        history: tracker.history,
    })
}

/// Newton iteration on the fixed-point form u = S⁻¹(f̄ − advect(u,u)), S the
/// Stokes operator with ν_eff. Jacobian systems are solved by restarted GMRES,
/// which is preconditioned by S⁻¹ through this formulation.
pub fn solve_newton(config: &SteadyConfig) -> Result<SteadySolution> {
    config.validate()?;
    let disc = Discretization::new(config.grid);
    solve_newton_with(&disc, config)
}

pub fn solve_newton_with(disc: &Discretization, config: &SteadyConfig) -> Result<SteadySolution> {
    let method = SteadyMethod::Newton;
    let f_norm = config.fbar.l2();
    if f_norm == 0.0 {
        return zero_solution(disc, config, method);
    }
    let nu = config.nu_eff()?;
    let solve_s = |rhs: &VelocityField| -> Result<VelocityField> {
        Ok(disc.stokes_solve(0.0, nu, rhs, inner_tol(config))?.0)
    };

    let mut u = VelocityField::zeros(config.grid);
    let mut tracker = Tracker {
        history: Vec::new(),
        increases: 0,
    };
    // two Picard steps as the initial guess
    for _ in 0..2 {
        u = stokes_step(disc, nu, config, &u)?;
    }
    let (r, mut p) = residual_and_pressure(disc, nu, &config.fbar, &u)?;
    tracker.push(r / f_norm)?;
    let mut iterations = 2;
    while tracker.history.last().copied().unwrap_or(f64::INFINITY) > config.tol {
        if iterations >= config.max_iters {
            return Err(Error::Iteration {
                reason: format!(
                    "no convergence within {} Newton iterations",
                    config.max_iters
                ),
                history: tracker.history,
            });
        }
        // G(u) = u − S⁻¹(f̄ − N(u))
        let mut g = u.clone();
        g.add_scaled(-1.0, &stokes_step(disc, nu, config, &u)?);
        let jac = |d: &VelocityField| -> Result<VelocityField> {
            let mut n = ops::advect(d, &u);
            n.add_scaled(1.0, &ops::advect(&u, d));
            let mut out = d.clone();
            out.add_scaled(1.0, &solve_s(&n)?);
            Ok(out)
        };
        let delta = gmres(jac, &g.scaled(-1.0), 1e-12, 40, 400)?;
        u.add_scaled(1.0, &delta);
        let (r, pn) = residual_and_pressure(disc, nu, &config.fbar, &u)?;
        p = pn;
        iterations += 1;
        tracker.push(r / f_norm)?;
    }
    let residual = *tracker.history.last().expect("nonempty");
    finish(
        disc,
        config,
        u,
        p,
        residual,
        iterations,
        tracker.history,
        method,
    )
}

pub fn solve(config: &SteadyConfig) -> Result<SteadySolution> {
    match config.method {
        SteadyMethod::StokesIteration => solve_stokes_iteration(config),
        SteadyMethod::Newton => solve_newton(config),
    }
}

/// Restarted GMRES(m) for a matrix-free operator on velocity fields.
fn gmres(
    apply: impl Fn(&VelocityField) -> Result<VelocityField>,
    b: &VelocityField,
    rel_tol: f64,
    restart: usize,
    max_iters: usize,
) -> Result<VelocityField> {
    let b_norm = b.l2();
    let mut x = VelocityField::zeros(*b.grid());
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut total = 0;
    let mut res_norm;
    loop {
        let mut r = b.clone();
        if total > 0 {
            r.add_scaled(-1.0, &apply(&x)?);
        }
        res_norm = r.l2();
        if res_norm <= rel_tol * b_norm {
            return Ok(x);
        }
        if total >= max_iters {
            break;
        }
        let mut basis = vec![r.scaled(1.0 / res_norm)];
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut s = vec![0.0; restart + 1];
        s[0] = res_norm;
        let mut k_used = 0;
        for k in 0..restart {
            let mut w = apply(&basis[k])?;
            for (i, v) in basis.iter().enumerate() {
                h[i][k] = w.dot(v);
                w.add_scaled(-h[i][k], v);
            }
            // one reorthogonalization pass
            for (i, v) in basis.iter().enumerate() {
                let c = w.dot(v);
                h[i][k] += c;
                w.add_scaled(-c, v);
            }
            let w_norm = w.l2();
            h[k + 1][k] = w_norm;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            s[k + 1] = -sn[k] * s[k];
            s[k] *= cs[k];
            k_used = k + 1;
            total += 1;
            if s[k + 1].abs() <= rel_tol * b_norm || w_norm == 0.0 || total >= max_iters {
                break;
            }
            basis.push(w.scaled(1.0 / w_norm));
        }
        // back substitution
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut acc = s[i];
            for j in i + 1..k_used {
                acc -= h[i][j] * y[j];
            }
            y[i] = acc / h[i][i];
        }
        for (yi, v) in y.iter().zip(&basis) {
            x.add_scaled(*yi, v);
        }
    }
    Err(Error::Solver {
        solver: "newton jacobian GMRES",
        iterations: total,
        residual: res_norm / b_norm,
    })
}
