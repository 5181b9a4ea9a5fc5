//! Time marching of the flow with memory.
//!
//! One step is first order and semi-implicit: the diffusion and the newest
//! memory interval are implicit, advection is explicit, and the pressure is
//! updated incrementally by a projection. The memory term enters as
//! `ρ Δ_h (Σ ω u)`, one Laplacian of the weighted history per step.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::discretization::{Discretization, FieldNorms};
use crate::error::{argument, Error, Result};
use crate::forcing::ForcingSpec;
use crate::grid::{ScalarField, StaggeredGrid, VelocityField};
use crate::kernel::{
    fit_soe, make_weights, HistoryBuffer, KernelParams, QuadratureWeights, SoeApproximation,
};
use crate::ops;
use crate::snapshot::{self, SnapshotFormat};

/// Direct mode cost grows quadratically; above this many steps a warning is issued.
pub const DIRECT_STEP_WARNING: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum HistoryMode {
    /// Store every velocity snapshot.
    #[default]
    Direct,
    /// Sum-of-exponentials compression with the given relative tolerance.
    Soe { tol: f64 },
}

#[derive(Debug, Clone)]
pub struct FluidConfig {
    pub mu: f64,
    pub kernel: KernelParams,
    pub grid: StaggeredGrid,
    pub dt: f64,
    pub t_end: f64,
    pub forcing: ForcingSpec,
    pub initial_velocity: VelocityField,
    pub history_mode: HistoryMode,
    /// Switch for the explicit advection term.
    pub advection: bool,
}

impl FluidConfig {
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return argument(format!("mu must be positive, got {}", self.mu));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return argument(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return argument(format!("t_end must be nonnegative, got {}", self.t_end));
        }
        if *self.initial_velocity.grid() != self.grid {
            return argument("initial velocity lives on a different grid");
        }
        if !self.initial_velocity.is_admissible() {
            return argument("initial velocity has nonzero normal boundary values");
        }
        let div = ops::divergence(&self.initial_velocity).max_abs() * self.grid.h_min();
        if div > 1e-10 * self.initial_velocity.l2().max(f64::MIN_POSITIVE) {
            return argument(format!(
                "initial velocity is not divergence-free (scaled residual {div:e})"
            ));
        }
        if let HistoryMode::Soe { tol } = self.history_mode {
            if !(tol > 0.0) {
                return argument(format!("SOE tolerance must be positive, got {tol}"));
            }
        }
        Ok(())
    }
}

/// Per-cadence diagnostics: the columns of the diagnostic CSV.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyRecord {
    pub t: f64,
    pub l2_sq: f64,
    pub h1_sq: f64,
    pub a_norm_sq: f64,
    /// ‖(uⁿ − uⁿ⁻¹)/Δt‖₀²
    pub ut_l2_sq: f64,
    /// Cumulative Δt Σₙ ⟨−Δ_h Σⱼ ω_{n−j} uʲ, uⁿ⟩.
    pub mem_form: f64,
    pub div_residual: f64,
}

pub const DIAGNOSTIC_COLUMNS: &str = "t,l2_sq,h1_sq,a_norm_sq,ut_l2_sq,mem_form,div_residual";

impl EnergyRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.t,
            self.l2_sq,
            self.h1_sq,
            self.a_norm_sq,
            self.ut_l2_sq,
            self.mem_form,
            self.div_residual
        )
    }

    pub fn values(&self) -> [f64; 7] {
        [
            self.t,
            self.l2_sq,
            self.h1_sq,
            self.a_norm_sq,
            self.ut_l2_sq,
            self.mem_form,
            self.div_residual,
        ]
    }
}

pub fn write_diagnostics<W: Write>(records: &[EnergyRecord], mut out: W) -> Result<()> {
    writeln!(out, "{DIAGNOSTIC_COLUMNS}")?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TransientState {
    pub step: usize,
    pub time: f64,
    pub velocity: VelocityField,
    pub pressure: ScalarField,
    pub previous: VelocityField,
    pub history: HistoryBuffer<VelocityField>,
    pub mem_form: f64,
}

/// A configured time stepper: the grid solvers, the weight table and the forcing.
#[derive(Debug, Clone)]
pub struct TransientSolver {
    config: FluidConfig,
    disc: Discretization,
    weights: QuadratureWeights,
    soe: Option<SoeApproximation>,
    warnings: Vec<String>,
}

impl TransientSolver {
    pub fn new(config: FluidConfig) -> Result<Self> {
        config.validate()?;
        let n = config.n_steps();
        let weights = make_weights(&config.kernel, config.dt, n + 1)?;
        let mut warnings = Vec::new();
        let soe = match config.history_mode {
            HistoryMode::Direct => {
                if n > DIRECT_STEP_WARNING {
                    warnings.push(format!(
                        "direct history mode with {n} steps has quadratic cost; consider SOE mode"
                    ));
                }
                None
            }
            HistoryMode::Soe { tol } => {
                let horizon = (n + 2) as f64 * config.dt;
                Some(fit_soe(&config.kernel, config.dt, horizon, tol)?)
            }
        };
        let disc = Discretization::new(config.grid);
        let solver = Self {
            config,
            disc,
            weights,
            soe,
            warnings,
        };
        Ok(solver)
    }

    pub fn config(&self) -> &FluidConfig {
        &self.config
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn weights(&self) -> &QuadratureWeights {
        &self.weights
    }

    pub fn soe(&self) -> Option<&SoeApproximation> {
        self.soe.as_ref()
    }

    /// Non-fatal notes: quadratic cost, CFL violations.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Replace every weight by zero: the memory-free reference path.
    pub fn disable_memory(&mut self) {
        self.weights = self.weights.zeroed();
        self.soe = None;
        self.config.history_mode = HistoryMode::Direct;
    }

    fn rho(&self) -> f64 {
        self.config.kernel.rho()
    }

    fn advect(&self, u: &VelocityField) -> VelocityField {
        if self.config.advection {
            ops::advect(u, u)
        } else {
            VelocityField::zeros(self.config.grid)
        }
    }

    /// State at t = 0 with a pressure consistent with the initial momentum balance.
    pub fn initial_state(&self) -> Result<TransientState> {
        let c = &self.config;
        let u0 = c.initial_velocity.clone();
        let mut w = c.forcing.eval(c.grid, 0.0)?;
        w.add_scaled(c.mu, &ops::laplacian(&u0));
        w.add_scaled(-1.0, &self.advect(&u0));
        // ∇p = (I − P) w, i.e. Δ_N p = div w
        let (q, _) = self.disc.pressure_poisson_solve(&ops::divergence(&w))?;
        let history = match &self.soe {
            None => HistoryBuffer::direct(),
            Some(soe) => HistoryBuffer::compressed(soe, &c.kernel, c.dt, &u0)?,
        };
        Ok(TransientState {
            step: 0,
            time: 0.0,
            previous: u0.clone(),
            velocity: u0,
            pressure: q.scaled(-1.0),
            history,
            mem_form: 0.0,
        })
    }

    /// Advance one step.
    pub fn step(&self, state: &mut TransientState) -> Result<()> {
        let c = &self.config;
        let dt = c.dt;
        let n = state.step;
        if n + 1 >= self.weights.len() {
            return argument(format!(
                "step {} exceeds the configured horizon of {} steps",
                n + 1,
                self.weights.len() - 1
            ));
        }
        let t1 = (n + 1) as f64 * dt;
        let omega0 = self.weights.get(0);
        let rho = self.rho();

        let lap_h = match state.history.lagged_sum(&self.weights)? {
            Some(h) => ops::laplacian(&h),
            None => VelocityField::zeros(c.grid),
        };
        let mut rhs = state.velocity.scaled(1.0 / dt);
        rhs.add_scaled(-1.0, &self.advect(&state.velocity));
        rhs.add_scaled(rho, &lap_h);
        rhs.add_scaled(1.0, &c.forcing.eval(c.grid, t1)?);
        rhs.add_scaled(-1.0, &ops::gradient(&state.pressure));
        let u_star = self
            .disc
            .helmholtz_solve(1.0 / dt, c.mu + rho * omega0, &rhs)?;

        // −Δ_N φ' = div u*/Δt, so the increment φ of the text is −φ'
        let (phi, _) = self
            .disc
            .pressure_poisson_solve(&ops::divergence(&u_star).scaled(1.0 / dt))?;
        let mut u_new = u_star;
        u_new.add_scaled(dt, &ops::gradient(&phi));
        let mut p_new = state.pressure.clone();
        p_new.add_scaled(-1.0, &phi);

        if !u_new.is_finite() || !p_new.as_slice().iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                step: n + 1,
                time: t1,
            });
        }

        let increment = dt * (omega0 * ops::h1_semi_sq(&u_new) - lap_h.dot(&u_new));
        state.history.push(&u_new);
        state.mem_form += increment;
        state.previous = std::mem::replace(&mut state.velocity, u_new);
        state.pressure = p_new;
        state.step = n + 1;
        state.time = t1;
        Ok(())
    }

    pub fn energy_monitor(&self, state: &TransientState) -> Result<EnergyRecord> {
        let FieldNorms {
            l2,
            h1_semi,
            a_norm,
        } = self.disc.norms(&state.velocity)?;
        let ut = if state.step == 0 {
            0.0
        } else {
            state.velocity.sub(&state.previous).l2() / self.config.dt
        };
        Ok(EnergyRecord {
            t: state.time,
            l2_sq: l2 * l2,
            h1_sq: h1_semi * h1_semi,
            a_norm_sq: a_norm * a_norm,
            ut_l2_sq: ut * ut,
            mem_form: state.mem_form,
            div_residual: ops::divergence_residual(&state.velocity),
        })
    }

    /// Run from `state` to the configured end time, recording diagnostics
    /// every `cadence` steps (and at the first and last step). `observer` sees
    /// the state after every step.
    pub fn run_from(
        &mut self,
        mut state: TransientState,
        cadence: usize,
        mut observer: impl FnMut(&TransientState) -> Result<()>,
    ) -> Result<RunOutput> {
        let cadence = cadence.max(1);
        let n = self.config.n_steps();
        let h = self.config.grid.h_min();
        let mut records = Vec::new();
        if state.step == 0 {
            records.push(self.energy_monitor(&state)?);
            observer(&state)?;
        }
        let mut cfl_reported = false;
        while state.step < n {
            self.step(&mut state)?;
            observer(&state)?;
            if state.step.is_multiple_of(cadence) || state.step == n {
                records.push(self.energy_monitor(&state)?);
                let cfl = state.velocity.max_abs() * self.config.dt / h;
                if cfl > 1.0 && !cfl_reported {
                    cfl_reported = true;
                    self.warnings.push(format!(
                        "advective CFL number {cfl:.3} exceeds 1 at t = {}",
                        state.time
                    ));
                }
            }
        }
        Ok(RunOutput {
            records,
            final_state: state,
            warnings: self.warnings.clone(),
        })
    }

    pub fn run(&mut self, cadence: usize) -> Result<RunOutput> {
        let state = self.initial_state()?;
        self.run_from(state, cadence, |_| Ok(()))
    }

    /// Write the complete state to a directory (direct history mode only).
    pub fn write_checkpoint(&self, state: &TransientState, dir: &Path) -> Result<()> {
        let Some(history) = state.history.snapshots() else {
            return argument("checkpoints are supported in direct history mode only");
        };
        fs::create_dir_all(dir)?;
        let fmt = SnapshotFormat::Binary;
        let t = state.time;
        snapshot::write_velocity(
            &dir.join("velocity.snap"),
            &state.velocity,
            "velocity",
            t,
            fmt,
        )?;
        snapshot::write_velocity(
            &dir.join("previous.snap"),
            &state.previous,
            "previous_velocity",
            t,
            fmt,
        )?;
        snapshot::write_scalar(
            &dir.join("pressure.snap"),
            &state.pressure,
            "pressure",
            t,
            fmt,
        )?;
        if !history.is_empty() {
            snapshot::write_velocity_series(&dir.join("history.snap"), history, "history", t, fmt)?;
        }
        let meta = format!(
            "step = {}\ntime = {:e}\nmem_form = {:e}\nhistory = {}\n",
            state.step,
            state.time,
            state.mem_form,
            history.len()
        );
        fs::write(dir.join("state.txt"), meta)?;
        Ok(())
    }

    pub fn read_checkpoint(&self, dir: &Path) -> Result<TransientState> {
        if self.soe.is_some() {
            return argument("checkpoints are supported in direct history mode only");
        }
        let meta = fs::read_to_string(dir.join("state.txt"))?;
        let mut vals = std::collections::HashMap::new();
        for (i, line) in meta.lines().enumerate() {
            let (k, v) = line.split_once('=').ok_or(Error::Parse {
                line: i + 1,
                msg: "expected `key = value`".into(),
            })?;
            vals.insert(k.trim().to_string(), v.trim().to_string());
        }
        let field = |k: &str| -> Result<&String> {
            vals.get(k)
                .ok_or_else(|| Error::Io(format!("checkpoint lacks `{k}`")))
        };
        let parse_err = |k: &str| Error::Io(format!("checkpoint field `{k}` is malformed"));
        let step: usize = field("step")?.parse().map_err(|_| parse_err("step"))?;
        let time: f64 = field("time")?.parse().map_err(|_| parse_err("time"))?;
        let mem_form: f64 = field("mem_form")?
            .parse()
            .map_err(|_| parse_err("mem_form"))?;
        let n_hist: usize = field("history")?
            .parse()
            .map_err(|_| parse_err("history"))?;
        let (_, velocity) = snapshot::read_velocity(&dir.join("velocity.snap"))?;
        let (_, previous) = snapshot::read_velocity(&dir.join("previous.snap"))?;
        let (_, pressure) = snapshot::read_scalar(&dir.join("pressure.snap"))?;
        let snapshots = if n_hist > 0 {
            snapshot::read_velocity_series(&dir.join("history.snap"))?.1
        } else {
            Vec::new()
        };
        if snapshots.len() != n_hist || *velocity.grid() != self.config.grid {
            return Err(Error::Io(
                "checkpoint does not match the configuration".into(),
            ));
        }
        Ok(TransientState {
            step,
            time,
            velocity,
            pressure,
            previous,
            history: HistoryBuffer::Direct { snapshots },
            mem_form,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<EnergyRecord>,
    pub final_state: TransientState,
    pub warnings: Vec<String>,
}
