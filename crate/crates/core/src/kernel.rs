//! The memory kernel `K(τ) = τ^{-β} e^{-δτ}` as a discrete convolution operator.
//!
//! Weights are the exact integrals of `K` over each time interval (product
//! integration against piecewise-constant, right-endpoint data), so the
//! convolution of a constant history is exact and the only error left is the
//! first-order error of the piecewise-constant data.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{argument, domain, Error, Result};
use crate::special::{gamma_fn, kernel_primitive};

/// The memory triple (β, δ, ρ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    beta: f64,
    delta: f64,
    rho: f64,
}

impl KernelParams {
    pub fn new(beta: f64, delta: f64, rho: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta) {
            return domain(format!("beta must lie in [0,1), got {beta}"));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return domain(format!("delta must be positive and finite, got {delta}"));
        }
        if !(rho >= 0.0) || !rho.is_finite() {
            return domain(format!("rho must be nonnegative and finite, got {rho}"));
        }
        Ok(Self { beta, delta, rho })
    }

    /// Kernel without the exponential factor (δ = 0). Only the closed-form
    /// integrals and pointwise evaluation are defined for it.
    pub fn pure_power(beta: f64, rho: f64) -> Result<Self> {
        let mut p = Self::new(beta, 1.0, rho)?;
        p.delta = 0.0;
        Ok(p)
    }

    /// Build from solvent viscosity and relaxation / retardation times:
    /// δ = 1/λ₁, ρ = (μ/λ₁)(λ₁/λ₂ − 1).
    pub fn from_physical(beta: f64, mu: f64, lambda1: f64, lambda2: f64) -> Result<Self> {
        if !(lambda2 > 0.0 && lambda2 <= lambda1) {
            return domain(format!(
                "relaxation times must satisfy 0 < lambda2 <= lambda1, got ({lambda1}, {lambda2})"
            ));
        }
        if !(mu > 0.0) {
            return domain(format!("mu must be positive, got {mu}"));
        }
        Self::new(
            beta,
            1.0 / lambda1,
            (mu / lambda1) * (lambda1 / lambda2 - 1.0),
        )
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        Self::new(self.beta, self.delta, rho)
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(beta, self.delta, self.rho)
    }

    pub fn is_pure_power(&self) -> bool {
        self.delta == 0.0
    }

    /// K(t) = t^{-β} e^{-δt}.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return domain(format!("kernel is only defined for t > 0, got {t}"));
        }
        Ok(t.powf(-self.beta) * (-self.delta * t).exp())
    }

    /// Total kernel mass ∫₀^∞ K = Γ(1−β)/δ^{1−β}.
    pub fn moment(&self) -> Result<f64> {
        if self.is_pure_power() {
            return domain("pure-power kernel has infinite mass");
        }
        let a = 1.0 - self.beta;
        Ok(gamma_fn(a)? / self.delta.powf(a))
    }
}

/// Exact per-interval kernel integrals ω_k = ∫_{kΔt}^{(k+1)Δt} K on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureWeights {
    dt: f64,
    weights: Vec<f64>,
    underflow_from: Option<usize>,
}

impl QuadratureWeights {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.weights[k]
    }

    /// First index whose weight underflowed to exactly zero, if any.
    pub fn underflow_from(&self) -> Option<usize> {
        self.underflow_from
    }

    pub fn partial_sum(&self, n: usize) -> f64 {
        self.weights[..n].iter().sum()
    }

    /// Copy with every weight set to zero; the memory-free reference path.
    pub fn zeroed(&self) -> Self {
        Self {
            dt: self.dt,
            weights: vec![0.0; self.weights.len()],
            underflow_from: Some(0),
        }
    }

    /// CSV with columns `k,t_left,t_right,omega_k` at 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,t_left,t_right,omega_k")?;
        for (k, w) in self.weights.iter().enumerate() {
            let t0 = k as f64 * self.dt;
            let t1 = (k + 1) as f64 * self.dt;
            writeln!(out, "{k},{t0:.16e},{t1:.16e},{w:.16e}")?;
        }
        Ok(())
    }
}

/// Weights ω₀ … ω_{n−1}, each evaluated in closed form through the incomplete gamma function.
pub fn make_weights(params: &KernelParams, dt: f64, n: usize) -> Result<QuadratureWeights> {
    if !(dt > 0.0) || !dt.is_finite() {
        return argument(format!("dt must be positive, got {dt}"));
    }
    if n == 0 {
        return argument("at least one weight is required");
    }
    let mut weights = Vec::with_capacity(n);
    for k in 0..n {
        weights.push(kernel_primitive(
            params,
            k as f64 * dt,
            (k + 1) as f64 * dt,
        )?);
    }
    let underflow_from = weights.iter().position(|&w| w == 0.0);
    Ok(QuadratureWeights {
        dt,
        weights,
        underflow_from,
    })
}

/// Values that can be convolved against the weight table.
pub trait HistoryValue: Clone {
    fn zeros_like(&self) -> Self;
    /// self += a * x
    fn axpy(&mut self, a: f64, x: &Self);
    fn scale(&mut self, a: f64);
}

impl HistoryValue for f64 {
    fn zeros_like(&self) -> Self {
        0.0
    }

    fn axpy(&mut self, a: f64, x: &Self) {
        *self += a * x;
    }

    fn scale(&mut self, a: f64) {
        *self *= a;
    }
}

/// Σ_{j=1}^{n} ω_{n−j} y_j for samples y₁ … y_n (right-endpoint values).
pub fn convolve_direct<T: HistoryValue>(weights: &QuadratureWeights, history: &[T]) -> Result<T> {
    let n = history.len();
    if n != weights.len() {
        return argument(format!(
            "history has {n} samples but the weight table has {}",
            weights.len()
        ));
    }
    let mut acc = history[0].zeros_like();
    for (j, y) in history.iter().enumerate() {
        acc.axpy(weights.get(n - 1 - j), y);
    }
    Ok(acc)
}

/// Symmetrized quadrature matrix Δt·½(T + Tᵀ), with T lower-triangular Toeplitz built from ω.
pub fn symmetrized_matrix(weights: &QuadratureWeights) -> DMatrix<f64> {
    let n = weights.len();
    let dt = weights.dt();
    DMatrix::from_fn(n, n, |i, j| {
        let k = i.abs_diff(j);
        let w = weights.get(k);
        if k == 0 {
            w * dt
        } else {
            0.5 * w * dt
        }
    })
}

/// Smallest and largest eigenvalue of [`symmetrized_matrix`].
pub fn symmetrized_spectrum(weights: &QuadratureWeights) -> (f64, f64) {
    let eig = SymmetricEigen::new(symmetrized_matrix(weights));
    let min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let max = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// Result of sampling the discrete memory quadratic form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityCertificate {
    /// min over trials of Σ_n Σ_{j≤n} ω_{n−j} φ_j φ_n Δt / ‖φ‖².
    pub min_value: f64,
    pub trials: usize,
    pub seed: u64,
}

impl PositivityCertificate {
    pub fn is_nonnegative(&self, tol: f64) -> bool {
        self.min_value >= -tol
    }
}

/// Discrete memory quadratic form for one sequence φ.
pub fn memory_quadratic_form(weights: &QuadratureWeights, phi: &[f64]) -> f64 {
    let w = weights.as_slice();
    let mut total = 0.0;
    for n in 0..phi.len() {
        let mut inner = 0.0;
        for j in 0..=n {
            inner += w[n - j] * phi[j];
        }
        total += inner * phi[n];
    }
    total * weights.dt()
}

pub fn positivity_certificate(
    weights: &QuadratureWeights,
    trials: usize,
    seed: u64,
) -> Result<PositivityCertificate> {
    if trials == 0 {
        return argument("positivity_certificate needs at least one trial");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = weights.len();
    let mut phi = vec![0.0; n];
    let mut min_value = f64::INFINITY;
    for _ in 0..trials {
        for p in phi.iter_mut() {
            *p = StandardNormal.sample(&mut rng);
        }
        let norm_sq: f64 = phi.iter().map(|p| p * p).sum();
        let q = memory_quadratic_form(weights, &phi) / norm_sq;
        min_value = min_value.min(q);
    }
    Ok(PositivityCertificate {
        min_value,
        trials,
        seed,
    })
}

/// One term `amplitude · e^{-rate·t}` of a sum-of-exponentials approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoeMode {
    pub amplitude: f64,
    pub rate: f64,
}

/// K(t) ≈ Σ aᵢ e^{-λᵢ t} on [valid_from, horizon], with certified relative error.
#[derive(Debug, Clone, PartialEq)]
pub struct SoeApproximation {
    pub modes: Vec<SoeMode>,
    pub valid_from: f64,
    pub horizon: f64,
    pub certified_rel_error: f64,
}

impl SoeApproximation {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.modes
            .iter()
            .map(|m| m.amplitude * (-m.rate * t).exp())
            .sum()
    }
}

/// Mode budget for [`fit_soe`].
pub const SOE_MAX_MODES: usize = 128;
const SOE_CHECK_POINTS: usize = 10_000;
const SOE_SAFETY: f64 = 1.05;

/// Dense check grid on [dt, horizon]: log-spaced and uniformly spaced points.
pub fn soe_check_grid(dt: f64, horizon: f64) -> Vec<f64> {
    let n = SOE_CHECK_POINTS;
    let (l0, l1) = (dt.ln(), horizon.ln());
    let mut grid = Vec::with_capacity(2 * n);
    for i in 0..n {
        let s = i as f64 / (n - 1) as f64;
        grid.push((l0 + s * (l1 - l0)).exp());
        grid.push(dt + s * (horizon - dt));
    }
    grid
}

/// Build a sum-of-exponentials approximation of the kernel on [dt, horizon].
///
/// The power factor is written as t^{-β} = Γ(β)⁻¹ ∫ e^{βx} e^{-eˣ t} dx and
/// discretized with the trapezoid rule in x (exponentially convergent for
/// this integrand). Modes with rate below `c/horizon` behave like constants
/// on the window and are merged into one moment-matched mode; every rate is
/// then shifted by δ to absorb the exponential factor. Candidate step sizes
/// and cutoffs are tried from fewest modes up, and the first one that meets
/// `tol` on the check grid is returned.
pub fn fit_soe(params: &KernelParams, dt: f64, horizon: f64, tol: f64) -> Result<SoeApproximation> {
    if !(dt > 0.0) {
        return argument(format!("dt must be positive, got {dt}"));
    }
    if !(horizon > dt) || !horizon.is_finite() {
        return argument(format!("horizon must exceed dt, got {horizon}"));
    }
    if !(tol > 1e-12 && tol < 1e-2) {
        return argument(format!("tol must lie in (1e-12, 1e-2), got {tol}"));
    }
    if params.is_pure_power() {
        return domain("fit_soe requires delta > 0");
    }
    let beta = params.beta();
    let delta = params.delta();
    if beta == 0.0 {
        return Ok(SoeApproximation {
            modes: vec![SoeMode {
                amplitude: 1.0,
                rate: delta,
            }],
            valid_from: dt,
            horizon,
            certified_rel_error: 0.0,
        });
    }

    let grid = soe_check_grid(dt, horizon);
    let log_tol = -tol.ln();
    let mut candidates = Vec::new();
    for &step in &[
        1.2, 1.0, 0.9, 0.8, 0.7, 0.6, 0.55, 0.5, 0.45, 0.4, 0.35, 0.3, 0.25, 0.2, 0.15,
    ] {
        for &lump in &[1e-2, 1e-3, 1e-4, 1e-5] {
            for &upper in &[0.6 * log_tol, log_tol, log_tol + 8.0] {
                let modes = power_law_modes(beta, dt, horizon, tol, step, lump, upper)?;
                if modes.len() <= SOE_MAX_MODES {
                    candidates.push(modes);
                }
            }
        }
    }
    candidates.sort_by_key(|m| m.len());

    let mut best = (f64::INFINITY, 0usize);
    for modes in candidates {
        let err = power_law_rel_error(&modes, beta, &grid, tol / SOE_SAFETY);
        if err * SOE_SAFETY <= tol {
            let modes = modes
                .into_iter()
                .map(|m| SoeMode {
                    amplitude: m.amplitude,
                    rate: m.rate + delta,
                })
                .collect();
            return Ok(SoeApproximation {
                modes,
                valid_from: dt,
                horizon,
                certified_rel_error: err * SOE_SAFETY,
            });
        }
        if err < best.0 {
            best = (err, modes.len());
        }
    }
    Err(Error::Approximation {
        achieved: best.0 * SOE_SAFETY,
        target: tol,
        modes: best.1,
    })
}

fn power_law_modes(
    beta: f64,
    dt: f64,
    horizon: f64,
    tol: f64,
    step: f64,
    lump_factor: f64,
    upper: f64,
) -> Result<Vec<SoeMode>> {
    let gamma_beta = gamma_fn(beta)?;
    // truncation below x_lo costs at most e^{βx_lo}/(βΓ(β)) relative to horizon^{-β}
    let x_lo = ((tol * 1e-3 * beta * gamma_beta).ln()) / beta - horizon.ln();
    let x_hi = (upper / dt).ln();
    let lump_rate = lump_factor / horizon;
    let k_lo = (x_lo / step).floor() as i64;
    let k_hi = (x_hi / step).ceil() as i64;

    let mut modes = Vec::new();
    let (mut lump_amp, mut lump_moment) = (0.0, 0.0);
    for k in k_lo..=k_hi {
        let x = k as f64 * step;
        let amplitude = step * (beta * x).exp() / gamma_beta;
        let rate = x.exp();
        if rate < lump_rate {
            lump_amp += amplitude;
            lump_moment += amplitude * rate;
        } else {
            modes.push(SoeMode { amplitude, rate });
        }
    }
    if lump_amp > 0.0 {
        modes.push(SoeMode {
            amplitude: lump_amp,
            rate: lump_moment / lump_amp,
        });
    }
    Ok(modes)
}

/// max_t |t^β Σ aᵢ e^{-sᵢt} − 1|; stops early once `abort_above` is exceeded.
fn power_law_rel_error(modes: &[SoeMode], beta: f64, grid: &[f64], abort_above: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for &t in grid {
        let sum: f64 = modes
            .iter()
            .map(|m| m.amplitude * (-m.rate * t).exp())
            .sum();
        let err = (sum * t.powf(beta) - 1.0).abs();
        worst = worst.max(err);
        if worst > 10.0 * abort_above {
            break;
        }
    }
    worst
}

/// Measured relative error of an approximation against the exact kernel on the check grid.
pub fn soe_measured_error(params: &KernelParams, soe: &SoeApproximation) -> f64 {
    let grid = soe_check_grid(soe.valid_from, soe.horizon);
    let delta = params.delta();
    grid.iter()
        .map(|&t| {
            let shifted: f64 = soe
                .modes
                .iter()
                .map(|m| m.amplitude * (-(m.rate - delta) * t).exp())
                .sum();
            (shifted * t.powf(params.beta()) - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

/// Per-mode recurrence data for the compressed history.
#[derive(Debug, Clone)]
pub struct SoeState<T> {
    dt: f64,
    omega0: f64,
    /// aᵢ (1 − e^{−λᵢΔt}) / λᵢ
    coef: Vec<f64>,
    /// e^{−λᵢΔt}
    decay: Vec<f64>,
    accum: Vec<T>,
    steps: usize,
}

impl<T: HistoryValue> SoeState<T> {
    pub fn modes(&self) -> usize {
        self.coef.len()
    }

    pub fn accumulators(&self) -> &[T] {
        &self.accum
    }
}

/// Stored history: raw snapshots, or per-mode accumulators.
#[derive(Debug, Clone)]
pub enum HistoryBuffer<T> {
    Direct { snapshots: Vec<T> },
    Compressed(SoeState<T>),
}

impl<T: HistoryValue> HistoryBuffer<T> {
    pub fn direct() -> Self {
        HistoryBuffer::Direct {
            snapshots: Vec::new(),
        }
    }

    /// Compressed buffer for step `dt`; `zero` fixes the shape of the accumulators.
    pub fn compressed(
        soe: &SoeApproximation,
        params: &KernelParams,
        dt: f64,
        zero: &T,
    ) -> Result<Self> {
        if (soe.valid_from - dt).abs() > 1e-12 * dt {
            return argument(format!(
                "approximation is valid from {} but the step is {dt}",
                soe.valid_from
            ));
        }
        let omega0 = kernel_primitive(params, 0.0, dt)?;
        let coef = soe
            .modes
            .iter()
            .map(|m| m.amplitude * (-(-m.rate * dt).exp_m1()) / m.rate)
            .collect();
        let decay = soe.modes.iter().map(|m| (-m.rate * dt).exp()).collect();
        Ok(HistoryBuffer::Compressed(SoeState {
            dt,
            omega0,
            coef,
            decay,
            accum: vec![zero.zeros_like(); soe.modes.len()],
            steps: 0,
        }))
    }

    /// Number of completed steps stored.
    pub fn len(&self) -> usize {
        match self {
            HistoryBuffer::Direct { snapshots } => snapshots.len(),
            HistoryBuffer::Compressed(s) => s.steps,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_compressed(&self) -> bool {
        matches!(self, HistoryBuffer::Compressed(_))
    }

    /// Record the sample of the step just completed.
    pub fn push(&mut self, y: &T) {
        match self {
            HistoryBuffer::Direct { snapshots } => snapshots.push(y.clone()),
            HistoryBuffer::Compressed(s) => {
                // s_m ← e^{−λ_mΔt}(s_m + y)
                for (acc, &d) in s.accum.iter_mut().zip(&s.decay) {
                    acc.axpy(1.0, y);
                    acc.scale(d);
                }
                s.steps += 1;
            }
        }
    }

    /// Σ_{j=1}^{n} ω_{n+1−j} y_j: the part of the next convolution that does
    /// not involve the new sample. `None` while the buffer is empty.
    pub fn lagged_sum(&self, weights: &QuadratureWeights) -> Result<Option<T>> {
        match self {
            HistoryBuffer::Direct { snapshots } => {
                let n = snapshots.len();
                if n == 0 {
                    return Ok(None);
                }
                if weights.len() <= n {
                    return argument(format!(
                        "weight table of length {} is too short for {n} history samples",
                        weights.len()
                    ));
                }
                let mut acc = snapshots[0].zeros_like();
                for (j, y) in snapshots.iter().enumerate() {
                    acc.axpy(weights.get(n - j), y);
                }
                Ok(Some(acc))
            }
            HistoryBuffer::Compressed(s) => {
                if s.steps == 0 {
                    return Ok(None);
                }
                let mut acc = s.accum[0].zeros_like();
                for (c, a) in s.coef.iter().zip(&s.accum) {
                    acc.axpy(*c, a);
                }
                Ok(Some(acc))
            }
        }
    }

    pub fn snapshots(&self) -> Option<&[T]> {
        match self {
            HistoryBuffer::Direct { snapshots } => Some(snapshots),
            HistoryBuffer::Compressed(_) => None,
        }
    }
}

/// Advance a compressed buffer by one sample and return the full convolution
/// Σ_{j=1}^{n} ω_{n−j} y_j including the new sample y_n (weighted by the exact ω₀).
pub fn convolve_soe_step<T: HistoryValue>(
    buffer: &mut HistoryBuffer<T>,
    sample: &T,
    dt: f64,
) -> Result<T> {
    let HistoryBuffer::Compressed(state) = buffer else {
        return argument("convolve_soe_step needs a compressed history buffer");
    };
    if (state.dt - dt).abs() > 1e-12 * dt {
        return argument(format!("buffer step {} does not match dt {dt}", state.dt));
    }
    let mut value = sample.zeros_like();
    value.axpy(state.omega0, sample);
    for (c, a) in state.coef.iter().zip(&state.accum) {
        value.axpy(*c, a);
    }
    buffer.push(sample);
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(KernelParams::new(1.0, 1.0, 1.0).is_err());
        assert!(KernelParams::new(-0.1, 1.0, 1.0).is_err());
        assert!(KernelParams::new(0.5, 0.0, 1.0).is_err());
        assert!(KernelParams::new(0.5, 1.0, -1.0).is_err());
        assert!(KernelParams::new(0.5, 1.0, 0.0).is_ok());
        assert!(KernelParams::pure_power(0.5, 1.0).unwrap().is_pure_power());
    }

    #[test]
    fn from_physical_constants() {
        let p = KernelParams::from_physical(0.3, 2.0, 4.0, 1.0).unwrap();
        assert_eq!(p.delta(), 0.25);
        assert_eq!(p.rho(), 0.5 * 3.0);
        assert!(KernelParams::from_physical(0.3, 2.0, 1.0, 4.0).is_err());
        assert!(KernelParams::from_physical(0.3, 2.0, 1.0, 0.0).is_err());
        // λ₂ = λ₁ switches memory off
        assert_eq!(
            KernelParams::from_physical(0.3, 2.0, 1.0, 1.0)
                .unwrap()
                .rho(),
            0.0
        );
    }

    #[test]
    fn kernel_eval_examples() {
        let k = KernelParams::new(0.0, 1.0, 1.0).unwrap();
        assert_eq!(k.eval(1.0).unwrap(), (-1f64).exp());
        let p = KernelParams::pure_power(0.5, 1.0).unwrap();
        assert_eq!(p.eval(4.0).unwrap(), 0.5);
        let k = KernelParams::new(0.5, 1.0, 1.0).unwrap();
        assert!((k.eval(1.0).unwrap() - 0.367_879_441_171_442_33).abs() < 1e-16);
        assert!(k.eval(0.0).is_err());
        assert!(k.eval(-1.0).is_err());
    }

    #[test]
    fn kernel_moment_examples() {
        let m = KernelParams::new(0.0, 2.0, 1.0).unwrap().moment().unwrap();
        assert!((m - 0.5).abs() < 1e-15);
        let m = KernelParams::new(0.5, 1.0, 1.0).unwrap().moment().unwrap();
        assert!((m - 1.772_453_850_905_516).abs() < 1e-14);
        let m = KernelParams::new(0.5, 4.0, 1.0).unwrap().moment().unwrap();
        assert!((m - 0.886_226_925_452_758).abs() < 1e-14);
    }

    #[test]
    fn first_weights() {
        let w = make_weights(&KernelParams::new(0.0, 1.0, 1.0).unwrap(), 1.0, 4).unwrap();
        assert!((w.get(0) - (1.0 - (-1f64).exp())).abs() < 1e-15);
        let w = make_weights(&KernelParams::pure_power(0.5, 1.0).unwrap(), 0.1, 4).unwrap();
        assert!((w.get(0) - 2.0 * 0.1f64.sqrt()).abs() < 1e-15);
        assert!(make_weights(&KernelParams::new(0.5, 1.0, 1.0).unwrap(), 0.0, 4).is_err());
        assert!(make_weights(&KernelParams::new(0.5, 1.0, 1.0).unwrap(), 0.1, 0).is_err());
    }

    #[test]
    fn underflow_flagged() {
        let k = KernelParams::new(0.5, 1.0, 1.0).unwrap();
        let w = make_weights(&k, 1.0, 900).unwrap();
        let idx = w.underflow_from().expect("tail weights underflow");
        assert!(idx > 700);
        assert!(w.as_slice()[..idx].iter().all(|&x| x > 0.0));
    }

    #[test]
    fn convolve_direct_contract() {
        let k = KernelParams::new(0.5, 1.0, 1.0).unwrap();
        let w = make_weights(&k, 0.1, 5).unwrap();
        assert_eq!(convolve_direct(&w, &[0.0; 5]).unwrap(), 0.0);
        let ones = convolve_direct(&w, &[1.0; 5]).unwrap();
        assert!((ones - w.partial_sum(5)).abs() < 1e-15);
        assert!(convolve_direct(&w, &[1.0; 4]).is_err());
    }

    #[test]
    fn single_weight_certificate() {
        let k = KernelParams::new(0.3, 1.0, 1.0).unwrap();
        let w = make_weights(&k, 0.1, 1).unwrap();
        let c = positivity_certificate(&w, 10, 7).unwrap();
        assert!((c.min_value - w.get(0) * 0.1).abs() < 1e-15);
        assert!(positivity_certificate(&w, 0, 7).is_err());
    }

    #[test]
    fn soe_exponential_kernel_is_one_mode() {
        let k = KernelParams::new(0.0, 2.5, 1.0).unwrap();
        let soe = fit_soe(&k, 1e-3, 10.0, 1e-8).unwrap();
        assert_eq!(
            soe.modes,
            vec![SoeMode {
                amplitude: 1.0,
                rate: 2.5
            }]
        );
        assert_eq!(soe.certified_rel_error, 0.0);
    }

    #[test]
    fn soe_argument_checks() {
        let k = KernelParams::new(0.5, 1.0, 1.0).unwrap();
        assert!(fit_soe(&k, 0.0, 10.0, 1e-6).is_err());
        assert!(fit_soe(&k, 1.0, 0.5, 1e-6).is_err());
        assert!(fit_soe(&k, 1e-3, 10.0, 1e-13).is_err());
        assert!(fit_soe(&k, 1e-3, 10.0, 0.5).is_err());
    }

    #[test]
    fn soe_step_rejects_mismatch() {
        let k = KernelParams::new(0.5, 1.0, 1.0).unwrap();
        let soe = fit_soe(&k, 0.01, 5.0, 1e-6).unwrap();
        let mut direct = HistoryBuffer::<f64>::direct();
        assert!(convolve_soe_step(&mut direct, &1.0, 0.01).is_err());
        let mut buf = HistoryBuffer::compressed(&soe, &k, 0.01, &0.0).unwrap();
        assert!(convolve_soe_step(&mut buf, &1.0, 0.02).is_err());
        assert!(HistoryBuffer::compressed(&soe, &k, 0.02, &0.0).is_err());
        assert_eq!(convolve_soe_step(&mut buf, &0.0, 0.01).unwrap(), 0.0);
        assert_eq!(buf.len(), 1);
    }
}
