//! Gamma and incomplete gamma functions, and the exact integrals of the memory
//! kernel `τ^{-β} e^{-δτ}` built on them.

use crate::error::{argument, domain, Result};
use crate::kernel::KernelParams;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const MAX_ITER: usize = 500;
const EPS: f64 = 1e-17;
const TINY: f64 = 1e-300;

/// Γ(z) for real z > 0 (Lanczos approximation, reflection below 1/2).
pub fn gamma_fn(z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return domain(format!(
            "gamma_fn requires a finite positive argument, got {z}"
        ));
    }
    Ok(gamma_positive(z))
}

fn gamma_positive(z: f64) -> f64 {
    if z.fract() == 0.0 && z <= 171.0 {
        // exact factorials for integer arguments
        (1..z as u32).map(f64::from).product()
    } else if z < 0.5 {
        // Γ(z)Γ(1-z) = π / sin(πz)
        std::f64::consts::PI / ((std::f64::consts::PI * z).sin() * gamma_positive(1.0 - z))
    } else {
        let z = z - 1.0;
        let mut x = LANCZOS_COEF[0];
        for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            x += c / (z + i as f64);
        }
        let t = z + LANCZOS_G + 0.5;
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * x
    }
}

/// Lower incomplete gamma γ(a, x) = ∫₀ˣ τ^{a-1} e^{-τ} dτ (not regularized).
pub fn lower_incomplete_gamma(a: f64, x: f64) -> Result<f64> {
    check_incomplete_args(a, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(gamma_positive(a));
    }
    if x < a + 1.0 {
        Ok(lower_series(a, x))
    } else {
        Ok(gamma_positive(a) - upper_fraction(a, x))
    }
}

/// Upper incomplete gamma Γ(a, x) = ∫ₓ^∞ τ^{a-1} e^{-τ} dτ (not regularized).
pub fn upper_incomplete_gamma(a: f64, x: f64) -> Result<f64> {
    check_incomplete_args(a, x)?;
    if x.is_infinite() {
        return Ok(0.0);
    }
    if x < a + 1.0 {
        Ok(gamma_positive(a) - lower_series(a, x))
    } else {
        Ok(upper_fraction(a, x))
    }
}

/// ∫_{x0}^{x1} τ^{a-1} e^{-τ} dτ, choosing the representation that avoids
/// cancellation. Consistent across adjacent intervals, so sums telescope.
pub fn incomplete_gamma_interval(a: f64, x0: f64, x1: f64) -> Result<f64> {
    check_incomplete_args(a, x0)?;
    check_incomplete_args(a, x1)?;
    if x0 > x1 {
        return argument(format!("interval is reversed: {x0} > {x1}"));
    }
    if x0 == x1 {
        return Ok(0.0);
    }
    let split = a + 1.0;
    let lower = |x: f64| if x == 0.0 { 0.0 } else { lower_series(a, x) };
    let upper = |x: f64| {
        if x.is_infinite() {
            0.0
        } else {
            upper_fraction(a, x)
        }
    };
    let value = if x1 < split {
        lower(x1) - lower(x0)
    } else if x0 >= split {
        upper(x0) - upper(x1)
    } else {
        (gamma_positive(a) - lower(x0)) - upper(x1)
    };
    Ok(value.max(0.0))
}

fn check_incomplete_args(a: f64, x: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return domain(format!("incomplete gamma requires a > 0, got {a}"));
    }
    if !(x >= 0.0) {
        return domain(format!("incomplete gamma requires x >= 0, got {x}"));
    }
    Ok(())
}

/// e^{-x} x^a Σ xⁿ / (a(a+1)…(a+n)), valid and fast for x < a + 1.
fn lower_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * (a * x.ln() - x).exp()
}

/// Γ(a, x) by the modified Lentz continued fraction, for x ≥ a + 1.
fn upper_fraction(a: f64, x: f64) -> f64 {
    let prefactor = (a * x.ln() - x).exp();
    if prefactor == 0.0 {
        return 0.0;
    }
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    prefactor * h
}

/// ∫_{t0}^{t1} τ^{-β} e^{-δτ} dτ in closed form; `t1` may be `f64::INFINITY`.
///
/// With δ = 0 (only reachable through [`KernelParams::pure_power`]) this is
/// `(t1^{1-β} - t0^{1-β}) / (1-β)`.
pub fn kernel_primitive(params: &KernelParams, t0: f64, t1: f64) -> Result<f64> {
    if !(t0 >= 0.0) || t1.is_nan() {
        return argument(format!("kernel_primitive needs t0 >= 0, got ({t0}, {t1})"));
    }
    if t0 > t1 {
        return argument(format!(
            "kernel_primitive interval is reversed: {t0} > {t1}"
        ));
    }
    let a = 1.0 - params.beta();
    let delta = params.delta();
    if delta == 0.0 {
        if t1.is_infinite() {
            return domain("pure-power kernel has no finite integral over an infinite interval");
        }
        return Ok((t1.powf(a) - t0.powf(a)) / a);
    }
    let scale = delta.powf(-a);
    Ok(scale * incomplete_gamma_interval(a, delta * t0, delta * t1)?)
}

/// Memory tail T(t) = (ρ/δ^{1-β}) ∫_{δt}^∞ s^{-β} e^{-s} ds, the part of the
/// kernel mass not yet seen at time t.
pub fn kernel_tail(params: &KernelParams, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return argument(format!("kernel_tail needs t >= 0, got {t}"));
    }
    let a = 1.0 - params.beta();
    let delta = params.delta();
    if delta == 0.0 {
        return domain("kernel_tail is unbounded for the pure-power kernel");
    }
    Ok(params.rho() * delta.powf(-a) * upper_incomplete_gamma(a, delta * t)?)
}

/// Constant c₁ = ρ 2^{1-β} Γ(1-β) / δ^{1-β} in the tail bound T(t) ≤ c₁ e^{-δt/2}.
pub fn kernel_tail_bound_constant(params: &KernelParams) -> Result<f64> {
    let a = 1.0 - params.beta();
    if params.delta() == 0.0 {
        return domain("tail bound undefined for the pure-power kernel");
    }
    Ok(params.rho() * 2f64.powf(a) * gamma_positive(a) / params.delta().powf(a))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn gamma_known_values() {
        assert_eq!(gamma_fn(1.0).unwrap(), 1.0);
        assert!(rel(gamma_fn(0.5).unwrap(), 1.772_453_850_905_516) < 1e-14);
        // Γ(2.5) = 1.5 · 0.5 · Γ(0.5)
        let oracle = 1.5 * 0.5 * std::f64::consts::PI.sqrt();
        assert!(rel(gamma_fn(2.5).unwrap(), oracle) < 1e-14);
        assert!(rel(oracle, 1.329_340_388_179_137) < 1e-15);
        assert!(rel(gamma_fn(5.0).unwrap(), 24.0) < 1e-14);
    }

    #[test]
    fn gamma_rejects_nonpositive() {
        assert!(matches!(gamma_fn(0.0), Err(crate::Error::Domain(_))));
        assert!(gamma_fn(-1.5).is_err());
        assert!(gamma_fn(f64::NAN).is_err());
    }

    #[test]
    fn gamma_recurrence() {
        let mut z = 0.05;
        while z <= 10.0 {
            let lhs = gamma_fn(z + 1.0).unwrap();
            let rhs = z * gamma_fn(z).unwrap();
            assert!(rel(lhs, rhs) < 1e-13, "z = {z}: {lhs} vs {rhs}");
            z += 0.0137;
        }
    }

    #[test]
    fn incomplete_gamma_examples() {
        let v = lower_incomplete_gamma(1.0, 1.0).unwrap();
        assert!(rel(v, 0.632_120_558_828_557_7) < 1e-14);
        assert!(rel(v, 1.0 - (-1f64).exp()) < 1e-14);
        assert_eq!(lower_incomplete_gamma(0.5, 0.0).unwrap(), 0.0);
        assert!(lower_incomplete_gamma(0.0, 1.0).is_err());
        assert!(lower_incomplete_gamma(-0.3, 1.0).is_err());
    }

    #[test]
    fn incomplete_gamma_large_x_limit() {
        for &a in &[0.1, 0.5, 1.0, 2.2, 3.0] {
            let g = gamma_fn(a).unwrap();
            assert!(rel(lower_incomplete_gamma(a, 80.0).unwrap(), g) < 1e-14);
            assert_eq!(lower_incomplete_gamma(a, f64::INFINITY).unwrap(), g);
            assert_eq!(upper_incomplete_gamma(a, 1e4).unwrap(), 0.0);
        }
    }

    #[test]
    fn interval_matches_difference() {
        let a = 0.5;
        for &(x0, x1) in &[
            (0.0, 0.3),
            (0.3, 1.2),
            (1.2, 4.0),
            (0.2, 9.0),
            (5.0, f64::INFINITY),
        ] {
            let direct = incomplete_gamma_interval(a, x0, x1).unwrap();
            let diff =
                lower_incomplete_gamma(a, x1).unwrap() - lower_incomplete_gamma(a, x0).unwrap();
            assert!((direct - diff).abs() < 1e-14, "({x0}, {x1})");
        }
        assert!(incomplete_gamma_interval(a, 2.0, 1.0).is_err());
    }
}
