//! Body forces and the manufactured solution used by the refinement studies.

use crate::error::{argument, domain, Result};
use crate::grid::{ScalarField, StaggeredGrid, VelocityField};
use crate::kernel::KernelParams;
use crate::special::kernel_primitive;

/// Exact solution `u = curl ψ · g(t)`, `p = (x−½)(y−½) g(t)` on the unit
/// square, with `ψ = x²(1−x)² y²(1−y)²` and `g(t) = e^{−αt}`.
///
/// The memory integral of `g` has the closed form
/// `∫₀ᵗ K(t−s) g(s) ds = e^{−αt} (δ−α)^{β−1} γ(1−β, (δ−α)t)`, which needs α < δ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Manufactured {
    pub alpha: f64,
    pub mu: f64,
    pub kernel: KernelParams,
}

// X(x) = x²(1−x)² and its derivatives
fn poly(x: f64) -> [f64; 4] {
    [
        x * x * (1.0 - x) * (1.0 - x),
        2.0 * x - 6.0 * x * x + 4.0 * x * x * x,
        2.0 - 12.0 * x + 12.0 * x * x,
        -12.0 + 24.0 * x,
    ]
}

/// Spatial profile of the manufactured velocity and its derived terms at a point.
struct Profile {
    u: [f64; 2],
    lap: [f64; 2],
    convect: [f64; 2],
    grad_p: [f64; 2],
}

fn profile(x: f64, y: f64) -> Profile {
    let [x0, x1, x2, x3] = poly(x);
    let [y0, y1, y2, y3] = poly(y);
    let u = x0 * y1;
    let v = -x1 * y0;
    let (ux, uy) = (x1 * y1, x0 * y2);
    let (vx, vy) = (-x2 * y0, -x1 * y1);
    Profile {
        u: [u, v],
        lap: [x2 * y1 + x0 * y3, -(x3 * y0 + x1 * y2)],
        convect: [u * ux + v * uy, u * vx + v * vy],
        grad_p: [y - 0.5, x - 0.5],
    }
}

fn require_unit_square(grid: &StaggeredGrid) -> Result<()> {
    if grid.lx != 1.0 || grid.ly != 1.0 {
        return argument("the manufactured solution is defined on the unit square only");
    }
    Ok(())
}

impl Manufactured {
    pub fn new(alpha: f64, mu: f64, kernel: KernelParams) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return argument(format!(
                "manufactured decay rate must be nonnegative, got {alpha}"
            ));
        }
        if !(mu > 0.0) {
            return argument(format!("mu must be positive, got {mu}"));
        }
        if alpha >= kernel.delta() && kernel.rho() != 0.0 {
            return domain(format!(
                "unsupported profile: alpha = {alpha} must be below delta = {}",
                kernel.delta()
            ));
        }
        Ok(Self { alpha, mu, kernel })
    }

    pub fn time_factor(&self, t: f64) -> f64 {
        (-self.alpha * t).exp()
    }

    /// ∫₀ᵗ K(t−s) g(s) ds in closed form.
    pub fn memory_factor(&self, t: f64) -> Result<f64> {
        if t == 0.0 || self.kernel.rho() == 0.0 {
            return Ok(0.0);
        }
        let shifted = KernelParams::new(self.kernel.beta(), self.kernel.delta() - self.alpha, 1.0)?;
        Ok(self.time_factor(t) * kernel_primitive(&shifted, 0.0, t)?)
    }

    /// Point samples of the exact velocity on the faces.
    pub fn velocity(&self, grid: StaggeredGrid, t: f64) -> Result<VelocityField> {
        require_unit_square(&grid)?;
        let g = self.time_factor(t);
        Ok(VelocityField::from_fn(
            grid,
            |x, y| g * profile(x, y).u[0],
            |x, y| g * profile(x, y).u[1],
        ))
    }

    /// Discrete curl of ψ sampled at grid nodes: O(h²) close to [`Self::velocity`]
    /// and exactly discretely divergence-free.
    pub fn velocity_div_free(&self, grid: StaggeredGrid, t: f64) -> Result<VelocityField> {
        require_unit_square(&grid)?;
        let g = self.time_factor(t);
        let (hx, hy) = (grid.hx(), grid.hy());
        let psi = |i: usize, j: usize| poly(i as f64 * hx)[0] * poly(j as f64 * hy)[0];
        let mut w = VelocityField::zeros(grid);
        for i in 1..grid.nx {
            for j in 0..grid.ny {
                w.set_u(i, j, g * (psi(i, j + 1) - psi(i, j)) / hy);
            }
        }
        for i in 0..grid.nx {
            for j in 1..grid.ny {
                w.set_v(i, j, -g * (psi(i + 1, j) - psi(i, j)) / hx);
            }
        }
        Ok(w)
    }

    pub fn pressure(&self, grid: StaggeredGrid, t: f64) -> Result<ScalarField> {
        require_unit_square(&grid)?;
        let g = self.time_factor(t);
        let mut p = ScalarField::from_fn(grid, |x, y| g * (x - 0.5) * (y - 0.5));
        p.subtract_mean();
        Ok(p)
    }

    /// f = u_t − μΔu − ρ(memory)Δu + (u·∇)u + ∇p on the faces.
    pub fn forcing(&self, grid: StaggeredGrid, t: f64) -> Result<VelocityField> {
        require_unit_square(&grid)?;
        let g = self.time_factor(t);
        let m = self.kernel.rho() * self.memory_factor(t)?;
        let (alpha, mu) = (self.alpha, self.mu);
        let comp = |c: usize, x: f64, y: f64| {
            let p = profile(x, y);
            g * (-alpha * p.u[c] - mu * p.lap[c] + p.grad_p[c]) - m * p.lap[c]
                + g * g * p.convect[c]
        };
        Ok(VelocityField::from_fn(
            grid,
            |x, y| comp(0, x, y),
            |x, y| comp(1, x, y),
        ))
    }

    /// Steady forcing for viscosity `nu`: −νΔū + (ū·∇)ū + ∇p̄ with g ≡ 1.
    pub fn steady_forcing(grid: StaggeredGrid, nu: f64) -> Result<VelocityField> {
        require_unit_square(&grid)?;
        let comp = |c: usize, x: f64, y: f64| {
            let p = profile(x, y);
            -nu * p.lap[c] + p.convect[c] + p.grad_p[c]
        };
        Ok(VelocityField::from_fn(
            grid,
            |x, y| comp(0, x, y),
            |x, y| comp(1, x, y),
        ))
    }

    /// Time-independent exact velocity (g ≡ 1).
    pub fn steady_velocity(grid: StaggeredGrid) -> Result<VelocityField> {
        require_unit_square(&grid)?;
        Ok(VelocityField::from_fn(
            grid,
            |x, y| profile(x, y).u[0],
            |x, y| profile(x, y).u[1],
        ))
    }
}

/// Named analytic face fields for configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FieldProfile {
    /// (sin πx cos πy, ½ cos πx sin πy + xy) scaled to the domain.
    #[default]
    Mixed,
    /// (x sin 2πy, sin πx) scaled to the domain.
    Shear,
    /// Seeded random combination of low sine modes.
    RandomSmooth,
}

impl FieldProfile {
    pub fn name(self) -> &'static str {
        match self {
            FieldProfile::Mixed => "mixed",
            FieldProfile::Shear => "shear",
            FieldProfile::RandomSmooth => "random_smooth",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mixed" => Some(FieldProfile::Mixed),
            "shear" => Some(FieldProfile::Shear),
            "random_smooth" => Some(FieldProfile::RandomSmooth),
            _ => None,
        }
    }

    pub fn sample(self, grid: StaggeredGrid, amplitude: f64, seed: u64) -> VelocityField {
        use std::f64::consts::PI;
        let (lx, ly) = (grid.lx, grid.ly);
        let w = match self {
            FieldProfile::Mixed => VelocityField::from_fn(
                grid,
                |x, y| (PI * x / lx).sin() * (PI * y / ly).cos(),
                |x, y| 0.5 * (PI * x / lx).cos() * (PI * y / ly).sin() + x * y / (lx * ly),
            ),
            FieldProfile::Shear => VelocityField::from_fn(
                grid,
                |x, y| x / lx * (2.0 * PI * y / ly).sin(),
                |x, _| (PI * x / lx).sin(),
            ),
            FieldProfile::RandomSmooth => {
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                VelocityField::random_smooth(grid, 4, &mut rng)
            }
        };
        w.scaled(amplitude)
    }
}

/// Forcing of the transient problem.
#[derive(Debug, Clone, PartialEq)]
pub enum ForcingSpec {
    Zero,
    Steady(VelocityField),
    /// f̄ + g·e^{−α₀t}
    Decaying {
        fbar: VelocityField,
        perturbation: VelocityField,
        rate: f64,
    },
    Manufactured(Manufactured),
}

impl ForcingSpec {
    pub fn decaying(fbar: VelocityField, perturbation: VelocityField, rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return argument(format!(
                "decaying forcing needs a positive rate, got {rate}"
            ));
        }
        Ok(ForcingSpec::Decaying {
            fbar,
            perturbation,
            rate,
        })
    }

    pub fn eval(&self, grid: StaggeredGrid, t: f64) -> Result<VelocityField> {
        match self {
            ForcingSpec::Zero => Ok(VelocityField::zeros(grid)),
            ForcingSpec::Steady(f) => Ok(f.clone()),
            ForcingSpec::Decaying {
                fbar,
                perturbation,
                rate,
            } => {
                let mut f = fbar.clone();
                f.add_scaled((-rate * t).exp(), perturbation);
                Ok(f)
            }
            ForcingSpec::Manufactured(m) => m.forcing(grid, t),
        }
    }

    /// The limit f̄ as t → ∞, where one exists.
    pub fn steady_part(&self, grid: StaggeredGrid) -> Option<VelocityField> {
        match self {
            ForcingSpec::Zero => Some(VelocityField::zeros(grid)),
            ForcingSpec::Steady(f) | ForcingSpec::Decaying { fbar: f, .. } => Some(f.clone()),
            ForcingSpec::Manufactured(_) => None,
        }
    }
}

/// Manufactured forcing at time `t` for a profile with decay rate `alpha`.
pub fn manufactured_forcing(
    alpha: f64,
    grid: StaggeredGrid,
    kernel: &KernelParams,
    mu: f64,
    t: f64,
) -> Result<VelocityField> {
    Manufactured::new(alpha, mu, *kernel)?.forcing(grid, t)
}
