//! Solvers and measured constants on a fixed MAC grid.
//!
//! [`Discretization`] owns the FFT plans for the three transform pairs, so it
//! is built once per grid and shared by every solver that runs on it.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

use crate::error::{argument, Error, Result};
use crate::grid::{ScalarField, StaggeredGrid, VelocityField};
use crate::ops;
use crate::transforms::{Basis, Transform2d, TrigTransform};

/// Which linear solver backs a Helmholtz or Poisson solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverPath {
    /// Sine/cosine-transform diagonalization.
    #[default]
    Fast,
    /// Matrix-free conjugate gradients.
    Cg,
}

const CG_REL_TOL: f64 = 1e-14;
const CG_MAX_ITERS: usize = 20_000;

/// The three discrete norms tracked by the monitors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldNorms {
    /// ‖w‖₀
    pub l2: f64,
    /// |w|₁
    pub h1_semi: f64,
    /// ‖A_h w‖₀ with A_h = −P Δ_h
    pub a_norm: f64,
}

/// Outcome of [`Discretization::mu0_estimate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mu0Estimate {
    /// Estimated inf of (μ a(v,v) + b(v,ū,v)) / |v|₁², capped at μ.
    pub value: f64,
    /// Most negative b(v,ū,v)/|v|₁² found.
    pub b_ratio_min: f64,
    pub trials: usize,
    pub seed: u64,
}

impl Mu0Estimate {
    /// A nonpositive estimate means the coercivity assumption fails on this sample.
    pub fn violates_coercivity(&self) -> bool {
        self.value <= 0.0
    }
}

#[derive(Debug, Clone)]
pub struct Discretization {
    grid: StaggeredGrid,
    u_tf: Transform2d,
    v_tf: Transform2d,
    p_tf: Transform2d,
    /// Per-slot eigenvalues of −Δ_h: (x, y) for each block
    u_eig: (Vec<f64>, Vec<f64>),
    v_eig: (Vec<f64>, Vec<f64>),
    p_eig: (Vec<f64>, Vec<f64>),
}

fn eigs(basis: Basis, n: usize, h: f64) -> Vec<f64> {
    (0..basis.len(n))
        .map(|s| basis.eigenvalue(n, h, s))
        .collect()
}

fn norms(basis: Basis, n: usize) -> Vec<f64> {
    (0..basis.len(n)).map(|s| basis.norm_sq(n, s)).collect()
}

impl Discretization {
    pub fn new(grid: StaggeredGrid) -> Self {
        let mut planner = FftPlanner::new();
        let (nx, ny, hx, hy) = (grid.nx, grid.ny, grid.hx(), grid.hy());
        let mut make = |bx: Basis, by: Basis| Transform2d {
            x: TrigTransform::new(bx, nx, &mut planner),
            y: TrigTransform::new(by, ny, &mut planner),
        };
        let u_tf = make(Basis::NodeSine, Basis::HalfSine);
        let v_tf = make(Basis::HalfSine, Basis::NodeSine);
        let p_tf = make(Basis::HalfCosine, Basis::HalfCosine);
        Self {
            grid,
            u_tf,
            v_tf,
            p_tf,
            u_eig: (eigs(Basis::NodeSine, nx, hx), eigs(Basis::HalfSine, ny, hy)),
            v_eig: (eigs(Basis::HalfSine, nx, hx), eigs(Basis::NodeSine, ny, hy)),
            p_eig: (
                eigs(Basis::HalfCosine, nx, hx),
                eigs(Basis::HalfCosine, ny, hy),
            ),
        }
    }

    pub fn grid(&self) -> &StaggeredGrid {
        &self.grid
    }

    pub fn divergence(&self, w: &VelocityField) -> ScalarField {
        ops::divergence(w)
    }

    pub fn gradient(&self, q: &ScalarField) -> VelocityField {
        ops::gradient(q)
    }

    pub fn laplacian(&self, w: &VelocityField) -> VelocityField {
        ops::laplacian(w)
    }

    pub fn advect(&self, a: &VelocityField, w: &VelocityField) -> VelocityField {
        ops::advect(a, w)
    }

    /// Solve (a·I − ν·Δ_h) x = rhs on the interior faces.
    pub fn helmholtz_solve(&self, a: f64, nu: f64, rhs: &VelocityField) -> Result<VelocityField> {
        self.helmholtz_solve_with(a, nu, rhs, SolverPath::Fast)
    }

    pub fn helmholtz_solve_with(
        &self,
        a: f64,
        nu: f64,
        rhs: &VelocityField,
        path: SolverPath,
    ) -> Result<VelocityField> {
        if !(a >= 0.0 && nu >= 0.0) || (a == 0.0 && nu == 0.0) {
            return argument(format!(
                "helmholtz coefficients must be nonnegative and not both zero, got a={a}, nu={nu}"
            ));
        }
        if nu == 0.0 {
            let mut x = rhs.scaled(1.0 / a);
            x.enforce_boundary();
            return Ok(x);
        }
        match path {
            SolverPath::Fast => Ok(self.helmholtz_fast(a, nu, rhs)),
            SolverPath::Cg => {
                let mut b = rhs.clone();
                b.enforce_boundary();
                let g = self.grid;
                let x = conjugate_gradient(
                    "helmholtz CG",
                    |x: &[f64]| {
                        let f = VelocityField::from_raw(g, x.to_vec()).expect("shape");
                        let mut y = f.scaled(a);
                        y.add_scaled(-nu, &ops::laplacian(&f));
                        y.into_raw()
                    },
                    b.as_slice(),
                    |_| {},
                )?;
                VelocityField::from_raw(g, x)
            }
        }
    }

    fn helmholtz_fast(&self, a: f64, nu: f64, rhs: &VelocityField) -> VelocityField {
        let g = self.grid;
        let (nx, ny) = (g.nx, g.ny);
        let mut out = VelocityField::zeros(g);

        // u block: i = 1..nx-1, j = 0..ny-1
        let (lx, ly) = (nx - 1, ny);
        let mut block: Vec<f64> = (1..nx)
            .flat_map(|i| (0..ny).map(move |j| (i, j)))
            .map(|(i, j)| rhs.u(i, j))
            .collect();
        self.diagonal_solve(
            &self.u_tf,
            &self.u_eig,
            (Basis::NodeSine, Basis::HalfSine),
            &mut block,
            |lam| a + nu * lam,
        );
        for i in 0..lx {
            for j in 0..ly {
                out.set_u(i + 1, j, block[i * ly + j]);
            }
        }

        // v block: i = 0..nx-1, j = 1..ny-1
        let (lx, ly) = (nx, ny - 1);
        let mut block: Vec<f64> = (0..nx)
            .flat_map(|i| (1..ny).map(move |j| (i, j)))
            .map(|(i, j)| rhs.v(i, j))
            .collect();
        self.diagonal_solve(
            &self.v_tf,
            &self.v_eig,
            (Basis::HalfSine, Basis::NodeSine),
            &mut block,
            |lam| a + nu * lam,
        );
        for i in 0..lx {
            for j in 0..ly {
                out.set_v(i, j + 1, block[i * ly + j]);
            }
        }
        out
    }

    /// Transform, divide by `symbol(λx + λy)` and the basis norms, transform back.
    /// A zero symbol zeroes the coefficient.
    fn diagonal_solve(
        &self,
        tf: &Transform2d,
        eig: &(Vec<f64>, Vec<f64>),
        bases: (Basis, Basis),
        block: &mut [f64],
        symbol: impl Fn(f64) -> f64,
    ) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let nrm_x = norms(bases.0, nx);
        let nrm_y = norms(bases.1, ny);
        tf.forward(block);
        let ly = eig.1.len();
        for (sx, (&ex, &cx)) in eig.0.iter().zip(&nrm_x).enumerate() {
            for (sy, (&ey, &cy)) in eig.1.iter().zip(&nrm_y).enumerate() {
                let d = symbol(ex + ey);
                let k = sx * ly + sy;
                block[k] = if d == 0.0 {
                    0.0
                } else {
                    block[k] / (d * cx * cy)
                };
            }
        }
        tf.backward(block);
    }

    /// Solve the Neumann problem −Δ_h φ = rhs − mean(rhs). Returns φ (mean
    /// zero) and the mean that was removed from `rhs`.
    pub fn pressure_poisson_solve(&self, rhs: &ScalarField) -> Result<(ScalarField, f64)> {
        self.pressure_poisson_solve_with(rhs, SolverPath::Fast)
    }

    pub fn pressure_poisson_solve_with(
        &self,
        rhs: &ScalarField,
        path: SolverPath,
    ) -> Result<(ScalarField, f64)> {
        let g = self.grid;
        let mut b = rhs.clone();
        let removed = b.subtract_mean();
        let mut phi = match path {
            SolverPath::Fast => {
                let mut block = b.into_raw();
                self.diagonal_solve(
                    &self.p_tf,
                    &self.p_eig,
                    (Basis::HalfCosine, Basis::HalfCosine),
                    &mut block,
                    |lam| lam,
                );
                ScalarField::from_raw(g, block)?
            }
            SolverPath::Cg => {
                let x = conjugate_gradient(
                    "poisson CG",
                    |x: &[f64]| {
                        let q = ScalarField::from_raw(g, x.to_vec()).expect("shape");
                        ops::neumann_laplacian(&q).scaled(-1.0).into_raw()
                    },
                    b.as_slice(),
                    |x| {
                        let m = x.iter().sum::<f64>() / x.len() as f64;
                        x.iter_mut().for_each(|v| *v -= m);
                    },
                )?;
                ScalarField::from_raw(g, x)?
            }
        };
        phi.subtract_mean();
        Ok((phi, removed))
    }

    /// Discrete Leray projection P w = w − ∇φ with Δ_h φ = div w.
    pub fn leray_project(&self, w: &VelocityField) -> Result<VelocityField> {
        let (phi, _) = self.pressure_poisson_solve(&ops::divergence(w))?;
        // −Δφ' = div w gives φ = −φ'
        let mut out = w.clone();
        out.add_scaled(1.0, &ops::gradient(&phi));
        Ok(out)
    }

    /// Discrete Stokes operator A_h w = P(−Δ_h w).
    pub fn stokes_operator(&self, w: &VelocityField) -> Result<VelocityField> {
        self.leray_project(&ops::laplacian(w).scaled(-1.0))
    }

    pub fn norms(&self, w: &VelocityField) -> Result<FieldNorms> {
        Ok(FieldNorms {
            l2: w.l2(),
            h1_semi: ops::h1_semi_sq(w).max(0.0).sqrt(),
            a_norm: self.stokes_operator(w)?.l2(),
        })
    }

    /// Solve the Stokes system (mass·I − ν Δ_h) u + ∇_h p = rhs, div_h u = 0.
    ///
    /// Conjugate gradients on the pressure Schur complement −D H⁻¹ G, each
    /// application being one fast Helmholtz solve. Returns (u, p, iterations).
    pub fn stokes_solve(
        &self,
        mass: f64,
        nu: f64,
        rhs: &VelocityField,
        rel_tol: f64,
    ) -> Result<(VelocityField, ScalarField, usize)> {
        let g = self.grid;
        let h_inv = |f: &VelocityField| self.helmholtz_solve(mass, nu, f);
        let schur = |p: &ScalarField| -> Result<ScalarField> {
            Ok(ops::divergence(&h_inv(&ops::gradient(p))?).scaled(-1.0))
        };
        let u0 = h_inv(rhs)?;
        let mut b = ops::divergence(&u0).scaled(-1.0);
        b.subtract_mean();
        let b_norm = b.l2();
        let mut p = ScalarField::zeros(g);
        let mut iters = 0;
        if b_norm > 0.0 {
            let mut r = b.clone();
            let mut d = r.clone();
            let mut rr = r.dot(&r);
            let target = (rel_tol * b_norm).max(1e-300);
            let max_iters = 4 * g.n_cells();
            while rr.sqrt() > target {
                if iters >= max_iters {
                    return Err(Error::Solver {
                        solver: "stokes schur CG",
                        iterations: iters,
                        residual: rr.sqrt() / b_norm,
                    });
                }
                let mut sd = schur(&d)?;
                sd.subtract_mean();
                let alpha = rr / d.dot(&sd);
                p.add_scaled(alpha, &d);
                r.add_scaled(-alpha, &sd);
                let rr_new = r.dot(&r);
                let beta = rr_new / rr;
                rr = rr_new;
                let mut nd = r.clone();
                nd.add_scaled(beta, &d);
                d = nd;
                iters += 1;
            }
        }
        p.subtract_mean();
        let mut r = rhs.clone();
        r.add_scaled(-1.0, &ops::gradient(&p));
        let u = h_inv(&r)?;
        Ok((u, p, iters))
    }

    /// Smallest eigenvalue γ₀,h of −Δ_h (Dirichlet) by inverse power iteration.
    pub fn poincare_constant(&self) -> Result<f64> {
        let g = self.grid;
        let mut x = VelocityField::from_fn(g, |_, _| 1.0, |_, _| 1.0);
        let mut lambda = 0.0;
        let mut residual = f64::INFINITY;
        for _ in 0..500 {
            let y = self.helmholtz_solve(0.0, 1.0, &x)?;
            x = y.scaled(1.0 / y.l2());
            let lx = ops::laplacian(&x).scaled(-1.0);
            lambda = lx.dot(&x);
            let mut res = lx;
            res.add_scaled(-lambda, &x);
            residual = res.l2() / lambda;
            if residual <= 1e-10 {
                return Ok(lambda);
            }
        }
        Err(Error::Solver {
            solver: "inverse power iteration",
            iterations: 500,
            residual: residual.max(lambda * 0.0),
        })
    }

    /// Empirical lower estimate of the coercivity constant μ₀ of
    /// μ a(v,v) + b(v,ū,v) ≥ μ₀ |v|₁².
    ///
    /// Starts from `trials` seeded random smooth fields and runs a locally
    /// optimal block preconditioned iteration on the generalized eigenproblem
    /// of the quadratic form b(v,ū,v) against a(v,v), so the estimate is
    /// μ + (smallest ratio found), capped at μ.
    pub fn mu0_estimate(
        &self,
        ubar: &VelocityField,
        mu: f64,
        trials: usize,
        seed: u64,
    ) -> Result<Mu0Estimate> {
        if trials == 0 {
            return argument("mu0_estimate needs at least one trial");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best = 0.0f64;
        for _ in 0..trials {
            let v0 = self.leray_project(&VelocityField::random_smooth(self.grid, 4, &mut rng))?;
            let ratio = self.minimize_b_ratio(ubar, v0, 40)?;
            best = best.min(ratio);
        }
        Ok(Mu0Estimate {
            value: (mu + best).min(mu),
            b_ratio_min: best,
            trials,
            seed,
        })
    }

    fn minimize_b_ratio(
        &self,
        ubar: &VelocityField,
        v0: VelocityField,
        iters: usize,
    ) -> Result<f64> {
        let a_form = |x: &VelocityField, y: &VelocityField| -ops::laplacian(x).dot(y);
        // b(x, ū, y) symmetrized
        let b_apply = |x: &VelocityField| {
            let mut t = ops::advect(x, ubar);
            t.add_scaled(1.0, &ops::advect_transport_adjoint(ubar, x));
            t.scaled(0.5)
        };
        let mut v = v0;
        let mut prev: Option<VelocityField> = None;
        let mut theta = ops::trilinear(&v, ubar, &v) / a_form(&v, &v);
        for _ in 0..iters {
            let bv = b_apply(&v);
            let mut r = self.leray_project(&self.helmholtz_solve(0.0, 1.0, &bv)?)?;
            r.add_scaled(-theta, &v);
            let mut basis = vec![v.clone()];
            basis.push(r);
            if let Some(p) = prev.take() {
                basis.push(p);
            }
            // a-orthonormalize, dropping dependent directions
            let mut ortho: Vec<VelocityField> = Vec::new();
            for mut x in basis {
                for q in &ortho {
                    let c = a_form(&x, q);
                    x.add_scaled(-c, q);
                }
                let n = a_form(&x, &x);
                if n > 1e-24 * a_form(&v, &v).max(1e-300) {
                    ortho.push(x.scaled(1.0 / n.sqrt()));
                }
            }
            if ortho.len() < 2 {
                break;
            }
            let applied: Vec<VelocityField> = ortho.iter().map(b_apply).collect();
            let m = ortho.len();
            let gram = DMatrix::from_fn(m, m, |i, j| {
                0.5 * (applied[i].dot(&ortho[j]) + applied[j].dot(&ortho[i]))
            });
            let eig = SymmetricEigen::new(gram);
            let (k, &lam) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .expect("nonempty");
            let y = eig.eigenvectors.column(k);
            let mut next = VelocityField::zeros(self.grid);
            let mut direction = VelocityField::zeros(self.grid);
            for (idx, x) in ortho.iter().enumerate() {
                next.add_scaled(y[idx], x);
                if idx > 0 {
                    direction.add_scaled(y[idx], x);
                }
            }
            let converged = (theta - lam).abs() <= 1e-12 * lam.abs().max(1e-300);
            theta = lam;
            v = next;
            prev = Some(direction);
            if converged {
                break;
            }
        }
        Ok(ops::trilinear(&v, ubar, &v) / a_form(&v, &v))
    }

    /// Sampled sup of |b(u,v,w)| / (|u|₁|v|₁|w|₁) over seeded random smooth triples.
    pub fn trilinear_sup_estimate(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best = 0.0f64;
        for _ in 0..samples {
            let u = VelocityField::random_smooth(self.grid, 4, &mut rng);
            let v = VelocityField::random_smooth(self.grid, 4, &mut rng);
            let w = VelocityField::random_smooth(self.grid, 4, &mut rng);
            let denom = (ops::h1_semi_sq(&u) * ops::h1_semi_sq(&v) * ops::h1_semi_sq(&w)).sqrt();
            if denom > 0.0 {
                best = best.max(ops::trilinear(&u, &v, &w).abs() / denom);
            }
        }
        best
    }
}

/// Plain CG for an SPD operator on flat vectors; `fix` is applied to every
/// iterate direction (e.g. to stay in the mean-zero subspace).
fn conjugate_gradient(
    name: &'static str,
    apply: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    fix: impl Fn(&mut Vec<f64>),
) -> Result<Vec<f64>> {
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let b_norm = dot(b, b).sqrt();
    let mut x = vec![0.0; b.len()];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    fix(&mut r);
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for it in 0..CG_MAX_ITERS {
        if rr.sqrt() <= CG_REL_TOL * b_norm {
            return Ok(x);
        }
        let ap = apply(&p);
        let alpha = rr / dot(&p, &ap);
        for k in 0..x.len() {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        if it % 50 == 49 {
            // refresh the recursive residual
            let ax = apply(&x);
            for k in 0..r.len() {
                r[k] = b[k] - ax[k];
            }
        }
        fix(&mut r);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..p.len() {
            p[k] = r[k] + beta * p[k];
        }
        fix(&mut p);
    }
    Err(Error::Solver {
        solver: name,
        iterations: CG_MAX_ITERS,
        residual: rr.sqrt() / b_norm,
    })
}
