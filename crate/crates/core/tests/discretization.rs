use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use viscomem::discretization::{Discretization, SolverPath};
use viscomem::grid::{ScalarField, StaggeredGrid, VelocityField};
use viscomem::ops;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn helmholtz_apply(a: f64, nu: f64, x: &VelocityField) -> VelocityField {
    let mut y = x.scaled(a);
    y.add_scaled(-nu, &ops::laplacian(x));
    y
}

#[test]
fn helmholtz_round_trip_and_residual() {
    let g = StaggeredGrid::new(1.0, 1.5, 24, 18).unwrap();
    let d = Discretization::new(g);
    let x = VelocityField::random(g, &mut rng(3));
    for &(a, nu) in &[(1.0, 0.01), (50.0, 1.0), (0.0, 2.0)] {
        let rhs = helmholtz_apply(a, nu, &x);
        let sol = d.helmholtz_solve(a, nu, &rhs).unwrap();
        assert!(sol.sub(&x).l2() <= 1e-11 * x.l2(), "a={a} nu={nu}");
        let res = helmholtz_apply(a, nu, &sol).sub(&rhs).l2();
        assert!(res <= 1e-11 * rhs.l2());
    }
}

#[test]
fn helmholtz_fast_and_cg_agree() {
    let g = StaggeredGrid::unit_square(16).unwrap();
    let d = Discretization::new(g);
    let rhs = VelocityField::random(g, &mut rng(4));
    let fast = d
        .helmholtz_solve_with(3.0, 0.5, &rhs, SolverPath::Fast)
        .unwrap();
    let cg = d
        .helmholtz_solve_with(3.0, 0.5, &rhs, SolverPath::Cg)
        .unwrap();
    assert!(fast.sub(&cg).l2() <= 1e-9 * fast.l2());
}

#[test]
fn poisson_round_trip_and_cross_solver() {
    let g = StaggeredGrid::new(2.0, 1.0, 20, 12).unwrap();
    let d = Discretization::new(g);
    let mut phi = ScalarField::random(g, &mut rng(5));
    phi.subtract_mean();
    let rhs = ops::neumann_laplacian(&phi).scaled(-1.0);
    let (sol, removed) = d.pressure_poisson_solve(&rhs).unwrap();
    assert!(removed.abs() < 1e-12 * rhs.l2());
    assert!(sol.sub(&phi).l2() <= 1e-11 * phi.l2());
    assert!(sol.mean().abs() <= 1e-13 * sol.l2());
    let (cg, _) = d.pressure_poisson_solve_with(&rhs, SolverPath::Cg).unwrap();
    assert!(cg.sub(&sol).l2() <= 1e-9 * sol.l2());
}

#[test]
fn projection_properties() {
    let g = StaggeredGrid::unit_square(32).unwrap();
    let d = Discretization::new(g);
    let w = VelocityField::random(g, &mut rng(6));
    let pw = d.leray_project(&w).unwrap();
    assert!(ops::divergence(&pw).max_abs() <= 1e-10 * w.l2() / g.h_min());
    let ppw = d.leray_project(&pw).unwrap();
    assert!(ppw.sub(&pw).l2() <= 1e-10 * pw.l2());
    let q = ScalarField::random(g, &mut rng(7));
    let gq = ops::gradient(&q);
    assert!(d.leray_project(&gq).unwrap().l2() <= 1e-10 * gq.l2());
}

#[test]
fn stokes_operator_form_matches_h1() {
    let g = StaggeredGrid::unit_square(24).unwrap();
    let d = Discretization::new(g);
    let v = d
        .leray_project(&VelocityField::random(g, &mut rng(8)))
        .unwrap();
    let av = d.stokes_operator(&v).unwrap();
    let h1 = ops::h1_semi_sq(&v);
    assert!((av.dot(&v) - h1).abs() <= 1e-11 * h1);
}

#[test]
fn zero_field_norms() {
    let g = StaggeredGrid::unit_square(8).unwrap();
    let d = Discretization::new(g);
    let n = d.norms(&VelocityField::zeros(g)).unwrap();
    assert_eq!((n.l2, n.h1_semi, n.a_norm), (0.0, 0.0, 0.0));
}

#[test]
fn stokes_solve_satisfies_system() {
    let g = StaggeredGrid::unit_square(32).unwrap();
    let d = Discretization::new(g);
    let f = VelocityField::random_smooth(g, 3, &mut rng(9));
    let (u, p, _) = d.stokes_solve(0.0, 1.3, &f, 1e-13).unwrap();
    let mut res = helmholtz_apply(0.0, 1.3, &u);
    res.add_scaled(1.0, &ops::gradient(&p));
    assert!(res.sub(&f).l2() <= 1e-10 * f.l2());
    assert!(ops::divergence(&u).max_abs() * g.h_min() <= 1e-10 * u.l2());
    assert!(p.mean().abs() <= 1e-13 * p.l2().max(1e-300));
}

#[test]
fn poincare_unit_square_and_rectangle() {
    let g = StaggeredGrid::unit_square(64).unwrap();
    let d = Discretization::new(g);
    let h = 1.0 / 64.0;
    let lam = d.poincare_constant().unwrap();
    let oracle = 2.0 / (h * h) * (2.0 - 2.0 * (PI * h).cos());
    assert!((lam - oracle).abs() <= 1e-9 * oracle);
    assert!((lam / (2.0 * PI * PI) - 1.0).abs() < 0.01);

    let r = Discretization::new(StaggeredGrid::new(2.0, 1.0, 128, 64).unwrap());
    let lam = r.poincare_constant().unwrap();
    assert!((lam / (PI * PI * 1.25) - 1.0).abs() < 0.01);
}

#[test]
fn discrete_poincare_inequality() {
    let g = StaggeredGrid::new(1.0, 1.3, 20, 16).unwrap();
    let d = Discretization::new(g);
    let gamma0 = d.poincare_constant().unwrap();
    let mut r = rng(10);
    for _ in 0..20 {
        let v = VelocityField::random(g, &mut r);
        assert!(gamma0 * v.dot(&v) <= ops::h1_semi_sq(&v) * (1.0 + 1e-12));
    }
}

#[test]
fn mu0_monotone_in_scale_and_bounded() {
    let g = StaggeredGrid::unit_square(8).unwrap();
    let d = Discretization::new(g);
    let ubar = VelocityField::from_fn(
        g,
        |x, y| (PI * x).sin().powi(2) * (2.0 * PI * y).sin(),
        |x, y| -(2.0 * PI * x).sin() * (PI * y).sin().powi(2),
    );
    let ubar = d.leray_project(&ubar).unwrap();
    let mu = 1.0;
    let mut last = f64::INFINITY;
    for c in [0.0, 0.5, 1.0, 2.0] {
        let est = d.mu0_estimate(&ubar.scaled(c * 0.5), mu, 4, 21).unwrap();
        assert!(est.value <= mu);
        assert!(est.value <= last + 1e-12, "c={c}: {} > {last}", est.value);
        last = est.value;
    }
    let small = d.mu0_estimate(&ubar.scaled(0.5), mu, 4, 21).unwrap();
    assert!(small.value > 0.0 && small.value < mu);
}

#[test]
fn trilinear_sup_is_deterministic() {
    let g = StaggeredGrid::unit_square(8).unwrap();
    let d = Discretization::new(g);
    let a = d.trilinear_sup_estimate(20, 5);
    assert!(a > 0.0);
    assert_eq!(a, d.trilinear_sup_estimate(20, 5));
}
