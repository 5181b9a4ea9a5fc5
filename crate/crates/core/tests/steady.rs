use proptest::prelude::*;

use viscomem::discretization::Discretization;
use viscomem::forcing::{FieldProfile, Manufactured};
use viscomem::grid::StaggeredGrid;
use viscomem::kernel::KernelParams;
use viscomem::steady::{self, effective_viscosity, SteadyConfig, SteadyMethod};
use viscomem::Error;

fn kernel(beta: f64, delta: f64, rho: f64) -> KernelParams {
    KernelParams::new(beta, delta, rho).unwrap()
}

#[test]
fn effective_viscosity_matches_tabulated_gamma() {
    // Γ(½) = √π
    let nu = effective_viscosity(1.0, &kernel(0.5, 1.0, 0.5)).unwrap();
    assert!((nu - (1.0 + 0.5 * 1.772_453_850_905_516)).abs() < 1e-14);
    // β = 0: μ + ρ/δ
    let nu = effective_viscosity(2.0, &kernel(0.0, 4.0, 2.0)).unwrap();
    assert!((nu - 2.5).abs() < 1e-14);
    assert_eq!(
        effective_viscosity(1.3, &kernel(0.7, 2.0, 0.0)).unwrap(),
        1.3
    );
}

#[test]
fn manufactured_steady_solution_is_recovered() {
    let g = StaggeredGrid::unit_square(32).unwrap();
    let k = kernel(0.5, 1.0, 0.5);
    let nu = effective_viscosity(1.0, &k).unwrap();
    let fbar = Manufactured::steady_forcing(g, nu).unwrap();
    for method in [SteadyMethod::StokesIteration, SteadyMethod::Newton] {
        let mut c = SteadyConfig::new(1.0, k, fbar.clone());
        c.method = method;
        c.tol = 1e-12;
        let sol = steady::solve(&c).unwrap();
        let exact = Manufactured::steady_velocity(g).unwrap();
        let e = sol.velocity.sub(&exact).l2() / exact.l2();
        assert!(e < 1e-2, "{} {e:e}", method.name());
        assert!(sol.residual <= 1e-12);
    }
}

#[test]
fn residual_history_is_reported_and_decreasing() {
    let g = StaggeredGrid::unit_square(16).unwrap();
    let c = SteadyConfig::new(
        1.0,
        kernel(0.5, 1.0, 0.5),
        FieldProfile::Shear.sample(g, 5.0, 0),
    );
    let sol = steady::solve(&c).unwrap();
    assert_eq!(sol.residual_history.len(), sol.iterations);
    assert!(sol.residual_history.windows(2).all(|r| r[1] < r[0]));
}

#[test]
fn iteration_budget_exhaustion_is_an_error() {
    let g = StaggeredGrid::unit_square(16).unwrap();
    let mut c = SteadyConfig::new(
        1.0,
        kernel(0.5, 1.0, 0.5),
        FieldProfile::Mixed.sample(g, 5.0, 0),
    );
    c.max_iters = 1;
    c.tol = 1e-14;
    match steady::solve(&c) {
        Err(Error::Iteration { history, .. }) => assert_eq!(history.len(), 1),
        other => panic!("expected an iteration error, got {other:?}"),
    }
}

#[test]
fn uniqueness_indicator_grows_with_data() {
    let g = StaggeredGrid::unit_square(16).unwrap();
    let disc = Discretization::new(g);
    let mut last = 0.0;
    for amp in [0.1, 1.0, 10.0] {
        let c = SteadyConfig::new(
            1.0,
            kernel(0.5, 1.0, 0.5),
            FieldProfile::Mixed.sample(g, amp, 0),
        );
        let u = steady::uniqueness_indicator(&disc, &c).unwrap();
        assert!(u.value > last);
        last = u.value;
    }
}

#[test]
fn rejects_mismatched_or_invalid_configs() {
    let g = StaggeredGrid::unit_square(8).unwrap();
    let mut c = SteadyConfig::new(
        1.0,
        kernel(0.5, 1.0, 0.5),
        FieldProfile::Mixed.sample(g, 1.0, 0),
    );
    c.mu = -1.0;
    assert!(steady::solve(&c).is_err());
    let mut c = SteadyConfig::new(
        1.0,
        kernel(0.5, 1.0, 0.5),
        FieldProfile::Mixed.sample(g, 1.0, 0),
    );
    c.grid = StaggeredGrid::unit_square(16).unwrap();
    assert!(steady::solve(&c).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn converged_solutions_respect_the_apriori_bound(
        amp in 0.1f64..5.0, beta in 0.0f64..0.9, rho in 0.0f64..2.0, newton in any::<bool>(),
    ) {
        let g = StaggeredGrid::unit_square(16).unwrap();
        let mut c = SteadyConfig::new(1.0, kernel(beta, 1.0, rho), FieldProfile::Mixed.sample(g, amp, 0));
        c.method = if newton { SteadyMethod::Newton } else { SteadyMethod::StokesIteration };
        let sol = steady::solve(&c).unwrap();
        let d = &sol.diagnostics;
        prop_assert!(sol.residual <= c.tol);
        prop_assert!(d.apriori_ok);
        prop_assert!(d.nu_eff * d.ubar_h1 <= d.fbar_dual * 1.05);
        prop_assert!(steady::steady_residual(d.nu_eff, &c.fbar, &sol.velocity, &sol.pressure) <= 1e-9 * c.fbar.l2());
    }
}
