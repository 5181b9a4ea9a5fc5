use proptest::prelude::*;

use viscomem::analysis::{
    self, default_window, fit_decay, weighted_growth, ConvergenceSpec, DecayBound,
    DecayStudyConfig, Refinement,
};
use viscomem::forcing::{FieldProfile, ForcingSpec};
use viscomem::grid::{StaggeredGrid, VelocityField};
use viscomem::kernel::KernelParams;
use viscomem::steady::SteadyConfig;
use viscomem::transient::{FluidConfig, HistoryMode};
use viscomem::Error;

fn samples(n: usize, t_end: f64) -> Vec<f64> {
    (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect()
}

#[test]
fn fit_reports_offending_indices() {
    let t = samples(12, 1.0);
    let mut y = vec![1.0; 12];
    y[2] = -1.0;
    y[9] = f64::NAN;
    match fit_decay(&t, &y, (0.0, 1.0)) {
        Err(Error::Domain(msg)) => assert!(msg.contains("[2, 9]"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(
        fit_decay(&t[..7], &y[..7], (0.0, 1.0)),
        Err(Error::Argument(_))
    ));
}

#[test]
fn bound_takes_the_smaller_branch() {
    let b = DecayBound::new(1.0, 1.0, 2.0 * std::f64::consts::PI.powi(2));
    assert_eq!(b.alpha_max, 0.5);
    let b = DecayBound::new(10.0, 0.2, 8.0);
    assert!((b.alpha_max - 0.4).abs() < 1e-15);
    assert_eq!(DecayBound::new(1.0, -1.0, 8.0).alpha_max, 0.0);
    assert!((b.alpha_expect(5.0, 0.1) - 0.36).abs() < 1e-15);
    assert_eq!(b.alpha_expect(0.1, 0.1), 0.1);
}

#[test]
fn weighted_growth_separates_fast_and_slow_decay() {
    let t = samples(200, 10.0);
    let fast: Vec<f64> = t.iter().map(|&s| (-s).exp()).collect();
    let slow: Vec<f64> = t.iter().map(|&s| (-0.2 * s).exp()).collect();
    let w = default_window(10.0);
    assert!(weighted_growth(&t, &fast, w, 0.5) <= 1.0);
    assert!(weighted_growth(&t, &slow, w, 0.5) > 2.0);
    assert!(weighted_growth(&t, &slow, (20.0, 30.0), 0.5).is_nan());
}

#[test]
fn refinement_names_round_trip() {
    for r in [
        Refinement::SteadySpace,
        Refinement::TransientSpace,
        Refinement::TransientTime,
    ] {
        assert_eq!(Refinement::parse(r.name()), Some(r));
    }
    assert_eq!(Refinement::parse("space"), None);
}

#[test]
fn coarse_convergence_tables() {
    let k = KernelParams::new(0.5, 1.0, 0.5).unwrap();
    let spec = |refine, base_n, base_dt| ConvergenceSpec {
        refine,
        mu: 1.0,
        kernel: k,
        alpha: 0.5,
        base_n,
        base_dt,
        t_end: 0.2,
        levels: 2,
        history_mode: HistoryMode::Direct,
    };
    let t = analysis::convergence_table(&spec(Refinement::SteadySpace, 8, 0.0)).unwrap();
    assert_eq!(t.rows.len(), 2);
    assert!(t.rows[0].order.is_none());
    assert!((t.orders()[0] - 2.0).abs() < 0.3);

    let t = analysis::convergence_table(&spec(Refinement::TransientTime, 8, 0.02)).unwrap();
    assert_eq!(t.rows.len(), 2);
    assert!(t.orders()[0] > 0.5);
    let mut csv = Vec::new();
    t.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("study,level,parameter,error,order\ntransient_time,0,"));

    let mut bad = spec(Refinement::SteadySpace, 8, 0.0);
    bad.levels = 1;
    assert!(analysis::convergence_table(&bad).is_err());
}

fn small_study(n: usize, t_end: f64) -> DecayStudyConfig {
    let g = StaggeredGrid::unit_square(n).unwrap();
    let k = KernelParams::new(0.5, 1.0, 0.5).unwrap();
    let fbar = FieldProfile::Mixed.sample(g, 1.0, 0);
    DecayStudyConfig {
        fluid: FluidConfig {
            mu: 1.0,
            kernel: k,
            grid: g,
            dt: 0.01,
            t_end,
            forcing: ForcingSpec::decaying(
                fbar.clone(),
                FieldProfile::Shear.sample(g, 1.0, 1),
                0.6,
            )
            .unwrap(),
            initial_velocity: VelocityField::zeros(g),
            history_mode: HistoryMode::Soe { tol: 1e-10 },
            advection: true,
        },
        steady: SteadyConfig::new(1.0, k, fbar),
        margin: 0.1,
        cadence: 10,
        config_hash: "abc".into(),
    }
}

#[test]
fn decay_study_on_a_coarse_grid() {
    let report = analysis::decay_study(&small_study(12, 8.0)).unwrap();
    assert_eq!(report.fits.len(), 4);
    assert!((report.alpha_expect - 0.45).abs() < 1e-3);
    for s in &report.fits {
        assert!(s.fit.alpha > 0.4, "{} {}", s.name, s.fit.alpha);
    }
    let mut summary = Vec::new();
    report.write_summary(&mut summary).unwrap();
    let summary = String::from_utf8(summary).unwrap();
    assert!(summary.starts_with("config_hash = abc\n"));
    assert!(summary.contains("overall = "));
}

#[test]
fn decay_study_rejects_inconsistent_inputs() {
    let mut c = small_study(8, 1.0);
    c.steady.fbar = c.steady.fbar.scaled(2.0);
    assert!(matches!(analysis::decay_study(&c), Err(Error::Argument(_))));
    let mut c = small_study(8, 1.0);
    c.margin = 1.0;
    assert!(analysis::decay_study(&c).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fit_recovers_exact_exponentials(alpha in -1.0f64..3.0, log_kappa in -8.0f64..8.0, n in 8usize..200) {
        let t = samples(n, 5.0);
        let kappa = log_kappa.exp();
        let y: Vec<f64> = t.iter().map(|&s| kappa * (-alpha * s).exp()).collect();
        let f = fit_decay(&t, &y, (0.0, 5.0)).unwrap();
        prop_assert!((f.alpha - alpha).abs() < 1e-9);
        prop_assert!((f.kappa / kappa - 1.0).abs() < 1e-9);
        prop_assert!(f.r_squared > 1.0 - 1e-9);
        prop_assert_eq!(f.points, n);
    }

    #[test]
    fn fit_rate_is_scale_invariant(alpha in 0.0f64..2.0, scale in 1e-6f64..1e6, wobble in 0.0f64..0.3) {
        let t = samples(50, 4.0);
        let y: Vec<f64> = t.iter().map(|&s| (-alpha * s).exp() * (1.0 + wobble * (7.0 * s).sin().abs())).collect();
        let ys: Vec<f64> = y.iter().map(|v| v * scale).collect();
        let a = fit_decay(&t, &y, (0.0, 4.0)).unwrap();
        let b = fit_decay(&t, &ys, (0.0, 4.0)).unwrap();
        prop_assert!((a.alpha - b.alpha).abs() < 1e-9);
        prop_assert!((a.r_squared - b.r_squared).abs() < 1e-9);
    }
}
