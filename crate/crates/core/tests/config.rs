use std::path::Path;

use proptest::prelude::*;

use viscomem::analysis::Refinement;
use viscomem::config::{ExperimentKind, ExperimentSpec, ForcingKind, HistoryKind, InitialKind};
use viscomem::forcing::FieldProfile;
use viscomem::snapshot::SnapshotFormat;
use viscomem::steady::SteadyMethod;
use viscomem::Error;

#[test]
fn shipped_configs_parse_and_declare_their_kind() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for kind in ExperimentKind::ALL {
        let path = dir.join(format!("{}.conf", kind.name().replace('-', "_")));
        let spec = ExperimentSpec::from_file(&path).unwrap();
        assert_eq!(spec.kind, kind, "{}", path.display());
    }
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(
        ExperimentSpec::from_file(Path::new("/nonexistent/spec.conf")),
        Err(Error::Io(_))
    ));
}

#[test]
fn repeated_section_is_rejected() {
    let err = ExperimentSpec::parse("[grid]\nnx = 8\n[fluid]\n[grid]\n").unwrap_err();
    assert_eq!(
        err,
        Error::Parse {
            line: 4,
            msg: "section [grid] repeated (first opened at line 1)".into()
        }
    );
}

#[test]
fn cross_field_rules_name_their_key() {
    let cases = [
        ("[fluid]\ndt = 0.1\nt_end = 0.05\n", "fluid.t_end"),
        ("[grid]\nnx = 2\n", "grid.nx"),
        ("[analysis]\nlevels = 2\n", "analysis.levels"),
        (
            "[experiment]\nkind = decay-study\n[forcing]\nkind = manufactured\n",
            "forcing.kind",
        ),
        (
            "[grid]\nlx = 2\n[forcing]\nkind = manufactured\n",
            "grid.lx",
        ),
        ("[fluid]\nhistory = soe\nsoe_tol = 0.5\n", "fluid.soe_tol"),
    ];
    for (text, key) in cases {
        match ExperimentSpec::parse(text) {
            Err(Error::Validation { key: k, .. }) => assert_eq!(k, key, "{text}"),
            other => panic!("{text}: unexpected {other:?}"),
        }
    }
}

fn pick<T: Copy + std::fmt::Debug>(items: &'static [T]) -> impl Strategy<Value = T> {
    proptest::sample::select(items)
}

fn spec_strategy() -> impl Strategy<Value = ExperimentSpec> {
    let kinds: &'static [ExperimentKind] = &ExperimentKind::ALL;
    (
        (
            pick(kinds),
            any::<u64>(),
            0.0f64..0.99,
            1e-3f64..1e3,
            0.0f64..1e3,
            1usize..5000,
        ),
        (0.1f64..10.0, 0.1f64..10.0, 4usize..512, 4usize..512),
        (
            1e-3f64..10.0,
            1e-4f64..0.1,
            any::<bool>(),
            1usize..100,
            pick(&[HistoryKind::Direct, HistoryKind::Soe]),
        ),
        (
            pick(&[
                ForcingKind::Zero,
                ForcingKind::Steady,
                ForcingKind::Decaying,
            ]),
            pick(&[
                FieldProfile::Mixed,
                FieldProfile::Shear,
                FieldProfile::RandomSmooth,
            ]),
            -10.0f64..10.0,
            1e-3f64..5.0,
        ),
        (
            pick(&[SteadyMethod::Newton, SteadyMethod::StokesIteration]),
            1e-14f64..1e-2,
            1usize..1000,
        ),
        (
            0.0f64..0.9,
            pick(&[
                Refinement::SteadySpace,
                Refinement::TransientSpace,
                Refinement::TransientTime,
            ]),
            3usize..6,
            pick(&[SnapshotFormat::Csv, SnapshotFormat::Binary]),
            pick(&[
                InitialKind::Zero,
                InitialKind::RandomSmooth,
                InitialKind::Steady,
            ]),
        ),
    )
        .prop_map(|(e, g, f, fo, st, an)| {
            let mut s = ExperimentSpec::for_kind(e.0);
            s.seed = e.1;
            s.kernel.beta = e.2;
            s.kernel.delta = e.3;
            s.kernel.rho = e.4;
            s.kernel.n = e.5;
            s.grid.lx = g.0;
            s.grid.ly = g.1;
            s.grid.nx = g.2;
            s.grid.ny = g.3;
            s.fluid.mu = f.0;
            s.fluid.dt = f.1;
            s.fluid.t_end = f.1 * 17.0;
            s.fluid.advection = f.2;
            s.fluid.cadence = f.3;
            s.fluid.history = f.4;
            s.forcing.kind = fo.0;
            if e.0 == ExperimentKind::DecayStudy && fo.0 == ForcingKind::Zero {
                s.forcing.kind = ForcingKind::Steady;
            }
            s.forcing.fbar_profile = fo.1;
            s.forcing.fbar_amplitude = fo.2;
            s.forcing.rate = fo.3;
            s.steady.method = st.0;
            s.steady.tol = st.1;
            s.steady.max_iters = st.2;
            s.analysis.margin = an.0;
            s.analysis.refine = an.1;
            s.analysis.levels = an.2;
            s.output.snapshot_format = an.3;
            s.fluid.initial = an.4;
            s.forcing.manufactured_alpha = 0.5 * s.kernel.delta;
            if e.0 == ExperimentKind::ConvergenceStudy {
                s.grid.lx = 1.0;
                s.grid.ly = 1.0;
            }
            s
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn render_then_parse_is_identity(spec in spec_strategy()) {
        spec.validate().unwrap();
        let text = spec.render();
        let back = ExperimentSpec::parse(&text).unwrap();
        prop_assert_eq!(&back, &spec);
        prop_assert_eq!(back.render(), text);
    }

    #[test]
    fn any_unknown_key_is_rejected_with_its_line(pad in 0usize..5, key in "[a-z]{3,10}_x") {
        let text = format!("{}[kernel]\n{key} = 1\n", "\n".repeat(pad));
        match ExperimentSpec::parse(&text) {
            Err(Error::Parse { line, .. }) => prop_assert_eq!(line, pad + 2),
            other => prop_assert!(false, "unexpected {:?}", other),
        }
    }
}
