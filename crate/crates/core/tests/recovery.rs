use metrisability::invariants::{analyze_point, AnalysisConfig, Verdict};
use metrisability::recovery::{
    nondegenerate_sections, reconstruct_metric, recover, solution_space_dim, transport, GridSpec,
    RecoveryConfig, RecoveryError, Signature,
};
use metrisability::{parse_expr, MetricInput, Point, ProjectiveStructure};

fn ode(a: [&str; 4]) -> ProjectiveStructure {
    ProjectiveStructure::new(a.map(|s| parse_expr(s).unwrap())).unwrap()
}

fn exp_xy_c1() -> ProjectiveStructure {
    ode(["1/2*x*exp(x*y)", "y/2", "x", "0"])
}

fn grid(h: f64, n: usize) -> GridSpec {
    GridSpec {
        center: (0.5, 1.0 / 3.0),
        h,
        n,
    }
}

#[test]
fn exp_xy_family_recovers_the_exponential_metric() {
    let r = recover(&exp_xy_c1(), &grid(0.05, 21), &AnalysisConfig::default(), &RecoveryConfig::default())
        .unwrap();
    assert_eq!(r.verdict, Verdict::Metrisable);
    assert!(r.metric.excluded.is_empty());
    // forward oracle: the structure comes from E = e^{xy}, F = 0, G = 1
    for n in &r.metric.nodes {
        assert!((n.e / n.g - (n.x * n.y).exp()).abs() < 1e-6, "E/G at ({}, {})", n.x, n.y);
        assert!(n.f.abs() < 1e-6 * n.g.abs());
        assert_eq!(n.signature, Signature::Riemannian);
    }
    let residual = r.round_trip_residual.unwrap();
    assert!(residual < 1e-6, "round trip residual {residual}");
    assert!(r.max_loop_defect < RecoveryConfig::default().loop_tolerance);
}

#[test]
fn loop_defect_converges_at_fourth_order() {
    // same square, step halved: the RK4 sweeps should disagree ~16× less
    let s = exp_xy_c1();
    let seed = [1.0, 0.0, (-(0.5f64 / 3.0)).exp(), 0.0, 0.0, 0.0];
    let cfg = RecoveryConfig {
        substeps: 1,
        loop_tolerance: 1.0,
        ..RecoveryConfig::default()
    };
    let coarse = transport(&seed, &s, &grid(0.2, 7), &cfg).unwrap().max_defect;
    let fine = transport(&seed, &s, &grid(0.1, 13), &cfg).unwrap().max_defect;
    let order = (coarse / fine).log2();
    assert!(order >= 3.5, "observed order {order} ({coarse:e} → {fine:e})");
}

#[test]
fn flat_recovery_is_euclidean() {
    let g = GridSpec {
        center: (0.0, 0.0),
        h: 0.1,
        n: 9,
    };
    let r = recover(&ProjectiveStructure::flat(), &g, &AnalysisConfig::default(), &RecoveryConfig::default())
        .unwrap();
    assert_eq!(r.verdict, Verdict::MetrisableFlat);
    let first = &r.metric.nodes[0];
    for n in &r.metric.nodes {
        assert!((n.e - first.e).abs() < 1e-12 && (n.g - first.g).abs() < 1e-12);
        assert!(n.f.abs() < 1e-12);
    }
}

#[test]
fn painleve_is_refused() {
    let s = ode(["6*y^2+x", "0", "0", "0"]);
    let g = GridSpec {
        center: (0.5, 0.25),
        h: 0.05,
        n: 5,
    };
    let err = recover(&s, &g, &AnalysisConfig::default(), &RecoveryConfig::default()).unwrap_err();
    assert_eq!(err, RecoveryError::Refused(Verdict::DegenerateKernel));
}

#[test]
fn painleve_forced_seed_stays_degenerate() {
    // the parallel section exists but is a degenerate quadratic form
    let s = ode(["6*y^2+x", "0", "0", "0"]);
    let g = GridSpec {
        center: (0.5, 0.25),
        h: 0.05,
        n: 7,
    };
    let cfg = RecoveryConfig::default();
    let sec = transport(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], &s, &g, &cfg).unwrap();
    assert!(sec.max_defect < cfg.loop_tolerance);
    assert_eq!(reconstruct_metric(&sec, &cfg).unwrap_err(), RecoveryError::AllDegenerate);
}

#[test]
fn non_metrisable_seed_is_path_dependent() {
    let s = ode(["x*y+y^2", "x^2-y", "2*x", "x-3*y^2"]);
    let g = GridSpec {
        center: (0.2, 0.1),
        h: 0.1,
        n: 9,
    };
    let err = transport(&[1.0, 0.0, 1.0, 0.0, 0.0, 0.0], &s, &g, &RecoveryConfig::default()).unwrap_err();
    assert!(matches!(err, RecoveryError::PathDependent { .. }));
}

#[test]
fn liouville_metric_has_several_nondegenerate_sections() {
    let m = MetricInput::new(
        parse_expr("2+x^2+y^3").unwrap(),
        parse_expr("0").unwrap(),
        parse_expr("2+x^2+y^3").unwrap(),
    );
    let s = m.structure();
    let p = Point::exact((1, 3), (1, 2));
    let cfg = AnalysisConfig::default();
    let dim = solution_space_dim(&s, &p, &cfg).unwrap();
    assert!(dim >= 2, "S = {dim}");
    let r = analyze_point(&s, &p, &cfg).unwrap();
    assert_eq!(r.verdict, Verdict::Metrisable);
    let basis = r.kernel_mmax.unwrap();
    assert_eq!(basis.len(), dim);
    assert_eq!(nondegenerate_sections(&basis, dim, 1e-9).len(), dim);
}

#[test]
fn solution_space_of_flat_structure_is_six() {
    let d = solution_space_dim(&ProjectiveStructure::flat(), &Point::origin(), &AnalysisConfig::default()).unwrap();
    assert_eq!(d, 6);
}
