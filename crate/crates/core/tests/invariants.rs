mod common;

use common::{exact, point, q, random_point, random_poly, random_structure, Poly, RATIONAL};
use metrisability::invariants::{
    analyze_point, cartan_stabilize, connection_matrices, cov_deriv, curvature,
    degenerate_family_obstruction, genericity_p, liouville_l, matrix_m, nu5, tresse_i1, vector_v,
    AnalysisConfig, DerivativeTower, JetStructure, Verdict,
};
use metrisability::{parse_expr, Axis, EvalMode, Expr, Point, ProjectiveStructure, Scalar};
use num_rational::BigRational;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ode(a: [&str; 4]) -> ProjectiveStructure {
    ProjectiveStructure::new(a.map(|s| parse_expr(s).unwrap())).unwrap()
}

fn painleve() -> ProjectiveStructure {
    ode(["6*y^2+x", "0", "0", "0"])
}

fn exp_xy_family(c: i64) -> ProjectiveStructure {
    let a0 = format!("{c}/2*x*exp(x*y)");
    ode([&a0, "y/2", "x", "0"])
}

/// The obstruction E for `y″ = A(x, y)` evaluated from oracle partials.
fn family_obstruction_oracle(a: &Poly) -> Poly {
    let ay = |k| a.partial(0, k);
    let axy = |k| a.partial(1, k);
    let (a2, a3, a4, a5) = (ay(2), ay(3), ay(4), ay(5));
    let (x2, x3, x4) = (axy(2), axy(3), axy(4));
    let t = |c: i64, fs: [&Poly; 3]| fs[0].mul(fs[1]).mul(fs[2]).scale(&q(c, 1));
    t(7, [&a3, &a4, &x3])
        .add(&t(-5, [&x3, &a5, &a2]))
        .add(&t(-6, [&x4, &a3, &a3]))
        .add(&t(6, [&a5, &x2, &a3]))
        .add(&t(-7, [&a4, &a4, &x2]))
        .add(&t(5, [&x4, &a4, &a2]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn curvature_is_concentrated_in_the_last_row(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s, _) = random_structure(&mut rng, 2);
        let (x, y) = random_point(&mut rng);
        let js = JetStructure::at(&s, &point(&x, &y), 5, RATIONAL).unwrap();
        let f = curvature(&connection_matrices(&js).unwrap()).unwrap();
        let v = vector_v(&js).unwrap();
        for row in &f[..5] {
            prop_assert!(row.iter().all(|j| j.is_zero()));
        }
        let n = v[0].order();
        for (fj, vj) in f[5].iter().zip(&v) {
            prop_assert_eq!(&fj.truncate(n), vj);
        }
        prop_assert!(v[5].is_zero());
    }

    #[test]
    fn covariant_derivatives_commute_up_to_v(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s, _) = random_structure(&mut rng, 2);
        let (x, y) = random_point(&mut rng);
        let p = point(&x, &y);
        let js = JetStructure::at(&s, &p, 5, RATIONAL).unwrap();
        let om = connection_matrices(&js).unwrap();
        let w: Vec<_> = (0..6)
            .map(|_| random_poly(&mut rng, 3).to_expr().eval_jet(&p, 3, RATIONAL).unwrap())
            .collect();
        let xy = cov_deriv(&cov_deriv(&w, &om, Axis::Y).unwrap(), &om, Axis::X).unwrap();
        let yx = cov_deriv(&cov_deriv(&w, &om, Axis::X).unwrap(), &om, Axis::Y).unwrap();
        let v = vector_v(&js).unwrap();
        let w6 = w[5].value();
        // with D = ∂ − WΩ on rows: D_y D_x W − D_x D_y W = W₆ V
        for i in 0..6 {
            let lhs = yx[i].value() - xy[i].value();
            prop_assert_eq!(lhs, w6 * v[i].value());
        }
    }

    #[test]
    fn tresse_invariant_is_linear_in_the_slope(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s, _) = random_structure(&mut rng, 3);
        let (x, y) = random_point(&mut rng);
        let slope = common::random_rational(&mut rng, 9, 5);
        let js = JetStructure::at(&s, &point(&x, &y), 4, RATIONAL).unwrap();
        let (l1, l2) = liouville_l(&js).unwrap();
        let p = Scalar::Exact(slope);
        let want = l1.value() * &Scalar::int(-6) + l2.value() * &Scalar::int(-6) * &p;
        prop_assert_eq!(tresse_i1(&js, &p).unwrap(), want);
    }

    #[test]
    fn family_obstruction_matches_symbolic_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_poly(&mut rng, 6);
        let (x, y) = random_point(&mut rng);
        let j = a.to_expr().eval_jet(&point(&x, &y), 6, RATIONAL).unwrap();
        let got = exact(&degenerate_family_obstruction(&j).unwrap());
        prop_assert_eq!(got, family_obstruction_oracle(&a).eval(&x, &y));
    }

    #[test]
    fn metric_structures_have_vanishing_det_m(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = Poly::int(2).add(&random_poly(&mut rng, 2));
        let f = random_poly(&mut rng, 1);
        let g = Poly::int(3).add(&random_poly(&mut rng, 2));
        let (x, y) = random_point(&mut rng);
        let det = e.eval(&x, &y) * g.eval(&x, &y) - f.eval(&x, &y) * f.eval(&x, &y);
        prop_assume!(det != BigRational::from_integer(0.into()));
        let m = metrisability::MetricInput::new(e.to_expr(), f.to_expr(), g.to_expr());
        let js = JetStructure::at(&m.structure(), &point(&x, &y), 5, RATIONAL).unwrap();
        let mut tower = DerivativeTower::new(&js).unwrap();
        prop_assert!(matrix_m(&mut tower).unwrap().det.is_zero());
    }
}

#[test]
fn family_obstruction_examples() {
    let at = Point::exact((3, 2), (-2, 5));
    for src in ["y^3", "x*y^3", "x*y^4"] {
        let j = parse_expr(src).unwrap().eval_jet(&at, 6, RATIONAL).unwrap();
        assert!(degenerate_family_obstruction(&j).unwrap().is_zero(), "{src}");
    }
    // separable A = f(x)g(y) gives f²f′(g‴²g⁗ + g″g‴g⁽⁵⁾ − 2g″g⁗²), which
    // vanishes for pure powers of y; a two-term g does not
    let y2 = Poly::y().mul(&Poly::y());
    let g = y2.mul(&y2).mul(&Poly::y()).add(&y2);
    let a = Poly::x().mul(&Poly::x()).mul(&g);
    let j = a.to_expr().eval_jet(&at, 6, RATIONAL).unwrap();
    let want = family_obstruction_oracle(&a).eval(&q(3, 2), &q(-2, 5));
    assert_ne!(want, q(0, 1));
    assert_eq!(exact(&degenerate_family_obstruction(&j).unwrap()), want);
}

#[test]
fn family_obstruction_of_x_sin_y() {
    let a = Poly::x().mul(&Poly::sin_y());
    let oracle = family_obstruction_oracle(&a);
    for (x, y) in [(0.5, 0.25), (-1.5, 2.0), (2.0, -0.7)] {
        let j = parse_expr("x*sin(y)")
            .unwrap()
            .eval_jet(&Point::float(x, y), 6, EvalMode::Float)
            .unwrap();
        let got = degenerate_family_obstruction(&j).unwrap().to_f64();
        let closed_form = 2.0 * x * x * f64::sin(y);
        assert!((got - closed_form).abs() < 1e-10, "{got} vs {closed_form}");
        assert!((oracle.eval_f64(x, y) - closed_form).abs() < 1e-10);
    }
}

#[test]
fn painleve_invariants() {
    let p = Point::exact((1, 2), (1, 3));
    let js = JetStructure::at(&painleve(), &p, 10, RATIONAL).unwrap();
    let (l1, l2) = liouville_l(&js).unwrap();
    assert_eq!(l1.value(), &Scalar::int(-12));
    assert!(l2.value().is_zero());
    assert!(nu5(&js).unwrap().is_zero());
    let r = analyze_point(&painleve(), &p, &AnalysisConfig::default()).unwrap();
    assert!(r.det_m.is_zero());
    assert_eq!(r.rank_m, 3);
    assert_eq!(r.rank_mmax, Some(5));
    let k = r.kernel_mmax.unwrap();
    assert_eq!(k.len(), 1);
    assert_eq!(k[0], vec![Scalar::one(), Scalar::zero(), Scalar::zero(), Scalar::zero(), Scalar::zero(), Scalar::zero()]);
    assert_eq!(r.verdict, Verdict::DegenerateKernel);
}

#[test]
fn flat_structure_is_flat() {
    let r = analyze_point(&ProjectiveStructure::flat(), &Point::exact((2, 3), (5, 7)), &AnalysisConfig::default())
        .unwrap();
    assert_eq!(r.verdict, Verdict::MetrisableFlat);
    assert!(r.l1.is_zero() && r.l2.is_zero() && r.det_m.is_zero());
    assert_eq!(r.cartan.unwrap().s_dim, Some(6));
}

#[test]
fn projectively_flat_but_nontrivial_coefficients() {
    // geodesics of the round sphere in gnomonic coordinates are straight
    // lines; a metric with constant curvature gives a flat structure
    let m = metrisability::MetricInput::new(
        parse_expr("(1+y^2)/(1+x^2+y^2)^2").unwrap(),
        parse_expr("-x*y/(1+x^2+y^2)^2").unwrap(),
        parse_expr("(1+x^2)/(1+x^2+y^2)^2").unwrap(),
    );
    let r = analyze_point(&m.structure(), &Point::exact((1, 3), (1, 2)), &AnalysisConfig::default()).unwrap();
    assert_eq!(r.verdict, Verdict::MetrisableFlat);
}

#[test]
fn exp_xy_family_degenerate_member() {
    let cfg = AnalysisConfig::default();
    for (x, y) in [(1, 2), (-1, 3), (2, 5)] {
        let p = Point::exact((x, 1), (y, 7));
        let r = analyze_point(&exp_xy_family(0), &p, &cfg).unwrap();
        assert_eq!(r.rank_m, 5);
        assert_eq!(r.kernel_m.len(), 1);
        let e3: Vec<Scalar> = (0..6).map(|i| if i == 2 { Scalar::one() } else { Scalar::zero() }).collect();
        for (k, e) in r.kernel_m[0].iter().zip(&e3) {
            assert!((k.to_f64() - e.to_f64()).abs() < 1e-9);
        }
        assert!(genericity_p(&r.kernel_m[0]).to_f64().abs() < 1e-9);
        assert_eq!(r.verdict, Verdict::DegenerateKernel);
    }
}

#[test]
fn exp_xy_family_metrisable_member() {
    let p = Point::float(0.5, 1.0 / 3.0);
    let r = analyze_point(&exp_xy_family(1), &p, &AnalysisConfig::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Metrisable);
    // the kernel is the metric (E, F, G) = (e^{xy}, 0, 1) rescaled:
    // W = (ψ₁, ψ₂, ψ₃, …) with ψ₁/ψ₃ = G/E·… — only check the ratio
    let w = r.witness.unwrap();
    let ratio = w[0].to_f64() / w[2].to_f64();
    assert!((ratio - (0.5f64 / 3.0).exp()).abs() < 1e-8, "{ratio}");
}

#[test]
fn generic_structure_is_not_metrisable() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..5 {
        let (s, _) = random_structure(&mut rng, 3);
        let (x, y) = random_point(&mut rng);
        let r = analyze_point(&s, &point(&x, &y), &AnalysisConfig::default()).unwrap();
        assert!(!r.det_m.is_zero());
        assert_eq!(r.verdict, Verdict::NotMetrisable);
        let js = JetStructure::at(&s, &point(&x, &y), 10, RATIONAL).unwrap();
        let c = cartan_stabilize(&js, 6, 1e-9).unwrap();
        assert_eq!(c.s_dim, Some(0));
    }
}

#[test]
fn quartic_family_determinant_changes_sign_across_a_root() {
    // ĉ = 48c − 11; the quartic has a real root near ĉ ≈ 136.3, i.e. c ≈ 3.07
    let det_at = |c: BigRational| {
        let a0 = Expr::Num(c) * parse_expr("exp(x)").unwrap();
        let s = ProjectiveStructure::new([a0, Expr::num(0), parse_expr("exp(-x)").unwrap(), Expr::num(0)]).unwrap();
        let js = JetStructure::at(&s, &Point::origin(), 10, RATIONAL).unwrap();
        let mut t = DerivativeTower::new(&js).unwrap();
        matrix_m(&mut t).unwrap().det.to_f64()
    };
    let (lo, hi) = (det_at(q(3, 1)), det_at(q(31, 10)));
    assert!(lo.signum() != hi.signum(), "{lo} {hi}");
    assert!(det_at(q(1, 1)) != 0.0);
}
