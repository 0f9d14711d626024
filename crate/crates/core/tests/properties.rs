use ecp_core::linalg::DenseMatrix;
use ecp_core::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bind(pairs: &[(&str, f64)]) -> Bindings {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

#[test]
fn random_systems_have_small_backward_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let n = if case % 50 == 0 { rng.gen_range(150..=300) } else { rng.gen_range(1..=40) };
        let a = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let rep = match solve(&a, &b) {
            Ok(r) => r,
            Err(Error::SingularSystem { .. }) => continue,
            Err(e) => panic!("{e}"),
        };
        let x = &rep.solution;
        let r = a.mul_vec(x);
        let res = r.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        let xn = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let bn = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
        worst = worst.max(res / (a.norm_inf() * xn + bn));
    }
    assert!(worst < 1e-13, "normwise backward error {worst:e}");
}

#[test]
fn scan_does_not_depend_on_worker_count() {
    let f = Family::by_name("cubic_caseIII").unwrap();
    let axes = vec![Axis::new("beta", -4.0, 2.0, 0.5).unwrap(), Axis::new("eps", -4.0, 2.0, 0.5).unwrap()];
    let one = scan(&f, &Bindings::new(), &axes, Mode::Design, &TestConfig::default(), Some(1)).unwrap();
    let four = scan(&f, &Bindings::new(), &axes, Mode::Design, &TestConfig::default(), Some(4)).unwrap();
    assert_eq!(one, four);
    assert_eq!(one.cells.len(), 13 * 13);
}

#[test]
fn thth_scan_cell_at_five_one() {
    let f = Family::by_name("thth").unwrap();
    let axes = vec![Axis::new("lambda", 4.9, 5.1, 0.1).unwrap(), Axis::new("mu", 0.9, 1.1, 0.1).unwrap()];
    let map = scan(&f, &Bindings::new(), &axes, Mode::Ecp, &TestConfig::default(), None).unwrap();
    let cell = map.cell(&[1, 1]).unwrap();
    assert!((cell.values[0] - 5.0).abs() < 1e-12 && (cell.values[1] - 1.0).abs() < 1e-12);
    assert_eq!(cell.eval.outcome, CellOutcome::T1Positivity { p: 1 });
    assert_eq!(cell.eval.stage, "1:2:1");
}

#[test]
fn case_one_line_delta_zero_is_good() {
    let f = Family::by_name("cubic_caseI").unwrap();
    let cfg = TestConfig::default();
    for j in 0..40 {
        let eps = -2.95 + 0.2 * j as f64;
        let e = scan::evaluate(&f, &bind(&[("eps", eps)]), Mode::Design, &cfg);
        assert!(e.outcome.is_good(), "eps={eps}: {}", e.outcome);
    }
}

#[test]
fn case_three_diagonal_transition() {
    let f = Family::by_name("cubic_caseIII").unwrap();
    let cfg = TestConfig::default();
    let at = |v: f64| scan::evaluate(&f, &bind(&[("beta", v), ("eps", v)]), Mode::Design, &cfg).outcome;
    assert!(at(-1.499).is_good());
    assert!(!at(-1.501).is_good());
}

#[test]
fn case_two_matches_its_inequality_on_samples() {
    let f = Family::by_name("cubic_caseII").unwrap();
    let cfg = TestConfig::default();
    for (beta, delta) in [(0.0f64, 0.0f64), (-2.5, 0.8), (1.0, 7.9), (1.0, -7.9), (-2.0, 1.9)] {
        let want = delta.abs() < 2.0 * (beta + 3.0) && beta > -3.0;
        let got = scan::evaluate(&f, &bind(&[("beta", beta), ("delta", delta)]), Mode::Design, &cfg);
        assert_eq!(got.outcome.is_good(), want, "beta={beta} delta={delta}");
    }
    for (beta, delta) in [(-3.5, 0.0), (0.0, 6.5), (1.0, -8.5)] {
        let got = scan::evaluate(&f, &bind(&[("beta", beta), ("delta", delta)]), Mode::Design, &cfg);
        assert!(!got.outcome.is_good(), "beta={beta} delta={delta}");
    }
}

#[test]
fn general_diagonal_q1_region() {
    let f = Family::by_name("cubic_geo").unwrap();
    let cfg = TestConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    while checked < 300 {
        let (al, ga, ze): (f64, f64, f64) = (rng.gen_range(0.2..3.0), rng.gen_range(0.2..3.0), rng.gen_range(0.2..3.0));
        let (b, d, e): (f64, f64, f64) = (rng.gen_range(-6.0..6.0), rng.gen_range(-12.0..12.0), rng.gen_range(-6.0..6.0));
        let g1 = e + 2.0 * (ga + ze);
        let g2 = d + 2.0 * (b + e + al + 2.0 * ga + ze);
        let g3 = (e + 2.0 * ze) * (b + 2.0 * al) / ga + 2.0 * (al + ze) - d;
        if [g1, g2, g3].iter().any(|g: &f64| g.abs() < 0.05) {
            continue;
        }
        let want = g1 > 0.0 && g2 > 0.0 && g3 > 0.0;
        let bnd = bind(&[
            ("q", 1.0),
            ("beta", b),
            ("delta", d),
            ("eps", e),
            ("alpha", al),
            ("gamma", ga),
            ("zeta", ze),
        ]);
        let got = scan::evaluate(&f, &bnd, Mode::Design, &cfg);
        assert_eq!(got.outcome.is_good(), want, "{bnd:?}: {}", got.outcome);
        checked += 1;
    }
}

#[test]
fn spline_bisection_brackets_published_interval() {
    let f = Family::by_name("cubic_spline_family").unwrap();
    let b = bisect_boundary(
        &f,
        &bind(&[("q", 19.0)]),
        "beta",
        -1.0,
        0.0,
        Mode::Design,
        &TestConfig::default(),
        1e-4,
        100,
    )
    .unwrap();
    assert!(b.width() <= 1e-4);
    assert!(b.hi > -0.0979 && b.lo < -0.0978);
}

fn naive_iterate(g: &GammaTensor) -> GammaTensor {
    let m = g.size();
    GammaTensor::from_fn(g.level() + 1, m - 1, g.sections(), |i, k, r| {
        let tail = |c: usize| (i + 1..m).map(|j| g.get(j, k, c)).sum::<f64>();
        let total = |c: usize| (0..m).map(|j| g.get(j, k, c)).sum::<f64>();
        tail(r + 1) / total(r + 1) - tail(r) / total(r)
    })
}

fn section_kind() -> impl Strategy<Value = SectionKind> {
    prop_oneof![
        (1usize..=6).prop_map(|degree| SectionKind::Polynomial { degree }),
        (0usize..=3).prop_map(|poly_terms| SectionKind::Trigonometric { poly_terms }),
        (0usize..=3).prop_map(|poly_terms| SectionKind::Hyperbolic { poly_terms }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn lowering_matches_direct_formula(
        size in 2usize..=7,
        sections in 1usize..=6,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = GammaTensor::from_fn(0, size, sections, |i, k, r| {
            if (k == 0 && r < i) || (k == sections - 1 && r > i) {
                0.0
            } else {
                rng.gen_range(0.01..3.0)
            }
        });
        let fast = iterate_gamma(&g).unwrap();
        let slow = naive_iterate(&g);
        for k in 0..sections {
            for i in 0..size - 1 {
                for r in 0..size - 1 {
                    prop_assert!((fast.get(i, k, r) - slow.get(i, k, r)).abs() <= 1e-12);
                }
            }
        }
        prop_assert!(fast.has_structural_zeros());
    }

    #[test]
    fn basis_derivatives_match_finite_differences(
        kind in section_kind(),
        lo in -2.0f64..2.0,
        len in 0.2f64..1.5,
        t in 0.1f64..0.9,
    ) {
        let s = SectionSpace::local(kind, lo, lo + len).unwrap();
        let x = lo + t * len;
        let h = 1e-5;
        let top = s.n().min(2);
        let d = s.eval_basis_derivs(x, top).unwrap();
        let up = s.eval_basis_derivs(x + h, top - 1).unwrap();
        let dn = s.eval_basis_derivs(x - h, top - 1).unwrap();
        for j in 0..s.dim() {
            for order in 0..top {
                let fd = (up[(j, order)] - dn[(j, order)]) / (2.0 * h);
                let exact = d[(j, order + 1)];
                prop_assert!((fd - exact).abs() <= 1e-6 * (1.0 + exact.abs()), "j={} order={} fd={} exact={}", j, order, fd, exact);
            }
        }
    }

    #[test]
    fn polynomial_verdict_survives_affine_reparameterization(
        degree in 1usize..=5,
        q in 0usize..=4,
        scale in 0.1f64..10.0,
        shift in -5.0f64..5.0,
    ) {
        let knots = |a: f64, b: f64| (0..=q + 1).map(|k| a * k as f64 + b).collect::<Vec<_>>();
        let build = |kn: Vec<f64>| {
            PWSpace::uniform(Partition::new(kn).unwrap(), SectionKind::Polynomial { degree }, ConnectionMatrix::identity(degree + 1)).unwrap()
        };
        let cfg = TestConfig::default();
        let base = run_test(&build(knots(1.0, 0.0)), &cfg).unwrap();
        let moved = run_test(&build(knots(scale, shift)), &cfg).unwrap();
        prop_assert!(base.is_ecp());
        prop_assert_eq!(base.verdict(), moved.verdict());
    }
}
