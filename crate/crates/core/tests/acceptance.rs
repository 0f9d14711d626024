//! Acceptance suite. One line per criterion, `PASS` or `FAIL`, then a
//! nonzero exit status if anything failed.

use std::time::{Duration, Instant};

use ecp_core::ecptest::DEFAULT_TOL;
use ecp_core::families::{cos_sin_pair, thth};
use ecp_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Relative agreement with the printed table entries (five significant figures).
const TABLE_REL_TOL: f64 = 1e-3;
/// Parameter-space distance below which a grid node counts as on the boundary.
const BOUNDARY_MARGIN: f64 = 1e-2;
const BRACKET_WIDTH: f64 = 1e-4;
const UNITY_TOL: f64 = 1e-9;
const MULTIPLICITY_TOL: f64 = 1e-9;
const ITERATION_TOL: f64 = 1e-12;
const CLASSICAL_TOL: f64 = 1e-10;

/// Left block of the THTH table at `(lambda, mu) = (5, 1)`: `[k][i][r]`.
const GAMMA0: [[[f64; 5]; 5]; 4] = [
    [
        [1.0, 3.3817, 8.9847, 2.6979, 0.62437],
        [0.0, 1.0, 4.8671, 2.0399, 0.59032],
        [0.0, 0.0, 1.0, 0.84793, 0.37871],
        [0.0, 0.0, 0.0, 0.0035679, 0.0036312],
        [0.0, 0.0, 0.0, 0.0, 2.8565e-06],
    ],
    [
        [0.62437, 0.46973, 0.20328, 0.24318, 0.16292],
        [0.59032, 0.95505, 0.41134, 0.60222, 0.48348],
        [0.37871, 1.0734, 1.6102, 3.4078, 3.1382],
        [0.0036312, 0.014855, 0.040202, 0.33095, 0.41968],
        [2.8565e-06, 1.4492e-05, 5.2756e-05, 0.00069584, 0.0069185],
    ],
    [
        [0.16292, 0.024924, 0.0078407, 0.0061688, 0.0037487],
        [0.48348, 0.19339, 0.094695, 0.16522, 0.17542],
        [3.1382, 1.7563, 0.65982, 1.7289, 2.7985],
        [0.41968, 0.35967, 0.18827, 0.37974, 0.7234],
        [0.0069185, 0.010689, 0.012989, 0.040777, 0.26258],
    ],
    [
        [0.0037487, 0.0, 0.0, 0.0, 0.0],
        [0.17542, 0.12345, 0.0, 0.0, 0.0],
        [2.7985, 2.8763, 1.1487, 0.0, 0.0],
        [0.7234, 0.81068, 0.46275, 1.0, 0.0],
        [0.26258, 0.39133, 0.32664, 0.75473, 1.0],
    ],
];

/// Right block of the same table.
const GAMMA1: [[[f64; 4]; 4]; 4] = [
    [
        [0.22822, 0.16682, 0.12226, 0.091739],
        [0.0, 0.067332, 0.085013, 0.087064],
        [0.0, 0.0, 0.00063834, 0.0016372],
        [0.0, 0.0, 0.0, 1.7886e-06],
    ],
    [
        [0.20404, 0.097174, 0.036704, 0.014351],
        [0.19364, 0.29561, 0.086956, 0.030893],
        [0.0036412, 0.011855, 0.054563, 0.028967],
        [3.9781e-06, 1.7524e-05, 0.00012848, 0.0014911],
    ],
    [
        [0.028059, 0.0024918, 0.0054787, 0.0017123],
        [0.060401, -0.013313, 0.032559, 0.028646],
        [0.056635, 0.050919, -0.027658, 0.06756],
        [0.0029153, 0.0089212, 0.0040909, 0.048678],
    ],
    [
        [0.00094577, 0.0, 0.0, 0.0],
        [0.015822, 0.029382, 0.0, 0.0],
        [0.037316, 0.12123, 0.5927, 0.0],
        [0.026886, 0.075403, 0.26157, 0.56989],
    ],
];

struct Report {
    passed: bool,
    detail: String,
}

impl Report {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Report { passed, detail: detail.into() }
    }
}

fn bind(pairs: &[(&str, f64)]) -> Bindings {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn matches_entry(got: f64, want: f64) -> bool {
    if want == 0.0 {
        got.abs() <= 1e-12
    } else {
        (got - want).abs() <= TABLE_REL_TOL * want.abs()
    }
}

fn table_reproduction() -> Report {
    let space = thth(5.0, 1.0).expect("thth space");
    let config = TestConfig { record_trace: true, ..TestConfig::default() };
    let outcome = match run_test(&space, &config) {
        Ok(o) => o,
        Err(e) => return Report::new(false, format!("test errored: {e}")),
    };
    let trace = &outcome.diagnostics.trace;
    if trace.len() < 2 {
        return Report::new(false, format!("only {} levels recorded", trace.len()));
    }
    let mut bad = Vec::new();
    for k in 0..4 {
        for i in 0..5 {
            for r in 0..5 {
                let got = trace[0].get(i, k, r);
                if !matches_entry(got, GAMMA0[k][i][r]) {
                    bad.push(format!("g0[i={i},k={k},r={r}]={got:.5e}"));
                }
            }
        }
        for i in 0..4 {
            for r in 0..4 {
                let got = trace[1].get(i, k, r);
                if !matches_entry(got, GAMMA1[k][i][r]) {
                    bad.push(format!("g1[i={i},k={k},r={r}]={got:.5e}"));
                }
            }
        }
    }
    let verdict_ok = matches!(outcome.stage, Stage::T1Positivity { p: 1, i: 1, k: 2, r: 1, .. });
    Report::new(
        bad.is_empty() && verdict_ok,
        format!("164 entries, {} mismatched {:?}; stage {}", bad.len(), bad.first(), outcome.stage),
    )
}

/// Signed constraint `g > 0` with gradient, for distance-to-boundary margins.
type Constraint = Box<dyn Fn(&[f64]) -> (f64, Vec<f64>) + Sync>;

fn inside_and_margin(constraints: &[Constraint], x: &[f64]) -> (bool, f64) {
    let mut inside = true;
    let mut margin = f64::INFINITY;
    for c in constraints {
        let (g, grad) = c(x);
        let norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        inside &= g > 0.0;
        margin = margin.min(if norm > 0.0 { g.abs() / norm } else { f64::INFINITY });
    }
    (inside, margin)
}

/// Compares a scan with an analytic region away from its boundary.
fn compare_region(map: &RegionMap, constraints: &[Constraint]) -> (usize, usize, Vec<String>) {
    let mut tested = 0;
    let mut disagree = Vec::new();
    for cell in &map.cells {
        let (inside, margin) = inside_and_margin(constraints, &cell.values);
        if margin <= BOUNDARY_MARGIN {
            continue;
        }
        tested += 1;
        if cell.eval.outcome.is_good() != inside {
            disagree.push(format!("{:?} -> {}", cell.values, cell.eval.outcome));
        }
    }
    (tested, map.cells.len(), disagree)
}

fn region_report(family: &str, fixed: Bindings, axes: Vec<Axis>, constraints: Vec<Constraint>) -> Report {
    let f = Family::by_name(family).expect("family");
    let map = match scan(&f, &fixed, &axes, Mode::Design, &TestConfig::default(), None) {
        Ok(m) => m,
        Err(e) => return Report::new(false, format!("scan failed: {e}")),
    };
    let (tested, total, disagree) = compare_region(&map, &constraints);
    Report::new(
        disagree.is_empty() && tested > 0,
        format!(
            "{tested}/{total} nodes off the boundary, {} disagree{}; {} good",
            disagree.len(),
            disagree.first().map(|d| format!(" (first {d})")).unwrap_or_default(),
            map.count("good")
        ),
    )
}

fn q1_analytic_region() -> Report {
    let axes = ["beta", "delta", "eps"]
        .iter()
        .map(|n| Axis::new(*n, -6.0, 6.0, 0.2).unwrap())
        .collect();
    // variables in axis order: beta, delta, eps
    let constraints: Vec<Constraint> = vec![
        Box::new(|x| (x[2] + 4.0, vec![0.0, 0.0, 1.0])),
        Box::new(|x| (x[1] + 2.0 * (x[0] + x[2] + 4.0), vec![2.0, 1.0, 2.0])),
        Box::new(|x| {
            let (b, d, e) = (x[0], x[1], x[2]);
            ((e + 2.0) * (b + 2.0) + 4.0 - d, vec![e + 2.0, -1.0, b + 2.0])
        }),
    ];
    region_report("cubic_geo", bind(&[("q", 1.0)]), axes, constraints)
}

fn square_axes(a: &str, b: &str) -> Vec<Axis> {
    vec![Axis::new(a, -4.0, 4.0, 0.1).unwrap(), Axis::new(b, -4.0, 4.0, 0.1).unwrap()]
}

fn case_one() -> Report {
    // (delta, eps): |delta| < 2(eps + 3), eps > -3
    let constraints: Vec<Constraint> = vec![
        Box::new(|x| (x[1] + 3.0, vec![0.0, 1.0])),
        Box::new(|x| (2.0 * (x[1] + 3.0) - x[0], vec![-1.0, 2.0])),
        Box::new(|x| (2.0 * (x[1] + 3.0) + x[0], vec![1.0, 2.0])),
    ];
    let grid = region_report("cubic_caseI", Bindings::new(), square_axes("delta", "eps"), constraints);

    // delta = a(eps + 3) on sampled lines
    let f = Family::by_name("cubic_caseI").unwrap();
    let config = TestConfig::default();
    let mut line_bad = Vec::new();
    for a in [-2.5, -1.9, -1.0, 0.0, 0.5, 1.9, 2.5] {
        for eps in [-3.5, -2.9, -1.0, 0.0, 2.0, 5.0] {
            let b = bind(&[("delta", a * (eps + 3.0)), ("eps", eps)]);
            let want = f64::abs(a) < 2.0 && eps > -3.0;
            if scan::evaluate(&f, &b, Mode::Design, &config).outcome.is_good() != want {
                line_bad.push(format!("a={a} eps={eps}"));
            }
        }
    }
    Report::new(
        grid.passed && line_bad.is_empty(),
        format!("{}; line samples: {} disagree {:?}", grid.detail, line_bad.len(), line_bad.first()),
    )
}

fn case_three() -> Report {
    let constraints: Vec<Constraint> = vec![
        Box::new(|x| ((x[0] + 2.0) * (x[1] + 2.0) + 2.0, vec![x[1] + 2.0, x[0] + 2.0])),
        Box::new(|x| (x[0] + x[1] + 3.0, vec![1.0, 1.0])),
    ];
    region_report("cubic_caseIII", Bindings::new(), square_axes("beta", "eps"), constraints)
}

fn case_four() -> Report {
    let constraints: Vec<Constraint> = vec![
        Box::new(|x| ((x[0] + 4.0) * (x[1] + 4.0) - 4.0, vec![x[1] + 4.0, x[0] + 4.0])),
        Box::new(|x| (x[0] + 4.0, vec![1.0, 0.0])),
    ];
    region_report("cubic_caseIV", Bindings::new(), square_axes("beta", "eps"), constraints)
}

fn spline_brackets() -> Report {
    let f = Family::by_name("cubic_spline_family").unwrap();
    let config = TestConfig::default();
    let mut lines = Vec::new();
    let mut ok = true;
    for (sections, lo, hi) in [(20usize, -0.0979, -0.0978), (40, -0.0247, -0.0246), (60, -0.011, -0.0109)] {
        let fixed = bind(&[("q", (sections - 1) as f64)]);
        let bracket =
            bisect_boundary(&f, &fixed, "beta", -1.0, 0.0, Mode::Design, &config, BRACKET_WIDTH, 200);
        let at = |beta: f64| {
            let mut b = fixed.clone();
            b.insert("beta".into(), beta);
            scan::evaluate(&f, &b, Mode::Design, &config).outcome.is_good()
        };
        match bracket {
            Ok(b) => {
                // the published interval must itself straddle the change
                let straddles = !at(lo) && at(hi);
                let near = b.lo >= lo - BRACKET_WIDTH && b.hi <= hi + BRACKET_WIDTH;
                let this = b.width() <= BRACKET_WIDTH && straddles && near;
                ok &= this;
                lines.push(format!("{sections}: ]{:.6},{:.6}[", b.lo, b.hi));
            }
            Err(e) => {
                ok = false;
                lines.push(format!("{sections}: {e}"));
            }
        }
    }
    Report::new(ok, lines.join(", "))
}

fn spot_checks() -> Report {
    let config = TestConfig::default();
    let thth_stage = run_test(&thth(5.0, 1.0).unwrap(), &config).map(|o| o.stage);
    let thth_ok = matches!(thth_stage, Ok(Stage::T1Positivity { p: 1, .. }));
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut bad = Vec::new();
    for h in [0.3, 1.0, 1.5, half_pi - 1e-3, half_pi + 1e-3, 1.7, 2.5, 3.0] {
        let want = h < half_pi;
        let got = run_test(&cos_sin_pair(h).unwrap(), &config).map(|o| o.is_ecp()).unwrap_or(false);
        if got != want {
            bad.push(h);
        }
    }
    Report::new(
        thth_ok && bad.is_empty(),
        format!("THTH(5,1): {thth_stage:?}; cos/sin pair misclassified at {bad:?}"),
    )
}

/// Spaces certified good for design that the property checks run over.
fn corpus() -> Vec<(String, PWSpace)> {
    let mut out = Vec::new();
    let mut add = |family: &str, pairs: &[(&str, f64)]| {
        let f = Family::by_name(family).unwrap();
        let b = bind(pairs);
        out.push((format!("{family}{pairs:?}"), f.generate(&b).unwrap()));
    };
    for q in 0..=4 {
        add("cubic_geo", &[("q", q as f64)]);
    }
    add("cubic_geo", &[("q", 1.0), ("beta", 1.0), ("delta", -2.0), ("eps", 0.5)]);
    add("cubic_geo", &[("q", 3.0), ("beta", 0.4), ("delta", 0.3), ("eps", -0.2), ("alpha", 1.5)]);
    add("cubic_caseI", &[("delta", 1.0), ("eps", 0.0)]);
    add("cubic_caseII", &[("delta", -2.0), ("beta", 1.0)]);
    add("cubic_caseIII", &[("beta", -1.499), ("eps", -1.499)]);
    add("cubic_caseIV", &[("beta", -2.0), ("eps", 1.0)]);
    add("cubic_caseIV", &[("beta", 3.0), ("eps", 3.0), ("q", 5.0)]);
    add("cubic_G3", &[("beta", 0.5)]);
    add("cubic_spline_family", &[("beta", -0.05), ("q", 19.0)]);
    add("cubic_spline_family", &[("beta", 2.0), ("q", 8.0), ("spacing", 0.25)]);
    out
}

fn properties() -> Report {
    let config = TestConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut problems = Vec::new();

    // partition of unity
    let mut certified = 0;
    for (name, space) in corpus() {
        let basis = match global_bernstein_basis(&space, &config) {
            Ok(b) => b,
            Err(e) => {
                problems.push(format!("{name}: {e}"));
                continue;
            }
        };
        certified += 1;
        let (a, b) = (space.partition().a(), space.partition().b());
        let worst = (0..1000)
            .map(|_| {
                let x = rng.gen_range(a..=b);
                let side = if rng.gen_bool(0.5) { Side::Left } else { Side::Right };
                (basis.eval(x, side).unwrap().iter().sum::<f64>() - 1.0).abs()
            })
            .fold(0.0f64, f64::max);
        if worst > UNITY_TOL {
            problems.push(format!("{name}: unity error {worst:e}"));
        }
    }

    // endpoint multiplicities of the local bases
    let mut sections: Vec<SectionSpace> = corpus()
        .into_iter()
        .flat_map(|(_, s)| s.sections().to_vec())
        .collect();
    sections.extend(thth(5.0, 1.0).unwrap().sections().iter().cloned());
    sections.extend(cos_sin_pair(1.2).unwrap().sections().iter().cloned());
    let mut worst_mult = 0.0f64;
    for s in &sections {
        let basis = local_bernstein_basis(s).unwrap();
        let n = basis.n();
        for p in 0..n {
            let left = basis.eval(s.lo(), p).unwrap();
            let right = basis.eval(s.hi(), p).unwrap();
            let scale = left.iter().chain(&right).fold(1.0f64, |m, v| m.max(v.abs()));
            for i in 0..=n {
                if p < i {
                    worst_mult = worst_mult.max(left[i].abs() / scale);
                }
                if p < n - i {
                    worst_mult = worst_mult.max(right[i].abs() / scale);
                }
            }
        }
    }
    if worst_mult > MULTIPLICITY_TOL {
        problems.push(format!("multiplicity residual {worst_mult:e}"));
    }

    // in-place lowering against the direct formula
    let mut worst_iter = 0.0f64;
    for _ in 0..100 {
        let size = rng.gen_range(2..=7);
        let sections = rng.gen_range(1..=6);
        let g = GammaTensor::from_fn(0, size, sections, |i, k, r| {
            let structural = (k == 0 && r < i) || (k == sections - 1 && r > i);
            if structural {
                0.0
            } else {
                rng.gen_range(0.01..2.0)
            }
        });
        let fast = iterate_gamma(&g).unwrap();
        for k in 0..sections {
            for i in 0..size - 1 {
                for r in 0..size - 1 {
                    let tail = |c: usize| (i + 1..size).map(|j| g.get(j, k, c)).sum::<f64>();
                    let total = |c: usize| (0..size).map(|j| g.get(j, k, c)).sum::<f64>();
                    let naive = tail(r + 1) / total(r + 1) - tail(r) / total(r);
                    worst_iter = worst_iter.max((fast.get(i, k, r) - naive).abs());
                }
            }
        }
    }
    if worst_iter > ITERATION_TOL {
        problems.push(format!("in-place lowering differs by {worst_iter:e}"));
    }

    // identity-connected cubics against de Casteljau
    let space = Family::by_name("cubic_geo").unwrap().generate(&bind(&[("q", 2.0)])).unwrap();
    let pts = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![1.0, 0.0]];
    let curve = BezierCurve::new(global_bernstein_basis(&space, &config).unwrap(), pts.clone()).unwrap();
    let mut worst_curve = 0.0f64;
    for s in curve.sample(301).unwrap() {
        let t = s.x / 3.0;
        let mut work = pts.clone();
        for level in 1..4 {
            for j in 0..4 - level {
                for c in 0..2 {
                    work[j][c] = (1.0 - t) * work[j][c] + t * work[j + 1][c];
                }
            }
        }
        for c in 0..2 {
            worst_curve = worst_curve.max((s.point[c] - work[0][c]).abs());
        }
    }
    if worst_curve > CLASSICAL_TOL {
        problems.push(format!("de Casteljau mismatch {worst_curve:e}"));
    }

    Report::new(
        problems.is_empty(),
        format!(
            "{certified} certified spaces; multiplicity {worst_mult:.1e}, lowering {worst_iter:.1e}, curve {worst_curve:.1e}; {problems:?}"
        ),
    )
}

fn main() {
    assert_eq!(TestConfig::default().tol, DEFAULT_TOL);
    type Criterion = (&'static str, Duration, fn() -> Report);
    let criteria: [Criterion; 8] = [
        ("1 THTH coefficient table and T1 verdict", Duration::from_secs(1), table_reproduction),
        ("2 q=1 cubic analytic region, 61^3 grid", Duration::from_secs(120), q1_analytic_region),
        ("3a Case I region", Duration::from_secs(120), case_one),
        ("3b Case III region", Duration::from_secs(120), case_three),
        ("3c Case IV region", Duration::from_secs(120), case_four),
        ("4 spline-family brackets", Duration::from_secs(60), spline_brackets),
        ("5 THTH(5,1) and cos/sin spot checks", Duration::from_secs(60), spot_checks),
        ("6 property suites", Duration::from_secs(120), properties),
    ];
    let mut failures = 0;
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let report = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let passed = report.passed && in_time;
        if !passed {
            failures += 1;
        }
        println!(
            "{} [{name}] {} ({:.2}s, limit {}s{})",
            if passed { "PASS" } else { "FAIL" },
            report.detail,
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", over time" }
        );
    }
    println!("{} criteria, {failures} failed", criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
