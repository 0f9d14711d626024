//! Grid scans of a family's parameter space and boundary bisection.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::ecptest::{good_for_design, run_test, Stage, TestConfig, TestOutcome};
use crate::error::{Error, Result};
use crate::families::{Bindings, Family};

/// Which question a scan asks of each space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Mode {
    Ecp,
    #[default]
    Design,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Ecp => "ecp",
            Mode::Design => "design",
        }
    }

    pub fn run(self, space: &crate::pwspace::PWSpace, config: &TestConfig) -> Result<TestOutcome> {
        match self {
            Mode::Ecp => run_test(space, config),
            Mode::Design => good_for_design(space, config),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ecp" => Ok(Mode::Ecp),
            "design" | "good_for_design" => Ok(Mode::Design),
            other => Err(Error::Precondition(format!("unknown mode `{other}`"))),
        }
    }
}

/// Equally spaced values `min, min + step, ...` up to `max`.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Axis {
    pub fn new(name: impl Into<String>, min: f64, max: f64, step: f64) -> Result<Self> {
        let name = name.into();
        if !(min.is_finite() && max.is_finite() && step.is_finite()) {
            return Err(Error::InvalidGrid(format!("axis `{name}` has non-finite bounds")));
        }
        if !(step > 0.0) {
            return Err(Error::InvalidGrid(format!("axis `{name}` needs a positive step")));
        }
        if max < min {
            return Err(Error::InvalidGrid(format!("axis `{name}` is empty: {min} > {max}")));
        }
        Ok(Axis { name, min, max, step })
    }

    pub fn len(&self) -> usize {
        ((self.max - self.min) / self.step).round() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, j: usize) -> f64 {
        self.min + j as f64 * self.step
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|j| self.value(j))
    }
}

/// Classification of one grid node.
#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome {
    Good,
    T0System,
    T0Positivity,
    T1Positivity { p: usize },
    /// A section is not an EC-space on its interval.
    NotPec(String),
    /// The generator or test rejected the parameters.
    Invalid(String),
}

impl CellOutcome {
    pub fn code(&self) -> &'static str {
        match self {
            CellOutcome::Good => "good",
            CellOutcome::T0System => "t0_system",
            CellOutcome::T0Positivity => "t0_positivity",
            CellOutcome::T1Positivity { .. } => "t1_positivity",
            CellOutcome::NotPec(_) => "not_pec",
            CellOutcome::Invalid(_) => "invalid",
        }
    }

    pub fn is_good(&self) -> bool {
        matches!(self, CellOutcome::Good)
    }

    pub fn level(&self) -> Option<usize> {
        match self {
            CellOutcome::T1Positivity { p } => Some(*p),
            _ => None,
        }
    }
}

impl fmt::Display for CellOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellOutcome::T1Positivity { p } => write!(f, "t1_positivity(p={p})"),
            other => f.write_str(other.code()),
        }
    }
}

/// Result of testing one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub outcome: CellOutcome,
    /// Where the test stopped, `i:k:r` for positivity failures, `i` for
    /// unreliable systems; empty otherwise.
    pub stage: String,
    pub min_coeff: Option<f64>,
}

impl Evaluation {
    fn from_outcome(o: &TestOutcome) -> Self {
        let (outcome, stage) = match o.stage {
            Stage::Completed => (CellOutcome::Good, String::new()),
            Stage::T0System { i, .. } => (CellOutcome::T0System, format!("{i}")),
            Stage::T0Positivity { i, k, r, .. } => (CellOutcome::T0Positivity, format!("{i}:{k}:{r}")),
            Stage::T1Positivity { p, i, k, r, .. } => {
                (CellOutcome::T1Positivity { p }, format!("{i}:{k}:{r}"))
            }
        };
        Evaluation { outcome, stage, min_coeff: o.min_coeff() }
    }

    fn from_error(e: Error) -> Self {
        let outcome = match e {
            Error::NotECSection { .. } => CellOutcome::NotPec(e.to_string()),
            other => CellOutcome::Invalid(other.to_string()),
        };
        Evaluation { outcome, stage: String::new(), min_coeff: None }
    }
}

/// Generates and tests one point; failures become cell outcomes.
pub fn evaluate(family: &Family, bindings: &Bindings, mode: Mode, config: &TestConfig) -> Evaluation {
    match family.generate(bindings).and_then(|s| mode.run(&s, config)) {
        Ok(o) => Evaluation::from_outcome(&o),
        Err(e) => Evaluation::from_error(e),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// One value per axis, in axis order.
    pub values: Vec<f64>,
    pub eval: Evaluation,
}

/// Per-node outcomes of a grid scan; the first axis varies slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMap {
    pub family: String,
    pub mode: Mode,
    pub fixed: Bindings,
    pub axes: Vec<Axis>,
    pub cells: Vec<Cell>,
}

impl RegionMap {
    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Axis::len).collect()
    }

    pub fn cell(&self, index: &[usize]) -> Option<&Cell> {
        if index.len() != self.axes.len() {
            return None;
        }
        let mut flat = 0;
        for (j, ax) in index.iter().zip(&self.axes) {
            if *j >= ax.len() {
                return None;
            }
            flat = flat * ax.len() + j;
        }
        self.cells.get(flat)
    }

    pub fn count(&self, code: &str) -> usize {
        self.cells.iter().filter(|c| c.eval.outcome.code() == code).count()
    }
}

fn grid_point(axes: &[Axis], mut flat: usize) -> Vec<f64> {
    let mut out = vec![0.0; axes.len()];
    for (slot, ax) in out.iter_mut().zip(axes).rev() {
        *slot = ax.value(flat % ax.len());
        flat /= ax.len();
    }
    out
}

fn check_axes(family: &Family, fixed: &Bindings, axes: &[Axis]) -> Result<()> {
    family.resolve(fixed)?;
    for (j, ax) in axes.iter().enumerate() {
        let spec = family.param(&ax.name).ok_or_else(|| Error::UnknownParameter {
            family: family.name.to_string(),
            param: ax.name.clone(),
        })?;
        if fixed.contains_key(&ax.name) || axes[..j].iter().any(|o| o.name == ax.name) {
            return Err(Error::InvalidGrid(format!("parameter `{}` is bound twice", ax.name)));
        }
        for v in [ax.min, ax.value(ax.len() - 1)] {
            if !spec.admits(v) {
                return Err(Error::ParameterRange { param: ax.name.clone(), value: v });
            }
        }
    }
    Ok(())
}

/// Tests every grid node. `jobs = None` uses the global worker pool; the
/// result does not depend on the number of workers.
pub fn scan(
    family: &Family,
    fixed: &Bindings,
    axes: &[Axis],
    mode: Mode,
    config: &TestConfig,
    jobs: Option<usize>,
) -> Result<RegionMap> {
    config.validate()?;
    check_axes(family, fixed, axes)?;
    let total = axes.iter().try_fold(1usize, |acc, ax| acc.checked_mul(ax.len()));
    let total = total.ok_or_else(|| Error::InvalidGrid("grid is too large".into()))?;

    let run = || -> Vec<Cell> {
        (0..total)
            .into_par_iter()
            .map(|flat| {
                let values = grid_point(axes, flat);
                let mut b = fixed.clone();
                for (ax, v) in axes.iter().zip(&values) {
                    b.insert(ax.name.clone(), *v);
                }
                Cell { values, eval: evaluate(family, &b, mode, config) }
            })
            .collect()
    };
    let cells = match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::Precondition(format!("cannot start worker pool: {e}")))?
            .install(run),
        None => run(),
    };
    Ok(RegionMap {
        family: family.name.to_string(),
        mode,
        fixed: fixed.clone(),
        axes: axes.to_vec(),
        cells,
    })
}

/// Default bracket width for [`bisect_boundary`].
pub const DEFAULT_BRACKET_WIDTH: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub lo_eval: Evaluation,
    pub hi_eval: Evaluation,
    pub iterations: usize,
}

impl Bracket {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Bisects `free` on `[lo, hi]` until the interval where the good/not-good
/// classification changes is at most `width` wide or `max_iters` is reached.
#[allow(clippy::too_many_arguments)]
pub fn bisect_boundary(
    family: &Family,
    fixed: &Bindings,
    free: &str,
    lo: f64,
    hi: f64,
    mode: Mode,
    config: &TestConfig,
    width: f64,
    max_iters: usize,
) -> Result<Bracket> {
    config.validate()?;
    let spec = family.param(free).ok_or_else(|| Error::UnknownParameter {
        family: family.name.to_string(),
        param: free.to_string(),
    })?;
    if fixed.contains_key(free) {
        return Err(Error::InvalidGrid(format!("parameter `{free}` is bound twice")));
    }
    if !(lo < hi) || !spec.admits(lo) || !spec.admits(hi) {
        return Err(Error::Precondition(format!("invalid bisection interval [{lo}, {hi}]")));
    }
    if !(width > 0.0) {
        return Err(Error::Precondition("bracket width must be positive".into()));
    }
    family.resolve(fixed)?;
    let at = |x: f64| {
        let mut b = fixed.clone();
        b.insert(free.to_string(), x);
        evaluate(family, &b, mode, config)
    };
    let (mut lo, mut hi) = (lo, hi);
    let (mut lo_eval, mut hi_eval) = (at(lo), at(hi));
    if lo_eval.outcome.is_good() == hi_eval.outcome.is_good() {
        let what = if lo_eval.outcome.is_good() { "good" } else { "not good" };
        return Err(Error::NoBracket(what.to_string()));
    }
    let mut iterations = 0;
    while hi - lo > width && iterations < max_iters {
        let mid = 0.5 * (lo + hi);
        let e = at(mid);
        if e.outcome.is_good() == lo_eval.outcome.is_good() {
            lo = mid;
            lo_eval = e;
        } else {
            hi = mid;
            hi_eval = e;
        }
        iterations += 1;
    }
    Ok(Bracket { lo, hi, lo_eval, hi_eval, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_counts() {
        assert_eq!(Axis::new("b", -4.0, 2.0, 0.1).unwrap().len(), 61);
        assert_eq!(Axis::new("b", 0.05, 6.5, 0.05).unwrap().len(), 130);
        assert_eq!(Axis::new("b", 1.0, 1.0, 0.5).unwrap().len(), 1);
        assert!(Axis::new("b", 1.0, 0.0, 0.5).is_err());
        assert!(Axis::new("b", 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn grid_order_is_row_major() {
        let axes = vec![Axis::new("x", 0.0, 1.0, 1.0).unwrap(), Axis::new("y", 0.0, 2.0, 1.0).unwrap()];
        let pts: Vec<_> = (0..6).map(|f| grid_point(&axes, f)).collect();
        assert_eq!(pts[0], vec![0.0, 0.0]);
        assert_eq!(pts[2], vec![0.0, 2.0]);
        assert_eq!(pts[3], vec![1.0, 0.0]);
    }

    #[test]
    fn scan_rejects_bad_axes() {
        let f = Family::by_name("cubic_caseIV").unwrap();
        let cfg = TestConfig::default();
        let ax = |n: &str| vec![Axis::new(n, 0.0, 1.0, 0.5).unwrap()];
        assert!(matches!(
            scan(&f, &Bindings::new(), &ax("delta"), Mode::Design, &cfg, Some(1)),
            Err(Error::UnknownParameter { .. })
        ));
        let mut fixed = Bindings::new();
        fixed.insert("beta".into(), 0.0);
        assert!(scan(&f, &fixed, &ax("beta"), Mode::Design, &cfg, Some(1)).is_err());
    }

    #[test]
    fn case_four_spot_values() {
        let f = Family::by_name("cubic_caseIV").unwrap();
        let axes = vec![
            Axis::new("beta", -3.5, 0.0, 3.5).unwrap(),
            Axis::new("eps", -3.5, 0.0, 3.5).unwrap(),
        ];
        let map = scan(&f, &Bindings::new(), &axes, Mode::Design, &TestConfig::default(), Some(2)).unwrap();
        assert_eq!(map.cells.len(), 4);
        assert!(!map.cell(&[0, 0]).unwrap().eval.outcome.is_good());
        assert!(map.cell(&[1, 1]).unwrap().eval.outcome.is_good());
    }

    #[test]
    fn bisection_needs_a_sign_change() {
        let f = Family::by_name("cubic_spline_family").unwrap();
        let r = bisect_boundary(&f, &Bindings::new(), "beta", 0.0, 1.0, Mode::Design, &TestConfig::default(), 1e-4, 100);
        assert!(matches!(r, Err(Error::NoBracket(_))));
        let b = bisect_boundary(&f, &Bindings::new(), "beta", -4.0, 0.0, Mode::Design, &TestConfig::default(), 1e-4, 100)
            .unwrap();
        assert!(b.width() <= 1e-4);
        assert!(b.lo <= -3.0 && -3.0 <= b.hi);
    }
}
