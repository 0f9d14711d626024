//! The ECP test: build a global Bernstein-like candidate basis from the local
//! ones (T0.1), check the sign pattern of its local coefficients (T0.2), then
//! repeatedly lower the dimension through piecewise generalised derivatives
//! and re-check (T1).

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, DEFAULT_KAPPA_MAX, DEFAULT_PIVOT_FLOOR};
use crate::pwspace::PWSpace;
use crate::sections::{sign_pow, LocalBasisCheck, LocalBernsteinBasis};

/// Default positivity threshold for coefficients.
pub const DEFAULT_TOL: f64 = 1e-30;

#[derive(Debug, Clone, PartialEq)]
pub struct TestConfig {
    /// A tested coefficient passes iff it is `> tol`.
    pub tol: f64,
    pub kappa_max: f64,
    pub pivot_floor: f64,
    /// Keep every level of the coefficient tensor in the outcome.
    pub record_trace: bool,
    pub local: LocalBasisCheck,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            tol: DEFAULT_TOL,
            kappa_max: DEFAULT_KAPPA_MAX,
            pivot_floor: DEFAULT_PIVOT_FLOOR,
            record_trace: false,
            local: LocalBasisCheck::default(),
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Precondition(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.kappa_max >= 1.0) {
            return Err(Error::Precondition(format!(
                "kappa_max must be at least 1, got {}",
                self.kappa_max
            )));
        }
        Ok(())
    }
}

/// Coefficients `gamma_{i,k,r}` of the global basis elements `V_i` in the
/// local bases `V_{k,r}`, at iteration level `p`.
///
/// Indices run over `i, r = 0..=n-p` and `k = 0..=q`.
#[derive(Clone, PartialEq)]
pub struct GammaTensor {
    level: usize,
    size: usize,
    sections: usize,
    values: Vec<f64>,
}

impl GammaTensor {
    /// Zero tensor with `size = n - p + 1` and `sections = q + 1`.
    pub fn zeros(level: usize, size: usize, sections: usize) -> Self {
        assert!(size >= 1 && sections >= 1, "empty coefficient tensor");
        GammaTensor {
            level,
            size,
            sections,
            values: vec![0.0; size * size * sections],
        }
    }

    /// Builds a tensor from `f(i, k, r)`.
    pub fn from_fn(
        level: usize,
        size: usize,
        sections: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut g = Self::zeros(level, size, sections);
        for k in 0..sections {
            for i in 0..size {
                for r in 0..size {
                    g.set(i, k, r, f(i, k, r));
                }
            }
        }
        g
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Number of basis elements (and of local coefficients), `n - p + 1`.
    pub fn size(&self) -> usize {
        self.size
    }

    /// `q + 1`.
    pub fn sections(&self) -> usize {
        self.sections
    }

    fn idx(&self, i: usize, k: usize, r: usize) -> usize {
        debug_assert!(i < self.size && r < self.size && k < self.sections);
        (k * self.size + i) * self.size + r
    }

    pub fn get(&self, i: usize, k: usize, r: usize) -> f64 {
        self.values[self.idx(i, k, r)]
    }

    pub fn set(&mut self, i: usize, k: usize, r: usize, v: f64) {
        let idx = self.idx(i, k, r);
        self.values[idx] = v;
    }

    /// Entries forced to zero by the endpoint multiplicities:
    /// `r < i` on the first interval, `r > i` on the last.
    pub fn is_structural_zero(&self, i: usize, k: usize, r: usize) -> bool {
        (k == 0 && r < i) || (k + 1 == self.sections && r > i)
    }

    /// True when every structural zero is exactly zero.
    pub fn has_structural_zeros(&self) -> bool {
        self.tested_or_zero().all(|(tested, v)| tested || v == 0.0)
    }

    fn tested_or_zero(&self) -> impl Iterator<Item = (bool, f64)> + '_ {
        (0..self.sections).flat_map(move |k| {
            (0..self.size).flat_map(move |i| {
                (0..self.size).map(move |r| (!self.is_structural_zero(i, k, r), self.get(i, k, r)))
            })
        })
    }

    /// Smallest coefficient outside the structural-zero pattern.
    pub fn min_tested(&self) -> f64 {
        self.tested_or_zero()
            .filter(|(t, _)| *t)
            .map(|(_, v)| v)
            .fold(f64::INFINITY, f64::min)
    }
}

impl fmt::Debug for GammaTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "GammaTensor(p={}, size={}, sections={})", self.level, self.size, self.sections)?;
        for k in 0..self.sections {
            writeln!(f, "  k={k}")?;
            for i in 0..self.size {
                let row: Vec<String> = (0..self.size).map(|r| format!("{:.5e}", self.get(i, k, r))).collect();
                writeln!(f, "    {}", row.join("  "))?;
            }
        }
        Ok(())
    }
}

/// Position of the first coefficient failing a positivity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureLocation {
    pub i: usize,
    pub k: usize,
    pub r: usize,
    pub value: f64,
}

/// Where the test stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    /// T0.1: the system for element `i` is singular or too ill-conditioned.
    T0System { i: usize, condition: f64, pivot_ratio: f64 },
    /// T0.2: a coefficient of the initial global basis is not positive.
    T0Positivity { i: usize, k: usize, r: usize, value: f64 },
    /// T1.1 at level `p`.
    T1Positivity { p: usize, i: usize, k: usize, r: usize, value: f64 },
    Completed,
}

impl Stage {
    /// Short machine-readable name.
    pub fn code(&self) -> &'static str {
        match self {
            Stage::T0System { .. } => "t0_system",
            Stage::T0Positivity { .. } => "t0_positivity",
            Stage::T1Positivity { .. } => "t1_positivity",
            Stage::Completed => "completed",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::T0System { i, condition, pivot_ratio } => write!(
                f,
                "T0.1 system for V_{i} (condition {condition:.3e}, pivot ratio {pivot_ratio:.3e})"
            ),
            Stage::T0Positivity { i, k, r, value } => {
                write!(f, "T0.2 gamma[{i},{k},{r}] = {value:.6e}")
            }
            Stage::T1Positivity { p, i, k, r, value } => {
                write!(f, "T1.1 p={p} gamma[{i},{k},{r}] = {value:.6e}")
            }
            Stage::Completed => f.write_str("completed"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Ecp,
    NotEcp,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    /// Minimum tested coefficient per level reached.
    pub level_min: Vec<f64>,
    /// Condition estimate of each T0.1 system solved.
    pub conditions: Vec<f64>,
    pub tol: f64,
    /// Every level of the coefficient tensor, when tracing.
    pub trace: Vec<GammaTensor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestOutcome {
    pub stage: Stage,
    pub diagnostics: Diagnostics,
}

impl TestOutcome {
    pub fn verdict(&self) -> Verdict {
        if self.stage == Stage::Completed {
            Verdict::Ecp
        } else {
            Verdict::NotEcp
        }
    }

    pub fn is_ecp(&self) -> bool {
        self.verdict() == Verdict::Ecp
    }

    /// Smallest coefficient tested at the last level reached.
    pub fn min_coeff(&self) -> Option<f64> {
        self.diagnostics.level_min.last().copied()
    }
}

/// Initial global Bernstein-like candidate basis with solve diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalCandidate {
    pub gamma: GammaTensor,
    pub conditions: Vec<f64>,
}

/// Failure of T0.1 for one element.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemFailure {
    pub i: usize,
    pub condition: f64,
    pub pivot_ratio: f64,
}

/// Solves, for each `i`, the `(q+1)(n+1)` system for the local coefficients
/// of the piecewise `V_i` with `i` zeros at `a`, `n-i` zeros at `b`, one unit
/// normalization and the connection conditions at every interior knot.
///
/// Unknowns are ordered `(k, r)` lexicographically; equations are the pinned
/// zeros, the normalization, then connection rows by knot and derivative
/// order. Connection rows are equilibrated to unit max-norm.
pub fn build_global_basis(
    space: &PWSpace,
    bases: &[LocalBernsteinBasis],
    config: &TestConfig,
) -> Result<std::result::Result<GlobalCandidate, SystemFailure>> {
    let n = space.n();
    let q = space.q();
    if bases.len() != q + 1 || bases.iter().any(|b| b.n() != n) {
        return Err(Error::Dimension(format!(
            "need {} local bases of dimension {}",
            q + 1,
            n + 1
        )));
    }
    let dim = n + 1;
    let size = (q + 1) * dim;
    let var = |k: usize, r: usize| k * dim + r;

    // connection rows do not depend on i
    let mut connection = DenseMatrix::zeros(q * dim, size);
    for k in 1..=q {
        let m = space.matrices()[k - 1].matrix();
        let right_prev = bases[k - 1].right_derivs();
        let left_next = bases[k].left_derivs();
        for p in 0..dim {
            let row = (k - 1) * dim + p;
            for r in 0..dim {
                connection[(row, var(k, r))] = left_next[(r, p)];
                let mut s = 0.0;
                for t in 0..=p {
                    s += m[(p, t)] * right_prev[(r, t)];
                }
                connection[(row, var(k - 1, r))] = -s;
            }
            let scale = connection.row(row).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if scale > 0.0 {
                connection.row_mut(row).iter_mut().for_each(|v| *v /= scale);
            }
        }
    }

    let mut gamma = GammaTensor::zeros(0, dim, q + 1);
    let mut conditions = Vec::with_capacity(dim);
    for i in 0..dim {
        let mut a = DenseMatrix::zeros(size, size);
        let mut b = vec![0.0; size];
        let mut row = 0;
        for r in 0..i {
            a[(row, var(0, r))] = 1.0;
            row += 1;
        }
        for r in i + 1..dim {
            a[(row, var(q, r))] = 1.0;
            row += 1;
        }
        if i <= n / 2 {
            a[(row, var(0, i))] = 1.0;
            b[row] = 1.0 / bases[0].left_derivs()[(i, i)];
        } else {
            a[(row, var(q, i))] = 1.0;
            b[row] = sign_pow(n - i) / bases[q].right_derivs()[(i, n - i)];
        }
        row += 1;
        for c in 0..q * dim {
            a.row_mut(row + c).copy_from_slice(connection.row(c));
        }

        let report = match linalg::solve(&a, &b) {
            Ok(rep) => rep,
            Err(Error::SingularSystem { .. }) => {
                return Ok(Err(SystemFailure { i, condition: f64::INFINITY, pivot_ratio: 0.0 }))
            }
            Err(e) => return Err(e),
        };
        conditions.push(report.condition_estimate);
        let failure = SystemFailure {
            i,
            condition: report.condition_estimate,
            pivot_ratio: report.pivot_ratio,
        };
        if !linalg::is_reliable_with(&report, config.kappa_max, config.pivot_floor) {
            return Ok(Err(failure));
        }
        let x = &report.solution;
        let xmax = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let residual = a
            .mul_vec(x)
            .iter()
            .zip(&b)
            .fold(0.0f64, |m, (ax, bi)| m.max((ax - bi).abs()));
        if residual > 1e-8 * (xmax + b.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
            return Ok(Err(failure));
        }
        for k in 0..=q {
            for r in 0..dim {
                gamma.set(i, k, r, x[var(k, r)]);
            }
        }
    }
    Ok(Ok(GlobalCandidate { gamma, conditions }))
}

/// First tested coefficient `<= tol`, scanning intervals, then elements,
/// then coefficients. Structural zeros are exempt.
pub fn check_positivity(gamma: &GammaTensor, tol: f64) -> Option<FailureLocation> {
    let m = gamma.size();
    let last = gamma.sections() - 1;
    for k in 0..gamma.sections() {
        for i in 0..m {
            let r_lo = if k == 0 { i } else { 0 };
            let r_hi = if k == last { i } else { m - 1 };
            for r in r_lo..=r_hi {
                let value = gamma.get(i, k, r);
                if !(value > tol) {
                    return Some(FailureLocation { i, k, r, value });
                }
            }
        }
    }
    None
}

/// One dimension-lowering step: coefficients of the next global basis in
/// the next local bases,
///
/// `g'[i,k,r] = S[i+1,k,r+1] / S[0,k,r+1] - S[i+1,k,r] / S[0,k,r]`,
///
/// with `S[j,k,r] = sum_{l >= j} g[l,k,r]`. Partial sums are formed in place.
pub fn iterate_gamma(gamma: &GammaTensor) -> Result<GammaTensor> {
    let m = gamma.size();
    if m < 2 {
        return Err(Error::Precondition("cannot lower a one-dimensional level".into()));
    }
    let mut next = GammaTensor::zeros(gamma.level + 1, m - 1, gamma.sections);
    let mut block = vec![0.0; m * m];
    for k in 0..gamma.sections {
        block.copy_from_slice(&gamma.values[k * m * m..(k + 1) * m * m]);
        let at = |i: usize, r: usize| i * m + r;
        for i in (0..m - 1).rev() {
            for r in 0..m {
                block[at(i, r)] += block[at(i + 1, r)];
            }
        }
        for r in 0..m {
            let total = block[at(0, r)];
            if total == 0.0 || !total.is_finite() {
                return Err(Error::InternalInconsistency(format!(
                    "column sum of coefficients vanishes at k={k}, r={r}"
                )));
            }
            for i in 1..m {
                block[at(i - 1, r)] = block[at(i, r)] / total;
            }
        }
        for i in 0..m - 1 {
            for r in 0..m - 1 {
                next.set(i, k, r, block[at(i, r + 1)] - block[at(i, r)]);
            }
        }
    }
    Ok(next)
}

/// Runs T0 and T1 on `space` and reports where it stopped.
///
/// Sections that are not numerically EC-spaces on their interval are
/// reported as [`Error::NotECSection`].
pub fn run_test(space: &PWSpace, config: &TestConfig) -> Result<TestOutcome> {
    config.validate()?;
    let bases = space.local_bases(&config.local)?;
    let n = space.n();
    let mut diagnostics = Diagnostics { tol: config.tol, ..Diagnostics::default() };
    let finish = |stage: Stage, diagnostics: Diagnostics| Ok(TestOutcome { stage, diagnostics });

    let candidate = match build_global_basis(space, &bases, config)? {
        Ok(c) => c,
        Err(fail) => {
            return finish(
                Stage::T0System { i: fail.i, condition: fail.condition, pivot_ratio: fail.pivot_ratio },
                diagnostics,
            )
        }
    };
    diagnostics.conditions = candidate.conditions;
    let mut gamma = candidate.gamma;

    for p in 0..n.max(1) {
        if p > 0 {
            gamma = iterate_gamma(&gamma)?;
            debug_assert!(gamma.has_structural_zeros());
        }
        diagnostics.level_min.push(gamma.min_tested());
        if config.record_trace {
            diagnostics.trace.push(gamma.clone());
        }
        if let Some(FailureLocation { i, k, r, value }) = check_positivity(&gamma, config.tol) {
            let stage = if p == 0 {
                Stage::T0Positivity { i, k, r, value }
            } else {
                Stage::T1Positivity { p, i, k, r, value }
            };
            return finish(stage, diagnostics);
        }
    }
    finish(Stage::Completed, diagnostics)
}

/// Runs the test on `DE`: a space containing constants is good for design
/// iff its derivative space is an ECP-space.
pub fn good_for_design(space: &PWSpace, config: &TestConfig) -> Result<TestOutcome> {
    if !space.contains_constants() {
        return Err(Error::NotApplicable("the space does not contain constants".into()));
    }
    if space.n() == 0 {
        return Err(Error::NotApplicable("the space is one-dimensional".into()));
    }
    run_test(&space.derivative_space()?, config)
}
