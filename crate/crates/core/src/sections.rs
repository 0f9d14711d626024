//! Section-spaces on a single knot interval and their local Bernstein-like
//! bases.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, LuFactors, DEFAULT_KAPPA_MAX, DEFAULT_PIVOT_FLOOR};

/// A basis function given by closed-form derivatives: `f(x, order)`.
/// Returns `None` when the requested order is not available.
pub type BasisFn = Arc<dyn Fn(f64, usize) -> Option<f64> + Send + Sync>;

/// Which function system spans a section-space.
///
/// Built-in systems are evaluated in the local variable `s = x - origin`,
/// which spans the same space for every origin since each system is
/// translation invariant.
#[derive(Clone)]
pub enum SectionKind {
    /// `1, s, ..., s^degree`.
    Polynomial { degree: usize },
    /// `1, s, ..., s^(poly_terms-1), cos s, sin s`.
    Trigonometric { poly_terms: usize },
    /// `1, s, ..., s^(poly_terms-1), cosh s, sinh s`.
    Hyperbolic { poly_terms: usize },
    /// User supplied functions of the absolute variable `x`.
    Custom { name: String, functions: Vec<BasisFn> },
    /// Basis `u_{j+order}^{(order)} / order!` of a parent system, i.e. the
    /// `order`-fold derivative space with the leading functions dropped.
    Derived { parent: Box<SectionKind>, order: usize },
}

impl SectionKind {
    /// `{1, x, x^2, cos x, sin x}`.
    pub fn trigonometric_n4() -> Self {
        SectionKind::Trigonometric { poly_terms: 3 }
    }

    /// `{1, x, x^2, cosh x, sinh x}`.
    pub fn hyperbolic_n4() -> Self {
        SectionKind::Hyperbolic { poly_terms: 3 }
    }

    pub fn dim(&self) -> usize {
        match self {
            SectionKind::Polynomial { degree } => degree + 1,
            SectionKind::Trigonometric { poly_terms } | SectionKind::Hyperbolic { poly_terms } => {
                poly_terms + 2
            }
            SectionKind::Custom { functions, .. } => functions.len(),
            SectionKind::Derived { parent, order } => parent.dim().saturating_sub(*order),
        }
    }

    fn is_custom_based(&self) -> bool {
        match self {
            SectionKind::Custom { .. } => true,
            SectionKind::Derived { parent, .. } => parent.is_custom_based(),
            _ => false,
        }
    }

    /// `d^order u_m / dx^order` at `x`; `s = x - origin` for built-ins.
    fn eval(&self, m: usize, x: f64, s: f64, order: usize) -> Result<f64> {
        Ok(match self {
            SectionKind::Polynomial { .. } => monomial_deriv(m, s, order),
            SectionKind::Trigonometric { poly_terms } => {
                if m < *poly_terms {
                    monomial_deriv(m, s, order)
                } else if m == *poly_terms {
                    // cos^{(j)} cycles cos, -sin, -cos, sin
                    match order % 4 {
                        0 => s.cos(),
                        1 => -s.sin(),
                        2 => -s.cos(),
                        _ => s.sin(),
                    }
                } else {
                    match order % 4 {
                        0 => s.sin(),
                        1 => s.cos(),
                        2 => -s.sin(),
                        _ => -s.cos(),
                    }
                }
            }
            SectionKind::Hyperbolic { poly_terms } => {
                if m < *poly_terms {
                    monomial_deriv(m, s, order)
                } else if (m == *poly_terms) == order.is_multiple_of(2) {
                    s.cosh()
                } else {
                    s.sinh()
                }
            }
            SectionKind::Custom { functions, .. } => {
                functions[m](x, order).ok_or(Error::Capability { function: m, order })?
            }
            SectionKind::Derived { parent, order: d } => {
                parent.eval(m + d, x, s, order + d)? / factorial(*d)
            }
        })
    }

    /// Structural answer to "is the first basis function the constant 1";
    /// `None` when only a numerical check can tell.
    fn unit_first_structural(&self) -> Option<bool> {
        match self {
            SectionKind::Polynomial { .. } => Some(true),
            SectionKind::Trigonometric { poly_terms } | SectionKind::Hyperbolic { poly_terms } => {
                Some(*poly_terms >= 1)
            }
            SectionKind::Custom { .. } => None,
            SectionKind::Derived { parent, order } => match parent.as_ref() {
                SectionKind::Polynomial { .. } => Some(true),
                SectionKind::Trigonometric { poly_terms } | SectionKind::Hyperbolic { poly_terms } => {
                    Some(*poly_terms > *order)
                }
                _ => None,
            },
        }
    }

    pub fn name(&self) -> String {
        match self {
            SectionKind::Polynomial { degree } => format!("polynomial({degree})"),
            SectionKind::Trigonometric { poly_terms } => format!("trigonometric({poly_terms})"),
            SectionKind::Hyperbolic { poly_terms } => format!("hyperbolic({poly_terms})"),
            SectionKind::Custom { name, .. } => format!("custom({name})"),
            SectionKind::Derived { parent, order } => format!("D^{order} {}", parent.name()),
        }
    }
}

impl fmt::Debug for SectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl PartialEq for SectionKind {
    fn eq(&self, other: &Self) -> bool {
        use SectionKind::*;
        match (self, other) {
            (Polynomial { degree: a }, Polynomial { degree: b }) => a == b,
            (Trigonometric { poly_terms: a }, Trigonometric { poly_terms: b }) => a == b,
            (Hyperbolic { poly_terms: a }, Hyperbolic { poly_terms: b }) => a == b,
            (Custom { name: n1, functions: f1 }, Custom { name: n2, functions: f2 }) => {
                n1 == n2 && f1.len() == f2.len() && f1.iter().zip(f2).all(|(a, b)| Arc::ptr_eq(a, b))
            }
            (Derived { parent: p1, order: o1 }, Derived { parent: p2, order: o2 }) => {
                o1 == o2 && p1 == p2
            }
            _ => false,
        }
    }
}

fn monomial_deriv(m: usize, s: f64, order: usize) -> f64 {
    if order > m {
        return 0.0;
    }
    let mut c = 1.0;
    for t in (m - order + 1)..=m {
        c *= t as f64;
    }
    c * s.powi((m - order) as i32)
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// An (n+1)-dimensional section-space on `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionSpace {
    kind: SectionKind,
    lo: f64,
    hi: f64,
    origin: f64,
}

impl SectionSpace {
    /// Section with built-in systems evaluated at `x` itself (origin 0).
    pub fn new(kind: SectionKind, lo: f64, hi: f64) -> Result<Self> {
        Self::with_origin(kind, lo, hi, 0.0)
    }

    /// Section with built-in systems evaluated at `x - lo`.
    pub fn local(kind: SectionKind, lo: f64, hi: f64) -> Result<Self> {
        Self::with_origin(kind, lo, hi, lo)
    }

    pub fn with_origin(kind: SectionKind, lo: f64, hi: f64, origin: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && origin.is_finite()) {
            return Err(Error::InvalidSpace("section bounds must be finite".into()));
        }
        if lo >= hi {
            return Err(Error::InvalidSpace(format!(
                "section interval [{lo}, {hi}] has non-positive length"
            )));
        }
        if kind.dim() == 0 {
            return Err(Error::InvalidSpace("section-space must have dimension >= 1".into()));
        }
        let space = SectionSpace { kind, lo, hi, origin };
        space.check_wronskian()?;
        Ok(space)
    }

    fn check_wronskian(&self) -> Result<()> {
        for x in [self.lo, self.hi] {
            let w = self.derivs_at(x, self.n())?;
            let singular = match LuFactors::factor(&w) {
                Ok(lu) => lu.pivot_ratio() < DEFAULT_PIVOT_FLOOR,
                Err(_) => true,
            };
            if singular {
                return Err(Error::InvalidSpace(format!(
                    "Wronskian of {} vanishes numerically at {x}",
                    self.kind.name()
                )));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> &SectionKind {
        &self.kind
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    /// The `n` in "(n+1)-dimensional".
    pub fn n(&self) -> usize {
        self.dim() - 1
    }

    /// Copy of this section moved onto another interval, keeping the origin
    /// convention (absolute or local).
    pub fn relocated(&self, lo: f64, hi: f64) -> Result<Self> {
        let origin = if self.origin == self.lo { lo } else { self.origin };
        Self::with_origin(self.kind.clone(), lo, hi, origin)
    }

    /// Matrix with entry `(m, j) = d^j u_m / dx^j (x)` for `j <= max_order`.
    pub fn eval_basis_derivs(&self, x: f64, max_order: usize) -> Result<DenseMatrix> {
        let eps = 1e-12 * self.lo.abs().max(self.hi.abs()).max(1.0);
        if !(x >= self.lo - eps && x <= self.hi + eps) {
            return Err(Error::Domain { x, lo: self.lo, hi: self.hi });
        }
        if max_order > self.n() {
            return Err(Error::Precondition(format!(
                "derivative order {max_order} exceeds n = {}",
                self.n()
            )));
        }
        self.derivs_at(x, max_order)
    }

    /// Unchecked variant of [`eval_basis_derivs`](Self::eval_basis_derivs).
    pub(crate) fn derivs_at(&self, x: f64, max_order: usize) -> Result<DenseMatrix> {
        let dim = self.dim();
        let s = x - self.origin;
        let mut out = DenseMatrix::zeros(dim, max_order + 1);
        for m in 0..dim {
            for j in 0..=max_order {
                out[(m, j)] = self.kind.eval(m, x, s, j)?;
            }
        }
        Ok(out)
    }

    /// Values `u_m^{(order)}(x)` for all `m`.
    pub(crate) fn basis_values(&self, x: f64, order: usize) -> Result<Vec<f64>> {
        let s = x - self.origin;
        (0..self.dim()).map(|m| self.kind.eval(m, x, s, order)).collect()
    }

    /// Whether the first basis function is the constant 1.
    pub fn has_unit_first(&self) -> bool {
        if let Some(v) = self.kind.unit_first_structural() {
            return v;
        }
        let h = self.hi - self.lo;
        (0..=4).all(|t| {
            let x = self.lo + h * t as f64 / 4.0;
            let s = x - self.origin;
            let v = self.kind.eval(0, x, s, 0);
            let d = if self.n() >= 1 { self.kind.eval(0, x, s, 1) } else { Ok(0.0) };
            matches!((v, d), (Ok(v), Ok(d)) if (v - 1.0).abs() <= 1e-12 && d.abs() <= 1e-12)
        })
    }

    /// The n-dimensional space spanned by the derivatives of the nonconstant
    /// basis functions.
    pub fn derivative_section(&self) -> Result<Self> {
        if !self.has_unit_first() {
            return Err(Error::Precondition(format!(
                "{} does not start with the constant 1",
                self.kind.name()
            )));
        }
        if self.n() == 0 {
            return Err(Error::Precondition(
                "cannot differentiate a one-dimensional section-space".into(),
            ));
        }
        let kind = match &self.kind {
            SectionKind::Derived { parent, order } => SectionKind::Derived {
                parent: parent.clone(),
                order: order + 1,
            },
            other => SectionKind::Derived {
                parent: Box::new(other.clone()),
                order: 1,
            },
        };
        let out = SectionSpace { kind, ..self.clone() };
        if out.kind.is_custom_based() {
            out.check_wronskian()?;
        }
        Ok(out)
    }
}

/// Endpoint that carried the unit normalization of a local basis element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Left,
    Right,
}

/// Thresholds used when certifying a local Bernstein-like basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalBasisCheck {
    /// Interior sample count for the positivity check.
    pub samples: usize,
    /// Relative bound on derivatives required to vanish.
    pub zero_tol: f64,
    /// Relative lower bound on the first nonvanishing derivative.
    pub nonzero_tol: f64,
    pub kappa_max: f64,
    pub pivot_floor: f64,
}

impl Default for LocalBasisCheck {
    fn default() -> Self {
        LocalBasisCheck {
            samples: 200,
            zero_tol: 1e-9,
            nonzero_tol: 1e-6,
            kappa_max: DEFAULT_KAPPA_MAX,
            pivot_floor: DEFAULT_PIVOT_FLOOR,
        }
    }
}

/// Positive Bernstein-like basis `(V_{k,0}, ..., V_{k,n})` of one section
/// relative to its own interval.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBernsteinBasis {
    section: SectionSpace,
    coeffs: DenseMatrix,
    left: DenseMatrix,
    right: DenseMatrix,
    normalized_at: Vec<Endpoint>,
}

impl LocalBernsteinBasis {
    pub fn build(section: &SectionSpace, check: &LocalBasisCheck) -> Result<Self> {
        let n = section.n();
        let not_ec = |reason: String| Error::NotECSection { section: 0, reason };
        let wl = section.derivs_at(section.lo, n)?;
        let wr = section.derivs_at(section.hi, n)?;

        let mut coeffs = DenseMatrix::zeros(n + 1, n + 1);
        let mut normalized_at = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let (system, rhs, at) = hermite_system(&wl, &wr, n, i);
            let rep = linalg::solve(&system, &rhs)
                .map_err(|e| not_ec(format!("Hermite system for V_{i}: {e}")))?;
            if !linalg::is_reliable_with(&rep, check.kappa_max, check.pivot_floor) {
                return Err(not_ec(format!(
                    "Hermite system for V_{i} is ill-conditioned (condition {:.3e}, pivot ratio {:.3e})",
                    rep.condition_estimate, rep.pivot_ratio
                )));
            }
            coeffs.row_mut(i).copy_from_slice(&rep.solution);
            normalized_at.push(at);
        }

        let project = |w: &DenseMatrix| {
            DenseMatrix::from_fn(n + 1, n + 1, |i, p| {
                (0..=n).map(|m| coeffs[(i, m)] * w[(m, p)]).sum()
            })
        };
        let left = project(&wl);
        let right = project(&wr);

        for i in 0..=n {
            let scale = left.row(i).iter().chain(right.row(i)).fold(0.0f64, |a, v| a.max(v.abs()));
            for j in 0..i {
                if left[(i, j)].abs() > check.zero_tol * scale {
                    return Err(not_ec(format!(
                        "V_{i}^({j}) at left end is {:.3e}, not a zero",
                        left[(i, j)]
                    )));
                }
            }
            for j in 0..n - i {
                if right[(i, j)].abs() > check.zero_tol * scale {
                    return Err(not_ec(format!(
                        "V_{i}^({j}) at right end is {:.3e}, not a zero",
                        right[(i, j)]
                    )));
                }
            }
            // exact multiplicity, with the sign forced by interior positivity
            let lead_left = left[(i, i)];
            let lead_right = sign_pow(n - i) * right[(i, n - i)];
            if !(lead_left >= check.nonzero_tol * scale) || !(lead_right >= check.nonzero_tol * scale)
            {
                return Err(not_ec(format!(
                    "V_{i} has an extra zero or a sign change at an endpoint \
                     (leading derivatives {lead_left:.3e}, {lead_right:.3e})"
                )));
            }
        }

        let basis = LocalBernsteinBasis {
            section: section.clone(),
            coeffs,
            left,
            right,
            normalized_at,
        };
        let h = section.hi - section.lo;
        for s in 1..=check.samples {
            let x = section.lo + h * s as f64 / (check.samples + 1) as f64;
            let u = section.basis_values(x, 0)?;
            for i in 0..=n {
                let terms = basis.coeffs.row(i).iter().zip(&u).map(|(c, v)| c * v);
                let value: f64 = terms.clone().sum();
                // values lost in the rounding of the expansion are inconclusive
                let noise = 64.0 * f64::EPSILON * terms.map(f64::abs).sum::<f64>();
                if !(value > 0.0) && !(value.abs() <= noise) {
                    return Err(not_ec(format!("V_{i}({x}) = {value:.3e} is not positive")));
                }
            }
        }
        Ok(basis)
    }

    pub fn section(&self) -> &SectionSpace {
        &self.section
    }

    pub fn n(&self) -> usize {
        self.coeffs.rows() - 1
    }

    /// Row `i` holds the coefficients of `V_{k,i}` in the section basis.
    pub fn coeffs(&self) -> &DenseMatrix {
        &self.coeffs
    }

    /// Entry `(i, p) = V_{k,i}^{(p)}(t_k)`.
    pub fn left_derivs(&self) -> &DenseMatrix {
        &self.left
    }

    /// Entry `(i, p) = V_{k,i}^{(p)}(t_{k+1})`.
    pub fn right_derivs(&self) -> &DenseMatrix {
        &self.right
    }

    pub fn normalized_at(&self) -> &[Endpoint] {
        &self.normalized_at
    }

    /// `V_{k,i}^{(order)}(x)` for all `i`. No domain check.
    pub fn eval(&self, x: f64, order: usize) -> Result<Vec<f64>> {
        let u = self.section.basis_values(x, order)?;
        Ok(self.coeffs.mul_vec(&u))
    }
}

/// Builds the local positive Bernstein-like basis with default checks.
pub fn local_bernstein_basis(section: &SectionSpace) -> Result<LocalBernsteinBasis> {
    LocalBernsteinBasis::build(section, &LocalBasisCheck::default())
}

pub(crate) fn sign_pow(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// The Hermite system of element `i`: `i` zeros at the left end, `n - i` at
/// the right end and one unit normalization, in the section-basis
/// coefficients. `wl`, `wr` hold `u_m^{(j)}` at the two ends.
fn hermite_system(
    wl: &DenseMatrix,
    wr: &DenseMatrix,
    n: usize,
    i: usize,
) -> (DenseMatrix, Vec<f64>, Endpoint) {
    let mut a = DenseMatrix::zeros(n + 1, n + 1);
    let mut row = 0;
    for j in 0..i {
        for m in 0..=n {
            a[(row, m)] = wl[(m, j)];
        }
        row += 1;
    }
    for j in 0..n - i {
        for m in 0..=n {
            a[(row, m)] = wr[(m, j)];
        }
        row += 1;
    }
    let mut b = vec![0.0; n + 1];
    let at = if i <= n / 2 {
        for m in 0..=n {
            a[(row, m)] = wl[(m, i)];
        }
        b[row] = 1.0;
        Endpoint::Left
    } else {
        for m in 0..=n {
            a[(row, m)] = wr[(m, n - i)];
        }
        b[row] = sign_pow(n - i);
        Endpoint::Right
    };
    (a, b, at)
}
