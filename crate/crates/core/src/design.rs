//! Normalized Bernstein basis of a space that is good for design, and
//! parametric curves built on it.

use crate::ecptest::{build_global_basis, good_for_design, GammaTensor, TestConfig};
use crate::error::{Error, Result};
use crate::pwspace::{PWSpace, Side};
use crate::sections::LocalBernsteinBasis;

/// Relative agreement required between the normalizations computed at the
/// two ends of the parameter interval.
pub const NORMALIZATION_CONSISTENCY: f64 = 1e-8;

/// `B_i = alpha_i V_i`, where `V_i` is the global Bernstein-like basis with
/// local coefficients `gamma`.
#[derive(Debug, Clone)]
pub struct GlobalBernsteinBasis {
    space: PWSpace,
    bases: Vec<LocalBernsteinBasis>,
    gamma: GammaTensor,
    alpha: Vec<f64>,
}

impl GlobalBernsteinBasis {
    /// Certifies `space` as good for design and builds its normalized basis.
    pub fn new(space: &PWSpace, config: &TestConfig) -> Result<Self> {
        let outcome = good_for_design(space, config)?;
        if !outcome.is_ecp() {
            return Err(Error::NotCertified(Box::new(outcome)));
        }
        let bases = space.local_bases(&config.local)?;
        let gamma = match build_global_basis(space, &bases, config)? {
            Ok(c) => c.gamma,
            Err(f) => {
                return Err(Error::InternalInconsistency(format!(
                    "Bernstein-like basis system of element {} is unreliable (condition {:.3e})",
                    f.i, f.condition
                )))
            }
        };
        let n = space.n();
        let q = space.q();

        // d[i][p] = V_i^{(p)} at a (resp. b)
        let ends = |k: usize, at_left: bool| -> Vec<Vec<f64>> {
            let local = if at_left { bases[k].left_derivs() } else { bases[k].right_derivs() };
            (0..=n)
                .map(|i| {
                    (0..=n)
                        .map(|p| (0..=n).map(|r| gamma.get(i, k, r) * local[(r, p)]).sum())
                        .collect()
                })
                .collect()
        };
        let at_a = ends(0, true);
        let at_b = ends(q, false);

        // sum_i alpha_i V_i^{(p)}(a) = [p == 0]; V_i^{(p)}(a) = 0 for p < i
        let mut alpha = vec![0.0; n + 1];
        for p in 0..=n {
            let rhs = if p == 0 { 1.0 } else { 0.0 };
            let s: f64 = (0..p).map(|i| alpha[i] * at_a[i][p]).sum();
            alpha[p] = (rhs - s) / at_a[p][p];
        }
        // same system at b, triangular from the other end
        let mut check = vec![0.0; n + 1];
        for p in 0..=n {
            let i = n - p;
            let rhs = if p == 0 { 1.0 } else { 0.0 };
            let s: f64 = (i + 1..=n).map(|j| check[j] * at_b[j][p]).sum();
            check[i] = (rhs - s) / at_b[i][p];
        }

        for (i, (&x, &y)) in alpha.iter().zip(&check).enumerate() {
            if !(x > 0.0) || !x.is_finite() {
                return Err(Error::InternalInconsistency(format!(
                    "normalization coefficient alpha_{i} = {x:e} is not positive"
                )));
            }
            if (x - y).abs() > NORMALIZATION_CONSISTENCY * x.abs().max(y.abs()) {
                return Err(Error::InternalInconsistency(format!(
                    "normalization alpha_{i} differs between the two ends: {x:e} vs {y:e}"
                )));
            }
        }

        Ok(GlobalBernsteinBasis { space: space.clone(), bases, gamma, alpha })
    }

    pub fn space(&self) -> &PWSpace {
        &self.space
    }

    pub fn n(&self) -> usize {
        self.space.n()
    }

    pub fn gamma(&self) -> &GammaTensor {
        &self.gamma
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Derivatives of order `order` of the unnormalized `V_i` at `x`.
    fn eval_unnormalized(&self, x: f64, side: Side, order: usize) -> Result<Vec<f64>> {
        let k = self.space.partition().locate(x, side)?;
        let local = self.bases[k].eval(x, order)?;
        let m = self.n() + 1;
        Ok((0..m)
            .map(|i| (0..m).map(|r| self.gamma.get(i, k, r) * local[r]).sum())
            .collect())
    }

    /// `B_i^{(order)}(x^side)` for all `i`.
    pub fn eval_derivs(&self, x: f64, side: Side, order: usize) -> Result<Vec<f64>> {
        let mut v = self.eval_unnormalized(x, side, order)?;
        v.iter_mut().zip(&self.alpha).for_each(|(b, a)| *b *= a);
        Ok(v)
    }

    /// `B_i(x^side)` for all `i`.
    pub fn eval(&self, x: f64, side: Side) -> Result<Vec<f64>> {
        self.eval_derivs(x, side, 0)
    }

    /// The weight `w_0 = V_0 + ... + V_n` of the unnormalized basis.
    pub fn w0(&self, x: f64, side: Side) -> Result<f64> {
        Ok(self.eval_unnormalized(x, side, 0)?.iter().sum())
    }
}

/// Convenience wrapper for [`GlobalBernsteinBasis::new`].
pub fn global_bernstein_basis(space: &PWSpace, config: &TestConfig) -> Result<GlobalBernsteinBasis> {
    GlobalBernsteinBasis::new(space, config)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSample {
    pub x: f64,
    pub side: Side,
    pub point: Vec<f64>,
}

/// `F(x) = sum_i P_i B_i(x)`.
#[derive(Debug, Clone)]
pub struct BezierCurve {
    basis: GlobalBernsteinBasis,
    points: Vec<Vec<f64>>,
}

impl BezierCurve {
    pub fn new(basis: GlobalBernsteinBasis, points: Vec<Vec<f64>>) -> Result<Self> {
        let need = basis.n() + 1;
        if points.len() != need {
            return Err(Error::Dimension(format!(
                "expected {need} control points, got {}",
                points.len()
            )));
        }
        let d = points[0].len();
        if d == 0 || points.iter().any(|p| p.len() != d) {
            return Err(Error::Dimension("control points must share a positive dimension".into()));
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Precondition("control points must be finite".into()));
        }
        Ok(BezierCurve { basis, points })
    }

    pub fn basis(&self) -> &GlobalBernsteinBasis {
        &self.basis
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn eval(&self, x: f64, side: Side) -> Result<Vec<f64>> {
        let b = self.basis.eval(x, side)?;
        let mut out = vec![0.0; self.dim()];
        for (bi, p) in b.iter().zip(&self.points) {
            for (o, c) in out.iter_mut().zip(p) {
                *o += bi * c;
            }
        }
        Ok(out)
    }

    /// `m` uniform samples; `a` is taken from the right, `b` from the left
    /// and interior knots from `knot_side`.
    pub fn sample_with_side(&self, m: usize, knot_side: Side) -> Result<Vec<CurveSample>> {
        if m < 2 {
            return Err(Error::Precondition(format!("need at least 2 samples, got {m}")));
        }
        let part = self.basis.space().partition();
        let (a, b) = (part.a(), part.b());
        (0..m)
            .map(|j| {
                let (x, side) = if j == 0 {
                    (a, Side::Right)
                } else if j == m - 1 {
                    (b, Side::Left)
                } else {
                    (a + (b - a) * j as f64 / (m - 1) as f64, knot_side)
                };
                Ok(CurveSample { x, side, point: self.eval(x, side)? })
            })
            .collect()
    }

    pub fn sample(&self, m: usize) -> Result<Vec<CurveSample>> {
        self.sample_with_side(m, Side::Right)
    }
}
