//! Piecewise spaces: knots, section-spaces and connection matrices.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::sections::{LocalBasisCheck, LocalBernsteinBasis, SectionSpace};

/// Knot sequence `t_0 < t_1 < ... < t_{q+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    knots: Vec<f64>,
}

/// Which one-sided limit to take at an interior knot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn symbol(self) -> &'static str {
        match self {
            Side::Left => "-",
            Side::Right => "+",
        }
    }
}

impl Partition {
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidSpace("a partition needs at least two knots".into()));
        }
        if knots.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidSpace("knots must be finite".into()));
        }
        if let Some(w) = knots.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSpace(format!(
                "knots must be strictly increasing, got {} then {}",
                w[0], w[1]
            )));
        }
        Ok(Partition { knots })
    }

    /// Equispaced knots `start, start + h, ..., start + (q+1) h`.
    pub fn uniform(start: f64, spacing: f64, q: usize) -> Result<Self> {
        Self::new((0..=q + 1).map(|k| start + spacing * k as f64).collect())
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of interior knots.
    pub fn q(&self) -> usize {
        self.knots.len() - 2
    }

    pub fn a(&self) -> f64 {
        self.knots[0]
    }

    pub fn b(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    pub fn interval(&self, k: usize) -> (f64, f64) {
        (self.knots[k], self.knots[k + 1])
    }

    /// Index of the section used to evaluate at `x` from the given side.
    pub fn locate(&self, x: f64, side: Side) -> Result<usize> {
        let (a, b) = (self.a(), self.b());
        if !(x >= a && x <= b) {
            return Err(Error::Domain { x, lo: a, hi: b });
        }
        let q = self.q();
        // first interior knot strictly greater than x (Right) or >= x (Left)
        let interior = &self.knots[1..=q];
        let k = match side {
            Side::Right => interior.partition_point(|t| *t <= x),
            Side::Left => interior.partition_point(|t| *t < x),
        };
        Ok(k.min(q))
    }
}

/// Lower triangular connection matrix with positive diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionMatrix(DenseMatrix);

impl ConnectionMatrix {
    pub fn new(m: DenseMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidSpace(format!(
                "connection matrix must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        if !m.is_finite() {
            return Err(Error::InvalidSpace("connection matrix has non-finite entries".into()));
        }
        for p in 0..m.rows() {
            for r in p + 1..m.cols() {
                if m[(p, r)] != 0.0 {
                    return Err(Error::InvalidSpace(format!(
                        "connection matrix is not lower triangular: entry ({p},{r}) = {}",
                        m[(p, r)]
                    )));
                }
            }
            if !(m[(p, p)] > 0.0) {
                return Err(Error::InvalidSpace(format!(
                    "connection matrix diagonal entry ({p},{p}) = {} is not positive",
                    m[(p, p)]
                )));
            }
        }
        Ok(ConnectionMatrix(m))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(DenseMatrix::from_rows(rows)?)
    }

    pub fn identity(order: usize) -> Self {
        ConnectionMatrix(DenseMatrix::identity(order))
    }

    pub fn order(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.0
    }

    /// First column equal to `(1, 0, ..., 0)^T`.
    pub fn preserves_constants(&self) -> bool {
        (0..self.order()).all(|p| self.0[(p, 0)] == if p == 0 { 1.0 } else { 0.0 })
    }

    /// Drops row 0 and column 0.
    pub fn truncated(&self) -> Result<Self> {
        let n = self.order();
        if n < 2 {
            return Err(Error::Precondition("cannot truncate an order-1 matrix".into()));
        }
        Ok(ConnectionMatrix(DenseMatrix::from_fn(n - 1, n - 1, |p, r| {
            self.0[(p + 1, r + 1)]
        })))
    }
}

/// An (n+1)-dimensional piecewise space on `([a,b]; T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PWSpace {
    partition: Partition,
    sections: Vec<SectionSpace>,
    matrices: Vec<ConnectionMatrix>,
}

impl PWSpace {
    pub fn new(
        partition: Partition,
        sections: Vec<SectionSpace>,
        matrices: Vec<ConnectionMatrix>,
    ) -> Result<Self> {
        let q = partition.q();
        if sections.len() != q + 1 {
            return Err(Error::InvalidSpace(format!(
                "{} knot intervals but {} sections",
                q + 1,
                sections.len()
            )));
        }
        if matrices.len() != q {
            return Err(Error::InvalidSpace(format!(
                "{q} interior knots but {} connection matrices",
                matrices.len()
            )));
        }
        let dim = sections[0].dim();
        let scale = partition.a().abs().max(partition.b().abs()).max(1.0);
        for (k, s) in sections.iter().enumerate() {
            if s.dim() != dim {
                return Err(Error::InvalidSpace(format!(
                    "section {k} has dimension {}, section 0 has {dim}",
                    s.dim()
                )));
            }
            let (lo, hi) = partition.interval(k);
            if (s.lo() - lo).abs() > 1e-12 * scale || (s.hi() - hi).abs() > 1e-12 * scale {
                return Err(Error::InvalidSpace(format!(
                    "section {k} lives on [{}, {}] instead of [{lo}, {hi}]",
                    s.lo(),
                    s.hi()
                )));
            }
        }
        for (k, m) in matrices.iter().enumerate() {
            if m.order() != dim {
                return Err(Error::InvalidSpace(format!(
                    "connection matrix at knot {} has order {}, expected {dim}",
                    k + 1,
                    m.order()
                )));
            }
        }
        Ok(PWSpace { partition, sections, matrices })
    }

    /// Same section on every interval, same matrix at every interior knot.
    /// Built-in systems use the local variable `x - t_k` on section `k`.
    pub fn uniform(
        partition: Partition,
        kind: crate::sections::SectionKind,
        matrix: ConnectionMatrix,
    ) -> Result<Self> {
        let q = partition.q();
        let sections = (0..=q)
            .map(|k| {
                let (lo, hi) = partition.interval(k);
                SectionSpace::local(kind.clone(), lo, hi)
            })
            .collect::<Result<Vec<_>>>()?;
        PWSpace::new(partition, sections, vec![matrix; q])
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn sections(&self) -> &[SectionSpace] {
        &self.sections
    }

    /// Matrix at interior knot `t_k` is `matrices()[k - 1]`.
    pub fn matrices(&self) -> &[ConnectionMatrix] {
        &self.matrices
    }

    pub fn n(&self) -> usize {
        self.sections[0].n()
    }

    pub fn q(&self) -> usize {
        self.partition.q()
    }

    pub fn contains_constants(&self) -> bool {
        self.sections.iter().all(|s| s.has_unit_first())
            && self.matrices.iter().all(|m| m.preserves_constants())
    }

    /// The n-dimensional space `DE`.
    pub fn derivative_space(&self) -> Result<PWSpace> {
        if !self.contains_constants() {
            return Err(Error::Precondition("the space does not contain constants".into()));
        }
        if self.n() == 0 {
            return Err(Error::Precondition("cannot differentiate a one-dimensional space".into()));
        }
        let sections = self
            .sections
            .iter()
            .map(|s| s.derivative_section())
            .collect::<Result<Vec<_>>>()?;
        let matrices = self
            .matrices
            .iter()
            .map(|m| m.truncated())
            .collect::<Result<Vec<_>>>()?;
        PWSpace::new(self.partition.clone(), sections, matrices)
    }

    /// `|| right - M_k left ||_inf` at interior knot `k` (1-based).
    pub fn connection_residual(&self, k: usize, left: &[f64], right: &[f64]) -> Result<f64> {
        if k == 0 || k > self.q() {
            return Err(Error::Precondition(format!("knot index {k} is not interior")));
        }
        let dim = self.n() + 1;
        if left.len() != dim || right.len() != dim {
            return Err(Error::Dimension(format!(
                "derivative vectors must have length {dim}"
            )));
        }
        let ml = self.matrices[k - 1].matrix().mul_vec(left);
        Ok(right.iter().zip(&ml).fold(0.0, |acc, (r, v)| acc.max((r - v).abs())))
    }

    /// Local positive Bernstein-like bases of every section.
    pub fn local_bases(&self, check: &LocalBasisCheck) -> Result<Vec<LocalBernsteinBasis>> {
        self.sections
            .iter()
            .enumerate()
            .map(|(k, s)| {
                LocalBernsteinBasis::build(s, check).map_err(|e| match e {
                    Error::NotECSection { reason, .. } => Error::NotECSection { section: k, reason },
                    other => other,
                })
            })
            .collect()
    }
}
