//! TOML description of a piecewise space.
//!
//! Either an explicit space:
//!
//! ```toml
//! n = 3
//! knots = [0.0, 1.0, 2.0]
//!
//! [[sections]]
//! kind = "polynomial"
//! degree = 3
//!
//! [[sections]]
//! kind = "trigonometric"   # 1, x, ..., x^(poly_terms-1), cos, sin
//! poly_terms = 2
//! origin = 0.0             # default: left end of the section
//!
//! matrices = [
//!   [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0.5, 1, 0], [0, 0, 0, 1]],
//! ]
//! ```
//!
//! or a built-in family:
//!
//! ```toml
//! [family]
//! name = "thth"
//! params = { lambda = 5.0, mu = 1.0 }
//! ```
//!
//! `matrices` may be omitted, meaning identity at every interior knot.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use ecp_core::families::{Bindings, Family};
use ecp_core::linalg::DenseMatrix;
use ecp_core::{ConnectionMatrix, PWSpace, Partition, SectionKind, SectionSpace};

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("{0}")]
    Parse(String),

    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },

    #[error(transparent)]
    Space(#[from] ecp_core::Error),
}

fn field(field: impl Into<String>, message: impl Into<String>) -> SpecError {
    SpecError::Field { field: field.into(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knots: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrices: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sections: Option<Vec<SectionSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poly_terms: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub name: String,
    #[serde(default)]
    pub params: Bindings,
}

impl SectionSpec {
    fn kind(&self, at: &str) -> Result<SectionKind, SpecError> {
        let reject = |key: &str| field(format!("{at}.{key}"), format!("not used by kind `{}`", self.kind));
        match self.kind.as_str() {
            "polynomial" => {
                if self.poly_terms.is_some() {
                    return Err(reject("poly_terms"));
                }
                let degree = self.degree.ok_or_else(|| field(format!("{at}.degree"), "required"))?;
                Ok(SectionKind::Polynomial { degree })
            }
            "trigonometric" | "hyperbolic" => {
                if self.degree.is_some() {
                    return Err(reject("degree"));
                }
                let poly_terms = self.poly_terms.unwrap_or(3);
                Ok(if self.kind == "trigonometric" {
                    SectionKind::Trigonometric { poly_terms }
                } else {
                    SectionKind::Hyperbolic { poly_terms }
                })
            }
            other => Err(field(
                format!("{at}.kind"),
                format!("unknown kind `{other}` (expected polynomial, trigonometric or hyperbolic)"),
            )),
        }
    }

    fn from_section(s: &SectionSpace) -> Result<Self, SpecError> {
        let origin = (s.origin() != s.lo()).then_some(s.origin());
        let (kind, degree, poly_terms) = match s.kind() {
            SectionKind::Polynomial { degree } => ("polynomial", Some(*degree), None),
            SectionKind::Trigonometric { poly_terms } => ("trigonometric", None, Some(*poly_terms)),
            SectionKind::Hyperbolic { poly_terms } => ("hyperbolic", None, Some(*poly_terms)),
            other => {
                return Err(SpecError::Parse(format!(
                    "section kind {} has no file representation",
                    other.name()
                )))
            }
        };
        Ok(SectionSpec { kind: kind.to_string(), degree, poly_terms, origin })
    }
}

impl SpaceSpec {
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        toml::from_str(text).map_err(|e| SpecError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, SpecError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| SpecError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String, SpecError> {
        toml::to_string(self).map_err(|e| SpecError::Parse(e.to_string()))
    }

    /// Explicit description of an existing space.
    pub fn from_space(space: &PWSpace) -> Result<Self, SpecError> {
        Ok(SpaceSpec {
            n: Some(space.n()),
            knots: Some(space.partition().knots().to_vec()),
            matrices: Some(space.matrices().iter().map(|m| m.matrix().to_rows()).collect()),
            sections: Some(space.sections().iter().map(SectionSpec::from_section).collect::<Result<_, _>>()?),
            family: None,
        })
    }

    pub fn build(&self) -> Result<PWSpace, SpecError> {
        if let Some(fam) = &self.family {
            if self.knots.is_some() || self.sections.is_some() || self.matrices.is_some() || self.n.is_some() {
                return Err(field("family", "cannot be combined with n, knots, sections or matrices"));
            }
            let f = Family::by_name(&fam.name)?;
            return Ok(f.generate(&fam.params)?);
        }
        let n = self.n.ok_or_else(|| field("n", "required"))?;
        let knots = self.knots.clone().ok_or_else(|| field("knots", "required"))?;
        let specs = self.sections.as_ref().ok_or_else(|| field("sections", "required"))?;
        let partition = Partition::new(knots).map_err(|e| field("knots", e.to_string()))?;
        let q = partition.q();
        if specs.len() != q + 1 {
            return Err(field(
                "sections",
                format!("{} knots need {} sections, got {}", q + 2, q + 1, specs.len()),
            ));
        }
        let mut sections = Vec::with_capacity(q + 1);
        for (k, s) in specs.iter().enumerate() {
            let at = format!("sections[{k}]");
            let kind = s.kind(&at)?;
            if kind.dim() != n + 1 {
                return Err(field(at, format!("dimension {} does not match n + 1 = {}", kind.dim(), n + 1)));
            }
            let (lo, hi) = partition.interval(k);
            let built = SectionSpace::with_origin(kind, lo, hi, s.origin.unwrap_or(lo))
                .map_err(|e| field(format!("sections[{k}]"), e.to_string()))?;
            sections.push(built);
        }
        let matrices = match &self.matrices {
            None => vec![ConnectionMatrix::identity(n + 1); q],
            Some(ms) => {
                if ms.len() != q {
                    return Err(field("matrices", format!("expected {q} matrices, got {}", ms.len())));
                }
                ms.iter()
                    .enumerate()
                    .map(|(j, rows)| {
                        let at = format!("matrices[{j}]");
                        let m = DenseMatrix::from_rows(rows).map_err(|e| field(&at, e.to_string()))?;
                        if m.rows() != n + 1 {
                            return Err(field(&at, format!("expected order {}, got {}", n + 1, m.rows())));
                        }
                        ConnectionMatrix::new(m).map_err(|e| field(&at, e.to_string()))
                    })
                    .collect::<Result<Vec<_>, _>>()?
            }
        };
        Ok(PWSpace::new(partition, sections, matrices)?)
    }
}
