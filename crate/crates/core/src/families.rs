//! Built-in parametric families of piecewise spaces.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::pwspace::{ConnectionMatrix, PWSpace, Partition};
use crate::sections::{SectionKind, SectionSpace};

/// Parameter values keyed by name.
pub type Bindings = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: f64,
    /// Inclusive bounds.
    pub min: f64,
    pub max: f64,
    pub integer: bool,
}

impl ParamSpec {
    const fn real(name: &'static str, default: f64) -> Self {
        ParamSpec { name, default, min: f64::NEG_INFINITY, max: f64::INFINITY, integer: false }
    }

    const fn positive(name: &'static str, default: f64) -> Self {
        ParamSpec { name, default, min: f64::MIN_POSITIVE, max: f64::INFINITY, integer: false }
    }

    const fn count(name: &'static str, default: f64) -> Self {
        ParamSpec { name, default, min: 0.0, max: 10_000.0, integer: true }
    }

    pub fn admits(&self, v: f64) -> bool {
        v.is_finite() && v >= self.min && v <= self.max && (!self.integer || v.fract() == 0.0)
    }
}

type Generator = fn(&Bindings) -> Result<PWSpace>;

/// A named parametric family: parameters in, piecewise space out.
#[derive(Clone)]
pub struct Family {
    pub name: &'static str,
    pub description: &'static str,
    pub params: Vec<ParamSpec>,
    generator: Generator,
}

impl std::fmt::Debug for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Family").field("name", &self.name).field("params", &self.params).finish()
    }
}

impl Family {
    /// Looks a family up by name; the `cubic_` prefix and case are optional.
    pub fn by_name(name: &str) -> Result<Family> {
        let wanted = name.to_ascii_lowercase();
        let short = |s: &str| s.strip_prefix("cubic_").unwrap_or(s).to_string();
        builtin_families()
            .into_iter()
            .find(|f| {
                let own = f.name.to_ascii_lowercase();
                own == wanted || short(&own) == short(&wanted)
            })
            .ok_or_else(|| Error::UnknownFamily(name.to_string()))
    }

    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Fills defaults and validates names and ranges.
    pub fn resolve(&self, bindings: &Bindings) -> Result<Bindings> {
        for key in bindings.keys() {
            if self.param(key).is_none() {
                return Err(Error::UnknownParameter {
                    family: self.name.to_string(),
                    param: key.clone(),
                });
            }
        }
        let mut out = Bindings::new();
        for p in &self.params {
            let v = bindings.get(p.name).copied().unwrap_or(p.default);
            if !p.admits(v) {
                return Err(Error::ParameterRange { param: p.name.to_string(), value: v });
            }
            out.insert(p.name.to_string(), v);
        }
        Ok(out)
    }

    pub fn generate(&self, bindings: &Bindings) -> Result<PWSpace> {
        let resolved = self.resolve(bindings)?;
        (self.generator)(&resolved)
    }
}

pub fn builtin_families() -> Vec<Family> {
    use ParamSpec as P;
    let knots = || [P::count("q", 2.0), P::positive("spacing", 1.0)];
    let with_knots = |mut v: Vec<ParamSpec>| {
        v.extend(knots());
        v
    };
    vec![
        Family {
            name: "cubic_geo",
            description: "piecewise cubics joined by the three-parameter geometric matrix and its mirror",
            params: with_knots(vec![
                P::real("beta", 0.0),
                P::real("delta", 0.0),
                P::real("eps", 0.0),
                P::positive("alpha", 1.0),
                P::positive("gamma", 1.0),
                P::positive("zeta", 1.0),
            ]),
            generator: |b| cubic_geo(b["beta"], b["delta"], b["eps"], [b["alpha"], b["gamma"], b["zeta"]], b),
        },
        Family {
            name: "cubic_caseI",
            description: "beta = 0",
            params: with_knots(vec![P::real("delta", 0.0), P::real("eps", 0.0)]),
            generator: |b| cubic_geo(0.0, b["delta"], b["eps"], [1.0; 3], b),
        },
        Family {
            name: "cubic_caseII",
            description: "eps = 0",
            params: with_knots(vec![P::real("delta", 0.0), P::real("beta", 0.0)]),
            generator: |b| cubic_geo(b["beta"], b["delta"], 0.0, [1.0; 3], b),
        },
        Family {
            name: "cubic_caseIII",
            description: "delta = 0",
            params: with_knots(vec![P::real("beta", 0.0), P::real("eps", 0.0)]),
            generator: |b| cubic_geo(b["beta"], 0.0, b["eps"], [1.0; 3], b),
        },
        Family {
            name: "cubic_caseIV",
            description: "delta = beta*eps/2 (same matrix at every knot)",
            params: with_knots(vec![P::real("beta", 0.0), P::real("eps", 0.0)]),
            generator: |b| {
                let (beta, eps) = (b["beta"], b["eps"]);
                cubic_geo(beta, beta * eps / 2.0, eps, [1.0; 3], b)
            },
        },
        Family {
            name: "cubic_spline_family",
            description: "delta = eps = 0, same matrix at every knot",
            params: with_knots(vec![P::real("beta", 0.0)]),
            generator: |b| cubic_geo(b["beta"], 0.0, 0.0, [1.0; 3], b),
        },
        Family {
            name: "cubic_G3",
            description: "eps = 3 beta, delta = beta*eps/2",
            params: with_knots(vec![P::real("beta", 0.0)]),
            generator: |b| {
                let beta = b["beta"];
                let eps = 3.0 * beta;
                cubic_geo(beta, beta * eps / 2.0, eps, [1.0; 3], b)
            },
        },
        Family {
            name: "thth",
            description: "trig/hyperbolic/trig/hyperbolic sections of {1,x,x^2,cos,sin} and {1,x,x^2,cosh,sinh}",
            params: vec![P::positive("lambda", 5.0), P::positive("mu", 1.0)],
            generator: |b| thth(b["lambda"], b["mu"]),
        },
        Family {
            name: "cos_sin_pair",
            description: "span{cos, sin} on [-h, 0] and [0, h] with identity connection",
            params: vec![P::positive("h", 1.0)],
            generator: |b| cos_sin_pair(b["h"]),
        },
    ]
}

/// `[[1,0,0,0],[0,a,0,0],[0,beta,g,0],[0,delta,eps,z]]`.
pub fn geometric_matrix(beta: f64, delta: f64, eps: f64, diag: [f64; 3]) -> Result<ConnectionMatrix> {
    let [a, g, z] = diag;
    ConnectionMatrix::from_rows(&[
        [1.0, 0.0, 0.0, 0.0],
        [0.0, a, 0.0, 0.0],
        [0.0, beta, g, 0.0],
        [0.0, delta, eps, z],
    ])
}

/// Connection matrix seen at the mirrored knot after `x -> a + b - x`:
/// `S M^{-1} S` with `S = diag((-1)^p)`.
pub fn mirrored(m: &ConnectionMatrix) -> Result<ConnectionMatrix> {
    let a = m.matrix();
    let n = a.rows();
    // forward substitution, column by column
    let mut inv = DenseMatrix::zeros(n, n);
    for c in 0..n {
        for p in c..n {
            let mut s = if p == c { 1.0 } else { 0.0 };
            for t in c..p {
                s -= a[(p, t)] * inv[(t, c)];
            }
            inv[(p, c)] = s / a[(p, p)];
        }
    }
    let signed = DenseMatrix::from_fn(n, n, |p, c| {
        let v = inv[(p, c)];
        if (p + c) % 2 == 0 {
            v
        } else {
            -v
        }
    });
    ConnectionMatrix::new(signed)
}

/// Cubic sections on `q+1` equal intervals; knots `k <= ceil(q/2)` carry the
/// geometric matrix, the others its mirror, so the space is closed under
/// reversal of the parameter.
fn cubic_geo(beta: f64, delta: f64, eps: f64, diag: [f64; 3], b: &Bindings) -> Result<PWSpace> {
    let q = b["q"] as usize;
    let spacing = b["spacing"];
    let m1 = geometric_matrix(beta, delta, eps, diag)?;
    let m2 = mirrored(&m1)?;
    let partition = Partition::uniform(0.0, spacing, q)?;
    let sections = (0..=q)
        .map(|k| {
            let (lo, hi) = partition.interval(k);
            SectionSpace::local(SectionKind::Polynomial { degree: 3 }, lo, hi)
        })
        .collect::<Result<Vec<_>>>()?;
    let matrices = (1..=q)
        .map(|k| if k <= q.div_ceil(2) { m1.clone() } else { m2.clone() })
        .collect();
    PWSpace::new(partition, sections, matrices)
}

/// Knots with `t1-t0 = mu`, `t2-t1 = t4-t3 = lambda`, `t3-t2 = 5`; identity
/// connections of order five.
pub fn thth(lambda: f64, mu: f64) -> Result<PWSpace> {
    let widths = [mu, lambda, 5.0, lambda];
    let mut knots = vec![0.0];
    for w in widths {
        knots.push(knots.last().unwrap() + w);
    }
    let partition = Partition::new(knots)?;
    let sections = (0..4)
        .map(|k| {
            let (lo, hi) = partition.interval(k);
            let kind = if k % 2 == 0 {
                SectionKind::trigonometric_n4()
            } else {
                SectionKind::hyperbolic_n4()
            };
            SectionSpace::local(kind, lo, hi)
        })
        .collect::<Result<Vec<_>>>()?;
    PWSpace::new(partition, sections, vec![ConnectionMatrix::identity(5); 3])
}

pub fn cos_sin_pair(h: f64) -> Result<PWSpace> {
    let partition = Partition::new(vec![-h, 0.0, h])?;
    let kind = SectionKind::Trigonometric { poly_terms: 0 };
    let sections = vec![
        SectionSpace::new(kind.clone(), -h, 0.0)?,
        SectionSpace::new(kind, 0.0, h)?,
    ];
    PWSpace::new(partition, sections, vec![ConnectionMatrix::identity(2)])
}
