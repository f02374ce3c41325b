use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigUint;
use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::curve::BuiltinKind;
use super::{
    Budget, BuiltinCurve, CantorProduct, Hyperplane, Isosceles, LinearZeroSet, PatternOracle, PointCloud,
    RescaledCurve, SharedOracle, Soundness, Sumset, Union,
};
use crate::dyadic::{CubeSet, DyadicScale};
use crate::error::{Error, Result};

/// Exact rational written as an integer or a `"p/q"` string.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rational(pub Ratio<i64>);

impl Rational {
    pub fn integer(v: i64) -> Self {
        Rational(Ratio::from_integer(v))
    }

    pub fn new(p: i64, q: i64) -> Self {
        Rational(Ratio::new(p, q))
    }
}

impl FromStr for Rational {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("cannot parse rational {s:?}"));
        let (p, q) = match s.split_once('/') {
            Some((p, q)) => (p.trim(), q.trim()),
            None => (s.trim(), "1"),
        };
        let p: i64 = p.parse().map_err(|_| bad())?;
        let q: i64 = q.parse().map_err(|_| bad())?;
        if q == 0 {
            return Err(bad());
        }
        Ok(Rational(Ratio::new(p, q)))
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self.0.denom() == 1 {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if *self.0.denom() == 1 {
            s.serialize_i64(*self.0.numer())
        } else {
            s.serialize_str(&self.to_string())
        }
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => Ok(Rational::integer(v)),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

fn zero() -> Rational {
    Rational::integer(0)
}

fn one() -> Rational {
    Rational::integer(1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    pub name: BuiltinKind,
    pub lipschitz: f64,
}

impl CurveSpec {
    pub fn build(&self) -> Result<RescaledCurve> {
        let g = BuiltinCurve::new(self.name, self.lipschitz)?;
        RescaledCurve::new(Arc::new(g))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum PatternKind {
    #[serde(rename = "pointcloud")]
    PointCloud {
        dim: usize,
        points: Vec<Vec<f64>>,
    },
    ZerosetLinear {
        coefficients: Vec<Rational>,
        #[serde(default = "zero")]
        constant: Rational,
    },
    Sumset {
        target: Box<PatternSpec>,
    },
    Isosceles {
        curve: CurveSpec,
    },
    CantorProduct {
        base: u64,
        digits: Vec<u64>,
        #[serde(default = "one")]
        scale: Rational,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        offsets: Option<Vec<Rational>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
    },
    Hyperplane {
        d: usize,
        n: usize,
    },
    Union {
        parts: Vec<PatternSpec>,
    },
}

/// A pattern definition as read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    #[serde(flatten)]
    pub kind: PatternKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub soundness: Option<Soundness>,
}

impl PatternSpec {
    pub fn new(kind: PatternKind, alpha: Option<f64>) -> Self {
        PatternSpec {
            kind,
            alpha,
            soundness: None,
        }
    }

    pub fn build(&self) -> Result<SharedOracle> {
        let inner: SharedOracle = match &self.kind {
            PatternKind::PointCloud { dim, points } => Arc::new(PointCloud::new(*dim, points.clone())?),
            PatternKind::ZerosetLinear { coefficients, constant } => {
                let c: Vec<Ratio<i64>> = coefficients.iter().map(|r| r.0).collect();
                Arc::new(LinearZeroSet::new(&c, constant.0)?)
            }
            PatternKind::Sumset { target } => Arc::new(Sumset::new(target.build()?)?),
            PatternKind::Isosceles { curve } => Arc::new(Isosceles::new(Arc::new(curve.build()?))),
            PatternKind::CantorProduct {
                base,
                digits,
                scale,
                offsets,
                dim,
            } => {
                let offsets = match (offsets, dim) {
                    (Some(o), Some(d)) if o.len() != *d => {
                        return Err(Error::InvalidConfig(format!(
                            "Cantor product has {} offsets but dim {d}",
                            o.len()
                        )))
                    }
                    (Some(o), _) => o.iter().map(|r| r.0).collect(),
                    (None, d) => vec![Ratio::from_integer(0); d.unwrap_or(1)],
                };
                Arc::new(CantorProduct::new(*base, digits.clone(), scale.0, offsets, self.alpha)?)
            }
            PatternKind::Hyperplane { d, n } => Arc::new(Hyperplane::new(*d, *n)?),
            PatternKind::Union { parts } => {
                let mut it = parts.iter();
                let first = it
                    .next()
                    .ok_or_else(|| Error::InvalidConfig("union needs at least one part".into()))?
                    .build()?;
                let mut acc = first;
                for p in it {
                    acc = Arc::new(Union::new(acc, p.build()?)?);
                }
                acc
            }
        };
        if self.soundness == Some(Soundness::Exact) && inner.soundness() != Soundness::Exact {
            return Err(Error::InvalidConfig(format!(
                "{} pattern only provides an over-approximating cover",
                self.type_name()
            )));
        }
        match self.alpha {
            None => Ok(inner),
            Some(a) if !(a.is_finite() && a >= 0.0) => Err(Error::InvalidConfig(format!(
                "declared alpha must be finite and non-negative, got {a}"
            ))),
            Some(a) => Ok(Arc::new(Declared {
                inner,
                alpha: a,
                soundness: self.soundness,
            })),
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self.kind {
            PatternKind::PointCloud { .. } => "pointcloud",
            PatternKind::ZerosetLinear { .. } => "zeroset-linear",
            PatternKind::Sumset { .. } => "sumset",
            PatternKind::Isosceles { .. } => "isosceles",
            PatternKind::CantorProduct { .. } => "cantor-product",
            PatternKind::Hyperplane { .. } => "hyperplane",
            PatternKind::Union { .. } => "union",
        }
    }
}

/// Overrides the declared dimension and soundness of an oracle.
#[derive(Debug)]
struct Declared {
    inner: SharedOracle,
    alpha: f64,
    soundness: Option<Soundness>,
}

impl PatternOracle for Declared {
    fn ambient_dim(&self) -> usize {
        self.inner.ambient_dim()
    }

    fn declared_alpha(&self) -> f64 {
        self.alpha
    }

    fn soundness(&self) -> Soundness {
        match self.soundness {
            Some(s) => s.weaker(self.inner.soundness()),
            None => self.inner.soundness(),
        }
    }

    fn contains(&self, scale: DyadicScale, index: &[u64]) -> bool {
        self.inner.contains(scale, index)
    }

    fn enumerate(&self, scale: DyadicScale, budget: &Budget) -> Result<CubeSet> {
        self.inner.enumerate(scale, budget)
    }

    fn count(&self, scale: DyadicScale, budget: &Budget) -> Result<BigUint> {
        self.inner.count(scale, budget)
    }

    fn count_on_axis(&self, scale: DyadicScale, d: usize, budget: &Budget) -> Result<BigUint> {
        self.inner.count_on_axis(scale, d, budget)
    }

    fn axis_plane(&self) -> Option<usize> {
        self.inner.axis_plane()
    }

    fn enumerate_within(&self, scale: DyadicScale, factors: &CubeSet, n: usize, budget: &Budget) -> Result<CubeSet> {
        self.inner.enumerate_within(scale, factors, n, budget)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_tagged_patterns() {
        let s = r#"{"type":"cantor-product","base":4,"digits":[0,3],"scale":"1/5","dim":2,"alpha":1.0}"#;
        let p: PatternSpec = serde_json::from_str(s).unwrap();
        let o = p.build().unwrap();
        assert_eq!(o.ambient_dim(), 2);
        assert_eq!(o.declared_alpha(), 1.0);
        let s = r#"{"type":"zeroset-linear","coefficients":[1,-2,1],"alpha":2}"#;
        let p: PatternSpec = serde_json::from_str(s).unwrap();
        assert_eq!(p.build().unwrap().ambient_dim(), 3);
        let s = r#"{"type":"isosceles","curve":{"name":"sine","lipschitz":2.5},"alpha":2}"#;
        assert!(serde_json::from_str::<PatternSpec>(s).unwrap().build().is_ok());
    }

    #[test]
    fn rejects_exact_claim_on_cover() {
        let s = r#"{"type":"cantor-product","base":3,"digits":[0,2],"soundness":"exact"}"#;
        let p: PatternSpec = serde_json::from_str(s).unwrap();
        assert!(matches!(p.build(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn rational_round_trip() {
        let r: Rational = serde_json::from_str(r#""3/6""#).unwrap();
        assert_eq!(r, Rational::new(1, 2));
        assert_eq!(serde_json::to_string(&r).unwrap(), r#""1/2""#);
        assert_eq!(serde_json::to_string(&Rational::integer(4)).unwrap(), "4");
        assert!("1/0".parse::<Rational>().is_err());
    }
}
