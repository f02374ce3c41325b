use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;

/// `g : [0,1] -> R^m` with a certified Lipschitz constant and enclosing evaluation.
pub trait LipschitzCurve: Send + Sync + fmt::Debug {
    fn codim(&self) -> usize;

    /// Certified Lipschitz constant `M > 0`.
    fn lipschitz(&self) -> f64;

    /// Enclosure of `g(t)` for a machine number `t`.
    fn eval(&self, t: f64) -> Vec<Interval>;

    /// Upper bound on the width of any enclosure returned by `eval`.
    fn eval_error(&self) -> f64;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinKind {
    /// `g = 0`.
    Zero,
    /// `g(t) = t`.
    Identity,
    /// `g(t) = sin(5t) / 2`.
    Sine,
}

#[derive(Clone, Debug)]
pub struct BuiltinCurve {
    kind: BuiltinKind,
    m: f64,
}

/// Absolute enclosure radius for the library sine, far above its error.
const SINE_PAD: f64 = 4e-15;

impl BuiltinCurve {
    pub fn new(kind: BuiltinKind, lipschitz: f64) -> Result<Self> {
        if !(lipschitz.is_finite() && lipschitz > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "Lipschitz constant must be finite and positive, got {lipschitz}"
            )));
        }
        let minimal = match kind {
            BuiltinKind::Zero => 0.0,
            BuiltinKind::Identity => 1.0,
            BuiltinKind::Sine => 2.5,
        };
        if lipschitz < minimal {
            return Err(Error::InvalidConfig(format!(
                "{kind:?} curve is not {lipschitz}-Lipschitz (needs M >= {minimal})"
            )));
        }
        Ok(BuiltinCurve { kind, m: lipschitz })
    }

    pub fn kind(&self) -> BuiltinKind {
        self.kind
    }
}

impl LipschitzCurve for BuiltinCurve {
    fn codim(&self) -> usize {
        1
    }

    fn lipschitz(&self) -> f64 {
        self.m
    }

    fn eval(&self, t: f64) -> Vec<Interval> {
        vec![match self.kind {
            BuiltinKind::Zero => Interval::point(0.0),
            BuiltinKind::Identity => Interval::point(t),
            BuiltinKind::Sine => Interval::around(0.5 * (5.0 * t).sin(), SINE_PAD),
        }]
    }

    fn eval_error(&self) -> f64 {
        match self.kind {
            BuiltinKind::Zero | BuiltinKind::Identity => 0.0,
            BuiltinKind::Sine => 2.0 * SINE_PAD + 4.0 * f64::EPSILON,
        }
    }
}

/// `f(t) = g(t / (10 M)) - g(0)`, which is `1/10`-Lipschitz with `f(0) = 0`.
#[derive(Clone, Debug)]
pub struct RescaledCurve {
    g: Arc<dyn LipschitzCurve>,
    g0: Vec<Interval>,
    m: f64,
}

impl RescaledCurve {
    pub fn new(g: Arc<dyn LipschitzCurve>) -> Result<Self> {
        let m = g.lipschitz();
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::InvalidConfig("curve needs a positive Lipschitz constant".into()));
        }
        let g0 = g.eval(0.0);
        Ok(RescaledCurve { g, g0, m })
    }

    pub fn original(&self) -> &Arc<dyn LipschitzCurve> {
        &self.g
    }

    /// The factor `10 M` relating the two parametrizations.
    pub fn stretch(&self) -> f64 {
        10.0 * self.m
    }
}

impl LipschitzCurve for RescaledCurve {
    fn codim(&self) -> usize {
        self.g.codim()
    }

    fn lipschitz(&self) -> f64 {
        0.1
    }

    fn eval(&self, t: f64) -> Vec<Interval> {
        let u = t / (10.0 * self.m);
        // rounding in u moves g by at most M * |du|, with |du| <= 2 eps |u|
        let slack = self.m * u.abs() * 2.0 * f64::EPSILON;
        self.g
            .eval(u)
            .into_iter()
            .zip(&self.g0)
            .map(|(v, z)| (v - *z).inflate(slack))
            .collect()
    }

    fn eval_error(&self) -> f64 {
        2.0 * self.g.eval_error() + 8.0 * f64::EPSILON
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_rescales_to_tenth() {
        let g = Arc::new(BuiltinCurve::new(BuiltinKind::Identity, 1.0).unwrap());
        let f = RescaledCurve::new(g).unwrap();
        assert!(f.eval(1.0)[0].contains(0.1));
        assert!(f.eval(0.0)[0].contains_zero());
    }

    #[test]
    fn rejects_uncertified_constants() {
        assert!(BuiltinCurve::new(BuiltinKind::Sine, 2.0).is_err());
        assert!(BuiltinCurve::new(BuiltinKind::Identity, 0.5).is_err());
        assert!(BuiltinCurve::new(BuiltinKind::Zero, 0.0).is_err());
    }
}
