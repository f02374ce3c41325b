use serde::{Deserialize, Serialize};

use super::brute::{isosceles_triple_scan, sumset_pair_scan, PairScan, TripleScan};
use super::dimension::{cmd_dimension, DimensionReport};
use crate::builder::{build, BuildConfig, ConstructionTrace};
use crate::dyadic::{CubeSet, DyadicScale};
use crate::error::{Error, Result};
use crate::oracle::{fit_with_log_term, linear_fit, log2_big, CurveSpec, PatternKind, PatternSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemoKind {
    Sumset,
    Isosceles,
    Calibration,
}

impl std::str::FromStr for DemoKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sumset" => Ok(DemoKind::Sumset),
            "isosceles" => Ok(DemoKind::Isosceles),
            "calibration" => Ok(DemoKind::Calibration),
            _ => Err(Error::InvalidConfig(format!("unknown demo {s:?}"))),
        }
    }
}

fn scan_min() -> u32 {
    4
}
fn scan_max() -> u32 {
    9
}
fn tolerance() -> f64 {
    0.2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub which: Option<DemoKind>,
    pub config: BuildConfig,
    /// Covering-scan range `δ = 2^-min ... 2^-max`.
    #[serde(default = "scan_min")]
    pub scan_min_exponent: u32,
    #[serde(default = "scan_max")]
    pub scan_max_exponent: u32,
    /// Curves for the covering scan; empty means the configured curve only.
    #[serde(default)]
    pub scan_curves: Vec<CurveSpec>,
    /// Allowed gap between fitted and target exponents.
    #[serde(default = "tolerance")]
    pub tolerance: f64,
}

impl DemoSpec {
    /// Parses a spec; `which` and `seed` fill in when the file leaves them out, except that
    /// `seed` always wins.
    pub fn from_json(text: &str, which: Option<DemoKind>, seed: Option<u64>) -> Result<(DemoKind, DemoSpec)> {
        let mut spec: DemoSpec =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("cannot parse demo spec: {e}")))?;
        if let Some(s) = seed {
            spec.config.seed = s;
        }
        let kind = spec
            .which
            .or(which)
            .ok_or_else(|| Error::InvalidConfig("demo kind not given".into()))?;
        spec.validate(kind)?;
        spec.config.validate()?;
        Ok((kind, spec))
    }

    fn single_pattern(&self) -> Result<&PatternSpec> {
        match self.config.patterns.as_slice() {
            [p] => Ok(p),
            ps => Err(Error::InvalidConfig(format!(
                "demo needs exactly one pattern, got {}",
                ps.len()
            ))),
        }
    }

    pub fn validate(&self, kind: DemoKind) -> Result<()> {
        let c = &self.config;
        match kind {
            DemoKind::Sumset => {
                let target = self.sumset_target()?;
                if c.n != 2 {
                    return Err(Error::InvalidConfig(format!("sumset demo needs n = 2, got {}", c.n)));
                }
                let beta = target.build()?.declared_alpha();
                if beta >= c.d as f64 {
                    return Err(Error::InvalidConfig(format!(
                        "target dimension {beta} must be below d = {}",
                        c.d
                    )));
                }
                if (c.alpha - (c.d as f64 + beta)).abs() > 1e-9 {
                    return Err(Error::InvalidConfig(format!(
                        "sumset demo runs with alpha = d + beta = {}, got {}",
                        c.d as f64 + beta,
                        c.alpha
                    )));
                }
            }
            DemoKind::Isosceles => {
                self.isosceles_curve()?;
                if c.n != 3 {
                    return Err(Error::InvalidConfig(format!(
                        "isosceles triangles need three points, got n = {}",
                        c.n
                    )));
                }
                if c.d != 1 || (c.alpha - 2.0).abs() > 1e-12 {
                    return Err(Error::InvalidConfig("isosceles demo runs with d = 1, alpha = 2".into()));
                }
                if self.scan_min_exponent > self.scan_max_exponent {
                    return Err(Error::InvalidConfig("empty covering-scan range".into()));
                }
                for curve in &self.scan_curves {
                    curve.build()?;
                }
            }
            DemoKind::Calibration => {
                self.single_pattern()?;
            }
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig("tolerance must be positive".into()));
        }
        Ok(())
    }

    fn sumset_target(&self) -> Result<&PatternSpec> {
        match &self.single_pattern()?.kind {
            PatternKind::Sumset { target } => Ok(target),
            _ => Err(Error::InvalidConfig("sumset demo needs a sumset pattern".into())),
        }
    }

    fn isosceles_curve(&self) -> Result<&CurveSpec> {
        match &self.single_pattern()?.kind {
            PatternKind::Isosceles { curve } => {
                curve.build()?;
                Ok(curve)
            }
            _ => Err(Error::InvalidConfig("isosceles demo needs an isosceles pattern".into())),
        }
    }
}

fn final_level(trace: &ConstructionTrace) -> Result<&CubeSet> {
    if let Some(stop) = &trace.stopped {
        return Err(Error::Stopped {
            level: stop.level,
            kind: stop.kind.clone(),
            message: stop.message.clone(),
        });
    }
    trace
        .levels
        .last()
        .ok_or_else(|| Error::Integrity("construction produced no levels".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumsetReport {
    pub d: usize,
    pub beta: f64,
    pub alpha: f64,
    pub final_exponent: u32,
    pub cubes: u64,
    pub y_cells: u64,
    pub certified: bool,
    /// `(x, y)` with `x ≠ y`: excluded by strong non-diagonality against the sum cover.
    pub scan: PairScan,
    /// Final cubes inside half of a `Y` cell; must be empty once `X` has two cubes.
    pub halves_hit: u64,
    pub diagonal_branch_applies: bool,
    pub clean: bool,
}

/// Builds `X` against `{x + y ∈ Y} ∪ {y ∈ Y/2}` and scans every ordered pair of final cubes,
/// diagonal included.
pub fn cmd_demo_sumset(spec: &DemoSpec) -> Result<(ConstructionTrace, SumsetReport)> {
    spec.validate(DemoKind::Sumset)?;
    let target = spec.sumset_target()?.build()?;
    let trace = build(&spec.config)?;
    let x = final_level(&trace)?;
    let s = x.scale();
    let y = target.enumerate(s, &spec.config.budget)?;
    let scan = sumset_pair_scan(x, &y);
    let halves_hit = x
        .iter()
        .filter(|a| y.iter().any(|c| c.iter().zip(a.iter()).all(|(ci, ai)| ci / 2 == *ai)))
        .count() as u64;
    let certified = trace.all_certified();
    let diagonal_branch_applies = x.len() >= 2;
    let clean = certified && scan.clean() && (!diagonal_branch_applies || halves_hit == 0);
    let report = SumsetReport {
        d: spec.config.d,
        beta: target.declared_alpha(),
        alpha: spec.config.alpha,
        final_exponent: s.exponent(),
        cubes: x.len() as u64,
        y_cells: y.len() as u64,
        certified,
        scan,
        halves_hit,
        diagonal_branch_applies,
        clean,
    };
    Ok((trace, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringScan {
    pub curve: CurveSpec,
    pub exponents: Vec<u32>,
    pub counts: Vec<String>,
    /// `a` in `log2 N ≈ a k + b log2 k + c`, `k = log2(1/δ)`.
    pub leading: f64,
    pub log_coefficient: f64,
    /// `N / (δ^-2 log2(1/δ))` per scale.
    pub bound_ratios: Vec<f64>,
    /// The scan stopped early on a resource budget.
    pub partial: bool,
    pub consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportCell {
    pub index: u64,
    /// The cell in the parameter of `f(t) = g(t/(10M)) − g(0)`.
    pub t: (f64, f64),
    /// The same cell divided by `10M`, in the parameter of `g`.
    pub u: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsoscelesReport {
    pub scans: Vec<CoveringScan>,
    pub target_dimension: f64,
    pub final_exponent: u32,
    pub cubes: u64,
    pub certified: bool,
    pub triples: TripleScan,
    pub export: Vec<ExportCell>,
    pub clean: bool,
}

impl IsoscelesReport {
    pub fn export_csv(&self) -> String {
        let mut s = String::from("index,t_lo,t_hi,u_lo,u_hi\n");
        for c in &self.export {
            s.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                c.index, c.t.0, c.t.1, c.u.0, c.u.1
            ));
        }
        s
    }
}

/// Counts `#B_δ(Z)` for the isosceles pattern of `curve` and fits the growth exponent.
pub fn covering_scan(curve: &CurveSpec, min_exp: u32, max_exp: u32, spec: &DemoSpec) -> Result<CoveringScan> {
    let pattern = PatternSpec::new(PatternKind::Isosceles { curve: curve.clone() }, None).build()?;
    let mut exponents = Vec::new();
    let mut logs = Vec::new();
    let mut counts = Vec::new();
    let mut partial = false;
    for k in min_exp..=max_exp {
        match pattern.count(DyadicScale::new(k)?, &spec.config.budget) {
            Ok(c) => {
                exponents.push(k);
                logs.push(log2_big(&c));
                counts.push(c.to_string());
            }
            Err(Error::Budget { .. }) => {
                partial = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let ks: Vec<f64> = exponents.iter().map(|&k| k as f64).collect();
    let (leading, log_coefficient) = match ks.len() {
        0 | 1 => (f64::NAN, f64::NAN),
        2 => (linear_fit(&ks, &logs).0, 0.0),
        _ => {
            let (a, b, _) = fit_with_log_term(&ks, &logs);
            (a, b)
        }
    };
    let bound_ratios = ks
        .iter()
        .zip(&logs)
        .map(|(&k, &l)| (l - 2.0 * k - k.log2()).exp2())
        .collect();
    Ok(CoveringScan {
        curve: curve.clone(),
        exponents,
        counts,
        leading,
        log_coefficient,
        bound_ratios,
        partial,
        consistent: leading <= 2.0 + spec.tolerance,
    })
}

/// Covering scans, then a build with `n = 3`, `α = 2`, then an exhaustive distinct-triple check.
pub fn cmd_demo_isosceles(spec: &DemoSpec) -> Result<(ConstructionTrace, IsoscelesReport)> {
    spec.validate(DemoKind::Isosceles)?;
    let curve = spec.isosceles_curve()?.clone();
    let curves = if spec.scan_curves.is_empty() {
        vec![curve.clone()]
    } else {
        spec.scan_curves.clone()
    };
    let scans = curves
        .iter()
        .map(|c| covering_scan(c, spec.scan_min_exponent, spec.scan_max_exponent, spec))
        .collect::<Result<Vec<_>>>()?;
    let trace = build(&spec.config)?;
    let x = final_level(&trace)?;
    let triples = isosceles_triple_scan(x, &curve);
    let h = x.scale().length();
    let stretch = 10.0 * curve.lipschitz;
    let export = x
        .iter()
        .map(|c| {
            let t = (c[0] as f64 * h, (c[0] + 1) as f64 * h);
            ExportCell {
                index: c[0],
                t,
                u: (t.0 / stretch, t.1 / stretch),
            }
        })
        .collect();
    let certified = trace.all_certified();
    let clean = certified && triples.violations == 0 && scans.iter().all(|s| s.consistent);
    let report = IsoscelesReport {
        scans,
        target_dimension: trace.target_dimension(),
        final_exponent: x.scale().exponent(),
        cubes: x.len() as u64,
        certified,
        triples,
        export,
        clean,
    };
    Ok((trace, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub declared_alpha: f64,
    pub dimension: DimensionReport,
    pub tolerance: f64,
    pub within_tolerance: Option<bool>,
}

/// Builds against a pattern of known dimension and compares the fitted slope with the target.
pub fn cmd_demo_calibration(spec: &DemoSpec) -> Result<(ConstructionTrace, CalibrationReport)> {
    spec.validate(DemoKind::Calibration)?;
    let declared_alpha = spec.single_pattern()?.build()?.declared_alpha();
    let trace = build(&spec.config)?;
    final_level(&trace)?;
    let dimension = cmd_dimension(&trace);
    let within_tolerance = dimension.slope.map(|s| (s - dimension.target).abs() <= spec.tolerance);
    Ok((
        trace,
        CalibrationReport {
            declared_alpha,
            dimension,
            tolerance: spec.tolerance,
            within_tolerance,
        },
    ))
}
