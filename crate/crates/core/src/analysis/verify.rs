use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::avoider::{verify_properties, AvoidanceInstance, PatternCubes, PropertyReport};
use crate::builder::{
    augmented_pattern, recompute_r, verify_strong_avoidance, AvoidanceReport, ConstructionTrace, Route,
};
use crate::dyadic::DyadicScale;
use crate::error::{Error, Result};
use crate::oracle::{Budget, PatternSpec, SharedOracle};

/// Sampled tuples when the final level is too large for full enumeration.
const SAMPLED_TUPLES: u64 = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelProperties {
    pub k: usize,
    pub r_exp: u32,
    pub r_recomputed: u32,
    pub properties: PropertyReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub avoidance: AvoidanceReport,
    pub levels: Vec<LevelProperties>,
    /// Final-level conflicts found by the cover scan and by tuple enumeration coincide.
    /// `None` when tuples were sampled.
    pub dual_agreement: Option<bool>,
    pub clean: bool,
}

/// Pattern components from a config object, a demo spec, or a bare list.
pub fn parse_patterns(text: &str) -> Result<Vec<PatternSpec>> {
    let v: Value = serde_json::from_str(text)?;
    let list = match &v {
        Value::Array(_) => v,
        Value::Object(o) => o
            .get("patterns")
            .or_else(|| o.get("config").and_then(|c| c.get("patterns")))
            .cloned()
            .ok_or_else(|| Error::InvalidConfig("no `patterns` list found".into()))?,
        _ => return Err(Error::InvalidConfig("pattern file must be a list or an object".into())),
    };
    serde_json::from_value(list).map_err(|e| Error::InvalidConfig(format!("cannot parse patterns: {e}")))
}

/// Re-checks a trace against freshly built pattern oracles.
///
/// Tuples of distinct final cubes are enumerated exhaustively when there are at most
/// `exhaustive_limit` final cubes.
pub fn cmd_verify(
    trace: &ConstructionTrace,
    patterns: &[PatternSpec],
    budget: &Budget,
    exhaustive_limit: usize,
) -> Result<VerifyReport> {
    let oracles: Vec<SharedOracle> = patterns.iter().map(PatternSpec::build).collect::<Result<_>>()?;
    let last = trace
        .levels
        .last()
        .ok_or_else(|| Error::Precondition("trace has no levels".into()))?;
    let tuple_limit = if last.len() <= exhaustive_limit {
        u64::MAX
    } else {
        SAMPLED_TUPLES
    };
    let avoidance = verify_strong_avoidance(trace, &oracles, budget, tuple_limit)?;

    let mut levels = Vec::new();
    if trace.route == Route::Multiscale {
        for k in 1..=trace.levels.len() {
            let i = trace.schedule[k - 1].pattern_index;
            let z = augmented_pattern(&oracles[i - 1], trace.d, trace.n)?;
            let e = trace.level(k - 1);
            let s = DyadicScale::new(trace.l_exp(k))?;
            let count = z.count(s, budget)?;
            let inst = AvoidanceInstance {
                d: trace.d,
                n: trace.n,
                l: e.scale(),
                s,
                e: &e,
                g: PatternCubes::Oracle {
                    oracle: z.as_ref(),
                    count: &count,
                    budget,
                },
            };
            let r = DyadicScale::new(trace.r_exp(k))?;
            let properties = verify_properties(&inst, &trace.levels[k - 1], r)?;
            let r_recomputed = recompute_r(trace, k, z.as_ref(), budget)?.exponent();
            levels.push(LevelProperties {
                k,
                r_exp: r.exponent(),
                r_recomputed,
                properties,
            });
        }
    }

    let final_conflicts = avoidance.levels.last().map_or(0, |v| v.conflict_count);
    let dual_agreement = avoidance.exhaustive.then(|| match trace.route {
        Route::Multiscale => final_conflicts == avoidance.tuple_violation_count,
        // the cover scan also sees diagonal tuples here
        Route::ProjectionComplement => (final_conflicts == 0) == (avoidance.tuple_violation_count == 0),
    });
    let clean = avoidance.clean()
        && dual_agreement != Some(false)
        && levels
            .iter()
            .all(|l| l.properties.all_pass() && l.r_exp == l.r_recomputed);
    Ok(VerifyReport {
        avoidance,
        levels,
        dual_agreement,
        clean,
    })
}
