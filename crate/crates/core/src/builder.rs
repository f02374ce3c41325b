//! Iterated single-scale avoidance: scale selection, nested sets `X_k`, and per-level certificates.

use std::sync::Arc;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::avoider::{
    ancestor_counts, avoid_single_scale, compute_intermediate_scale, AvoidanceInstance, PatternCubes,
};
use crate::dyadic::{grid_size, is_strongly_non_diagonal, CubeSet, DyadicScale, MAX_EXPONENT};
use crate::error::{Error, Result};
use crate::oracle::{
    log2_big, strongly_non_diagonal, trivial_projection_complement, Budget, Hyperplane, PatternOracle, PatternSpec,
    SharedOracle, Union,
};

/// Constant used when auditing `r_k <= C l_k^{(dn - α - ε_k)/(d(n-1))}`.
pub const R_BOUND_CONSTANT: f64 = 4.0;

/// `ε_k = (dn − α) · coefficient · ratio^{k−1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpsilonRule {
    pub coefficient: f64,
    pub ratio: f64,
}

impl Default for EpsilonRule {
    fn default() -> Self {
        EpsilonRule {
            coefficient: 0.25,
            ratio: 0.5,
        }
    }
}

impl EpsilonRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.coefficient > 0.0 && self.coefficient < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "epsilon coefficient must lie in (0, 1/2), got {}",
                self.coefficient
            )));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon ratio must lie in (0, 1), got {}",
                self.ratio
            )));
        }
        Ok(())
    }

    /// `ε_k` for `k >= 1`, given the gap `dn − α`.
    pub fn epsilon(&self, gap: f64, k: usize) -> f64 {
        gap * self.coefficient * self.ratio.powi(k as i32 - 1)
    }
}

/// The default rule `ε_k = (dn − α) / 2^{k+1}`.
pub fn epsilon_sequence(alpha: f64, d: usize, n: usize, k: usize) -> f64 {
    EpsilonRule::default().epsilon((d * n) as f64 - alpha, k)
}

fn default_max_exp() -> u32 {
    MAX_EXPONENT
}
fn default_slack() -> f64 {
    2.0
}
fn default_attempts() -> u32 {
    64
}
fn default_trivial_exp() -> u32 {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub d: usize,
    pub n: usize,
    pub alpha: f64,
    /// The components `Y_i`.
    pub patterns: Vec<PatternSpec>,
    pub levels: usize,
    #[serde(default)]
    pub epsilon_rule: EpsilonRule,
    #[serde(default = "default_max_exp")]
    pub max_scale_exponent: u32,
    /// Smallest `log2(1/l_k)` considered at any level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_scale_exponent: Option<u32>,
    /// Multiplier on the right side of the covering bound `#B(Z_k) <= l^{-α-ε/2}`.
    #[serde(default = "default_slack")]
    pub count_slack: f64,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default)]
    pub budget: Budget,
    /// Grid used when `α < d`.
    #[serde(default = "default_trivial_exp")]
    pub trivial_scale_exponent: u32,
    pub seed: u64,
}

impl BuildConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: BuildConfig =
            serde_json::from_str(s).map_err(|e| Error::InvalidConfig(format!("cannot parse build config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn gap(&self) -> f64 {
        (self.d * self.n) as f64 - self.alpha
    }

    /// The exponent `(dn − α)/(n − 1)`.
    pub fn target_dimension(&self) -> f64 {
        self.gap() / (self.n - 1) as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n < 2 {
            return Err(Error::InvalidConfig(format!(
                "need d >= 1 and n >= 2, got d = {}, n = {}",
                self.d, self.n
            )));
        }
        let dn = (self.d * self.n) as f64;
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "alpha must be finite and non-negative, got {}",
                self.alpha
            )));
        }
        if self.alpha >= dn {
            return Err(Error::InvalidConfig(format!(
                "alpha = {} is not below dn = {dn}; the case alpha = dn is trivial since X = ∅ avoids every pattern",
                self.alpha
            )));
        }
        if self.levels == 0 {
            return Err(Error::InvalidConfig("levels must be at least 1".into()));
        }
        if self.patterns.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one pattern component is required".into(),
            ));
        }
        self.epsilon_rule.validate()?;
        if self.max_scale_exponent > MAX_EXPONENT {
            return Err(Error::InvalidConfig(format!(
                "max_scale_exponent {} exceeds {MAX_EXPONENT}",
                self.max_scale_exponent
            )));
        }
        if self.trivial_scale_exponent > MAX_EXPONENT {
            return Err(Error::InvalidConfig(format!(
                "trivial_scale_exponent {} exceeds {MAX_EXPONENT}",
                self.trivial_scale_exponent
            )));
        }
        if !(self.count_slack.is_finite() && self.count_slack >= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "count_slack must be >= 1, got {}",
                self.count_slack
            )));
        }
        if self.max_attempts == 0 {
            return Err(Error::InvalidConfig("max_attempts must be positive".into()));
        }
        Ok(())
    }

    /// Builds the component oracles, checking dimensions and declared exponents.
    pub fn build_patterns(&self) -> Result<Vec<SharedOracle>> {
        let dn = self.d * self.n;
        self.patterns
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let o = p.build()?;
                if o.ambient_dim() != dn {
                    return Err(Error::InvalidConfig(format!(
                        "pattern {} lives in dimension {}, expected {dn}",
                        i + 1,
                        o.ambient_dim()
                    )));
                }
                if o.declared_alpha() > self.alpha + 1e-12 {
                    return Err(Error::InvalidConfig(format!(
                        "pattern {} declares dimension {} above alpha = {}",
                        i + 1,
                        o.declared_alpha(),
                        self.alpha
                    )));
                }
                Ok(o)
            })
            .collect()
    }
}

/// Diagonal enumeration `1; 1,2; 1,2,3; ...` with blocks capped at `num_components`, 1-based.
pub fn strong_cover_schedule(num_components: usize, length: usize) -> Vec<usize> {
    assert!(num_components >= 1, "schedule needs at least one component");
    let mut out = Vec::with_capacity(length);
    let mut block = 1;
    while out.len() < length {
        for i in 1..=block.min(num_components) {
            if out.len() == length {
                break;
            }
            out.push(i);
        }
        block += 1;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleChecks {
    /// `#B_l(Z_k) <= slack · l^{-α-ε_k/2}`.
    pub covering: bool,
    /// `l^{dn-α-ε_k} <= l_{k-1}^{dn} / 2`.
    pub cover_bound: bool,
    /// `l^{ε_k} <= l_{k-1}^{2d}`.
    pub decay: bool,
    /// `(l_{k-1}/l)^d <= #B_l(Z_k) <= (l_{k-1}/l)^{dn}/2`.
    pub hypothesis: bool,
}

impl ScaleChecks {
    pub fn all(&self) -> bool {
        self.covering && self.cover_bound && self.decay && self.hypothesis
    }
}

#[derive(Clone, Debug)]
pub struct ScaleChoice {
    pub scale: DyadicScale,
    pub count: BigUint,
    pub checks: ScaleChecks,
}

/// Inputs to scale selection at one level.
#[derive(Clone, Copy, Debug)]
pub struct ScaleQuery<'a> {
    pub k: usize,
    pub z: &'a dyn PatternOracle,
    pub l_prev: DyadicScale,
    pub epsilon: f64,
    pub alpha: f64,
    pub d: usize,
    pub n: usize,
    pub min_exponent: u32,
    pub cap: u32,
    pub slack: f64,
    pub budget: &'a Budget,
}

fn count_free_checks(q: &ScaleQuery, j: u32) -> (bool, bool) {
    let dn = (q.d * q.n) as f64;
    let jp = q.l_prev.exponent() as f64;
    let j = j as f64;
    let cover_bound = j * (dn - q.alpha - q.epsilon) >= 1.0 + jp * dn;
    let decay = j * q.epsilon >= 2.0 * q.d as f64 * jp;
    (cover_bound, decay)
}

/// All four scale conditions at `l = 2^-j`, given `#B_l(Z_k)`.
pub fn scale_checks(q: &ScaleQuery, j: u32, count: &BigUint) -> ScaleChecks {
    let (cover_bound, decay) = count_free_checks(q, j);
    let covering =
        count > &BigUint::from(0u8) && log2_big(count) <= q.slack.log2() + j as f64 * (q.alpha + q.epsilon / 2.0);
    let gap = (j - q.l_prev.exponent().min(j)) as usize;
    let hypothesis = gap > 0
        && &(BigUint::from(1u8) << (gap * q.d)) <= count
        && count <= &(BigUint::from(1u8) << (gap * q.d * q.n - 1));
    ScaleChecks {
        covering,
        cover_bound,
        decay,
        hypothesis,
    }
}

/// The largest dyadic `l < l_prev` within the cap satisfying every scale condition.
pub fn select_scale(q: &ScaleQuery) -> Result<ScaleChoice> {
    let start = (q.l_prev.exponent() + 1).max(q.min_exponent);
    let mut last_failure = format!("no exponent in [{start}, {}]", q.cap);
    // set when the last candidate failed only the hypothesis
    let mut hypothesis_failure = None;
    for j in start..=q.cap {
        let (cover_bound, decay) = count_free_checks(q, j);
        if !cover_bound {
            last_failure = format!("l^(dn-α-ε) <= l_prev^dn / 2 fails at l = 2^-{j}");
            hypothesis_failure = None;
            continue;
        }
        if !decay {
            last_failure = format!("l^ε <= l_prev^(2d) fails at l = 2^-{j}");
            hypothesis_failure = None;
            continue;
        }
        let scale = DyadicScale::new(j)?;
        let count = q.z.count(scale, q.budget)?;
        let checks = scale_checks(q, j, &count);
        if checks.all() {
            return Ok(ScaleChoice { scale, count, checks });
        }
        hypothesis_failure = None;
        last_failure = if !checks.covering {
            format!("#B(Z_k) = {count} exceeds {} · l^(-α-ε/2) at l = 2^-{j}", q.slack)
        } else {
            let gap = (j - q.l_prev.exponent()) as usize;
            hypothesis_failure = Some(Error::Hypothesis {
                count: count.to_string(),
                lower: (BigUint::from(1u8) << (gap * q.d)).to_string(),
                upper: (BigUint::from(1u8) << (gap * q.d * q.n - 1)).to_string(),
            });
            format!("(l_prev/l)^d <= #B(Z_k) <= (l_prev/l)^(dn)/2 fails at l = 2^-{j} with count {count}")
        };
    }
    Err(hypothesis_failure.unwrap_or(Error::ScaleBudgetExhausted {
        level: q.k,
        reason: last_failure,
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Iterated single-scale avoidance.
    Multiscale,
    /// `α < d`: complement of the first-factor shadow of the pattern.
    ProjectionComplement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub k: usize,
    /// 1-based component index `i_k`.
    pub pattern_index: usize,
    pub epsilon: f64,
    pub l_exp: u32,
    pub r_exp: u32,
    /// `#B_{l_k}(Z_k)` in decimal.
    pub count: String,
    pub log2_count: f64,
    pub conflicts: u64,
    pub attempts: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelCertificate {
    pub k: usize,
    pub scale_checks: ScaleChecks,
    /// Every cube of `X_k` lies in a cube of `X_{k-1}`.
    pub nested: bool,
    /// `l_k <= r_k <= l_{k-1}`.
    pub scales_ordered: bool,
    /// `log2(r_k / l_k^{(dn-α-ε_k)/(d(n-1))})`.
    pub r_bound_log2_ratio: f64,
    /// `r_k <= 4 l_k^{(dn-α-ε_k)/(d(n-1))}`.
    pub r_bound: bool,
    /// Constant implied by minimality of `r_k`, the slack, and the decay condition.
    pub r_bound_provable_constant: f64,
    /// Fewest cubes of `X_k` in one cube of `X_{k-1}`.
    pub min_per_parent: u64,
    /// `(l_{k-1}/r_k)^d` in decimal; large size asks for twice `min_per_parent` to reach it.
    pub parent_target: String,
    pub many_per_parent: bool,
    pub worst_cell_count: u64,
    pub well_distributed: bool,
    /// No strongly non-diagonal cube of `Z_k` at `l_k` has all factors in `X_k`.
    pub avoidance: bool,
    /// `#X_k >= #X_{k-1} (l_{k-1}/r_k)^d / 2`.
    pub growth: bool,
}

impl LevelCertificate {
    pub fn passes(&self) -> bool {
        self.scale_checks.all()
            && self.nested
            && self.scales_ordered
            && self.r_bound
            && self.many_per_parent
            && self.well_distributed
            && self.avoidance
            && self.growth
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopKind {
    ScaleBudgetExhausted,
    Hypothesis,
    ResampleFailed,
    ResourceBudget,
    Other,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopReason {
    pub level: usize,
    pub kind: StopKind,
    pub message: String,
}

impl StopReason {
    fn from_error(level: usize, e: &Error) -> Self {
        let kind = match e {
            Error::ScaleBudgetExhausted { .. } | Error::ScaleOverflow(_) => StopKind::ScaleBudgetExhausted,
            Error::Hypothesis { .. } => StopKind::Hypothesis,
            Error::ResampleFailed { .. } => StopKind::ResampleFailed,
            Error::Budget { .. } => StopKind::ResourceBudget,
            _ => StopKind::Other,
        };
        StopReason {
            level,
            kind,
            message: e.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructionTrace {
    pub d: usize,
    pub n: usize,
    pub alpha: f64,
    pub seed: u64,
    pub route: Route,
    pub requested_levels: usize,
    pub epsilon_rule: EpsilonRule,
    pub count_slack: f64,
    pub r_bound_constant: f64,
    pub schedule: Vec<ScheduleEntry>,
    /// `X_1, X_2, ...`; `X_0 = [0,1)^d` is implicit.
    pub levels: Vec<CubeSet>,
    pub certificates: Vec<LevelCertificate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stopped: Option<StopReason>,
}

impl ConstructionTrace {
    pub fn target_dimension(&self) -> f64 {
        ((self.d * self.n) as f64 - self.alpha) / (self.n - 1) as f64
    }

    pub fn built_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn all_certified(&self) -> bool {
        !self.levels.is_empty() && self.certificates.iter().all(LevelCertificate::passes)
    }

    /// `X_k` for `k >= 0`.
    pub fn level(&self, k: usize) -> CubeSet {
        if k == 0 {
            CubeSet::full(self.d, DyadicScale::unit(), 1).expect("one cube")
        } else {
            self.levels[k - 1].clone()
        }
    }

    pub fn l_exp(&self, k: usize) -> u32 {
        if k == 0 {
            0
        } else {
            self.schedule[k - 1].l_exp
        }
    }

    pub fn r_exp(&self, k: usize) -> u32 {
        self.schedule[k - 1].r_exp
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: ConstructionTrace = serde_json::from_str(s)?;
        if t.levels.len() != t.schedule.len() || t.levels.len() != t.certificates.len() {
            return Err(Error::Integrity(
                "trace levels, schedule and certificates disagree in length".into(),
            ));
        }
        Ok(t)
    }
}

/// `Z_k = Y_i ∪ H`.
pub fn augmented_pattern(y: &SharedOracle, d: usize, n: usize) -> Result<SharedOracle> {
    Ok(Arc::new(Union::new(y.clone(), Arc::new(Hyperplane::new(d, n)?))?))
}

/// Runs the construction, returning the longest certified prefix on failure.
pub fn build(config: &BuildConfig) -> Result<ConstructionTrace> {
    config.validate()?;
    let ys = config.build_patterns()?;
    let mut trace = ConstructionTrace {
        d: config.d,
        n: config.n,
        alpha: config.alpha,
        seed: config.seed,
        route: Route::Multiscale,
        requested_levels: config.levels,
        epsilon_rule: config.epsilon_rule,
        count_slack: config.count_slack,
        r_bound_constant: R_BOUND_CONSTANT,
        schedule: Vec::new(),
        levels: Vec::new(),
        certificates: Vec::new(),
        stopped: None,
    };
    if config.alpha < config.d as f64 {
        return build_projection_complement(config, &ys, trace);
    }
    let schedule = strong_cover_schedule(ys.len(), config.levels);
    let mut x_prev = trace.level(0);
    for (k, &i) in (1..).zip(&schedule) {
        match build_level(config, &ys[i - 1], i, k, &x_prev) {
            Ok((entry, x, cert)) => {
                trace.schedule.push(entry);
                trace.certificates.push(cert);
                trace.levels.push(x.clone());
                x_prev = x;
            }
            Err(e) => {
                trace.stopped = Some(StopReason::from_error(k, &e));
                break;
            }
        }
    }
    Ok(trace)
}

fn build_level(
    config: &BuildConfig,
    y: &SharedOracle,
    i: usize,
    k: usize,
    x_prev: &CubeSet,
) -> Result<(ScheduleEntry, CubeSet, LevelCertificate)> {
    let (d, n) = (config.d, config.n);
    let z = augmented_pattern(y, d, n)?;
    let epsilon = config.epsilon_rule.epsilon(config.gap(), k);
    let l_prev = x_prev.scale();
    let q = ScaleQuery {
        k,
        z: z.as_ref(),
        l_prev,
        epsilon,
        alpha: config.alpha,
        d,
        n,
        min_exponent: config.min_scale_exponent.unwrap_or(0),
        cap: config.max_scale_exponent,
        slack: config.count_slack,
        budget: &config.budget,
    };
    let choice = select_scale(&q)?;
    let inst = AvoidanceInstance {
        d,
        n,
        l: l_prev,
        s: choice.scale,
        e: x_prev,
        g: PatternCubes::Oracle {
            oracle: z.as_ref(),
            count: &choice.count,
            budget: &config.budget,
        },
    };
    let res = avoid_single_scale(
        &inst,
        config.seed,
        (k as u64) << 32,
        config.max_attempts,
        &config.budget,
    )?;
    let r = res.r();
    let x = res.f;
    let cert = certify_level(config, k, epsilon, x_prev, &x, r, &inst, choice.checks)?;
    let entry = ScheduleEntry {
        k,
        pattern_index: i,
        epsilon,
        l_exp: choice.scale.exponent(),
        r_exp: r.exponent(),
        count: choice.count.to_string(),
        log2_count: log2_big(&choice.count),
        conflicts: res.conflicts,
        attempts: res.attempts,
    };
    Ok((entry, x, cert))
}

/// `log2` of `r / l^{(dn-α-ε)/(d(n-1))}`.
pub fn r_bound_log2_ratio(d: usize, n: usize, alpha: f64, epsilon: f64, l_exp: u32, r_exp: u32) -> f64 {
    let e = ((d * n) as f64 - alpha - epsilon) / (d * (n - 1)) as f64;
    -(r_exp as f64) + l_exp as f64 * e
}

#[allow(clippy::too_many_arguments)]
fn certify_level(
    config: &BuildConfig,
    k: usize,
    epsilon: f64,
    x_prev: &CubeSet,
    x: &CubeSet,
    r: DyadicScale,
    inst: &AvoidanceInstance,
    scale_checks: ScaleChecks,
) -> Result<LevelCertificate> {
    let (d, n) = (config.d, config.n);
    let (l_prev, l) = (x_prev.scale(), x.scale());
    let per_parent = ancestor_counts(x, l_prev);
    let nested = per_parent.iter().all(|(p, _)| x_prev.contains(p));
    let min_per_parent = x_prev
        .iter()
        .map(|p| {
            per_parent
                .binary_search_by(|(a, _)| a.as_slice().cmp(p))
                .map(|i| per_parent[i].1)
                .unwrap_or(0)
        })
        .min()
        .unwrap_or(0);
    let parent_target = grid_size(d, DyadicScale::new(r.exponent() - l_prev.exponent())?);
    let worst_cell_count = ancestor_counts(x, r).iter().map(|(_, c)| *c).max().unwrap_or(0);
    let conflicts = inst.g.conflicts_within(x, d, n)?;
    let ratio = r_bound_log2_ratio(d, n, config.alpha, epsilon, l.exponent(), r.exponent());
    let provable = 2.0 * (2.0 * config.count_slack).powf(1.0 / (d * (n - 1)) as f64);
    let growth = BigUint::from(2 * x.len()) >= BigUint::from(x_prev.len()) * &parent_target;
    Ok(LevelCertificate {
        k,
        scale_checks,
        nested,
        scales_ordered: l_prev <= r && r <= l,
        r_bound_log2_ratio: ratio,
        r_bound: ratio <= R_BOUND_CONSTANT.log2(),
        r_bound_provable_constant: provable,
        min_per_parent,
        parent_target: parent_target.to_string(),
        many_per_parent: BigUint::from(2 * min_per_parent) >= parent_target,
        worst_cell_count,
        well_distributed: worst_cell_count <= 1,
        avoidance: conflicts.is_empty(),
        growth,
    })
}

fn build_projection_complement(
    config: &BuildConfig,
    ys: &[SharedOracle],
    mut trace: ConstructionTrace,
) -> Result<ConstructionTrace> {
    trace.route = Route::ProjectionComplement;
    let (d, n) = (config.d, config.n);
    let scale = DyadicScale::new(config.trivial_scale_exponent)?;
    let mut z = ys[0].clone();
    for y in &ys[1..] {
        z = Arc::new(Union::new(z, y.clone())?);
    }
    let x = trivial_projection_complement(z.as_ref(), d, n, scale, &config.budget)?;
    let cover = z.enumerate(scale, &config.budget)?;
    let shadow = cover.first_factors(d)?;
    let avoidance = x.intersection(&shadow)?.is_empty();
    let full = grid_size(d, scale);
    let count = cover.cover_count();
    trace.schedule.push(ScheduleEntry {
        k: 1,
        pattern_index: 0,
        epsilon: 0.0,
        l_exp: scale.exponent(),
        r_exp: scale.exponent(),
        count: count.to_string(),
        log2_count: if count == BigUint::from(0u8) {
            f64::NEG_INFINITY
        } else {
            log2_big(&count)
        },
        conflicts: 0,
        attempts: 0,
    });
    trace.certificates.push(LevelCertificate {
        k: 1,
        scale_checks: ScaleChecks {
            covering: true,
            cover_bound: true,
            decay: true,
            hypothesis: true,
        },
        nested: true,
        scales_ordered: true,
        r_bound_log2_ratio: 0.0,
        r_bound: true,
        r_bound_provable_constant: 1.0,
        min_per_parent: x.len() as u64,
        parent_target: full.to_string(),
        many_per_parent: !x.is_empty(),
        worst_cell_count: 1,
        well_distributed: true,
        avoidance,
        growth: true,
    });
    trace.levels.push(x);
    Ok(trace)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelVerdict {
    pub k: usize,
    pub nested: bool,
    /// Cubes of `X_k` outside `X_{k-1}`.
    pub stray_cubes: Vec<Vec<u64>>,
    pub conflict_count: u64,
    /// Up to ten strongly non-diagonal pattern cubes with all factors in `X_k`.
    pub conflicts: Vec<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvoidanceReport {
    pub levels: Vec<LevelVerdict>,
    /// Distinct-factor tuples from the finest level tested against every component.
    pub tuples_tested: u64,
    pub exhaustive: bool,
    pub tuple_violation_count: u64,
    /// Up to ten violating tuples.
    pub tuple_violations: Vec<Vec<u64>>,
}

impl AvoidanceReport {
    pub fn clean(&self) -> bool {
        self.tuple_violations.is_empty() && self.levels.iter().all(|v| v.nested && v.conflict_count == 0)
    }
}

/// Re-derives every `Z_k` cover and re-checks nestedness and avoidance level by level.
///
/// Conflicts are recomputed per component rather than through the union, and the finest level
/// is additionally probed with up to `tuple_limit` tuples of distinct cubes.
pub fn verify_strong_avoidance(
    trace: &ConstructionTrace,
    patterns: &[SharedOracle],
    budget: &Budget,
    tuple_limit: u64,
) -> Result<AvoidanceReport> {
    if trace.levels.is_empty() {
        return Err(Error::Precondition("trace has no levels".into()));
    }
    let (d, n) = (trace.d, trace.n);
    let mut levels = Vec::new();
    for k in 1..=trace.levels.len() {
        let x = &trace.levels[k - 1];
        let prev = trace.level(k - 1);
        let stray: Vec<Vec<u64>> = if trace.route == Route::ProjectionComplement {
            Vec::new()
        } else {
            let shift = x.scale().exponent() - prev.scale().exponent();
            x.iter()
                .filter(|c| !prev.contains(&c.iter().map(|a| a >> shift).collect::<Vec<_>>()))
                .take(10)
                .map(|c| c.to_vec())
                .collect()
        };
        let mut found = CubeSet::empty(d * n, x.scale());
        match trace.route {
            Route::Multiscale => {
                let i = trace.schedule[k - 1].pattern_index;
                let y = patterns.get(i - 1).ok_or_else(|| {
                    Error::Precondition(format!("trace uses component {i} but only {} supplied", patterns.len()))
                })?;
                let h = Hyperplane::new(d, n)?;
                for part in [y.as_ref(), &h as &dyn PatternOracle] {
                    let within = part.enumerate_within(x.scale(), x, n, budget)?;
                    found = found.union(&strongly_non_diagonal(&within, d))?;
                }
            }
            Route::ProjectionComplement => {
                // any pattern cube whose first factor lies in X_k, diagonal or not
                for y in patterns {
                    let cover = y.enumerate(x.scale(), budget)?;
                    let hits: Vec<u64> = cover
                        .iter()
                        .filter(|c| x.contains(&c[..d]))
                        .flatten()
                        .copied()
                        .collect();
                    found = found.union(&CubeSet::from_flat(d * n, x.scale(), hits)?)?;
                }
            }
        }
        levels.push(LevelVerdict {
            k,
            nested: stray.is_empty(),
            stray_cubes: stray,
            conflict_count: found.len() as u64,
            conflicts: found.iter().take(10).map(|c| c.to_vec()).collect(),
        });
    }
    let last = trace.levels.last().unwrap();
    let h = Hyperplane::new(d, n)?;
    let parts: Vec<&dyn PatternOracle> = match trace.route {
        // earlier components were avoided at coarser scales only
        Route::Multiscale => {
            let i = trace.schedule.last().unwrap().pattern_index;
            vec![patterns[i - 1].as_ref(), &h]
        }
        Route::ProjectionComplement => patterns.iter().map(|p| p.as_ref()).collect(),
    };
    let probe = probe_tuples(last, &parts, n, tuple_limit, trace.seed);
    Ok(AvoidanceReport {
        levels,
        tuples_tested: probe.tested,
        exhaustive: probe.exhaustive,
        tuple_violation_count: probe.violation_count,
        tuple_violations: probe.violations,
    })
}

struct TupleProbe {
    tested: u64,
    exhaustive: bool,
    violation_count: u64,
    violations: Vec<Vec<u64>>,
}

/// Tests tuples of distinct cubes of `x` against each part's `contains`.
fn probe_tuples(x: &CubeSet, parts: &[&dyn PatternOracle], n: usize, limit: u64, seed: u64) -> TupleProbe {
    let m = x.len() as u64;
    let d = x.dim();
    let mut out = TupleProbe {
        tested: 0,
        exhaustive: true,
        violation_count: 0,
        violations: Vec::new(),
    };
    if m < n as u64 {
        return out;
    }
    let total = (0..n as u64).try_fold(1u64, |acc, i| acc.checked_mul(m - i));
    let mut idx = vec![0u64; d * n];
    let mut check = |picks: &[usize], out: &mut TupleProbe| {
        for (slot, &p) in picks.iter().enumerate() {
            idx[slot * d..(slot + 1) * d].copy_from_slice(x.get(p));
        }
        debug_assert!(is_strongly_non_diagonal(&idx, d));
        out.tested += 1;
        if parts.iter().any(|y| y.contains(x.scale(), &idx)) {
            out.violation_count += 1;
            if out.violations.len() < 10 {
                out.violations.push(idx.clone());
            }
        }
    };
    match total {
        Some(t) if t <= limit => {
            let mut picks = vec![0usize; n];
            loop {
                let distinct = (0..n).all(|a| (a + 1..n).all(|b| picks[a] != picks[b]));
                if distinct {
                    check(&picks, &mut out);
                }
                let mut i = n;
                loop {
                    if i == 0 {
                        return out;
                    }
                    i -= 1;
                    picks[i] += 1;
                    if picks[i] < m as usize {
                        break;
                    }
                    picks[i] = 0;
                }
            }
        }
        _ => {
            out.exhaustive = false;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7475_706c_6573);
            while out.tested < limit {
                let mut picks: Vec<usize> = Vec::with_capacity(n);
                while picks.len() < n {
                    let p = rng.gen_range(0..m as usize);
                    if !picks.contains(&p) {
                        picks.push(p);
                    }
                }
                check(&picks, &mut out);
            }
            out
        }
    }
}

/// Re-runs the intermediate-scale computation for level `k` of a trace.
pub fn recompute_r(trace: &ConstructionTrace, k: usize, z: &dyn PatternOracle, budget: &Budget) -> Result<DyadicScale> {
    let x_prev = trace.level(k - 1);
    let s = DyadicScale::new(trace.l_exp(k))?;
    let count = z.count(s, budget)?;
    let inst = AvoidanceInstance {
        d: trace.d,
        n: trace.n,
        l: x_prev.scale(),
        s,
        e: &x_prev,
        g: PatternCubes::Oracle {
            oracle: z,
            count: &count,
            budget,
        },
    };
    compute_intermediate_scale(&inst)
}
