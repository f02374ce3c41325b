//! One application of the single-scale selection: pick one fine cube per intermediate cell,
//! then drop the first factor of every strongly non-diagonal pattern cube that survived.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dyadic::{grid_size, is_strongly_non_diagonal, CubeSet, DyadicScale};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::oracle::{strongly_non_diagonal, Budget, PatternOracle};

/// The fine-scale pattern cubes `G`, either listed or served by an oracle.
#[derive(Clone, Copy, Debug)]
pub enum PatternCubes<'a> {
    Explicit(&'a CubeSet),
    Oracle {
        oracle: &'a dyn PatternOracle,
        count: &'a BigUint,
        budget: &'a Budget,
    },
}

impl PatternCubes<'_> {
    pub fn count(&self) -> BigUint {
        match self {
            PatternCubes::Explicit(g) => g.cover_count(),
            PatternCubes::Oracle { count, .. } => (*count).clone(),
        }
    }

    /// Strongly non-diagonal cubes of `G` whose factors all lie in `factors`.
    pub fn conflicts_within(&self, factors: &CubeSet, d: usize, n: usize) -> Result<CubeSet> {
        match self {
            PatternCubes::Explicit(g) => Ok(collect_conflicts(factors, g, d, n)),
            PatternCubes::Oracle { oracle, budget, .. } => {
                let within = oracle.enumerate_within(factors.scale(), factors, n, budget)?;
                Ok(strongly_non_diagonal(&within, d))
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AvoidanceInstance<'a> {
    pub d: usize,
    pub n: usize,
    /// Scale of `E`.
    pub l: DyadicScale,
    /// Scale of `G` and of the output.
    pub s: DyadicScale,
    pub e: &'a CubeSet,
    pub g: PatternCubes<'a>,
}

impl AvoidanceInstance<'_> {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n < 2 {
            return Err(Error::Precondition(format!(
                "need d >= 1 and n >= 2, got d = {}, n = {}",
                self.d, self.n
            )));
        }
        if self.l.exponent() >= self.s.exponent() {
            return Err(Error::Precondition(format!(
                "l = {} must be strictly coarser than s = {}",
                self.l, self.s
            )));
        }
        if self.e.dim() != self.d || self.e.scale() != self.l {
            return Err(Error::Precondition("E must be a set of l-cubes in dimension d".into()));
        }
        if self.e.is_empty() {
            return Err(Error::Precondition("E must be nonempty".into()));
        }
        if let PatternCubes::Explicit(g) = self.g {
            if g.dim() != self.d * self.n || g.scale() != self.s {
                return Err(Error::Precondition("G must be a set of s-cubes in dimension dn".into()));
            }
        }
        Ok(())
    }

    /// `log2(l/s)`.
    fn gap(&self) -> u32 {
        self.s.exponent() - self.l.exponent()
    }

    /// `(l/s)^d` and `(l/s)^{dn} / 2` as exact integers.
    pub fn hypothesis_bounds(&self) -> (BigUint, BigUint) {
        let g = self.gap() as usize;
        let lower = BigUint::from(1u8) << (g * self.d);
        let upper = BigUint::from(1u8) << (g * self.d * self.n - 1);
        (lower, upper)
    }
}

/// Both sides of `(l/s)^d <= #G <= (l/s)^{dn}/2`, exactly.
pub fn check_hypothesis(inst: &AvoidanceInstance) -> bool {
    let (lower, upper) = inst.hypothesis_bounds();
    let c = inst.g.count();
    lower <= c && c <= upper
}

fn require_hypothesis(inst: &AvoidanceInstance) -> Result<()> {
    inst.validate()?;
    if !check_hypothesis(inst) {
        let (lower, upper) = inst.hypothesis_bounds();
        return Err(Error::Hypothesis {
            count: inst.g.count().to_string(),
            lower: lower.to_string(),
            upper: upper.to_string(),
        });
    }
    Ok(())
}

/// The smallest dyadic `r = 2^-m` with `r^{d(n-1)} >= 2 l^{-d} s^{dn} #G`.
///
/// With `l = 2^-a`, `s = 2^-b`, the condition reads `2^{bdn - ad - 1 - m d(n-1)} >= #G`.
pub fn compute_intermediate_scale(inst: &AvoidanceInstance) -> Result<DyadicScale> {
    require_hypothesis(inst)?;
    let (a, b) = (inst.l.exponent() as i64, inst.s.exponent() as i64);
    let (d, n) = (inst.d as i64, inst.n as i64);
    let count = inst.g.count();
    let ceil_log = (count - 1u8).bits() as i64;
    let top = b * d * n - a * d - 1 - ceil_log;
    let m = top.div_euclid(d * (n - 1));
    DyadicScale::new(m as u32)
}

/// Whether `r = 2^-m` satisfies `r^{d(n-1)} >= 2 l^{-d} s^{dn} #G`.
pub fn r_meets_bound(inst: &AvoidanceInstance, m: u32) -> bool {
    let (a, b) = (inst.l.exponent() as i64, inst.s.exponent() as i64);
    let (d, n) = (inst.d as i64, inst.n as i64);
    let e = b * d * n - a * d - 1 - m as i64 * d * (n - 1);
    if e < 0 {
        return false;
    }
    (BigUint::from(1u8) << e as usize) >= inst.g.count()
}

/// `⌊(l/r)^d / 2⌋`.
pub fn conflict_threshold(d: usize, l: DyadicScale, r: DyadicScale) -> BigUint {
    let e = (r.exponent() - l.exponent()) as usize * d;
    if e == 0 {
        BigUint::zero()
    } else {
        BigUint::from(1u8) << (e - 1)
    }
}

fn cube_seed(seed: u64, stream: u64, index: &[u64]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(stream.to_le_bytes());
    for a in index {
        h.update(a.to_le_bytes());
    }
    h.finalize().into()
}

/// One uniformly chosen `s`-subcube per `r`-cube of `E`.
///
/// Each choice is drawn from a ChaCha8 stream keyed by a SHA-256 hash of
/// `(seed, stream, r-cube index)`, so results do not depend on iteration order.
pub fn random_select(
    inst: &AvoidanceInstance,
    r: DyadicScale,
    seed: u64,
    stream: u64,
    budget: &Budget,
) -> Result<CubeSet> {
    if r < inst.l || r > inst.s {
        return Err(Error::Precondition(format!(
            "r = {r} must lie between s = {} and l = {}",
            inst.s, inst.l
        )));
    }
    let cells = inst.e.refine(r, budget.max_cubes)?;
    let shift = inst.s.exponent() - r.exponent();
    let d = inst.d;
    let data = Exec::current().flat_map_range(cells.len() as u64, |i| {
        let c = cells.get(i as usize);
        if shift == 0 {
            return c.to_vec();
        }
        let mut rng = ChaCha8Rng::from_seed(cube_seed(seed, stream, c));
        c.iter()
            .map(|&a| (a << shift) | (rng.next_u64() >> (64 - shift)))
            .collect::<Vec<u64>>()
    });
    debug_assert_eq!(data.len(), cells.len() * d);
    // children keep the order of their distinct parents
    Ok(CubeSet::from_flat_unchecked(d, inst.s, data))
}

/// `K(U)`: strongly non-diagonal members of `G` all of whose factors lie in `U`, by one pass over `G`.
pub fn collect_conflicts(u: &CubeSet, g: &CubeSet, d: usize, n: usize) -> CubeSet {
    let kept = Exec::current().filter(&(0..g.len()).collect::<Vec<_>>(), |&i| {
        let c = g.get(i);
        is_strongly_non_diagonal(c, d) && (0..n).all(|j| u.contains(&c[j * d..(j + 1) * d]))
    });
    let mut data = Vec::with_capacity(kept.len() * d * n);
    for i in kept {
        data.extend_from_slice(g.get(i));
    }
    CubeSet::from_sorted_unchecked(g.dim(), g.scale(), data)
}

/// `F = U − {π(K) : K ∈ K(U)}` with `π` the first factor.
pub fn prune(u: &CubeSet, k: &CubeSet) -> Result<CubeSet> {
    let firsts = k.first_factors(u.dim())?;
    u.difference(&firsts)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AvoidanceResult {
    pub r_exp: u32,
    #[serde(rename = "F")]
    pub f: CubeSet,
    pub conflicts: u64,
    pub attempts: u32,
    pub seed: u64,
}

impl AvoidanceResult {
    pub fn r(&self) -> DyadicScale {
        DyadicScale::new(self.r_exp).expect("stored exponent is in range")
    }
}

/// Resamples until `#K(U) <= ⌊(l/r)^d / 2⌋`, prunes, and checks all three properties.
///
/// Attempt `t` uses RNG stream `stream_base + t`.
pub fn avoid_single_scale(
    inst: &AvoidanceInstance,
    seed: u64,
    stream_base: u64,
    max_attempts: u32,
    budget: &Budget,
) -> Result<AvoidanceResult> {
    let r = compute_intermediate_scale(inst)?;
    let threshold = conflict_threshold(inst.d, inst.l, r);
    let mut best = u64::MAX;
    for attempt in 0..max_attempts {
        let u = random_select(inst, r, seed, stream_base + attempt as u64, budget)?;
        let k = inst.g.conflicts_within(&u, inst.d, inst.n)?;
        let kc = k.len() as u64;
        best = best.min(kc);
        if BigUint::from(kc) > threshold {
            continue;
        }
        let f = prune(&u, &k)?;
        let report = verify_properties(inst, &f, r)?;
        if !report.all_pass() {
            return Err(Error::Integrity(format!(
                "selection at {} violates its own guarantees: {report:?}",
                inst.s
            )));
        }
        return Ok(AvoidanceResult {
            r_exp: r.exponent(),
            f,
            conflicts: kc,
            attempts: attempt + 1,
            seed,
        });
    }
    Err(Error::ResampleFailed {
        attempts: max_attempts,
        best_conflicts: best,
        threshold: threshold.to_u64().unwrap_or(u64::MAX),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub avoidance: bool,
    pub non_concentration: bool,
    pub large_size: bool,
    /// Every `F` cube lies in some `E` cube.
    pub inside_e: bool,
    /// Largest number of `F` cubes in one `r`-cube.
    pub worst_cell_count: u64,
    /// Smallest number of `F` cubes in one `E` cube.
    pub min_per_parent: u64,
    /// Up to ten pattern cubes with all factors in `F`.
    pub offending: Vec<Vec<u64>>,
}

impl PropertyReport {
    pub fn all_pass(&self) -> bool {
        self.avoidance && self.non_concentration && self.large_size && self.inside_e
    }
}

/// Multiplicities of ancestors at `coarser`, keyed by ancestor in sorted order.
pub(crate) fn ancestor_counts(set: &CubeSet, coarser: DyadicScale) -> Vec<(Vec<u64>, u64)> {
    let shift = set.scale().exponent() - coarser.exponent();
    let mut anc: Vec<Vec<u64>> = set.iter().map(|c| c.iter().map(|a| a >> shift).collect()).collect();
    anc.sort_unstable();
    let mut out: Vec<(Vec<u64>, u64)> = Vec::new();
    for a in anc {
        match out.last_mut() {
            Some((p, c)) if *p == a => *c += 1,
            _ => out.push((a, 1)),
        }
    }
    out
}

/// Checks avoidance (by scanning `G`), non-concentration, and large size.
pub fn verify_properties(inst: &AvoidanceInstance, f: &CubeSet, r: DyadicScale) -> Result<PropertyReport> {
    let k = inst.g.conflicts_within(f, inst.d, inst.n)?;
    let offending = k.iter().take(10).map(|c| c.to_vec()).collect();

    let per_cell = ancestor_counts(f, r);
    let worst_cell_count = per_cell.iter().map(|(_, c)| *c).max().unwrap_or(0);

    let per_parent = ancestor_counts(f, inst.l);
    let inside_e = per_parent.iter().all(|(p, _)| inst.e.contains(p));
    let need = grid_size(inst.d, DyadicScale::new(r.exponent() - inst.l.exponent())?);
    let mut min_per_parent = u64::MAX;
    let mut large_size = true;
    for e in inst.e.iter() {
        let c = per_parent
            .binary_search_by(|(p, _)| p.as_slice().cmp(e))
            .map(|i| per_parent[i].1)
            .unwrap_or(0);
        min_per_parent = min_per_parent.min(c);
        if BigUint::from(2 * c) < need {
            large_size = false;
        }
    }
    Ok(PropertyReport {
        avoidance: k.is_empty(),
        non_concentration: worst_cell_count <= 1,
        large_size,
        inside_e,
        worst_cell_count,
        min_per_parent,
        offending,
    })
}
