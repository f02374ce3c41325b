//! The mass distribution on the construction tree and its scale-by-scale audits.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::builder::ConstructionTrace;
use crate::dyadic::{CubeSet, DyadicScale};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::oracle::log2_big;

#[derive(Clone, Debug, PartialEq)]
pub struct MeasureLevel {
    pub cubes: CubeSet,
    /// Mass of `cubes.get(i)`.
    pub masses: Vec<BigRational>,
}

impl MeasureLevel {
    pub fn scale(&self) -> DyadicScale {
        self.cubes.scale()
    }

    pub fn mass_of(&self, index: &[u64]) -> BigRational {
        self.cubes
            .position(index)
            .map(|i| self.masses[i].clone())
            .unwrap_or_else(BigRational::zero)
    }

    pub fn total(&self) -> BigRational {
        self.masses.iter().fold(BigRational::zero(), |a, m| a + m)
    }
}

/// Masses on `X_0, X_1, ...`, with `X_0 = [0,1)^d` of mass one.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureTree {
    pub d: usize,
    pub levels: Vec<MeasureLevel>,
}

/// Groups the members of `set` by their ancestor at `coarser`, returning `(ancestor, member positions)`
/// sorted by ancestor.
pub(crate) fn group_by_ancestor(set: &CubeSet, coarser: DyadicScale) -> Vec<(Vec<u64>, Vec<usize>)> {
    let shift = set.scale().exponent() - coarser.exponent();
    let mut keyed: Vec<(Vec<u64>, usize)> = set
        .iter()
        .enumerate()
        .map(|(i, c)| (c.iter().map(|a| a >> shift).collect(), i))
        .collect();
    keyed.sort_unstable();
    let mut out: Vec<(Vec<u64>, Vec<usize>)> = Vec::new();
    for (a, i) in keyed {
        match out.last_mut() {
            Some((p, v)) if *p == a => v.push(i),
            _ => out.push((a, vec![i])),
        }
    }
    out
}

/// Splits each parent's mass evenly among its children in the next level.
pub fn build_measure(trace: &ConstructionTrace) -> Result<MeasureTree> {
    if trace.levels.is_empty() {
        return Err(Error::Precondition("trace has no levels".into()));
    }
    let root = trace.level(0);
    let mut levels = vec![MeasureLevel {
        cubes: root,
        masses: vec![BigRational::one()],
    }];
    for (k, x) in (1..).zip(&trace.levels) {
        if x.is_empty() {
            return Err(Error::Integrity(format!("level {k} is empty")));
        }
        let prev = levels.last().unwrap();
        let mut masses = vec![BigRational::zero(); x.len()];
        for (parent, members) in group_by_ancestor(x, prev.scale()) {
            let p = prev.cubes.position(&parent).ok_or_else(|| {
                Error::Integrity(format!(
                    "level {k} cube under {parent:?}, which is not in level {}",
                    k - 1
                ))
            })?;
            let share = &prev.masses[p] / BigRational::from_integer(BigInt::from(members.len()));
            for i in members {
                masses[i] = share.clone();
            }
        }
        levels.push(MeasureLevel {
            cubes: x.clone(),
            masses,
        });
    }
    Ok(MeasureTree { d: trace.d, levels })
}

impl MeasureTree {
    pub fn finest(&self) -> DyadicScale {
        self.levels.last().unwrap().scale()
    }

    /// Index of the coarsest level at least as fine as `scale`.
    fn covering_level(&self, scale: DyadicScale) -> Result<usize> {
        self.levels
            .iter()
            .position(|l| l.scale() >= scale)
            .ok_or(Error::OutOfRange {
                requested: scale.exponent(),
                finest: self.finest().exponent(),
            })
    }

    /// `μ(c)`, summing the masses of the nearest finer built level inside `c`.
    pub fn mass_query(&self, scale: DyadicScale, index: &[u64]) -> Result<BigRational> {
        if index.len() != self.d {
            return Err(Error::Precondition(format!(
                "index has {} coordinates, expected {}",
                index.len(),
                self.d
            )));
        }
        let lvl = &self.levels[self.covering_level(scale)?];
        if lvl.scale() == scale {
            return Ok(lvl.mass_of(index));
        }
        Ok(lvl
            .cubes
            .members_within(scale, index)
            .into_iter()
            .fold(BigRational::zero(), |a, i| a + &lvl.masses[i]))
    }

    /// Positive-mass cubes at `scale` with their masses, in index order.
    pub fn support_at(&self, scale: DyadicScale) -> Result<Vec<(Vec<u64>, BigRational)>> {
        let lvl = &self.levels[self.covering_level(scale)?];
        Ok(group_by_ancestor(&lvl.cubes, scale)
            .into_iter()
            .map(|(a, members)| {
                let m = members.iter().fold(BigRational::zero(), |s, &i| s + &lvl.masses[i]);
                (a, m)
            })
            .collect())
    }

    /// Every level sums to one and every mass equals the sum of its children's masses.
    pub fn check_conservation(&self) -> bool {
        if self.levels.iter().any(|l| !l.total().is_one()) {
            return false;
        }
        self.levels.windows(2).all(|w| {
            let (prev, next) = (&w[0], &w[1]);
            let groups = group_by_ancestor(&next.cubes, prev.scale());
            let covered: usize = groups.len();
            let sums_match = groups.iter().all(|(p, members)| {
                let s = members.iter().fold(BigRational::zero(), |a, &i| a + &next.masses[i]);
                prev.mass_of(p) == s
            });
            // parents without children must carry no mass
            let childless_empty = covered == prev.cubes.len()
                || prev
                    .cubes
                    .iter()
                    .zip(&prev.masses)
                    .all(|(c, m)| m.is_zero() || groups.binary_search_by(|(p, _)| p.as_slice().cmp(c)).is_ok());
            sums_match && childless_empty
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&MeasureJson::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: MeasureJson = serde_json::from_str(s)?;
        j.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct MeasureJson {
    d: usize,
    levels: Vec<LevelJson>,
}

#[derive(Serialize, Deserialize)]
struct LevelJson {
    k: u32,
    entries: Vec<(Vec<u64>, String, String)>,
}

impl From<&MeasureTree> for MeasureJson {
    fn from(t: &MeasureTree) -> Self {
        MeasureJson {
            d: t.d,
            levels: t
                .levels
                .iter()
                .map(|l| LevelJson {
                    k: l.scale().exponent(),
                    entries: l
                        .cubes
                        .iter()
                        .zip(&l.masses)
                        .map(|(c, m)| (c.to_vec(), m.numer().to_string(), m.denom().to_string()))
                        .collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<MeasureJson> for MeasureTree {
    type Error = Error;
    fn try_from(j: MeasureJson) -> Result<Self> {
        let mut levels = Vec::new();
        for l in j.levels {
            let scale = DyadicScale::new(l.k)?;
            let mut entries = l.entries;
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let bad = |s: &str| Error::Integrity(format!("bad mass component {s:?}"));
            let mut masses = Vec::with_capacity(entries.len());
            let mut flat = Vec::with_capacity(entries.len() * j.d);
            for (idx, n, dn) in entries {
                let n: BigInt = n.parse().map_err(|_| bad(&n))?;
                let dn: BigInt = dn.parse().map_err(|_| bad(&dn))?;
                if dn.is_zero() || n.is_negative() || dn.is_negative() {
                    return Err(Error::Integrity(
                        "masses must be non-negative with positive denominators".into(),
                    ));
                }
                flat.extend(idx);
                masses.push(BigRational::new(n, dn));
            }
            let cubes = CubeSet::from_flat(j.d, scale, flat)?;
            if cubes.len() != masses.len() {
                return Err(Error::Integrity("duplicate cubes in measure level".into()));
            }
            levels.push(MeasureLevel { cubes, masses });
        }
        if levels.is_empty() {
            return Err(Error::Integrity("measure has no levels".into()));
        }
        Ok(MeasureTree { d: j.d, levels })
    }
}

/// `log2` of a positive rational.
pub fn log2_rational(q: &BigRational) -> f64 {
    let n = q.numer().magnitude();
    let d = q.denom().magnitude();
    log2_big(n) - log2_big(d)
}

/// Position of a scale relative to the built levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleCase {
    /// `r_{k+1} <= l <= l_k`: covered by `(l/r_{k+1})^d` cubes of side `r_{k+1}`.
    Coarse,
    /// `l_{k+1} <= l < r_{k+1}`: inside a single `r_{k+1}`-cube.
    Fine,
}

impl ScaleCase {
    pub fn label(self) -> &'static str {
        match self {
            ScaleCase::Coarse => "case1",
            ScaleCase::Fine => "case2",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrostmanRow {
    pub exponent: u32,
    pub case: ScaleCase,
    /// The `k` with `l_{k+1} <= l <= l_k`.
    pub k: usize,
    pub support_count: u64,
    pub max_mass: String,
    pub log2_max_mass: f64,
    /// `max μ(I) / l^{β-ε}`.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelAudit {
    pub k: usize,
    pub eta: f64,
    pub max_mass: String,
    /// `μ(J) <= 2 (r_k / l_{k-1})^d` for every `J` in `X_k`, exactly.
    pub parent_share_bound: bool,
    /// `max μ(J) / l_k^{β - η_k}`.
    pub fine_ratio: f64,
    /// `max μ(I') / ((r_k/l_{k-1})^d l_{k-1}^{β - η_{k-1}})` over `r_k`-cubes.
    pub intermediate_ratio: f64,
    /// Every positive-mass `r_k`-cube holds exactly one cube of `X_k`.
    pub single_child_cells: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrostmanReport {
    pub beta: f64,
    pub epsilon: f64,
    pub rows: Vec<FrostmanRow>,
    /// Largest ratio over all scanned scales.
    pub constant: f64,
    pub levels: Vec<LevelAudit>,
    /// Least-squares slope of `-log2 max μ` against the scale exponent.
    pub fitted_exponent: f64,
}

impl FrostmanReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("exponent,case,max_ratio\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{:.12e}\n", r.exponent, r.case.label(), r.ratio));
        }
        s
    }
}

/// `η_k = (n+1) ε_k / (2(n-1))`.
pub fn eta(n: usize, epsilon: f64) -> f64 {
    (n + 1) as f64 * epsilon / (2 * (n - 1)) as f64
}

/// Case and level index for scale exponent `j`.
pub fn classify_scale(trace: &ConstructionTrace, j: u32) -> (ScaleCase, usize) {
    let last = trace.levels.len();
    let k = (0..last).rev().find(|&k| trace.l_exp(k) <= j).unwrap_or(0);
    if j <= trace.r_exp(k + 1) {
        (ScaleCase::Coarse, k)
    } else {
        (ScaleCase::Fine, k)
    }
}

/// Scans every dyadic scale from `l_0` to the finest level.
pub fn frostman_scan(tree: &MeasureTree, trace: &ConstructionTrace, epsilon: f64) -> Result<FrostmanReport> {
    if !(epsilon > 0.0) {
        return Err(Error::Precondition(format!("epsilon must be positive, got {epsilon}")));
    }
    let beta = trace.target_dimension();
    let d = trace.d;
    let finest = tree.finest().exponent();
    let rows = Exec::current().map_range(finest as u64 + 1, |j| -> Result<FrostmanRow> {
        let j = j as u32;
        let support = tree.support_at(DyadicScale::new(j)?)?;
        let max = support
            .iter()
            .map(|(_, m)| m)
            .max()
            .cloned()
            .unwrap_or_else(BigRational::zero);
        let lm = log2_rational(&max);
        let (case, k) = classify_scale(trace, j);
        Ok(FrostmanRow {
            exponent: j,
            case,
            k,
            support_count: support.len() as u64,
            max_mass: max.to_string(),
            log2_max_mass: lm,
            ratio: (lm + j as f64 * (beta - epsilon)).exp2(),
        })
    });
    let rows: Vec<FrostmanRow> = rows.into_iter().collect::<Result<_>>()?;
    let constant = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);

    let mut levels = Vec::new();
    for k in 1..tree.levels.len() {
        let lvl = &tree.levels[k];
        let prev = &tree.levels[k - 1];
        let (l_prev, r) = (prev.scale().exponent(), trace.r_exp(k));
        let eps_k = trace.schedule[k - 1].epsilon;
        let eta_k = eta(trace.n, eps_k);
        let eta_prev = if k == 1 {
            0.0
        } else {
            eta(trace.n, trace.schedule[k - 2].epsilon)
        };
        let max = lvl.masses.iter().max().cloned().unwrap_or_else(BigRational::zero);
        // μ(J) · (l_{k-1}/r_k)^d <= 2
        let scale_up = BigRational::from_integer(BigInt::from(BigUint::one() << ((r - l_prev) as usize * d)));
        let parent_share_bound = &max * scale_up <= BigRational::from_integer(BigInt::from(2));
        let lk = lvl.scale().exponent() as f64;
        let fine_ratio = (log2_rational(&max) + lk * (beta - eta_k)).exp2();
        let groups = group_by_ancestor(&lvl.cubes, DyadicScale::new(r)?);
        let single_child_cells = groups.iter().all(|(_, m)| m.len() == 1);
        let max_cell = groups
            .iter()
            .map(|(_, m)| m.iter().fold(BigRational::zero(), |s, &i| s + &lvl.masses[i]))
            .max()
            .unwrap_or_else(BigRational::zero);
        let denom_log2 = -((r - l_prev) as f64) * d as f64 - l_prev as f64 * (beta - eta_prev);
        let intermediate_ratio = (log2_rational(&max_cell) - denom_log2).exp2();
        levels.push(LevelAudit {
            k,
            eta: eta_k,
            max_mass: max.to_string(),
            parent_share_bound,
            fine_ratio,
            intermediate_ratio,
            single_child_cells,
        });
    }

    let xs: Vec<f64> = rows.iter().map(|r| r.exponent as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| -r.log2_max_mass).collect();
    let fitted_exponent = if xs.len() >= 2 {
        crate::oracle::linear_fit(&xs, &ys).0
    } else {
        f64::NAN
    };
    Ok(FrostmanReport {
        beta,
        epsilon,
        rows,
        constant,
        levels,
        fitted_exponent,
    })
}
