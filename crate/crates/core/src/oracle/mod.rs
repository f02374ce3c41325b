//! Cube-covering oracles for pattern components.

mod basic;
mod cantor;
mod curve;
mod estimate;
mod isosceles;
mod spec;
mod sumset;

use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::dyadic::{grid_size, is_strongly_non_diagonal, CubeSet, DyadicScale};
use crate::error::{Error, Result};
use crate::exec::Exec;

pub use basic::{Hyperplane, LinearZeroSet, PointCloud, Union};
pub use cantor::CantorProduct;
pub use curve::{BuiltinCurve, BuiltinKind, LipschitzCurve, RescaledCurve};
pub use estimate::{
    fit_with_log_term, linear_fit, minkowski_estimate, trivial_projection_complement, MinkowskiEstimate,
};
pub use isosceles::Isosceles;
pub use spec::{CurveSpec, PatternKind, PatternSpec, Rational};
pub use sumset::Sumset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Soundness {
    OverApprox,
    Exact,
}

impl Soundness {
    pub fn weaker(self, other: Soundness) -> Soundness {
        self.min(other)
    }
}

/// Resource limits for oracle work.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budget {
    /// Largest cube set an oracle may materialize.
    pub max_cubes: u64,
    /// Largest number of elementary membership tests.
    pub max_work: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_cubes: 1 << 24,
            max_work: 1 << 36,
        }
    }
}

impl Budget {
    pub fn check_cubes(&self, what: &str, needed: &BigUint) -> Result<()> {
        if needed > &BigUint::from(self.max_cubes) {
            return Err(Error::budget(what, needed, self.max_cubes));
        }
        Ok(())
    }

    pub fn check_work(&self, what: &str, needed: &BigUint) -> Result<()> {
        if needed > &BigUint::from(self.max_work) {
            return Err(Error::budget(what, needed, self.max_work));
        }
        Ok(())
    }
}

pub trait PatternOracle: Send + Sync + fmt::Debug {
    fn ambient_dim(&self) -> usize;

    fn declared_alpha(&self) -> f64;

    fn soundness(&self) -> Soundness;

    /// Whether the cube with `index` at `scale` is in the returned cover.
    fn contains(&self, scale: DyadicScale, index: &[u64]) -> bool;

    /// The covering cube set at `scale`.
    fn enumerate(&self, scale: DyadicScale, budget: &Budget) -> Result<CubeSet>;

    /// `#enumerate(scale)`, possibly without materializing it.
    fn count(&self, scale: DyadicScale, budget: &Budget) -> Result<BigUint> {
        Ok(self.enumerate(scale, budget)?.cover_count())
    }

    /// Number of covered cubes of the form `(a, 0, ..., 0)` with `a` in `[0,1)^d`.
    fn count_on_axis(&self, scale: DyadicScale, d: usize, budget: &Budget) -> Result<BigUint> {
        axis_scan(self, scale, d, budget)
    }

    /// `Some(d)` when this oracle is exactly the axis plane `{x_{d+1} = ... = 0}`.
    fn axis_plane(&self) -> Option<usize> {
        None
    }

    /// Covered cubes whose `n` factor blocks all lie in `factors`.
    fn enumerate_within(&self, scale: DyadicScale, factors: &CubeSet, n: usize, budget: &Budget) -> Result<CubeSet> {
        default_enumerate_within(self, scale, factors, n, budget)
    }
}

pub type SharedOracle = Arc<dyn PatternOracle>;

/// Counts covered cubes `(a, 0, ..., 0)` by testing every `a`.
pub(crate) fn axis_scan<O: PatternOracle + ?Sized>(
    oracle: &O,
    scale: DyadicScale,
    d: usize,
    budget: &Budget,
) -> Result<BigUint> {
    let dim = oracle.ambient_dim();
    let side = grid_size(d, scale);
    budget.check_work("axis scan", &side)?;
    let per = scale.cells_per_axis();
    let total = side.to_u64().unwrap_or(u64::MAX);
    let hits = Exec::current().sum_range(total, |lin| {
        let mut idx = vec![0u64; dim];
        let mut rest = lin;
        for slot in idx[..d].iter_mut().rev() {
            *slot = rest % per;
            rest /= per;
        }
        oracle.contains(scale, &idx) as u128
    });
    Ok(BigUint::from(hits))
}

pub(crate) fn check_factor_set(oracle_dim: usize, scale: DyadicScale, factors: &CubeSet, n: usize) -> Result<()> {
    if factors.dim() * n != oracle_dim || factors.scale() != scale {
        return Err(Error::Precondition(format!(
            "factor set (dim {}, {}) with n = {n} does not match ambient dim {oracle_dim} at {scale}",
            factors.dim(),
            factors.scale()
        )));
    }
    Ok(())
}

/// Below this many tuples, testing each one beats enumerating the cover.
const SMALL_TUPLE_SCAN: u64 = 1 << 20;

/// Tests every tuple of `factors^n` when there are few, else filters the full cover.
pub(crate) fn default_enumerate_within<O: PatternOracle + ?Sized>(
    oracle: &O,
    scale: DyadicScale,
    factors: &CubeSet,
    n: usize,
    budget: &Budget,
) -> Result<CubeSet> {
    check_factor_set(oracle.ambient_dim(), scale, factors, n)?;
    let m = factors.len() as u64;
    let tuples = BigUint::from(m).pow(n as u32);
    let test = |idx: &[u64]| oracle.contains(scale, idx);
    if tuples <= BigUint::from(SMALL_TUPLE_SCAN) {
        return Ok(tuples_within(scale, factors, n, test));
    }
    match oracle.enumerate(scale, budget) {
        Ok(all) => Ok(filter_within(&all, factors, n)),
        Err(Error::Budget { .. }) if tuples <= BigUint::from(budget.max_work) => {
            Ok(tuples_within(scale, factors, n, test))
        }
        Err(e) => Err(e),
    }
}

/// Covered tuples of `factors^n`, scanning in lexicographic order.
pub(crate) fn tuples_within(
    scale: DyadicScale,
    factors: &CubeSet,
    n: usize,
    test: impl Fn(&[u64]) -> bool + Sync + Send,
) -> CubeSet {
    let d = factors.dim();
    let m = factors.len() as u64;
    let rest = m.pow(n as u32 - 1);
    let data = Exec::current().flat_map_range(m, |first| {
        let mut out = Vec::new();
        let mut idx = vec![0u64; d * n];
        idx[..d].copy_from_slice(factors.get(first as usize));
        for t in 0..rest {
            let mut r = t;
            for slot in (1..n).rev() {
                let f = (r % m) as usize;
                r /= m;
                idx[slot * d..(slot + 1) * d].copy_from_slice(factors.get(f));
            }
            if test(&idx) {
                out.extend_from_slice(&idx);
            }
        }
        out
    });
    // factors are sorted, so the lexicographic tuple scan is already sorted
    CubeSet::from_sorted_unchecked(d * n, scale, data)
}

pub(crate) fn filter_within(all: &CubeSet, factors: &CubeSet, n: usize) -> CubeSet {
    let d = factors.dim();
    let data: Vec<u64> = all
        .iter()
        .filter(|c| (0..n).all(|i| factors.contains(&c[i * d..(i + 1) * d])))
        .flatten()
        .copied()
        .collect();
    CubeSet::from_sorted_unchecked(all.dim(), all.scale(), data)
}

/// Strongly non-diagonal members of a cube set.
pub fn strongly_non_diagonal(set: &CubeSet, d: usize) -> CubeSet {
    let data: Vec<u64> = set
        .iter()
        .filter(|c| is_strongly_non_diagonal(c, d))
        .flatten()
        .copied()
        .collect();
    CubeSet::from_sorted_unchecked(set.dim(), set.scale(), data)
}

/// `log2` of a positive big integer, accurate to double precision.
pub fn log2_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 64 {
        return (x.to_u64().unwrap() as f64).log2();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().unwrap();
    (top as f64).log2() + shift as f64
}

/// Per-scale memo for oracles whose covers are cheap to keep.
#[derive(Debug)]
pub(crate) struct ScaleCache<T> {
    map: std::sync::Mutex<std::collections::HashMap<u32, Arc<T>>>,
}

impl<T> Default for ScaleCache<T> {
    fn default() -> Self {
        ScaleCache {
            map: Default::default(),
        }
    }
}

impl<T> ScaleCache<T> {
    pub(crate) fn get_or_try(&self, scale: DyadicScale, build: impl FnOnce() -> Result<T>) -> Result<Arc<T>> {
        if let Some(v) = self.map.lock().unwrap().get(&scale.exponent()) {
            return Ok(v.clone());
        }
        let v = Arc::new(build()?);
        self.map
            .lock()
            .unwrap()
            .entry(scale.exponent())
            .or_insert_with(|| v.clone());
        Ok(v)
    }
}
