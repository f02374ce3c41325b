use num_bigint::BigUint;

use super::{Budget, PatternOracle, ScaleCache, SharedOracle, Soundness};
use crate::dyadic::{for_each_child, grid_size, CubeSet, DyadicScale};
use crate::error::{Error, Result};
use crate::exec::Exec;

/// `Z1 ∪ Z2` with `Z1 = {(x, y) : x + y ∈ Y}` and `Z2 = {(x, y) : y ∈ Y/2}`, for `Y ⊂ [0,1)^d`.
///
/// At scale `s`, `(I, J)` is in the `Z1` cover iff the sum box `I + J` meets a cell of
/// `Y`'s cover, and in the `Z2` cover iff `J` meets half of such a cell.
#[derive(Debug)]
pub struct Sumset {
    d: usize,
    y: SharedOracle,
    cache: ScaleCache<Tables>,
}

#[derive(Debug)]
struct Tables {
    /// Admissible sums `a + b`, stored one scale finer since they reach `2^(k+1) - 2`.
    sums: CubeSet,
    /// Admissible second factors `b`.
    halves: CubeSet,
}

impl Sumset {
    pub fn new(y: SharedOracle) -> Result<Self> {
        let d = y.ambient_dim();
        if d == 0 {
            return Err(Error::InvalidConfig("sumset target needs positive dimension".into()));
        }
        Ok(Sumset {
            d,
            y,
            cache: ScaleCache::default(),
        })
    }

    pub fn target(&self) -> &SharedOracle {
        &self.y
    }

    fn tables(&self, scale: DyadicScale, budget: &Budget) -> Result<std::sync::Arc<Tables>> {
        self.cache.get_or_try(scale, || {
            let cover = self.y.enumerate(scale, budget)?;
            let finer = DyadicScale::new(scale.exponent() + 1)?;
            let d = self.d;
            let mut sums = Vec::with_capacity(cover.len() * (1 << d));
            for c in cover.iter() {
                // sum box [t, t+2) meets [c, c+1) iff t ∈ {c-1, c} per axis
                for_each_child(&vec![0u64; d], 1, |e| {
                    if c.iter().zip(e).all(|(ci, ei)| ci >= ei) {
                        sums.extend(c.iter().zip(e).map(|(ci, ei)| ci - ei));
                    }
                });
            }
            let halves: Vec<u64> = cover.as_flat().iter().map(|c| c / 2).collect();
            Ok(Tables {
                sums: CubeSet::from_flat_unchecked(d, finer, sums),
                halves: CubeSet::from_flat_unchecked(d, scale, halves),
            })
        })
    }

    /// Number of pairs `(a, b)` in `[0, N)^2` with `a + b = t`.
    fn pairs1(t: u64, n: u64) -> u64 {
        if t > 2 * n - 2 {
            return 0;
        }
        t.min(2 * n - 2 - t) + 1
    }
}

impl PatternOracle for Sumset {
    fn ambient_dim(&self) -> usize {
        2 * self.d
    }

    fn declared_alpha(&self) -> f64 {
        self.d as f64 + self.y.declared_alpha()
    }

    fn soundness(&self) -> Soundness {
        Soundness::OverApprox
    }

    fn contains(&self, scale: DyadicScale, index: &[u64]) -> bool {
        // a cover that cannot be built within the default budget reports everything as covered,
        // which keeps the oracle an over-approximation
        let Ok(t) = self.tables(scale, &Budget::default()) else {
            return true;
        };
        let (a, b) = index.split_at(self.d);
        if t.halves.contains(b) {
            return true;
        }
        let s: Vec<u64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
        t.sums.contains(&s)
    }

    fn enumerate(&self, scale: DyadicScale, budget: &Budget) -> Result<CubeSet> {
        budget.check_cubes("sumset cover", &self.count(scale, budget)?)?;
        let t = self.tables(scale, budget)?;
        let d = self.d;
        let n = scale.cells_per_axis();
        let mut data = Vec::new();
        for s in t.sums.iter() {
            // all a with 0 <= s - a < n per axis
            let lo: Vec<u64> = s.iter().map(|&x| x.saturating_sub(n - 1)).collect();
            let hi: Vec<u64> = s.iter().map(|&x| x.min(n - 1)).collect();
            let mut a = lo.clone();
            loop {
                data.extend_from_slice(&a);
                data.extend(s.iter().zip(&a).map(|(x, y)| x - y));
                let mut i = d;
                loop {
                    if i == 0 {
                        break;
                    }
                    i -= 1;
                    if a[i] < hi[i] {
                        a[i] += 1;
                        break;
                    }
                    a[i] = lo[i];
                }
                if a == lo {
                    break;
                }
            }
        }
        for_each_child(&vec![0u64; d], scale.exponent(), |a| {
            for b in t.halves.iter() {
                data.extend_from_slice(a);
                data.extend_from_slice(b);
            }
        });
        Ok(CubeSet::from_flat_unchecked(2 * d, scale, data))
    }

    fn count(&self, scale: DyadicScale, budget: &Budget) -> Result<BigUint> {
        let t = self.tables(scale, budget)?;
        let n = scale.cells_per_axis();
        let z1: BigUint = t
            .sums
            .iter()
            .map(|s| {
                s.iter()
                    .map(|&x| BigUint::from(Self::pairs1(x, n)))
                    .product::<BigUint>()
            })
            .sum();
        let z2 = grid_size(self.d, scale) * BigUint::from(t.halves.len());
        let overlap = if self.d == 1 {
            let sums = t.sums.as_flat();
            t.halves
                .as_flat()
                .iter()
                .map(|&b| {
                    // sums t with 0 <= t - b < n
                    let lo = sums.partition_point(|&x| x < b);
                    let hi = sums.partition_point(|&x| x < b + n);
                    BigUint::from(hi - lo)
                })
                .sum()
        } else {
            let work = BigUint::from(t.sums.len()) * BigUint::from(t.halves.len());
            budget.check_work("sumset overlap", &work)?;
            let hits = Exec::current().sum_range(t.halves.len() as u64, |j| {
                let b = t.halves.get(j as usize);
                t.sums
                    .iter()
                    .filter(|s| s.iter().zip(b).all(|(x, y)| x >= y && x - y < n))
                    .count() as u128
            });
            BigUint::from(hits)
        };
        Ok(z1 + z2 - overlap)
    }

    fn count_on_axis(&self, scale: DyadicScale, d: usize, budget: &Budget) -> Result<BigUint> {
        if d != self.d {
            return super::axis_scan(self, scale, d, budget);
        }
        let t = self.tables(scale, budget)?;
        if t.halves.contains(&vec![0u64; d]) {
            return Ok(grid_size(d, scale));
        }
        let n = scale.cells_per_axis();
        let c = t.sums.iter().filter(|s| s.iter().all(|&x| x < n)).count();
        Ok(BigUint::from(c))
    }

    fn enumerate_within(&self, scale: DyadicScale, factors: &CubeSet, n: usize, budget: &Budget) -> Result<CubeSet> {
        self.tables(scale, budget)?;
        super::default_enumerate_within(self, scale, factors, n, budget)
    }
}
