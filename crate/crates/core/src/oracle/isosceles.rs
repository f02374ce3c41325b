use std::sync::Arc;

use num_bigint::BigUint;

use super::{Budget, LipschitzCurve, PatternOracle, RescaledCurve, ScaleCache, Soundness};
use crate::dyadic::{CubeSet, DyadicScale};
use crate::error::Result;
use crate::exec::Exec;
use crate::interval::Interval;

/// Triples `(x1, x2, x3)` whose graph points `(x_i, f(x_i))` may form an isosceles triangle.
///
/// A cube is covered iff, for some choice of apex, the enclosure of the difference of the
/// squared lengths of the two sides at the apex contains zero. Enclosures take `f` at the
/// cell midpoint, widened by the Lipschitz bound over the half-width.
#[derive(Debug)]
pub struct Isosceles {
    f: Arc<RescaledCurve>,
    counts: ScaleCache<BigUint>,
}

/// Enclosure of a graph point over a range of `x`.
#[derive(Clone, Debug)]
struct GraphBox {
    x: Interval,
    y: Vec<Interval>,
}

impl Isosceles {
    pub fn new(f: Arc<RescaledCurve>) -> Self {
        Isosceles {
            f,
            counts: ScaleCache::default(),
        }
    }

    pub fn curve(&self) -> &Arc<RescaledCurve> {
        &self.f
    }

    /// Enclosure over `[lo, hi] * 2^-k`, widened by `extra`.
    fn graph_box(&self, k: u32, lo: u64, hi: u64, extra: f64) -> GraphBox {
        let delta = (-(k as f64)).exp2();
        let x = Interval::new(lo as f64 * delta, hi as f64 * delta).inflate(0.0);
        let mid = 0.5 * (lo + hi) as f64 * delta;
        let hw = 0.5 * (hi - lo) as f64 * delta;
        let radius = self.f.lipschitz() * hw + extra;
        let y = self.f.eval(mid).into_iter().map(|v| v.inflate(radius)).collect();
        GraphBox { x, y }
    }

    fn cell_box(&self, k: u32, a: u64) -> GraphBox {
        self.graph_box(k, a, a + 1, 0.0)
    }

    /// `‖p − r‖² − ‖q − r‖² = (p − q)·(p + q − 2r)`, enclosed.
    fn side_difference(p: &GraphBox, q: &GraphBox, r: &GraphBox) -> Interval {
        let term = |a: Interval, b: Interval, c: Interval| (a - b) * (a + b - c.scale(2.0));
        let mut acc = term(p.x, q.x, r.x);
        for ((a, b), c) in p.y.iter().zip(&q.y).zip(&r.y) {
            acc = acc + term(*a, *b, *c);
        }
        acc
    }

    fn any_isosceles(b: [&GraphBox; 3]) -> bool {
        Self::side_difference(b[0], b[1], b[2]).contains_zero()
            || Self::side_difference(b[0], b[2], b[1]).contains_zero()
            || Self::side_difference(b[1], b[2], b[0]).contains_zero()
    }

    fn sorted(index: &[u64]) -> [u64; 3] {
        let mut s = [index[0], index[1], index[2]];
        s.sort_unstable();
        s
    }

    /// Number of orderings of a sorted triple.
    fn multiplicity(t: [u64; 3]) -> u64 {
        match (t[0] == t[1], t[1] == t[2]) {
            (true, true) => 1,
            (false, false) => 6,
            _ => 3,
        }
    }

    /// Calls `hit(l)` for every `l` in `[start, n)` with `(i, j, l)` covered, in increasing order.
    fn scan_third(&self, k: u32, boxes: &[GraphBox], i: u64, j: u64, start: u64, n: u64, hit: &mut dyn FnMut(u64)) {
        let margin = 2.0 * self.f.eval_error();
        let (bi, bj) = (&boxes[i as usize], &boxes[j as usize]);
        let mut stack = vec![(start, n)];
        while let Some((lo, hi)) = stack.pop() {
            if hi - lo == 1 {
                if Self::any_isosceles([bi, bj, &boxes[lo as usize]]) {
                    hit(lo);
                }
                continue;
            }
            let block = self.graph_box(k, lo, hi, margin);
            if !Self::any_isosceles([bi, bj, &block]) {
                continue;
            }
            let mid = lo + (hi - lo) / 2;
            stack.push((mid, hi));
            stack.push((lo, mid));
        }
    }

    fn all_boxes(&self, k: u32) -> Vec<GraphBox> {
        (0..1u64 << k).map(|a| self.cell_box(k, a)).collect()
    }

    /// Sorted covered triples `i <= j <= l` with first entry `i`.
    fn sorted_hits_from(&self, k: u32, boxes: &[GraphBox], i: u64) -> Vec<[u64; 3]> {
        let n = 1u64 << k;
        let mut out = Vec::new();
        for j in i..n {
            self.scan_third(k, boxes, i, j, j, n, &mut |l| out.push([i, j, l]));
        }
        out
    }
}

impl PatternOracle for Isosceles {
    fn ambient_dim(&self) -> usize {
        3
    }

    fn declared_alpha(&self) -> f64 {
        2.0
    }

    fn soundness(&self) -> Soundness {
        Soundness::OverApprox
    }

    fn contains(&self, scale: DyadicScale, index: &[u64]) -> bool {
        let k = scale.exponent();
        let s = Self::sorted(index);
        let b = s.map(|a| self.cell_box(k, a));
        Self::any_isosceles([&b[0], &b[1], &b[2]])
    }

    fn enumerate(&self, scale: DyadicScale, budget: &Budget) -> Result<CubeSet> {
        budget.check_cubes("isosceles cover", &self.count(scale, budget)?)?;
        let k = scale.exponent();
        let boxes = self.all_boxes(k);
        let n = 1u64 << k;
        let data = Exec::current().flat_map_range(n, |i| {
            let mut out = Vec::new();
            for [a, b, c] in self.sorted_hits_from(k, &boxes, i) {
                let mut perms = vec![[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]];
                perms.sort_unstable();
                perms.dedup();
                for p in perms {
                    out.extend_from_slice(&p);
                }
            }
            out
        });
        Ok(CubeSet::from_flat_unchecked(3, scale, data))
    }

    fn count(&self, scale: DyadicScale, budget: &Budget) -> Result<BigUint> {
        let k = scale.exponent();
        let n = 1u64 << k.min(62);
        // each (i, j) pair runs one bisection over the third axis
        budget.check_work(
            "isosceles count",
            &(BigUint::from(n) * BigUint::from(n) * BigUint::from(k.max(1))),
        )?;
        let c = self.counts.get_or_try(scale, || {
            let boxes = self.all_boxes(k);
            let total = Exec::current().sum_range(n, |i| {
                self.sorted_hits_from(k, &boxes, i)
                    .into_iter()
                    .map(|t| Self::multiplicity(t) as u128)
                    .sum()
            });
            Ok(BigUint::from(total))
        })?;
        Ok((*c).clone())
    }
}
