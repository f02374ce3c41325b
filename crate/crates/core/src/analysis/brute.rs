//! Brute-force checks that share no code with the construction.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::dyadic::CubeSet;
use crate::oracle::{BuiltinKind, CurveSpec};

/// Calls `visit` on every ordered tuple of `n` distinct indices below `m`.
pub fn for_each_distinct_tuple(m: usize, n: usize, mut visit: impl FnMut(&[usize])) {
    if n == 0 || m < n {
        return;
    }
    let mut picks = vec![0usize; n];
    loop {
        if (0..n).all(|a| (a + 1..n).all(|b| picks[a] != picks[b])) {
            visit(&picks);
        }
        let mut i = n;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            picks[i] += 1;
            if picks[i] < m {
                break;
            }
            picks[i] = 0;
        }
    }
}

/// Number of tuples of distinct cubes of `f` whose concatenated index passes `hit`.
pub fn tuple_conflicts(f: &CubeSet, n: usize, hit: impl Fn(&[u64]) -> bool) -> u64 {
    let mut count = 0;
    let mut idx = Vec::with_capacity(f.dim() * n);
    for_each_distinct_tuple(f.len(), n, |picks| {
        idx.clear();
        for &p in picks {
            idx.extend_from_slice(f.get(p));
        }
        count += hit(&idx) as u64;
    });
    count
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairScan {
    /// Ordered pairs `(I, J)` with `I ≠ J`.
    pub off_diagonal_checked: u64,
    pub off_diagonal_hits: u64,
    /// Pairs `(I, I)`.
    pub diagonal_checked: u64,
    pub diagonal_hits: u64,
    /// Up to ten offending pairs.
    pub examples: Vec<(Vec<u64>, Vec<u64>)>,
}

impl PairScan {
    pub fn clean(&self) -> bool {
        self.off_diagonal_hits == 0 && self.diagonal_hits == 0
    }
}

/// Tests every ordered pair of cubes of `x`: the sum box `I + J`, two cells wide per axis,
/// must not meet any cell of `y` (same scale).
pub fn sumset_pair_scan(x: &CubeSet, y: &CubeSet) -> PairScan {
    assert_eq!(x.dim(), y.dim());
    assert_eq!(x.scale(), y.scale());
    let d = x.dim();
    let cells: HashSet<&[u64]> = y.iter().collect();
    let mut out = PairScan::default();
    let mut probe = vec![0u64; d];
    for (i, a) in x.iter().enumerate() {
        for (j, b) in x.iter().enumerate() {
            let mut hit = false;
            for corner in 0..(1u32 << d) {
                for axis in 0..d {
                    probe[axis] = a[axis] + b[axis] + ((corner >> axis) & 1) as u64;
                }
                if cells.contains(probe.as_slice()) {
                    hit = true;
                    break;
                }
            }
            if i == j {
                out.diagonal_checked += 1;
                out.diagonal_hits += hit as u64;
            } else {
                out.off_diagonal_checked += 1;
                out.off_diagonal_hits += hit as u64;
            }
            if hit && out.examples.len() < 10 {
                out.examples.push((a.to_vec(), b.to_vec()));
            }
        }
    }
    out
}

/// Bounds on `f(t) = g(t/(10M)) − g(0)` over `[lo, hi]`.
fn f_bounds(curve: &CurveSpec, lo: f64, hi: f64) -> (f64, f64) {
    let c = 10.0 * curve.lipschitz;
    let (a, b) = match curve.name {
        BuiltinKind::Zero => (0.0, 0.0),
        BuiltinKind::Identity => (lo / c, hi / c),
        BuiltinKind::Sine => {
            // 0.5 sin(5u) is 2.5-Lipschitz, so f is (0.25/M)-Lipschitz in t
            let mid = 0.5 * (lo + hi);
            let v = 0.5 * (5.0 * mid / c).sin();
            let w = 0.25 / curve.lipschitz * 0.5 * (hi - lo);
            (v - w, v + w)
        }
    };
    let pad = 1e-12 + 1e-12 * a.abs().max(b.abs());
    (a - pad, b + pad)
}

/// Range of `(p − q)^2` for `p ∈ [a0, a1]`, `q ∈ [b0, b1]`.
fn sq_diff(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let lo = a.0 - b.1;
    let hi = a.1 - b.0;
    let m = lo.abs().max(hi.abs());
    let low = if lo <= 0.0 && hi >= 0.0 {
        0.0
    } else {
        lo.abs().min(hi.abs())
    };
    (low * low, m * m)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TripleScan {
    pub checked: u64,
    pub violations: u64,
    pub examples: Vec<[u64; 3]>,
}

/// For every triple of distinct cells `a < b < c` of a one-dimensional `x`, tests whether the
/// graph points over them could be the vertices of an isosceles triangle, by comparing ranges
/// of squared side lengths.
pub fn isosceles_triple_scan(x: &CubeSet, curve: &CurveSpec) -> TripleScan {
    assert_eq!(x.dim(), 1);
    let h = x.scale().length();
    let boxes: Vec<((f64, f64), (f64, f64))> = x
        .iter()
        .map(|c| {
            let (lo, hi) = (c[0] as f64 * h, (c[0] + 1) as f64 * h);
            ((lo, hi), f_bounds(curve, lo, hi))
        })
        .collect();
    let side = |i: usize, j: usize| {
        let (tx, fx) = (sq_diff(boxes[i].0, boxes[j].0), sq_diff(boxes[i].1, boxes[j].1));
        let (lo, hi) = (tx.0 + fx.0, tx.1 + fx.1);
        (lo * (1.0 - 1e-12), hi * (1.0 + 1e-12))
    };
    let overlap = |p: (f64, f64), q: (f64, f64)| p.0 <= q.1 && q.0 <= p.1;
    let mut out = TripleScan::default();
    let m = boxes.len();
    for a in 0..m {
        for b in a + 1..m {
            for c in b + 1..m {
                out.checked += 1;
                let (ab, ac, bc) = (side(a, b), side(a, c), side(b, c));
                if overlap(ab, ac) || overlap(ab, bc) || overlap(ac, bc) {
                    out.violations += 1;
                    if out.examples.len() < 10 {
                        out.examples.push([x.get(a)[0], x.get(b)[0], x.get(c)[0]]);
                    }
                }
            }
        }
    }
    out
}
