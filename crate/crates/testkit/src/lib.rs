//! Fixtures shared by the acceptance suite and the single-scale property tests.

use std::collections::HashSet;
use std::path::PathBuf;

use fractal_avoid::avoider::{AvoidanceInstance, PatternCubes};
use fractal_avoid::{CubeSet, DyadicScale};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

pub fn read_config(name: &str) -> String {
    std::fs::read_to_string(config_path(name)).expect("config file is readable")
}

/// A single-scale instance with an explicit pattern set.
#[derive(Clone, Debug)]
pub struct Instance {
    pub d: usize,
    pub n: usize,
    pub l: DyadicScale,
    pub s: DyadicScale,
    pub e: CubeSet,
    pub g: CubeSet,
}

impl Instance {
    pub fn view(&self) -> AvoidanceInstance<'_> {
        AvoidanceInstance {
            d: self.d,
            n: self.n,
            l: self.l,
            s: self.s,
            e: &self.e,
            g: PatternCubes::Explicit(&self.g),
        }
    }
}

/// `E` is a random nonempty set of cubes at `2^-l_exp`; `G` holds between `(l/s)^d` and
/// `min(4 (l/s)^d, (l/s)^{dn}/2)` cubes, mostly with every factor inside `E`.
pub fn random_instance(seed: u64, d: usize, n: usize, l_exp: u32, gap: u32) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = DyadicScale::new(l_exp).unwrap();
    let s = DyadicScale::new(l_exp + gap).unwrap();
    let grid = 1u64 << (l_exp as usize * d);
    let mut cells: Vec<Vec<u64>> = (0..grid)
        .filter(|_| rng.gen_bool(0.5))
        .map(|c| unflatten(c, d, l_exp))
        .collect();
    if cells.is_empty() {
        cells.push(unflatten(rng.gen_range(0..grid), d, l_exp));
    }
    let e = CubeSet::from_indices(d, l, cells.clone()).unwrap();

    let lower = 1u64 << (gap as usize * d);
    let upper = (1u64 << (gap as usize * d * n - 1)).min(4 * lower);
    let target = rng.gen_range(lower..=upper) as usize;
    let side = 1u64 << (l_exp + gap);
    let mut seen: HashSet<Vec<u64>> = HashSet::with_capacity(target);
    while seen.len() < target {
        let mut idx = Vec::with_capacity(d * n);
        for _ in 0..n {
            if rng.gen_bool(0.9) {
                let parent = &cells[rng.gen_range(0..cells.len())];
                for &p in parent {
                    idx.push((p << gap) | rng.gen_range(0..1u64 << gap));
                }
            } else {
                for _ in 0..d {
                    idx.push(rng.gen_range(0..side));
                }
            }
        }
        seen.insert(idx);
    }
    let g = CubeSet::from_indices(d * n, s, seen).unwrap();
    Instance { d, n, l, s, e, g }
}

fn unflatten(mut c: u64, d: usize, k: u32) -> Vec<u64> {
    let mut out = vec![0; d];
    for slot in out.iter_mut().rev() {
        *slot = c & ((1 << k) - 1);
        c >>= k;
    }
    out
}

/// Whether `2^-m` satisfies `r^{d(n-1)} >= 2 l^{-d} s^{dn} #G`, in integers.
pub fn meets_lower_bound(inst: &Instance, m: i64) -> bool {
    let (a, b) = (inst.l.exponent() as i64, inst.s.exponent() as i64);
    let (d, n) = (inst.d as i64, inst.n as i64);
    // 2^{-m d(n-1)} >= 2^{1 + a d - b d n} #G
    let lhs_exp = b * d * n - a * d - 1 - m * d * (n - 1);
    let count = BigUint::from(inst.g.len());
    if lhs_exp < 0 {
        // the left side is below one while #G >= 1
        return false;
    }
    (BigUint::from(1u8) << lhs_exp as usize) >= count
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
