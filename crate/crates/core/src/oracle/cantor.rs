use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{check_factor_set, Budget, PatternOracle, ScaleCache, Soundness};
use crate::dyadic::{CubeSet, DyadicScale};
use crate::error::{Error, Result};

/// Product of affine copies of a self-similar Cantor set.
///
/// Coordinate `i` ranges over `offset_i + scale * K`, where `K` is the set of base-`base`
/// expansions using only `digits`. Each axis is covered by the dyadic cells meeting the
/// closed generation intervals of length at most one cell.
#[derive(Debug)]
pub struct CantorProduct {
    base: u64,
    digits: Vec<u64>,
    scale: Ratio<i64>,
    offsets: Vec<Ratio<i64>>,
    alpha: f64,
    cache: ScaleCache<Vec<Vec<u64>>>,
}

impl CantorProduct {
    pub fn new(
        base: u64,
        mut digits: Vec<u64>,
        scale: Ratio<i64>,
        offsets: Vec<Ratio<i64>>,
        alpha: Option<f64>,
    ) -> Result<Self> {
        if base < 2 {
            return Err(Error::InvalidConfig("Cantor base must be at least 2".into()));
        }
        digits.sort_unstable();
        digits.dedup();
        if digits.is_empty() || digits.iter().any(|&x| x >= base) {
            return Err(Error::InvalidConfig(format!(
                "Cantor digits {digits:?} must be a nonempty subset of 0..{base}"
            )));
        }
        if scale <= Ratio::zero() {
            return Err(Error::InvalidConfig("Cantor scale must be positive".into()));
        }
        if offsets.is_empty() {
            return Err(Error::InvalidConfig("Cantor product needs at least one axis".into()));
        }
        let natural = Self::natural_dimension(base, digits.len(), offsets.len());
        let alpha = alpha.unwrap_or(natural);
        if alpha < natural - 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "declared alpha {alpha} is below the box dimension {natural:.6} of the Cantor product"
            )));
        }
        Ok(CantorProduct {
            base,
            digits,
            scale,
            offsets,
            alpha,
            cache: ScaleCache::default(),
        })
    }

    /// Standard middle-thirds Cantor set, one axis per entry of `offsets`.
    pub fn middle_thirds(dim: usize) -> Self {
        Self::new(3, vec![0, 2], Ratio::one(), vec![Ratio::zero(); dim], None).expect("valid parameters")
    }

    pub fn natural_dimension(base: u64, digits: usize, dim: usize) -> f64 {
        dim as f64 * (digits as f64).ln() / (base as f64).ln()
    }

    pub fn axis_count(&self) -> usize {
        self.offsets.len()
    }

    /// Sorted cell indices covering axis `axis` at `scale`.
    pub fn axis_cover(&self, scale: DyadicScale, axis: usize) -> Vec<u64> {
        self.covers(scale)[axis].clone()
    }

    fn covers(&self, scale: DyadicScale) -> std::sync::Arc<Vec<Vec<u64>>> {
        self.cache
            .get_or_try(scale, || {
                let mut out: Vec<Vec<u64>> = Vec::with_capacity(self.offsets.len());
                for (i, off) in self.offsets.iter().enumerate() {
                    if let Some(j) = self.offsets[..i].iter().position(|o| o == off) {
                        let prev = out[j].clone();
                        out.push(prev);
                    } else {
                        out.push(self.cover_axis(scale, *off));
                    }
                }
                Ok(out)
            })
            .expect("Cantor covers never fail")
    }

    fn cover_axis(&self, scale: DyadicScale, offset: Ratio<i64>) -> Vec<u64> {
        let k = scale.exponent();
        let cells = BigInt::from(scale.cells_per_axis());
        let b = BigInt::from(self.base);
        let bm1 = BigInt::from(self.base - 1);
        let dmin = BigInt::from(self.digits[0]);
        let dmax = BigInt::from(*self.digits.last().unwrap());
        let (sn, sd) = (BigInt::from(*self.scale.numer()), BigInt::from(*self.scale.denom()));
        let (on, od) = (BigInt::from(*offset.numer()), BigInt::from(*offset.denom()));
        let two_k = BigInt::one() << k;

        let mut out = Vec::new();
        // stack of (generation, word value W) for words of length g; K-word interval is
        // [(W(b-1)+dmin), (W(b-1)+dmax)] / ((b-1) b^g)
        let mut stack: Vec<(u32, BigInt)> = vec![(0, BigInt::zero())];
        while let Some((g, w)) = stack.pop() {
            let bg = b.pow(g);
            let den = &od * &sd * &bm1 * &bg;
            let base_num = &on * &sd * &bm1 * &bg;
            let lo_num = &base_num + &sn * &od * (&w * &bm1 + &dmin);
            let hi_num = &base_num + &sn * &od * (&w * &bm1 + &dmax);
            let lo_cell = (&lo_num * &two_k).div_floor(&den);
            let hi_cell = (&hi_num * &two_k).div_floor(&den);
            if hi_cell.is_negative() || lo_cell >= cells {
                continue;
            }
            // interval length scale*(dmax-dmin)/((b-1) b^g) <= 2^-k
            let len_fits = (&sn * (&dmax - &dmin)) * &two_k <= &sd * &bm1 * &bg;
            if len_fits {
                let first = lo_cell.max(BigInt::zero()).to_u64().unwrap();
                let last = hi_cell.min(&cells - 1).to_u64().unwrap();
                out.extend(first..=last);
                continue;
            }
            for dgt in self.digits.iter().rev() {
                stack.push((g + 1, &w * &b + BigInt::from(*dgt)));
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

impl PatternOracle for CantorProduct {
    fn ambient_dim(&self) -> usize {
        self.offsets.len()
    }

    fn declared_alpha(&self) -> f64 {
        self.alpha
    }

    fn soundness(&self) -> Soundness {
        Soundness::OverApprox
    }

    fn contains(&self, scale: DyadicScale, index: &[u64]) -> bool {
        let covers = self.covers(scale);
        covers.iter().zip(index).all(|(c, a)| c.binary_search(a).is_ok())
    }

    fn enumerate(&self, scale: DyadicScale, budget: &Budget) -> Result<CubeSet> {
        budget.check_cubes("Cantor product cover", &self.count(scale, budget)?)?;
        let covers = self.covers(scale);
        let dim = covers.len();
        let lens: Vec<u64> = covers.iter().map(|c| c.len() as u64).collect();
        let mut data = Vec::new();
        if lens.iter().any(|&l| l == 0) {
            return Ok(CubeSet::empty(dim, scale));
        }
        // walk the mixed-radix product in lexicographic order
        let mut pos = vec![0usize; dim];
        loop {
            for (c, &p) in covers.iter().zip(&pos) {
                data.push(c[p]);
            }
            let mut i = dim;
            loop {
                if i == 0 {
                    return Ok(CubeSet::from_sorted_unchecked(dim, scale, data));
                }
                i -= 1;
                pos[i] += 1;
                if (pos[i] as u64) < lens[i] {
                    break;
                }
                pos[i] = 0;
            }
        }
    }

    fn count(&self, scale: DyadicScale, _budget: &Budget) -> Result<BigUint> {
        Ok(self.covers(scale).iter().map(|c| BigUint::from(c.len())).product())
    }

    fn enumerate_within(&self, scale: DyadicScale, factors: &CubeSet, n: usize, budget: &Budget) -> Result<CubeSet> {
        check_factor_set(self.ambient_dim(), scale, factors, n)?;
        let covers = self.covers(scale);
        let d = factors.dim();
        // the cover is a product over axes, so each factor block is filtered on its own axes
        let blocks: Vec<Vec<&[u64]>> = (0..n)
            .map(|j| {
                factors
                    .iter()
                    .filter(|f| {
                        f.iter()
                            .zip(&covers[j * d..(j + 1) * d])
                            .all(|(a, c)| c.binary_search(a).is_ok())
                    })
                    .collect()
            })
            .collect();
        let total: BigUint = blocks.iter().map(|b| BigUint::from(b.len())).product();
        budget.check_cubes("Cantor product cubes within factors", &total)?;
        if total.is_zero() {
            return Ok(CubeSet::empty(d * n, scale));
        }
        let mut data = Vec::new();
        let mut pos = vec![0usize; n];
        loop {
            for (b, &p) in blocks.iter().zip(&pos) {
                data.extend_from_slice(b[p]);
            }
            let mut i = n;
            loop {
                if i == 0 {
                    return Ok(CubeSet::from_sorted_unchecked(d * n, scale, data));
                }
                i -= 1;
                pos[i] += 1;
                if pos[i] < blocks[i].len() {
                    break;
                }
                pos[i] = 0;
            }
        }
    }

    fn count_on_axis(&self, scale: DyadicScale, d: usize, _budget: &Budget) -> Result<BigUint> {
        let covers = self.covers(scale);
        if covers[d.min(covers.len())..].iter().any(|c| c.first() != Some(&0)) {
            return Ok(BigUint::zero());
        }
        Ok(covers[..d.min(covers.len())]
            .iter()
            .map(|c| BigUint::from(c.len()))
            .product())
    }
}
