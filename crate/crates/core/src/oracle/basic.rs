use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

use super::{axis_scan, check_factor_set, Budget, PatternOracle, ScaleCache, SharedOracle, Soundness};
use crate::dyadic::{for_each_child, grid_size, CubeSet, DyadicScale};
use crate::error::{Error, Result};
use crate::exec::Exec;

/// The axis plane `H = {x in [0,1)^{dn} : x_{d+1} = ... = x_{dn} = 0}`.
#[derive(Clone, Debug)]
pub struct Hyperplane {
    d: usize,
    n: usize,
}

impl Hyperplane {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if d == 0 || n < 2 {
            return Err(Error::InvalidConfig(format!(
                "axis plane needs d >= 1 and n >= 2, got d = {d}, n = {n}"
            )));
        }
        Ok(Hyperplane { d, n })
    }
}

impl PatternOracle for Hyperplane {
    fn ambient_dim(&self) -> usize {
        self.d * self.n
    }

    fn declared_alpha(&self) -> f64 {
        self.d as f64
    }

    fn soundness(&self) -> Soundness {
        Soundness::Exact
    }

    fn contains(&self, _scale: DyadicScale, index: &[u64]) -> bool {
        index[self.d..].iter().all(|&a| a == 0)
    }

    fn enumerate(&self, scale: DyadicScale, budget: &Budget) -> Result<CubeSet> {
        budget.check_cubes("axis plane", &grid_size(self.d, scale))?;
        let dim = self.ambient_dim();
        let mut data = Vec::new();
        for_each_child(&vec![0; self.d], scale.exponent(), |a| {
            data.extend_from_slice(a);
            data.extend(std::iter::repeat(0).take(dim - self.d));
        });
        Ok(CubeSet::from_sorted_unchecked(dim, scale, data))
    }

    fn count(&self, scale: DyadicScale, _budget: &Budget) -> Result<BigUint> {
        Ok(grid_size(self.d, scale))
    }

    fn count_on_axis(&self, scale: DyadicScale, d: usize, _budget: &Budget) -> Result<BigUint> {
        Ok(grid_size(d.min(self.d), scale))
    }

    fn axis_plane(&self) -> Option<usize> {
        Some(self.d)
    }

    fn enumerate_within(&self, scale: DyadicScale, factors: &CubeSet, n: usize, _budget: &Budget) -> Result<CubeSet> {
        check_factor_set(self.ambient_dim(), scale, factors, n)?;
        let zero = vec![0u64; self.d];
        let mut data = Vec::new();
        if factors.contains(&zero) {
            for a in factors.iter() {
                data.extend_from_slice(a);
                data.extend(std::iter::repeat(0).take(self.d * (n - 1)));
            }
        }
        Ok(CubeSet::from_sorted_unchecked(self.ambient_dim(), scale, data))
    }
}

/// A finite set of points; the cover is exact.
#[derive(Debug)]
pub struct PointCloud {
    dim: usize,
    points: Vec<Vec<f64>>,
    cache: ScaleCache<CubeSet>,
}

impl PointCloud {
    /// Points outside `[0,1)^dim` are dropped, since only the unit cube is ever covered.
    pub fn new(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("point cloud needs positive dimension".into()));
        }
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::InvalidConfig(format!(
                "point {p:?} does not have dimension {dim}"
            )));
        }
        if points.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("point coordinates must be finite".into()));
        }
        let points = points
            .into_iter()
            .filter(|p| p.iter().all(|&x| (0.0..1.0).contains(&x)))
            .collect();
        Ok(PointCloud {
            dim,
            points,
            cache: ScaleCache::default(),
        })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    fn cover(&self, scale: DyadicScale) -> std::sync::Arc<CubeSet> {
        self.cache
            .get_or_try(scale, || {
                let side = scale.cells_per_axis() as f64;
                // multiplying by a power of two is exact, so the floor is exact
                let data = self
                    .points
                    .iter()
                    .flat_map(|p| p.iter().map(move |&x| (x * side).floor() as u64))
                    .collect();
                Ok(CubeSet::from_flat_unchecked(self.dim, scale, data))
            })
            .expect("point cloud covers never fail")
    }
}

impl PatternOracle for PointCloud {
    fn ambient_dim(&self) -> usize {
        self.dim
    }

    fn declared_alpha(&self) -> f64 {
        0.0
    }

    fn soundness(&self) -> Soundness {
        Soundness::Exact
    }

    fn contains(&self, scale: DyadicScale, index: &[u64]) -> bool {
        self.cover(scale).contains(index)
    }

    fn enumerate(&self, scale: DyadicScale, _budget: &Budget) -> Result<CubeSet> {
        Ok((*self.cover(scale)).clone())
    }
}

/// Zero set of `c_1 x_1 + ... + c_m x_m + c_0` in `[0,1)^m`; the cover is exact.
#[derive(Clone, Debug)]
pub struct LinearZeroSet {
    coeffs: Vec<i128>,
    constant: i128,
}

const LINEAR_COEFF_CAP: i128 = 1 << 40;

impl LinearZeroSet {
    /// Rational coefficients are scaled to integers by their common denominator.
    pub fn new(coeffs: &[num_rational::Ratio<i64>], constant: num_rational::Ratio<i64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidConfig("linear form needs coefficients".into()));
        }
        let mut den: i128 = 1;
        for r in coeffs.iter().chain(std::iter::once(&constant)) {
            den = den.lcm(&(*r.denom() as i128));
            if den > LINEAR_COEFF_CAP {
                return Err(Error::InvalidConfig("linear form denominators too large".into()));
            }
        }
        let scale = |r: &num_rational::Ratio<i64>| *r.numer() as i128 * (den / *r.denom() as i128);
        let ints: Vec<i128> = coeffs.iter().map(scale).collect();
        let constant = scale(&constant);
        if ints
            .iter()
            .chain(std::iter::once(&constant))
            .any(|c| c.abs() > LINEAR_COEFF_CAP)
        {
            return Err(Error::InvalidConfig(format!(
                "linear form coefficients exceed 2^40 after clearing denominators"
            )));
        }
        Ok(LinearZeroSet { coeffs: ints, constant })
    }

    /// The zero set meets the half-open cube iff the form vanishes at a point of it.
    fn meets(&self, scale: DyadicScale, index: &[u64]) -> bool {
        let c0 = self.constant << scale.exponent();
        let (mut lo, mut hi) = (c0, c0);
        let (mut has_neg, mut has_pos) = (false, false);
        for (&c, &a) in self.coeffs.iter().zip(index) {
            let a = a as i128;
            if c > 0 {
                has_pos = true;
                lo += c * a;
                hi += c * (a + 1);
            } else if c < 0 {
                has_neg = true;
                lo += c * (a + 1);
                hi += c * a;
            }
        }
        (lo < 0 && hi > 0) || (lo == 0 && !has_neg) || (hi == 0 && !has_pos)
    }
}

impl PatternOracle for LinearZeroSet {
    fn ambient_dim(&self) -> usize {
        self.coeffs.len()
    }

    fn declared_alpha(&self) -> f64 {
        if self.coeffs.iter().all(|c| c.is_zero()) {
            self.coeffs.len() as f64
        } else {
            self.coeffs.len() as f64 - 1.0
        }
    }

    fn soundness(&self) -> Soundness {
        Soundness::Exact
    }

    fn contains(&self, scale: DyadicScale, index: &[u64]) -> bool {
        self.meets(scale, index)
    }

    fn enumerate(&self, scale: DyadicScale, budget: &Budget) -> Result<CubeSet> {
        let dim = self.ambient_dim();
        let Some(pivot) = self.coeffs.iter().rposition(|c| !c.is_zero()) else {
            if self.constant == 0 {
                return CubeSet::full(dim, scale, budget.max_cubes);
            }
            return Ok(CubeSet::empty(dim, scale));
        };
        let per = scale.cells_per_axis();
        let outer = grid_size(dim - 1, scale);
        budget.check_work("linear zero-set scan", &outer)?;
        let outer = outer.to_u64().unwrap();
        let cp = self.coeffs[pivot];
        let data = Exec::current().flat_map_range(outer, |lin| {
            let mut idx = vec![0u64; dim];
            let mut rest = lin;
            for i in (0..dim).rev().filter(|&i| i != pivot) {
                idx[i] = rest % per;
                rest /= per;
            }
            // range of the form without the pivot term, over the closed box
            let c0 = self.constant << scale.exponent();
            let (mut lo, mut hi) = (c0, c0);
            for (i, (&c, &a)) in self.coeffs.iter().zip(&idx).enumerate() {
                if i == pivot {
                    continue;
                }
                let a = a as i128;
                lo += c * a + c.min(0);
                hi += c * a + c.max(0);
            }
            // pivot cell a with cp*[a, a+1] meeting [-hi, -lo]
            let (t0, t1) = if cp > 0 { (-hi, -lo) } else { (-lo, -hi) };
            let (q0, q1) = (Integer::div_floor(&t0, &cp), Integer::div_floor(&t1, &cp));
            let first = q0.min(q1) - 1;
            let last = q0.max(q1) + 1;
            let first = first.max(0);
            let last = last.min(per as i128 - 1);
            let mut out = Vec::new();
            let mut a = first;
            while a <= last {
                idx[pivot] = a as u64;
                if self.meets(scale, &idx) {
                    out.extend_from_slice(&idx);
                }
                a += 1;
            }
            out
        });
        budget.check_cubes("linear zero-set cover", &BigUint::from(data.len() / dim))?;
        Ok(CubeSet::from_flat_unchecked(dim, scale, data))
    }
}

/// Union of two oracles on the same ambient space.
#[derive(Clone, Debug)]
pub struct Union {
    a: SharedOracle,
    b: SharedOracle,
}

impl Union {
    pub fn new(a: SharedOracle, b: SharedOracle) -> Result<Self> {
        if a.ambient_dim() != b.ambient_dim() {
            return Err(Error::InvalidConfig(format!(
                "union of oracles with dimensions {} and {}",
                a.ambient_dim(),
                b.ambient_dim()
            )));
        }
        Ok(Union { a, b })
    }

    pub fn parts(&self) -> (&SharedOracle, &SharedOracle) {
        (&self.a, &self.b)
    }

    fn overlap(&self, scale: DyadicScale, budget: &Budget, ca: &BigUint, cb: &BigUint) -> Result<BigUint> {
        if let Some(d) = self.a.axis_plane() {
            return self.b.count_on_axis(scale, d, budget);
        }
        if let Some(d) = self.b.axis_plane() {
            return self.a.count_on_axis(scale, d, budget);
        }
        let (small, other) = if ca <= cb {
            (&self.a, &self.b)
        } else {
            (&self.b, &self.a)
        };
        let set = small.enumerate(scale, budget)?;
        let hits = Exec::current().sum_range(set.len() as u64, |i| other.contains(scale, set.get(i as usize)) as u128);
        Ok(BigUint::from(hits))
    }
}

impl PatternOracle for Union {
    fn ambient_dim(&self) -> usize {
        self.a.ambient_dim()
    }

    fn declared_alpha(&self) -> f64 {
        self.a.declared_alpha().max(self.b.declared_alpha())
    }

    fn soundness(&self) -> Soundness {
        self.a.soundness().weaker(self.b.soundness())
    }

    fn contains(&self, scale: DyadicScale, index: &[u64]) -> bool {
        self.a.contains(scale, index) || self.b.contains(scale, index)
    }

    fn enumerate(&self, scale: DyadicScale, budget: &Budget) -> Result<CubeSet> {
        let ea = self.a.enumerate(scale, budget)?;
        let eb = self.b.enumerate(scale, budget)?;
        let u = ea.union(&eb)?;
        budget.check_cubes("union cover", &u.cover_count())?;
        Ok(u)
    }

    fn count(&self, scale: DyadicScale, budget: &Budget) -> Result<BigUint> {
        let ca = self.a.count(scale, budget)?;
        let cb = self.b.count(scale, budget)?;
        if ca.is_zero() {
            return Ok(cb);
        }
        if cb.is_zero() {
            return Ok(ca);
        }
        let ov = self.overlap(scale, budget, &ca, &cb)?;
        Ok(ca + cb - ov)
    }

    fn count_on_axis(&self, scale: DyadicScale, d: usize, budget: &Budget) -> Result<BigUint> {
        if self.a.axis_plane() == Some(d) || self.b.axis_plane() == Some(d) {
            return Ok(grid_size(d, scale));
        }
        axis_scan(self, scale, d, budget)
    }

    fn enumerate_within(&self, scale: DyadicScale, factors: &CubeSet, n: usize, budget: &Budget) -> Result<CubeSet> {
        let ea = self.a.enumerate_within(scale, factors, n, budget)?;
        let eb = self.b.enumerate_within(scale, factors, n, budget)?;
        ea.union(&eb)
    }
}
