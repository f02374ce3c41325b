//! Half-open dyadic cubes and sorted cube sets with exact integer indices.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Finest admissible scale exponent.
pub const MAX_EXPONENT: u32 = 60;

/// Sidelength `2^-exponent`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct DyadicScale {
    exponent: u32,
}

impl DyadicScale {
    pub fn new(exponent: u32) -> Result<Self> {
        if exponent > MAX_EXPONENT {
            return Err(Error::ScaleOverflow(exponent));
        }
        Ok(DyadicScale { exponent })
    }

    pub fn unit() -> Self {
        DyadicScale { exponent: 0 }
    }

    pub fn exponent(self) -> u32 {
        self.exponent
    }

    /// Number of cells per axis, `2^exponent`.
    pub fn cells_per_axis(self) -> u64 {
        1u64 << self.exponent
    }

    /// Sidelength as a float, for reporting only.
    pub fn length(self) -> f64 {
        (-(self.exponent as f64)).exp2()
    }

    pub fn is_coarser_than(self, other: DyadicScale) -> bool {
        self.exponent < other.exponent
    }
}

impl<'de> Deserialize<'de> for DyadicScale {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let e = u32::deserialize(de)?;
        DyadicScale::new(e).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for DyadicScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "2^-{}", self.exponent)
    }
}

/// A single cube `prod [a_i 2^-k, (a_i + 1) 2^-k)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cube {
    pub scale: DyadicScale,
    pub index: Vec<u64>,
}

impl Cube {
    pub fn new(scale: DyadicScale, index: Vec<u64>) -> Result<Self> {
        if index.is_empty() {
            return Err(Error::Precondition("cube must have positive dimension".into()));
        }
        let side = scale.cells_per_axis();
        if let Some(a) = index.iter().find(|&&a| a >= side) {
            return Err(Error::Precondition(format!(
                "index {a} lies outside the unit cube at scale {scale}"
            )));
        }
        Ok(Cube { scale, index })
    }

    pub fn unit(dim: usize) -> Self {
        Cube {
            scale: DyadicScale::unit(),
            index: vec![0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    pub fn parent(&self, coarser: DyadicScale) -> Result<Cube> {
        if coarser.exponent > self.scale.exponent {
            return Err(Error::Precondition(format!(
                "parent scale {coarser} is finer than cube scale {}",
                self.scale
            )));
        }
        let shift = self.scale.exponent - coarser.exponent;
        Ok(Cube {
            scale: coarser,
            index: self.index.iter().map(|a| a >> shift).collect(),
        })
    }

    pub fn children(&self, finer: DyadicScale) -> Result<CubeSet> {
        if finer.exponent < self.scale.exponent {
            return Err(Error::Precondition(format!(
                "child scale {finer} is coarser than cube scale {}",
                self.scale
            )));
        }
        let shift = finer.exponent - self.scale.exponent;
        let mut out = CubeSet::empty(self.dim(), finer);
        for_each_child(&self.index, shift, |c| out.data.extend_from_slice(c));
        // children of a single cube come out in lexicographic order
        Ok(out)
    }

    pub fn contains(&self, other: &Cube) -> bool {
        other.dim() == self.dim()
            && other.scale.exponent >= self.scale.exponent
            && other.parent(self.scale).map(|p| p.index == self.index).unwrap_or(false)
    }

    pub fn product_decompose(&self, d: usize, n: usize) -> Result<Vec<Cube>> {
        check_product_dim(self.dim(), d, n)?;
        Ok(self
            .index
            .chunks_exact(d)
            .map(|c| Cube {
                scale: self.scale,
                index: c.to_vec(),
            })
            .collect())
    }

    pub fn product_compose(factors: &[Cube]) -> Result<Cube> {
        let first = factors
            .first()
            .ok_or_else(|| Error::Precondition("no factors to compose".into()))?;
        let d = first.dim();
        let mut index = Vec::with_capacity(d * factors.len());
        for f in factors {
            if f.scale != first.scale || f.dim() != d {
                return Err(Error::Precondition("factors must share scale and dimension".into()));
            }
            index.extend_from_slice(&f.index);
        }
        Ok(Cube {
            scale: first.scale,
            index,
        })
    }

    pub fn is_strongly_non_diagonal(&self, d: usize, n: usize) -> Result<bool> {
        check_product_dim(self.dim(), d, n)?;
        Ok(is_strongly_non_diagonal(&self.index, d))
    }
}

fn check_product_dim(dim: usize, d: usize, n: usize) -> Result<()> {
    if d == 0 || n == 0 || dim != d * n {
        return Err(Error::Precondition(format!("dimension {dim} is not {d} x {n}")));
    }
    Ok(())
}

/// True iff the consecutive `d`-blocks of `index` are pairwise distinct.
pub fn is_strongly_non_diagonal(index: &[u64], d: usize) -> bool {
    let n = index.len() / d;
    for i in 0..n {
        let a = &index[i * d..(i + 1) * d];
        for j in (i + 1)..n {
            if a == &index[j * d..(j + 1) * d] {
                return false;
            }
        }
    }
    true
}

/// Calls `f` on each child index of `index` refined by `shift` levels, in lexicographic order.
pub fn for_each_child(index: &[u64], shift: u32, mut f: impl FnMut(&[u64])) {
    let dim = index.len();
    let base: Vec<u64> = index.iter().map(|a| a << shift).collect();
    let per = 1u64 << shift;
    let mut off = vec![0u64; dim];
    let mut cur = base.clone();
    loop {
        f(&cur);
        let mut i = dim;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            off[i] += 1;
            if off[i] < per {
                cur[i] = base[i] + off[i];
                break;
            }
            off[i] = 0;
            cur[i] = base[i];
        }
    }
}

/// Lexicographically sorted, duplicate-free set of cubes sharing dimension and scale.
///
/// Indices are stored flat with stride `dim`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CubeSet {
    dim: usize,
    scale: DyadicScale,
    data: Vec<u64>,
}

impl fmt::Debug for CubeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut l = f.debug_list();
        for c in self.iter().take(16) {
            l.entry(&c);
        }
        l.finish()?;
        write!(
            f,
            " (dim {}, k {}, {} cubes)",
            self.dim,
            self.scale.exponent,
            self.len()
        )
    }
}

impl CubeSet {
    pub fn empty(dim: usize, scale: DyadicScale) -> Self {
        assert!(dim > 0, "cube sets need positive dimension");
        CubeSet {
            dim,
            scale,
            data: Vec::new(),
        }
    }

    /// Builds a set from arbitrary flat indices, sorting and deduplicating.
    pub fn from_flat(dim: usize, scale: DyadicScale, data: Vec<u64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::Precondition(format!(
                "flat index buffer of length {} does not have stride {dim}",
                data.len()
            )));
        }
        let side = scale.cells_per_axis();
        if let Some(a) = data.iter().find(|&&a| a >= side) {
            return Err(Error::Precondition(format!(
                "index {a} lies outside the unit cube at scale {scale}"
            )));
        }
        Ok(Self::from_flat_unchecked(dim, scale, data))
    }

    pub(crate) fn from_flat_unchecked(dim: usize, scale: DyadicScale, data: Vec<u64>) -> Self {
        let data = sort_dedup(dim, data);
        CubeSet { dim, scale, data }
    }

    /// Wraps a buffer already known to be sorted and duplicate-free.
    pub(crate) fn from_sorted_unchecked(dim: usize, scale: DyadicScale, data: Vec<u64>) -> Self {
        debug_assert!(is_sorted_strict(dim, &data));
        CubeSet { dim, scale, data }
    }

    pub fn from_indices<I, V>(dim: usize, scale: DyadicScale, indices: I) -> Result<Self>
    where
        I: IntoIterator<Item = V>,
        V: AsRef<[u64]>,
    {
        let mut data = Vec::new();
        for v in indices {
            let v = v.as_ref();
            if v.len() != dim {
                return Err(Error::Precondition(format!(
                    "index of length {} in a set of dimension {dim}",
                    v.len()
                )));
            }
            data.extend_from_slice(v);
        }
        Self::from_flat(dim, scale, data)
    }

    /// Every cube of `[0,1)^dim` at `scale`, refusing if more than `max_cubes`.
    pub fn full(dim: usize, scale: DyadicScale, max_cubes: u64) -> Result<Self> {
        let total = grid_size(dim, scale);
        if total > BigUint::from(max_cubes) {
            return Err(Error::budget("full grid", total, max_cubes));
        }
        let mut out = CubeSet::empty(dim, scale);
        for_each_child(&vec![0; dim], scale.exponent, |c| out.data.extend_from_slice(c));
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scale(&self) -> DyadicScale {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn cover_count(&self) -> BigUint {
        BigUint::from(self.len())
    }

    pub fn get(&self, i: usize) -> &[u64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, u64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[u64] {
        &self.data
    }

    pub fn into_flat(self) -> Vec<u64> {
        self.data
    }

    pub fn cube(&self, i: usize) -> Cube {
        Cube {
            scale: self.scale,
            index: self.get(i).to_vec(),
        }
    }

    /// Position of `index` in the sorted order, if present.
    pub fn position(&self, index: &[u64]) -> Option<usize> {
        if index.len() != self.dim {
            return None;
        }
        let i = self.lower_bound(index);
        (i < self.len() && self.get(i) == index).then_some(i)
    }

    pub fn contains(&self, index: &[u64]) -> bool {
        self.position(index).is_some()
    }

    pub fn contains_cube(&self, c: &Cube) -> bool {
        c.scale == self.scale && self.contains(&c.index)
    }

    /// First position whose index is not less than `index`.
    pub fn lower_bound(&self, index: &[u64]) -> usize {
        let (mut lo, mut hi) = (0usize, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.get(mid) < index {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Inserts a cube, keeping order. Returns false if already present.
    pub fn insert(&mut self, index: &[u64]) -> Result<bool> {
        if index.len() != self.dim {
            return Err(Error::Precondition("dimension mismatch on insert".into()));
        }
        let side = self.scale.cells_per_axis();
        if index.iter().any(|&a| a >= side) {
            return Err(Error::Precondition("index outside the unit cube".into()));
        }
        let i = self.lower_bound(index);
        if i < self.len() && self.get(i) == index {
            return Ok(false);
        }
        let at = i * self.dim;
        self.data.splice(at..at, index.iter().copied());
        Ok(true)
    }

    pub fn remove(&mut self, index: &[u64]) -> bool {
        match self.position(index) {
            Some(i) => {
                self.data.drain(i * self.dim..(i + 1) * self.dim);
                true
            }
            None => false,
        }
    }

    fn check_compatible(&self, other: &CubeSet) -> Result<()> {
        if self.dim != other.dim || self.scale != other.scale {
            return Err(Error::Precondition(format!(
                "cube sets differ: (dim {}, {}) vs (dim {}, {})",
                self.dim, self.scale, other.dim, other.scale
            )));
        }
        Ok(())
    }

    pub fn union(&self, other: &CubeSet) -> Result<CubeSet> {
        self.check_compatible(other)?;
        let mut out = Vec::with_capacity(self.data.len() + other.data.len());
        let (mut i, mut j) = (0, 0);
        while i < self.len() && j < other.len() {
            match self.get(i).cmp(other.get(j)) {
                Ordering::Less => {
                    out.extend_from_slice(self.get(i));
                    i += 1;
                }
                Ordering::Greater => {
                    out.extend_from_slice(other.get(j));
                    j += 1;
                }
                Ordering::Equal => {
                    out.extend_from_slice(self.get(i));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.data[i * self.dim..]);
        out.extend_from_slice(&other.data[j * self.dim..]);
        Ok(CubeSet::from_sorted_unchecked(self.dim, self.scale, out))
    }

    pub fn difference(&self, other: &CubeSet) -> Result<CubeSet> {
        self.check_compatible(other)?;
        let data = self.iter().filter(|c| !other.contains(c)).flatten().copied().collect();
        Ok(CubeSet::from_sorted_unchecked(self.dim, self.scale, data))
    }

    pub fn intersection(&self, other: &CubeSet) -> Result<CubeSet> {
        self.check_compatible(other)?;
        let data = self.iter().filter(|c| other.contains(c)).flatten().copied().collect();
        Ok(CubeSet::from_sorted_unchecked(self.dim, self.scale, data))
    }

    pub fn is_subset(&self, other: &CubeSet) -> bool {
        self.dim == other.dim && self.scale == other.scale && self.iter().all(|c| other.contains(c))
    }

    /// Ancestors at a coarser scale.
    pub fn coarsen(&self, coarser: DyadicScale) -> Result<CubeSet> {
        if coarser.exponent > self.scale.exponent {
            return Err(Error::Precondition(format!(
                "cannot coarsen {} to finer {coarser}",
                self.scale
            )));
        }
        let shift = self.scale.exponent - coarser.exponent;
        let data = self.data.iter().map(|a| a >> shift).collect();
        Ok(CubeSet::from_flat_unchecked(self.dim, coarser, data))
    }

    /// All descendants at a finer scale, refusing if more than `max_cubes`.
    pub fn refine(&self, finer: DyadicScale, max_cubes: u64) -> Result<CubeSet> {
        if finer.exponent < self.scale.exponent {
            return Err(Error::Precondition(format!(
                "cannot refine {} to coarser {finer}",
                self.scale
            )));
        }
        let shift = finer.exponent - self.scale.exponent;
        let per = BigUint::from(1u8) << (shift as usize * self.dim);
        let total = per * BigUint::from(self.len());
        if total > BigUint::from(max_cubes) {
            return Err(Error::budget("refinement", total, max_cubes));
        }
        let mut data = Vec::new();
        for c in self.iter() {
            for_each_child(c, shift, |ch| data.extend_from_slice(ch));
        }
        if self.dim == 1 {
            return Ok(CubeSet::from_sorted_unchecked(1, finer, data));
        }
        Ok(CubeSet::from_flat_unchecked(self.dim, finer, data))
    }

    /// Range of positions whose cubes lie inside the ancestor `index` at `coarser` (dim 1 only
    /// gives a contiguous range in general; higher dims fall back to a scan).
    pub fn members_within(&self, coarser: DyadicScale, index: &[u64]) -> Vec<usize> {
        let shift = self.scale.exponent.saturating_sub(coarser.exponent);
        if self.dim == 1 {
            let lo = index[0] << shift;
            let hi = (index[0] + 1) << shift;
            let a = self.lower_bound(&[lo]);
            let b = self.lower_bound(&[hi]);
            return (a..b).collect();
        }
        // a cube lies inside iff its first coordinate is in range; exploit that to narrow the scan
        let lo = index[0] << shift;
        let hi = (index[0] + 1) << shift;
        let a = self.partition_first(lo);
        let b = self.partition_first(hi);
        (a..b)
            .filter(|&i| self.get(i).iter().zip(index).all(|(x, y)| (x >> shift) == *y))
            .collect()
    }

    fn partition_first(&self, v: u64) -> usize {
        let (mut lo, mut hi) = (0usize, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.get(mid)[0] < v {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// First `d` coordinates of every cube (the projection onto the first factor).
    pub fn first_factors(&self, d: usize) -> Result<CubeSet> {
        if d == 0 || self.dim % d != 0 {
            return Err(Error::Precondition(format!(
                "dimension {} is not a multiple of {d}",
                self.dim
            )));
        }
        let data = self.iter().flat_map(|c| c[..d].iter().copied()).collect();
        Ok(CubeSet::from_flat_unchecked(d, self.scale, data))
    }

    /// Shifts every coordinate by `offset` cells, dropping cubes that leave `[0,1)^dim`.
    pub fn translate(&self, offset: &[i64]) -> Result<CubeSet> {
        if offset.len() != self.dim {
            return Err(Error::Precondition("translation has wrong dimension".into()));
        }
        let side = self.scale.cells_per_axis() as i128;
        let mut data = Vec::with_capacity(self.data.len());
        'outer: for c in self.iter() {
            let start = data.len();
            for (a, o) in c.iter().zip(offset) {
                let v = *a as i128 + *o as i128;
                if v < 0 || v >= side {
                    data.truncate(start);
                    continue 'outer;
                }
                data.push(v as u64);
            }
        }
        Ok(CubeSet::from_flat_unchecked(self.dim, self.scale, data))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `2^(k·dim)`, the number of cubes of `[0,1)^dim` at scale `2^-k`.
pub fn grid_size(dim: usize, scale: DyadicScale) -> BigUint {
    BigUint::from(1u8) << (scale.exponent as usize * dim)
}

fn is_sorted_strict(dim: usize, data: &[u64]) -> bool {
    data.chunks_exact(dim)
        .zip(data.chunks_exact(dim).skip(1))
        .all(|(a, b)| a < b)
}

fn sort_dedup(dim: usize, mut data: Vec<u64>) -> Vec<u64> {
    if dim == 1 {
        data.sort_unstable();
        data.dedup();
        return data;
    }
    if is_sorted_strict(dim, &data) {
        return data;
    }
    let mut rows: Vec<&[u64]> = data.chunks_exact(dim).collect();
    rows.sort_unstable();
    rows.dedup();
    let mut out = Vec::with_capacity(rows.len() * dim);
    for r in rows {
        out.extend_from_slice(r);
    }
    out
}

#[derive(Serialize)]
struct CubeSetRef<'a> {
    dim: usize,
    k: u32,
    indices: Vec<&'a [u64]>,
}

#[derive(Deserialize)]
struct CubeSetOwned {
    dim: usize,
    k: u32,
    indices: Vec<Vec<u64>>,
}

impl Serialize for CubeSet {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        CubeSetRef {
            dim: self.dim,
            k: self.scale.exponent,
            indices: self.iter().collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for CubeSet {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = CubeSetOwned::deserialize(de)?;
        if raw.dim == 0 {
            return Err(D::Error::custom("cube set dimension must be positive"));
        }
        let scale = DyadicScale::new(raw.k).map_err(D::Error::custom)?;
        CubeSet::from_indices(raw.dim, scale, raw.indices).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sc(k: u32) -> DyadicScale {
        DyadicScale::new(k).unwrap()
    }

    #[test]
    fn parent_examples() {
        let c = Cube::new(sc(3), vec![5]).unwrap();
        assert_eq!(c.parent(sc(2)).unwrap().index, vec![2]);
        assert_eq!(c.parent(sc(3)).unwrap(), c);
        let c = Cube::new(sc(3), vec![7, 4]).unwrap();
        assert_eq!(c.parent(sc(0)).unwrap().index, vec![0, 0]);
        assert!(c.parent(sc(4)).is_err());
    }

    #[test]
    fn children_examples() {
        let u = Cube::unit(1);
        let ch = u.children(sc(1)).unwrap();
        assert_eq!(ch.iter().collect::<Vec<_>>(), vec![&[0][..], &[1]]);
        let c = Cube::new(sc(1), vec![1, 1]).unwrap();
        let ch = c.children(sc(2)).unwrap();
        let want: Vec<&[u64]> = vec![&[2, 2], &[2, 3], &[3, 2], &[3, 3]];
        assert_eq!(ch.iter().collect::<Vec<_>>(), want);
        assert_eq!(c.children(sc(1)).unwrap().len(), 1);
    }

    #[test]
    fn product_examples() {
        let c = Cube::new(sc(3), vec![3, 5]).unwrap();
        let f = c.product_decompose(1, 2).unwrap();
        assert_eq!(f[0].index, vec![3]);
        assert_eq!(f[1].index, vec![5]);
        assert_eq!(Cube::product_compose(&f).unwrap(), c);
        let c = Cube::new(sc(3), vec![1, 2, 1, 2]).unwrap();
        let f = c.product_decompose(2, 2).unwrap();
        assert_eq!(f[0], f[1]);
        assert!(c.product_decompose(3, 2).is_err());
    }

    #[test]
    fn snd_examples() {
        let s = |v: Vec<u64>, d, n| Cube::new(sc(3), v).unwrap().is_strongly_non_diagonal(d, n).unwrap();
        assert!(!s(vec![3, 3], 1, 2));
        assert!(s(vec![0, 1, 2], 1, 3));
        assert!(s(vec![1, 2, 1, 3], 2, 2));
        assert!(!s(vec![0, 1, 0], 1, 3));
    }

    #[test]
    fn cover_count_examples() {
        assert_eq!(CubeSet::empty(2, sc(3)).cover_count(), BigUint::from(0u8));
        let ch = Cube::unit(2).children(sc(4)).unwrap();
        assert_eq!(ch.cover_count(), BigUint::from(256u32));
        let full = CubeSet::full(3, sc(5), 1 << 20).unwrap();
        assert_eq!(full.cover_count(), BigUint::from(32768u32));
        assert!(CubeSet::full(3, sc(20), 1 << 20).is_err());
    }

    #[test]
    fn scale_cap() {
        assert!(DyadicScale::new(60).is_ok());
        assert!(matches!(DyadicScale::new(61), Err(Error::ScaleOverflow(61))));
    }

    #[test]
    fn set_ops() {
        let a = CubeSet::from_indices(2, sc(2), [[3, 1], [0, 2], [3, 1]]).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a.get(0), &[0, 2]);
        let b = CubeSet::from_indices(2, sc(2), [[1, 1], [0, 2]]).unwrap();
        assert_eq!(a.union(&b).unwrap().len(), 3);
        assert_eq!(a.difference(&b).unwrap().get(0), &[3, 1]);
        assert_eq!(a.intersection(&b).unwrap().len(), 1);
        let mut c = a.clone();
        assert!(c.insert(&[1, 3]).unwrap());
        assert!(!c.insert(&[1, 3]).unwrap());
        assert_eq!(c.get(1), &[1, 3]);
        assert!(c.remove(&[1, 3]));
        assert_eq!(c, a);
        assert!(CubeSet::from_indices(1, sc(2), [[4]]).is_err());
    }

    #[test]
    fn refine_coarsen_roundtrip() {
        let a = CubeSet::from_indices(2, sc(1), [[0, 1], [1, 0]]).unwrap();
        let r = a.refine(sc(3), 1000).unwrap();
        assert_eq!(r.len(), 32);
        assert_eq!(r.coarsen(sc(1)).unwrap(), a);
        assert_eq!(r.members_within(sc(1), &[0, 1]).len(), 16);
        let one = CubeSet::from_indices(1, sc(1), [[1]]).unwrap();
        let r1 = one.refine(sc(3), 100).unwrap();
        assert_eq!(r1.members_within(sc(2), &[2]), vec![0, 1]);
    }

    #[test]
    fn json_format() {
        let a = CubeSet::from_indices(2, sc(3), [[3, 5], [0, 7]]).unwrap();
        let s = a.to_json().unwrap();
        assert_eq!(s, r#"{"dim":2,"k":3,"indices":[[0,7],[3,5]]}"#);
        assert_eq!(CubeSet::from_json(&s).unwrap(), a);
        assert!(CubeSet::from_json(r#"{"dim":1,"k":2,"indices":[[9]]}"#).is_err());
        assert!(CubeSet::from_json(r#"{"dim":1,"k":61,"indices":[]}"#).is_err());
    }

    #[test]
    fn translate_drops_outside() {
        let a = CubeSet::from_indices(1, sc(2), [[0], [3]]).unwrap();
        let t = a.translate(&[1]).unwrap();
        assert_eq!(t.iter().collect::<Vec<_>>(), vec![&[1][..]]);
    }
}
