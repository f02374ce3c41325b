use serde::{Deserialize, Serialize};

use super::{log2_big, Budget, PatternOracle};
use crate::dyadic::{CubeSet, DyadicScale};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinkowskiEstimate {
    pub exponents: Vec<u32>,
    pub counts: Vec<String>,
    /// `log2(count) / k` per scale.
    pub normalized: Vec<f64>,
    /// Slopes between adjacent scales.
    pub pairwise: Vec<f64>,
    /// Least-squares slope of `log2(count)` against `k`.
    pub fitted: f64,
    /// Smallest adjacent slope, a proxy for the lower dimension.
    pub min_pairwise: f64,
}

pub fn minkowski_estimate(
    oracle: &dyn PatternOracle,
    scales: &[DyadicScale],
    budget: &Budget,
) -> Result<MinkowskiEstimate> {
    if scales.len() < 2 {
        return Err(Error::Precondition("need at least two scales".into()));
    }
    if scales.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition(
            "scales must be strictly decreasing in length".into(),
        ));
    }
    let mut counts = Vec::new();
    let mut logs = Vec::new();
    for &s in scales {
        let c = oracle.count(s, budget)?;
        if c == 0u8.into() {
            return Err(Error::UndefinedLog(s.exponent()));
        }
        logs.push(log2_big(&c));
        counts.push(c.to_string());
    }
    let ks: Vec<f64> = scales.iter().map(|s| s.exponent() as f64).collect();
    let normalized = ks
        .iter()
        .zip(&logs)
        .map(|(&k, &l)| if k == 0.0 { f64::NAN } else { l / k })
        .collect();
    let pairwise: Vec<f64> = (1..ks.len())
        .map(|i| (logs[i] - logs[i - 1]) / (ks[i] - ks[i - 1]))
        .collect();
    let (fitted, _) = linear_fit(&ks, &logs);
    let min_pairwise = pairwise.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(MinkowskiEstimate {
        exponents: scales.iter().map(|s| s.exponent()).collect(),
        counts,
        normalized,
        pairwise,
        fitted,
        min_pairwise,
    })
}

/// Ordinary least squares `y ≈ slope * x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Least squares `y ≈ a * x + b * log2(x) + c`; returns `(a, b, c)`.
pub fn fit_with_log_term(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let rows: Vec<[f64; 3]> = xs.iter().map(|&x| [x, x.log2(), 1.0]).collect();
    let mut ata = [[0.0f64; 3]; 3];
    let mut aty = [0.0f64; 3];
    for (r, &y) in rows.iter().zip(ys) {
        for i in 0..3 {
            aty[i] += r[i] * y;
            for j in 0..3 {
                ata[i][j] += r[i] * r[j];
            }
        }
    }
    let s = solve3(ata, aty);
    (s[0], s[1], s[2])
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in 0..3 {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..3 {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    [b[0] / a[0][0], b[1] / a[1][1], b[2] / a[2][2]]
}

/// Cells of `[0,1)^d` at `scale` that are not the first factor of any covered cube.
pub fn trivial_projection_complement(
    z: &dyn PatternOracle,
    d: usize,
    n: usize,
    scale: DyadicScale,
    budget: &Budget,
) -> Result<CubeSet> {
    if z.ambient_dim() != d * n {
        return Err(Error::Precondition(format!(
            "pattern dimension {} is not {d} x {n}",
            z.ambient_dim()
        )));
    }
    let full = CubeSet::full(d, scale, budget.max_cubes)?;
    let shadow = z.enumerate(scale, budget)?.first_factors(d)?;
    full.difference(&shadow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{Hyperplane, LinearZeroSet, PointCloud};

    fn sc(k: u32) -> DyadicScale {
        DyadicScale::new(k).unwrap()
    }

    #[test]
    fn full_cube_has_ambient_slope() {
        // the zero form with zero constant vanishes everywhere
        let z = LinearZeroSet::new(
            &[num_rational::Ratio::from_integer(0); 2],
            num_rational::Ratio::from_integer(0),
        )
        .unwrap();
        let e = minkowski_estimate(&z, &[sc(1), sc(2), sc(3), sc(4)], &Budget::default()).unwrap();
        assert_eq!(e.fitted, 2.0);
        assert!(e.normalized.iter().all(|&v| v == 2.0));
    }

    #[test]
    fn single_point_has_zero_slope() {
        let p = PointCloud::new(2, vec![vec![0.3, 0.7]]).unwrap();
        let e = minkowski_estimate(&p, &[sc(2), sc(5), sc(9)], &Budget::default()).unwrap();
        assert_eq!(e.fitted, 0.0);
        let empty = PointCloud::new(1, vec![]).unwrap();
        assert!(matches!(
            minkowski_estimate(&empty, &[sc(1), sc(2)], &Budget::default()),
            Err(Error::UndefinedLog(1))
        ));
    }

    #[test]
    fn projection_complement_examples() {
        let b = Budget::default();
        let empty = PointCloud::new(2, vec![]).unwrap();
        assert_eq!(trivial_projection_complement(&empty, 1, 2, sc(3), &b).unwrap().len(), 8);
        let h = Hyperplane::new(1, 2).unwrap();
        assert!(trivial_projection_complement(&h, 1, 2, sc(3), &b).unwrap().is_empty());
        let one = PointCloud::new(2, vec![vec![2.5 / 8.0, 5.5 / 8.0]]).unwrap();
        let c = trivial_projection_complement(&one, 1, 2, sc(3), &b).unwrap();
        assert_eq!(c.len(), 7);
        assert!(!c.contains(&[2]));
    }

    #[test]
    fn log_term_fit_recovers_coefficients() {
        let xs: Vec<f64> = (4..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0 * x.log2() + 3.0).collect();
        let (a, b, c) = fit_with_log_term(&xs, &ys);
        assert!((a - 2.0).abs() < 1e-9 && (b - 1.0).abs() < 1e-9 && (c - 3.0).abs() < 1e-9);
    }
}
