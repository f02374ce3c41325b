use serde::{Deserialize, Serialize};

use crate::builder::ConstructionTrace;
use crate::oracle::linear_fit;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxCount {
    pub k: usize,
    pub exponent: u32,
    pub count: u64,
    /// `"l"` for `l_k`, `"r"` for the intermediate scale `r_k`.
    pub scale: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    /// `(dn − α)/(n − 1)`.
    pub target: f64,
    pub table: Vec<BoxCount>,
    pub slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refused: Option<String>,
}

impl DimensionReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,scale,exponent,count\n");
        for b in &self.table {
            s.push_str(&format!("{},{},{},{}\n", b.k, b.scale, b.exponent, b.count));
        }
        s
    }
}

/// Box counts of the levels and a least-squares slope of `log2 count` against `log2(1/l)`.
///
/// Each `r_k`-cube holding a point of `X_k` holds exactly one `X_k` cube, so the count at
/// `r_k` is `#X_k`.
pub fn cmd_dimension(trace: &ConstructionTrace) -> DimensionReport {
    let mut table = vec![BoxCount {
        k: 0,
        exponent: 0,
        count: 1,
        scale: "l".into(),
    }];
    for k in 1..=trace.levels.len() {
        let count = trace.levels[k - 1].len() as u64;
        table.push(BoxCount {
            k,
            exponent: trace.r_exp(k),
            count,
            scale: "r".into(),
        });
        table.push(BoxCount {
            k,
            exponent: trace.l_exp(k),
            count,
            scale: "l".into(),
        });
    }
    let target = trace.target_dimension();
    if trace.levels.len() < 2 {
        return DimensionReport {
            target,
            table,
            slope: None,
            refused: Some(format!(
                "{} level(s) built; a slope needs at least 2",
                trace.levels.len()
            )),
        };
    }
    let xs: Vec<f64> = table.iter().map(|b| b.exponent as f64).collect();
    let ys: Vec<f64> = table.iter().map(|b| (b.count as f64).log2()).collect();
    DimensionReport {
        target,
        table,
        slope: Some(linear_fit(&xs, &ys).0),
        refused: None,
    }
}
