use std::path::Path;

use crate::builder::ConstructionTrace;
use crate::error::{Error, Result};
use crate::measure::{frostman_scan, MeasureTree};

/// CSV series for plotting, one row per scanned scale.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlotBundle {
    pub counts: String,
    pub max_mass: String,
    pub frostman: String,
}

impl PlotBundle {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("counts.csv"), &self.counts)?;
        std::fs::write(dir.join("max_mass.csv"), &self.max_mass)?;
        std::fs::write(dir.join("frostman.csv"), &self.frostman)?;
        Ok(())
    }
}

fn check_alignment(trace: &ConstructionTrace, measure: &MeasureTree) -> Result<()> {
    if measure.levels.len() != trace.levels.len() + 1 {
        return Err(Error::Integrity(format!(
            "measure has {} levels, trace has {} plus the root",
            measure.levels.len(),
            trace.levels.len()
        )));
    }
    for (k, (m, x)) in measure.levels.iter().skip(1).zip(&trace.levels).enumerate() {
        if m.cubes.is_empty() {
            return Err(Error::Integrity(format!("measure level {} is empty", k + 1)));
        }
        if &m.cubes != x {
            return Err(Error::Integrity(format!(
                "measure level {} does not match the trace",
                k + 1
            )));
        }
    }
    Ok(())
}

pub fn cmd_export_plot(trace: &ConstructionTrace, measure: &MeasureTree, epsilon: f64) -> Result<PlotBundle> {
    check_alignment(trace, measure)?;
    let report = frostman_scan(measure, trace, epsilon)?;
    let mut counts = String::from("exponent,count\n");
    let mut max_mass = String::from("exponent,max_mass,log2_max_mass\n");
    let mut frostman = String::from("exponent,ratio,case\n");
    for r in &report.rows {
        counts.push_str(&format!("{},{}\n", r.exponent, r.support_count));
        max_mass.push_str(&format!("{},{},{:.12}\n", r.exponent, r.max_mass, r.log2_max_mass));
        frostman.push_str(&format!("{},{:.12e},{}\n", r.exponent, r.ratio, r.case.label()));
    }
    Ok(PlotBundle {
        counts,
        max_mass,
        frostman,
    })
}
