use std::path::Path;

use serde_json::Value;

use super::manifest::RunManifest;
use crate::builder::{build, BuildConfig, ConstructionTrace};
use crate::error::{Error, Result};
use crate::measure::{build_measure, frostman_scan, FrostmanReport, MeasureTree};

/// Command-line values layered onto a config. Only the seed replaces a value the config sets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub levels: Option<usize>,
    pub max_k: Option<u32>,
}

impl Overrides {
    pub fn apply(&self, config_text: &str) -> Result<BuildConfig> {
        let mut v: Value = serde_json::from_str(config_text)
            .map_err(|e| Error::InvalidConfig(format!("config is not valid JSON: {e}")))?;
        let obj = v
            .as_object_mut()
            .ok_or_else(|| Error::InvalidConfig("config must be a JSON object".into()))?;
        if let Some(s) = self.seed {
            obj.insert("seed".into(), s.into());
        }
        if let Some(l) = self.levels {
            obj.entry("levels").or_insert(l.into());
        }
        if let Some(k) = self.max_k {
            obj.entry("max_scale_exponent").or_insert(k.into());
        }
        BuildConfig::from_json(&v.to_string())
    }
}

#[derive(Debug)]
pub struct ConstructOutput {
    pub trace: ConstructionTrace,
    /// Absent when no level was built.
    pub measure: Option<MeasureTree>,
    pub manifest: RunManifest,
}

impl ConstructOutput {
    /// The requested levels were all built and certified.
    pub fn success(&self) -> bool {
        self.trace.stopped.is_none() && self.trace.all_certified()
    }
}

/// Builds, measures and writes `trace.json`, `certificates.json`, `measure.json` and `manifest.json`.
pub fn cmd_construct(config_text: &str, overrides: &Overrides, out: &Path) -> Result<ConstructOutput> {
    let config = overrides.apply(config_text)?;
    let canonical = serde_json::to_vec(&config)?;
    let mut manifest = RunManifest::new("construct", &canonical, config.seed);
    let trace = manifest.time("build", || build(&config))?;
    let measure = if trace.levels.is_empty() {
        None
    } else {
        Some(manifest.time("measure", || build_measure(&trace))?)
    };
    std::fs::create_dir_all(out)?;
    manifest.write_output(out, "trace.json", trace.to_json()?.as_bytes())?;
    manifest.write_output(
        out,
        "certificates.json",
        &serde_json::to_vec_pretty(&trace.certificates)?,
    )?;
    if let Some(m) = &measure {
        manifest.write_output(out, "measure.json", m.to_json()?.as_bytes())?;
    }
    manifest.write(out)?;
    Ok(ConstructOutput {
        trace,
        measure,
        manifest,
    })
}

/// Rebuilds the measure of a trace and scans it at `epsilon`.
pub fn cmd_measure(trace: &ConstructionTrace, epsilon: f64) -> Result<(MeasureTree, FrostmanReport)> {
    let m = build_measure(trace)?;
    if !m.check_conservation() {
        return Err(Error::Integrity("measure fails exact conservation".into()));
    }
    let r = frostman_scan(&m, trace, epsilon)?;
    Ok((m, r))
}
