mod common;

use common::read_config;
use fractal_avoid::analysis::verify::parse_patterns;
use fractal_avoid::analysis::{
    cmd_construct, cmd_dimension, cmd_export_plot, cmd_measure, cmd_verify, sha256_hex, DemoSpec, Overrides,
};
use fractal_avoid::builder::{build, BuildConfig, ConstructionTrace};
use fractal_avoid::measure::build_measure;
use fractal_avoid::oracle::Budget;
use fractal_avoid::{CubeSet, Error};

fn reference() -> (String, ConstructionTrace) {
    let text = read_config("reference.json");
    let trace = build(&BuildConfig::from_json(&text).unwrap()).unwrap();
    (text, trace)
}

#[test]
fn verify_accepts_the_reference_build() {
    let (text, trace) = reference();
    let report = cmd_verify(&trace, &parse_patterns(&text).unwrap(), &Budget::default(), 200).unwrap();
    assert!(report.clean);
    assert!(!report.avoidance.exhaustive);
    assert_eq!(report.dual_agreement, None);
    assert_eq!(report.levels.len(), trace.levels.len());
    for l in &report.levels {
        assert_eq!(l.r_exp, l.r_recomputed);
        assert!(l.properties.all_pass());
    }
}

#[test]
fn verify_pinpoints_an_injected_cube() {
    let (text, mut trace) = reference();
    let last = trace.levels.len() - 1;
    let x = &trace.levels[last];
    // the origin cube sits on the axis plane, so it pairs with every other cube
    let mut data = x.as_flat().to_vec();
    data.push(0);
    trace.levels[last] = CubeSet::from_flat(1, x.scale(), data).unwrap();
    let report = cmd_verify(&trace, &parse_patterns(&text).unwrap(), &Budget::default(), 200).unwrap();
    assert!(!report.clean);
    let verdict = &report.avoidance.levels[last];
    assert_eq!(verdict.k, last + 1);
    assert!(!verdict.nested || verdict.conflict_count > 0);
    let named = verdict
        .stray_cubes
        .iter()
        .chain(&verdict.conflicts)
        .any(|c| c.contains(&0));
    assert!(named, "{verdict:?}");
}

#[test]
fn exhaustive_verify_agrees_with_the_cover_scan() {
    let (_, spec) = DemoSpec::from_json(&read_config("sumset.json"), None, None).unwrap();
    let trace = build(&spec.config).unwrap();
    let report = cmd_verify(&trace, &spec.config.patterns, &Budget::default(), 200).unwrap();
    assert!(report.avoidance.exhaustive);
    assert_eq!(report.dual_agreement, Some(true));
    let m = trace.levels.last().unwrap().len() as u64;
    assert_eq!(report.avoidance.tuples_tested, m * (m - 1));
    assert!(report.clean);
}

#[test]
fn export_has_one_row_per_scale_and_rejects_mismatches() {
    let (_, trace) = reference();
    let (measure, report) = cmd_measure(&trace, 0.05).unwrap();
    let bundle = cmd_export_plot(&trace, &measure, 0.05).unwrap();
    let scales = measure.finest().exponent() as usize + 1;
    assert_eq!(report.rows.len(), scales);
    for csv in [&bundle.counts, &bundle.max_mass, &bundle.frostman] {
        assert_eq!(csv.lines().count(), scales + 1);
    }
    assert_eq!(cmd_export_plot(&trace, &measure, 0.05).unwrap(), bundle);

    let mut short = measure.clone();
    short.levels.pop();
    assert!(matches!(
        cmd_export_plot(&trace, &short, 0.05),
        Err(Error::Integrity(_))
    ));

    let mut altered = measure.clone();
    let lvl = altered.levels.last_mut().unwrap();
    let mut data = lvl.cubes.as_flat().to_vec();
    data.pop();
    lvl.cubes = CubeSet::from_flat(1, lvl.cubes.scale(), data).unwrap();
    lvl.masses.pop();
    assert!(matches!(
        cmd_export_plot(&trace, &altered, 0.05),
        Err(Error::Integrity(_))
    ));
}

#[test]
fn dimension_refuses_a_single_level() {
    let (_, mut trace) = reference();
    trace.levels.truncate(1);
    trace.schedule.truncate(1);
    trace.certificates.truncate(1);
    let report = cmd_dimension(&trace);
    assert_eq!(report.slope, None);
    assert!(report.refused.is_some());
    assert_eq!(report.table.len(), 3);
    assert!(build_measure(&trace).unwrap().check_conservation());
}

#[test]
fn overrides_fill_gaps_but_only_the_seed_replaces() {
    let text = read_config("reference.json");
    let o = Overrides {
        seed: Some(9),
        levels: Some(5),
        max_k: Some(12),
    };
    let c = o.apply(&text).unwrap();
    assert_eq!(c.seed, 9);
    assert_eq!(c.levels, 2);
    assert_eq!(c.max_scale_exponent, 40);

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let obj = v.as_object_mut().unwrap();
    obj.remove("levels");
    obj.remove("max_scale_exponent");
    let c = o.apply(&v.to_string()).unwrap();
    assert_eq!((c.levels, c.max_scale_exponent), (5, 12));

    assert!(matches!(o.apply("[1, 2]"), Err(Error::InvalidConfig(_))));
    assert!(matches!(o.apply("{"), Err(Error::InvalidConfig(_))));
}

#[test]
fn construct_manifest_hashes_the_written_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmd_construct(&read_config("reference.json"), &Overrides::default(), dir.path()).unwrap();
    assert!(out.success());
    assert_eq!(out.manifest.outputs.len(), 3);
    for entry in &out.manifest.outputs {
        let bytes = std::fs::read(dir.path().join(&entry.name)).unwrap();
        assert_eq!(entry.bytes, bytes.len() as u64);
        assert_eq!(entry.sha256, sha256_hex(&bytes));
    }
    let written: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(written["seed"], serde_json::json!(42));
    let trace = ConstructionTrace::from_json(&std::fs::read_to_string(dir.path().join("trace.json")).unwrap()).unwrap();
    assert_eq!(trace, out.trace);
}
