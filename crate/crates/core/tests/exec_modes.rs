mod common;

use fractal_avoid::builder::{build, BuildConfig};
use fractal_avoid::measure::{build_measure, frostman_scan};
use fractal_avoid::Exec;

// a single test: the execution mode is process-wide
#[test]
fn sequential_and_parallel_runs_coincide() {
    let config = BuildConfig::from_json(&common::read_config("reference.json")).unwrap();
    let mut outputs = Vec::new();
    for mode in [Exec::Sequential, Exec::Parallel] {
        Exec::set_current(mode);
        let trace = build(&config).unwrap();
        let tree = build_measure(&trace).unwrap();
        let report = frostman_scan(&tree, &trace, 0.05).unwrap();
        outputs.push((
            trace.to_json().unwrap(),
            tree.to_json().unwrap(),
            serde_json::to_string(&report).unwrap(),
        ));
    }
    Exec::set_current(Exec::Parallel);
    assert!(outputs[0] == outputs[1]);
}
