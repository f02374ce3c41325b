//! End-to-end commands: construction, verification, measures, dimension estimates and demos.

pub mod brute;
pub mod demo;
pub mod dimension;
pub mod export;
pub mod manifest;
pub mod pipeline;
pub mod verify;

pub use demo::{
    cmd_demo_calibration, cmd_demo_isosceles, cmd_demo_sumset, CalibrationReport, DemoKind, DemoSpec, IsoscelesReport,
    SumsetReport,
};
pub use dimension::{cmd_dimension, BoxCount, DimensionReport};
pub use export::{cmd_export_plot, PlotBundle};
pub use manifest::{sha256_hex, OutputEntry, RunManifest};
pub use pipeline::{cmd_construct, cmd_measure, ConstructOutput, Overrides};
pub use verify::{cmd_verify, VerifyReport};
