use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fractal_avoid::analysis::{
    self, cmd_construct, cmd_demo_calibration, cmd_demo_isosceles, cmd_demo_sumset, cmd_dimension, cmd_export_plot,
    cmd_measure, cmd_verify, DemoKind, DemoSpec, Overrides,
};
use fractal_avoid::builder::{ConstructionTrace, StopKind};
use fractal_avoid::measure::MeasureTree;
use fractal_avoid::oracle::{minkowski_estimate, Budget, PatternSpec};
use fractal_avoid::{DyadicScale, Error};
use serde::Serialize;

const EXIT_VERIFY: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_HYPOTHESIS: u8 = 3;
const EXIT_SCALE_BUDGET: u8 = 4;
const EXIT_RESAMPLE: u8 = 5;
const EXIT_OTHER: u8 = 6;

#[derive(Parser)]
#[command(
    name = "fractal-avoid",
    version,
    about = "Build and audit sets avoiding rough patterns"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the nested sets, their measure and certificates.
    Construct {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of levels, used when the config sets none.
        #[arg(long)]
        levels: Option<usize>,
        /// Finest scale exponent, used when the config sets none.
        #[arg(long = "max-k")]
        max_k: Option<u32>,
    },
    /// Re-check a trace against its patterns.
    Verify {
        #[arg(long)]
        trace: PathBuf,
        /// Config or pattern list.
        #[arg(long)]
        config: PathBuf,
        /// Enumerate all distinct tuples when the final level has at most this many cubes.
        #[arg(long = "verify-exhaustive-limit", default_value_t = 200)]
        exhaustive_limit: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Box counts and slope fit.
    Dimension {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild the measure and run the scale-by-scale mass scan.
    Measure {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
    },
    /// Run one of the application demos.
    Demo {
        #[arg(long)]
        demo: Option<DemoKind>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write CSV series for plotting.
    ExportPlot {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
    },
    /// Box-counting estimate of a pattern's dimension.
    Estimate {
        /// A single pattern definition.
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "min-k", default_value_t = 2)]
        min_k: u32,
        #[arg(long = "max-k", default_value_t = 8)]
        max_k: u32,
    },
}

/// Failure with a specific exit code.
struct Fail(u8, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(exit_code(&e), e.to_string())
    }
}

fn stop_code(kind: &StopKind) -> u8 {
    match kind {
        StopKind::ScaleBudgetExhausted => EXIT_SCALE_BUDGET,
        StopKind::Hypothesis => EXIT_HYPOTHESIS,
        StopKind::ResampleFailed => EXIT_RESAMPLE,
        StopKind::ResourceBudget | StopKind::Other => EXIT_OTHER,
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) | Error::Json(_) => EXIT_CONFIG,
        Error::Hypothesis { .. } => EXIT_HYPOTHESIS,
        Error::ScaleBudgetExhausted { .. } | Error::ScaleOverflow(_) => EXIT_SCALE_BUDGET,
        Error::ResampleFailed { .. } => EXIT_RESAMPLE,
        Error::Stopped { kind, .. } => stop_code(kind),
        _ => EXIT_OTHER,
    }
}

fn read(path: &Path) -> Result<String, Fail> {
    std::fs::read_to_string(path).map_err(|e| Fail(EXIT_CONFIG, format!("cannot read {}: {e}", path.display())))
}

fn read_trace(path: &Path) -> Result<ConstructionTrace, Fail> {
    Ok(ConstructionTrace::from_json(&read(path)?)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Fail> {
    let s = serde_json::to_string_pretty(value).map_err(Error::from)?;
    std::fs::write(path, s).map_err(Error::from)?;
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Fail> {
    println!("{}", serde_json::to_string_pretty(value).map_err(Error::from)?);
    Ok(())
}

fn verdict(ok: bool, what: &str) -> Result<(), Fail> {
    if ok {
        Ok(())
    } else {
        Err(Fail(EXIT_VERIFY, format!("{what} failed")))
    }
}

fn run(cli: Cli) -> Result<(), Fail> {
    match cli.command {
        Command::Construct {
            config,
            out,
            seed,
            levels,
            max_k,
        } => {
            let text = read(&config)?;
            let res = cmd_construct(&text, &Overrides { seed, levels, max_k }, &out)?;
            let t = &res.trace;
            for (e, x) in t.schedule.iter().zip(&t.levels) {
                println!(
                    "level {}: l = 2^-{}, r = 2^-{}, {} cubes",
                    e.k,
                    e.l_exp,
                    e.r_exp,
                    x.len()
                );
            }
            if let Some(stop) = &t.stopped {
                return Err(Fail(stop_code(&stop.kind), stop.message.clone()));
            }
            verdict(res.success(), "level certification")
        }
        Command::Verify {
            trace,
            config,
            exhaustive_limit,
            out,
        } => {
            let t = read_trace(&trace)?;
            let patterns = analysis::verify::parse_patterns(&read(&config)?)?;
            let report = cmd_verify(&t, &patterns, &Budget::default(), exhaustive_limit)?;
            if let Some(p) = out {
                write_json(&p, &report)?;
            }
            println!(
                "tuples tested: {} ({}), clean: {}",
                report.avoidance.tuples_tested,
                if report.avoidance.exhaustive {
                    "exhaustive"
                } else {
                    "sampled"
                },
                report.clean
            );
            if !report.clean {
                for v in &report.avoidance.levels {
                    for c in v.stray_cubes.iter().chain(&v.conflicts) {
                        eprintln!("level {}: offending cube {:?}", v.k, c);
                    }
                }
                for c in &report.avoidance.tuple_violations {
                    eprintln!("final level: offending tuple {c:?}");
                }
            }
            verdict(report.clean, "verification")
        }
        Command::Dimension { trace, out } => {
            let report = cmd_dimension(&read_trace(&trace)?);
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(Error::from)?;
                write_json(&dir.join("dimension.json"), &report)?;
                std::fs::write(dir.join("dimension.csv"), report.to_csv()).map_err(Error::from)?;
            }
            print!("{}", report.to_csv());
            match (report.slope, &report.refused) {
                (Some(s), _) => println!("slope {s:.4}, target {:.4}", report.target),
                (None, Some(why)) => println!("no slope: {why}"),
                (None, None) => {}
            }
            Ok(())
        }
        Command::Measure { trace, out, epsilon } => {
            let t = read_trace(&trace)?;
            let (m, report) = cmd_measure(&t, epsilon)?;
            std::fs::create_dir_all(&out).map_err(Error::from)?;
            std::fs::write(out.join("measure.json"), m.to_json()?).map_err(Error::from)?;
            std::fs::write(out.join("frostman.csv"), report.to_csv()).map_err(Error::from)?;
            write_json(&out.join("frostman.json"), &report)?;
            println!(
                "observed constant {:.4}, fitted exponent {:.4}, target {:.4}",
                report.constant, report.fitted_exponent, report.beta
            );
            let exact = report
                .levels
                .iter()
                .all(|l| l.parent_share_bound && l.single_child_cells);
            verdict(exact, "per-level mass audit")
        }
        Command::Demo {
            demo,
            config,
            out,
            seed,
        } => {
            let (kind, spec) = DemoSpec::from_json(&read(&config)?, demo, seed)?;
            std::fs::create_dir_all(&out).map_err(Error::from)?;
            let (trace, ok) = match kind {
                DemoKind::Sumset => {
                    let (t, r) = cmd_demo_sumset(&spec)?;
                    write_json(&out.join("report.json"), &r)?;
                    println!(
                        "{} cubes at 2^-{}; pairs x != y: {} checked, {} hits; pairs x = y: {} checked, {} hits",
                        r.cubes,
                        r.final_exponent,
                        r.scan.off_diagonal_checked,
                        r.scan.off_diagonal_hits,
                        r.scan.diagonal_checked,
                        r.scan.diagonal_hits
                    );
                    (t, r.clean)
                }
                DemoKind::Isosceles => {
                    let (t, r) = cmd_demo_isosceles(&spec)?;
                    write_json(&out.join("report.json"), &r)?;
                    std::fs::write(out.join("export.csv"), r.export_csv()).map_err(Error::from)?;
                    for s in &r.scans {
                        println!("covering scan {:?}: leading exponent {:.3}", s.curve.name, s.leading);
                    }
                    println!(
                        "{} cubes at 2^-{}; {} triples, {} violations",
                        r.cubes, r.final_exponent, r.triples.checked, r.triples.violations
                    );
                    (t, r.clean)
                }
                DemoKind::Calibration => {
                    let (t, r) = cmd_demo_calibration(&spec)?;
                    write_json(&out.join("report.json"), &r)?;
                    match r.dimension.slope {
                        Some(s) => println!("slope {s:.4}, target {:.4}", r.dimension.target),
                        None => println!("no slope: {}", r.dimension.refused.clone().unwrap_or_default()),
                    }
                    (t, r.within_tolerance == Some(true))
                }
            };
            std::fs::write(out.join("trace.json"), trace.to_json()?).map_err(Error::from)?;
            verdict(ok, "demo check")
        }
        Command::ExportPlot {
            trace,
            measure,
            out,
            epsilon,
        } => {
            let t = read_trace(&trace)?;
            let m = MeasureTree::from_json(&read(&measure)?)?;
            cmd_export_plot(&t, &m, epsilon)?.write(&out)?;
            Ok(())
        }
        Command::Estimate { config, min_k, max_k } => {
            let spec: PatternSpec = serde_json::from_str(&read(&config)?).map_err(Error::from)?;
            let oracle = spec.build()?;
            let scales = (min_k..=max_k).map(DyadicScale::new).collect::<Result<Vec<_>, _>>()?;
            print_json(&minkowski_estimate(oracle.as_ref(), &scales, &Budget::default())?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
