//! Command-line front end.
//!
//! Exit codes: 0 success, 1 bad input or usage, 2 internal self-check
//! failure, 3 model does not capture the series.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lhasynth::automaton::{
    closest_execution, synthesize, validate_execution, AutomatonError, SynthesisOptions,
    SynthesisResult, SELF_CHECK_TOL,
};
use lhasynth::datagen::{simulate, simulate_lha, thermostat_family, DatagenError, SamplingSpec};
use lhasynth::model_io::{read_model, write_model};
use lhasynth::segmentation::SegmentationConfig;
use lhasynth::timeseries::{parse_time_series, write_csv, TimeSeries};

#[derive(Parser)]
#[command(
    name = "lhasynth",
    version,
    about = "Fit linear hybrid automata with constant flows to sampled trajectories"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit an automaton and the smallest tube radius to CSV series.
    Synthesize(SynthesizeArgs),
    /// Check that a model tracks a series within a given radius.
    Verify(VerifyArgs),
    /// Produce benchmark series from built-in hybrid models.
    Generate {
        #[command(subcommand)]
        family: Family,
    },
    /// Play back a model document as a random sampled trajectory.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct SynthesizeArgs {
    /// Input CSV files (header t,x1,...,xn), one or more series each.
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    /// Number of locations; chosen automatically when omitted.
    #[arg(long)]
    locations: Option<usize>,
    /// Relative-improvement threshold for the automatic location count.
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Normalized tolerance of the simplification pass.
    #[arg(long, default_value_t = 0.01)]
    rdp_tol: f64,
    /// Cluster the raw piece slopes without simplifying first.
    #[arg(long)]
    no_simplify: bool,
    /// Write the model document (JSON) here.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Write the run report (JSON) here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write per-series plot data (CSV) here; with several series the
    /// series index is appended to the file stem.
    #[arg(long)]
    plot_data: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Model document to check against.
    #[arg(long)]
    model: PathBuf,
    /// CSV file with the series to capture.
    #[arg(long)]
    input: PathBuf,
    /// Tube radius to check; defaults to the model's stored value.
    #[arg(long, allow_negative_numbers = true)]
    epsilon: Option<f64>,
}

#[derive(Subcommand)]
enum Family {
    /// Independent on/off heater components, one per dimension.
    Thermostat(ThermostatArgs),
}

#[derive(Args)]
struct ThermostatArgs {
    /// State dimension (number of independent components).
    #[arg(long)]
    n: usize,
    /// Number of series to produce.
    #[arg(long)]
    r: usize,
    /// Samples per series.
    #[arg(long)]
    p: usize,
    /// Duration of each series.
    #[arg(long = "T", default_value_t = 40.0)]
    duration: f64,
    /// Base RNG seed; series i uses seed + i.
    #[arg(long)]
    seed: u64,
    /// Directory for the CSV files, created if missing.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Model document to play back.
    #[arg(long)]
    model: PathBuf,
    /// Duration of the trajectory.
    #[arg(long)]
    duration: f64,
    /// RNG seed.
    #[arg(long)]
    seed: u64,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, e: impl std::fmt::Display) -> Failure {
    Failure {
        code,
        message: e.to_string(),
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    fail(1, e)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Synthesize(args) => cmd_synthesize(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Generate { family } => match family {
            Family::Thermostat(args) => cmd_generate_thermostat(args),
        },
        Command::Simulate(args) => cmd_simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read_inputs(paths: &[PathBuf]) -> Result<Vec<TimeSeries>, Failure> {
    let mut series = Vec::new();
    for path in paths {
        series.extend(parse_time_series(path).map_err(usage)?);
    }
    Ok(series)
}

fn cmd_synthesize(args: SynthesizeArgs) -> Result<(), Failure> {
    if args.locations == Some(0) {
        return Err(usage("--locations must be at least 1"));
    }
    if !args.theta.is_finite() || !(0.0..=1.0).contains(&args.theta) {
        return Err(usage("--theta must lie in [0, 1]"));
    }
    if !args.rdp_tol.is_finite() || args.rdp_tol < 0.0 {
        return Err(usage("--rdp-tol must be nonnegative"));
    }
    let series = read_inputs(&args.input)?;
    let options = SynthesisOptions {
        num_locations: args.locations,
        segmentation: SegmentationConfig {
            simplify: !args.no_simplify,
            rdp_tol: args.rdp_tol,
            theta: args.theta,
            ..SegmentationConfig::default()
        },
        merge_dwells: false,
    };
    let result = synthesize(&series, &options).map_err(|e| {
        let code = match &e {
            AutomatonError::SelfCheck { .. } => 2,
            _ => 1,
        };
        fail(code, e)
    })?;

    let report = &result.report;
    println!(
        "series: {}, dimension: {}",
        report.num_series, report.dim
    );
    if let Some(table) = &report.cost_table {
        println!("location count selection:");
        for row in table {
            let improvement = row
                .rel_improvement
                .map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
            println!("  k={} cost={:.4} improvement={}", row.k, row.cost, improvement);
        }
    }
    println!("locations: {}", report.num_locations);
    println!("epsilon: {}", result.epsilon);
    for (l, flow) in result.lha.structure.locations.iter().zip(&report.slopes) {
        println!("flow {}: {:?}", l + 1, flow);
    }
    let t = &report.timings;
    println!(
        "timings (ms): segmentation={:.1} polyhedron={:.1} lp={:.1} model={:.1} total={:.1}",
        t.segmentation_ms, t.polyhedron_ms, t.lp_ms, t.model_ms, t.total_ms
    );
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }

    if let Some(path) = &args.model {
        write_model(path, &result.lha, result.epsilon).map_err(usage)?;
        println!("model written to {}", path.display());
    }
    if let Some(path) = &args.report {
        let mut text = serde_json::to_string_pretty(report).map_err(|e| fail(2, e))?;
        text.push('\n');
        std::fs::write(path, text).map_err(usage)?;
        println!("report written to {}", path.display());
    }
    if let Some(path) = &args.plot_data {
        write_plot_data(path, &series, &result)?;
    }
    Ok(())
}

/// One plot file per series: the stamps, the data, the induced execution
/// and the tube `data +- epsilon`, all per coordinate.
fn write_plot_data(
    path: &Path,
    series: &[TimeSeries],
    result: &SynthesisResult,
) -> Result<(), Failure> {
    for (i, (s, exec)) in series.iter().zip(&result.executions).enumerate() {
        let f = exec.projection().map_err(|e| fail(2, e))?;
        let mut out = String::from("t");
        for c in 1..=s.dim() {
            let _ = write!(out, ",x{c}");
        }
        for c in 1..=s.dim() {
            let _ = write!(out, ",exec{c}");
        }
        for c in 1..=s.dim() {
            let _ = write!(out, ",lo{c},hi{c}");
        }
        out.push('\n');
        for (t, p) in s.times().iter().zip(s.points()) {
            let value = f.evaluate(*t).map_err(|e| fail(2, e))?;
            let _ = write!(out, "{t}");
            for v in p {
                let _ = write!(out, ",{v}");
            }
            for v in &value {
                let _ = write!(out, ",{v}");
            }
            for v in p {
                let _ = write!(out, ",{},{}", v - result.epsilon, v + result.epsilon);
            }
            out.push('\n');
        }
        let target = indexed_path(path, i, series.len() > 1);
        std::fs::write(&target, out).map_err(usage)?;
        println!("plot data written to {}", target.display());
    }
    Ok(())
}

fn indexed_path(path: &Path, index: usize, many: bool) -> PathBuf {
    if !many {
        return path.to_path_buf();
    }
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = path
        .extension()
        .map(|e| format!(".{}", e.to_string_lossy()))
        .unwrap_or_default();
    path.with_file_name(format!("{stem}-{index}{ext}"))
}

fn cmd_verify(args: VerifyArgs) -> Result<(), Failure> {
    let (lha, stored) = read_model(&args.model).map_err(usage)?;
    let epsilon = args.epsilon.unwrap_or(stored);
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(usage(format!(
            "--epsilon must be nonnegative and finite, got {epsilon}"
        )));
    }
    let series = parse_time_series(&args.input).map_err(usage)?;
    let mut all_captured = true;
    for s in &series {
        let (deviation, exec) = closest_execution(&lha, s).map_err(|e| match e {
            AutomatonError::MixedDimensions { .. } => usage(e),
            other => fail(2, other),
        })?;
        let captured = deviation <= epsilon + SELF_CHECK_TOL;
        println!(
            "{}: achieved deviation {} at epsilon {}: {}",
            s.id(),
            deviation,
            epsilon,
            if captured { "captured" } else { "not captured" }
        );
        let check = validate_execution(&lha, &exec, SELF_CHECK_TOL).map_err(|e| fail(2, e))?;
        for v in &check.violations {
            eprintln!("warning: best execution violates the model: {v}");
        }
        all_captured &= captured;
    }
    if all_captured {
        Ok(())
    } else {
        Err(fail(3, "the model does not capture every series"))
    }
}

fn cmd_generate_thermostat(args: ThermostatArgs) -> Result<(), Failure> {
    if args.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    if args.r == 0 {
        return Err(usage("--r must be at least 1"));
    }
    if args.p < 2 {
        return Err(usage("--p must be at least 2"));
    }
    if !args.duration.is_finite() || args.duration <= 0.0 {
        return Err(usage("--T must be positive"));
    }
    std::fs::create_dir_all(&args.out_dir).map_err(usage)?;
    let model = thermostat_family(args.n);
    let sampling = SamplingSpec::Uniform { count: args.p };
    let mut total = 0usize;
    for i in 0..args.r {
        let seed = args.seed + i as u64;
        let series = match simulate(&model, args.duration, seed, &sampling) {
            Ok(series) => series,
            Err(DatagenError::Deadlock {
                time,
                partial: Some(partial),
                ..
            }) => {
                eprintln!(
                    "warning: seed {seed} deadlocked at t={time}; writing the partial series"
                );
                partial
            }
            Err(DatagenError::Deadlock { time, .. }) => {
                eprintln!(
                    "warning: seed {seed} deadlocked at t={time} before two samples; skipped"
                );
                continue;
            }
            Err(e) => return Err(fail(2, e)),
        };
        let path = args.out_dir.join(format!("series-{i:03}.csv"));
        total += series.num_samples();
        write_csv(&[series], &path).map_err(usage)?;
        println!("wrote {}", path.display());
    }
    println!("total samples: {total}");
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Failure> {
    if !args.duration.is_finite() || args.duration <= 0.0 {
        return Err(usage("--duration must be positive"));
    }
    let (lha, _) = read_model(&args.model).map_err(usage)?;
    let series = simulate_lha(&lha, args.duration, args.seed).map_err(|e| fail(2, e))?;
    println!(
        "simulated {} samples over [0, {}]",
        series.num_samples(),
        args.duration
    );
    write_csv(&[series], &args.out).map_err(usage)?;
    println!("wrote {}", args.out.display());
    Ok(())
}
