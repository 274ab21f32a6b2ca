//! `pvl` — solve, optimize, evaluate values and verify the differentiability
//! experiments from one configuration file.
//!
//! Exit codes: 0 success, 1 failed verdicts, 2 usage/configuration errors,
//! 3 solver failures.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use pvl_core::error::Error as CoreError;
use pvl_core::field::SpatialField;
use pvl_core::io::{self, FieldFormat, ParsedConfig, RunManifest};
use pvl_core::optim::{minimize, oracle_enumerate, value, BlockPartition, OptimizeReport};
use pvl_core::pde::{solve_state, SolveOptions};
use pvl_core::verify::{self, progress, ExperimentConfig, ExperimentId, SuiteReport};

#[derive(Parser)]
#[command(name = "pvl", version, about = "Parabolic value laboratory")]
struct Cli {
    /// Worker threads for sample-parallel work (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory; falls back to $PVL_OUT, then ./pvl-out.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override every configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the forward state solver for a given control.
    Solve(SolveArgs),
    /// Minimize the tracking objective over the admissible box.
    Optimize(CommonArgs),
    /// Evaluate the value function v(tau, eta).
    Value(ValueArgs),
    /// Run verification experiments and write tables plus verdicts.
    Verify(VerifyArgs),
    /// Exhaustive bang-bang enumeration on a coarse control partition.
    Oracle(OracleArgs),
    /// Re-render verdicts from a stored run without any solves.
    Report(ReportArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Control field file (csv or binary); zero control when absent.
    #[arg(long)]
    control: Option<PathBuf>,
    /// Output format for the state field.
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
struct ValueArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Initial time index (0..=nt).
    #[arg(long)]
    tau: usize,
    /// Initial datum: a field file path or an expression in x (and y).
    #[arg(long)]
    eta: String,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated experiment ids (E1..E10); default from config.
    #[arg(long, value_delimiter = ',')]
    experiments: Vec<String>,
    /// Emit one JSON progress line per completed sample.
    #[arg(long)]
    progress: Option<String>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Partition as TIMExSPACE block counts, e.g. 2x2.
    #[arg(long)]
    blocks: String,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory produced by `pvl verify`.
    #[arg(long = "in")]
    input: PathBuf,
}

/// Print a line, tolerating a closed stdout (e.g. piped into `head`).
fn out_line(args: std::fmt::Arguments) {
    use std::io::Write;
    let _ = std::io::stdout().write_fmt(args);
    let _ = std::io::stdout().write_all(b"\n");
}

macro_rules! say {
    ($($t:tt)*) => { out_line(format_args!($($t)*)) };
}

fn main() {
    let cli = Cli::parse();
    let code = dispatch(cli);
    std::process::exit(code);
}

fn exit_code_for(err: &CoreError) -> i32 {
    match err {
        CoreError::SolverFailure { .. } | CoreError::ModelViolation(_) => 3,
        _ => 2,
    }
}

fn classify(err: &CoreError) -> &'static str {
    match err {
        CoreError::SolverFailure { .. } | CoreError::ModelViolation(_) => "solver",
        CoreError::Parse { .. } | CoreError::Validation { .. } | CoreError::InvalidArgument(_) => {
            "config"
        }
        CoreError::Io(_) | CoreError::Format(_) => "io",
        CoreError::GridMismatch(_) => "config",
    }
}

fn dispatch(cli: Cli) -> i32 {
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error[usage]: cannot build worker pool: {e}");
            return 2;
        }
    };
    let out_dir = cli
        .out
        .clone()
        .or_else(|| std::env::var_os("PVL_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("pvl-out"));
    let seed = cli.seed;
    let result = pool.install(|| match cli.command {
        Command::Solve(args) => cmd_solve(args, &out_dir),
        Command::Optimize(args) => cmd_optimize(args, &out_dir, seed),
        Command::Value(args) => cmd_value(args, &out_dir, seed),
        Command::Verify(args) => cmd_verify(args, &out_dir, seed),
        Command::Oracle(args) => cmd_oracle(args, &out_dir),
        Command::Report(args) => cmd_report(args),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error[{}]: {e}", classify(&e));
            exit_code_for(&e)
        }
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ParsedConfig, CoreError> {
    let mut parsed = io::parse_config(path)?;
    if let Some(s) = seed {
        parsed.optimize.seed = s;
        parsed.verify.seed = s;
    }
    Ok(parsed)
}

#[derive(Serialize)]
struct OptimizeSummary {
    j: f64,
    gap: f64,
    gap_tol: f64,
    converged: bool,
    iterations: usize,
    active_fraction: f64,
    starts: Vec<f64>,
    gap_history: Vec<f64>,
    seed: u64,
    method: pvl_core::optim::Method,
}

impl From<&OptimizeReport> for OptimizeSummary {
    fn from(r: &OptimizeReport) -> Self {
        OptimizeSummary {
            j: r.j,
            gap: r.gap,
            gap_tol: r.gap_tol,
            converged: r.converged,
            iterations: r.iterations,
            active_fraction: r.active_fraction,
            starts: r.starts.clone(),
            gap_history: r.gap_history.clone(),
            seed: r.seed,
            method: r.method,
        }
    }
}

fn cmd_solve(args: SolveArgs, out: &Path) -> Result<i32, CoreError> {
    let parsed = load_config(&args.common.config, None)?;
    let spec = &parsed.spec;
    let control = match &args.control {
        Some(path) => io::load_field_on(path, &spec.grid)?,
        None => pvl_core::field::Field::zeros(spec.grid),
    };
    let sol = solve_state(spec, &control, &spec.y0.clone(), &SolveOptions::default())?;
    std::fs::create_dir_all(out)?;
    let mut manifest = RunManifest::begin(&parsed.config_hash, parsed.optimize.seed);
    let (name, format) = match args.format.as_str() {
        "binary" => ("state.pvlf", FieldFormat::Binary),
        _ => ("state.csv", FieldFormat::Csv),
    };
    io::save_field(&sol.y, &out.join(name), format)?;
    manifest.record(name);
    std::fs::write(out.join("trace.csv"), sol.trace_csv())?;
    manifest.record("trace.csv");
    manifest.finish(out)?;
    say!("state written to {}", out.join(name).display());
    Ok(0)
}

fn write_report_fields(
    report: &OptimizeReport,
    out: &Path,
    manifest: &mut RunManifest,
) -> Result<(), CoreError> {
    for (name, field) in [
        ("ubar.pvlf", &report.ubar),
        ("ybar.pvlf", &report.ybar),
        ("pbar.pvlf", &report.pbar),
    ] {
        io::save_field(field, &out.join(name), FieldFormat::Binary)?;
        manifest.record(name);
    }
    Ok(())
}

fn cmd_optimize(args: CommonArgs, out: &Path, seed: Option<u64>) -> Result<i32, CoreError> {
    let parsed = load_config(&args.config, seed)?;
    let report = minimize(&parsed.spec, &parsed.spec.y0.clone(), &parsed.optimize)?;
    std::fs::create_dir_all(out)?;
    let mut manifest = RunManifest::begin(&parsed.config_hash, report.seed);
    let summary =
        serde_json::to_string_pretty(&OptimizeSummary::from(&report)).expect("summary serializes");
    std::fs::write(out.join("optimize_report.json"), summary)?;
    manifest.record("optimize_report.json");
    write_report_fields(&report, out, &mut manifest)?;
    manifest.finish(out)?;
    if !report.converged {
        eprintln!(
            "warning: gap {:.3e} did not reach {:.3e} within {} iterations",
            report.gap, report.gap_tol, report.iterations
        );
    }
    say!(
        "J = {:.12e}, gap = {:.3e}, converged = {}",
        report.j,
        report.gap,
        report.converged
    );
    Ok(0)
}

fn cmd_value(args: ValueArgs, out: &Path, seed: Option<u64>) -> Result<i32, CoreError> {
    let parsed = load_config(&args.common.config, seed)?;
    let spec = &parsed.spec;
    let eta = eta_field(&args.eta, spec)?;
    let sample = value(spec, args.tau, &eta, &parsed.optimize)?;
    std::fs::create_dir_all(out)?;
    let mut manifest = RunManifest::begin(&parsed.config_hash, parsed.optimize.seed);
    #[derive(Serialize)]
    struct ValueOut {
        tau_index: usize,
        v: f64,
        report: Option<OptimizeSummary>,
    }
    let payload = ValueOut {
        tau_index: sample.tau_index,
        v: sample.v,
        report: sample.report.as_ref().map(OptimizeSummary::from),
    };
    std::fs::write(
        out.join("value_sample.json"),
        serde_json::to_string_pretty(&payload).expect("value serializes"),
    )?;
    manifest.record("value_sample.json");
    if let Some(rep) = &sample.report {
        write_report_fields(rep, out, &mut manifest)?;
    }
    manifest.finish(out)?;
    say!("v(tau index {}) = {:.12e}", sample.tau_index, sample.v);
    Ok(0)
}

fn eta_field(src: &str, spec: &pvl_core::ProblemSpec) -> Result<SpatialField, CoreError> {
    let path = Path::new(src);
    if path.exists() {
        return io::load_spatial_field_on(path, &spec.grid);
    }
    let expr = io::expr::Expr::parse(src, &[io::expr::Var::X, io::expr::Var::Y])?;
    SpatialField::from_fn(spec.grid, |x, y| expr.eval(0.0, x, y))
}

fn cmd_verify(args: VerifyArgs, out: &Path, seed: Option<u64>) -> Result<i32, CoreError> {
    let parsed = load_config(&args.common.config, seed)?;
    let ids: Vec<ExperimentId> = if args.experiments.is_empty() {
        parsed.experiments.clone()
    } else {
        args.experiments
            .iter()
            .map(|s| ExperimentId::parse(s))
            .collect::<Result<_, _>>()?
    };
    if matches!(args.progress.as_deref(), Some("json")) {
        progress::set_sink(Some(Arc::new(|name: &str, sample: u64| {
            if sample == u64::MAX {
                say!("{{\"experiment\":\"{name}\",\"completed\":true}}");
            } else {
                say!("{{\"experiment\":\"{name}\",\"sample\":{sample}}}");
            }
        })));
    }

    let mut reports = Vec::new();
    for id in &ids {
        let mut cfg = ExperimentConfig::new(*id, parsed.spec.clone());
        cfg.seed = parsed.verify.seed;
        cfg.sample_count = parsed.verify.sample_count;
        if let Some(scales) = &parsed.verify.scales {
            cfg.perturbation_scales = scales.clone();
        }
        cfg.optimize = parsed.optimize.clone();
        let rep = verify::run_experiment(&cfg)?;
        say!("{}", verify::summary_line(&rep));
        reports.push(rep);
    }
    progress::set_sink(None);

    let suite = SuiteReport { reports };
    let mut manifest = RunManifest::begin(&parsed.config_hash, parsed.verify.seed);
    for name in verify::write_outputs(&suite, out)? {
        manifest.record(name);
    }
    manifest.finish(out)?;
    Ok(if suite.all_pass() { 0 } else { 1 })
}

fn cmd_oracle(args: OracleArgs, out: &Path) -> Result<i32, CoreError> {
    let parsed = load_config(&args.common.config, None)?;
    let blocks = parse_blocks(&args.blocks)?;
    let (control, j) = oracle_enumerate(&parsed.spec, &parsed.spec.y0.clone(), &blocks)?;
    std::fs::create_dir_all(out)?;
    let mut manifest = RunManifest::begin(&parsed.config_hash, 0);
    io::save_field(
        &control,
        &out.join("oracle_control.pvlf"),
        FieldFormat::Binary,
    )?;
    manifest.record("oracle_control.pvlf");
    std::fs::write(
        out.join("oracle.json"),
        format!(
            "{{\n  \"blocks\": \"{}\",\n  \"best_j\": {j:e}\n}}\n",
            args.blocks
        ),
    )?;
    manifest.record("oracle.json");
    manifest.finish(out)?;
    say!(
        "bang-bang minimum over {} blocks: J = {j:.12e}",
        blocks.count()
    );
    Ok(0)
}

fn parse_blocks(s: &str) -> Result<BlockPartition, CoreError> {
    let (t, x) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| CoreError::invalid(format!("blocks must look like 2x2, got `{s}`")))?;
    let time_blocks = t
        .trim()
        .parse()
        .map_err(|_| CoreError::invalid(format!("bad time block count `{t}`")))?;
    let space_blocks = x
        .trim()
        .parse()
        .map_err(|_| CoreError::invalid(format!("bad space block count `{x}`")))?;
    Ok(BlockPartition {
        time_blocks,
        space_blocks,
    })
}

fn cmd_report(args: ReportArgs) -> Result<i32, CoreError> {
    let stored = verify::load_suite(&args.input)?;
    let mut all_pass = true;
    for rep in &stored.reports {
        let fresh = verify::recompute_report(rep)?;
        if fresh.verdict != rep.verdict {
            eprintln!(
                "warning: stored verdict for {} disagrees with recomputation",
                rep.experiment_id
            );
        }
        say!("{}", verify::summary_line(&fresh));
        all_pass &= fresh.verdict;
    }
    Ok(if all_pass { 0 } else { 1 })
}
