//! `wavecatch` command-line tool.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use wavecatch::harness::{campaign_csv, run_campaign, run_trial, trial_jsonl, ControllerKind};
use wavecatch::latency::{bench_csv, run_bench};
use wavecatch::replay::{parse_trace_csv, replay, replay_csv, ReplaySettings};
use wavecatch::{ConfigFile, MotionKind, TargetMotionModel};

const THREADS_ENV: &str = "WAVECATCH_THREADS";

#[derive(Parser)]
#[command(name = "wavecatch", version, about = "Wave-disturbed manipulator interception: simulation, campaigns, replay, benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and write its JSONL log.
    Simulate(SimulateArgs),
    /// Run paired trials under several controllers; write per-trial logs and a summary CSV.
    Campaign(CampaignArgs),
    /// Run the target filter over a recorded pose trace.
    ReplayEskf(ReplayArgs),
    /// Time horizon solves on seeded random instances.
    Bench(BenchArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Scenario config (JSON). Built-in defaults when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key, `block.key=value`; repeatable. A bare block name
    /// with a kind sets it, e.g. `controller=fixed_horizon`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ConfigFile> {
        let text = match &self.config {
            Some(path) => fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?,
            None => ConfigFile::default().to_json_string(),
        };
        let source = self.config.as_deref().map_or("built-in defaults".into(), |p| p.display().to_string());
        ConfigFile::from_json_str_with_overrides(&text, &self.overrides).with_context(|| format!("loading {source}"))
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Trial seed; replaces `scenario.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// JSONL destination; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Exit 0 even when the capture misses.
    #[arg(long)]
    no_fail_on_miss: bool,
}

#[derive(Args)]
struct CampaignArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Trials per controller; replaces `campaign.n_trials`.
    #[arg(long, short)]
    n: Option<usize>,
    /// Comma-separated controllers; replaces `campaign.controllers`.
    #[arg(long, value_delimiter = ',')]
    controllers: Vec<ControllerKind>,
    /// Master seed; replaces `campaign.master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads. Falls back to WAVECATCH_THREADS, then `campaign.threads`.
    #[arg(long)]
    parallel: Option<usize>,
    /// Output directory for `<controller>_<index>.jsonl` and `campaign.csv`.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Cv,
    Ca,
}

#[derive(Args)]
struct ReplayArgs {
    /// Trace CSV with columns t,px,py,pz,qw,qx,qy,qz.
    trace: PathBuf,
    #[arg(long, value_enum, default_value = "cv")]
    model: ModelArg,
    /// Density of the highest modelled derivative; model default when omitted.
    #[arg(long)]
    process_density: Option<f64>,
    #[arg(long, default_value_t = 0.005)]
    position_sigma_m: f64,
    #[arg(long, default_value_t = 0.5)]
    orientation_sigma_deg: f64,
    /// Prediction lead, s.
    #[arg(long, default_value_t = 0.5)]
    lead_s: f64,
    /// Estimate CSV destination; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,5,10,20,40")]
    horizons: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    repeats: usize,
    /// Planning step, s.
    #[arg(long, default_value_t = 0.05)]
    dt: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// CSV destination; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => std::io::stdout().write_all(text.as_bytes()).context("writing stdout"),
    }
}

fn simulate(args: &SimulateArgs) -> Result<ExitCode> {
    let mut scenario = args.config.load()?.to_scenario()?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let record = run_trial(&scenario)?;
    emit(args.out.as_deref(), &trial_jsonl(&record))?;
    let s = &record.summary;
    let line = format!(
        "controller={} seed={} success={} final_phase={:?} time_to_capture_s={} rms_error_m={}",
        record.controller.name(),
        record.seed,
        s.success,
        s.final_phase,
        s.time_to_capture_s.map_or("-".into(), |v| format!("{v:.3}")),
        s.rms_position_error_m.map_or("-".into(), |v| format!("{v:.4}")),
    );
    // keep stdout clean when it carries the log
    if args.out.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
    Ok(if s.success || args.no_fail_on_miss { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => bail!("{THREADS_ENV} must be a positive integer, got `{v}`"),
        },
        Err(_) => Ok(None),
    }
}

fn campaign(args: &CampaignArgs) -> Result<ExitCode> {
    let mut spec = args.config.load()?.to_campaign()?;
    if let Some(n) = args.n {
        spec.n_trials = n;
    }
    if !args.controllers.is_empty() {
        spec.controllers = args.controllers.clone();
    }
    if let Some(seed) = args.seed {
        spec.master_seed = seed;
    }
    if args.parallel == Some(0) {
        bail!("--parallel must be at least 1");
    }
    if let Some(n) = args.parallel.or(threads_from_env()?) {
        spec.threads = Some(n);
    }
    fs::create_dir_all(&args.out).with_context(|| format!("creating output directory {}", args.out.display()))?;
    let out = run_campaign(&spec)?;
    for (controller, index, record) in &out.trials {
        let path = args.out.join(format!("{}_{index:03}.jsonl", controller.name()));
        fs::write(&path, trial_jsonl(record)).with_context(|| format!("writing {}", path.display()))?;
    }
    let csv_path = args.out.join("campaign.csv");
    fs::write(&csv_path, campaign_csv(&out.report)).with_context(|| format!("writing {}", csv_path.display()))?;
    for a in &out.report.controllers {
        println!(
            "{}: {}/{} captured, median rms {} m",
            a.controller.name(),
            a.successes,
            a.n_trials,
            a.median_rms_error_m.map_or("-".into(), |v| format!("{v:.4}"))
        );
    }
    println!("wrote {} trial logs and {}", out.trials.len(), csv_path.display());
    Ok(ExitCode::SUCCESS)
}

fn replay_eskf(args: &ReplayArgs) -> Result<ExitCode> {
    let text = fs::read_to_string(&args.trace).with_context(|| format!("reading trace {}", args.trace.display()))?;
    let samples = parse_trace_csv(&text).with_context(|| format!("parsing {}", args.trace.display()))?;
    let kind = match args.model {
        ModelArg::Cv => MotionKind::ConstantVelocity,
        ModelArg::Ca => MotionKind::ConstantAcceleration,
    };
    let base = TargetMotionModel::default();
    let model = TargetMotionModel { kind, process_density: args.process_density.unwrap_or(base.process_density), ..base };
    let settings = ReplaySettings {
        model,
        position_sigma_m: args.position_sigma_m,
        orientation_sigma_rad: args.orientation_sigma_deg.to_radians(),
        lead_s: args.lead_s,
        ..ReplaySettings::default()
    };
    let rows = replay(&samples, &settings)?;
    emit(args.out.as_deref(), &replay_csv(&rows))?;
    Ok(ExitCode::SUCCESS)
}

fn bench(args: &BenchArgs) -> Result<ExitCode> {
    let rows = run_bench(&args.horizons, args.repeats, args.dt, args.seed)?;
    emit(args.out.as_deref(), &bench_csv(&rows))?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    // exit code 2 is reserved for a capture miss, so usage errors map to 1
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Campaign(a) => campaign(a),
        Command::ReplayEskf(a) => replay_eskf(a),
        Command::Bench(a) => bench(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
