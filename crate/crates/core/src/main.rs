use clap::{Args, Parser, Subcommand};
use sctrack::harness::{emit_csv, parse_config, run_experiment, run_on_scenarios, scenario_for_run, RunConfig};
use sctrack::oracle::calibrate::{calibrate, BATTERY_SIZE};
use sctrack::scenario::{frames_from_csv, frames_to_csv, truth_from_csv, truth_to_csv};
use sctrack::{Error, Result};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "sctrack", version, about = "Sensor-state estimation with single-cluster multi-object filters")]
#[command(args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment grid and write rmse.csv, card.csv and runtime.csv.
    Run(RunArgs),
    /// Simulate one run's ground truth and measurements and write them as CSV.
    Simulate {
        #[command(flatten)]
        args: RunArgs,
        /// Monte Carlo run index whose scenario is exported.
        #[arg(long, default_value_t = 0)]
        run_index: usize,
    },
    /// Compare candidate update conventions against the enumeration oracle.
    OracleCalibrate {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long, default_value_t = BATTERY_SIZE)]
        instances: usize,
    },
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// e1, e2-death or e2-birth.
    #[arg(long)]
    experiment: Option<String>,
    /// phd, sophd, cphd, all, or a comma-separated list.
    #[arg(long)]
    filter: Option<String>,
    /// l1, l2 or both.
    #[arg(long)]
    likelihood: Option<String>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat `key = value` file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Imported truth CSV (requires --frames); every run reuses it.
    #[arg(long, requires = "frames")]
    truth: Option<PathBuf>,
    /// Imported frames CSV (requires --truth).
    #[arg(long, requires = "truth")]
    frames: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut pairs = match &self.config {
            Some(p) => parse_config(&read(p)?)?,
            None => Vec::new(),
        };
        let mut flag = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                pairs.push((k.to_string(), v));
            }
        };
        flag("experiment", self.experiment.clone());
        flag("filter", self.filter.clone());
        flag("likelihood", self.likelihood.clone());
        flag("runs", self.runs.map(|v| v.to_string()));
        flag("particles", self.particles.map(|v| v.to_string()));
        flag("steps", self.steps.map(|v| v.to_string()));
        flag("seed", self.seed.map(|v| v.to_string()));
        flag("out", self.out.as_ref().map(|p| p.display().to_string()));
        RunConfig::from_pairs(&pairs)
    }
}

fn read(p: &Path) -> Result<String> {
    std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn run(args: &RunArgs) -> Result<()> {
    let cfg = args.config()?;
    let table = match (&args.truth, &args.frames) {
        (Some(t), Some(f)) => {
            cfg.validate()?;
            let truth = truth_from_csv(&read(t)?)?;
            let frames = frames_from_csv(&read(f)?, truth.steps())?;
            let scenarios = vec![(truth, frames); cfg.runs];
            run_on_scenarios(&cfg, &scenarios)?
        }
        _ => run_experiment(&cfg)?,
    };
    let dir = out_dir(&cfg);
    emit_csv(&table, &dir)?;
    for v in &table.variants {
        let mean = v.rmse.iter().sum::<f64>() / v.rmse.len().max(1) as f64;
        eprintln!(
            "{:<10} mean rmse {:>9.4}  flagged {}  resamples {}  clamps {}  failures {}",
            v.name, mean, v.flagged, v.diagnostics.resamples, v.diagnostics.variance_clamps, v.diagnostics.particle_failures
        );
    }
    println!("{}", dir.display());
    Ok(())
}

fn simulate(args: &RunArgs, run_index: usize) -> Result<()> {
    let cfg = args.config()?;
    cfg.validate()?;
    let (truth, frames) = scenario_for_run(&cfg, run_index)?;
    let dir = out_dir(&cfg);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("truth.csv"), truth_to_csv(&truth))?;
    std::fs::write(dir.join("frames.csv"), frames_to_csv(&frames))?;
    println!("{}", dir.display());
    Ok(())
}

fn oracle_calibrate(seed: u64, instances: usize) -> Result<()> {
    let report = calibrate(seed, instances)?;
    match std::io::stdout().write_all(report.to_string().as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            println!("error\tusage\t{}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        None => run(&cli.run),
        Some(Command::Run(args)) => run(args),
        Some(Command::Simulate { args, run_index }) => simulate(args, *run_index),
        Some(Command::OracleCalibrate { seed, instances }) => oracle_calibrate(*seed, *instances),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            println!("error\t{}\t{}", e.kind(), e.to_string().replace(['\n', '\t'], " "));
            ExitCode::FAILURE
        }
    }
}
