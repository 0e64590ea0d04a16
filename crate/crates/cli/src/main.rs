use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hooptraj::config::RunConfig;
use hooptraj::dataset::{parse_labels_csv, parse_tracking_csv, SliceMode};
use hooptraj::features::FeatureMode;
use hooptraj::metrics::ReportFormat;
use hooptraj::pipeline::{self, ModelKind};
use hooptraj::sanity::{run_sanity, SanityTask};
use hooptraj::ErrorClass;

#[derive(Parser, Debug)]
#[command(name = "hooptraj", version, about = "Three-point shot make/miss classification from ball tracking")]
struct Cli {
    /// Flat `section.key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set rnn.epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// How slice end frames are chosen (overrides data.slice_mode).
    #[arg(long, global = true, value_parser = ["distance", "height"])]
    slice_mode: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate labeled shots into tracking and label CSVs.
    Simulate(SimulateArgs),
    /// Validate external tracking and label CSVs and copy them into a data directory.
    Ingest(IngestArgs),
    /// Extract three-point attempts, join labels, split and export windows.
    Prepare(PrepareArgs),
    /// Train one model per slice distance.
    Train(TrainArgs),
    /// Score checkpoints on the test split and write AUC reports.
    Evaluate(EvaluateArgs),
    /// Train every model/feature combination and report the distance table.
    Sweep(SweepArgs),
    /// Run a sine or digit-addition capability check.
    Sanity(SanityArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Number of shots (overrides sim.shots).
    #[arg(long)]
    n: Option<usize>,
    /// Simulation seed (overrides sim.seed).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "data/raw")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    tracking: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value = "data/raw")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PrepareArgs {
    /// Directory holding tracking.csv and labels.csv.
    #[arg(long, default_value = "data/raw")]
    raw: PathBuf,
    #[arg(long, default_value = "data/prepared")]
    out: PathBuf,
    /// Split seed (overrides run.seed).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long, value_parser = ["enet", "gbm", "rnn"])]
    model: String,
    #[arg(long, default_value = "xyz", value_parser = ["xyz", "full"])]
    features: String,
    #[arg(long, default_value = "data/prepared")]
    data: PathBuf,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Share of the training split to fit on (overrides data.train_fraction).
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Training seed (overrides run.seed).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long = "checkpoint", required = true)]
    checkpoints: Vec<PathBuf>,
    #[arg(long, default_value = "data/prepared")]
    data: PathBuf,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Comma-separated slice distances in feet (overrides data.distances).
    #[arg(long)]
    distances: Option<String>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, default_value = "data/prepared")]
    data: PathBuf,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Skip the sequence model.
    #[arg(long, default_value_t = false)]
    no_rnn: bool,
}

#[derive(Args, Debug)]
struct SanityArgs {
    #[arg(long, value_parser = ["sine", "addition"])]
    task: String,
    /// Optimizer steps (default 2000 for sine, 5000 for addition).
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for o in &cli.overrides {
        let Some((k, v)) = o.split_once('=') else {
            return Err(hooptraj::Error::Config(format!("override {o:?} is not KEY=VALUE")).into());
        };
        cfg.set(k.trim(), v)?;
    }
    if let Some(m) = &cli.slice_mode {
        cfg.data.slice_mode = m.parse::<SliceMode>().map_err(hooptraj::Error::Config)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Exclusive claim on an output directory for the life of the command.
struct DirLock(PathBuf);

impl DirLock {
    fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(".hooptraj.lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                bail!(hooptraj::Error::Config(format!("{} is locked by another run", dir.display())))
            }
            Err(e) => Err(hooptraj::Error::io(&path, e).into()),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn write_report(out: &Path, report: &hooptraj::metrics::EvalReport) -> Result<()> {
    report.emit(out.join("report.csv"), ReportFormat::Csv)?;
    report.emit(out.join("report.md"), ReportFormat::Markdown)?;
    let plot = out.join("report_plot.csv");
    fs::write(&plot, report.render_plot_csv()).map_err(|e| hooptraj::Error::io(&plot, e))?;
    for (m, f, d) in &report.unavailable {
        eprintln!("warning: {m}/{f} at {d} ft has a single class in the test split; AUC unavailable");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::Simulate(a) => {
            if let Some(n) = a.n {
                cfg.sim_shots = n;
            }
            if let Some(s) = a.seed {
                cfg.sim_seed = s;
            }
            cfg.validate()?;
            let _lock = DirLock::acquire(&a.out)?;
            let (tracks, stats) = pipeline::simulate(&cfg)?;
            let extra = [
                ("sim_seed", cfg.sim_seed.to_string()),
                ("made", stats.made.to_string()),
                ("redraws", stats.redraws.to_string()),
            ];
            pipeline::write_raw(&a.out, &tracks, &cfg, &extra)?;
            println!("simulated {} shots ({} made) into {}", tracks.len(), stats.made, a.out.display());
        }
        Command::Ingest(a) => {
            let _lock = DirLock::acquire(&a.out)?;
            let tracks = parse_tracking_csv::<f64>(&a.tracking)?;
            let labels = parse_labels_csv(&a.labels)?;
            for t in &tracks {
                t.check(&cfg.geometry)?;
            }
            let labeled = hooptraj::dataset::join_labels(tracks, &labels);
            pipeline::write_raw(&a.out, &labeled, &cfg, &[("source", a.tracking.display().to_string())])?;
            println!("ingested {} labeled shots into {}", labeled.len(), a.out.display());
        }
        Command::Prepare(a) => {
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            let _lock = DirLock::acquire(&a.out)?;
            let (tracks, labels) = pipeline::read_raw(&a.raw)?;
            let prepared = pipeline::prepare(tracks, &labels, &cfg)?;
            pipeline::write_prepared(&a.out, &prepared, &cfg)?;
            println!(
                "prepared {} shots ({} train / {} test) into {}",
                prepared.tracks.len(),
                prepared.split.train_ids.len(),
                prepared.split.test_ids.len(),
                a.out.display()
            );
        }
        Command::Train(a) => {
            if let Some(f) = a.train_fraction {
                cfg.data.train_fraction = f;
            }
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let kind: ModelKind = a.model.parse()?;
            let features: FeatureMode = a.features.parse().map_err(hooptraj::Error::Config)?;
            let prepared = pipeline::load_prepared(&a.data)?;
            let _lock = DirLock::acquire(&a.out)?;
            let (model, logs) = pipeline::train_model(&prepared, &cfg, kind, features)?;
            let path = pipeline::write_model(&a.out, &model, &logs)?;
            println!("wrote {}", path.display());
        }
        Command::Evaluate(a) => {
            if let Some(d) = &a.distances {
                cfg.set("data.distances", d)?;
            }
            let prepared = pipeline::load_prepared(&a.data)?;
            let models = a.checkpoints.iter().map(|p| pipeline::read_model(p)).collect::<hooptraj::Result<Vec<_>>>()?;
            let _lock = DirLock::acquire(&a.out)?;
            let report = pipeline::evaluate(&models, &prepared, &cfg)?;
            write_report(&a.out, &report)?;
            print!("{}", report.render(ReportFormat::Markdown)?);
        }
        Command::Sweep(a) => {
            let prepared = pipeline::load_prepared(&a.data)?;
            let _lock = DirLock::acquire(&a.out)?;
            let mut combos = vec![
                (ModelKind::Enet, FeatureMode::PositionalOnly),
                (ModelKind::Enet, FeatureMode::Full),
                (ModelKind::Gbm, FeatureMode::PositionalOnly),
                (ModelKind::Gbm, FeatureMode::Full),
            ];
            if !a.no_rnn {
                combos.push((ModelKind::Rnn, FeatureMode::PositionalOnly));
            }
            let mut models = Vec::new();
            for (kind, features) in combos {
                let (model, logs) = pipeline::train_model(&prepared, &cfg, kind, features)?;
                pipeline::write_model(&a.out, &model, &logs)?;
                eprintln!("trained {kind} ({features})");
                models.push(model);
            }
            let report = pipeline::evaluate(&models, &prepared, &cfg)?;
            write_report(&a.out, &report)?;
            print!("{}", report.render(ReportFormat::Markdown)?);
        }
        Command::Sanity(a) => {
            let (task, default_steps, metric) = match a.task.as_str() {
                "sine" => (SanityTask::sine(), 2000, "held-out MSE"),
                _ => (SanityTask::addition(), 5000, "held-out MAE"),
            };
            let steps = a.steps.unwrap_or(default_steps);
            let (value, _) = run_sanity::<f64>(&task, steps, a.seed)?;
            println!("{} after {steps} steps: {metric} = {value}", a.task);
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<hooptraj::Error>().map(|e| e.class()) {
        Some(ErrorClass::Config) => 2,
        Some(ErrorClass::Numeric) => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
