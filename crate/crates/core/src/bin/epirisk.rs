use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use epirisk::model::Variant;
use epirisk::pipeline::{run_stage, PipelineConfig, Stage};
use epirisk::Error;

#[derive(Parser)]
#[command(name = "epirisk", version, about = "Regional epidemic risk pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Pipeline config (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for every artifact.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    variant: Option<Variant>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic bundle.
    Simulate(Common),
    /// Fit SIR parameters per region.
    Calibrate(Common),
    /// Turn fitted R0 into risk labels.
    Label(Common),
    /// Build the gravity mobility graph.
    BuildGraph(Common),
    Train(Common),
    /// Test-split metrics of a trained model.
    Evaluate(Common),
    /// Train every variant over several seeds.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// All stages in one process.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seeds: Option<usize>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::MissingFile(_) => 2,
        Error::Config { .. } => 3,
        e if e.is_numerical() => 4,
        _ => 1,
    }
}

fn configure(common: &Common, seeds: Option<usize>) -> Result<PipelineConfig, Error> {
    let mut cfg = match &common.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = Some(s);
    }
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    if let Some(v) = common.variant {
        cfg.model.variant = v;
    }
    if let Some(n) = seeds {
        cfg.ablation.seeds = n;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (stage, common, seeds) = match cli.command {
        Command::Simulate(c) => (Stage::Simulate, c, None),
        Command::Calibrate(c) => (Stage::Calibrate, c, None),
        Command::Label(c) => (Stage::Label, c, None),
        Command::BuildGraph(c) => (Stage::BuildGraph, c, None),
        Command::Train(c) => (Stage::Train, c, None),
        Command::Evaluate(c) => (Stage::Evaluate, c, None),
        Command::Ablate { common, seeds } => (Stage::Ablate, common, seeds),
        Command::Pipeline { common, seeds } => (Stage::Pipeline, common, seeds),
    };
    match configure(&common, seeds).and_then(|cfg| run_stage(stage, &cfg)) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            match &e {
                Error::Config { field, .. } => eprintln!("epirisk {stage}: invalid config field `{field}`: {e}"),
                e if e.is_numerical() => eprintln!("epirisk {stage}: numerical failure in stage `{stage}`: {e}"),
                _ => eprintln!("epirisk {stage}: {e}"),
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
