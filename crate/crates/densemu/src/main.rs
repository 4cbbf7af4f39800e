use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use densemu::core::toy_models::{draw_replicate_matrix, make_design, Model, Scheme};
use densemu::io::export_dataset;
use densemu::{run, CampaignConfig, Error, Kind, Result, RunOptions};

#[derive(Parser)]
#[command(name = "densemu", version, about = "Emulators for stochastic simulators with density-valued outputs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Kernel-regression error against learning-sample size
    KrSweep(CampaignArgs),
    /// Reconstruction error of the decomposition methods against basis size
    DecompSweep(CampaignArgs),
    /// Magic-points basis against randomly chosen bases
    MmpVsRandom(CampaignArgs),
    /// Leave-one-out validation of the kernel estimators
    Loo(CampaignArgs),
    /// Write a toy-model design and replicate matrix as CSV
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct CampaignArgs {
    /// JSON campaign configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Overrides the configured seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; the DENSEMU_JOBS environment variable takes precedence
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// -v prints progress, -vv also writes AQM solver traces
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Args)]
struct SimulateArgs {
    /// TOY1 or TOY2
    #[arg(long)]
    model: String,
    /// Number of design points
    #[arg(long)]
    n: usize,
    /// Draws per design point
    #[arg(long, default_value_t = 1000)]
    replicates: usize,
    /// UNIFORM, LHS or NESTED_UNIFORM
    #[arg(long, default_value = "LHS")]
    scheme: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn jobs(flag: usize) -> Result<usize> {
    match std::env::var("DENSEMU_JOBS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|j| *j > 0)
            .ok_or_else(|| Error::Config(format!("DENSEMU_JOBS must be a positive integer, got {v:?}"))),
        Err(_) if flag == 0 => Err(Error::Config("--jobs must be positive".into())),
        Err(_) => Ok(flag),
    }
}

fn campaign(kind: Kind, args: &CampaignArgs) -> Result<()> {
    let mut cfg = CampaignConfig::from_file(&args.config, kind)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let opts = RunOptions { jobs: jobs(args.jobs)?, verbose: args.verbose };
    let outcome = run(&cfg, &opts)?;
    outcome.write(&args.out)?;
    for line in &outcome.table.report {
        println!("{line}");
    }
    println!("wrote {} records to {}", outcome.table.records().len(), args.out.display());
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let parse_err = |e: densemu::core::Error| Error::Config(e.to_string());
    let model: Model = args.model.parse().map_err(parse_err)?;
    if model.is_analytic() {
        return Err(Error::Config(format!("{model} has no replicates to simulate")));
    }
    let scheme: Scheme = args.scheme.parse().map_err(parse_err)?;
    let design = make_design(scheme, args.n, &model.input_box(), args.seed)?;
    let rows = draw_replicate_matrix(model, &design, args.replicates, args.seed)?;
    export_dataset(&args.out, &design.points, &rows)?;
    println!("wrote {} x {} replicates to {}", rows.len(), args.replicates, args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::KrSweep(a) => campaign(Kind::KrSweep, a),
        Command::DecompSweep(a) => campaign(Kind::DecompSweep, a),
        Command::MmpVsRandom(a) => campaign(Kind::MmpVsRandom, a),
        Command::Loo(a) => campaign(Kind::LooValidate, a),
        Command::Simulate(a) => simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("densemu: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
