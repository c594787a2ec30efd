use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use intent_bench::{
    cmd_features, cmd_report, cmd_run, cmd_synth, CliError, Overrides, RunConfig, RunSummary, ShapeSelection, SEED_ENV,
};
use intent_core::pipeline::{format_cell, GridSelection};

#[derive(Parser)]
#[command(name = "intent-bench", version, about = "Two-step motion-intention benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic cohort as dataset CSV files.
    Synth(Common),
    /// Write per-shape time-domain feature tables.
    Features(Common),
    /// Train and evaluate, writing report and provenance files.
    Run(Common),
    /// Re-render reports from a previous run's cells.json.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Root seed (falls back to the config file, then $INTENT_BENCH_SEED).
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Use the synthetic cohort.
    #[arg(long, conflicts_with = "data")]
    synthetic: bool,
    /// Directory with resistance.csv, hits.csv, gaze.csv and participants.csv.
    #[arg(long, value_name = "DIR")]
    data: Option<PathBuf>,
    #[arg(long, value_parser = ["segment", "direction", "all"])]
    grid: Option<String>,
    #[arg(long, value_parser = ["diamond", "circle", "both"])]
    shape: Option<String>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let overrides = Overrides {
            seed: self.seed,
            out: self.out.clone(),
            synthetic: self.synthetic,
            data: self.data.clone(),
            grid: self.grid.as_deref().map(|g| g.parse::<GridSelection>()).transpose().map_err(CliError::Config)?,
            shape: self.shape.as_deref().map(|s| s.parse::<ShapeSelection>()).transpose().map_err(CliError::Config)?,
        };
        let env_seed = std::env::var(SEED_ENV).ok();
        cfg.apply(&overrides, env_seed.as_deref())?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(c) => {
            let s = cmd_synth(&c.resolve()?)?;
            println!(
                "wrote {} participants × {} shape(s), {} hit rows per shape, to {}",
                s.participants,
                s.shapes.len(),
                s.hit_rows_per_shape,
                s.dir.display()
            );
        }
        Command::Features(c) => {
            for path in cmd_features(&c.resolve()?)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Run(c) => {
            let cfg = c.resolve()?;
            match cmd_run(&cfg)? {
                RunSummary::Grid(tables) => {
                    println!("{} cells, seed {}, reports in {}", tables.cells.len(), tables.root_seed, cfg.out.display());
                }
                RunSummary::TwoStep(results) => {
                    for r in results {
                        println!(
                            "{}: step one {}, step two ({}) {}",
                            r.shape,
                            format_cell(r.step_one.accuracy, r.step_one.macro_f1),
                            r.setup,
                            format_cell(r.step_two.accuracy, r.step_two.macro_f1)
                        );
                    }
                }
            }
        }
        Command::Report(c) => print!("{}", cmd_report(&c.resolve()?)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            ExitCode::FAILURE
        }
    }
}
