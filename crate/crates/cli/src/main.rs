//! `wavemap` — run radial wave-map experiments from config files and print
//! a short summary; all artifacts land in the configured output directory.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wavemap_core::config::{ExperimentKind, ExperimentSpec, RunConfig};
use wavemap_core::harness::{run_experiment, ExperimentReport};
use wavemap_core::Error;

#[derive(Parser)]
#[command(
    name = "wavemap",
    version,
    about = "Radially symmetric wave-map evolution and estimate verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the experiment a config file describes.
    Run(RunArgs),
    /// Grid-refinement study of solution and residual errors.
    Convergence(ConvergenceArgs),
    /// One evolution per amplitude, with a monotonicity report.
    Sweep(SweepArgs),
    /// Synthetic characteristic-flux corpus; needs no config file.
    Divcurl(DivcurlArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the experiment config file.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct ConvergenceArgs {
    /// Path to the experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Number of grid halvings; overrides the config when given.
    #[arg(long)]
    levels: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    /// Path to the experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated amplitudes; overrides the config when given.
    #[arg(long, value_delimiter = ',')]
    amplitudes: Option<Vec<f64>>,
}

#[derive(Args)]
struct DivcurlArgs {
    /// Base seed; trial i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of synthetic fields to evaluate.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Lattice cells per side.
    #[arg(long, default_value_t = 64)]
    grid: usize,
    /// Output directory for the manifest and CSV.
    #[arg(long, default_value = "wavemap-out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Error> {
    let config = match command {
        Command::Run(args) => RunConfig::load(&args.config)?,
        Command::Convergence(args) => {
            let mut config = RunConfig::load(&args.config)?;
            config.experiment.kind = ExperimentKind::Convergence;
            if let Some(levels) = args.levels {
                config.experiment.levels = levels;
            }
            config
        }
        Command::Sweep(args) => {
            let mut config = RunConfig::load(&args.config)?;
            config.experiment.kind = ExperimentKind::Sweep;
            if let Some(amplitudes) = args.amplitudes {
                config.experiment.amplitudes = Some(amplitudes);
            }
            config
        }
        Command::Divcurl(args) => {
            if args.grid < 4 {
                return Err(Error::Config("--grid must be at least 4 cells".into()));
            }
            RunConfig {
                experiment: ExperimentSpec {
                    kind: ExperimentKind::DivCurl,
                    levels: 3,
                    amplitudes: None,
                    trials: args.trials,
                    corpus_cells: args.grid,
                },
                output_dir: args.out,
                seed: args.seed,
                pde: None,
            }
        }
    };
    let report = run_experiment(&config)?;
    print_report(&report, &config);
    Ok(())
}

fn print_report(report: &ExperimentReport, config: &RunConfig) {
    match report {
        ExperimentReport::Run(rec) => {
            let drift = rec.rows.iter().map(|r| r.energy_drift).fold(0.0_f64, f64::max);
            println!("run completed: {} diagnostic rows", rec.rows.len());
            println!("  initial energy     = {:.6e}", rec.initial_energy);
            println!("  max energy drift   = {drift:.6e}");
            println!("  pre-projection max = {:.6e}", rec.pre_projection_max);
        }
        ExperimentReport::Convergence(rep) => {
            println!("convergence study over {} levels:", rep.levels.len());
            println!("  level  dr            solution_err  gauge_res     balance_res");
            for (i, level) in rep.levels.iter().enumerate() {
                println!(
                    "  {i:<5}  {:<12.6e}  {:<12.6e}  {:<12.6e}  {:<12.6e}",
                    level.dr, level.solution_error, level.gauge_residual, level.balance_residual
                );
            }
            println!("  solution orders: {:?}", rep.solution_orders);
            println!("  gauge orders:    {:?}", rep.gauge_orders);
            println!("  balance orders:  {:?}", rep.balance_orders);
        }
        ExperimentReport::Sweep(rep) => {
            println!("amplitude sweep over {} amplitudes:", rep.rows.len());
            for row in &rep.rows {
                let status = if row.status.is_completed() { "ok" } else { "failed" };
                println!(
                    "  a = {:<10.4e} e0 = {:<12.6e} h2_ratio = {:<10.4} [{status}]",
                    row.amplitude, row.e0, row.h2_ratio
                );
            }
            for entry in &rep.monotone {
                println!("  monotone {:<14} = {}", entry.name, entry.nondecreasing);
            }
        }
        ExperimentReport::Corpus(rep) => {
            println!("corpus of {} synthetic fields:", rep.rows.len());
            println!("  max flux ratio (outgoing) = {:.6}", rep.max_ratio1);
            println!("  max flux ratio (incoming) = {:.6}", rep.max_ratio2);
            println!("  max bilinear ratio        = {:.6}", rep.max_bilinear_ratio);
            println!("  max invariant residual    = {:.3e}", rep.max_invariant_residual);
        }
    }
    println!("artifacts written to {}", config.output_dir.display());
}
