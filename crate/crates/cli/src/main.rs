use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use shardgame_cli::figures::DEFAULT_GRID_POINTS;
use shardgame_cli::{load_scenario, reproduce_figure, run_scenario, CliError, Command, Figure, FigureOutcome, Scenario};

#[derive(Parser)]
#[command(name = "shardgame", version, about = "Shard payment / follower allocation Stackelberg solver")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct OutArgs {
    /// Directory for CSV output.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Followers' equilibrium at the scenario's fixed payments.
    Equilibrium(Common),
    /// Leader payment search with followers' equilibrium inside.
    Stackelberg(Common),
    /// Concavity, diagonal strict concavity and uniqueness checks.
    Verify(Common),
    /// Pay-per-share simulation of an allocation.
    Payout(Common),
    /// Regenerate the data behind one of the reference plots.
    Figure {
        #[arg(long, value_parser = clap::value_parser!(u8).range(2..=5))]
        figure: u8,
        /// Use this scenario instead of the bundled one.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Grid points per axis for surface plots.
        #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
        grid: usize,
        #[command(flatten)]
        out: OutArgs,
    },
}

fn load(path: &Path, seed: Option<u64>) -> Result<Scenario, CliError> {
    let mut scenario = load_scenario(path)?;
    if let Some(seed) = seed {
        scenario.config.rng_seed = seed;
    }
    Ok(scenario)
}

fn print_files(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (command, common) = match cli.command {
        Cmd::Equilibrium(c) => (Command::Equilibrium, c),
        Cmd::Stackelberg(c) => (Command::Stackelberg, c),
        Cmd::Verify(c) => (Command::Verify, c),
        Cmd::Payout(c) => (Command::Payout, c),
        Cmd::Figure {
            figure,
            scenario,
            grid,
            out,
        } => {
            let figure = Figure::from_number(figure)?;
            let mut scenario = match scenario {
                Some(path) => load_scenario(path)?,
                None => figure.builtin_scenario(),
            };
            if let Some(seed) = out.seed {
                scenario.config.rng_seed = seed;
            }
            let outcome = reproduce_figure(figure, &scenario, &out.out, grid)?;
            match &outcome {
                FigureOutcome::UtilitySurface { argmax, .. } => println!(
                    "best response r = ({:.4}, {:.4}), utility {:.4}",
                    argmax[0], argmax[1], argmax[2]
                ),
                FigureOutcome::Convergence { equilibrium, .. } => {
                    println!("converged after {} sweeps", equilibrium.sweeps)
                }
                FigureOutcome::LeaderSurface {
                    grid_argmax, search, ..
                } => {
                    println!(
                        "grid maximum at P = ({}, {}), U_L = {:.6}",
                        grid_argmax.payments[0], grid_argmax.payments[1], grid_argmax.leader_utility
                    );
                    println!(
                        "search optimum P* = {}, U_L = {:.6}",
                        search.best_payments, search.best_utility
                    );
                }
            }
            print_files(outcome.files());
            return Ok(());
        }
    };
    let scenario = load(&common.scenario, common.out.seed)?;
    let output = run_scenario(&scenario, command, &common.out.out)?;
    print!("{}", output.summary);
    print_files(&output.files);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
