use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;
mod source;

#[derive(Parser, Debug)]
#[command(name = "nlqre", version, about = "Nested-logit QRE solver, benchmark and learning driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Base seed for game generation, sampling and shuffling.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for batch solves. Benchmarks always run on one.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Output file (or directory for `train`); stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverArg {
    Newton,
    Fom,
}

impl From<SolverArg> for nlqre::SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Newton => nlqre::SolverKind::Newton,
            SolverArg::Fom => nlqre::SolverKind::Fom,
        }
    }
}

/// Forward solver selection and tolerances.
#[derive(Args, Debug, Clone)]
pub struct SolverFlags {
    #[arg(long, value_enum)]
    pub solver: Option<SolverArg>,
    /// First-order step size.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Duality-gap target of the first-order solver.
    #[arg(long)]
    pub gap_tol: Option<f64>,
    /// KKT residual target of Newton's method.
    #[arg(long)]
    pub residual_tol: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one game and write the equilibrium as JSON.
    Solve {
        /// Game JSON file or generator spec (rps, poker:4, stacked:2:5, info-gathering).
        #[arg(long)]
        game: String,
        /// Constant lambda, or a JSON file with per-infoset `u` and `v` arrays.
        /// Defaults to the game's own lambda, else 1.
        #[arg(long)]
        lambda: Option<String>,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Time Newton against the first-order method on stacked games; writes per-trial CSV rows.
    Bench {
        /// JSON suite file; flags below override its fields.
        #[arg(long)]
        suite: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        depths: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long)]
        trials: Option<usize>,
        /// First-order step size for both phases.
        #[arg(long)]
        tau: Option<f64>,
        /// Also write mean/stddev per cell to this CSV.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long)]
        skip_forward: bool,
        #[arg(long)]
        skip_backward: bool,
    },
    /// Fit a lambda model; `--out DIR` receives loss.csv and model.json.
    Train {
        /// JSON run configuration; defaults to the synthetic 4-card poker run.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the configuration's game.
        #[arg(long)]
        game: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Generate a game JSON, or with `--samples` a dataset of sampled play.
    Gen {
        #[arg(long)]
        game: String,
        /// Trajectories to sample at constant `--lambda`.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Read a decision-level CSV of the information-gathering task into dataset JSON.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "info-gathering")]
        game: String,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let g = &cli.global;
    let result = match cli.command {
        Command::Solve { game, lambda, solver } => commands::solve(g, &game, lambda.as_deref(), &solver),
        Command::Bench {
            suite,
            depths,
            sizes,
            trials,
            tau,
            summary,
            skip_forward,
            skip_backward,
        } => commands::bench(
            g,
            commands::BenchFlags {
                suite,
                depths,
                sizes,
                trials,
                tau,
                summary,
                skip_forward,
                skip_backward,
            },
        ),
        Command::Train {
            config,
            game,
            epochs,
            solver,
        } => commands::train(g, config.as_deref(), game, epochs, &solver),
        Command::Gen {
            game,
            samples,
            lambda,
            solver,
        } => commands::gen(g, &game, samples, lambda, &solver),
        Command::Ingest { input, game } => commands::ingest(g, &input, &game),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
