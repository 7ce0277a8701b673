mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use autosynth::meshing::io::MeshFormat;
use autosynth::policy::Policy;
use autosynth::sampling::io::CloudFormat;
use clap::{Parser, Subcommand, ValueEnum};

use commands::{BaselineMode, GenArgs};
use config::{Overrides, RunConfig};
use error::CliError;

/// Search for the synthetic-shape generation policy whose data best trains
/// a point-cloud reconstruction surrogate for a target object.
#[derive(Debug, Parser)]
#[command(name = "autosynth", version)]
struct Cli {
    /// Worker threads; 0 uses every available core. Results do not depend
    /// on this value
    #[arg(long, global = true, env = "AUTOSYNTH_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the evolutionary policy search against the target mesh
    Search {
        #[command(flatten)]
        run: Overrides,
        /// Continue from the checkpoint in the output directory if present
        #[arg(long)]
        resume: bool,
    },
    /// Generate a synthetic dataset for one policy and export it
    Gen {
        /// Policy JSON file
        #[arg(long, value_name = "PATH", required_unless_present = "full_range")]
        policy: Option<PathBuf>,
        /// Use the policy with every label at its maximum
        #[arg(long, conflicts_with = "policy")]
        full_range: bool,
        /// Number of objects
        #[arg(short = 'n', long, default_value_t = 400)]
        objects: usize,
        /// Points per cloud
        #[arg(short = 'v', long, default_value_t = 256)]
        points: usize,
        /// Dataset seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory
        #[arg(long, value_name = "DIR")]
        output: PathBuf,
        /// Mesh file format
        #[arg(long, value_enum, default_value_t = MeshArg::Obj)]
        mesh_format: MeshArg,
        /// Cloud file format
        #[arg(long, value_enum, default_value_t = CloudArg::Ply)]
        cloud_format: CloudArg,
    },
    /// Score one policy against the target mesh
    Eval {
        /// Policy JSON file
        #[arg(long, value_name = "PATH")]
        policy: PathBuf,
        #[command(flatten)]
        run: Overrides,
    },
    /// Score feedback-free baseline policies
    Baseline {
        /// Which baseline to score
        #[arg(long, value_enum, default_value_t = BaselineMode::Random)]
        mode: BaselineMode,
        /// Random policies to score [default: 20, or baseline_count from the config]
        #[arg(long)]
        count: Option<usize>,
        #[command(flatten)]
        run: Overrides,
    },
    /// Turn a search history into a plot-ready per-trial CSV
    Report {
        /// History CSV written by `search`
        #[arg(long, value_name = "PATH")]
        history: PathBuf,
        /// Initial population CSV [default: initial_population.csv next to the history]
        #[arg(long, value_name = "PATH")]
        population: Option<PathBuf>,
        /// Report CSV to write [default: report.csv next to the history]
        #[arg(long, value_name = "PATH")]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MeshArg {
    Obj,
    Ply,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CloudArg {
    Ply,
    Xyz,
}

fn run(cli: Cli) -> Result<(), CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;

    match cli.command {
        Command::Search { run, resume } => {
            let cfg = RunConfig::load(&run)?;
            let summary = commands::search(&cfg, resume)?;
            println!("best policy {} scored {:.5e}", summary.best_policy, summary.best_score);
            println!("{}", cfg.output.display());
        }
        Command::Gen {
            policy,
            full_range,
            objects,
            points,
            seed,
            output,
            mesh_format,
            cloud_format,
        } => {
            let policy = match policy {
                Some(path) if !full_range => Policy::load(&path)?,
                _ => Policy::full_range(),
            };
            let manifest = commands::gen(&GenArgs {
                policy,
                objects,
                points,
                seed,
                output,
                mesh_format: match mesh_format {
                    MeshArg::Obj => MeshFormat::Obj,
                    MeshArg::Ply => MeshFormat::Ply,
                },
                cloud_format: match cloud_format {
                    CloudArg::Ply => CloudFormat::Ply,
                    CloudArg::Xyz => CloudFormat::Xyz,
                },
            })?;
            println!("{}", manifest.display());
        }
        Command::Eval { policy, run } => {
            let cfg = RunConfig::load(&run)?;
            let record = commands::eval(&cfg, Policy::load(&policy)?)?;
            println!("{:.5e}", record.score);
        }
        Command::Baseline { mode, count, run } => {
            let mut cfg = RunConfig::load(&run)?;
            if let Some(n) = count {
                if n == 0 {
                    return Err(CliError::Config("--count must be >= 1".into()));
                }
                cfg.baseline_count = n;
            }
            let report = commands::baseline(&cfg, mode)?;
            for (policy, score) in &report.scores {
                println!("{policy} {score:.5e}");
            }
            if mode == BaselineMode::Random {
                println!("min {:.5e}", report.min);
                println!("median {:.5e}", report.median);
            }
        }
        Command::Report {
            history,
            population,
            output,
        } => {
            let dir = history.parent().map(PathBuf::from).unwrap_or_default();
            let population = population.unwrap_or_else(|| dir.join(commands::POPULATION_FILE));
            let output = output.unwrap_or_else(|| dir.join(commands::REPORT_FILE));
            let rows = commands::report(&history, &population, &output)?;
            println!("{rows} trials -> {}", output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
