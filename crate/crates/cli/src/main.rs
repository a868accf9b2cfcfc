use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shubin_lab::config::{ExperimentConfig, ExperimentKind};
use shubin_lab::runner::{run, RunError};

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "shubin-lab", version, about = "Numerical experiments for anisotropic Shubin operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment file and write its artefacts.
    Run {
        config: PathBuf,
        /// Output directory; overrides `out` in the file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `seed` in the file.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for the parallel kernels.
        #[arg(long, env = "SHUBIN_LAB_THREADS")]
        threads: Option<usize>,
    },
    /// Check an experiment file without running it.
    Validate { config: PathBuf },
    /// Print the available experiment kinds.
    ListExperiments,
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, ExitCode> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(EXIT_USAGE)
    })?;
    ExperimentConfig::from_text(&text).map_err(|errors| {
        eprintln!("error: {} problem(s) in {}", errors.len(), path.display());
        for e in errors {
            eprintln!("  {e}");
        }
        ExitCode::from(EXIT_USAGE)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListExperiments => {
            for k in ExperimentKind::ALL {
                println!("{:<16}{}", k.as_str(), k.description());
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match load(&config) {
            Ok(cfg) => {
                println!("{}: ok ({})", config.display(), cfg.kind.as_str());
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        Command::Run {
            config,
            out,
            seed,
            threads,
        } => {
            let mut cfg = match load(&config) {
                Ok(cfg) => cfg,
                Err(code) => return code,
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(n) = threads {
                if n == 0 {
                    eprintln!("error: --threads must be at least 1");
                    return ExitCode::from(EXIT_USAGE);
                }
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("warning: thread pool already initialized: {e}");
                }
            }
            let out_dir = out
                .or_else(|| cfg.out.clone())
                .unwrap_or_else(|| PathBuf::from(format!("out/{}", cfg.kind.as_str())));
            match run(&cfg, &out_dir) {
                Ok(outcome) => {
                    for (name, v) in &outcome.verdicts {
                        println!("{name}: {v}");
                    }
                    println!("wrote {} files to {}", outcome.files.len() + 1, out_dir.display());
                    if outcome.failed() {
                        ExitCode::from(EXIT_FAIL)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e @ RunError::Config { .. }) | Err(e @ RunError::Io { .. }) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_USAGE)
                }
                Err(e @ RunError::Numerical { .. }) => {
                    eprintln!("numerical error in {e}");
                    ExitCode::from(EXIT_NUMERICAL)
                }
            }
        }
    }
}
