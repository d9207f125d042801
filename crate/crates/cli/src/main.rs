use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use coron_lab::config::{has_errors, validate, ExperimentConfig};
use coron_lab::{pipeline, report};

#[derive(Parser)]
#[command(
    name = "coron-lab",
    version,
    about = "Concentration experiments for critical systems on perforated balls"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and run an experiment.
    Run { config: PathBuf },
    /// Print diagnostics for a config.
    Validate { config: PathBuf },
}

fn load(path: &Path) -> Result<ExperimentConfig, ExitCode> {
    ExperimentConfig::load(path).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match cli.command {
        Command::Validate { config } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let diags = validate(&cfg);
            for d in &diags {
                println!("{d}");
            }
            if has_errors(&diags) {
                ExitCode::from(1)
            } else {
                println!("ok: {} ({} warnings)", config.display(), diags.len());
                ExitCode::SUCCESS
            }
        }
        Command::Run { config } => {
            let mut cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let diags = validate(&cfg);
            for d in &diags {
                eprintln!("{d}");
            }
            if has_errors(&diags) {
                return ExitCode::from(1);
            }
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let seed = cfg.seed;
            let dir = cli
                .out
                .or_else(|| cfg.output.dir.clone())
                .unwrap_or_else(|| PathBuf::from("coron-out"));
            let result = pipeline::run(&cfg, seed);
            for t in &result.tasks {
                println!("{:<16} {:?}", t.task.name(), t.outcome);
                for c in &t.checks {
                    println!("  {:<28} {:?}  {}", c.name, c.outcome, c.detail);
                }
                if let Some(e) = &t.error {
                    println!("  error in {}::{}: {}", e.module, e.operation, e.message);
                }
            }
            if let Err(e) = report::write(&dir, &cfg, seed, &result) {
                eprintln!("error: {e:#}");
                return ExitCode::from(1);
            }
            let code = result.exit_code();
            println!("exit {code}; reports in {}", dir.display());
            ExitCode::from(code as u8)
        }
    }
}
