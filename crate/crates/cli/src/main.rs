use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::Parser;
use dotbench::defaults::{DEFAULTS, DEFAULTS_VERSION};
use dotbench::{run, CliError, Command, Overrides, RunConfig};
use serde_json::json;

/// Divergence-regularized optimal transport experiments.
///
/// Exit codes: 0 ok, 1 other failure, 2 config error, 3 solver
/// non-convergence, 4 capacity exceeded, 5 property check failed.
#[derive(Parser, Debug)]
#[command(name = "dotbench", version)]
struct Args {
    #[arg(required_unless_present = "print_defaults")]
    command: Option<Command>,
    /// JSON config; optional for `figure`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Solver residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Worker threads for parallel stages.
    #[arg(long, env = "DOTBENCH_JOBS")]
    jobs: Option<usize>,
    /// Print the defaults table as JSON and exit.
    #[arg(long, exclusive = true)]
    print_defaults: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let Some(command) = args.command else {
        println!(
            "{}",
            serde_json::to_string_pretty(&DEFAULTS).expect("serializable")
        );
        return ExitCode::SUCCESS;
    };
    match execute(command, &args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dotbench {}: {e}", command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(command: Command, args: &Args) -> Result<(), CliError> {
    if let Some(j) = args.jobs {
        if j == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot configure {j} worker threads: {e}")))?;
    }
    let cfg = RunConfig {
        command,
        config: args.config.clone(),
        out: args.out.clone(),
        overrides: Overrides {
            seed: args.seed,
            tol: args.tol,
            max_iters: args.max_iters,
        },
    };
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let clock = Instant::now();
    let result = run(&cfg);
    if cfg.out.is_dir() {
        let meta = json!({
            "tool": "dotbench",
            "tool_version": env!("CARGO_PKG_VERSION"),
            "defaults_version": DEFAULTS_VERSION,
            "command": command.name(),
            "config": args.config,
            "seed": args.seed,
            "tol": args.tol,
            "max_iters": args.max_iters,
            "jobs": rayon::current_num_threads(),
            "started_unix": started,
            "elapsed_seconds": clock.elapsed().as_secs_f64(),
            "status": match &result {
                Ok(_) => "ok".to_string(),
                Err(e) => format!("exit {}: {e}", e.exit_code()),
            },
        });
        let _ = std::fs::write(
            cfg.out.join("metadata.json"),
            serde_json::to_string_pretty(&meta).expect("serializable") + "\n",
        );
    }
    let line = result?;
    println!("{}: {line}", command.name());
    Ok(())
}
