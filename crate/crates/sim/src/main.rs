use std::path::PathBuf;
use std::process::ExitCode;

use bre_core::metrics::OverlapMode;
use bre_sim::config::{Overrides, RunConfig};
use bre_sim::report::{
    condition_summary, format_report, metrics_from_file, render_metrics_table, InputError,
};
use bre_sim::runner::{resolve_workers, run_grid, WORKERS_ENV};
use bre_sim::{exit, output};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bre-sim",
    version,
    about = "Monte Carlo study of relative efficiency under planned missingness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured condition grid and write the result files.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Master seed; overrides `master_seed` in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Replications per condition; overrides `replications`.
        #[arg(long)]
        reps: Option<usize>,
        /// Output directory; overrides `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; takes precedence over BRE_SIM_WORKERS and `workers`.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Compute RE and BRE for externally supplied estimates.
    Metrics {
        /// CSV with header `label,estimate`.
        #[arg(long)]
        input: PathBuf,
        /// Population value of the estimated quantity.
        #[arg(long, allow_negative_numbers = true)]
        truth: f64,
        #[arg(long, default_value = "paper")]
        mode: OverlapMode,
        #[arg(long)]
        reference_label: Option<String>,
        #[arg(long)]
        comparison_label: Option<String>,
    },
    /// Print the summary table of an existing result directory.
    Report {
        #[arg(long)]
        input_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let code = match Cli::parse().command {
        Command::Simulate {
            config,
            seed,
            reps,
            out,
            workers,
        } => simulate(config, seed, reps, out, workers),
        Command::Metrics {
            input,
            truth,
            mode,
            reference_label,
            comparison_label,
        } => match metrics_from_file(
            &input,
            truth,
            mode,
            reference_label.as_deref(),
            comparison_label.as_deref(),
        ) {
            Ok(r) => {
                print!("{}", format_report(&r));
                exit::OK
            }
            Err(e) => input_error(e),
        },
        Command::Report { input_dir } => {
            match render_metrics_table(&input_dir.join(output::METRICS_FILE)) {
                Ok(table) => {
                    print!("{table}");
                    exit::OK
                }
                Err(e) => input_error(e),
            }
        }
    };
    ExitCode::from(code as u8)
}

fn input_error(e: InputError) -> i32 {
    match e {
        InputError::Metric(m) => eprintln!("error: {m:?}: {m}"),
        other => eprintln!("error: {other}"),
    }
    exit::CONFIG
}

fn simulate(
    config_path: PathBuf,
    seed: Option<u64>,
    reps: Option<usize>,
    out: Option<PathBuf>,
    workers: Option<usize>,
) -> i32 {
    let overrides = Overrides {
        master_seed: seed,
        replications: reps,
        output_dir: out,
    };
    let config = match RunConfig::load(&config_path, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit::CONFIG;
        }
    };
    let env = std::env::var(WORKERS_ENV).ok();
    let workers = match resolve_workers(workers, env.as_deref(), config.workers) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("error: {e}");
            return exit::CONFIG;
        }
    };
    let results = match run_grid(&config, workers) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit::CONFIG;
        }
    };
    for c in &results {
        for line in condition_summary(c) {
            println!("{line}");
        }
    }
    if let Err(e) = output::write_all(&config.output_dir, &results, &config.params) {
        eprintln!(
            "error: cannot write results to {}: {e}",
            config.output_dir.display()
        );
        return exit::OUTPUT;
    }
    if results.iter().any(|c| c.is_degenerate()) {
        eprintln!("error: at least one condition had too few usable estimates; its metrics are NA");
        return exit::DEGENERATE;
    }
    exit::OK
}
