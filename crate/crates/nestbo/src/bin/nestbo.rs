//! Command-line interface: run experiments from config files, execute preset
//! sweeps, emit the power-function sweep table, and run the verify suite.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use nestbo::error::Error;
use nestbo::harness::{config::ExperimentConfig, sweeps, verify};
use nestbo::kernel::KernelParams;
use nestbo::oracle;

#[derive(Parser)]
#[command(name = "nestbo", version, about = "Newton-step-targeted local Bayesian optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config for one or more seeded replicates.
    Run {
        /// TOML experiment config.
        #[arg(long)]
        config: PathBuf,
        /// Base seed override (replicate r uses seed + r).
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for trace and aggregate files.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        replicates: usize,
        /// Worker threads across replicates.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run a preset ablation sweep: scale, batch, or stepsize.
    Sweep {
        #[arg(long)]
        preset: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 10)]
        replicates: usize,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Emit the stencil power-function sweep as CSV.
    Vpc {
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        lengthscale: f64,
        #[arg(long, default_value_t = 1.0)]
        signal_variance: f64,
        /// Stencil spacings, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.2, 0.1])]
        spacings: Vec<f64>,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full property suite; exits non-zero when any check fails.
    Verify,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Argument(_) => 1,
        _ => 2,
    }
}

fn run_command(command: Command) -> Result<(), (u8, String)> {
    match command {
        Command::Run {
            config,
            seed,
            out_dir,
            replicates,
            jobs,
        } => {
            let mut cfg = ExperimentConfig::from_path(&config)
                .map_err(|e| (exit_code_for(&e), e.to_string()))?;
            if let Some(seed) = seed {
                cfg.run.seed = seed;
            }
            if replicates == 0 {
                return Err((1, "replicates must be at least 1".into()));
            }
            let report = nestbo::harness::run_experiment(&cfg, replicates, jobs, Some(&out_dir))
                .map_err(|e| (exit_code_for(&e), e.to_string()))?;
            println!(
                "{} on {:?} d={}: {} replicates ({} failed)",
                cfg.run.method.name(),
                cfg.benchmark.function,
                cfg.benchmark.dimension,
                report.replicates,
                report.failed
            );
            if let Some(best) = report.median_final_best() {
                println!("median final best: {best:.6e}");
            }
            if let Some(regret) = report.median_final_regret() {
                println!("median final regret: {regret:.6e}");
            }
            println!("outputs in {}", out_dir.display());
            Ok(())
        }
        Command::Sweep {
            preset,
            seed,
            out_dir,
            replicates,
            jobs,
        } => {
            let preset =
                sweeps::Preset::parse(&preset).map_err(|e| (1u8, e.to_string()))?;
            let summary = sweeps::run_preset(
                preset,
                &out_dir,
                seed.unwrap_or(0),
                replicates,
                jobs,
            )
            .map_err(|e| (exit_code_for(&e), e.to_string()))?;
            for (label, value) in summary {
                println!("{label}: {value:.6e}");
            }
            println!("outputs in {}", out_dir.display());
            Ok(())
        }
        Command::Vpc {
            dim,
            lengthscale,
            signal_variance,
            spacings,
            out,
        } => {
            let params = KernelParams::isotropic(signal_variance, lengthscale, 0.0, dim)
                .map_err(|e| (1u8, e.to_string()))?;
            let table = oracle::vpc_check(&params, dim, &spacings)
                .map_err(|e| (exit_code_for(&e), e.to_string()))?;
            let csv = table.to_csv();
            match out {
                Some(path) => std::fs::write(&path, csv)
                    .map_err(|e| (2u8, format!("cannot write {}: {e}", path.display())))?,
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::Verify => {
            let results = verify::run_all();
            let mut all_passed = true;
            for r in &results {
                println!(
                    "{} {}: {}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.detail
                );
                all_passed &= r.passed;
            }
            if all_passed {
                Ok(())
            } else {
                Err((2, "one or more verification checks failed".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version are successful outputs, not usage errors
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run_command(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
