use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use dset_infer::config::Config;
use dset_infer::{checks, experiments};

/// Constrained Bayesian inference with distance-to-set priors.
#[derive(Parser)]
#[command(name = "dset-infer", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the config's output directory (also honors the
    /// DSET_INFER_OUTPUT_DIR environment variable).
    #[arg(long, global = true, env = "DSET_INFER_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment and write its report.
    Run { config: PathBuf },
    /// Compute the proximal-distance MAP and write the iterate trace.
    Map { config: PathBuf },
    /// Calibrate the penalty from the expected-distance budget, then run.
    Calibrate { config: PathBuf },
    /// Run the built-in oracle suites (MAP and TV convergence, gradients).
    Check,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("dset-infer: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config } => {
            let (cfg, config_dir, out_dir) = load(&config, cli.output_dir.as_deref())?;
            let started = Instant::now();
            experiments::run(&cfg, &config_dir, &out_dir)?;
            println!(
                "{} report written to {} in {:.1}s",
                cfg.experiment.kind.name(),
                out_dir.display(),
                started.elapsed().as_secs_f64()
            );
            Ok(())
        }
        Command::Map { config } => {
            let (cfg, config_dir, out_dir) = load(&config, cli.output_dir.as_deref())?;
            let outcome = experiments::run_map(&cfg, &config_dir, &out_dir)?;
            println!(
                "MAP after {} iterations: {:?} (trace in {})",
                outcome.trace_len,
                outcome.theta,
                out_dir.display()
            );
            Ok(())
        }
        Command::Calibrate { config } => {
            let (cfg, config_dir, out_dir) = load(&config, cli.output_dir.as_deref())?;
            let (calibration, _) = experiments::calibrate_then_run(&cfg, &config_dir, &out_dir)?;
            println!(
                "calibrated rho = {} (achieved moment {}, weight ESS {:.0}, {} stages); report in {}",
                calibration.lambda,
                calibration.achieved_moment,
                calibration.ess_of_weights,
                calibration.stages,
                out_dir.display()
            );
            Ok(())
        }
        Command::Check => {
            let lines = checks::run_all().context("stage: oracle checks")?;
            let mut all_ok = true;
            for line in &lines {
                let status = if line.passed { "PASS" } else { "FAIL" };
                println!("[{status}] {}: {}", line.name, line.detail);
                all_ok &= line.passed;
            }
            if all_ok {
                Ok(())
            } else {
                anyhow::bail!("stage: oracle checks reported failures")
            }
        }
    }
}

fn load(config_path: &Path, override_dir: Option<&Path>) -> Result<(Config, PathBuf, PathBuf)> {
    let config = Config::load(config_path).context("stage: config")?;
    let config_dir = config_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let out_dir = override_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&config.experiment.output_dir));
    Ok((config, config_dir, out_dir))
}
