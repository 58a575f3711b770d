use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use wsr_core::harness::{
    run_experiment, write_results_csv, write_trace_csv, ExperimentConfig, SnrSummary,
};

/// Weighted sum rate precoding experiments.
#[derive(Parser)]
#[command(name = "wsr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Results CSV; defaults to the config's `output` field.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write per-iteration traces to this CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the built-in two-user, four-antenna sweep.
    Demo {
        #[arg(long, default_value = "demo.csv")]
        out: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Override the number of realizations per SNR.
        #[arg(long)]
        realizations: Option<usize>,
        /// Print the demo config and exit.
        #[arg(long)]
        print_config: bool,
    },
}

/// Worker threads from `WSR_THREADS`; one when unset.
fn threads() -> Result<usize> {
    match std::env::var("WSR_THREADS") {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .with_context(|| format!("WSR_THREADS={v:?}"))?;
            if n == 0 {
                bail!("WSR_THREADS must be at least 1");
            }
            Ok(n)
        }
        Err(std::env::VarError::NotPresent) => Ok(1),
        Err(e) => Err(e).context("WSR_THREADS"),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| {
        format!("cannot create {}", path.display())
    })?))
}

fn print_summary(summary: &[SnrSummary]) -> io::Result<()> {
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "snr_db  runs  converged  failed  mean_rate  mean_power"
    )?;
    for s in summary {
        writeln!(
            out,
            "{:6.1}  {:4}  {:9}  {:6}  {:9.4}  {:10.4}",
            s.snr_db, s.runs, s.converged, s.failed, s.mean_weighted_sum_rate, s.mean_total_power
        )?;
    }
    Ok(())
}

fn sweep(cfg: &ExperimentConfig, out: &Path, trace: Option<&Path>) -> Result<bool> {
    let threads = threads()?;
    log::info!(
        "{} SNR points x {} realizations on {threads} thread(s)",
        cfg.snr_db.len(),
        cfg.realizations
    );
    let result = run_experiment(cfg, threads)?;
    let antennas = cfg.dims.bs_antennas;
    write_results_csv(create(out)?, &result.rows, antennas)?;
    if let Some(path) = trace {
        write_trace_csv(create(path)?, &result.rows, &result.traces)?;
    }
    print_summary(&result.summary)?;
    let failed: usize = result.summary.iter().map(|s| s.failed).sum();
    if failed > 0 {
        eprintln!("{failed} run(s) failed and were left out of the means");
    }
    // every run failing points at a systemic problem
    Ok(failed < result.rows.len())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, out, trace } => {
            let cfg = ExperimentConfig::load(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            let Some(out) = out.or_else(|| cfg.output.clone()) else {
                bail!("no output path: pass --out or set `output` in the config");
            };
            sweep(&cfg, &out, trace.as_deref())
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            println!(
                "ok: {} users, {} BS antennas, {} SNR points x {} realizations",
                cfg.dims.users,
                cfg.dims.bs_antennas,
                cfg.snr_db.len(),
                cfg.realizations
            );
            Ok(true)
        }
        Command::Demo {
            out,
            trace,
            realizations,
            print_config,
        } => {
            let mut cfg = ExperimentConfig::demo();
            if let Some(r) = realizations {
                cfg.realizations = r;
                cfg.setup()?;
            }
            if print_config {
                println!("{}", cfg.to_json());
                return Ok(true);
            }
            sweep(&cfg, &out, trace.as_deref())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
