//! Thin command-line front end over the simulator library.
//!
//! Exit codes: 0 ok, 1 invariant violation, 2 config error, 3 I/O error.
//! `SPACENET_LOG` controls log verbosity (error/warn/info/debug/trace).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spacenet::sim::{
    bench_pod, bench_pof, emit_report, run_scenario, ReportFormat, ScenarioConfig, SimError,
    SimReport,
};

#[derive(Parser)]
#[command(
    name = "spacenet",
    about = "Deterministic simulator for a satellite-service consensus protocol"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its report (plus the DA log next to it).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the epoch count.
        #[arg(long)]
        epochs: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "json")]
        format: String,
    },
    /// Time a proof kernel and print the measurement as JSON.
    Bench {
        #[command(subcommand)]
        kernel: BenchKernel,
    },
    /// Parse and validate a scenario file.
    ValidateConfig { path: PathBuf },
}

#[derive(Subcommand)]
enum BenchKernel {
    /// One distribution-proof epoch over N receivers.
    Pod {
        #[arg(long)]
        receivers: usize,
    },
    /// N window attestations of the given packet length.
    Pof {
        #[arg(long)]
        receivers: usize,
        #[arg(long = "packet-len")]
        packet_len: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("SPACENET_LOG")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run() -> Result<(), SimError> {
    match Cli::parse().command {
        Command::Simulate {
            config,
            seed,
            epochs,
            out,
            format,
        } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(epochs) = epochs {
                cfg.epochs = epochs;
            }
            cfg.validate()?;
            let format: ReportFormat = format.parse().map_err(SimError::Parse)?;
            let output = run_scenario(&cfg)?;
            emit_report(&output.report, format, &out)?;
            let da_path = out.with_extension("da.jsonl");
            std::fs::write(&da_path, &output.da_log)
                .map_err(|e| SimError::Io(format!("{}: {e}", da_path.display())))?;
            println!(
                "scenario {} finished: height {}, {} DA records, {} anomalies flagged",
                cfg.name,
                output.report.final_height,
                output.da_log.lines().count(),
                output
                    .report
                    .per_epoch
                    .iter()
                    .map(|r| r.anomalous)
                    .sum::<u64>()
            );
            println!("report: {}", out.display());
            println!("da log: {}", da_path.display());
            Ok(())
        }
        Command::Bench { kernel } => {
            let row = match kernel {
                BenchKernel::Pod { receivers } => bench_pod(receivers),
                BenchKernel::Pof {
                    receivers,
                    packet_len,
                } => bench_pof(receivers, packet_len),
            };
            let mut report = SimReport::new("bench", 0, 0);
            report.benchmarks.push(row);
            println!(
                "{}",
                serde_json::to_string(&report.benchmarks[0]).expect("bench row serializes")
            );
            Ok(())
        }
        Command::ValidateConfig { path } => {
            let cfg = ScenarioConfig::load(&path)?;
            println!(
                "ok: scenario '{}' ({} receivers, {} epochs, seed {})",
                cfg.name, cfg.n_receivers, cfg.epochs, cfg.seed
            );
            Ok(())
        }
    }
}
