use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use palmland::server::{self, ServerConfig};
use palmland_core::harness::{analyze, run_batch, AnalysisOptions, ExperimentConfig};
use palmland_core::landing_metrics::CenterMode;
use palmland_core::session::{SessionConfig, DEFAULT_STREAM_RATE_HZ};

#[derive(Parser)]
#[command(
    name = "palmland",
    version,
    about = "Simulate, analyze and play tactile-guided palm landings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured batch of synthetic trials.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Compute the report tables from trial logs.
    Analyze {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Odd moving-average window applied before differentiation.
        #[arg(long)]
        smooth: Option<usize>,
        #[arg(long, default_value_t = 0.9)]
        quantile: f64,
        #[arg(long, default_value = "plate")]
        center: CenterMode,
        /// Abort on corrupt log lines instead of skipping them.
        #[arg(long)]
        strict: bool,
    },
    /// Serve interactive sessions over websocket at /ws.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Experiment config; its scenario and output_dir are used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_STREAM_RATE_HZ)]
        rate: f64,
        /// Send drone altitude under tactile-only feedback.
        #[arg(long)]
        reveal_altitude: bool,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Simulate {
            config,
            out,
            seed,
            workers,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            let manifest = run_batch(&cfg, &out, workers)?;
            let timeouts = manifest.trials.iter().filter(|t| t.timed_out).count();
            println!(
                "{} trials written to {} ({timeouts} timed out)",
                manifest.trials.len(),
                out.display()
            );
        }
        Command::Analyze {
            logs,
            out,
            smooth,
            quantile,
            center,
            strict,
        } => {
            let options = AnalysisOptions {
                smoothing_window: smooth,
                containment_quantile: quantile,
                center_mode: center,
                strict,
            };
            let report = analyze(&logs, &out, &options)?;
            print!("{}", report.text);
            println!("reports written to {}", out.display());
        }
        Command::Serve {
            port,
            config,
            rate,
            reveal_altitude,
        } => {
            let cfg = match config {
                Some(p) => ExperimentConfig::load(&p)?,
                None => ExperimentConfig::protocol(1),
            };
            let server_cfg = ServerConfig {
                session: SessionConfig {
                    scenario: cfg.scenario,
                    stream_rate_hz: rate,
                    reveal_altitude_in_tactile: reveal_altitude,
                    default_seed: cfg.base_seed,
                },
                log_dir: Some(cfg.output_dir.join("sessions")),
            };
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(("0.0.0.0", port))
                    .await
                    .with_context(|| format!("cannot bind port {port}"))?;
                log::info!("listening on {}", listener.local_addr()?);
                server::serve(listener, server_cfg).await?;
                Ok::<_, anyhow::Error>(())
            })?;
        }
    }
    Ok(())
}
