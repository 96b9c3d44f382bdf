use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use teletwin::commands::{self, CliError};
use teletwin::service::{serve, ServiceState};

#[derive(Parser)]
#[command(name = "teletwin", version, about = "Two-arm teleoperation trainer engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a recorded input log and print the score report.
    Replay {
        /// Bundled scenario id or scenario file.
        scenario: String,
        log: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the live web-socket service.
    Serve {
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "reports")]
        reports_dir: PathBuf,
    },
    /// Check a scenario (and config) without running it.
    Validate {
        scenario: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Print the effective engine config as JSON.
        #[arg(long)]
        print_config: bool,
    },
    /// Pretty-print a report file.
    Report { file: PathBuf },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Replay {
            scenario,
            log,
            config,
            out,
        } => {
            let report = commands::replay(&scenario, &log, config.as_deref())?;
            match out {
                Some(path) => commands::write(&path, &report)?,
                None => print!("{report}"),
            }
        }
        Command::Serve {
            port,
            host,
            config,
            reports_dir,
        } => {
            let cfg = commands::config_from(config.as_deref())?;
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|e| CliError::Service(format!("bad address: {e}")))?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Service(e.to_string()))?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr)
                    .await
                    .map_err(|e| CliError::Service(format!("bind {addr}: {e}")))?;
                tracing::info!("listening on ws://{addr}/ws");
                serve(listener, Arc::new(ServiceState::new(cfg, reports_dir)))
                    .await
                    .map_err(|e| CliError::Service(e.to_string()))
            })?;
        }
        Command::Validate {
            scenario,
            config,
            print_config,
        } => {
            print!("{}", commands::validate(&scenario, config.as_deref())?);
            if print_config {
                println!("{}", commands::config_from(config.as_deref())?.to_json());
            }
        }
        Command::Report { file } => print!("{}", commands::render_report(&file)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
