use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand};
use hush_cli::serve::{ServeOptions, ServeSession};
use hush_cli::sweep::{load_grid, sweep, write_sweep_csv};
use hush_cli::{exit, load_scenario, CliError};

/// Active noise control simulator.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario headlessly and write artifacts.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Host a live simulation behind the control plane.
    Serve {
        scenario: PathBuf,
        #[arg(long, default_value_t = hush_control::DEFAULT_TCP_PORT)]
        tcp: u16,
        #[arg(long, default_value_t = hush_control::DEFAULT_HTTP_PORT)]
        http: u16,
        /// Simulated seconds per wall-clock second; 0 starts paused.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        #[arg(long, default_value = "127.0.0.1")]
        bind: std::net::IpAddr,
        /// Directory of dashboard assets served over HTTP.
        #[arg(long)]
        static_dir: Option<PathBuf>,
        /// Envelope log file.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Run a parameter grid in parallel and write a CSV.
    Sweep {
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn serve_until_signal(session: ServeSession) -> Result<(), CliError> {
    let term = Arc::new(AtomicBool::new(false));
    for sig in [signal_hook::consts::SIGTERM, signal_hook::consts::SIGINT] {
        signal_hook::flag::register(sig, term.clone())?;
    }
    while !term.load(Ordering::Relaxed) && !session.is_finished() {
        std::thread::sleep(Duration::from_millis(50));
    }
    log::info!("shutting down");
    session.stop()
}

fn main_inner(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Cmd::Run { scenario, out } => {
            let (cfg, bytes) = load_scenario(&scenario)?;
            let s = hush_cli::run(&cfg, &bytes, &out)?;
            for m in &s.mics {
                println!(
                    "{:<16} off {:6.1} dBC  on {:6.1} dBC  band mean {:>6}",
                    m.name,
                    m.spl_off_dbc,
                    m.spl_on_dbc,
                    m.band_mean_reduction_db.map(|v| format!("{v:.1}")).unwrap_or_else(|| "-".into())
                );
            }
            Ok(())
        }
        Cmd::Serve {
            scenario,
            tcp,
            http,
            speed,
            bind,
            static_dir,
            log,
        } => {
            let (cfg, _) = load_scenario(&scenario)?;
            let opts = ServeOptions {
                tcp: SocketAddr::new(bind, tcp),
                http: Some(SocketAddr::new(bind, http)),
                static_dir,
                speed,
                telemetry_hz: cfg.metrics.telemetry_hz,
                log_path: log,
            };
            serve_until_signal(ServeSession::start(&cfg, opts)?)
        }
        Cmd::Sweep { grid, out } => {
            let (grid, cfg, bytes) = load_grid(&grid)?;
            let rows = sweep(&grid, &cfg, &bytes);
            write_sweep_csv(&rows, &out)?;
            let faults = rows.iter().filter(|r| r.status != "ok").count();
            println!("{} points, {} not ok", rows.len(), faults);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HUSH_LOG", "info")).init();
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
