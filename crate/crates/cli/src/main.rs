use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tablescope_cli::config::DATA_DIR_ENV;
use tablescope_cli::serve::{start, ServeOptions};
use tablescope_cli::{classify, gen_city, ingest, replay, report, screen_export, CliError, Config, GenCity};

#[derive(Parser)]
#[command(name = "tablescope", version, about = "Participatory siting workshops on a virtual brick table")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Data directory (parcels.geojson, layers/, districts.json).
    #[arg(long, global = true, env = DATA_DIR_ENV)]
    data: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic city with a ground-truth ledger.
    GenCity {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        parcels: usize,
        /// e.g. "conservation:high,cemetery:high,park:less"
        #[arg(long, default_value = "conservation:high,cemetery:high,park:less,noise:less")]
        layers: String,
        /// Write the bundled demo campaign (rules, scripts, truth) instead.
        #[arg(long)]
        demo: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a parcel file or data directory.
    Ingest { path: Option<PathBuf> },
    /// Classify every parcel; writes CSV and optionally classed GeoJSON.
    Classify {
        #[arg(long, default_value = "classes.csv")]
        out: PathBuf,
        #[arg(long)]
        geojson: Option<PathBuf>,
    },
    /// Run session scripts headless, in order.
    Replay {
        #[arg(required = true)]
        scripts: Vec<PathBuf>,
        #[arg(long, default_value = "replay-out")]
        out: PathBuf,
    },
    /// Screen a suggestion export.
    Screen {
        export: PathBuf,
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        detail_budget: Option<usize>,
        #[arg(long, default_value = "screening")]
        out: PathBuf,
    },
    /// Render a saved screening report as Markdown.
    Report {
        report: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a live session behind the hub until interrupted.
    Serve {
        #[arg(long)]
        session: Option<String>,
        #[arg(long)]
        district: Option<String>,
        #[arg(long)]
        listen: Option<String>,
        #[arg(long)]
        http: Option<String>,
    },
}

fn run(cli: Cli) -> Result<String, CliError> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    if let Some(d) = cli.data {
        cfg.data_dir = d;
    }
    match cli.cmd {
        Cmd::GenCity { seed, parcels, layers, demo, out } => gen_city(&GenCity { seed, parcels, layers, demo, out }),
        Cmd::Ingest { path } => ingest(path.as_deref().unwrap_or(&cfg.data_dir)),
        Cmd::Classify { out, geojson } => classify(&cfg, &out, geojson.as_deref()),
        Cmd::Replay { scripts, out } => {
            let s = replay(&cfg, &scripts, &out)?;
            Ok(format!(
                "{} suggestions, {} proposed, remaining {} ({})\nstate hash {}",
                s.suggestions,
                s.proposed,
                s.remaining,
                s.status.label(),
                s.state_hash
            ))
        }
        Cmd::Screen { export, rules, detail_budget, out } => {
            screen_export(&export, &rules, detail_budget, &out).map(|r| r.summary_line())
        }
        Cmd::Report { report: path, out } => {
            let md = report(&path)?;
            match out {
                Some(o) => std::fs::write(&o, md)
                    .map(|_| format!("wrote {}", o.display()))
                    .map_err(|e| CliError::config(format!("{}: {e}", o.display()))),
                None => Ok(md.trim_end().to_string()),
            }
        }
        Cmd::Serve { session, district, listen, http } => {
            if let Some(l) = listen {
                cfg.serve.listen = l;
            }
            if http.is_some() {
                cfg.serve.http = http;
            }
            let opts = ServeOptions::from_config(cfg, session, district)?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::config(e.to_string()))?;
            rt.block_on(async {
                let running = start(opts).await?;
                eprintln!("hub on ws://{}", running.ws_addr);
                if let Some(h) = running.http_addr {
                    eprintln!("data on http://{h}");
                }
                shutdown_signal().await;
                let s = running.stop().await?;
                Ok(format!(
                    "{}: {} commands logged to {}, remaining {}\nstate hash {}",
                    s.session_id,
                    s.commands,
                    s.log.display(),
                    s.remaining,
                    s.state_hash
                ))
            })
        }
    }
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        let mut term = signal(SignalKind::terminate()).expect("SIGTERM handler");
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_env("TABLESCOPE_LOG").unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
