//! `serve`: the session engine behind a hub, plus an optional HTTP side for
//! the map data and the web client's static files.
//!
//! The engine is the only writer. Commands arrive as `command` frames from
//! token holders; each accepted command is appended to the session log
//! (flushed per line) before its deltas are published. On shutdown the log
//! is synced and the session's total recorded in the campaign file. If the
//! log already exists, the session resumes from it.

use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use tablescope::session::{
    CampaignFile, Command, SessionEngine, SessionHeader, SessionLog, WorkshopData,
};
use tablescope::tangible::LookupTable;
use tablescope_hub::{serve as serve_hub, CommandRequest, Hub, HubConfig, ServerHandle};
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinHandle;

use crate::{classified_geojson, load_data, CliError, Config};

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub config: Config,
    pub session_id: String,
    pub district_id: String,
}

impl ServeOptions {
    /// Session and district from the config unless given.
    pub fn from_config(config: Config, session_id: Option<String>, district_id: Option<String>) -> Result<Self, CliError> {
        let district_id = district_id
            .or_else(|| config.serve.district_id.clone())
            .ok_or_else(|| CliError::config("serve needs a district (serve.district_id or --district)"))?;
        let session_id = session_id
            .or_else(|| config.serve.session_id.clone())
            .unwrap_or_else(|| format!("{district_id}-ws"));
        Ok(Self { config, session_id, district_id })
    }

    fn log_path(&self) -> PathBuf {
        self.config
            .serve
            .session_log
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("{}.ndjson", self.session_id)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ServeSummary {
    pub session_id: String,
    pub commands: usize,
    pub remaining: i64,
    pub state_hash: String,
    pub log: PathBuf,
}

pub struct Running {
    pub ws_addr: SocketAddr,
    pub http_addr: Option<SocketAddr>,
    pub hub: Hub,
    stop: oneshot::Sender<()>,
    engine: JoinHandle<Result<ServeSummary, CliError>>,
    server: ServerHandle,
    http: Option<HttpSide>,
}

impl Running {
    /// Stop serving, flush the log and record the campaign total.
    pub async fn stop(self) -> Result<ServeSummary, CliError> {
        self.server.shutdown().await;
        if let Some(h) = self.http {
            h.stop();
        }
        let _ = self.stop.send(());
        self.engine.await.map_err(|e| CliError::config(format!("engine task: {e}")))?
    }
}

/// Load data, open or resume the log, and start listening.
pub async fn start(opts: ServeOptions) -> Result<Running, CliError> {
    let cfg = &opts.config;
    let data = load_data(cfg)?;
    let campaign_path = cfg.serve.campaign_file.clone();
    let campaign = CampaignFile::load(&campaign_path)
        .map_err(|e| CliError::config(format!("{}: {e}", campaign_path.display())))?;
    let log_path = opts.log_path();

    let resumed = std::fs::metadata(&log_path).is_ok_and(|m| m.len() > 0);
    let (mut engine, log, replayed) = if resumed {
        let (script, log) = SessionLog::reopen(&log_path)
            .map_err(|e| CliError::config(format!("{}: {e}", log_path.display())))?;
        if script.header.session_id != opts.session_id || script.header.district_id != opts.district_id {
            return Err(CliError::config(format!(
                "{} belongs to session {} in {}",
                log_path.display(),
                script.header.session_id,
                script.header.district_id
            )));
        }
        let mut e = SessionEngine::start(data.clone(), script.header.start()).map_err(|e| CliError::config(e.to_string()))?;
        for (i, c) in script.commands.iter().enumerate() {
            e.apply(c).map_err(|err| CliError::domain(format!("{}: command {}: {err}", log_path.display(), i + 1)))?;
        }
        (e, log, script.commands.len())
    } else {
        let start = campaign.start_for(&opts.session_id, &opts.district_id, cfg.serve.target_total);
        let e = SessionEngine::start(data.clone(), start.clone()).map_err(|e| CliError::config(e.to_string()))?;
        if let Some(dir) = log_path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| CliError::config(format!("{}: {e}", dir.display())))?;
        }
        let log = SessionLog::create(&log_path, &SessionHeader::from_start(&start))
            .map_err(|e| CliError::config(format!("{}: {e}", log_path.display())))?;
        (e, log, 0)
    };

    let hub = Hub::new(HubConfig { buffer: cfg.serve.buffer, token: cfg.serve.token.clone() });
    for d in engine.snapshot() {
        hub.publish(d.topic(), d.payload()).expect("engine deltas match the topic schemas");
    }
    let (tx, rx) = mpsc::channel::<CommandRequest>(64);
    let server = serve_hub(&cfg.serve.listen, hub.clone(), Some(tx))
        .await
        .map_err(|e| CliError::config(e.to_string()))?;
    let http = match &cfg.serve.http {
        Some(addr) => {
            let table_path = cfg.data_dir.join("table.json");
            let table = if table_path.exists() {
                LookupTable::read(&table_path).map_err(|e| CliError::config(format!("{}: {e}", table_path.display())))?
            } else {
                LookupTable::default_table()
            };
            Some(HttpSide::start(addr, &data, &table, cfg.serve.static_dir.clone())?)
        }
        None => None,
    };
    tracing::info!(session = %opts.session_id, replayed, "session ready");

    let (stop, stop_rx) = oneshot::channel();
    let task_hub = hub.clone();
    let engine_task = tokio::spawn(async move {
        let n = run_engine(&mut engine, log, rx, stop_rx, &task_hub).await?;
        let s = engine.state();
        let mut campaign = CampaignFile::load(&campaign_path)
            .map_err(|e| CliError::config(format!("{}: {e}", campaign_path.display())))?;
        campaign.record(&s.session_id, &s.district_id, s.session_proposed());
        campaign.save(&campaign_path).map_err(|e| CliError::config(format!("{}: {e}", campaign_path.display())))?;
        Ok(ServeSummary {
            session_id: s.session_id.clone(),
            commands: replayed + n,
            remaining: s.remaining(),
            state_hash: engine.state_hash(),
            log: log_path,
        })
    });

    Ok(Running {
        ws_addr: server.local_addr(),
        http_addr: http.as_ref().map(|h| h.addr),
        hub,
        stop,
        engine: engine_task,
        server,
        http,
    })
}

async fn run_engine(
    engine: &mut SessionEngine,
    mut log: SessionLog,
    mut rx: mpsc::Receiver<CommandRequest>,
    mut stop: oneshot::Receiver<()>,
    hub: &Hub,
) -> Result<usize, CliError> {
    let mut accepted = 0;
    loop {
        let req = tokio::select! {
            _ = &mut stop => break,
            r = rx.recv() => match r {
                Some(r) => r,
                None => break,
            },
        };
        let cmd: Command = match serde_json::from_value(req.command) {
            Ok(c) => c,
            Err(e) => {
                let _ = req.reply.send(Err(format!("invalid command: {e}")));
                continue;
            }
        };
        match engine.apply(&cmd) {
            Ok(deltas) => {
                if let Err(e) = log.append(&cmd) {
                    let _ = req.reply.send(Err("session log write failed; stopping".into()));
                    return Err(CliError::config(format!("session log: {e}")));
                }
                accepted += 1;
                for d in deltas {
                    hub.publish(d.topic(), d.payload()).expect("engine deltas match the topic schemas");
                }
                let _ = req.reply.send(Ok(engine.state().seq));
            }
            Err(e) => {
                let _ = req.reply.send(Err(e.to_string()));
            }
        }
    }
    log.close().map_err(|e| CliError::config(format!("session log: {e}")))?;
    Ok(accepted)
}

/// Static files and read-only data over plain HTTP.
struct HttpSide {
    addr: SocketAddr,
    server: Arc<tiny_http::Server>,
    thread: std::thread::JoinHandle<()>,
}

struct DataFiles {
    parcels: String,
    districts: String,
    table: String,
    grid: String,
}

impl HttpSide {
    fn start(addr: &str, data: &WorkshopData, table: &LookupTable, static_dir: Option<PathBuf>) -> Result<Self, CliError> {
        let server = tiny_http::Server::http(addr).map_err(|e| CliError::config(format!("cannot bind {addr}: {e}")))?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| CliError::config(format!("{addr} is not an IP endpoint")))?;
        let files = DataFiles {
            parcels: classified_geojson(data),
            districts: serde_json::to_string(data.districts()).expect("districts serialize"),
            table: table.to_json(),
            grid: serde_json::to_string(&data.grid()).expect("grid serializes"),
        };
        let server = Arc::new(server);
        let s = server.clone();
        let thread = std::thread::spawn(move || {
            for req in s.incoming_requests() {
                let resp = respond(req.url(), &files, static_dir.as_deref());
                let _ = req.respond(resp);
            }
        });
        tracing::info!(%addr, "http listening");
        Ok(Self { addr, server, thread })
    }

    fn stop(self) {
        self.server.unblock();
        let _ = self.thread.join();
    }
}

type Response = tiny_http::Response<std::io::Cursor<Vec<u8>>>;

fn respond(url: &str, files: &DataFiles, static_dir: Option<&Path>) -> Response {
    let path = url.split(['?', '#']).next().unwrap_or("/");
    let json = |body: &str| with_type(tiny_http::Response::from_string(body), "application/json");
    match path {
        "/data/parcels.geojson" => with_type(tiny_http::Response::from_string(files.parcels.as_str()), "application/geo+json"),
        "/data/districts.json" => json(&files.districts),
        "/data/table.json" => json(&files.table),
        "/data/grid.json" => json(&files.grid),
        _ => match static_dir.and_then(|d| static_file(d, path)) {
            Some((bytes, mime)) => with_type(tiny_http::Response::from_data(bytes), mime),
            None => tiny_http::Response::from_string("not found").with_status_code(404),
        },
    }
}

fn with_type(r: Response, mime: &str) -> Response {
    r.with_header(tiny_http::Header::from_bytes("Content-Type", mime).expect("valid header"))
}

fn static_file(root: &Path, url_path: &str) -> Option<(Vec<u8>, &'static str)> {
    let rel = Path::new(url_path.trim_start_matches('/'));
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return None;
    }
    let mut p = root.join(rel);
    if p.is_dir() {
        p = p.join("index.html");
    }
    let mime = match p.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js") | Some("mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        _ => "application/octet-stream",
    };
    std::fs::read(&p).ok().map(|b| (b, mime))
}
