//! Entry points behind the `tablescope` binary. Each subcommand is a plain
//! function so tests can drive it without a process boundary.
//!
//! Exit codes: 0 success, 1 domain rejection (a feature that does not
//! ingest, a script command the session refuses), 2 configuration or I/O.

pub mod config;
pub mod serve;

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};
use tablescope::parcels::{read_layer, read_parcels};
use tablescope::screening::{render_markdown, screen, RuleSet, ScreeningReport};
use tablescope::session::{
    read_suggestions, write_suggestions, Script, SessionEngine, WorkshopData,
};
use tablescope::suitability::write_csv;
use tablescope::synth::{demo, generate, parse_layer_spec, CityParams};
use tablescope::topics::TargetStatus;

pub use config::Config;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn domain(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

fn io(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::config(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io(dir))?;
    }
    std::fs::write(path, contents).map_err(io(path))
}

pub fn load_data(cfg: &Config) -> Result<Arc<WorkshopData>, CliError> {
    WorkshopData::load(&cfg.data_dir, cfg.suitability, cfg.grid)
        .map(Arc::new)
        .map_err(|e| CliError::config(format!("data {}: {e}", cfg.data_dir.display())))
}

pub struct GenCity {
    pub seed: u64,
    pub parcels: usize,
    pub layers: String,
    /// Write the demo campaign instead (seed, size and layers fixed).
    pub demo: bool,
    pub out: PathBuf,
}

pub fn gen_city(args: &GenCity) -> Result<String, CliError> {
    if args.demo {
        let c = demo().map_err(|e| CliError::domain(e.to_string()))?;
        c.write(&args.out).map_err(io(&args.out))?;
        return Ok(format!(
            "demo campaign: {} parcels, {} scripts in {}",
            c.city.parcels.len(),
            c.scripts.len(),
            args.out.display()
        ));
    }
    let layers = parse_layer_spec(&args.layers).map_err(|e| CliError::config(e.to_string()))?;
    if args.parcels == 0 {
        return Err(CliError::config("--parcels must be at least 1"));
    }
    let city = generate(&CityParams::new(args.seed, args.parcels, layers)).map_err(|e| CliError::config(e.to_string()))?;
    city.write(&args.out).map_err(io(&args.out))?;
    Ok(format!(
        "{} parcels, {} layers, {} districts in {}",
        city.parcels.len(),
        city.layers.len(),
        city.districts.len(),
        args.out.display()
    ))
}

/// Check a parcel file (or a data directory) and its layers. Any rejected
/// feature is a domain failure; the report lists each one.
pub fn ingest(path: &Path) -> Result<String, CliError> {
    let (parcels, layer_dir) = if path.is_dir() {
        (path.join("parcels.geojson"), Some(path.join("layers")))
    } else {
        (path.to_path_buf(), None)
    };
    let ing = read_parcels(&parcels).map_err(|e| CliError::config(format!("{}: {e}", parcels.display())))?;
    let mut out = format!("{}: {} parcels accepted", parcels.display(), ing.set.len());
    if let Some(dir) = layer_dir.filter(|d| d.is_dir()) {
        let mut names: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(io(&dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "geojson"))
            .collect();
        names.sort();
        for p in names {
            let l = read_layer(&p).map_err(|e| CliError::domain(format!("{}: {e}", p.display())))?;
            out += &format!("\nlayer {} ({:?}): {} polygons", l.name(), l.severity(), l.geometry().len());
        }
    }
    if ing.diagnostics.is_empty() {
        return Ok(out);
    }
    for d in &ing.diagnostics {
        out += &format!("\nrejected: {d}");
    }
    Err(CliError::domain(out))
}

/// Parcels as GeoJSON with their class, coverages and capacity, for the
/// map layer.
pub fn classified_geojson(data: &WorkshopData) -> String {
    let mut doc: Value = serde_json::from_str(&data.parcels().to_geojson()).expect("own output parses");
    for f in doc["features"].as_array_mut().expect("features") {
        let id = f["properties"]["id"].as_str().expect("id").to_string();
        let a = &data.assessment(&id).expect("every parcel is assessed").assessment;
        let props = f["properties"].as_object_mut().expect("properties");
        props.insert("suitability".into(), json!(a.class));
        props.insert("color".into(), json!(a.class.color()));
        props.insert("high_coverage".into(), json!(a.high_coverage));
        props.insert("less_coverage".into(), json!(a.less_coverage));
        props.insert("capacity".into(), json!(a.capacity));
    }
    serde_json::to_string(&doc).expect("serializes")
}

pub fn classify(cfg: &Config, out: &Path, geojson: Option<&Path>) -> Result<String, CliError> {
    let data = load_data(cfg)?;
    let rows: Vec<_> = data
        .parcels()
        .iter()
        .map(|p| data.assessment(p.id()).expect("assessed").assessment.clone())
        .collect();
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).map_err(|e| CliError::config(e.to_string()))?;
    write_file(out, buf)?;
    if let Some(g) = geojson {
        write_file(g, classified_geojson(&data) + "\n")?;
    }
    let count = |c| rows.iter().filter(|a| a.class == c).count();
    use tablescope::suitability::SuitabilityClass::*;
    Ok(format!(
        "{} parcels: {} high, {} medium, {} low indication of unsuitability",
        rows.len(),
        count(HighUnsuitability),
        count(MediumUnsuitability),
        count(LowUnsuitability)
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub district_id: String,
    pub commands: usize,
    pub proposed: i64,
    pub active_proposals: usize,
    pub state_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayStats {
    pub target_total: i64,
    pub proposed: i64,
    pub remaining: i64,
    pub status: TargetStatus,
    pub suggestions: usize,
    pub sessions: Vec<SessionSummary>,
    /// Hash of the last session's final state.
    pub state_hash: String,
}

/// Run scripts headless in order, each from its own header. Writes
/// `export.ndjson`, `stats.json` and `state_hash.txt` into `out`.
pub fn replay(cfg: &Config, scripts: &[PathBuf], out: &Path) -> Result<ReplayStats, CliError> {
    if scripts.is_empty() {
        return Err(CliError::config("no scripts given"));
    }
    let data = load_data(cfg)?;
    let mut export = Vec::new();
    let mut sessions = Vec::new();
    let mut last = None;
    for path in scripts {
        let script = Script::read(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let mut e = SessionEngine::start(data.clone(), script.header.start())
            .map_err(|e| CliError::config(format!("{}: header: {e}", path.display())))?;
        for (i, c) in script.commands.iter().enumerate() {
            e.apply(c).map_err(|err| {
                let cmd = serde_json::to_string(c).expect("command serializes");
                CliError::domain(format!("{}: command {} {cmd}: {err}", path.display(), i + 1))
            })?;
        }
        export.extend(e.export_suggestions());
        let s = e.state();
        sessions.push(SessionSummary {
            session_id: s.session_id.clone(),
            district_id: s.district_id.clone(),
            commands: script.commands.len(),
            proposed: s.session_proposed(),
            active_proposals: s.active().count(),
            state_hash: e.state_hash(),
        });
        last = Some(e);
    }
    let e = last.expect("at least one script");
    let s = e.state();
    let stats = ReplayStats {
        target_total: s.target_total,
        proposed: s.proposed(),
        remaining: s.remaining(),
        status: s.target_status(),
        suggestions: export.len(),
        sessions,
        state_hash: e.state_hash(),
    };
    std::fs::create_dir_all(out).map_err(io(out))?;
    let path = out.join("export.ndjson");
    let f = File::create(&path).map_err(io(&path))?;
    write_suggestions(BufWriter::new(f), &export).map_err(io(&path))?;
    write_file(&out.join("stats.json"), serde_json::to_string_pretty(&stats).expect("stats") + "\n")?;
    write_file(&out.join("state_hash.txt"), format!("{}\n", stats.state_hash))?;
    Ok(stats)
}

pub fn load_rules(path: &Path) -> Result<RuleSet, CliError> {
    let text = std::fs::read_to_string(path).map_err(io(path))?;
    RuleSet::from_json(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Screen an export; writes `report.json` and `report.md` into `out`.
pub fn screen_export(export: &Path, rules: &Path, detail_budget: Option<usize>, out: &Path) -> Result<ScreeningReport, CliError> {
    let rules = load_rules(rules)?;
    let f = File::open(export).map_err(io(export))?;
    let suggestions = read_suggestions(BufReader::new(f)).map_err(io(export))?;
    let report = screen(&suggestions, &rules, detail_budget);
    std::fs::create_dir_all(out).map_err(io(out))?;
    write_file(&out.join("report.json"), report.to_json() + "\n")?;
    write_file(&out.join("report.md"), render_markdown(&report))?;
    Ok(report)
}

/// Markdown for a saved `report.json`.
pub fn report(path: &Path) -> Result<String, CliError> {
    let text = std::fs::read_to_string(path).map_err(io(path))?;
    let r: ScreeningReport =
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    Ok(render_markdown(&r))
}
