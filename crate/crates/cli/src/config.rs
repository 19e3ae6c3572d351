//! Operator configuration, one TOML file. Every key is optional.
//!
//! ```toml
//! data_dir = "data/demo"
//!
//! [suitability]
//! significance_threshold = 0.5
//! density_m2_per_place = 30.0
//!
//! [grid]
//! rows = 32
//! cols = 32
//! cell_px = 8
//!
//! [serve]
//! listen = "127.0.0.1:8765"
//! http = "127.0.0.1:8766"
//! static_dir = "webui/dist"
//! token = "change-me"
//! session_id = "d1-ws"
//! district_id = "d1"
//! target_total = 20000
//! session_log = "sessions/d1-ws.ndjson"
//! campaign_file = "campaign.json"
//! buffer = 1000
//! ```
//!
//! Relative paths are taken relative to the config file. The data directory
//! can be overridden with `TABLESCOPE_DATA_DIR`, and that in turn by `--data`.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use tablescope::session::DEFAULT_TARGET_TOTAL;
use tablescope::suitability::SuitabilityConfig;
use tablescope::tangible::GridSpec;
use tablescope_hub::DEFAULT_BUFFER;

use crate::CliError;

pub const DATA_DIR_ENV: &str = "TABLESCOPE_DATA_DIR";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
    #[serde(default)]
    pub suitability: SuitabilityConfig,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub serve: ServeConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeConfig {
    #[serde(default = "default_listen")]
    pub listen: String,
    #[serde(default)]
    pub http: Option<String>,
    #[serde(default)]
    pub static_dir: Option<PathBuf>,
    #[serde(default)]
    pub token: Option<String>,
    #[serde(default)]
    pub session_id: Option<String>,
    #[serde(default)]
    pub district_id: Option<String>,
    #[serde(default = "default_target")]
    pub target_total: i64,
    #[serde(default)]
    pub session_log: Option<PathBuf>,
    #[serde(default = "default_campaign")]
    pub campaign_file: PathBuf,
    #[serde(default = "default_buffer")]
    pub buffer: usize,
}

fn default_data_dir() -> PathBuf {
    PathBuf::from("data/demo")
}

fn default_listen() -> String {
    "127.0.0.1:8765".into()
}

fn default_target() -> i64 {
    DEFAULT_TARGET_TOTAL
}

fn default_campaign() -> PathBuf {
    PathBuf::from("campaign.json")
}

fn default_buffer() -> usize {
    DEFAULT_BUFFER
}

impl Default for ServeConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty table uses defaults")
    }
}

impl Default for Config {
    fn default() -> Self {
        toml::from_str("").expect("empty table uses defaults")
    }
}

impl Config {
    /// Load `path` (or defaults when `None`) and apply the environment
    /// override.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut cfg = match path {
            None => Config::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::config(format!("cannot read config {}: {e}", p.display())))?;
                let mut cfg: Config = toml::from_str(&text)
                    .map_err(|e| CliError::config(format!("config {}: {e}", p.display())))?;
                let base = p.parent().unwrap_or(Path::new(""));
                cfg.rebase(base);
                cfg
            }
        };
        if let Some(dir) = std::env::var_os(DATA_DIR_ENV).filter(|v| !v.is_empty()) {
            cfg.data_dir = PathBuf::from(dir);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data_dir);
        fix(&mut self.serve.campaign_file);
        if let Some(p) = self.serve.session_log.as_mut() {
            fix(p);
        }
        if let Some(p) = self.serve.static_dir.as_mut() {
            fix(p);
        }
    }
}
