use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SessionStart;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionTotal {
    pub district_id: String,
    pub proposed: i64,
}

/// Suggested capacity per finished session, persisted between workshops so
/// the countdown is campaign-wide.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CampaignFile {
    #[serde(default)]
    pub sessions: BTreeMap<String, SessionTotal>,
}

impl CampaignFile {
    /// Read the file; a missing file is an empty campaign.
    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        match std::fs::read_to_string(path.as_ref()) {
            Ok(text) => serde_json::from_str(&text)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(e),
        }
    }

    /// Write through a sibling temp file and rename.
    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string_pretty(self).expect("campaign serializes");
        std::fs::write(&tmp, text + "\n")?;
        std::fs::rename(tmp, path)
    }

    pub fn total(&self) -> i64 {
        self.sessions.values().map(|s| s.proposed).sum()
    }

    /// Start parameters for `session_id`, counting every other session as
    /// prior.
    pub fn start_for(&self, session_id: &str, district_id: &str, target_total: i64) -> SessionStart {
        let mut by_district = BTreeMap::new();
        let mut prior = 0;
        for (id, s) in &self.sessions {
            if id != session_id {
                prior += s.proposed;
                *by_district.entry(s.district_id.clone()).or_insert(0) += s.proposed;
            }
        }
        SessionStart {
            session_id: session_id.to_string(),
            district_id: district_id.to_string(),
            target_total,
            campaign_prior: prior,
            prior_by_district: by_district,
        }
    }

    pub fn record(&mut self, session_id: &str, district_id: &str, proposed: i64) {
        self.sessions.insert(
            session_id.to_string(),
            SessionTotal { district_id: district_id.to_string(), proposed },
        );
    }
}
