//! Display topics, their payload records, and the wire frames of the
//! publish-subscribe protocol.
//!
//! Every payload is checked against its topic's record type before it is
//! accepted; the same shapes are published as JSON Schema files under
//! `schemas/`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::geom::PlanarPoint;
use crate::session::{LogEntry, MapExtent, ParcelDetail, Proposal, Station};
use crate::tangible::GridCell;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topic {
    MapExtents,
    GlobalStats,
    DistrictState,
    Proposals,
    ParcelDetail,
}

impl Topic {
    pub const ALL: [Topic; 5] = [
        Topic::MapExtents,
        Topic::GlobalStats,
        Topic::DistrictState,
        Topic::Proposals,
        Topic::ParcelDetail,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Topic::MapExtents => "map_extents",
            Topic::GlobalStats => "global_stats",
            Topic::DistrictState => "district_state",
            Topic::Proposals => "proposals",
            Topic::ParcelDetail => "parcel_detail",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown topic {0:?}")]
pub struct UnknownTopic(pub String);

impl FromStr for Topic {
    type Err = UnknownTopic;
    fn from_str(s: &str) -> Result<Self, UnknownTopic> {
        Topic::ALL.into_iter().find(|t| t.name() == s).ok_or_else(|| UnknownTopic(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDims {
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapExtentsPayload {
    pub station: Station,
    pub extent: MapExtent,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridDims>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub district_id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetStatus {
    Open,
    TargetMet,
    TargetExceeded,
}

impl TargetStatus {
    pub fn of_remaining(remaining: i64) -> Self {
        match remaining {
            r if r > 0 => TargetStatus::Open,
            0 => TargetStatus::TargetMet,
            _ => TargetStatus::TargetExceeded,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TargetStatus::Open => "open",
            TargetStatus::TargetMet => "target met",
            TargetStatus::TargetExceeded => "target exceeded",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalStatsPayload {
    pub remaining: i64,
    pub proposed: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_total: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<TargetStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_proposals: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_district: Option<BTreeMap<String, i64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistrictStatePayload {
    pub district_id: String,
    pub station: Station,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refugees: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposed: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_proposals: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    Created,
    Withdrawn,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposalChange {
    pub kind: ChangeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parcel_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Set when the parcel is not in the low-unsuitability class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalsPayload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    pub active: Vec<Proposal>,
    #[serde(default)]
    pub changes: Vec<ProposalChange>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetailKind {
    /// A Marker query hit a parcel.
    Detail,
    /// A brick landed where there is no parcel.
    NoParcel,
    /// The parcel's discussion log changed.
    Comment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParcelDetailPayload {
    pub kind: DetailKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<GridCell>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<PlanarPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<ParcelDetail>,
    #[serde(default)]
    pub log: Vec<LogEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("payload does not match the {topic} schema: {message}")]
pub struct PayloadError {
    pub topic: Topic,
    pub message: String,
}

fn check<T: serde::de::DeserializeOwned>(topic: Topic, v: &Value) -> Result<(), PayloadError> {
    if !v.is_object() {
        return Err(PayloadError { topic, message: "payload must be an object".into() });
    }
    T::deserialize(v).map(|_| ()).map_err(|e| PayloadError { topic, message: e.to_string() })
}

/// Check a payload against its topic's record type.
pub fn validate_payload(topic: Topic, payload: &Value) -> Result<(), PayloadError> {
    match topic {
        Topic::MapExtents => check::<MapExtentsPayload>(topic, payload),
        Topic::GlobalStats => check::<GlobalStatsPayload>(topic, payload),
        Topic::DistrictState => check::<DistrictStatePayload>(topic, payload),
        Topic::Proposals => check::<ProposalsPayload>(topic, payload),
        Topic::ParcelDetail => check::<ParcelDetailPayload>(topic, payload),
    }
}

/// Hub to client: one published message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub topic: Topic,
    pub seq: u64,
    /// Milliseconds since the Unix epoch.
    pub ts: u64,
    pub payload: Value,
}

/// Client to hub.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ClientFrame {
    Subscribe {
        topic: String,
    },
    Unsubscribe {
        topic: String,
    },
    Publish {
        topic: String,
        payload: Value,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        token: Option<String>,
    },
    /// A session command for the engine behind the hub.
    Command {
        command: Value,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        token: Option<String>,
    },
}

/// Hub to client, other than envelopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReplyFrame {
    Error { error: String },
    Ack { ack: String, seq: u64 },
}

/// Any frame a client can receive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ServerFrame {
    Envelope(Envelope),
    Reply(ReplyFrame),
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn topic_names_round_trip() {
        for t in Topic::ALL {
            assert_eq!(t.name().parse::<Topic>().unwrap(), t);
            assert_eq!(serde_json::to_value(t).unwrap(), json!(t.name()));
        }
        assert!("weather".parse::<Topic>().is_err());
    }

    #[test]
    fn minimal_stats_payload_validates() {
        validate_payload(Topic::GlobalStats, &json!({"remaining": 19500, "proposed": 500})).unwrap();
        let e = validate_payload(Topic::GlobalStats, &json!({"remaining": 19500})).unwrap_err();
        assert!(e.message.contains("proposed"), "{e}");
        assert!(validate_payload(Topic::GlobalStats, &json!([1, 2])).is_err());
    }

    #[test]
    fn extent_payload_rejects_inverted_box() {
        let ok = json!({"station": "district", "extent": {"min": [0, 0], "max": [10, 10]}});
        validate_payload(Topic::MapExtents, &ok).unwrap();
        let bad = json!({"station": "district", "extent": {"min": [10, 0], "max": [0, 10]}});
        assert!(validate_payload(Topic::MapExtents, &bad).is_err());
    }

    #[test]
    fn frames_parse() {
        let f: ClientFrame = serde_json::from_str(r#"{"op":"subscribe","topic":"proposals"}"#).unwrap();
        assert_eq!(f, ClientFrame::Subscribe { topic: "proposals".into() });
        let f: ClientFrame =
            serde_json::from_str(r#"{"op":"publish","topic":"global_stats","payload":{},"token":"t"}"#).unwrap();
        assert!(matches!(f, ClientFrame::Publish { token: Some(_), .. }));
        let s: ServerFrame =
            serde_json::from_str(r#"{"topic":"global_stats","seq":1,"ts":5,"payload":{"remaining":1,"proposed":2}}"#)
                .unwrap();
        assert!(matches!(s, ServerFrame::Envelope(Envelope { seq: 1, .. })));
        let s: ServerFrame = serde_json::from_str(r#"{"error":"nope"}"#).unwrap();
        assert_eq!(s, ServerFrame::Reply(ReplyFrame::Error { error: "nope".into() }));
    }
}
