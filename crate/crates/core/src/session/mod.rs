//! The workshop session: station flow, brick-driven queries and proposals,
//! the campaign-wide countdown, and the discussion log.
//!
//! [`SessionEngine`] is the single writer. Every accepted [`Command`]
//! advances `seq` by one and yields [`Delta`]s for the display topics; a
//! rejected command leaves the state untouched. The state carries no wall
//! clock, so replaying the same commands reproduces the same
//! [`SessionEngine::state_hash`].

mod campaign;
mod data;
mod script;

pub use campaign::{CampaignFile, SessionTotal};
pub use data::{DataError, District, WorkshopData};
pub use script::{read_script, write_header, Script, ScriptError, SessionHeader, SessionLog};

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geom::PlanarPoint;
use crate::parcels::Parcel;
use crate::suitability::{ParcelAssessment, SuitabilityClass};
use crate::tangible::{BrickAction, BrickEvent, BrickType, GridCell, GridSpec};
use crate::topics::{
    ChangeKind, DetailKind, DistrictStatePayload, GlobalStatsPayload, GridDims, MapExtentsPayload,
    ParcelDetailPayload, ProposalChange, ProposalsPayload, TargetStatus, Topic,
};

/// Campaign-wide accommodation goal.
pub const DEFAULT_TARGET_TOTAL: i64 = 20_000;
/// Display scale of the district station.
pub const DISTRICT_SCALE: f64 = 750.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Station {
    CityOverview,
    District,
    Neighborhood,
}

/// Which edge of the district an extent crosses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    West,
    East,
    South,
    North,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::West => "west",
            Side::East => "east",
            Side::South => "south",
            Side::North => "north",
        })
    }
}

/// A rectangular map window with its display scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawExtent")]
pub struct MapExtent {
    pub min: PlanarPoint,
    pub max: PlanarPoint,
    pub scale_denominator: f64,
}

#[derive(Deserialize)]
struct RawExtent {
    min: PlanarPoint,
    max: PlanarPoint,
    #[serde(default = "default_scale")]
    scale_denominator: f64,
}

fn default_scale() -> f64 {
    DISTRICT_SCALE
}

impl TryFrom<RawExtent> for MapExtent {
    type Error = String;
    fn try_from(r: RawExtent) -> Result<Self, String> {
        MapExtent::new(r.min, r.max, r.scale_denominator).ok_or_else(|| "extent needs finite min < max on both axes and a positive scale".to_string())
    }
}

impl MapExtent {
    pub fn new(min: PlanarPoint, max: PlanarPoint, scale_denominator: f64) -> Option<Self> {
        let ok = min.is_finite()
            && max.is_finite()
            && min.x < max.x
            && min.y < max.y
            && scale_denominator.is_finite()
            && scale_denominator > 0.0;
        ok.then_some(Self { min, max, scale_denominator })
    }

    pub(crate) fn with_scale(min: PlanarPoint, max: PlanarPoint, scale_denominator: f64) -> Self {
        Self { min, max, scale_denominator }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    /// First side on which `inner` leaves `self`, if any.
    pub fn overflow(&self, inner: &MapExtent) -> Option<Side> {
        if inner.min.x < self.min.x {
            Some(Side::West)
        } else if inner.max.x > self.max.x {
            Some(Side::East)
        } else if inner.min.y < self.min.y {
            Some(Side::South)
        } else if inner.max.y > self.max.y {
            Some(Side::North)
        } else {
            None
        }
    }
}

/// Binding of the brick grid onto a map extent. Row 0 is the north edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMapping {
    pub grid: GridSpec,
    pub extent: MapExtent,
}

impl GridMapping {
    pub fn cell_center(&self, cell: GridCell) -> PlanarPoint {
        let (rows, cols) = (self.grid.rows() as f64, self.grid.cols() as f64);
        PlanarPoint::new(
            self.extent.min.x + (cell.col as f64 + 0.5) * self.extent.width() / cols,
            self.extent.max.y - (cell.row as f64 + 0.5) * self.extent.height() / rows,
        )
    }

    /// The cell whose square contains `p`, if it lies on the grid.
    pub fn cell_at(&self, p: PlanarPoint) -> Option<GridCell> {
        let fx = (p.x - self.extent.min.x) / self.extent.width();
        let fy = (self.extent.max.y - p.y) / self.extent.height();
        if !(0.0..1.0).contains(&fx) || !(0.0..1.0).contains(&fy) {
            return None;
        }
        let col = (fx * self.grid.cols() as f64).floor() as u32;
        let row = (fy * self.grid.rows() as f64).floor() as u32;
        Some(GridCell::new(row, col))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalStatus {
    Suggested,
    Withdrawn,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub id: String,
    pub parcel_id: String,
    pub capacity: u32,
    pub suitability_at_placement: SuitabilityClass,
    pub created_seq: u64,
    pub status: ProposalStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stance {
    Pro,
    Con,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub parcel_id: String,
    pub stance: Stance,
    pub text: String,
    pub created_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestrictionShare {
    pub layer: String,
    pub coverage: f64,
}

/// What the detail panel shows for one parcel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParcelDetail {
    pub parcel_id: String,
    pub area_m2: f64,
    pub designation: String,
    pub city_owned: bool,
    /// Labels from the parcel's `regulations` attribute.
    #[serde(default)]
    pub regulations: Vec<String>,
    #[serde(default)]
    pub restrictions: Vec<RestrictionShare>,
    pub suitability: SuitabilityClass,
    pub high_coverage: f64,
    pub less_coverage: f64,
    pub capacity: u32,
    #[serde(default)]
    pub attributes: BTreeMap<String, Value>,
}

impl ParcelDetail {
    pub fn from_assessment(parcel: &Parcel, a: &ParcelAssessment) -> Self {
        let regulations = match parcel.attributes().get("regulations") {
            Some(Value::Array(items)) => items.iter().filter_map(|v| v.as_str().map(str::to_string)).collect(),
            Some(Value::String(s)) => vec![s.clone()],
            _ => Vec::new(),
        };
        Self {
            parcel_id: parcel.id().to_string(),
            area_m2: parcel.area_m2(),
            designation: parcel.designation().to_string(),
            city_owned: parcel.city_owned(),
            regulations,
            restrictions: a
                .restrictions
                .iter()
                .map(|(layer, coverage)| RestrictionShare { layer: layer.clone(), coverage: *coverage })
                .collect(),
            suitability: a.assessment.class,
            high_coverage: a.assessment.high_coverage,
            less_coverage: a.assessment.less_coverage,
            capacity: a.assessment.capacity,
            attributes: parcel.attributes().clone(),
        }
    }
}

/// A brick currently on the table, and the proposal it created if any.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrickRecord {
    pub anchor: GridCell,
    pub brick: BrickType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal_id: Option<String>,
}

/// The replicated session truth. No wall-clock fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub district_id: String,
    pub station: Station,
    pub focus: Option<MapExtent>,
    pub grid_mapping: Option<GridMapping>,
    pub target_total: i64,
    /// Capacity suggested by earlier sessions of the campaign.
    pub campaign_prior: i64,
    pub prior_by_district: BTreeMap<String, i64>,
    pub district_population: u64,
    pub district_refugees: u64,
    pub proposals: Vec<Proposal>,
    pub bricks: Vec<BrickRecord>,
    pub log: Vec<LogEntry>,
    pub seq: u64,
}

impl SessionState {
    pub fn active(&self) -> impl Iterator<Item = &Proposal> {
        self.proposals.iter().filter(|p| p.status == ProposalStatus::Suggested)
    }

    /// Active capacity proposed in this session.
    pub fn session_proposed(&self) -> i64 {
        self.active().map(|p| p.capacity as i64).sum()
    }

    /// Campaign-wide proposed capacity.
    pub fn proposed(&self) -> i64 {
        self.campaign_prior + self.session_proposed()
    }

    pub fn remaining(&self) -> i64 {
        self.target_total - self.proposed()
    }

    pub fn target_status(&self) -> TargetStatus {
        TargetStatus::of_remaining(self.remaining())
    }
}

/// Operator and table inputs, one per line in session logs and scripts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum Command {
    /// City overview to district station.
    Advance,
    SelectFocus { extent: MapExtent },
    ReturnToDistrict,
    Brick(BrickEvent),
    Comment { parcel_id: String, stance: Stance, text: String },
    Withdraw { proposal_id: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("unknown district {0:?}")]
    UnknownDistrict(String),
    #[error("cannot {action} at the {station:?} station")]
    Transition { action: &'static str, station: Station },
    #[error("focus extent leaves the district on the {0} side")]
    ExtentOutside(Side),
    #[error("anchor {0:?} is outside the grid")]
    OutOfGrid(GridCell),
    #[error("moved event without a source anchor")]
    MissingFrom,
    #[error("no {brick} brick at {at:?}")]
    NoBrick { brick: BrickType, at: GridCell },
    #[error("cell {0:?} already holds a brick")]
    Occupied(GridCell),
    #[error("housing capacity {0} is not an available denomination")]
    Denomination(u32),
    #[error("unknown parcel {0:?}")]
    UnknownParcel(String),
    #[error("comment text is empty")]
    EmptyComment,
    #[error("no active proposal {0:?}")]
    UnknownProposal(String),
}

/// A state change addressed to one display topic.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Delta {
    MapExtents(MapExtentsPayload),
    GlobalStats(GlobalStatsPayload),
    DistrictState(DistrictStatePayload),
    Proposals(ProposalsPayload),
    ParcelDetail(ParcelDetailPayload),
}

impl Delta {
    pub fn topic(&self) -> Topic {
        match self {
            Delta::MapExtents(_) => Topic::MapExtents,
            Delta::GlobalStats(_) => Topic::GlobalStats,
            Delta::DistrictState(_) => Topic::DistrictState,
            Delta::Proposals(_) => Topic::Proposals,
            Delta::ParcelDetail(_) => Topic::ParcelDetail,
        }
    }

    pub fn payload(&self) -> Value {
        serde_json::to_value(self).expect("payloads serialize")
    }
}

/// Parameters of [`SessionEngine::start`].
#[derive(Debug, Clone, PartialEq)]
pub struct SessionStart {
    pub session_id: String,
    pub district_id: String,
    pub target_total: i64,
    pub campaign_prior: i64,
    pub prior_by_district: BTreeMap<String, i64>,
}

impl SessionStart {
    pub fn new(session_id: impl Into<String>, district_id: impl Into<String>) -> Self {
        Self {
            session_id: session_id.into(),
            district_id: district_id.into(),
            target_total: DEFAULT_TARGET_TOTAL,
            campaign_prior: 0,
            prior_by_district: BTreeMap::new(),
        }
    }

    pub fn target(mut self, target_total: i64) -> Self {
        self.target_total = target_total;
        self
    }

    pub fn prior(mut self, campaign_prior: i64) -> Self {
        self.campaign_prior = campaign_prior;
        self
    }
}

/// One exported suggestion: the proposal, its parcel detail, and the
/// discussion about that parcel in log order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub session_id: String,
    pub district_id: String,
    pub proposal: Proposal,
    pub detail: ParcelDetail,
    #[serde(default)]
    pub comments: Vec<LogEntry>,
}

/// The single writer of a [`SessionState`].
#[derive(Debug, Clone)]
pub struct SessionEngine {
    data: Arc<WorkshopData>,
    state: SessionState,
}

impl SessionEngine {
    pub fn start(data: Arc<WorkshopData>, start: SessionStart) -> Result<Self, SessionError> {
        let district = data.district(&start.district_id).ok_or_else(|| SessionError::UnknownDistrict(start.district_id.clone()))?;
        let state = SessionState {
            session_id: start.session_id,
            district_id: start.district_id.clone(),
            station: Station::CityOverview,
            focus: None,
            grid_mapping: None,
            target_total: start.target_total,
            campaign_prior: start.campaign_prior,
            prior_by_district: start.prior_by_district,
            district_population: district.population,
            district_refugees: district.refugees,
            proposals: Vec::new(),
            bricks: Vec::new(),
            log: Vec::new(),
            seq: 0,
        };
        Ok(Self { data, state })
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn data(&self) -> &Arc<WorkshopData> {
        &self.data
    }

    pub fn remaining(&self) -> i64 {
        self.state.remaining()
    }

    /// SHA-256 over the canonical JSON of the state, hex encoded.
    pub fn state_hash(&self) -> String {
        state_hash(&self.state)
    }

    fn district(&self) -> &District {
        self.data.district(&self.state.district_id).expect("district checked at start")
    }

    /// Current value of every topic, for displays joining mid-session.
    pub fn snapshot(&self) -> Vec<Delta> {
        vec![
            self.map_delta(),
            self.stats_delta(),
            self.district_delta(),
            self.proposals_delta(Vec::new()),
        ]
    }

    pub fn apply(&mut self, cmd: &Command) -> Result<Vec<Delta>, SessionError> {
        let mut next = self.state.clone();
        next.seq += 1;
        let mut out = Step::default();
        match cmd {
            Command::Advance => {
                if next.station != Station::CityOverview {
                    return Err(SessionError::Transition { action: "advance", station: next.station });
                }
                next.station = Station::District;
                out.view = true;
            }
            Command::SelectFocus { extent } => self.select_focus(&mut next, *extent, &mut out)?,
            Command::ReturnToDistrict => {
                if next.station != Station::Neighborhood {
                    return Err(SessionError::Transition { action: "return to district", station: next.station });
                }
                next.station = Station::District;
                next.focus = None;
                next.grid_mapping = None;
                // leaving the table lifts every brick; proposals stay
                next.bricks.clear();
                out.view = true;
            }
            Command::Brick(ev) => self.brick(&mut next, ev, &mut out)?,
            Command::Comment { parcel_id, stance, text } => {
                if self.data.parcels().get(parcel_id).is_none() {
                    return Err(SessionError::UnknownParcel(parcel_id.clone()));
                }
                if text.trim().is_empty() {
                    return Err(SessionError::EmptyComment);
                }
                next.log.push(LogEntry {
                    parcel_id: parcel_id.clone(),
                    stance: *stance,
                    text: text.clone(),
                    created_seq: next.seq,
                });
                out.detail = Some(self.detail_payload(&next, DetailKind::Comment, Some(parcel_id), None, None, None));
            }
            Command::Withdraw { proposal_id } => {
                let p = next
                    .proposals
                    .iter_mut()
                    .find(|p| p.id == *proposal_id && p.status == ProposalStatus::Suggested)
                    .ok_or_else(|| SessionError::UnknownProposal(proposal_id.clone()))?;
                p.status = ProposalStatus::Withdrawn;
                out.changes.push(change(ChangeKind::Withdrawn, p, None));
                for b in next.bricks.iter_mut().filter(|b| b.proposal_id.as_deref() == Some(proposal_id)) {
                    b.proposal_id = None;
                }
                out.totals = true;
            }
        }
        self.state = next;
        Ok(self.emit(out))
    }

    fn select_focus(&self, next: &mut SessionState, extent: MapExtent, out: &mut Step) -> Result<(), SessionError> {
        if next.station != Station::District {
            return Err(SessionError::Transition { action: "select a focus area", station: next.station });
        }
        if let Some(side) = self.district().bounds.overflow(&extent) {
            return Err(SessionError::ExtentOutside(side));
        }
        next.station = Station::Neighborhood;
        next.focus = Some(extent);
        next.grid_mapping = Some(GridMapping { grid: self.data.grid(), extent });
        out.view = true;
        Ok(())
    }

    fn brick(&self, next: &mut SessionState, ev: &BrickEvent, out: &mut Step) -> Result<(), SessionError> {
        if next.station != Station::Neighborhood {
            return Err(SessionError::Transition { action: "apply brick events", station: next.station });
        }
        let mapping = next.grid_mapping.expect("neighborhood station has a mapping");
        let grid = mapping.grid;
        if !grid.contains(ev.at) {
            return Err(SessionError::OutOfGrid(ev.at));
        }
        if let BrickType::Housing { capacity } = ev.brick {
            if !self.data.denominations().contains(&capacity) {
                return Err(SessionError::Denomination(capacity));
            }
        }
        match ev.action {
            BrickAction::Placed => self.lift_check(next, ev.at)?,
            BrickAction::Removed => self.lift(next, ev.brick, ev.at, out)?,
            BrickAction::Moved => {
                let from = ev.from.ok_or(SessionError::MissingFrom)?;
                if !grid.contains(from) {
                    return Err(SessionError::OutOfGrid(from));
                }
                self.lift(next, ev.brick, from, out)?;
                self.lift_check(next, ev.at)?;
            }
        }
        if ev.action == BrickAction::Removed {
            return Ok(());
        }

        let point = mapping.cell_center(ev.at);
        let parcel = self.data.parcels().locate_point(point).map(|p| p.id().to_string());
        let mut record = BrickRecord { anchor: ev.at, brick: ev.brick, proposal_id: None };
        match (ev.brick, parcel) {
            (BrickType::Marker, Some(pid)) => {
                out.detail = Some(self.detail_payload(next, DetailKind::Detail, Some(&pid), Some(ev.at), Some(point), None));
            }
            (_, None) => {
                out.detail = Some(self.detail_payload(next, DetailKind::NoParcel, None, Some(ev.at), Some(point), Some("no parcel here".into())));
                if let BrickType::Housing { capacity } = ev.brick {
                    out.changes.push(ProposalChange {
                        kind: ChangeKind::Rejected,
                        proposal_id: None,
                        parcel_id: None,
                        capacity: Some(capacity),
                        reason: Some("no parcel under the brick".into()),
                        warning: None,
                    });
                }
            }
            (BrickType::Housing { capacity }, Some(pid)) => {
                let existing = next.active().find(|p| p.parcel_id == pid).map(|p| p.id.clone());
                if let Some(existing) = existing {
                    out.changes.push(ProposalChange {
                        kind: ChangeKind::Rejected,
                        proposal_id: None,
                        parcel_id: Some(pid.clone()),
                        capacity: Some(capacity),
                        reason: Some(format!("parcel already has active proposal {existing}")),
                        warning: None,
                    });
                } else {
                    let class = self.data.assessment(&pid).map(|a| a.assessment.class).expect("assessed");
                    let id = format!("{}-{:03}", next.session_id, next.proposals.len() + 1);
                    let proposal = Proposal {
                        id: id.clone(),
                        parcel_id: pid,
                        capacity,
                        suitability_at_placement: class,
                        created_seq: next.seq,
                        status: ProposalStatus::Suggested,
                    };
                    let warning = (class != SuitabilityClass::LowUnsuitability)
                        .then(|| format!("parcel has a {} indication of unsuitability", class.label()));
                    out.changes.push(change(ChangeKind::Created, &proposal, warning));
                    next.proposals.push(proposal);
                    record.proposal_id = Some(id);
                    out.totals = true;
                }
            }
        }
        next.bricks.push(record);
        next.bricks.sort_by_key(|b| b.anchor);
        Ok(())
    }

    fn lift_check(&self, next: &SessionState, at: GridCell) -> Result<(), SessionError> {
        if next.bricks.iter().any(|b| b.anchor == at) {
            return Err(SessionError::Occupied(at));
        }
        Ok(())
    }

    /// Take a brick off the table, withdrawing its proposal.
    fn lift(&self, next: &mut SessionState, brick: BrickType, at: GridCell, out: &mut Step) -> Result<(), SessionError> {
        let i = next
            .bricks
            .iter()
            .position(|b| b.anchor == at && b.brick == brick)
            .ok_or(SessionError::NoBrick { brick, at })?;
        let rec = next.bricks.remove(i);
        if let Some(pid) = rec.proposal_id {
            if let Some(p) = next.proposals.iter_mut().find(|p| p.id == pid && p.status == ProposalStatus::Suggested) {
                p.status = ProposalStatus::Withdrawn;
                out.changes.push(change(ChangeKind::Withdrawn, p, None));
                out.totals = true;
            }
        }
        Ok(())
    }

    fn emit(&self, step: Step) -> Vec<Delta> {
        let mut v = Vec::new();
        if step.view {
            v.push(self.map_delta());
        }
        if !step.changes.is_empty() {
            v.push(self.proposals_delta(step.changes));
        }
        if step.totals {
            v.push(self.stats_delta());
        }
        if step.view || step.totals {
            v.push(self.district_delta());
        }
        if let Some(d) = step.detail {
            v.push(Delta::ParcelDetail(d));
        }
        v
    }

    fn map_delta(&self) -> Delta {
        let s = &self.state;
        let (extent, grid) = match s.station {
            Station::CityOverview => (self.data.city_extent(), None),
            Station::District => (self.district().bounds, None),
            Station::Neighborhood => {
                let m = s.grid_mapping.expect("mapping bound");
                (m.extent, Some(GridDims { rows: m.grid.rows(), cols: m.grid.cols() }))
            }
        };
        Delta::MapExtents(MapExtentsPayload {
            station: s.station,
            extent,
            grid,
            district_id: Some(s.district_id.clone()),
        })
    }

    fn stats_delta(&self) -> Delta {
        let s = &self.state;
        let mut per_district = s.prior_by_district.clone();
        *per_district.entry(s.district_id.clone()).or_insert(0) += s.session_proposed();
        Delta::GlobalStats(GlobalStatsPayload {
            remaining: s.remaining(),
            proposed: s.proposed(),
            target_total: Some(s.target_total),
            status: Some(s.target_status()),
            active_proposals: Some(s.active().count() as u64),
            per_district: Some(per_district),
        })
    }

    fn district_delta(&self) -> Delta {
        let s = &self.state;
        let d = self.district();
        Delta::DistrictState(DistrictStatePayload {
            district_id: d.id.clone(),
            station: s.station,
            name: Some(d.name.clone()),
            population: Some(d.population),
            refugees: Some(d.refugees),
            proposed: Some(s.session_proposed()),
            active_proposals: Some(s.active().count() as u64),
        })
    }

    fn proposals_delta(&self, changes: Vec<ProposalChange>) -> Delta {
        Delta::Proposals(ProposalsPayload {
            session_id: Some(self.state.session_id.clone()),
            active: self.state.active().cloned().collect(),
            changes,
        })
    }

    fn detail_payload(
        &self,
        s: &SessionState,
        kind: DetailKind,
        parcel_id: Option<&str>,
        at: Option<GridCell>,
        point: Option<PlanarPoint>,
        message: Option<String>,
    ) -> ParcelDetailPayload {
        let detail = parcel_id.and_then(|id| self.data.detail(id));
        let log = parcel_id
            .map(|id| s.log.iter().filter(|e| e.parcel_id == id).cloned().collect())
            .unwrap_or_default();
        ParcelDetailPayload { kind, at, point, detail, log, message }
    }

    /// Parcel detail for a point, as a Marker query would show it.
    pub fn query(&self, p: PlanarPoint) -> Option<ParcelDetail> {
        let parcel = self.data.parcels().locate_point(p)?;
        self.data.detail(parcel.id())
    }

    /// Active proposals with detail snapshots and comments, by creation.
    pub fn export_suggestions(&self) -> Vec<Suggestion> {
        let s = &self.state;
        let mut v: Vec<Suggestion> = s
            .active()
            .map(|p| Suggestion {
                session_id: s.session_id.clone(),
                district_id: s.district_id.clone(),
                proposal: p.clone(),
                detail: self.data.detail(&p.parcel_id).expect("proposal parcel exists"),
                comments: s.log.iter().filter(|e| e.parcel_id == p.parcel_id).cloned().collect(),
            })
            .collect();
        v.sort_by_key(|x| x.proposal.created_seq);
        v
    }

    /// All comments grouped by parcel id, each group in log order.
    pub fn comments_by_parcel(&self) -> BTreeMap<String, Vec<LogEntry>> {
        let mut m: BTreeMap<String, Vec<LogEntry>> = BTreeMap::new();
        for e in &self.state.log {
            m.entry(e.parcel_id.clone()).or_default().push(e.clone());
        }
        m
    }
}

#[derive(Default)]
struct Step {
    view: bool,
    totals: bool,
    changes: Vec<ProposalChange>,
    detail: Option<ParcelDetailPayload>,
}

fn change(kind: ChangeKind, p: &Proposal, warning: Option<String>) -> ProposalChange {
    ProposalChange {
        kind,
        proposal_id: Some(p.id.clone()),
        parcel_id: Some(p.parcel_id.clone()),
        capacity: Some(p.capacity),
        reason: None,
        warning,
    }
}

pub fn state_hash(state: &SessionState) -> String {
    let bytes = serde_json::to_vec(state).expect("state serializes");
    hex::encode(Sha256::digest(bytes))
}

/// Write suggestions as NDJSON.
pub fn write_suggestions<W: std::io::Write>(mut w: W, items: &[Suggestion]) -> std::io::Result<()> {
    for s in items {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_suggestions<R: std::io::BufRead>(r: R) -> std::io::Result<Vec<Suggestion>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1))
        })?);
    }
    Ok(out)
}
