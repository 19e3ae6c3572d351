//! A scripted campaign over a generated city: one workshop per district,
//! with suggestions planted so the screening funnel has a known outcome.
//!
//! Every suggestion gets an expected outcome first. Parcels are then picked
//! to fit it (recommended ones need no highly restrictive cover and room
//! for the brick, future ones get a brick larger than the parcel holds),
//! and attributes are planted to trigger the intended rule. The scripts
//! also exercise queries, comments, a moved brick, a brick on open ground
//! and a second brick on an already proposed parcel.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{generate, parse_layer_spec, pretty, City, CityParams, SynthError};
use crate::screening::{FunnelCounts, RuleSet};
use crate::session::{
    Command, GridMapping, MapExtent, Script, SessionHeader, Stance, DEFAULT_TARGET_TOTAL,
};
use crate::suitability::{capacity, SuitabilityConfig};
use crate::tangible::{BrickEvent, BrickType, GridCell, GridSpec, LookupTable};

pub const DEMO_SEED: u64 = 2016;
pub const DEMO_PARCELS: usize = 504;
pub const DEMO_LAYERS: &str = "conservation:high,cemetery:high,park:less,noise:less";

/// Expected funnel of the demo campaign.
pub const DEMO_FUNNEL: FunnelCounts = FunnelCounts {
    suggested: 161,
    rejected_initial: 117,
    feasible: 44,
    excluded_detailed: 24,
    recommended: 6,
    future: 14,
};

/// Bricks of the demo campaign, as (capacity, count). 24 050 places.
const DEMO_BRICKS: [(u32, usize); 6] = [(1500, 1), (1000, 2), (500, 19), (250, 11), (100, 53), (40, 75)];
const RECOMMENDED_BRICK: u32 = 100;
const FUTURE_BRICKS: [(u32, usize); 3] = [(1500, 1), (1000, 2), (500, 11)];

const FOCUS_SCALE: f64 = 500.0;

const RULES: &str = r#"{
  "attributes": {
    "planned_use": "string",
    "adjacent_use": "string",
    "contaminated": "bool",
    "hazard_distance_m": "number"
  },
  "rules": [
    {"name": "reserved_for_other_use", "stage": "initial", "reason": "other_land_use",
     "when": {"attr": "planned_use", "op": "ne", "value": "none"}},
    {"name": "park_or_playground", "stage": "initial", "reason": "direct_use_conflict",
     "when": {"any": [{"restriction": "park", "op": "ge", "value": 0.5},
                      {"attr": "adjacent_use", "op": "in", "value": ["park", "playground"]}]}},
    {"name": "protected_area", "stage": "initial", "reason": "other_land_use",
     "when": {"field": "high_coverage", "op": "ge", "value": 0.5}},
    {"name": "contaminated_soil", "stage": "detailed", "reason": "technical_structural",
     "when": {"attr": "contaminated", "op": "eq", "value": true}},
    {"name": "hazard_zone", "stage": "detailed", "reason": "technical_structural",
     "when": {"attr": "hazard_distance_m", "op": "lt", "value": 150}}
  ],
  "readiness": {"all": [
    {"field": "capacity_margin", "op": "ge", "value": 0},
    {"field": "high_coverage", "op": "eq", "value": 0},
    {"field": "less_coverage", "op": "lt", "value": 0.5}
  ]}
}"#;

const OTHER_USES: [&str; 4] = ["school", "sports_ground", "road_widening", "fire_station"];
const COMMENTS: [(Stance, &str); 4] = [
    (Stance::Pro, "close to the tram stop"),
    (Stance::Con, "the lot floods after heavy rain"),
    (Stance::Pro, "neighbours asked for this site"),
    (Stance::Con, "access road is too narrow"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Category {
    Initial,
    Detailed,
    Recommended,
    Future,
}

/// What screening should make of one suggested parcel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ExpectedOutcome {
    RejectedInitial { rule: String },
    ExcludedDetailed { rule: String },
    Recommended,
    FutureConsideration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignTruth {
    pub funnel: FunnelCounts,
    pub target_total: i64,
    pub total_proposed: i64,
    pub remaining: i64,
    /// Active capacity per district after its session.
    pub per_district: BTreeMap<String, i64>,
    /// Keyed by parcel id; each parcel carries at most one suggestion.
    pub outcomes: BTreeMap<String, ExpectedOutcome>,
}

#[derive(Debug, Clone)]
pub struct Campaign {
    pub city: City,
    pub rules: RuleSet,
    pub table: LookupTable,
    pub scripts: Vec<Script>,
    pub truth: CampaignTruth,
}

/// The bundled demo scenario.
pub fn demo() -> Result<Campaign, SynthError> {
    let layers = parse_layer_spec(DEMO_LAYERS)?;
    let city = generate(&CityParams::new(DEMO_SEED, DEMO_PARCELS, layers))?;
    plant_campaign(city, DEMO_SEED, GridSpec::default())
}

struct Target {
    parcel: String,
    category: Category,
    brick: u32,
    window: usize,
    cells: Vec<GridCell>,
}

/// Plant the demo funnel on `city`, one session per district in id order.
pub fn plant_campaign(mut city: City, seed: u64, grid: GridSpec) -> Result<Campaign, SynthError> {
    let rules = RuleSet::from_json(RULES).expect("built-in rules are valid");
    let table = LookupTable::default_table();
    let cfg = SuitabilityConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let nd = city.districts.len();
    let f = DEMO_FUNNEL;
    if nd == 0 || f.suggested % nd != 0 {
        return Err(SynthError::Campaign(format!("{} suggestions do not split over {nd} districts", f.suggested)));
    }

    let mut labels: Vec<Category> = [
        (Category::Initial, f.rejected_initial),
        (Category::Detailed, f.excluded_detailed),
        (Category::Recommended, f.recommended),
        (Category::Future, f.future),
    ]
    .iter()
    .flat_map(|&(c, n)| std::iter::repeat(c).take(n))
    .collect();
    labels.shuffle(&mut rng);

    let mut future_bricks = expand(&FUTURE_BRICKS);
    future_bricks.shuffle(&mut rng);
    let mut rest = expand(&DEMO_BRICKS);
    for b in future_bricks.iter().copied().chain(std::iter::repeat(RECOMMENDED_BRICK).take(f.recommended)) {
        let i = rest.iter().position(|&x| x == b).expect("brick multiset covers the fixed bricks");
        rest.remove(i);
    }
    rest.shuffle(&mut rng);

    let parcel_set = city.parcel_set();
    let ledger: BTreeMap<String, super::LedgerParcel> =
        city.ledger.parcels.iter().map(|p| (p.id.clone(), p.clone())).collect();
    let height = city.lots.1 as f64 * super::PITCH_MM as f64 / 1000.0;

    let mut scripts = Vec::with_capacity(nd);
    let mut outcomes = BTreeMap::new();
    let mut per_district = BTreeMap::new();
    let mut planted: BTreeMap<String, Vec<(&'static str, serde_json::Value)>> = BTreeMap::new();
    let mut prior = 0i64;
    let per = f.suggested / nd;

    for (d, district) in city.districts.clone().iter().enumerate() {
        // focus windows: district-wide squares stacked south to north
        let b = district.bounds;
        let side = b.width().min(height);
        let n_win = (height / side).ceil() as usize;
        let windows: Vec<MapExtent> = (0..n_win)
            .map(|k| {
                let y0 = (k as f64 * side).min(height - side);
                MapExtent::new((b.min.x, y0).into(), (b.min.x + side, y0 + side).into(), FOCUS_SCALE).expect("square")
            })
            .collect();
        let mut cells_of: BTreeMap<String, (usize, Vec<GridCell>)> = BTreeMap::new();
        let mut open_ground: Vec<(usize, GridCell)> = Vec::new();
        for (w, ext) in windows.iter().enumerate() {
            let m = GridMapping { grid, extent: *ext };
            for r in 0..grid.rows().saturating_sub(1) {
                for c in 0..grid.cols().saturating_sub(1) {
                    let cell = GridCell::new(r as u32, c as u32);
                    match parcel_set.locate_point(m.cell_center(cell)) {
                        Some(p) => {
                            let e = cells_of.entry(p.id().to_string()).or_insert((w, Vec::new()));
                            if e.0 == w {
                                e.1.push(cell);
                            }
                        }
                        None => open_ground.push((w, cell)),
                    }
                }
            }
        }

        let mut candidates: Vec<String> = cells_of.keys().cloned().collect();
        candidates.shuffle(&mut rng);
        let mut cats: Vec<Category> = labels[d * per..(d + 1) * per].to_vec();
        // strictest first
        cats.sort_by_key(|c| std::cmp::Reverse(*c));
        let mut targets: Vec<Target> = Vec::new();
        let mut used: BTreeSet<String> = BTreeSet::new();
        for cat in cats {
            let pick = candidates.iter().find(|id| {
                let l = &ledger[*id];
                let park = l.layer_coverage.get("park").copied().unwrap_or(0.0);
                let clean = l.high_coverage < 0.5 && park < 0.5;
                let cap = capacity(l.area_m2, l.high_coverage, &cfg);
                !used.contains(*id)
                    && match cat {
                        Category::Recommended => l.high_coverage == 0.0 && l.less_coverage < 0.5 && park < 0.5 && cap >= RECOMMENDED_BRICK,
                        Category::Future | Category::Detailed => clean,
                        Category::Initial => true,
                    }
            });
            let Some(id) = pick.cloned() else {
                return Err(SynthError::Campaign(format!("district {} has no parcel left for a {cat:?} suggestion", district.id)));
            };
            used.insert(id.clone());
            let brick = match cat {
                Category::Recommended => RECOMMENDED_BRICK,
                Category::Future => future_bricks.pop().expect("future bricks"),
                _ => rest.pop().expect("bricks"),
            };
            let (window, cells) = cells_of[&id].clone();
            targets.push(Target { parcel: id, category: cat, brick, window, cells });
        }
        targets.shuffle(&mut rng);
        targets.sort_by_key(|t| t.window);

        for t in &targets {
            let l = &ledger[&t.parcel];
            let park = l.layer_coverage.get("park").copied().unwrap_or(0.0);
            let attrs = planted.entry(t.parcel.clone()).or_default();
            let outcome = match t.category {
                Category::Initial => {
                    let rule = if park >= 0.5 {
                        "park_or_playground"
                    } else if l.high_coverage >= 0.5 && rng.gen_bool(0.5) {
                        "protected_area"
                    } else if rng.gen_bool(0.6) {
                        attrs.push(("planned_use", json!(OTHER_USES.choose(&mut rng).unwrap())));
                        "reserved_for_other_use"
                    } else {
                        attrs.push(("adjacent_use", json!(if rng.gen_bool(0.5) { "park" } else { "playground" })));
                        "park_or_playground"
                    };
                    ExpectedOutcome::RejectedInitial { rule: rule.into() }
                }
                Category::Detailed => {
                    let rule = if rng.gen_bool(0.5) {
                        attrs.push(("contaminated", json!(true)));
                        "contaminated_soil"
                    } else {
                        attrs.push(("hazard_distance_m", json!(rng.gen_range(20..150))));
                        "hazard_zone"
                    };
                    ExpectedOutcome::ExcludedDetailed { rule: rule.into() }
                }
                Category::Recommended => ExpectedOutcome::Recommended,
                Category::Future => ExpectedOutcome::FutureConsideration,
            };
            outcomes.insert(t.parcel.clone(), outcome);
        }

        let session_id = format!("{}-ws", district.id);
        let header = SessionHeader {
            session_id: session_id.clone(),
            district_id: district.id.clone(),
            target_total: DEFAULT_TARGET_TOTAL,
            campaign_prior: prior,
            prior_by_district: per_district.clone(),
        };
        let commands = session_commands(&mut rng, &windows, &targets, &open_ground, &cells_of, &used);
        let total: i64 = targets.iter().map(|t| t.brick as i64).sum();
        prior += total;
        per_district.insert(district.id.clone(), total);
        scripts.push(Script { header, commands });
    }

    for p in city.parcels.iter_mut() {
        if let Some(attrs) = planted.get(p.id()) {
            for (k, v) in attrs {
                *p = p.clone().with_attribute(*k, v.clone());
            }
        }
    }

    Ok(Campaign {
        city,
        rules,
        table,
        scripts,
        truth: CampaignTruth {
            funnel: f,
            target_total: DEFAULT_TARGET_TOTAL,
            total_proposed: prior,
            remaining: DEFAULT_TARGET_TOTAL - prior,
            per_district,
            outcomes,
        },
    })
}

fn expand(spec: &[(u32, usize)]) -> Vec<u32> {
    spec.iter().flat_map(|&(c, n)| std::iter::repeat(c).take(n)).collect()
}

fn far_from(cell: GridCell, taken: &[GridCell]) -> bool {
    taken.iter().all(|t| t.row.abs_diff(cell.row).max(t.col.abs_diff(cell.col)) >= 3)
}

/// A cell of the parcel whose 2x2 footprint keeps clear of earlier bricks.
fn anchor(cells: &[GridCell], taken: &[GridCell]) -> Option<GridCell> {
    cells
        .iter()
        .find(|c| far_from(**c, taken))
        .or_else(|| cells.iter().find(|c| !taken.contains(c)))
        .copied()
}

fn session_commands(
    rng: &mut ChaCha8Rng,
    windows: &[MapExtent],
    targets: &[Target],
    open_ground: &[(usize, GridCell)],
    cells_of: &BTreeMap<String, (usize, Vec<GridCell>)>,
    used: &BTreeSet<String>,
) -> Vec<Command> {
    let mut out = vec![Command::Advance];
    let mut seq = 0u64;
    let mut next_seq = || {
        seq += 1;
        seq
    };
    let mut extras_done = false;
    for (w, ext) in windows.iter().enumerate() {
        let here: Vec<&Target> = targets.iter().filter(|t| t.window == w).collect();
        if here.is_empty() {
            continue;
        }
        out.push(Command::SelectFocus { extent: *ext });
        let mut taken: Vec<GridCell> = Vec::new();
        let mut placed: Vec<(BrickType, GridCell, &Target)> = Vec::new();
        for t in &here {
            let at = anchor(&t.cells, &taken).expect("parcel has a free cell");
            taken.push(at);
            let brick = BrickType::housing(t.brick);
            out.push(Command::Brick(BrickEvent::placed(brick, at, next_seq())));
            placed.push((brick, at, t));
        }

        if !extras_done {
            extras_done = true;
            // a Marker query on a parcel nobody proposed
            if let Some((_, (_, cells))) = cells_of.iter().find(|(id, (win, _))| *win == w && !used.contains(*id)) {
                if let Some(at) = anchor(cells, &taken) {
                    out.push(Command::Brick(BrickEvent::placed(BrickType::Marker, at, next_seq())));
                    out.push(Command::Brick(BrickEvent::removed(BrickType::Marker, at, next_seq())));
                }
            }
            let (_, _, t0) = placed[rng.gen_range(0..placed.len())];
            let (stance, text) = COMMENTS[rng.gen_range(0..COMMENTS.len())];
            out.push(Command::Comment { parcel_id: t0.parcel.clone(), stance, text: text.into() });

            // a second brick on a parcel that already has a proposal
            if let Some(&(_, first, t)) = placed.iter().find(|(_, _, t)| t.cells.len() > 1) {
                if let Some(&at) = t.cells.iter().find(|c| **c != first && !taken.contains(c)) {
                    let extra = BrickType::housing(40);
                    out.push(Command::Brick(BrickEvent::placed(extra, at, next_seq())));
                    out.push(Command::Brick(BrickEvent::removed(extra, at, next_seq())));
                }
            }
            // a brick on open ground
            if let Some(&(_, at)) = open_ground.iter().find(|(win, c)| *win == w && !taken.contains(c)) {
                let b = BrickType::housing(250);
                out.push(Command::Brick(BrickEvent::placed(b, at, next_seq())));
                out.push(Command::Brick(BrickEvent::removed(b, at, next_seq())));
            }
            // slide one brick within its parcel
            if let Some(&(brick, from, t)) = placed.iter().rev().find(|(_, _, t)| t.cells.len() > 1) {
                if let Some(&to) = t.cells.iter().find(|c| !taken.contains(c)) {
                    out.push(Command::Brick(BrickEvent::moved(brick, from, to, next_seq())));
                }
            }
        }
        out.push(Command::ReturnToDistrict);
    }
    out
}

impl Campaign {
    /// City files plus `rules.json`, `table.json`, `campaign_truth.json`
    /// and `scripts/NN-<session>.ndjson`.
    pub fn write(&self, dir: impl AsRef<Path>) -> std::io::Result<()> {
        let dir = dir.as_ref();
        self.city.write(dir)?;
        std::fs::write(dir.join("rules.json"), self.rules.to_json() + "\n")?;
        std::fs::write(dir.join("table.json"), self.table.to_json() + "\n")?;
        std::fs::write(dir.join("campaign_truth.json"), pretty(&self.truth))?;
        let sdir = dir.join("scripts");
        std::fs::create_dir_all(&sdir)?;
        for (i, s) in self.scripts.iter().enumerate() {
            let mut buf = Vec::new();
            s.write(&mut buf)?;
            std::fs::write(sdir.join(format!("{:02}-{}.ndjson", i + 1, s.header.session_id)), buf)?;
        }
        Ok(())
    }
}
