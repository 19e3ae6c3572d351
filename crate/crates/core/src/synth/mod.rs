//! Deterministic synthetic cities with a ground-truth ledger.
//!
//! Parcels sit on a 100 m lot grid: rectangles, L shapes, courtyard blocks
//! with a hole, two-part parcels, and pairs of lots sharing an edge. All
//! coordinates are whole millimetres, so every area and every planted
//! restriction coverage is known exactly and recorded in the [`Ledger`].
//!
//! Planted coverages use strips: a highly restrictive strip rising from a
//! parcel's bottom edge, and a less restrictive strip hanging from its top
//! edge, made of two overlapping pieces so the union (not the sum) is what
//! counts.

mod campaign;

pub use campaign::{demo, plant_campaign, Campaign, CampaignTruth, ExpectedOutcome, DEMO_FUNNEL};

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::geom::{PlanarPoint, PolygonShape};
use crate::parcels::{Parcel, ParcelSet, RestrictionLayer, Severity};
use crate::session::{District, MapExtent, DISTRICT_SCALE};

/// Lot pitch in millimetres.
pub const PITCH_MM: i64 = 100_000;
const MARGIN_MM: i64 = 5_000;
const DISTRICT_NAMES: [&str; 7] = ["Harbour", "Riverside", "Parkside", "North", "East", "Marsh", "South"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("invalid layer spec entry {0:?}: expected name:high or name:less")]
    LayerSpec(String),
    #[error("duplicate layer name {0:?}")]
    DuplicateLayer(String),
    #[error("need at least one parcel")]
    NoParcels,
    #[error("need at least one district")]
    NoDistricts,
    #[error("campaign: {0}")]
    Campaign(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub severity: Severity,
}

/// Parse `"conservation:high,cemetery:high,park:less"`.
pub fn parse_layer_spec(spec: &str) -> Result<Vec<LayerSpec>, SynthError> {
    let mut out: Vec<LayerSpec> = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, sev) = item.split_once(':').ok_or_else(|| SynthError::LayerSpec(item.into()))?;
        let valid_name = !name.is_empty()
            && name.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-');
        let severity = match sev {
            "high" => Severity::HighlyRestrictive,
            "less" => Severity::LessRestrictive,
            _ => return Err(SynthError::LayerSpec(item.into())),
        };
        if !valid_name {
            return Err(SynthError::LayerSpec(item.into()));
        }
        if out.iter().any(|l| l.name == name) {
            return Err(SynthError::DuplicateLayer(name.into()));
        }
        out.push(LayerSpec { name: name.into(), severity });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CityParams {
    pub seed: u64,
    pub n_parcels: usize,
    pub layers: Vec<LayerSpec>,
    pub districts: usize,
}

impl CityParams {
    pub fn new(seed: u64, n_parcels: usize, layers: Vec<LayerSpec>) -> Self {
        Self { seed, n_parcels, layers, districts: 7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Rect,
    LShape,
    Courtyard,
    Twin,
    SharedEdge,
}

/// Exact facts about one generated parcel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerParcel {
    pub id: String,
    pub district_id: String,
    pub shape: ShapeKind,
    pub area_m2: f64,
    pub high_coverage: f64,
    pub less_coverage: f64,
    /// Coverage by each layer touching the parcel.
    pub layer_coverage: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    pub seed: u64,
    pub n_parcels: usize,
    pub layers: Vec<LayerSpec>,
    pub total_area_m2: f64,
    pub parcels: Vec<LedgerParcel>,
}

/// A generated city: parcels, layers, districts and the ledger.
#[derive(Debug, Clone)]
pub struct City {
    pub parcels: Vec<Parcel>,
    pub layers: Vec<RestrictionLayer>,
    pub districts: Vec<District>,
    pub ledger: Ledger,
    /// Lot grid columns and rows.
    pub lots: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Rect {
    x0: i64,
    y0: i64,
    x1: i64,
    y1: i64,
}

impl Rect {
    fn new(x0: i64, y0: i64, x1: i64, y1: i64) -> Self {
        debug_assert!(x0 < x1 && y0 < y1);
        Self { x0, y0, x1, y1 }
    }

    fn w(&self) -> i64 {
        self.x1 - self.x0
    }

    fn h(&self) -> i64 {
        self.y1 - self.y0
    }

    fn area(&self) -> i128 {
        self.w() as i128 * self.h() as i128
    }

    fn inter(&self, o: &Rect) -> Option<Rect> {
        let r = Rect { x0: self.x0.max(o.x0), y0: self.y0.max(o.y0), x1: self.x1.min(o.x1), y1: self.y1.min(o.y1) };
        (r.x0 < r.x1 && r.y0 < r.y1).then_some(r)
    }

    fn shape(&self) -> PolygonShape {
        PolygonShape::rect(mm(self.x0), mm(self.y0), mm(self.x1), mm(self.y1)).expect("non-degenerate rect")
    }
}

fn mm(v: i64) -> f64 {
    v as f64 / 1000.0
}

fn pt(x: i64, y: i64) -> PlanarPoint {
    PlanarPoint::new(mm(x), mm(y))
}

fn ring(points: &[(i64, i64)]) -> Vec<PlanarPoint> {
    let mut r: Vec<PlanarPoint> = points.iter().map(|&(x, y)| pt(x, y)).collect();
    r.push(r[0]);
    r
}

/// Union area of a handful of rects by inclusion-exclusion.
fn union_area(rects: &[Rect]) -> i128 {
    let n = rects.len();
    let mut total = 0i128;
    for mask in 1u32..(1 << n) {
        let mut acc: Option<Rect> = None;
        let mut empty = false;
        for (i, r) in rects.iter().enumerate() {
            if mask & (1 << i) != 0 {
                acc = match acc {
                    None => Some(*r),
                    Some(a) => a.inter(r),
                };
                if acc.is_none() {
                    empty = true;
                    break;
                }
            }
        }
        if empty {
            continue;
        }
        let a = acc.map_or(0, |r| r.area());
        if mask.count_ones() % 2 == 1 {
            total += a;
        } else {
            total -= a;
        }
    }
    total
}

struct Built {
    geometry: Vec<PolygonShape>,
    shape: ShapeKind,
    /// Disjoint rectangles whose union is exactly the parcel.
    parts: Vec<Rect>,
    /// Bounding rectangle of the first component.
    main: Rect,
    /// Cut height of an L shape.
    cut: Option<i64>,
}

impl Built {
    fn from_rect(r: Rect, shape: ShapeKind) -> Self {
        Built { geometry: vec![r.shape()], shape, parts: vec![r], main: r, cut: None }
    }

    fn area(&self) -> i128 {
        self.parts.iter().map(Rect::area).sum()
    }

    /// Exact covered area of the union of `pieces`.
    fn covered(&self, pieces: &[Rect]) -> i128 {
        self.parts
            .iter()
            .map(|part| {
                let clipped: Vec<Rect> = pieces.iter().filter_map(|p| part.inter(p)).collect();
                union_area(&clipped)
            })
            .sum()
    }
}

/// Planted polygons: (layer index, rect).
type Pieces = Vec<(usize, Rect)>;

pub fn generate(params: &CityParams) -> Result<City, SynthError> {
    if params.n_parcels == 0 {
        return Err(SynthError::NoParcels);
    }
    if params.districts == 0 {
        return Err(SynthError::NoDistricts);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.n_parcels;
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let n_districts = params.districts.min(cols);
    let district_of_col = |c: usize| (c * n_districts) / cols;
    let id_width = n.to_string().len().max(4);

    let high = idx_of(&params.layers, Severity::HighlyRestrictive);
    let less = idx_of(&params.layers, Severity::LessRestrictive);
    let mut pieces: Pieces = Vec::new();

    let mut parcels = Vec::with_capacity(n);
    let mut ledger_parcels = Vec::with_capacity(n);
    // the first rectangles sit on the class boundaries
    let mut boundary_plans = vec![(0.0, 0.49), (0.0, 0.5), (0.5, 0.0), (0.49, 0.0)].into_iter();

    let mut i = 0;
    while i < n {
        let (row, col) = (i / cols, i % cols);
        let lot_x = col as i64 * PITCH_MM;
        let lot_y = row as i64 * PITCH_MM;
        let pair = col + 1 < cols && i + 1 < n && rng.gen_bool(0.1);
        let built: Vec<Built> = if pair {
            let h = rng.gen_range(40..=90) * 1000;
            let y0 = lot_y + MARGIN_MM + rng.gen_range(0..=(90_000 - h) / 1000) * 1000;
            let left = Rect::new(lot_x + MARGIN_MM, y0, lot_x + PITCH_MM, y0 + h);
            let right = Rect::new(lot_x + PITCH_MM, y0, lot_x + 2 * PITCH_MM - MARGIN_MM, y0 + h);
            vec![Built::from_rect(left, ShapeKind::SharedEdge), Built::from_rect(right, ShapeKind::SharedEdge)]
        } else {
            vec![build_lot(&mut rng, lot_x, lot_y)]
        };

        for (k, b) in built.into_iter().enumerate() {
            let idx = i + k;
            let id = format!("P{:0width$}", idx + 1, width = id_width);
            let district_id = format!("d{}", district_of_col(idx % cols) + 1);
            let planted = plant(&mut rng, &b, &params.layers, &high, &less, &mut boundary_plans);

            let area = b.area();
            let cover = |keep: &dyn Fn(usize) -> bool| -> f64 {
                let rects: Vec<Rect> = planted.iter().filter(|(l, _)| keep(*l)).map(|(_, r)| *r).collect();
                b.covered(&rects) as f64 / area as f64
            };
            let high_coverage = cover(&|l| params.layers[l].severity == Severity::HighlyRestrictive);
            let less_coverage = cover(&|l| params.layers[l].severity == Severity::LessRestrictive);
            let mut layer_coverage = BTreeMap::new();
            for (li, spec) in params.layers.iter().enumerate() {
                let c = cover(&|l| l == li);
                if c > 0.0 {
                    layer_coverage.insert(spec.name.clone(), c);
                }
            }
            pieces.extend(planted);

            let city_owned = rng.gen_bool(0.7);
            let designation = *DESIGNATIONS.choose(&mut rng).unwrap();
            let parcel = Parcel::new(id.clone(), b.geometry, city_owned, designation)
                .expect("generated geometry is valid")
                .with_attribute("district", district_id.clone())
                .with_attribute("planned_use", "none")
                .with_attribute("adjacent_use", "housing")
                .with_attribute("contaminated", false)
                .with_attribute("hazard_distance_m", rng.gen_range(200..=2000))
                .with_attribute("regulations", json!([REGULATIONS.choose(&mut rng).unwrap()]));
            parcels.push(parcel);
            ledger_parcels.push(LedgerParcel {
                id,
                district_id,
                shape: b.shape,
                area_m2: area as f64 / 1e6,
                high_coverage,
                less_coverage,
                layer_coverage,
            });
        }
        i += if pair { 2 } else { 1 };
    }

    let mut layers = Vec::with_capacity(params.layers.len());
    for (li, spec) in params.layers.iter().enumerate() {
        let mut geometry: Vec<PolygonShape> = pieces.iter().filter(|(l, _)| *l == li).map(|(_, r)| r.shape()).collect();
        if geometry.is_empty() {
            // keep the layer non-empty, well outside the city
            let off = -10_000 - 3_000 * li as i64;
            geometry.push(Rect::new(off - 1_000, -10_000, off, -9_000).shape());
        }
        layers.push(RestrictionLayer::new(spec.name.clone(), spec.severity, geometry).expect("non-empty"));
    }

    let height = rows as i64 * PITCH_MM;
    let districts = (0..n_districts)
        .map(|d| {
            let c0 = (0..cols).find(|&c| district_of_col(c) == d).expect("every district has a column");
            let c1 = (0..cols).rev().find(|&c| district_of_col(c) == d).expect("column") + 1;
            District {
                id: format!("d{}", d + 1),
                name: DISTRICT_NAMES[d % DISTRICT_NAMES.len()].to_string(),
                bounds: MapExtent::new(pt(c0 as i64 * PITCH_MM, 0), pt(c1 as i64 * PITCH_MM, height), DISTRICT_SCALE)
                    .expect("positive extent"),
                population: rng.gen_range(80..=450) * 1000,
                refugees: rng.gen_range(5..=60) * 100,
            }
        })
        .collect();

    let total_area_m2 = ledger_parcels.iter().map(|p| p.area_m2).sum();
    Ok(City {
        parcels,
        layers,
        districts,
        ledger: Ledger {
            seed: params.seed,
            n_parcels: n,
            layers: params.layers.clone(),
            total_area_m2,
            parcels: ledger_parcels,
        },
        lots: (cols, rows),
    })
}

const DESIGNATIONS: [&str; 5] = ["residential", "mixed", "commercial", "green", "industrial"];
const REGULATIONS: [&str; 4] = ["zoning plan in force", "no zoning plan", "landscape protection", "flood zone"];
const HIGH_FRACTIONS: [f64; 8] = [0.1, 0.25, 0.3, 0.49, 0.5, 0.6, 0.75, 1.0];
const LESS_FRACTIONS: [f64; 7] = [0.2, 0.3, 0.49, 0.5, 0.55, 0.8, 1.0];

fn idx_of(layers: &[LayerSpec], s: Severity) -> Vec<usize> {
    layers.iter().enumerate().filter(|(_, l)| l.severity == s).map(|(i, _)| i).collect()
}

/// `fraction` of a whole-metre length, exact for fractions in hundredths.
fn frac_mm(len: i64, fraction: f64) -> i64 {
    let hundredths = (fraction * 100.0).round() as i64;
    len / 100 * hundredths
}

fn plant(
    rng: &mut ChaCha8Rng,
    b: &Built,
    layers: &[LayerSpec],
    high: &[usize],
    less: &[usize],
    boundary: &mut impl Iterator<Item = (f64, f64)>,
) -> Pieces {
    let mut out = Vec::new();
    let m = b.main;
    if b.shape == ShapeKind::Rect || b.shape == ShapeKind::SharedEdge {
        let plan = if !high.is_empty() && !less.is_empty() && b.shape == ShapeKind::Rect { boundary.next() } else { None };
        let (fh, fl) = plan.unwrap_or_else(|| {
            let roll: f64 = rng.gen();
            let fh = if !high.is_empty() && (roll < 0.25 || (0.5..0.6).contains(&roll)) {
                *HIGH_FRACTIONS.choose(rng).unwrap()
            } else {
                0.0
            };
            let fl = if !less.is_empty() && (0.25..0.6).contains(&roll) { *LESS_FRACTIONS.choose(rng).unwrap() } else { 0.0 };
            (fh, fl)
        });
        if fh > 0.0 {
            let s = frac_mm(m.h(), fh);
            let layer = *high.choose(rng).unwrap();
            // runs on into the street below
            out.push((layer, Rect::new(m.x0, m.y0 - 2_000, m.x1, m.y0 + s)));
        }
        if fl > 0.0 {
            let s = frac_mm(m.h(), fl);
            let (a, c) = (*less.choose(rng).unwrap(), *less.choose(rng).unwrap());
            out.push((a, Rect::new(m.x0, m.y1 - s, m.x0 + m.w() * 6 / 10, m.y1 + 2_000)));
            out.push((c, Rect::new(m.x0 + m.w() * 4 / 10, m.y1 - s, m.x1, m.y1 + 2_000)));
        }
    } else if !layers.is_empty() && rng.gen_bool(0.4) {
        let layer = rng.gen_range(0..layers.len());
        match b.cut {
            Some(ch) if rng.gen_bool(0.5) => {
                let s = rng.gen_range(1..=(m.h() - ch) / 1000) * 1000;
                let strip = Rect::new(m.x0, m.y0 - 2_000, m.x1, m.y0 + s);
                // stay clear of the class boundary, which the rect cases pin exactly
                let frac = b.covered(&[strip]) as f64 / b.area() as f64;
                if (frac - 0.5).abs() > 0.01 {
                    out.push((layer, strip));
                }
            }
            _ => {
                let e = rng.gen_range(1..=2) * 1000;
                out.push((layer, Rect::new(m.x0 - e, m.y0 - e, m.x1 + e, m.y1 + e)));
            }
        }
    }
    out
}

fn build_lot(rng: &mut ChaCha8Rng, lot_x: i64, lot_y: i64) -> Built {
    let w = rng.gen_range(40..=90) * 1000;
    let h = rng.gen_range(40..=90) * 1000;
    let x0 = lot_x + MARGIN_MM + rng.gen_range(0..=(90_000 - w) / 1000) * 1000;
    let y0 = lot_y + MARGIN_MM + rng.gen_range(0..=(90_000 - h) / 1000) * 1000;
    let (x1, y1) = (x0 + w, y0 + h);
    let main = Rect::new(x0, y0, x1, y1);
    let roll: f64 = rng.gen();
    if roll < 0.6 {
        Built::from_rect(main, ShapeKind::Rect)
    } else if roll < 0.75 {
        let cw = rng.gen_range(10..=w / 2000) * 1000;
        let ch = rng.gen_range(10..=h / 2000) * 1000;
        let ext = ring(&[(x0, y0), (x1, y0), (x1, y1 - ch), (x1 - cw, y1 - ch), (x1 - cw, y1), (x0, y1)]);
        Built {
            geometry: vec![PolygonShape::new(ext, vec![]).expect("L shape")],
            shape: ShapeKind::LShape,
            parts: vec![Rect::new(x0, y0, x1, y1 - ch), Rect::new(x0, y1 - ch, x1 - cw, y1)],
            main,
            cut: Some(ch),
        }
    } else if roll < 0.875 {
        let hw = rng.gen_range(10..=w / 3000) * 1000;
        let hh = rng.gen_range(10..=h / 3000) * 1000;
        let hx = x0 + (w - hw) / 2000 * 1000;
        let hy = y0 + (h - hh) / 2000 * 1000;
        let hole = Rect::new(hx, hy, hx + hw, hy + hh);
        let ext = ring(&[(x0, y0), (x1, y0), (x1, y1), (x0, y1)]);
        let inner = ring(&[(hx, hy), (hx, hole.y1), (hole.x1, hole.y1), (hole.x1, hy)]);
        Built {
            geometry: vec![PolygonShape::new(ext, vec![inner]).expect("courtyard")],
            shape: ShapeKind::Courtyard,
            parts: vec![
                Rect::new(x0, y0, x1, hy),
                Rect::new(x0, hole.y1, x1, y1),
                Rect::new(x0, hy, hx, hole.y1),
                Rect::new(hole.x1, hy, x1, hole.y1),
            ],
            main,
            cut: None,
        }
    } else {
        let gap = rng.gen_range(5..=10) * 1000;
        let w1 = (w - gap) / 2000 * 1000;
        let a = Rect::new(x0, y0, x0 + w1, y1);
        let b = Rect::new(x0 + w1 + gap, y0, x1, y0 + rng.gen_range(20..=h / 1000) * 1000);
        Built { geometry: vec![a.shape(), b.shape()], shape: ShapeKind::Twin, parts: vec![a, b], main: a, cut: None }
    }
}

impl City {
    pub fn parcel_set(&self) -> ParcelSet {
        ParcelSet::new(self.parcels.clone()).expect("generated ids are unique")
    }

    /// Write `parcels.geojson`, `layers/<name>.geojson`, `districts.json`
    /// and `ledger.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> std::io::Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir.join("layers"))?;
        std::fs::write(dir.join("parcels.geojson"), self.parcel_set().to_geojson() + "\n")?;
        for l in &self.layers {
            std::fs::write(dir.join("layers").join(format!("{}.geojson", l.name())), l.to_geojson() + "\n")?;
        }
        std::fs::write(dir.join("districts.json"), pretty(&self.districts))?;
        std::fs::write(dir.join("ledger.json"), pretty(&self.ledger))?;
        Ok(())
    }
}

pub(crate) fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializes") + "\n"
}
