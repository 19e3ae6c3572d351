//! Three-class suitability from restriction-layer coverage, and the
//! accommodation capacity estimate shown next to each parcel.
//!
//! Coverage is the union of a severity's layer polygons intersected with
//! the parcel, divided by the parcel area. Overlapping restriction polygons
//! are never double counted.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::geom::{multi_intersection_area, union_area, PolygonShape};
use crate::parcels::{Parcel, ParcelSet, RestrictionLayer, Severity};

/// Less-restrictive coverage at or above this bound leaves the low class.
pub const LOW_CLASS_BOUND: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SuitabilityClass {
    #[serde(rename = "high")]
    HighUnsuitability,
    #[serde(rename = "medium")]
    MediumUnsuitability,
    #[serde(rename = "low")]
    LowUnsuitability,
}

impl SuitabilityClass {
    pub const ALL: [SuitabilityClass; 3] = [
        SuitabilityClass::HighUnsuitability,
        SuitabilityClass::MediumUnsuitability,
        SuitabilityClass::LowUnsuitability,
    ];

    /// Map color used on every display.
    pub fn color(self) -> &'static str {
        match self {
            SuitabilityClass::HighUnsuitability => "red",
            SuitabilityClass::MediumUnsuitability => "orange",
            SuitabilityClass::LowUnsuitability => "yellow",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SuitabilityClass::HighUnsuitability => "high",
            SuitabilityClass::MediumUnsuitability => "medium",
            SuitabilityClass::LowUnsuitability => "low",
        }
    }

    /// 2 = most unsuitable.
    pub fn severity_rank(self) -> u8 {
        match self {
            SuitabilityClass::HighUnsuitability => 2,
            SuitabilityClass::MediumUnsuitability => 1,
            SuitabilityClass::LowUnsuitability => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("significance_threshold must lie in (0, 1], got {0}")]
    Threshold(f64),
    #[error("density_m2_per_place must be positive, got {0}")]
    Density(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig", into = "RawConfig")]
pub struct SuitabilityConfig {
    significance_threshold: f64,
    density_m2_per_place: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default = "default_threshold")]
    significance_threshold: f64,
    #[serde(default = "default_density")]
    density_m2_per_place: f64,
}

fn default_threshold() -> f64 {
    0.5
}

fn default_density() -> f64 {
    30.0
}

impl TryFrom<RawConfig> for SuitabilityConfig {
    type Error = ConfigError;
    fn try_from(r: RawConfig) -> Result<Self, ConfigError> {
        SuitabilityConfig::new(r.significance_threshold, r.density_m2_per_place)
    }
}

impl From<SuitabilityConfig> for RawConfig {
    fn from(c: SuitabilityConfig) -> Self {
        RawConfig {
            significance_threshold: c.significance_threshold,
            density_m2_per_place: c.density_m2_per_place,
        }
    }
}

impl Default for SuitabilityConfig {
    fn default() -> Self {
        Self { significance_threshold: default_threshold(), density_m2_per_place: default_density() }
    }
}

impl SuitabilityConfig {
    pub fn new(significance_threshold: f64, density_m2_per_place: f64) -> Result<Self, ConfigError> {
        if !(significance_threshold > 0.0 && significance_threshold <= 1.0) {
            return Err(ConfigError::Threshold(significance_threshold));
        }
        if !(density_m2_per_place > 0.0 && density_m2_per_place.is_finite()) {
            return Err(ConfigError::Density(density_m2_per_place));
        }
        Ok(Self { significance_threshold, density_m2_per_place })
    }

    pub fn significance_threshold(&self) -> f64 {
        self.significance_threshold
    }

    pub fn density_m2_per_place(&self) -> f64 {
        self.density_m2_per_place
    }

    pub fn low_class_bound(&self) -> f64 {
        LOW_CLASS_BOUND
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuitabilityAssessment {
    pub parcel_id: String,
    pub class: SuitabilityClass,
    pub high_coverage: f64,
    pub less_coverage: f64,
    pub capacity: u32,
}

/// Assessment plus per-layer coverage, as the detail panel shows it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParcelAssessment {
    pub assessment: SuitabilityAssessment,
    /// `(layer name, coverage)` for every layer touching the parcel, by name.
    pub restrictions: Vec<(String, f64)>,
}

fn parcel_area(parcel: &Parcel) -> f64 {
    // same snapped grid as the numerator, so full cover is exactly 1
    union_area(parcel.geometry())
}

fn covered_fraction(parcel: &Parcel, area: f64, polygons: &[PolygonShape]) -> f64 {
    if polygons.is_empty() || area <= 0.0 {
        return 0.0;
    }
    (multi_intersection_area(parcel.geometry(), polygons) / area).clamp(0.0, 1.0)
}

/// Fraction of the parcel covered by the union of one layer's polygons.
pub fn coverage_fraction(parcel: &Parcel, layer: &RestrictionLayer) -> f64 {
    covered_fraction(parcel, parcel_area(parcel), layer.geometry())
}

/// Union coverage over every layer of one severity.
pub fn severity_coverage(parcel: &Parcel, layers: &[RestrictionLayer], severity: Severity) -> f64 {
    let polygons: Vec<PolygonShape> = layers
        .iter()
        .filter(|l| l.severity() == severity)
        .flat_map(|l| l.geometry().iter().cloned())
        .collect();
    covered_fraction(parcel, parcel_area(parcel), &polygons)
}

/// The class rule on coverage values alone.
pub fn classify_coverage(high: f64, less: f64, cfg: &SuitabilityConfig) -> SuitabilityClass {
    if high >= cfg.significance_threshold {
        SuitabilityClass::HighUnsuitability
    } else if high > 0.0 || less >= LOW_CLASS_BOUND {
        SuitabilityClass::MediumUnsuitability
    } else {
        SuitabilityClass::LowUnsuitability
    }
}

/// Places on the part of the parcel not covered by highly restrictive
/// criteria, at the configured density.
pub fn capacity(area_m2: f64, high_coverage: f64, cfg: &SuitabilityConfig) -> u32 {
    let usable = area_m2 * (1.0 - high_coverage.clamp(0.0, 1.0));
    // absorb representation error on exact quotients such as 750 / 30
    let places = (usable / cfg.density_m2_per_place + 1e-9).floor();
    if places <= 0.0 {
        0
    } else {
        places.min(u32::MAX as f64) as u32
    }
}

pub fn classify(parcel: &Parcel, layers: &[RestrictionLayer], cfg: &SuitabilityConfig) -> SuitabilityAssessment {
    assess(parcel, layers, cfg).assessment
}

pub fn assess(parcel: &Parcel, layers: &[RestrictionLayer], cfg: &SuitabilityConfig) -> ParcelAssessment {
    let area = parcel_area(parcel);
    let bbox = parcel.bbox();
    let mut high_polys = Vec::new();
    let mut less_polys = Vec::new();
    let mut restrictions = Vec::new();
    for layer in layers {
        let touching: Vec<PolygonShape> =
            layer.geometry().iter().filter(|s| s.bbox().intersects(&bbox)).cloned().collect();
        if touching.is_empty() {
            continue;
        }
        let c = covered_fraction(parcel, area, &touching);
        if c > 0.0 {
            restrictions.push((layer.name().to_string(), c));
        }
        match layer.severity() {
            Severity::HighlyRestrictive => high_polys.extend(touching),
            Severity::LessRestrictive => less_polys.extend(touching),
        }
    }
    restrictions.sort_by(|a, b| a.0.cmp(&b.0));
    let high = covered_fraction(parcel, area, &high_polys);
    let less = covered_fraction(parcel, area, &less_polys);
    ParcelAssessment {
        assessment: SuitabilityAssessment {
            parcel_id: parcel.id().to_string(),
            class: classify_coverage(high, less, cfg),
            high_coverage: high,
            less_coverage: less,
            capacity: capacity(parcel.area_m2(), high, cfg),
        },
        restrictions,
    }
}

/// One assessment per parcel, in parcel id order.
pub fn classify_all(
    set: &ParcelSet,
    layers: &[RestrictionLayer],
    cfg: &SuitabilityConfig,
) -> Vec<SuitabilityAssessment> {
    set.iter().map(|p| classify(p, layers, cfg)).collect()
}

/// CSV with columns `parcel_id,class,high_coverage,less_coverage,capacity`.
pub fn write_csv<W: Write>(assessments: &[SuitabilityAssessment], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for a in assessments {
        w.serialize(a)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> csv::Result<Vec<SuitabilityAssessment>> {
    csv::Reader::from_reader(input).deserialize().collect()
}
