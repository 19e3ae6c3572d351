use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{MapExtent, ParcelDetail};
use crate::parcels::{read_layer, read_parcels, IngestError, ParcelSet, RestrictionLayer};
use crate::suitability::{assess, ParcelAssessment, SuitabilityConfig};
use crate::tangible::{GridSpec, LookupTable, TableError};

/// One of the city's districts, the unit a workshop is held for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct District {
    pub id: String,
    pub name: String,
    pub bounds: MapExtent,
    #[serde(default)]
    pub population: u64,
    #[serde(default)]
    pub refugees: u64,
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{0} parcel feature(s) rejected; run `ingest` for diagnostics")]
    RejectedFeatures(usize),
    #[error("duplicate district id {0:?}")]
    DuplicateDistrict(String),
    #[error(transparent)]
    Table(#[from] TableError),
}

/// Everything a session reads: parcels with their precomputed assessments,
/// restriction layers, districts, and the table configuration.
#[derive(Debug, Clone)]
pub struct WorkshopData {
    parcels: ParcelSet,
    layers: Vec<RestrictionLayer>,
    districts: Vec<District>,
    assessments: BTreeMap<String, ParcelAssessment>,
    cfg: SuitabilityConfig,
    grid: GridSpec,
    denominations: Vec<u32>,
    city_extent: MapExtent,
}

impl WorkshopData {
    pub fn new(
        parcels: ParcelSet,
        layers: Vec<RestrictionLayer>,
        mut districts: Vec<District>,
        cfg: SuitabilityConfig,
        grid: GridSpec,
        denominations: Vec<u32>,
    ) -> Result<Self, DataError> {
        districts.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = districts.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(DataError::DuplicateDistrict(w[0].id.clone()));
        }
        let assessments = parcels.iter().map(|p| (p.id().to_string(), assess(p, &layers, &cfg))).collect();
        let city_extent = city_extent(&parcels, &districts);
        Ok(Self { parcels, layers, districts, assessments, cfg, grid, denominations, city_extent })
    }

    /// Read a data directory: `parcels.geojson`, `layers/*.geojson` (in
    /// file name order), `districts.json`, and optionally `table.json` for
    /// the housing denominations.
    pub fn load(dir: impl AsRef<Path>, cfg: SuitabilityConfig, grid: GridSpec) -> Result<Self, DataError> {
        let dir = dir.as_ref();
        let ingest = read_parcels(dir.join("parcels.geojson"))?;
        if !ingest.diagnostics.is_empty() {
            return Err(DataError::RejectedFeatures(ingest.diagnostics.len()));
        }
        let layer_dir = dir.join("layers");
        let mut layer_files = Vec::new();
        if layer_dir.is_dir() {
            let entries = std::fs::read_dir(&layer_dir).map_err(|source| DataError::Io { path: layer_dir.clone(), source })?;
            for e in entries {
                let path = e.map_err(|source| DataError::Io { path: layer_dir.clone(), source })?.path();
                if path.extension().is_some_and(|x| x == "geojson") {
                    layer_files.push(path);
                }
            }
        }
        layer_files.sort();
        let layers = layer_files.iter().map(read_layer).collect::<Result<Vec<_>, _>>()?;

        let dpath = dir.join("districts.json");
        let text = std::fs::read_to_string(&dpath).map_err(|source| DataError::Io { path: dpath.clone(), source })?;
        let districts: Vec<District> = serde_json::from_str(&text)
            .map_err(|e| DataError::Format { path: dpath.clone(), message: e.to_string() })?;

        let tpath = dir.join("table.json");
        let denominations = if tpath.exists() {
            LookupTable::read(&tpath)?.denominations().to_vec()
        } else {
            crate::tangible::DEFAULT_DENOMINATIONS.to_vec()
        };
        Self::new(ingest.set, layers, districts, cfg, grid, denominations)
    }

    pub fn parcels(&self) -> &ParcelSet {
        &self.parcels
    }

    pub fn layers(&self) -> &[RestrictionLayer] {
        &self.layers
    }

    pub fn districts(&self) -> &[District] {
        &self.districts
    }

    pub fn district(&self, id: &str) -> Option<&District> {
        self.districts.iter().find(|d| d.id == id)
    }

    pub fn assessment(&self, parcel_id: &str) -> Option<&ParcelAssessment> {
        self.assessments.get(parcel_id)
    }

    pub fn config(&self) -> &SuitabilityConfig {
        &self.cfg
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn denominations(&self) -> &[u32] {
        &self.denominations
    }

    pub fn city_extent(&self) -> MapExtent {
        self.city_extent
    }

    /// The detail panel contents for a parcel.
    pub fn detail(&self, parcel_id: &str) -> Option<ParcelDetail> {
        let parcel = self.parcels.get(parcel_id)?;
        let a = self.assessments.get(parcel_id)?;
        Some(ParcelDetail::from_assessment(parcel, a))
    }
}

fn city_extent(parcels: &ParcelSet, districts: &[District]) -> MapExtent {
    let mut bb = parcels.bbox();
    for d in districts {
        let db = crate::geom::BBox { min: d.bounds.min, max: d.bounds.max };
        bb = Some(bb.map_or(db, |b| b.union(&db)));
    }
    match bb {
        Some(b) if b.width() > 0.0 && b.height() > 0.0 => MapExtent::with_scale(b.min, b.max, 25_000.0),
        _ => MapExtent::with_scale((0.0, 0.0).into(), (1.0, 1.0).into(), 25_000.0),
    }
}
