//! Parcel data model, restriction layers and the spatially indexed
//! [`ParcelSet`].

mod geojson;

pub use self::geojson::{
    ingest_layer, ingest_parcels, read_layer, read_parcels, FeatureDiagnostic, FeatureProblem,
    IngestError, ParcelIngest, Projection,
};

use std::collections::BTreeMap;

use rstar::primitives::{GeomWithData, Rectangle};
use rstar::{RTree, AABB};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::geom::{self, BBox, Containment, GeometryError, PlanarPoint, PolygonShape};

/// Declared area may differ from the shoelace area by at most this fraction.
pub const AREA_TOLERANCE: f64 = 1e-3;

/// A land parcel: one or more polygon components plus the attributes the
/// workshop displays.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Parcel {
    id: String,
    geometry: Vec<PolygonShape>,
    area_m2: f64,
    city_owned: bool,
    designation: String,
    attributes: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParcelError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("declared area {declared} m² differs from geometric area {computed} m² by more than 0.1%")]
    AreaMismatch { declared: f64, computed: f64 },
    #[error("parcel id is empty")]
    EmptyId,
}

impl Parcel {
    /// Build a parcel whose area is taken from its geometry.
    pub fn new(
        id: impl Into<String>,
        geometry: Vec<PolygonShape>,
        city_owned: bool,
        designation: impl Into<String>,
    ) -> Result<Self, ParcelError> {
        let id = id.into();
        if id.is_empty() {
            return Err(ParcelError::EmptyId);
        }
        geom::check_components(&geometry)?;
        let area_m2 = geom::multi_area(&geometry);
        Ok(Self {
            id,
            geometry,
            area_m2,
            city_owned,
            designation: designation.into(),
            attributes: BTreeMap::new(),
        })
    }

    /// Replace the computed area with a declared one, which must agree with
    /// the geometry within [`AREA_TOLERANCE`].
    pub fn with_declared_area(mut self, declared: f64) -> Result<Self, ParcelError> {
        let computed = self.area_m2;
        if !declared.is_finite() || ((declared - computed) / computed).abs() > AREA_TOLERANCE {
            return Err(ParcelError::AreaMismatch { declared, computed });
        }
        self.area_m2 = declared;
        Ok(self)
    }

    pub fn with_attribute(mut self, key: impl Into<String>, value: impl Into<Value>) -> Self {
        self.attributes.insert(key.into(), value.into());
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn geometry(&self) -> &[PolygonShape] {
        &self.geometry
    }

    pub fn area_m2(&self) -> f64 {
        self.area_m2
    }

    pub fn city_owned(&self) -> bool {
        self.city_owned
    }

    pub fn designation(&self) -> &str {
        &self.designation
    }

    pub fn attributes(&self) -> &BTreeMap<String, Value> {
        &self.attributes
    }

    pub fn bbox(&self) -> BBox {
        self.geometry
            .iter()
            .map(PolygonShape::bbox)
            .reduce(|a, b| a.union(&b))
            .expect("parcel has at least one component")
    }

    /// Closed containment over all components: `Inside` wins over `Boundary`.
    pub fn contains(&self, p: PlanarPoint) -> Containment {
        let mut best = Containment::Outside;
        for c in &self.geometry {
            match c.contains(p) {
                Containment::Inside => return Containment::Inside,
                Containment::Boundary => best = Containment::Boundary,
                Containment::Outside => {}
            }
        }
        best
    }
}

/// Restriction severity. Serialized as `"high"` / `"less"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Severity {
    #[serde(rename = "high")]
    HighlyRestrictive,
    #[serde(rename = "less")]
    LessRestrictive,
}

/// A named set of polygons encoding one siting constraint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestrictionLayer {
    name: String,
    severity: Severity,
    geometry: Vec<PolygonShape>,
}

impl RestrictionLayer {
    pub fn new(
        name: impl Into<String>,
        severity: Severity,
        geometry: Vec<PolygonShape>,
    ) -> Result<Self, GeometryError> {
        if geometry.is_empty() {
            return Err(GeometryError::Empty);
        }
        Ok(Self { name: name.into(), severity, geometry })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn severity(&self) -> Severity {
        self.severity
    }

    pub fn geometry(&self) -> &[PolygonShape] {
        &self.geometry
    }
}

type IndexEntry = GeomWithData<Rectangle<[f64; 2]>, usize>;

/// Immutable, id-keyed parcel collection with a bounding-box R-tree.
#[derive(Debug, Clone)]
pub struct ParcelSet {
    parcels: Vec<Parcel>,
    index: RTree<IndexEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("duplicate parcel id {0:?}")]
pub struct DuplicateId(pub String);

impl ParcelSet {
    pub fn new(mut parcels: Vec<Parcel>) -> Result<Self, DuplicateId> {
        parcels.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = parcels.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(DuplicateId(w[0].id.clone()));
        }
        let entries = parcels
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let bb = p.bbox();
                GeomWithData::new(
                    Rectangle::from_corners([bb.min.x, bb.min.y], [bb.max.x, bb.max.y]),
                    i,
                )
            })
            .collect();
        Ok(Self { parcels, index: RTree::bulk_load(entries) })
    }

    pub fn empty() -> Self {
        Self::new(Vec::new()).expect("no duplicates in an empty set")
    }

    pub fn len(&self) -> usize {
        self.parcels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parcels.is_empty()
    }

    /// Parcels in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = &Parcel> {
        self.parcels.iter()
    }

    pub fn get(&self, id: &str) -> Option<&Parcel> {
        self.parcels
            .binary_search_by(|p| p.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.parcels[i])
    }

    pub fn bbox(&self) -> Option<BBox> {
        self.parcels.iter().map(Parcel::bbox).reduce(|a, b| a.union(&b))
    }

    /// Parcels whose bounding box intersects `bb`, in id order.
    pub fn query_bbox(&self, bb: &BBox) -> Vec<&Parcel> {
        let env = AABB::from_corners([bb.min.x, bb.min.y], [bb.max.x, bb.max.y]);
        let mut hits: Vec<usize> =
            self.index.locate_in_envelope_intersecting(&env).map(|e| e.data).collect();
        hits.sort_unstable();
        hits.into_iter().map(|i| &self.parcels[i]).collect()
    }

    /// The parcel containing `p`. A point strictly inside a parcel resolves
    /// to it; a point on boundaries only resolves to the smallest id among
    /// the parcels whose boundary it lies on.
    pub fn locate_point(&self, p: PlanarPoint) -> Option<&Parcel> {
        if !p.is_finite() {
            return None;
        }
        let mut hits: Vec<usize> = self
            .index
            .locate_in_envelope_intersecting(&AABB::from_point([p.x, p.y]))
            .map(|e| e.data)
            .collect();
        // index order is id order
        hits.sort_unstable();
        let mut boundary = None;
        for i in hits {
            match self.parcels[i].contains(p) {
                Containment::Inside => return Some(&self.parcels[i]),
                Containment::Boundary if boundary.is_none() => boundary = Some(i),
                _ => {}
            }
        }
        boundary.map(|i| &self.parcels[i])
    }
}

impl PartialEq for ParcelSet {
    fn eq(&self, other: &Self) -> bool {
        self.parcels == other.parcels
    }
}
