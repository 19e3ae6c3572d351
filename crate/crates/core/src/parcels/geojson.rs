//! GeoJSON ingestion and export.
//!
//! Parcels: a `FeatureCollection` with one `Polygon` or `MultiPolygon`
//! feature per parcel and properties `id` (string), `city_owned` (bool),
//! `designation` (string) and optionally `area_m2`. All other properties
//! become parcel attributes.
//!
//! Restriction layers: one `FeatureCollection` per layer carrying top-level
//! members `name` and `severity` (`"high"` or `"less"`).
//!
//! Coordinates are planar meters unless the collection declares a
//! `projection` member; `{"type": "local_equirectangular", "origin": [lon, lat]}`
//! maps lon/lat degrees onto a local metric plane once, at load.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{Parcel, ParcelError, ParcelSet, RestrictionLayer, Severity};
use crate::geom::{GeometryError, PlanarPoint, PolygonShape};

const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Projection {
    #[default]
    Planar,
    LocalEquirectangular { origin: [f64; 2] },
}

impl Projection {
    fn apply(&self, c: [f64; 2]) -> PlanarPoint {
        match *self {
            Projection::Planar => PlanarPoint::new(c[0], c[1]),
            Projection::LocalEquirectangular { origin: [lon0, lat0] } => PlanarPoint::new(
                EARTH_RADIUS_M * (c[0] - lon0).to_radians() * lat0.to_radians().cos(),
                EARTH_RADIUS_M * (c[1] - lat0).to_radians(),
            ),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed GeoJSON at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("expected a FeatureCollection, found {0:?}")]
    NotFeatureCollection(String),
    #[error("layer is missing top-level member {0:?}")]
    MissingLayerMember(&'static str),
    #[error("layer severity must be \"high\" or \"less\", found {0}")]
    BadSeverity(Value),
    #[error("layer feature {index}: {problem}")]
    LayerFeature { index: usize, problem: FeatureProblem },
    #[error("layer has no geometry")]
    EmptyLayer,
}

/// Why one feature was rejected.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureProblem {
    #[error("missing property {0:?}")]
    MissingProperty(&'static str),
    #[error("property {name:?} must be {expected}")]
    WrongType { name: &'static str, expected: &'static str },
    #[error("missing or malformed geometry: {0}")]
    BadGeometry(String),
    #[error("unsupported geometry type {0:?}")]
    UnsupportedGeometry(String),
    #[error("component {component}: {error}")]
    InvalidRing { component: usize, error: GeometryError },
    #[error(transparent)]
    Parcel(#[from] ParcelError),
    #[error("duplicate id, first used by feature {first_index}")]
    DuplicateId { first_index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDiagnostic {
    pub index: usize,
    pub id: Option<String>,
    pub problem: FeatureProblem,
}

impl std::fmt::Display for FeatureDiagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.id {
            Some(id) => write!(f, "feature {} ({id}): {}", self.index, self.problem),
            None => write!(f, "feature {}: {}", self.index, self.problem),
        }
    }
}

/// Outcome of parcel ingestion: the valid parcels plus one diagnostic per
/// rejected feature.
#[derive(Debug, Clone)]
pub struct ParcelIngest {
    pub set: ParcelSet,
    pub diagnostics: Vec<FeatureDiagnostic>,
}

#[derive(Deserialize)]
struct CollectionDoc {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    projection: Projection,
    #[serde(default)]
    features: Vec<Value>,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

fn parse_collection(text: &str) -> Result<CollectionDoc, IngestError> {
    let doc: CollectionDoc = serde_json::from_str(text).map_err(|e| IngestError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if doc.kind != "FeatureCollection" {
        return Err(IngestError::NotFeatureCollection(doc.kind));
    }
    Ok(doc)
}

fn read_to_string(path: &Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path)
        .map_err(|source| IngestError::Io { path: path.display().to_string(), source })
}

fn parse_ring(v: &Value, proj: &Projection) -> Result<Vec<PlanarPoint>, FeatureProblem> {
    let coords: Vec<[f64; 2]> = serde_json::from_value(v.clone())
        .map_err(|e| FeatureProblem::BadGeometry(format!("ring coordinates: {e}")))?;
    Ok(coords.into_iter().map(|c| proj.apply(c)).collect())
}

fn parse_polygon(
    v: &Value,
    proj: &Projection,
    component: usize,
) -> Result<PolygonShape, FeatureProblem> {
    let rings = v
        .as_array()
        .ok_or_else(|| FeatureProblem::BadGeometry("polygon must be an array of rings".into()))?;
    let mut rings = rings.iter().map(|r| parse_ring(r, proj));
    let exterior = rings
        .next()
        .ok_or_else(|| FeatureProblem::BadGeometry("polygon has no rings".into()))??;
    let holes = rings.collect::<Result<Vec<_>, _>>()?;
    PolygonShape::new(exterior, holes)
        .map_err(|error| FeatureProblem::InvalidRing { component, error })
}

fn parse_geometry(v: Option<&Value>, proj: &Projection) -> Result<Vec<PolygonShape>, FeatureProblem> {
    let g = v
        .filter(|g| !g.is_null())
        .ok_or_else(|| FeatureProblem::BadGeometry("feature has no geometry".into()))?;
    let kind = g.get("type").and_then(Value::as_str).unwrap_or_default();
    let coords = g
        .get("coordinates")
        .ok_or_else(|| FeatureProblem::BadGeometry("geometry has no coordinates".into()))?;
    match kind {
        "Polygon" => Ok(vec![parse_polygon(coords, proj, 0)?]),
        "MultiPolygon" => coords
            .as_array()
            .ok_or_else(|| FeatureProblem::BadGeometry("multipolygon must be an array".into()))?
            .iter()
            .enumerate()
            .map(|(i, p)| parse_polygon(p, proj, i))
            .collect(),
        other => Err(FeatureProblem::UnsupportedGeometry(other.to_string())),
    }
}

fn parse_parcel(feature: &Value, proj: &Projection) -> (Option<String>, Result<Parcel, FeatureProblem>) {
    let empty = Map::new();
    let props = feature.get("properties").and_then(Value::as_object).unwrap_or(&empty);
    let id = props.get("id").and_then(Value::as_str).map(str::to_string);
    let result = (|| {
        let id = match props.get("id") {
            None => return Err(FeatureProblem::MissingProperty("id")),
            Some(Value::String(s)) => s.clone(),
            Some(_) => return Err(FeatureProblem::WrongType { name: "id", expected: "a string" }),
        };
        let city_owned = match props.get("city_owned") {
            None => return Err(FeatureProblem::MissingProperty("city_owned")),
            Some(Value::Bool(b)) => *b,
            Some(_) => {
                return Err(FeatureProblem::WrongType { name: "city_owned", expected: "a boolean" })
            }
        };
        let designation = match props.get("designation") {
            None => return Err(FeatureProblem::MissingProperty("designation")),
            Some(Value::String(s)) => s.clone(),
            Some(_) => {
                return Err(FeatureProblem::WrongType { name: "designation", expected: "a string" })
            }
        };
        let geometry = parse_geometry(feature.get("geometry"), proj)?;
        let mut parcel = Parcel::new(id, geometry, city_owned, designation)?;
        match props.get("area_m2") {
            None | Some(Value::Null) => {}
            Some(v) => {
                let declared = v
                    .as_f64()
                    .ok_or(FeatureProblem::WrongType { name: "area_m2", expected: "a number" })?;
                parcel = parcel.with_declared_area(declared)?;
            }
        }
        for (k, v) in props {
            if !matches!(k.as_str(), "id" | "city_owned" | "designation" | "area_m2") {
                parcel = parcel.with_attribute(k.clone(), v.clone());
            }
        }
        Ok(parcel)
    })();
    (id, result)
}

/// Parse a parcel FeatureCollection. Malformed JSON fails the whole file;
/// invalid features are dropped with a diagnostic and the rest are kept.
pub fn ingest_parcels(text: &str) -> Result<ParcelIngest, IngestError> {
    let doc = parse_collection(text)?;
    let mut parcels = Vec::new();
    let mut diagnostics = Vec::new();
    let mut first_seen: BTreeMap<String, usize> = BTreeMap::new();
    for (index, feature) in doc.features.iter().enumerate() {
        let (id, result) = parse_parcel(feature, &doc.projection);
        match result {
            Ok(parcel) => {
                if let Some(&first_index) = first_seen.get(parcel.id()) {
                    diagnostics.push(FeatureDiagnostic {
                        index,
                        id,
                        problem: FeatureProblem::DuplicateId { first_index },
                    });
                } else {
                    first_seen.insert(parcel.id().to_string(), index);
                    parcels.push(parcel);
                }
            }
            Err(problem) => diagnostics.push(FeatureDiagnostic { index, id, problem }),
        }
    }
    let set = ParcelSet::new(parcels).expect("duplicates filtered above");
    Ok(ParcelIngest { set, diagnostics })
}

pub fn read_parcels(path: impl AsRef<Path>) -> Result<ParcelIngest, IngestError> {
    ingest_parcels(&read_to_string(path.as_ref())?)
}

/// Parse one restriction-layer file. Any invalid feature fails the layer.
pub fn ingest_layer(text: &str) -> Result<RestrictionLayer, IngestError> {
    let doc = parse_collection(text)?;
    let name = doc
        .extra
        .get("name")
        .and_then(Value::as_str)
        .ok_or(IngestError::MissingLayerMember("name"))?
        .to_string();
    let severity_value = doc.extra.get("severity").ok_or(IngestError::MissingLayerMember("severity"))?;
    let severity: Severity = serde_json::from_value(severity_value.clone())
        .map_err(|_| IngestError::BadSeverity(severity_value.clone()))?;
    let mut geometry = Vec::new();
    for (index, feature) in doc.features.iter().enumerate() {
        let shapes = parse_geometry(feature.get("geometry"), &doc.projection)
            .map_err(|problem| IngestError::LayerFeature { index, problem })?;
        geometry.extend(shapes);
    }
    RestrictionLayer::new(name, severity, geometry).map_err(|_| IngestError::EmptyLayer)
}

pub fn read_layer(path: impl AsRef<Path>) -> Result<RestrictionLayer, IngestError> {
    ingest_layer(&read_to_string(path.as_ref())?)
}

fn polygon_coords(shape: &PolygonShape) -> Value {
    let ring = |r: &[PlanarPoint]| Value::from(r.iter().map(|p| json!([p.x, p.y])).collect::<Vec<_>>());
    Value::from(shape.rings().map(ring).collect::<Vec<_>>())
}

fn geometry_json(shapes: &[PolygonShape]) -> Value {
    if shapes.len() == 1 {
        json!({"type": "Polygon", "coordinates": polygon_coords(&shapes[0])})
    } else {
        json!({
            "type": "MultiPolygon",
            "coordinates": shapes.iter().map(polygon_coords).collect::<Vec<_>>(),
        })
    }
}

impl ParcelSet {
    /// Export as a planar GeoJSON FeatureCollection that re-ingests to an
    /// identical set.
    pub fn to_geojson(&self) -> String {
        let features: Vec<Value> = self
            .iter()
            .map(|p| {
                let mut props = Map::new();
                props.insert("id".into(), p.id().into());
                props.insert("city_owned".into(), p.city_owned().into());
                props.insert("designation".into(), p.designation().into());
                props.insert("area_m2".into(), p.area_m2().into());
                for (k, v) in p.attributes() {
                    props.insert(k.clone(), v.clone());
                }
                json!({"type": "Feature", "properties": props, "geometry": geometry_json(p.geometry())})
            })
            .collect();
        serde_json::to_string_pretty(&json!({
            "type": "FeatureCollection",
            "projection": Projection::Planar,
            "features": features,
        }))
        .expect("JSON values serialize")
    }
}

impl RestrictionLayer {
    pub fn to_geojson(&self) -> String {
        let features: Vec<Value> = self
            .geometry()
            .iter()
            .map(|s| json!({"type": "Feature", "properties": {}, "geometry": geometry_json(std::slice::from_ref(s))}))
            .collect();
        serde_json::to_string_pretty(&json!({
            "type": "FeatureCollection",
            "name": self.name(),
            "severity": self.severity(),
            "projection": Projection::Planar,
            "features": features,
        }))
        .expect("JSON values serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_feature(id: &str, x: f64, s: f64) -> Value {
        json!({
            "type": "Feature",
            "properties": {"id": id, "city_owned": true, "designation": "green"},
            "geometry": {"type": "Polygon", "coordinates": [[[x, 0.0], [x + s, 0.0], [x + s, s], [x, s], [x, 0.0]]]},
        })
    }

    fn collection(features: Vec<Value>) -> String {
        json!({"type": "FeatureCollection", "features": features}).to_string()
    }

    #[test]
    fn three_squares() {
        let text = collection(vec![
            square_feature("a", 0.0, 10.0),
            square_feature("b", 20.0, 5.0),
            square_feature("c", 40.0, 7.0),
        ]);
        let out = ingest_parcels(&text).unwrap();
        assert!(out.diagnostics.is_empty());
        assert_eq!(out.set.len(), 3);
        assert_eq!(out.set.get("a").unwrap().area_m2(), 100.0);
        assert_eq!(out.set.get("b").unwrap().area_m2(), 25.0);
        assert_eq!(out.set.get("c").unwrap().area_m2(), 49.0);
    }

    #[test]
    fn unclosed_ring_rejected_others_kept() {
        let mut bad = square_feature("bad", 20.0, 5.0);
        bad["geometry"]["coordinates"] = json!([[[20.0, 0.0], [25.0, 0.0], [25.0, 5.0], [20.0, 5.0]]]);
        let text = collection(vec![square_feature("a", 0.0, 10.0), bad, square_feature("c", 40.0, 7.0)]);
        let out = ingest_parcels(&text).unwrap();
        assert_eq!(out.set.len(), 2);
        assert_eq!(out.diagnostics.len(), 1);
        let d = &out.diagnostics[0];
        assert_eq!(d.index, 1);
        assert_eq!(d.id.as_deref(), Some("bad"));
        assert_eq!(
            d.problem,
            FeatureProblem::InvalidRing { component: 0, error: GeometryError::Unclosed { ring: 0 } }
        );
        assert!(d.to_string().contains("ring 0: not closed"));
    }

    #[test]
    fn duplicate_id_lists_both() {
        let text = collection(vec![square_feature("a", 0.0, 10.0), square_feature("a", 20.0, 10.0)]);
        let out = ingest_parcels(&text).unwrap();
        assert_eq!(out.set.len(), 1);
        assert_eq!(out.diagnostics[0].index, 1);
        assert_eq!(out.diagnostics[0].problem, FeatureProblem::DuplicateId { first_index: 0 });
    }

    #[test]
    fn missing_and_mistyped_properties() {
        let mut f1 = square_feature("x", 0.0, 1.0);
        f1["properties"].as_object_mut().unwrap().remove("designation");
        let mut f2 = square_feature("y", 5.0, 1.0);
        f2["properties"]["city_owned"] = json!("yes");
        let out = ingest_parcels(&collection(vec![f1, f2])).unwrap();
        assert_eq!(out.diagnostics[0].problem, FeatureProblem::MissingProperty("designation"));
        assert!(matches!(out.diagnostics[1].problem, FeatureProblem::WrongType { name: "city_owned", .. }));
    }

    #[test]
    fn malformed_json_reports_position() {
        let text = "{\n  \"type\": \"FeatureCollection\",\n  \"features\": [ oops ]\n}";
        match ingest_parcels(text).unwrap_err() {
            IngestError::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn attributes_and_round_trip() {
        let mut f = square_feature("a", 0.0, 10.0);
        f["properties"]["zoning"] = json!("WA");
        f["properties"]["area_m2"] = json!(100.05);
        let first = ingest_parcels(&collection(vec![f, square_feature("b", 30.0, 3.0)])).unwrap().set;
        assert_eq!(first.get("a").unwrap().attributes()["zoning"], json!("WA"));
        assert_eq!(first.get("a").unwrap().area_m2(), 100.05);
        let again = ingest_parcels(&first.to_geojson()).unwrap();
        assert!(again.diagnostics.is_empty());
        assert_eq!(again.set, first);
    }

    #[test]
    fn equirectangular_projection() {
        let text = json!({
            "type": "FeatureCollection",
            "projection": {"type": "local_equirectangular", "origin": [10.0, 53.55]},
            "features": [{
                "type": "Feature",
                "properties": {"id": "a", "city_owned": false, "designation": "x"},
                "geometry": {"type": "Polygon", "coordinates": [[[10.0, 53.55], [10.001, 53.55], [10.001, 53.551], [10.0, 53.551], [10.0, 53.55]]]},
            }],
        })
        .to_string();
        let set = ingest_parcels(&text).unwrap().set;
        let a = set.get("a").unwrap().area_m2();
        // ~66 m by ~111 m
        assert!(a > 7_000.0 && a < 7_800.0, "{a}");
    }

    #[test]
    fn layer_members() {
        let text = json!({
            "type": "FeatureCollection",
            "name": "park",
            "severity": "less",
            "features": [square_feature("ignored", 0.0, 2.0)],
        })
        .to_string();
        let layer = ingest_layer(&text).unwrap();
        assert_eq!(layer.name(), "park");
        assert_eq!(layer.severity(), Severity::LessRestrictive);
        let again = ingest_layer(&layer.to_geojson()).unwrap();
        assert_eq!(again, layer);

        let bad = text.replace("\"less\"", "\"medium\"");
        assert!(matches!(ingest_layer(&bad), Err(IngestError::BadSeverity(_))));
    }
}
