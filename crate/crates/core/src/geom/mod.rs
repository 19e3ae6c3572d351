//! Planar geometry kernel.
//!
//! Every coordinate lives in one projected, metric reference frame (meters
//! east and north). Polygons are validated on construction: rings are
//! closed, carry at least three distinct vertices, do not self-intersect,
//! and are normalized so the exterior runs counter-clockwise and holes run
//! clockwise. Interior is therefore always on the left of a directed edge,
//! which the overlay engine in [`overlay`] relies on.

mod overlay;
mod pip;

pub use overlay::{intersection_area, multi_intersection_area, union_area, SNAP_PER_METER};
pub use pip::Containment;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point in the projected planar frame, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for PlanarPoint {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<PlanarPoint> for [f64; 2] {
    fn from(p: PlanarPoint) -> Self {
        [p.x, p.y]
    }
}

impl From<(f64, f64)> for PlanarPoint {
    fn from((x, y): (f64, f64)) -> Self {
        Self { x, y }
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min: PlanarPoint,
    pub max: PlanarPoint,
}

impl BBox {
    pub fn of_points<'a>(points: impl IntoIterator<Item = &'a PlanarPoint>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let mut bb = BBox { min: first, max: first };
        for p in it {
            bb.min.x = bb.min.x.min(p.x);
            bb.min.y = bb.min.y.min(p.y);
            bb.max.x = bb.max.x.max(p.x);
            bb.max.y = bb.max.y.max(p.y);
        }
        Some(bb)
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            min: PlanarPoint::new(self.min.x.min(other.min.x), self.min.y.min(other.min.y)),
            max: PlanarPoint::new(self.max.x.max(other.max.x), self.max.y.max(other.max.y)),
        }
    }

    pub fn intersects(&self, other: &BBox) -> bool {
        self.min.x <= other.max.x
            && other.min.x <= self.max.x
            && self.min.y <= other.max.y
            && other.min.y <= self.max.y
    }

    pub fn contains(&self, p: PlanarPoint) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

/// Which invariant a ring failed. Ring index 0 is the exterior, `i > 0` is
/// hole `i - 1`.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("ring {ring}: vertex {vertex} is not finite")]
    NonFinite { ring: usize, vertex: usize },
    #[error("ring {ring}: needs at least 3 distinct vertices, found {distinct}")]
    TooFewVertices { ring: usize, distinct: usize },
    #[error("ring {ring}: not closed (first vertex differs from last)")]
    Unclosed { ring: usize },
    #[error("ring {ring}: zero area")]
    ZeroArea { ring: usize },
    #[error("ring {ring} edge {edge} intersects ring {other_ring} edge {other_edge}")]
    SelfIntersection {
        ring: usize,
        edge: usize,
        other_ring: usize,
        other_edge: usize,
    },
    #[error("ring {ring}: hole lies outside the exterior ring")]
    HoleOutsideExterior { ring: usize },
    #[error("polygon components {a} and {b} overlap")]
    OverlappingComponents { a: usize, b: usize },
    #[error("geometry has no polygon components")]
    Empty,
}

/// A validated polygon with optional holes. Rings are stored closed
/// (first vertex repeated at the end).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolygonShape {
    exterior: Vec<PlanarPoint>,
    holes: Vec<Vec<PlanarPoint>>,
    #[serde(skip)]
    bbox: BBox,
}

impl PolygonShape {
    /// Validate and normalize rings. Orientation is fixed up rather than
    /// rejected; every other violation is an error.
    pub fn new(
        exterior: Vec<PlanarPoint>,
        holes: Vec<Vec<PlanarPoint>>,
    ) -> Result<Self, GeometryError> {
        let mut exterior = clean_ring(exterior, 0)?;
        let mut holes = holes
            .into_iter()
            .enumerate()
            .map(|(i, h)| clean_ring(h, i + 1))
            .collect::<Result<Vec<_>, _>>()?;

        let mut rings: Vec<&[PlanarPoint]> = vec![&exterior];
        rings.extend(holes.iter().map(Vec::as_slice));
        check_simple(&rings)?;

        orient_ring(&mut exterior, 0, true)?;
        for (i, h) in holes.iter_mut().enumerate() {
            orient_ring(h, i + 1, false)?;
        }

        for (i, hole) in holes.iter().enumerate() {
            // rings are disjoint, so one vertex decides hole placement
            if pip::ring_contains(&exterior, hole[0]) != Containment::Inside {
                return Err(GeometryError::HoleOutsideExterior { ring: i + 1 });
            }
        }

        let bbox = BBox::of_points(&exterior).expect("validated ring is non-empty");
        Ok(Self { exterior, holes, bbox })
    }

    /// Axis-aligned rectangle, counter-clockwise.
    pub fn rect(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self, GeometryError> {
        Self::new(
            vec![
                PlanarPoint::new(min_x, min_y),
                PlanarPoint::new(max_x, min_y),
                PlanarPoint::new(max_x, max_y),
                PlanarPoint::new(min_x, max_y),
                PlanarPoint::new(min_x, min_y),
            ],
            vec![],
        )
    }

    pub fn exterior(&self) -> &[PlanarPoint] {
        &self.exterior
    }

    pub fn holes(&self) -> &[Vec<PlanarPoint>] {
        &self.holes
    }

    pub fn rings(&self) -> impl Iterator<Item = &[PlanarPoint]> {
        std::iter::once(self.exterior.as_slice()).chain(self.holes.iter().map(Vec::as_slice))
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    /// Shoelace area of the exterior minus the holes.
    pub fn area(&self) -> f64 {
        // holes are clockwise, so their signed area is already negative
        self.rings().map(signed_ring_area).sum()
    }

    pub fn contains(&self, p: PlanarPoint) -> Containment {
        pip::shape_contains(self, p)
    }

    /// Vertex-average of the exterior ring (closing vertex excluded).
    pub fn vertex_centroid(&self) -> PlanarPoint {
        let ring = &self.exterior[..self.exterior.len() - 1];
        let n = ring.len() as f64;
        let (sx, sy) = ring.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        PlanarPoint::new(sx / n, sy / n)
    }

    /// Area-weighted centroid of the exterior ring.
    pub fn centroid(&self) -> PlanarPoint {
        let o = self.exterior[0];
        let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
        for w in self.exterior.windows(2) {
            let (px, py) = (w[0].x - o.x, w[0].y - o.y);
            let (qx, qy) = (w[1].x - o.x, w[1].y - o.y);
            let c = px * qy - qx * py;
            a2 += c;
            cx += (px + qx) * c;
            cy += (py + qy) * c;
        }
        PlanarPoint::new(o.x + cx / (3.0 * a2), o.y + cy / (3.0 * a2))
    }
}

impl<'de> Deserialize<'de> for PolygonShape {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            exterior: Vec<PlanarPoint>,
            #[serde(default)]
            holes: Vec<Vec<PlanarPoint>>,
        }
        let raw = Raw::deserialize(d)?;
        PolygonShape::new(raw.exterior, raw.holes).map_err(serde::de::Error::custom)
    }
}

/// Total area over multi-polygon components.
pub fn multi_area(shapes: &[PolygonShape]) -> f64 {
    shapes.iter().map(PolygonShape::area).sum()
}

/// Validate that multi-polygon components do not overlap in area.
pub fn check_components(shapes: &[PolygonShape]) -> Result<(), GeometryError> {
    if shapes.is_empty() {
        return Err(GeometryError::Empty);
    }
    for i in 0..shapes.len() {
        for j in i + 1..shapes.len() {
            if shapes[i].bbox().intersects(&shapes[j].bbox())
                && intersection_area(&shapes[i], &shapes[j]) > 0.0
            {
                return Err(GeometryError::OverlappingComponents { a: i, b: j });
            }
        }
    }
    Ok(())
}

pub(crate) fn signed_ring_area(ring: &[PlanarPoint]) -> f64 {
    let o = ring[0];
    let twice: f64 = ring
        .windows(2)
        .map(|w| (w[0].x - o.x) * (w[1].y - o.y) - (w[1].x - o.x) * (w[0].y - o.y))
        .sum();
    twice / 2.0
}

fn clean_ring(ring: Vec<PlanarPoint>, index: usize) -> Result<Vec<PlanarPoint>, GeometryError> {
    if let Some(v) = ring.iter().position(|p| !p.is_finite()) {
        return Err(GeometryError::NonFinite { ring: index, vertex: v });
    }
    if ring.len() < 2 || ring.first() != ring.last() {
        if ring.len() < 4 {
            return Err(GeometryError::TooFewVertices {
                ring: index,
                distinct: distinct_count(&ring),
            });
        }
        return Err(GeometryError::Unclosed { ring: index });
    }
    let mut out: Vec<PlanarPoint> = Vec::with_capacity(ring.len());
    for p in ring {
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    // out is closed; distinct vertices exclude the closing one
    let distinct = distinct_count(&out[..out.len() - 1]);
    if distinct < 3 {
        return Err(GeometryError::TooFewVertices { ring: index, distinct });
    }
    Ok(out)
}

fn orient_ring(ring: &mut [PlanarPoint], index: usize, ccw: bool) -> Result<(), GeometryError> {
    let area = signed_ring_area(ring);
    if area == 0.0 {
        return Err(GeometryError::ZeroArea { ring: index });
    }
    if (area > 0.0) != ccw {
        ring.reverse();
    }
    Ok(())
}

fn distinct_count(ring: &[PlanarPoint]) -> usize {
    let mut pts: Vec<(u64, u64)> = ring.iter().map(|p| (p.x.to_bits(), p.y.to_bits())).collect();
    pts.sort_unstable();
    pts.dedup();
    pts.len()
}

fn orient(a: PlanarPoint, b: PlanarPoint, c: PlanarPoint) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(a: PlanarPoint, b: PlanarPoint, p: PlanarPoint) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test, including touching and collinear overlap.
fn segments_touch(a: PlanarPoint, b: PlanarPoint, c: PlanarPoint, d: PlanarPoint) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// Rings must be simple and pairwise disjoint. Adjacent edges of one ring
/// may only share their common vertex.
fn check_simple(rings: &[&[PlanarPoint]]) -> Result<(), GeometryError> {
    for (ri, ring) in rings.iter().enumerate() {
        let n = ring.len() - 1;
        for i in 0..n {
            let (a, b) = (ring[i], ring[i + 1]);
            for j in i + 1..n {
                let (c, d) = (ring[j], ring[j + 1]);
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let bad = if adjacent {
                    // shared vertex is fine; collinear backtracking is not
                    let shared = if j == i + 1 { b } else { a };
                    let (other_a, other_b) = if j == i + 1 { (a, d) } else { (b, c) };
                    orient(c, d, other_a) == 0.0
                        && on_segment(c, d, other_a)
                        && other_a != shared
                        || orient(a, b, other_b) == 0.0 && on_segment(a, b, other_b) && other_b != shared
                } else {
                    segments_touch(a, b, c, d)
                };
                if bad {
                    return Err(GeometryError::SelfIntersection {
                        ring: ri,
                        edge: i,
                        other_ring: ri,
                        other_edge: j,
                    });
                }
            }
        }
        for (rj, other) in rings.iter().enumerate().skip(ri + 1) {
            for i in 0..n {
                for j in 0..other.len() - 1 {
                    if segments_touch(ring[i], ring[i + 1], other[j], other[j + 1]) {
                        return Err(GeometryError::SelfIntersection {
                            ring: ri,
                            edge: i,
                            other_ring: rj,
                            other_edge: j,
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<PlanarPoint> {
        v.iter().map(|&p| p.into()).collect()
    }

    #[test]
    fn unit_square_area() {
        let sq = PolygonShape::rect(0.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(sq.area(), 1.0);
    }

    #[test]
    fn square_with_hole() {
        let hole = pts(&[(0.25, 0.25), (0.75, 0.25), (0.75, 0.75), (0.25, 0.75), (0.25, 0.25)]);
        let sq = PolygonShape::new(
            pts(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.0, 0.0)]),
            vec![hole],
        )
        .unwrap();
        assert_eq!(sq.area(), 0.75);
    }

    #[test]
    fn square_area_is_exact_far_from_origin() {
        for &s in &[1.0, 3.0, 17.0, 250.0, 1024.0] {
            let sq = PolygonShape::rect(565_000.0, 5_933_000.0, 565_000.0 + s, 5_933_000.0 + s)
                .unwrap();
            assert_eq!(sq.area(), s * s);
        }
    }

    #[test]
    fn orientation_is_normalized() {
        let cw = pts(&[(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0), (0.0, 0.0)]);
        let sq = PolygonShape::new(cw, vec![]).unwrap();
        assert!(signed_ring_area(sq.exterior()) > 0.0);
        let hole_ccw = pts(&[(0.25, 0.25), (0.75, 0.25), (0.75, 0.75), (0.25, 0.75), (0.25, 0.25)]);
        let outer = pts(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.0, 0.0)]);
        let with_hole = PolygonShape::new(outer, vec![hole_ccw]).unwrap();
        assert!(signed_ring_area(&with_hole.holes()[0]) < 0.0);
    }

    #[test]
    fn unclosed_ring_rejected() {
        let err = PolygonShape::new(pts(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]), vec![])
            .unwrap_err();
        assert_eq!(err, GeometryError::Unclosed { ring: 0 });
    }

    #[test]
    fn degenerate_rings_rejected() {
        let err = PolygonShape::new(pts(&[(0.0, 0.0), (1.0, 0.0), (0.0, 0.0)]), vec![]).unwrap_err();
        assert!(matches!(err, GeometryError::TooFewVertices { ring: 0, .. }));
        let err = PolygonShape::new(
            pts(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (0.0, 0.0)]),
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, GeometryError::SelfIntersection { .. } | GeometryError::ZeroArea { .. }));
        let err = PolygonShape::new(
            pts(&[(0.0, 0.0), (f64::NAN, 0.0), (1.0, 1.0), (0.0, 0.0)]),
            vec![],
        )
        .unwrap_err();
        assert_eq!(err, GeometryError::NonFinite { ring: 0, vertex: 1 });
    }

    #[test]
    fn bowtie_rejected() {
        let err = PolygonShape::new(
            pts(&[(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0), (0.0, 0.0)]),
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, GeometryError::SelfIntersection { .. }));
    }

    #[test]
    fn spike_rejected() {
        // goes out along y=0 and straight back
        let err = PolygonShape::new(
            pts(&[(0.0, 0.0), (2.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 0.0)]),
            vec![],
        );
        assert!(err.is_err());
    }

    #[test]
    fn hole_outside_rejected() {
        let outer = pts(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.0, 0.0)]);
        let hole = pts(&[(2.0, 2.0), (3.0, 2.0), (3.0, 3.0), (2.0, 2.0)]);
        let err = PolygonShape::new(outer, vec![hole]).unwrap_err();
        assert_eq!(err, GeometryError::HoleOutsideExterior { ring: 1 });
    }

    #[test]
    fn hole_crossing_exterior_rejected() {
        let outer = pts(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.0, 0.0)]);
        let hole = pts(&[(0.5, 0.5), (1.5, 0.5), (1.5, 0.7), (0.5, 0.5)]);
        let err = PolygonShape::new(outer, vec![hole]).unwrap_err();
        assert!(matches!(err, GeometryError::SelfIntersection { ring: 0, other_ring: 1, .. }));
    }

    #[test]
    fn overlapping_components_rejected() {
        let a = PolygonShape::rect(0.0, 0.0, 2.0, 2.0).unwrap();
        let b = PolygonShape::rect(1.0, 1.0, 3.0, 3.0).unwrap();
        let c = PolygonShape::rect(2.0, 0.0, 3.0, 1.0).unwrap();
        assert!(check_components(&[a.clone(), c]).is_ok());
        assert_eq!(
            check_components(&[a, b]),
            Err(GeometryError::OverlappingComponents { a: 0, b: 1 })
        );
    }

    #[test]
    fn centroid_of_rectangle() {
        let r = PolygonShape::rect(10.0, 20.0, 14.0, 22.0).unwrap();
        let c = r.centroid();
        assert!((c.x - 12.0).abs() < 1e-12 && (c.y - 21.0).abs() < 1e-12);
    }
}
