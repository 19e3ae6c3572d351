//! Boolean-overlay areas by boundary integration.
//!
//! The area of any region built from polygons with union and intersection
//! equals the shoelace sum over that region's boundary. Its boundary is made
//! of pieces of the input edges, so instead of building the clipped polygon
//! we split every input edge at every contact with the other shapes, decide
//! for each piece whether the result region lies on exactly one side of it,
//! and sum the oriented cross products of the pieces that qualify.
//!
//! Vertices are snapped to a 1 mm grid first. All orientation and
//! collinearity tests then run in exact integer arithmetic, and boundary
//! pieces whose endpoints are lattice points accumulate their cross products
//! exactly, so axis-aligned layouts produce exact areas.
//!
//! Pieces shared by several shapes (coincident edges) are counted once, by
//! the lowest-indexed shape that carries them.

use super::{BBox, PolygonShape};

/// Snap grid resolution: 1000 cells per meter (1 mm).
pub const SNAP_PER_METER: f64 = 1000.0;

type IPt = [i64; 2];

#[derive(Debug, Clone)]
struct Snapped {
    rings: Vec<Vec<IPt>>,
    min: IPt,
    max: IPt,
}

fn snap_coord(v: f64) -> i64 {
    (v * SNAP_PER_METER).round() as i64
}

fn snap(shape: &PolygonShape) -> Option<Snapped> {
    let mut rings = Vec::new();
    for ring in shape.rings() {
        let mut out: Vec<IPt> = Vec::with_capacity(ring.len());
        for p in ring {
            let q = [snap_coord(p.x), snap_coord(p.y)];
            if out.last() != Some(&q) {
                out.push(q);
            }
        }
        // closed ring with fewer than 3 distinct vertices collapsed under the snap
        if out.len() >= 4 {
            rings.push(out);
        } else if rings.is_empty() {
            return None;
        }
    }
    let mut min = rings[0][0];
    let mut max = min;
    for p in &rings[0] {
        min = [min[0].min(p[0]), min[1].min(p[1])];
        max = [max[0].max(p[0]), max[1].max(p[1])];
    }
    Some(Snapped { rings, min, max })
}

#[inline]
fn orient(a: IPt, b: IPt, c: IPt) -> i128 {
    (b[0] - a[0]) as i128 * (c[1] - a[1]) as i128 - (b[1] - a[1]) as i128 * (c[0] - a[0]) as i128
}

#[inline]
fn dot(a: IPt, b: IPt, c: IPt) -> i128 {
    // (c - a) . (b - a)
    (b[0] - a[0]) as i128 * (c[0] - a[0]) as i128 + (b[1] - a[1]) as i128 * (c[1] - a[1]) as i128
}

#[derive(Debug, Clone, Copy)]
struct SplitPt {
    t: f64,
    x: f64,
    y: f64,
    exact: Option<IPt>,
}

impl SplitPt {
    fn lattice(t: f64, p: IPt) -> Self {
        Self { t, x: p[0] as f64, y: p[1] as f64, exact: Some(p) }
    }
}

/// Relation of a boundary piece to another shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    In,
    Out,
    /// lies on one of the shape's edges running the same way
    Along,
    /// lies on one of the shape's edges running the opposite way
    Against,
}

fn boxes_overlap(amin: IPt, amax: IPt, bmin: IPt, bmax: IPt) -> bool {
    amin[0] <= bmax[0] && bmin[0] <= amax[0] && amin[1] <= bmax[1] && bmin[1] <= amax[1]
}

fn edge_box(a: IPt, b: IPt) -> (IPt, IPt) {
    ([a[0].min(b[0]), a[1].min(b[1])], [a[0].max(b[0]), a[1].max(b[1])])
}

/// Split points of edge `a -> b` against every edge of `other`.
fn collect_splits(a: IPt, b: IPt, other: &Snapped, out: &mut Vec<SplitPt>) {
    let (emin, emax) = edge_box(a, b);
    if !boxes_overlap(emin, emax, other.min, other.max) {
        return;
    }
    let len2 = dot(a, b, b);
    for ring in &other.rings {
        for w in ring.windows(2) {
            let (c, d) = (w[0], w[1]);
            let (fmin, fmax) = edge_box(c, d);
            if !boxes_overlap(emin, emax, fmin, fmax) {
                continue;
            }
            let d1 = orient(c, d, a);
            let d2 = orient(c, d, b);
            if d1 == 0 && d2 == 0 {
                for p in [c, d] {
                    let s = dot(a, b, p);
                    if s > 0 && s < len2 {
                        out.push(SplitPt::lattice(s as f64 / len2 as f64, p));
                    }
                }
            } else if (d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0) {
                let d3 = orient(a, b, c);
                let d4 = orient(a, b, d);
                if (d3 >= 0 && d4 <= 0) || (d3 <= 0 && d4 >= 0) {
                    let den = d1 - d2;
                    let nx = (b[0] - a[0]) as i128 * d1;
                    let ny = (b[1] - a[1]) as i128 * d1;
                    let t = d1 as f64 / den as f64;
                    if nx % den == 0 && ny % den == 0 {
                        let p = [a[0] + (nx / den) as i64, a[1] + (ny / den) as i64];
                        out.push(SplitPt::lattice(t, p));
                    } else {
                        out.push(SplitPt {
                            t,
                            x: a[0] as f64 + (b[0] - a[0]) as f64 * t,
                            y: a[1] as f64 + (b[1] - a[1]) as f64 * t,
                            exact: None,
                        });
                    }
                }
            }
        }
    }
}

/// Position of the midpoint `m` of a piece of edge `a -> b` against `shape`.
fn side_of(a: IPt, b: IPt, m: (f64, f64), shape: &Snapped) -> Side {
    let (mx, my) = m;
    if mx < shape.min[0] as f64
        || mx > shape.max[0] as f64
        || my < shape.min[1] as f64
        || my > shape.max[1] as f64
    {
        return Side::Out;
    }
    let mut inside = false;
    for ring in &shape.rings {
        for w in ring.windows(2) {
            let (c, d) = (w[0], w[1]);
            if orient(c, d, a) == 0 && orient(c, d, b) == 0 {
                // same supporting line; is the piece within this edge?
                let (ux, uy) = ((d[0] - c[0]) as f64, (d[1] - c[1]) as f64);
                let s = (mx - c[0] as f64) * ux + (my - c[1] as f64) * uy;
                if s > 0.0 && s < ux * ux + uy * uy {
                    return if dot(a, b, [a[0] + d[0] - c[0], a[1] + d[1] - c[1]]) > 0 {
                        Side::Along
                    } else {
                        Side::Against
                    };
                }
            }
            let (cy, dy) = (c[1] as f64, d[1] as f64);
            if (cy > my) != (dy > my) {
                let cx = c[0] as f64;
                let x = cx + (my - cy) * (d[0] as f64 - cx) / (dy - cy);
                if mx < x {
                    inside = !inside;
                }
            }
        }
    }
    if inside {
        Side::In
    } else {
        Side::Out
    }
}

/// Area in square meters of the region selected by `rule`, which receives
/// one membership flag per shape and returns whether that point set belongs
/// to the region. The rule must be false when every flag is false.
fn region_area(shapes: &[Snapped], rule: &dyn Fn(&[bool]) -> bool) -> f64 {
    if shapes.is_empty() {
        return 0.0;
    }
    let origin = shapes.iter().fold(shapes[0].min, |o, s| [o[0].min(s.min[0]), o[1].min(s.min[1])]);
    let (ox, oy) = (origin[0] as f64, origin[1] as f64);

    let mut exact_twice: i128 = 0;
    let mut float_twice: f64 = 0.0;
    let mut splits: Vec<SplitPt> = Vec::new();
    let mut left = vec![false; shapes.len()];
    let mut right = vec![false; shapes.len()];

    for (i, shape) in shapes.iter().enumerate() {
        for ring in &shape.rings {
            for w in ring.windows(2) {
                let (a, b) = (w[0], w[1]);
                splits.clear();
                splits.push(SplitPt::lattice(0.0, a));
                splits.push(SplitPt::lattice(1.0, b));
                for (j, other) in shapes.iter().enumerate() {
                    if j != i {
                        collect_splits(a, b, other, &mut splits);
                    }
                }
                splits.sort_by(|p, q| p.t.total_cmp(&q.t));
                splits.dedup_by(|q, p| match (p.exact, q.exact) {
                    (Some(pe), Some(qe)) => pe == qe,
                    _ => (q.t - p.t).abs() <= 1e-12,
                });

                'piece: for piece in splits.windows(2) {
                    let (p, q) = (piece[0], piece[1]);
                    let m = ((p.x + q.x) / 2.0, (p.y + q.y) / 2.0);
                    for (k, other) in shapes.iter().enumerate() {
                        if k == i {
                            left[k] = true;
                            right[k] = false;
                            continue;
                        }
                        let side = side_of(a, b, m, other);
                        if k < i && matches!(side, Side::Along | Side::Against) {
                            continue 'piece;
                        }
                        (left[k], right[k]) = match side {
                            Side::In => (true, true),
                            Side::Out => (false, false),
                            Side::Along => (true, false),
                            Side::Against => (false, true),
                        };
                    }
                    let (l, r) = (rule(&left), rule(&right));
                    if l == r {
                        continue;
                    }
                    let sign = if l { 1 } else { -1 };
                    match (p.exact, q.exact) {
                        (Some(pe), Some(qe)) => {
                            let (px, py) = ((pe[0] - origin[0]) as i128, (pe[1] - origin[1]) as i128);
                            let (qx, qy) = ((qe[0] - origin[0]) as i128, (qe[1] - origin[1]) as i128);
                            exact_twice += sign * (px * qy - qx * py);
                        }
                        _ => {
                            let (px, py) = (p.x - ox, p.y - oy);
                            let (qx, qy) = (q.x - ox, q.y - oy);
                            float_twice += sign as f64 * (px * qy - qx * py);
                        }
                    }
                }
            }
        }
    }
    (exact_twice as f64 + float_twice) / 2.0 / (SNAP_PER_METER * SNAP_PER_METER)
}

/// Area of the geometric intersection of two polygons, in square meters.
pub fn intersection_area(a: &PolygonShape, b: &PolygonShape) -> f64 {
    if !a.bbox().intersects(&b.bbox()) {
        return 0.0;
    }
    match (snap(a), snap(b)) {
        (Some(sa), Some(sb)) => region_area(&[sa, sb], &|v| v[0] && v[1]).max(0.0),
        _ => 0.0,
    }
}

/// Area of `(∪ a) ∩ (∪ b)`. Overlaps inside either group are counted once.
pub fn multi_intersection_area(a: &[PolygonShape], b: &[PolygonShape]) -> f64 {
    let Some(abox) = a.iter().map(PolygonShape::bbox).reduce(|x, y| x.union(&y)) else {
        return 0.0;
    };
    let mut shapes: Vec<Snapped> = a.iter().filter_map(snap).collect();
    let na = shapes.len();
    shapes.extend(b.iter().filter(|s| s.bbox().intersects(&abox)).filter_map(snap));
    if shapes.len() == na || na == 0 {
        return 0.0;
    }
    region_area(&shapes, &|v| v[..na].iter().any(|&x| x) && v[na..].iter().any(|&x| x)).max(0.0)
}

/// Area of the union of the given polygons, on the snapped grid.
pub fn union_area(shapes: &[PolygonShape]) -> f64 {
    let snapped: Vec<Snapped> = shapes.iter().filter_map(snap).collect();
    region_area(&snapped, &|v| v.iter().any(|&x| x)).max(0.0)
}

#[allow(dead_code)]
pub(crate) fn bbox_of(shapes: &[PolygonShape]) -> Option<BBox> {
    shapes.iter().map(PolygonShape::bbox).reduce(|x, y| x.union(&y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::PlanarPoint;

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> PolygonShape {
        PolygonShape::rect(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn disjoint_squares() {
        assert_eq!(intersection_area(&rect(0.0, 0.0, 1.0, 1.0), &rect(2.0, 0.0, 3.0, 1.0)), 0.0);
    }

    #[test]
    fn touching_squares_have_zero_overlap() {
        assert_eq!(intersection_area(&rect(0.0, 0.0, 1.0, 1.0), &rect(1.0, 0.0, 2.0, 1.0)), 0.0);
        assert_eq!(intersection_area(&rect(0.0, 0.0, 1.0, 1.0), &rect(1.0, 1.0, 2.0, 2.0)), 0.0);
    }

    #[test]
    fn identical_shape() {
        let a = rect(3.0, 4.0, 13.0, 9.5);
        assert_eq!(intersection_area(&a, &a), a.area());
    }

    #[test]
    fn partial_overlap_exact() {
        let a = rect(0.0, 0.0, 4.0, 4.0);
        let b = rect(1.0, 2.0, 6.0, 7.0);
        assert_eq!(intersection_area(&a, &b), 6.0);
        assert_eq!(intersection_area(&b, &a), 6.0);
    }

    #[test]
    fn shared_edge_same_direction() {
        // b sits inside a along a's bottom edge
        let a = rect(0.0, 0.0, 4.0, 4.0);
        let b = rect(1.0, 0.0, 2.0, 1.0);
        assert_eq!(intersection_area(&a, &b), 1.0);
        let c = rect(0.0, 0.0, 4.0, 2.0);
        assert_eq!(intersection_area(&a, &c), 8.0);
    }

    #[test]
    fn contained_and_holes() {
        let ring = |x0: f64, y0: f64, x1: f64, y1: f64| {
            vec![
                PlanarPoint::new(x0, y0),
                PlanarPoint::new(x1, y0),
                PlanarPoint::new(x1, y1),
                PlanarPoint::new(x0, y1),
                PlanarPoint::new(x0, y0),
            ]
        };
        let donut = PolygonShape::new(ring(0.0, 0.0, 10.0, 10.0), vec![ring(2.0, 2.0, 8.0, 8.0)]).unwrap();
        assert_eq!(donut.area(), 64.0);
        assert_eq!(intersection_area(&donut, &rect(0.0, 0.0, 10.0, 10.0)), 64.0);
        assert_eq!(intersection_area(&donut, &rect(3.0, 3.0, 7.0, 7.0)), 0.0);
        assert_eq!(intersection_area(&donut, &rect(0.0, 0.0, 5.0, 5.0)), 25.0 - 9.0);
        // hole edge coincides with the other shape's edge
        assert_eq!(intersection_area(&donut, &rect(2.0, 2.0, 8.0, 9.0)), 6.0);
    }

    #[test]
    fn triangle_clip() {
        let tri = PolygonShape::new(
            vec![
                PlanarPoint::new(0.0, 0.0),
                PlanarPoint::new(2.0, 0.0),
                PlanarPoint::new(0.0, 2.0),
                PlanarPoint::new(0.0, 0.0),
            ],
            vec![],
        )
        .unwrap();
        let sq = rect(0.0, 0.0, 1.0, 1.0);
        assert_eq!(intersection_area(&tri, &sq), 1.0);
        let offset = rect(0.5, 0.5, 1.5, 1.5);
        // triangle x + y <= 2 over [0.5,1.5]^2: 1 - 0.5*1*1
        assert!((intersection_area(&tri, &offset) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn union_dedups_overlap() {
        let a = rect(0.0, 0.0, 2.0, 1.0);
        let b = rect(1.0, 0.0, 3.0, 1.0);
        assert_eq!(union_area(&[a.clone(), b.clone()]), 3.0);
        assert_eq!(union_area(&[a.clone(), a.clone(), a.clone()]), 2.0);
        let parcel = rect(0.0, 0.0, 4.0, 1.0);
        assert_eq!(multi_intersection_area(&[parcel.clone()], &[a.clone(), b.clone()]), 3.0);
        assert_eq!(multi_intersection_area(&[parcel], &[a.clone(), a]), 2.0);
    }

    #[test]
    fn multi_component_side() {
        let left = rect(0.0, 0.0, 1.0, 1.0);
        let right = rect(1.0, 0.0, 2.0, 1.0);
        let cover = rect(0.5, 0.0, 1.5, 1.0);
        assert_eq!(multi_intersection_area(&[left, right], &[cover]), 1.0);
    }
}
