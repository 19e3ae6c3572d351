use super::{PlanarPoint, PolygonShape};

/// Point classification against a closed region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Containment {
    Inside,
    Boundary,
    Outside,
}

pub(crate) fn ring_contains(ring: &[PlanarPoint], p: PlanarPoint) -> Containment {
    let mut inside = false;
    for w in ring.windows(2) {
        let (a, b) = (w[0], w[1]);
        let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        if cross == 0.0
            && p.x >= a.x.min(b.x)
            && p.x <= a.x.max(b.x)
            && p.y >= a.y.min(b.y)
            && p.y <= a.y.max(b.y)
        {
            return Containment::Boundary;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    if inside {
        Containment::Inside
    } else {
        Containment::Outside
    }
}

pub(crate) fn shape_contains(shape: &PolygonShape, p: PlanarPoint) -> Containment {
    if !shape.bbox().contains(p) {
        return Containment::Outside;
    }
    match ring_contains(shape.exterior(), p) {
        Containment::Inside => {}
        other => return other,
    }
    for hole in shape.holes() {
        match ring_contains(hole, p) {
            Containment::Inside => return Containment::Outside,
            Containment::Boundary => return Containment::Boundary,
            Containment::Outside => {}
        }
    }
    Containment::Inside
}
