use serde::{Deserialize, Serialize};

use super::{BrickType, CellFrame, ColorCell, GridCell, LookupTable};

/// A recognized brick and the top-left cell of its footprint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Detection {
    pub anchor: GridCell,
    pub brick: BrickType,
}

/// A connected non-neutral region that matched no code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnknownShape {
    pub anchor: GridCell,
    pub rows: u32,
    pub cols: u32,
    pub cells: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Decoded {
    pub scan_seq: u64,
    /// Sorted by anchor.
    pub detections: Vec<Detection>,
    pub unknown: Vec<UnknownShape>,
}

/// Find bricks in a cell frame.
///
/// Each 4-connected region of non-neutral cells is one candidate. A region
/// that fills a k×k square and matches a code of size k (in any of four
/// rotations) is a detection anchored at its top-left cell; anything else is
/// reported as unknown. Bricks therefore must not touch edge-to-edge.
pub fn decode(frame: &CellFrame, table: &LookupTable) -> Decoded {
    let (rows, cols) = (frame.rows(), frame.cols());
    let sizes = table.sizes();
    let mut seen = vec![false; rows * cols];
    let mut out = Decoded { scan_seq: frame.scan_seq(), ..Default::default() };
    let mut stack = Vec::new();

    for r0 in 0..rows {
        for c0 in 0..cols {
            if seen[r0 * cols + c0] || frame.get(r0, c0).is_neutral() {
                continue;
            }
            let (mut rmin, mut rmax, mut cmin, mut cmax, mut count) = (r0, r0, c0, c0, 0u32);
            seen[r0 * cols + c0] = true;
            stack.push((r0, c0));
            while let Some((r, c)) = stack.pop() {
                count += 1;
                rmin = rmin.min(r);
                rmax = rmax.max(r);
                cmin = cmin.min(c);
                cmax = cmax.max(c);
                let neighbors = [
                    (r.wrapping_sub(1), c),
                    (r + 1, c),
                    (r, c.wrapping_sub(1)),
                    (r, c + 1),
                ];
                for (nr, nc) in neighbors {
                    if nr < rows && nc < cols && !seen[nr * cols + nc] && !frame.get(nr, nc).is_neutral() {
                        seen[nr * cols + nc] = true;
                        stack.push((nr, nc));
                    }
                }
            }
            let (h, w) = (rmax - rmin + 1, cmax - cmin + 1);
            let anchor = GridCell::new(rmin as u32, cmin as u32);
            let matched = (h == w && count as usize == h * w && sizes.contains(&h))
                .then(|| {
                    let pattern: Vec<ColorCell> = (rmin..=rmax)
                        .flat_map(|r| (cmin..=cmax).map(move |c| (r, c)))
                        .map(|(r, c)| frame.get(r, c))
                        .collect();
                    table.lookup(&pattern, h)
                })
                .flatten();
            match matched {
                Some(code) => out.detections.push(Detection { anchor, brick: code.brick_type }),
                None => out.unknown.push(UnknownShape { anchor, rows: h as u32, cols: w as u32, cells: count }),
            }
        }
    }
    out.detections.sort();
    out
}
