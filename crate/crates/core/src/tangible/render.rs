//! Synthetic scans: draw brick placements as cell frames and images.

use image::{Rgb, RgbImage};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::table::rotate_cw;
use super::{BrickType, CellFrame, ColorCell, GridCell, GridSpec, LookupTable};

/// A brick on the table: type, top-left anchor and quarter turns clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Placement {
    pub brick: BrickType,
    pub anchor: GridCell,
    pub rotation: u8,
}

impl Placement {
    pub fn new(brick: BrickType, anchor: GridCell, rotation: u8) -> Self {
        Self { brick, anchor, rotation: rotation % 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("no code for brick type {0}")]
    UnknownBrick(BrickType),
    #[error("placement {index} does not fit on the grid")]
    OutOfGrid { index: usize },
    #[error("placements {a} and {b} overlap or touch edge to edge")]
    Touching { a: usize, b: usize },
}

fn footprint(p: &Placement, k: usize) -> impl Iterator<Item = (u32, u32)> {
    let GridCell { row, col } = p.anchor;
    (0..k as u32).flat_map(move |dr| (0..k as u32).map(move |dc| (row + dr, col + dc)))
}

/// Paint placements onto a neutral frame.
///
/// Bricks must lie fully inside the grid and keep at least a diagonal gap
/// from each other: two footprints sharing a cell or an edge would read back
/// as a single region.
pub fn render_cells(
    placements: &[Placement],
    spec: &GridSpec,
    table: &LookupTable,
    scan_seq: u64,
) -> Result<CellFrame, RenderError> {
    let mut owner: Vec<Option<usize>> = vec![None; spec.rows() * spec.cols()];
    let mut frame = CellFrame::for_grid(spec, scan_seq);
    for (index, p) in placements.iter().enumerate() {
        let code = table.code_for(p.brick).ok_or(RenderError::UnknownBrick(p.brick))?;
        let k = code.size();
        let mut pattern: Vec<ColorCell> = code.pattern.iter().flatten().copied().collect();
        for _ in 0..p.rotation % 4 {
            pattern = rotate_cw(&pattern, k);
        }
        if p.anchor.row as usize + k > spec.rows() || p.anchor.col as usize + k > spec.cols() {
            return Err(RenderError::OutOfGrid { index });
        }
        for (r, c) in footprint(p, k) {
            let (r, c) = (r as usize, c as usize);
            let near = [
                Some((r, c)),
                r.checked_sub(1).map(|r| (r, c)),
                Some((r + 1, c)),
                c.checked_sub(1).map(|c| (r, c)),
                Some((r, c + 1)),
            ];
            for (nr, nc) in near.into_iter().flatten() {
                if nr < spec.rows() && nc < spec.cols() {
                    if let Some(a) = owner[nr * spec.cols() + nc] {
                        if a != index {
                            return Err(RenderError::Touching { a, b: index });
                        }
                    }
                }
            }
        }
        for (i, (r, c)) in footprint(p, k).enumerate() {
            owner[r as usize * spec.cols() + c as usize] = Some(index);
            frame.set(r as usize, c as usize, pattern[i]);
        }
    }
    Ok(frame)
}

/// Draw a cell frame as a flat-colored image at the grid's pixel scale.
pub fn render_pixels(frame: &CellFrame, spec: &GridSpec) -> RgbImage {
    let (w, h) = spec.image_size();
    let px = spec.cell_px();
    RgbImage::from_fn(w, h, |x, y| Rgb(frame.get((y / px) as usize, (x / px) as usize).rgb()))
}

/// Perturb every channel of every pixel by a uniform offset in
/// `[-amplitude*255, amplitude*255]`, clamped to the valid range.
pub fn add_noise<R: Rng + ?Sized>(img: &mut RgbImage, amplitude: f64, rng: &mut R) {
    let span = amplitude * 255.0;
    if span <= 0.0 {
        return;
    }
    for p in img.pixels_mut() {
        for ch in p.0.iter_mut() {
            let v = *ch as f64 + rng.gen_range(-span..=span);
            *ch = v.round().clamp(0.0, 255.0) as u8;
        }
    }
}

/// Rotate a whole frame 90° clockwise.
pub fn rotate_frame(frame: &CellFrame) -> CellFrame {
    let (rows, cols) = (frame.rows(), frame.cols());
    let mut out = CellFrame::neutral(cols, rows, frame.scan_seq());
    for r in 0..rows {
        for c in 0..cols {
            out.set(c, rows - 1 - r, frame.get(r, c));
        }
    }
    out
}

/// Where a k×k placement ends up after [`rotate_frame`] on a grid with
/// `rows` rows.
pub fn rotate_placement(p: &Placement, rows: usize, k: usize) -> Placement {
    let GridCell { row, col } = p.anchor;
    Placement::new(p.brick, GridCell::new(col, rows as u32 - k as u32 - row), (p.rotation + 1) % 4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tangible::{decode, quantize, QuantizeConfig};
    use rand::SeedableRng;

    #[test]
    fn touching_rejected() {
        let spec = GridSpec::default();
        let t = LookupTable::default_table();
        let a = Placement::new(BrickType::Marker, GridCell::new(0, 0), 0);
        let b = Placement::new(BrickType::housing(40), GridCell::new(0, 2), 0);
        assert_eq!(render_cells(&[a, b], &spec, &t, 0).unwrap_err(), RenderError::Touching { a: 0, b: 1 });
        let diag = Placement::new(BrickType::housing(40), GridCell::new(2, 2), 0);
        assert!(render_cells(&[a, diag], &spec, &t, 0).is_ok());
        let off = Placement::new(BrickType::Marker, GridCell::new(31, 0), 0);
        assert_eq!(render_cells(&[off], &spec, &t, 0).unwrap_err(), RenderError::OutOfGrid { index: 0 });
    }

    #[test]
    fn rotated_frame_decodes_to_rotated_placements() {
        let spec = GridSpec::default();
        let t = LookupTable::default_table();
        let ps = [
            Placement::new(BrickType::housing(1500), GridCell::new(3, 9), 0),
            Placement::new(BrickType::Marker, GridCell::new(20, 1), 2),
        ];
        let f = render_cells(&ps, &spec, &t, 0).unwrap();
        let turned: Vec<Placement> = ps.iter().map(|p| rotate_placement(p, spec.rows(), 2)).collect();
        assert_eq!(rotate_frame(&f), render_cells(&turned, &spec, &t, 0).unwrap());
        let mut want: Vec<_> = turned.iter().map(|p| (p.anchor, p.brick)).collect();
        want.sort();
        let got: Vec<_> = decode(&rotate_frame(&f), &t).detections.iter().map(|d| (d.anchor, d.brick)).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn pixels_round_trip_through_quantize() {
        let spec = GridSpec::default();
        let t = LookupTable::default_table();
        let ps = [Placement::new(BrickType::housing(1000), GridCell::new(16, 15), 1)];
        let f = render_cells(&ps, &spec, &t, 4).unwrap();
        let mut img = render_pixels(&f, &spec);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        add_noise(&mut img, 0.10, &mut rng);
        assert_eq!(quantize(&img, &spec, 4, &QuantizeConfig::default()).unwrap(), f);
    }
}
