use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::TangibleError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("grid must have even row and column counts of at least 4, got {rows}x{cols}")]
    Dimensions { rows: usize, cols: usize },
    #[error("cell_px must be at least 2")]
    CellSize,
}

/// Grid geometry of the table surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct GridSpec {
    rows: usize,
    cols: usize,
    cell_px: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    #[serde(default = "default_dim")]
    rows: usize,
    #[serde(default = "default_dim")]
    cols: usize,
    #[serde(default = "default_cell_px")]
    cell_px: u32,
}

fn default_dim() -> usize {
    32
}

fn default_cell_px() -> u32 {
    8
}

impl TryFrom<RawGrid> for GridSpec {
    type Error = GridError;
    fn try_from(r: RawGrid) -> Result<Self, GridError> {
        GridSpec::new(r.rows, r.cols, r.cell_px)
    }
}

impl From<GridSpec> for RawGrid {
    fn from(g: GridSpec) -> Self {
        RawGrid { rows: g.rows, cols: g.cols, cell_px: g.cell_px }
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { rows: 32, cols: 32, cell_px: 8 }
    }
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize, cell_px: u32) -> Result<Self, GridError> {
        if rows < 4 || cols < 4 || rows % 2 != 0 || cols % 2 != 0 {
            return Err(GridError::Dimensions { rows, cols });
        }
        if cell_px < 2 {
            return Err(GridError::CellSize);
        }
        Ok(Self { rows, cols, cell_px })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cell_px(&self) -> u32 {
        self.cell_px
    }

    /// Pixel size `(width, height)` of a full frame.
    pub fn image_size(&self) -> (u32, u32) {
        (self.cols as u32 * self.cell_px, self.rows as u32 * self.cell_px)
    }

    pub fn quadrant_rows(&self) -> usize {
        self.rows / 2
    }

    pub fn quadrant_cols(&self) -> usize {
        self.cols / 2
    }

    pub fn contains(&self, cell: GridCell) -> bool {
        (cell.row as usize) < self.rows && (cell.col as usize) < self.cols
    }
}

/// A grid cell address. Row 0 is the top (north) edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[u32; 2]", into = "[u32; 2]")]
pub struct GridCell {
    pub row: u32,
    pub col: u32,
}

impl GridCell {
    pub const fn new(row: u32, col: u32) -> Self {
        Self { row, col }
    }

    pub fn manhattan(&self, other: &GridCell) -> u32 {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }
}

impl From<[u32; 2]> for GridCell {
    fn from([row, col]: [u32; 2]) -> Self {
        Self { row, col }
    }
}

impl From<GridCell> for [u32; 2] {
    fn from(c: GridCell) -> Self {
        [c.row, c.col]
    }
}

/// Cell color classes. `Neutral` is the empty white canvas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorCell {
    Red,
    Green,
    Blue,
    Yellow,
    Black,
    White,
    Neutral,
}

impl ColorCell {
    pub const PALETTE: [ColorCell; 6] = [
        ColorCell::Red,
        ColorCell::Green,
        ColorCell::Blue,
        ColorCell::Yellow,
        ColorCell::Black,
        ColorCell::White,
    ];

    /// Reference color as seen through the table. Brick white sits well
    /// below the canvas brightness so the two stay separable under noise.
    pub fn rgb(self) -> [u8; 3] {
        match self {
            ColorCell::Red => [230, 40, 40],
            ColorCell::Green => [40, 170, 70],
            ColorCell::Blue => [40, 70, 210],
            ColorCell::Yellow => [240, 210, 40],
            ColorCell::Black => [25, 25, 25],
            ColorCell::White => [150, 150, 150],
            ColorCell::Neutral => [255, 255, 255],
        }
    }

    pub fn is_neutral(self) -> bool {
        self == ColorCell::Neutral
    }
}

/// One decoded scan: a color per cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellFrame {
    rows: usize,
    cols: usize,
    cells: Vec<ColorCell>,
    scan_seq: u64,
}

impl CellFrame {
    pub fn neutral(rows: usize, cols: usize, scan_seq: u64) -> Self {
        Self { rows, cols, cells: vec![ColorCell::Neutral; rows * cols], scan_seq }
    }

    pub fn for_grid(spec: &GridSpec, scan_seq: u64) -> Self {
        Self::neutral(spec.rows(), spec.cols(), scan_seq)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn scan_seq(&self) -> u64 {
        self.scan_seq
    }

    pub fn with_scan_seq(mut self, scan_seq: u64) -> Self {
        self.scan_seq = scan_seq;
        self
    }

    pub fn get(&self, row: usize, col: usize) -> ColorCell {
        self.cells[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, c: ColorCell) {
        self.cells[row * self.cols + col] = c;
    }

    pub fn is_all_neutral(&self) -> bool {
        self.cells.iter().all(|c| c.is_neutral())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizeConfig {
    /// Max Euclidean RGB distance (0-255 scale) to accept a palette match.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Side of the sampled central square, as a fraction of the cell side.
    #[serde(default = "default_center")]
    pub center_fraction: f64,
}

fn default_tolerance() -> f64 {
    60.0
}

fn default_center() -> f64 {
    0.5
}

impl Default for QuantizeConfig {
    fn default() -> Self {
        Self { tolerance: default_tolerance(), center_fraction: default_center() }
    }
}

/// Label every cell with the nearest palette color of its central-region
/// mean, or `Neutral` when nothing lies within tolerance.
pub fn quantize(
    img: &RgbImage,
    spec: &GridSpec,
    scan_seq: u64,
    cfg: &QuantizeConfig,
) -> Result<CellFrame, TangibleError> {
    let (w, h) = spec.image_size();
    if img.dimensions() != (w, h) {
        return Err(TangibleError::DimensionMismatch {
            expected_w: w,
            expected_h: h,
            actual_w: img.width(),
            actual_h: img.height(),
        });
    }
    let px = spec.cell_px();
    let side = ((px as f64 * cfg.center_fraction).round() as u32).clamp(1, px);
    let margin = (px - side) / 2;
    let mut frame = CellFrame::for_grid(spec, scan_seq);
    for r in 0..spec.rows() {
        for c in 0..spec.cols() {
            let (x0, y0) = (c as u32 * px + margin, r as u32 * px + margin);
            let mut sum = [0u64; 3];
            for y in y0..y0 + side {
                for x in x0..x0 + side {
                    let p = img.get_pixel(x, y).0;
                    for k in 0..3 {
                        sum[k] += p[k] as u64;
                    }
                }
            }
            let n = (side * side) as f64;
            let mean = sum.map(|s| s as f64 / n);
            frame.set(r, c, nearest(mean, cfg.tolerance));
        }
    }
    Ok(frame)
}

fn nearest(mean: [f64; 3], tolerance: f64) -> ColorCell {
    let mut best = (ColorCell::Neutral, f64::INFINITY);
    for c in ColorCell::PALETTE {
        let rgb = c.rgb();
        let d2: f64 = (0..3).map(|k| (mean[k] - rgb[k] as f64).powi(2)).sum();
        if d2 < best.1 {
            best = (c, d2);
        }
    }
    if best.1.sqrt() <= tolerance {
        best.0
    } else {
        ColorCell::Neutral
    }
}

/// Stitch four quadrant frames (top-left, top-right, bottom-left,
/// bottom-right) into one full-grid frame.
pub fn compose_quadrants(q: &[CellFrame; 4], spec: &GridSpec) -> Result<CellFrame, TangibleError> {
    let (qr, qc) = (spec.quadrant_rows(), spec.quadrant_cols());
    for f in q {
        if f.rows() != qr || f.cols() != qc {
            return Err(TangibleError::FrameShape {
                expected_rows: qr,
                expected_cols: qc,
                actual_rows: f.rows(),
                actual_cols: f.cols(),
            });
        }
    }
    let seqs = [q[0].scan_seq, q[1].scan_seq, q[2].scan_seq, q[3].scan_seq];
    if seqs.iter().any(|&s| s != seqs[0]) {
        return Err(TangibleError::TornScan(seqs));
    }
    let mut full = CellFrame::for_grid(spec, seqs[0]);
    for (i, f) in q.iter().enumerate() {
        let (r0, c0) = ((i / 2) * qr, (i % 2) * qc);
        for r in 0..qr {
            for c in 0..qc {
                full.set(r0 + r, c0 + c, f.get(r, c));
            }
        }
    }
    Ok(full)
}

/// Inverse of [`compose_quadrants`].
pub fn split_quadrants(frame: &CellFrame, spec: &GridSpec) -> [CellFrame; 4] {
    let (qr, qc) = (spec.quadrant_rows(), spec.quadrant_cols());
    std::array::from_fn(|i| {
        let (r0, c0) = ((i / 2) * qr, (i % 2) * qc);
        let mut q = CellFrame::neutral(qr, qc, frame.scan_seq);
        for r in 0..qr {
            for c in 0..qc {
                q.set(r, c, frame.get(r0 + r, c0 + c));
            }
        }
        q
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(32, 32, 8).is_ok());
        assert!(GridSpec::new(2, 2, 8).is_err());
        assert!(GridSpec::new(5, 8, 8).is_err());
        assert!(GridSpec::new(8, 8, 1).is_err());
        let g: GridSpec = serde_json::from_str("{}").unwrap();
        assert_eq!(g, GridSpec::default());
    }

    #[test]
    fn all_white_is_neutral() {
        let spec = GridSpec::default();
        let (w, h) = spec.image_size();
        let img = RgbImage::from_pixel(w, h, image::Rgb([255, 255, 255]));
        let f = quantize(&img, &spec, 0, &QuantizeConfig::default()).unwrap();
        assert!(f.is_all_neutral());
    }

    #[test]
    fn wrong_size_rejected() {
        let spec = GridSpec::default();
        let img = RgbImage::new(100, 256);
        assert_eq!(
            quantize(&img, &spec, 0, &QuantizeConfig::default()).unwrap_err(),
            TangibleError::DimensionMismatch { expected_w: 256, expected_h: 256, actual_w: 100, actual_h: 256 }
        );
    }

    #[test]
    fn palette_is_well_separated() {
        // any two references more than twice the tolerance apart, canvas included
        let mut all = ColorCell::PALETTE.to_vec();
        all.push(ColorCell::Neutral);
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                let (x, y) = (a.rgb(), b.rgb());
                let d: f64 = (0..3).map(|k| (x[k] as f64 - y[k] as f64).powi(2)).sum::<f64>().sqrt();
                assert!(d > 120.0, "{a:?} vs {b:?}: {d}");
            }
        }
    }

    #[test]
    fn quadrants_round_trip() {
        let spec = GridSpec::new(8, 8, 4).unwrap();
        let mut f = CellFrame::for_grid(&spec, 5);
        f.set(3, 4, ColorCell::Red);
        f.set(4, 3, ColorCell::Blue);
        let q = split_quadrants(&f, &spec);
        assert_eq!(q[1].get(3, 0), ColorCell::Red);
        assert_eq!(q[2].get(0, 3), ColorCell::Blue);
        assert_eq!(compose_quadrants(&q, &spec).unwrap(), f);
    }

    #[test]
    fn torn_scan_rejected() {
        let spec = GridSpec::default();
        let mk = |s| CellFrame::neutral(16, 16, s);
        let q = [mk(5), mk(5), mk(5), mk(6)];
        assert_eq!(compose_quadrants(&q, &spec).unwrap_err(), TangibleError::TornScan([5, 5, 5, 6]));
        let ok = [mk(5), mk(5), mk(5), mk(5)];
        assert!(compose_quadrants(&ok, &spec).unwrap().is_all_neutral());
    }
}
