//! Brick decoding for the tangible table.
//!
//! A scan turns a frame into a [`CellFrame`] (one palette color per grid
//! cell), finds the color-coded bricks in it by matching against a
//! [`LookupTable`], and diffs consecutive scans into [`BrickEvent`]s.
//! Four cameras each see one quadrant; [`compose_quadrants`] stitches their
//! frames before decoding so bricks on a seam decode like any other.

mod decode;
mod diff;
mod frame;
mod render;
mod table;

pub use decode::{decode, Decoded, Detection, UnknownShape};
pub use diff::{apply_events, diff_scans, read_event_log, write_event_log, BrickAction, BrickEvent};
pub use frame::{
    compose_quadrants, quantize, split_quadrants, CellFrame, ColorCell, GridCell, GridError,
    GridSpec, QuantizeConfig,
};
pub use render::{add_noise, render_cells, render_pixels, rotate_frame, rotate_placement, Placement, RenderError};
pub use table::{BrickCode, BrickType, LookupTable, TableError, DEFAULT_DENOMINATIONS};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TangibleError {
    #[error("image is {actual_w}x{actual_h} px, grid expects {expected_w}x{expected_h}")]
    DimensionMismatch { expected_w: u32, expected_h: u32, actual_w: u32, actual_h: u32 },
    #[error("cell frame is {actual_rows}x{actual_cols}, expected {expected_rows}x{expected_cols}")]
    FrameShape { expected_rows: usize, expected_cols: usize, actual_rows: usize, actual_cols: usize },
    #[error("torn scan: quadrant scan_seq values {0:?} differ")]
    TornScan([u64; 4]),
    #[error("scan_seq {got} does not advance past {last}")]
    StaleScan { last: u64, got: u64 },
}

/// Stateful scan loop: decodes each frame and emits the change events
/// relative to the previous one. Frames must arrive in increasing
/// `scan_seq` order.
#[derive(Debug, Clone)]
pub struct Scanner {
    spec: GridSpec,
    table: LookupTable,
    prev: Vec<Detection>,
    last_seq: Option<u64>,
}

/// What one scan produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanOutput {
    pub events: Vec<BrickEvent>,
    pub unknown: Vec<UnknownShape>,
}

impl Scanner {
    pub fn new(spec: GridSpec, table: LookupTable) -> Self {
        Self { spec, table, prev: Vec::new(), last_seq: None }
    }

    pub fn detections(&self) -> &[Detection] {
        &self.prev
    }

    pub fn scan(&mut self, frame: &CellFrame) -> Result<ScanOutput, TangibleError> {
        if frame.rows() != self.spec.rows() || frame.cols() != self.spec.cols() {
            return Err(TangibleError::FrameShape {
                expected_rows: self.spec.rows(),
                expected_cols: self.spec.cols(),
                actual_rows: frame.rows(),
                actual_cols: frame.cols(),
            });
        }
        if let Some(last) = self.last_seq {
            if frame.scan_seq() <= last {
                return Err(TangibleError::StaleScan { last, got: frame.scan_seq() });
            }
        }
        let decoded = decode(frame, &self.table);
        let events = diff_scans(&self.prev, &decoded.detections, frame.scan_seq());
        self.prev = decoded.detections;
        self.last_seq = Some(frame.scan_seq());
        Ok(ScanOutput { events, unknown: decoded.unknown })
    }

    pub fn scan_quadrants(&mut self, quadrants: &[CellFrame; 4]) -> Result<ScanOutput, TangibleError> {
        let frame = compose_quadrants(quadrants, &self.spec)?;
        self.scan(&frame)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scanner_emits_changes_in_order() {
        let spec = GridSpec::default();
        let table = LookupTable::default_table();
        let mut scanner = Scanner::new(spec, table.clone());
        let marker = Placement::new(BrickType::Marker, GridCell::new(2, 2), 0);
        let f1 = render_cells(&[marker], &spec, &table, 1).unwrap();
        let out = scanner.scan(&f1).unwrap();
        assert_eq!(out.events, vec![BrickEvent::placed(BrickType::Marker, GridCell::new(2, 2), 1)]);

        let moved = Placement::new(BrickType::Marker, GridCell::new(7, 7), 1);
        let f2 = render_cells(&[moved], &spec, &table, 2).unwrap();
        let out = scanner.scan(&f2).unwrap();
        assert_eq!(
            out.events,
            vec![BrickEvent::moved(BrickType::Marker, GridCell::new(2, 2), GridCell::new(7, 7), 2)]
        );
        assert_eq!(
            scanner.scan(&f1).unwrap_err(),
            TangibleError::StaleScan { last: 2, got: 1 }
        );
    }
}
