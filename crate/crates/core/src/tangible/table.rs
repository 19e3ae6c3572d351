use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ColorCell;

/// Housing denominations available as bricks, in accommodation places.
pub const DEFAULT_DENOMINATIONS: [u32; 6] = [40, 100, 250, 500, 1000, 1500];

const MIN_CAPACITY: u32 = 40;
const MAX_CAPACITY: u32 = 1500;

/// What a brick means when placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BrickType {
    /// Query brick: shows the parcel under it.
    Marker,
    /// Proposal brick carrying a number of accommodation places.
    Housing { capacity: u32 },
}

impl BrickType {
    pub fn housing(capacity: u32) -> Self {
        BrickType::Housing { capacity }
    }

    pub fn capacity(&self) -> Option<u32> {
        match self {
            BrickType::Marker => None,
            BrickType::Housing { capacity } => Some(*capacity),
        }
    }
}

impl std::fmt::Display for BrickType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BrickType::Marker => write!(f, "Marker"),
            BrickType::Housing { capacity } => write!(f, "Housing-{capacity}"),
        }
    }
}

/// A k×k color pattern (row-major, as seen from below) and its brick type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrickCode {
    pub pattern: Vec<Vec<ColorCell>>,
    pub brick_type: BrickType,
}

impl BrickCode {
    pub fn size(&self) -> usize {
        self.pattern.len()
    }

    fn flat(&self) -> Vec<ColorCell> {
        self.pattern.iter().flatten().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("code {index}: pattern must be a 1x1 or 2x2 square")]
    BadSize { index: usize },
    #[error("code {index}: pattern contains a neutral cell")]
    NeutralCell { index: usize },
    #[error("code {b} equals a rotation of code {a}")]
    RotationCollision { a: usize, b: usize },
    #[error("code {index}: housing capacity {capacity} is outside the denomination set")]
    Denomination { index: usize, capacity: u32 },
    #[error("brick type {0} has more than one code")]
    DuplicateType(BrickType),
    #[error("lookup table is empty")]
    Empty,
    #[error("lookup table: {0}")]
    Parse(String),
}

/// Rotate a row-major k×k pattern 90° clockwise.
pub(crate) fn rotate_cw(p: &[ColorCell], k: usize) -> Vec<ColorCell> {
    let mut out = vec![ColorCell::Neutral; k * k];
    for r in 0..k {
        for c in 0..k {
            // new[r][c] = old[k-1-c][r]
            out[r * k + c] = p[(k - 1 - c) * k + r];
        }
    }
    out
}

pub(crate) fn rotations(p: &[ColorCell], k: usize) -> [Vec<ColorCell>; 4] {
    let r1 = rotate_cw(p, k);
    let r2 = rotate_cw(&r1, k);
    let r3 = rotate_cw(&r2, k);
    [p.to_vec(), r1, r2, r3]
}

/// Validated, rotation-collision-free set of brick codes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LookupTable {
    codes: Vec<BrickCode>,
    #[serde(skip)]
    denominations: Vec<u32>,
}

#[derive(Deserialize)]
struct RawTable {
    codes: Vec<BrickCode>,
    #[serde(default)]
    denominations: Option<Vec<u32>>,
}

impl LookupTable {
    pub fn new(codes: Vec<BrickCode>, denominations: &[u32]) -> Result<Self, TableError> {
        if codes.is_empty() {
            return Err(TableError::Empty);
        }
        let mut flats = Vec::with_capacity(codes.len());
        for (index, code) in codes.iter().enumerate() {
            let k = code.size();
            if !(k == 1 || k == 2) || code.pattern.iter().any(|row| row.len() != k) {
                return Err(TableError::BadSize { index });
            }
            if code.pattern.iter().flatten().any(|c| c.is_neutral()) {
                return Err(TableError::NeutralCell { index });
            }
            if let BrickType::Housing { capacity } = code.brick_type {
                if !denominations.contains(&capacity) || !(MIN_CAPACITY..=MAX_CAPACITY).contains(&capacity) {
                    return Err(TableError::Denomination { index, capacity });
                }
            }
            if codes[..index].iter().any(|c| c.brick_type == code.brick_type) {
                return Err(TableError::DuplicateType(code.brick_type));
            }
            flats.push((k, code.flat()));
        }
        for (a, (ka, pa)) in flats.iter().enumerate() {
            for (b, (kb, pb)) in flats.iter().enumerate().skip(a + 1) {
                if ka == kb && rotations(pa, *ka).iter().any(|r| r == pb) {
                    return Err(TableError::RotationCollision { a, b });
                }
            }
        }
        Ok(Self { codes, denominations: denominations.to_vec() })
    }

    /// One Marker and one code per default housing denomination, all 2×2.
    pub fn default_table() -> Self {
        use ColorCell::*;
        let code = |p: [[ColorCell; 2]; 2], t| BrickCode { pattern: p.iter().map(|r| r.to_vec()).collect(), brick_type: t };
        let codes = vec![
            code([[Black, White], [White, Black]], BrickType::Marker),
            code([[Red, Red], [Red, Red]], BrickType::housing(40)),
            code([[Green, Green], [Green, Green]], BrickType::housing(100)),
            code([[Blue, Blue], [Blue, Blue]], BrickType::housing(250)),
            code([[Yellow, Yellow], [Yellow, Yellow]], BrickType::housing(500)),
            code([[Red, Blue], [Blue, Red]], BrickType::housing(1000)),
            code([[Red, Green], [Blue, Yellow]], BrickType::housing(1500)),
        ];
        Self::new(codes, &DEFAULT_DENOMINATIONS).expect("default table is valid")
    }

    /// Parse the JSON table format; `denominations` defaults to the standard set.
    pub fn from_json(text: &str) -> Result<Self, TableError> {
        let raw: RawTable = serde_json::from_str(text).map_err(|e| TableError::Parse(e.to_string()))?;
        let denoms = raw.denominations.unwrap_or_else(|| DEFAULT_DENOMINATIONS.to_vec());
        Self::new(raw.codes, &denoms)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, TableError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| TableError::Parse(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::json!({
            "denominations": self.denominations,
            "codes": self.codes,
        }))
        .expect("table serializes")
    }

    pub fn codes(&self) -> &[BrickCode] {
        &self.codes
    }

    pub fn denominations(&self) -> &[u32] {
        &self.denominations
    }

    pub fn code_for(&self, t: BrickType) -> Option<&BrickCode> {
        self.codes.iter().find(|c| c.brick_type == t)
    }

    /// Distinct code sizes in use.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.codes.iter().map(BrickCode::size).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Find the code matching a k×k row-major pattern under any rotation.
    pub fn lookup(&self, pattern: &[ColorCell], k: usize) -> Option<&BrickCode> {
        let rots = rotations(pattern, k);
        self.codes
            .iter()
            .filter(|c| c.size() == k)
            .find(|c| {
                let flat = c.flat();
                rots.iter().any(|r| *r == flat)
            })
    }
}
