use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{BrickType, Detection, GridCell};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BrickAction {
    Removed,
    Moved,
    Placed,
}

/// One change between consecutive scans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BrickEvent {
    pub action: BrickAction,
    pub brick: BrickType,
    /// Anchor after the change (for `Removed`, where the brick was).
    pub at: GridCell,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<GridCell>,
    pub scan_seq: u64,
}

impl BrickEvent {
    pub fn placed(brick: BrickType, at: GridCell, scan_seq: u64) -> Self {
        Self { action: BrickAction::Placed, brick, at, from: None, scan_seq }
    }

    pub fn removed(brick: BrickType, at: GridCell, scan_seq: u64) -> Self {
        Self { action: BrickAction::Removed, brick, at, from: None, scan_seq }
    }

    pub fn moved(brick: BrickType, from: GridCell, to: GridCell, scan_seq: u64) -> Self {
        Self { action: BrickAction::Moved, brick, at: to, from: Some(from), scan_seq }
    }
}

fn by_type(d: &[Detection]) -> BTreeMap<BrickType, Vec<GridCell>> {
    let mut m: BTreeMap<BrickType, Vec<GridCell>> = BTreeMap::new();
    for det in d {
        m.entry(det.brick).or_default().push(det.anchor);
    }
    m
}

/// Events turning `prev` into `next`.
///
/// Bricks present at the same anchor with the same type in both scans are
/// unchanged. Of the rest, a vanished and an appeared brick of the same type
/// pair into a move, closest pairs first (ties broken by source then target
/// anchor); leftovers are removals and placements. Output is ordered
/// removals, moves, placements, each by anchor.
pub fn diff_scans(prev: &[Detection], next: &[Detection], scan_seq: u64) -> Vec<BrickEvent> {
    let before = by_type(prev);
    let after = by_type(next);
    let mut events = Vec::new();
    let empty = Vec::new();
    let types: std::collections::BTreeSet<BrickType> = before.keys().chain(after.keys()).copied().collect();

    for t in types {
        let b = before.get(&t).unwrap_or(&empty);
        let a = after.get(&t).unwrap_or(&empty);
        let mut gone: Vec<GridCell> = b.iter().filter(|c| !a.contains(c)).copied().collect();
        let mut new: Vec<GridCell> = a.iter().filter(|c| !b.contains(c)).copied().collect();
        gone.sort();
        new.sort();

        let mut pairs: Vec<(u32, GridCell, GridCell)> = Vec::with_capacity(gone.len() * new.len());
        for g in &gone {
            for n in &new {
                pairs.push((g.manhattan(n), *g, *n));
            }
        }
        pairs.sort();
        let mut used_from = Vec::new();
        let mut used_to = Vec::new();
        for (_, g, n) in pairs {
            if used_from.contains(&g) || used_to.contains(&n) {
                continue;
            }
            used_from.push(g);
            used_to.push(n);
            events.push(BrickEvent::moved(t, g, n, scan_seq));
        }
        for g in gone.into_iter().filter(|g| !used_from.contains(g)) {
            events.push(BrickEvent::removed(t, g, scan_seq));
        }
        for n in new.into_iter().filter(|n| !used_to.contains(n)) {
            events.push(BrickEvent::placed(t, n, scan_seq));
        }
    }
    events.sort_by_key(|e| (e.action, e.at, e.from, e.brick));
    events
}

/// Apply events to a detection set. Returns `None` when an event refers to
/// a brick that is not there.
pub fn apply_events(state: &[Detection], events: &[BrickEvent]) -> Option<Vec<Detection>> {
    let mut s = state.to_vec();
    for e in events {
        let take = |s: &mut Vec<Detection>, at: GridCell| -> Option<()> {
            let i = s.iter().position(|d| d.anchor == at && d.brick == e.brick)?;
            s.remove(i);
            Some(())
        };
        match e.action {
            BrickAction::Removed => take(&mut s, e.at)?,
            BrickAction::Moved => {
                take(&mut s, e.from?)?;
                s.push(Detection { anchor: e.at, brick: e.brick });
            }
            BrickAction::Placed => s.push(Detection { anchor: e.at, brick: e.brick }),
        }
    }
    s.sort();
    Some(s)
}

/// Append events to an NDJSON log, one per line.
pub fn write_event_log<W: Write>(mut w: W, events: &[BrickEvent]) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Read an NDJSON event log; blank lines are skipped.
pub fn read_event_log<R: BufRead>(r: R) -> std::io::Result<Vec<BrickEvent>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e = serde_json::from_str(&line).map_err(|err| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("line {}: {err}", i + 1))
        })?;
        out.push(e);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(t: BrickType, r: u32, c: u32) -> Detection {
        Detection { anchor: GridCell::new(r, c), brick: t }
    }

    #[test]
    fn unchanged_scan_is_silent() {
        let s = vec![det(BrickType::Marker, 1, 1), det(BrickType::housing(40), 5, 5)];
        assert!(diff_scans(&s, &s, 3).is_empty());
    }

    #[test]
    fn swap_type_is_remove_plus_place() {
        let a = vec![det(BrickType::housing(40), 5, 5)];
        let b = vec![det(BrickType::housing(100), 5, 5)];
        let ev = diff_scans(&a, &b, 2);
        assert_eq!(
            ev,
            vec![
                BrickEvent::removed(BrickType::housing(40), GridCell::new(5, 5), 2),
                BrickEvent::placed(BrickType::housing(100), GridCell::new(5, 5), 2),
            ]
        );
        assert_eq!(apply_events(&a, &ev).unwrap(), b);
    }

    #[test]
    fn nearest_pairs_become_moves() {
        let h = BrickType::housing(250);
        let a = vec![det(h, 0, 0), det(h, 20, 20)];
        let b = vec![det(h, 0, 3), det(h, 20, 24), det(h, 10, 10)];
        let ev = diff_scans(&a, &b, 7);
        assert_eq!(
            ev,
            vec![
                BrickEvent::moved(h, GridCell::new(0, 0), GridCell::new(0, 3), 7),
                BrickEvent::moved(h, GridCell::new(20, 20), GridCell::new(20, 24), 7),
                BrickEvent::placed(h, GridCell::new(10, 10), 7),
            ]
        );
        assert_eq!(apply_events(&a, &ev).unwrap(), {
            let mut b = b.clone();
            b.sort();
            b
        });
    }

    #[test]
    fn event_json_and_log() {
        let e = BrickEvent::moved(BrickType::Marker, GridCell::new(1, 2), GridCell::new(3, 4), 5);
        assert_eq!(
            serde_json::to_string(&e).unwrap(),
            r#"{"action":"moved","brick":{"kind":"marker"},"at":[3,4],"from":[1,2],"scan_seq":5}"#
        );
        let mut buf = Vec::new();
        write_event_log(&mut buf, &[e, BrickEvent::placed(BrickType::housing(40), GridCell::new(0, 0), 6)]).unwrap();
        let back = read_event_log(&buf[..]).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0], e);
    }

    #[test]
    fn apply_rejects_phantom_removal() {
        let ev = [BrickEvent::removed(BrickType::Marker, GridCell::new(0, 0), 1)];
        assert!(apply_events(&[], &ev).is_none());
    }
}
