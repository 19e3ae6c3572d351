//! Session logs and scenario scripts share one NDJSON format: a header
//! line, then one [`Command`] per line.
//!
//! ```text
//! {"session_id":"d1-a","district_id":"d1","target_total":20000,"campaign_prior":0}
//! {"cmd":"advance"}
//! {"cmd":"select_focus","extent":{"min":[0,0],"max":[400,400]}}
//! {"cmd":"brick","action":"placed","brick":{"kind":"housing","capacity":500},"at":[3,4],"scan_seq":1}
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Command, SessionStart, DEFAULT_TARGET_TOTAL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionHeader {
    pub session_id: String,
    pub district_id: String,
    #[serde(default = "default_target")]
    pub target_total: i64,
    #[serde(default)]
    pub campaign_prior: i64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub prior_by_district: BTreeMap<String, i64>,
}

fn default_target() -> i64 {
    DEFAULT_TARGET_TOTAL
}

impl SessionHeader {
    pub fn start(&self) -> SessionStart {
        SessionStart {
            session_id: self.session_id.clone(),
            district_id: self.district_id.clone(),
            target_total: self.target_total,
            campaign_prior: self.campaign_prior,
            prior_by_district: self.prior_by_district.clone(),
        }
    }

    pub fn from_start(s: &SessionStart) -> Self {
        Self {
            session_id: s.session_id.clone(),
            district_id: s.district_id.clone(),
            target_total: s.target_total,
            campaign_prior: s.campaign_prior,
            prior_by_district: s.prior_by_district.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Script {
    pub header: SessionHeader,
    pub commands: Vec<Command>,
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("script has no header line")]
    MissingHeader,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parse a script or session log. Blank lines are ignored. A log cut off
/// mid-line by a crash loses only its last, partial line.
pub fn read_script<R: BufRead>(r: R) -> Result<Script, ScriptError> {
    let mut header = None;
    let mut commands = Vec::new();
    let mut lines = r.lines().enumerate().peekable();
    while let Some((i, line)) = lines.next() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let last = lines.peek().is_none();
        let err = |e: serde_json::Error| ScriptError::Line { line: i + 1, message: e.to_string() };
        if header.is_none() {
            header = Some(serde_json::from_str(&line).map_err(err)?);
            continue;
        }
        match serde_json::from_str::<Command>(&line) {
            Ok(c) => commands.push(c),
            Err(e) if last && e.is_eof() => break,
            Err(e) => return Err(err(e)),
        }
    }
    Ok(Script { header: header.ok_or(ScriptError::MissingHeader)?, commands })
}

pub fn write_header<W: Write>(mut w: W, header: &SessionHeader) -> std::io::Result<()> {
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")
}

impl Script {
    pub fn read(path: impl AsRef<Path>) -> Result<Self, ScriptError> {
        read_script(std::io::BufReader::new(File::open(path)?))
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write_header(&mut w, &self.header)?;
        for c in &self.commands {
            serde_json::to_writer(&mut w, c)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Append-only session log. Each accepted command is flushed as soon as it
/// is written, so the file is replayable after an abrupt stop.
#[derive(Debug)]
pub struct SessionLog {
    out: BufWriter<File>,
}

impl SessionLog {
    pub fn create(path: impl AsRef<Path>, header: &SessionHeader) -> std::io::Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        write_header(&mut out, header)?;
        out.flush()?;
        Ok(Self { out })
    }

    /// Open an existing log for appending, returning what it holds so far.
    /// A partial last line left by a crash is cut off first.
    pub fn reopen(path: impl AsRef<Path>) -> Result<(Script, Self), ScriptError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path)?;
        let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
        let script = read_script(&bytes[..keep])?;
        let mut file = std::fs::OpenOptions::new().write(true).open(path)?;
        file.set_len(keep as u64)?;
        std::io::Seek::seek(&mut file, std::io::SeekFrom::End(0))?;
        Ok((script, Self { out: BufWriter::new(file) }))
    }

    pub fn append(&mut self, cmd: &Command) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.out, cmd)?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }

    pub fn close(mut self) -> std::io::Result<()> {
        self.out.flush()?;
        self.out.get_ref().sync_all()
    }
}
