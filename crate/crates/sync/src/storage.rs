//! Durable per-project event log.
//!
//! Each record is one line: `<byte length>\t<crc32 hex>\t<canonical event json>\n`.
//! An incomplete or corrupt final record is a torn write and is truncated on
//! open; damage anywhere before the final record is reported, never repaired.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use rta_core::canonical::to_canonical_bytes;
use rta_core::{Event, FoldError, ProjectState};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const LOG_FILE: &str = "events.log";
pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const PROJECTS_DIR: &str = "projects";

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: corrupt record {record}: {reason}")]
    Corrupt { path: PathBuf, record: usize, reason: String },
    #[error("{path}: log does not replay: {source}")]
    Replay { path: PathBuf, source: FoldError },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StorageError + '_ {
    move |source| StorageError::Io { path: path.to_owned(), source }
}

pub fn encode_record(event: &Event) -> Vec<u8> {
    let json = to_canonical_bytes(event).expect("events serialize");
    let mut out = format!("{}\t{:08x}\t", json.len(), crc32fast::hash(&json)).into_bytes();
    out.extend_from_slice(&json);
    out.push(b'\n');
    out
}

/// Parses one record without its trailing newline.
pub fn decode_record(line: &[u8]) -> Result<Event, String> {
    let mut parts = line.splitn(3, |b| *b == b'\t');
    let (Some(len), Some(crc), Some(json)) = (parts.next(), parts.next(), parts.next()) else {
        return Err("missing field separator".into());
    };
    let len: usize = std::str::from_utf8(len).ok().and_then(|s| s.parse().ok()).ok_or("bad length field")?;
    let crc = std::str::from_utf8(crc).ok().and_then(|s| u32::from_str_radix(s, 16).ok()).ok_or("bad checksum field")?;
    if json.len() != len {
        return Err(format!("length {} does not match header {len}", json.len()));
    }
    if crc32fast::hash(json) != crc {
        return Err("checksum mismatch".into());
    }
    serde_json::from_slice(json).map_err(|e| format!("bad event: {e}"))
}

/// Result of scanning raw log bytes.
#[derive(Debug, Default)]
pub struct Scan {
    pub events: Vec<Event>,
    /// Byte length of the valid prefix.
    pub valid_len: u64,
    /// Why the final record was rejected, if it was.
    pub torn: Option<String>,
}

/// Reads records in order. A bad record is tolerated only if nothing follows it.
pub fn scan(path: &Path, bytes: &[u8]) -> Result<Scan, StorageError> {
    let mut out = Scan::default();
    let mut offset = 0usize;
    while offset < bytes.len() {
        let rest = &bytes[offset..];
        let (line, next) = match rest.iter().position(|b| *b == b'\n') {
            Some(i) => (&rest[..i], offset + i + 1),
            None => (rest, bytes.len()),
        };
        let complete = next <= bytes.len() && bytes.get(next - 1) == Some(&b'\n');
        let parsed = if complete { decode_record(line) } else { Err("incomplete record".into()) };
        let expected = out.events.len() as u64 + 1;
        let parsed = parsed.and_then(|e| {
            if e.seq == expected {
                Ok(e)
            } else {
                Err(format!("seq {} where {expected} was expected", e.seq))
            }
        });
        match parsed {
            Ok(event) => {
                out.events.push(event);
                offset = next;
                out.valid_len = offset as u64;
            }
            Err(reason) if next >= bytes.len() => {
                out.torn = Some(reason);
                break;
            }
            Err(reason) => {
                return Err(StorageError::Corrupt { path: path.to_owned(), record: out.events.len() + 1, reason });
            }
        }
    }
    Ok(out)
}

fn sync_dir(dir: &Path) {
    // Best effort: makes renames and new files durable on filesystems that need it.
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
}

/// Append-only handle on one project's log file.
pub struct EventLog {
    path: PathBuf,
    file: File,
    len: u64,
}

impl EventLog {
    /// Opens or creates `dir/events.log`, truncating a torn final record.
    pub fn open(dir: &Path) -> Result<(EventLog, Scan), StorageError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(LOG_FILE);
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(&path).map_err(io_err(&path))?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(io_err(&path))?;
        let scan = scan(&path, &bytes)?;
        if scan.valid_len < bytes.len() as u64 {
            tracing::warn!(path = %path.display(), dropped = bytes.len() as u64 - scan.valid_len, reason = ?scan.torn, "truncating torn record");
            file.set_len(scan.valid_len).map_err(io_err(&path))?;
            file.sync_all().map_err(io_err(&path))?;
        }
        sync_dir(dir);
        Ok((EventLog { path, file, len: scan.valid_len }, scan))
    }

    /// Writes `events` as one contiguous append and syncs before returning.
    /// On failure the file is cut back so no partial batch survives.
    pub fn append(&mut self, events: &[Event]) -> Result<(), StorageError> {
        let mut buf = Vec::new();
        for e in events {
            buf.extend(encode_record(e));
        }
        let result = self.file.write_all(&buf).and_then(|_| self.file.sync_data());
        if let Err(e) = result {
            let _ = self.file.set_len(self.len);
            return Err(io_err(&self.path)(e));
        }
        self.len += buf.len() as u64;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Snapshot {
    pub seq: u64,
    pub state: ProjectState,
}

pub fn write_snapshot(dir: &Path, state: &ProjectState) -> Result<(), StorageError> {
    let path = dir.join(SNAPSHOT_FILE);
    let tmp = dir.join(format!("{SNAPSHOT_FILE}.tmp"));
    let bytes = to_canonical_bytes(&Snapshot { seq: state.last_seq, state: state.clone() }).expect("state serializes");
    let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(&bytes).and_then(|_| f.sync_all()).map_err(io_err(&tmp))?;
    fs::rename(&tmp, &path).map_err(io_err(&path))?;
    sync_dir(dir);
    Ok(())
}

pub fn read_snapshot(dir: &Path) -> Option<Snapshot> {
    let bytes = fs::read(dir.join(SNAPSHOT_FILE)).ok()?;
    match serde_json::from_slice(&bytes) {
        Ok(s) => Some(s),
        Err(e) => {
            tracing::warn!(dir = %dir.display(), error = %e, "ignoring unreadable snapshot");
            None
        }
    }
}

/// Folds `events`, starting from the snapshot when it covers a prefix of them.
pub fn restore_state(dir: &Path, events: &[Event]) -> Result<ProjectState, StorageError> {
    let replay_err = |source| StorageError::Replay { path: dir.join(LOG_FILE), source };
    let (mut state, from) = match read_snapshot(dir) {
        Some(s) if s.seq as usize <= events.len() && s.state.last_seq == s.seq => (s.state, s.seq as usize),
        _ => (ProjectState::default(), 0),
    };
    for e in &events[from..] {
        state.apply(e).map_err(replay_err)?;
    }
    Ok(state)
}

/// Read-only integrity report for one project directory.
#[derive(Debug, Clone, Serialize)]
pub struct ProjectCheck {
    pub project: String,
    pub events: usize,
    pub torn_tail: Option<String>,
    pub problems: Vec<String>,
}

impl ProjectCheck {
    pub fn ok(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Verifies framing, checksums, seq continuity, replay and snapshot agreement
/// without modifying anything.
pub fn check_project(dir: &Path) -> ProjectCheck {
    let project = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mut report = ProjectCheck { project, events: 0, torn_tail: None, problems: vec![] };
    let path = dir.join(LOG_FILE);
    let bytes = match fs::read(&path) {
        Ok(b) => b,
        Err(e) => {
            report.problems.push(format!("{}: {e}", path.display()));
            return report;
        }
    };
    let scan = match scan(&path, &bytes) {
        Ok(s) => s,
        Err(e) => {
            report.problems.push(e.to_string());
            return report;
        }
    };
    report.events = scan.events.len();
    report.torn_tail = scan.torn.clone();
    let state = match ProjectState::replay(&scan.events) {
        Ok(s) => s,
        Err(e) => {
            report.problems.push(format!("replay failed: {e}"));
            return report;
        }
    };
    if state.project_id.as_ref().map(|p| p.as_str()) != Some(report.project.as_str()) && !scan.events.is_empty() {
        report.problems.push(format!("directory name does not match project id {:?}", state.project_id));
    }
    if let Some(snap) = read_snapshot(dir) {
        match ProjectState::replay(scan.events.iter().take(snap.seq as usize)) {
            Ok(prefix) if snap.seq as usize <= scan.events.len() && prefix == snap.state => {}
            _ => report.problems.push(format!("snapshot at seq {} disagrees with the log", snap.seq)),
        }
    }
    report
}

pub fn project_dirs(data_dir: &Path) -> Result<Vec<PathBuf>, StorageError> {
    let root = data_dir.join(PROJECTS_DIR);
    if !root.exists() {
        return Ok(vec![]);
    }
    let mut dirs = Vec::new();
    for entry in fs::read_dir(&root).map_err(io_err(&root))? {
        let entry = entry.map_err(io_err(&root))?;
        if entry.path().is_dir() {
            dirs.push(entry.path());
        }
    }
    dirs.sort();
    Ok(dirs)
}

/// Project ids double as directory names.
pub fn valid_project_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

/// Fails unless `dir` exists (or can be created) and accepts writes.
pub fn ensure_writable(dir: &Path) -> Result<(), StorageError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let probe = dir.join(format!(".write-probe-{}", std::process::id()));
    File::create(&probe).and_then(|mut f| f.write_all(b"ok")).map_err(io_err(&probe))?;
    fs::remove_file(&probe).map_err(io_err(&probe))?;
    Ok(())
}
