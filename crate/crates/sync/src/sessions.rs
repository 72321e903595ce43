//! Anonymous sessions. Each session is a fresh coder identity behind a bearer token.
//!
//! Only a SHA-256 digest of each token is written to disk.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rand::rngs::OsRng;
use rand::RngCore;
use rta_core::{CoderId, Timestamp};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SESSIONS_FILE: &str = "sessions.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub coder_id: CoderId,
    pub issued_at: Timestamp,
    pub expires_at: Timestamp,
}

/// What the client receives once, at creation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IssuedSession {
    pub token: String,
    #[serde(flatten)]
    pub session: Session,
}

#[derive(Serialize, Deserialize)]
struct Record {
    token_sha256: String,
    #[serde(flatten)]
    session: Session,
}

fn digest(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

pub struct SessionStore {
    path: PathBuf,
    ttl_ms: i64,
    inner: Mutex<(File, HashMap<String, Session>)>,
}

impl SessionStore {
    /// Loads `dir/sessions.jsonl`; unreadable lines (such as a torn final write) are skipped.
    pub fn open(dir: &Path, ttl_secs: u64) -> io::Result<SessionStore> {
        let path = dir.join(SESSIONS_FILE);
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(&path)?;
        let mut raw = Vec::new();
        file.read_to_end(&mut raw)?;
        let mut map = HashMap::new();
        for line in raw.split(|b| *b == b'\n') {
            if let Ok(r) = serde_json::from_slice::<Record>(line) {
                map.insert(r.token_sha256, r.session);
            }
        }
        if raw.last().is_some_and(|b| *b != b'\n') {
            // keep the next record off the torn line
            file.write_all(b"\n")?;
        }
        Ok(SessionStore { path, ttl_ms: (ttl_secs as i64).saturating_mul(1000), inner: Mutex::new((file, map)) })
    }

    pub fn issue(&self) -> io::Result<IssuedSession> {
        let mut bytes = [0u8; 32];
        OsRng.fill_bytes(&mut bytes);
        let token = hex::encode(bytes);
        let now = Timestamp::now();
        let session = Session {
            coder_id: CoderId::new(format!("coder-{}", uuid::Uuid::new_v4().simple())),
            issued_at: now,
            expires_at: Timestamp(now.0.saturating_add(self.ttl_ms)),
        };
        let record = Record { token_sha256: digest(&token), session: session.clone() };
        let mut line = serde_json::to_vec(&record).expect("session serializes");
        line.push(b'\n');
        let mut guard = self.inner.lock().unwrap();
        guard.0.write_all(&line)?;
        guard.0.sync_data()?;
        guard.1.insert(record.token_sha256, session.clone());
        Ok(IssuedSession { token, session })
    }

    /// The live session behind `token`, if any.
    pub fn authenticate(&self, token: &str) -> Option<Session> {
        let guard = self.inner.lock().unwrap();
        let session = guard.1.get(&digest(token))?;
        (session.expires_at > Timestamp::now()).then(|| session.clone())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
