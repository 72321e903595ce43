//! Wire frames and per-viewer blind-mode redaction.
//!
//! Every frame is `{"type": ..., "seq"?: n, "payload": ...}`. An event a viewer
//! may not see in full keeps its seq, timestamp, actor and kind, loses its
//! payload (or the hidden part of it) and gains `"redacted": true`.

use std::collections::BTreeMap;

use rta_core::canonical::to_canonical_value;
use rta_core::{CoderId, Event, EventBody, HighlightId};
use serde_json::{json, Value};

/// Sequencer-time facts needed to redact an event later.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventMeta {
    /// Blind mode after this event was applied.
    pub blind_after: bool,
    /// Authors of existing highlights the event touches (removals and split reassignments).
    pub owners: BTreeMap<HighlightId, CoderId>,
}

/// The event as `viewer` may see it when blind mode is `blind`.
pub fn event_for(event: &Event, meta: &EventMeta, viewer: &CoderId, blind: bool) -> Value {
    let full = to_canonical_value(event).expect("events serialize");
    if !blind {
        return full;
    }
    let foreign = |h: &HighlightId| meta.owners.get(h).is_some_and(|o| o != viewer);
    let hide_all = match &event.body {
        EventBody::HighlightApplied { .. } | EventBody::NoteAdded { .. } | EventBody::DriftAlertRecorded { .. } => {
            &event.actor != viewer
        }
        EventBody::HighlightRemoved { highlight_id } => meta.owners.get(highlight_id).unwrap_or(&event.actor) != viewer,
        _ => false,
    };
    let mut out = full;
    if hide_all {
        out["payload"] = Value::Null;
        out["redacted"] = Value::Bool(true);
        return out;
    }
    if let EventBody::CodeSplit { reassignments, .. } = &event.body {
        if reassignments.keys().any(foreign) {
            let kept: BTreeMap<&HighlightId, _> = reassignments.iter().filter(|(h, _)| !foreign(h)).collect();
            out["payload"]["reassignments"] = to_canonical_value(&kept).unwrap();
            out["redacted"] = Value::Bool(true);
        }
    }
    out
}

pub fn event_frame(event: &Event, meta: &EventMeta, viewer: &CoderId, blind: bool) -> Value {
    json!({"type": "event", "seq": event.seq, "payload": event_for(event, meta, viewer, blind)})
}

/// Sent once the replay part of a subscription has been delivered.
pub fn ready_frame(seq: u64) -> Value {
    json!({"type": "ready", "seq": seq, "payload": null})
}

pub fn advisory_frame(payload: &Value) -> Value {
    json!({"type": "advisory", "payload": payload})
}

pub fn error_frame(message: &str) -> Value {
    json!({"type": "error", "payload": {"message": message}})
}
