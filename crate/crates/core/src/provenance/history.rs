use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ProvenanceError;
use crate::event::{Event, EventBody, MergeTarget};
use crate::ids::{CodeId, CoderId, HighlightId, Timestamp};
use crate::model::ProjectState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryAction {
    Created,
    Renamed,
    Redefined,
    MergedInto,
    MergedFrom,
    SplitInto,
    SplitFrom,
    Applied,
    Removed,
    DriftResolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub seq: u64,
    pub timestamp: Timestamp,
    pub actor: CoderId,
    pub action: HistoryAction,
    pub detail: String,
    /// Counterpart codes of a merge or split.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub related: Vec<CodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub highlight_id: Option<HighlightId>,
}

struct Recorder<'a> {
    event: &'a Event,
    out: &'a mut BTreeMap<CodeId, Vec<HistoryEntry>>,
}

impl Recorder<'_> {
    fn push(&mut self, code: &CodeId, action: HistoryAction, detail: String, related: Vec<CodeId>, highlight: Option<&HighlightId>) {
        self.out.entry(code.clone()).or_default().push(HistoryEntry {
            seq: self.event.seq,
            timestamp: self.event.timestamp,
            actor: self.event.actor.clone(),
            action,
            detail,
            related,
            highlight_id: highlight.cloned(),
        });
    }
}

fn name_of(state: &ProjectState, code: &CodeId) -> String {
    state.codebook.get(code).map_or_else(|| code.to_string(), |c| c.name.clone())
}

/// Records the history entries `event` contributes, reading names and
/// highlight ownership from the state *before* the event.
fn record(before: &ProjectState, event: &Event, out: &mut BTreeMap<CodeId, Vec<HistoryEntry>>) {
    use HistoryAction::*;
    let mut rec = Recorder { event, out };
    match &event.body {
        EventBody::CodeCreated { code } => {
            rec.push(&code.code_id, Created, format!("created {:?}", code.name), vec![], None);
        }
        EventBody::CodeRenamed { code_id, name } => {
            let old = name_of(before, code_id);
            rec.push(code_id, Renamed, format!("{old:?} -> {name:?}"), vec![], None);
        }
        EventBody::CodeRedefined { code_id, definition } => {
            let old = before.codebook.get(code_id).map(|c| c.definition.clone()).unwrap_or_default();
            rec.push(code_id, Redefined, format!("{old:?} -> {definition:?}"), vec![], None);
        }
        EventBody::CodesMerged { sources, target } => {
            let target_id = target.code_id();
            let target_name = match target {
                MergeTarget::New(code) => code.name.clone(),
                MergeTarget::Existing { code_id } => name_of(before, code_id),
            };
            for source in sources {
                let detail = format!("merged into {target_name:?}");
                rec.push(source, MergedInto, detail, vec![target_id.clone()], None);
            }
            if let MergeTarget::New(code) = target {
                let names: Vec<String> = sources.iter().map(|s| format!("{:?}", name_of(before, s))).collect();
                let detail = format!("created {:?} by merging {}", code.name, names.join(", "));
                rec.push(target_id, Created, detail, sources.clone(), None);
            }
            for source in sources {
                let detail = format!("absorbed {:?}", name_of(before, source));
                rec.push(target_id, MergedFrom, detail, vec![source.clone()], None);
            }
        }
        EventBody::CodeSplit { code_id, children, reassignments } => {
            let parent = name_of(before, code_id);
            for child in children {
                let moved = reassignments.values().filter(|c| *c == &child.code_id).count();
                let detail = format!("split into {:?} ({moved} highlights moved)", child.name);
                rec.push(code_id, SplitInto, detail, vec![child.code_id.clone()], None);
            }
            for child in children {
                let detail = format!("created {:?} by splitting {parent:?}", child.name);
                rec.push(&child.code_id, Created, detail, vec![code_id.clone()], None);
                rec.push(&child.code_id, SplitFrom, format!("split from {parent:?}"), vec![code_id.clone()], None);
            }
        }
        EventBody::HighlightApplied { highlight_id, span, code_id } => {
            let detail = format!("applied to {} [{}, {})", span.doc_id, span.start, span.end);
            rec.push(code_id, Applied, detail, vec![], Some(highlight_id));
        }
        EventBody::HighlightRemoved { highlight_id } => {
            if let Some(h) = before.highlights.get(highlight_id) {
                let detail = format!("removed from {} [{}, {})", h.span.doc_id, h.span.start, h.span.end);
                rec.push(&h.code_id, Removed, detail, vec![], Some(highlight_id));
            }
        }
        EventBody::DriftResolved { alert_id, choice } => {
            if let Some(alert) = before.drift_alerts.get(alert_id) {
                let detail = format!("drift alert {alert_id} resolved: {choice:?}");
                rec.push(&alert.code_id, DriftResolved, detail, vec![], None);
            }
        }
        EventBody::ProjectCreated { .. }
        | EventBody::DocumentAdded { .. }
        | EventBody::ProfileUpserted { .. }
        | EventBody::NoteAdded { .. }
        | EventBody::DriftAlertRecorded { .. }
        | EventBody::DiscussionStatusSet { .. }
        | EventBody::BlindModeSet { .. } => {}
    }
}

/// Histories of every code that ever existed in the log, each ordered by seq.
pub fn histories(events: &[Event]) -> Result<BTreeMap<CodeId, Vec<HistoryEntry>>, ProvenanceError> {
    let mut state = ProjectState::default();
    let mut out = BTreeMap::new();
    for event in events {
        record(&state, event, &mut out);
        state.apply(event)?;
    }
    Ok(out)
}

/// Everything that happened to one code, directly or as a merge/split counterpart.
pub fn code_history(events: &[Event], code: &CodeId) -> Result<Vec<HistoryEntry>, ProvenanceError> {
    histories(events)?.remove(code).ok_or_else(|| ProvenanceError::UnknownCode(code.clone()))
}
