//! The event log vocabulary.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ids::{AlertId, CodeId, CoderId, HighlightId, NoteId, ProjectId, Timestamp};
use crate::model::{
    DiscussionLevel, DiscussionReason, DocumentRef, DriftAssessment, DriftChoice, NoteAnchor, NoteText,
    ProjectSettings, ResearcherProfile, Span,
};

/// A code introduced by a create, merge or split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewCode {
    pub code_id: CodeId,
    pub name: String,
    #[serde(default)]
    pub definition: String,
}

impl NewCode {
    pub fn new(code_id: impl Into<CodeId>, name: impl Into<String>, definition: impl Into<String>) -> Self {
        NewCode { code_id: code_id.into(), name: name.into(), definition: definition.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MergeTarget {
    New(NewCode),
    Existing { code_id: CodeId },
}

impl MergeTarget {
    pub fn code_id(&self) -> &CodeId {
        match self {
            MergeTarget::New(code) => &code.code_id,
            MergeTarget::Existing { code_id } => code_id,
        }
    }
}

/// Kind tag plus kind-specific payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventBody {
    ProjectCreated {
        project_id: ProjectId,
        name: String,
        #[serde(default)]
        settings: ProjectSettings,
        #[serde(default)]
        blind_mode: bool,
    },
    DocumentAdded {
        document: DocumentRef,
    },
    ProfileUpserted {
        profile: ResearcherProfile,
    },
    CodeCreated {
        code: NewCode,
    },
    CodeRenamed {
        code_id: CodeId,
        name: String,
    },
    CodeRedefined {
        code_id: CodeId,
        definition: String,
    },
    CodesMerged {
        sources: Vec<CodeId>,
        target: MergeTarget,
    },
    /// Highlights not listed in `reassignments` stay on the parent code.
    CodeSplit {
        code_id: CodeId,
        children: Vec<NewCode>,
        #[serde(default)]
        reassignments: BTreeMap<HighlightId, CodeId>,
    },
    HighlightApplied {
        highlight_id: HighlightId,
        span: Span,
        code_id: CodeId,
    },
    HighlightRemoved {
        highlight_id: HighlightId,
    },
    NoteAdded {
        note_id: NoteId,
        anchor: NoteAnchor,
        #[serde(flatten)]
        text: NoteText,
    },
    DriftAlertRecorded {
        alert_id: AlertId,
        code_id: CodeId,
        #[serde(default)]
        candidate: Option<Span>,
        assessment: DriftAssessment,
    },
    DriftResolved {
        alert_id: AlertId,
        choice: DriftChoice,
    },
    /// `level: None` clears a manual override.
    DiscussionStatusSet {
        code_id: CodeId,
        level: Option<DiscussionLevel>,
        #[serde(default)]
        reasons: Vec<DiscussionReason>,
        manual: bool,
    },
    BlindModeSet {
        enabled: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    ProjectCreated,
    DocumentAdded,
    ProfileUpserted,
    CodeCreated,
    CodeRenamed,
    CodeRedefined,
    CodesMerged,
    CodeSplit,
    HighlightApplied,
    HighlightRemoved,
    NoteAdded,
    DriftAlertRecorded,
    DriftResolved,
    DiscussionStatusSet,
    BlindModeSet,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        match self {
            EventBody::ProjectCreated { .. } => EventKind::ProjectCreated,
            EventBody::DocumentAdded { .. } => EventKind::DocumentAdded,
            EventBody::ProfileUpserted { .. } => EventKind::ProfileUpserted,
            EventBody::CodeCreated { .. } => EventKind::CodeCreated,
            EventBody::CodeRenamed { .. } => EventKind::CodeRenamed,
            EventBody::CodeRedefined { .. } => EventKind::CodeRedefined,
            EventBody::CodesMerged { .. } => EventKind::CodesMerged,
            EventBody::CodeSplit { .. } => EventKind::CodeSplit,
            EventBody::HighlightApplied { .. } => EventKind::HighlightApplied,
            EventBody::HighlightRemoved { .. } => EventKind::HighlightRemoved,
            EventBody::NoteAdded { .. } => EventKind::NoteAdded,
            EventBody::DriftAlertRecorded { .. } => EventKind::DriftAlertRecorded,
            EventBody::DriftResolved { .. } => EventKind::DriftResolved,
            EventBody::DiscussionStatusSet { .. } => EventKind::DiscussionStatusSet,
            EventBody::BlindModeSet { .. } => EventKind::BlindModeSet,
        }
    }
}

/// An event before the sequencer has assigned its seq and timestamp.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposedEvent {
    pub actor: CoderId,
    #[serde(flatten)]
    pub body: EventBody,
}

impl ProposedEvent {
    pub fn new(actor: impl Into<CoderId>, body: EventBody) -> Self {
        ProposedEvent { actor: actor.into(), body }
    }

    pub fn assign(self, seq: u64, timestamp: Timestamp) -> Event {
        Event { seq, timestamp, actor: self.actor, body: self.body }
    }
}

/// One attributed, sequenced analytic action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub timestamp: Timestamp,
    pub actor: CoderId,
    #[serde(flatten)]
    pub body: EventBody,
}

impl Event {
    pub fn kind(&self) -> EventKind {
        self.body.kind()
    }

    pub fn proposal(&self) -> ProposedEvent {
        ProposedEvent { actor: self.actor.clone(), body: self.body.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn event_json_shape() {
        let ev = ProposedEvent::new(
            "alice",
            EventBody::CodeRenamed { code_id: "c1".into(), name: "Process".into() },
        )
        .assign(7, Timestamp(1000));
        let json = serde_json::to_value(&ev).unwrap();
        assert_eq!(json["kind"], "CodeRenamed");
        assert_eq!(json["seq"], 7);
        assert_eq!(json["actor"], "alice");
        assert_eq!(json["payload"]["name"], "Process");
        let back: Event = serde_json::from_value(json).unwrap();
        assert_eq!(back, ev);
    }

    #[test]
    fn note_payload_flattens_text_fields() {
        let body = EventBody::NoteAdded {
            note_id: "n1".into(),
            anchor: NoteAnchor::Span { span: Span::new("d", 0, 3) },
            text: NoteText { positionality: Some("lens".into()), ..Default::default() },
        };
        let json = serde_json::to_value(ProposedEvent::new("a", body.clone())).unwrap();
        assert_eq!(json["payload"]["positionality"], "lens");
        assert_eq!(json["payload"]["anchor"]["kind"], "span");
        let back: ProposedEvent = serde_json::from_value(json).unwrap();
        assert_eq!(back.body, body);
    }
}
