//! Validation and the deterministic fold from events to [`ProjectState`].

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{Event, EventBody, MergeTarget, NewCode, ProposedEvent};
use crate::ids::{CodeId, Timestamp};
use crate::model::{
    check_keywords, Code, CodeStatus, DiscussionReason, DiscussionStatus, DocumentRef, DriftAlert, Highlight,
    LineageEntry, NoteAnchor, ProjectState, ReflexiveNote, Span, StatusSetter, TransformKind,
};

/// The invariant a rejected event would break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    ProjectNotCreated,
    ProjectAlreadyCreated,
    EmptyActor,
    DuplicateId,
    UnknownDocument,
    UnknownCode,
    UnknownHighlight,
    UnknownAlert,
    CodeNotActive,
    EmptyName,
    DuplicateName,
    EmptyBody,
    InvalidSegments,
    SpanOutOfBounds,
    EmptySpan,
    EmptyNote,
    InvalidProfile,
    InvalidMerge,
    InvalidSplit,
    InvalidAssessment,
    AlertAlreadyResolved,
    ManualStatusInEffect,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::ProjectNotCreated => "project not created",
            Rule::ProjectAlreadyCreated => "project already created",
            Rule::EmptyActor => "empty actor",
            Rule::DuplicateId => "duplicate id",
            Rule::UnknownDocument => "unknown document",
            Rule::UnknownCode => "unknown code",
            Rule::UnknownHighlight => "unknown highlight",
            Rule::UnknownAlert => "unknown alert",
            Rule::CodeNotActive => "code not active",
            Rule::EmptyName => "empty name",
            Rule::DuplicateName => "duplicate code name",
            Rule::EmptyBody => "empty document body",
            Rule::InvalidSegments => "invalid segments",
            Rule::SpanOutOfBounds => "span out of bounds",
            Rule::EmptySpan => "empty span",
            Rule::EmptyNote => "empty note",
            Rule::InvalidProfile => "invalid profile",
            Rule::InvalidMerge => "invalid merge",
            Rule::InvalidSplit => "invalid split",
            Rule::InvalidAssessment => "invalid assessment",
            Rule::AlertAlreadyResolved => "alert already resolved",
            Rule::ManualStatusInEffect => "manual status in effect",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FoldError {
    #[error("sequence gap or duplicate: expected seq {expected}, got {found}")]
    Sequence { expected: u64, found: u64 },
    #[error("event rejected: {}", render(.0))]
    Rejected(Vec<Violation>),
}

fn render(violations: &[Violation]) -> String {
    violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Default)]
struct Checker {
    violations: Vec<Violation>,
}

impl Checker {
    fn fail(&mut self, rule: Rule, message: impl Into<String>) {
        self.violations.push(Violation { rule, message: message.into() });
    }

    fn require(&mut self, ok: bool, rule: Rule, message: impl FnOnce() -> String) {
        if !ok {
            self.fail(rule, message());
        }
    }

    fn active_code<'s>(&mut self, state: &'s ProjectState, code_id: &CodeId) -> Option<&'s Code> {
        match state.codebook.get(code_id) {
            None => {
                self.fail(Rule::UnknownCode, format!("code {code_id} does not exist"));
                None
            }
            Some(code) if !code.is_active() => {
                self.fail(Rule::CodeNotActive, format!("code {code_id} is {:?}", code.status));
                None
            }
            Some(code) => Some(code),
        }
    }

    fn span(&mut self, state: &ProjectState, span: &Span) {
        let Some(doc) = state.documents.get(&span.doc_id) else {
            self.fail(Rule::UnknownDocument, format!("document {} does not exist", span.doc_id));
            return;
        };
        if span.start >= span.end {
            self.fail(Rule::EmptySpan, format!("span [{}, {}) is empty", span.start, span.end));
        } else if span.end > doc.char_len() {
            self.fail(
                Rule::SpanOutOfBounds,
                format!("span end {} exceeds document length {}", span.end, doc.char_len()),
            );
        }
    }

    fn new_code_name(&mut self, state: &ProjectState, name: &str, ignore: &[&CodeId], taken: &mut BTreeSet<String>) {
        if name.trim().is_empty() {
            self.fail(Rule::EmptyName, "code name is empty");
            return;
        }
        if !state.settings.unique_code_names {
            return;
        }
        let key = name.trim().to_lowercase();
        let clash = state
            .active_codes()
            .any(|c| !ignore.contains(&&c.code_id) && c.name.trim().to_lowercase() == key);
        if clash || !taken.insert(key) {
            self.fail(Rule::DuplicateName, format!("an active code is already named {name:?}"));
        }
    }

    fn fresh_code_id(&mut self, state: &ProjectState, code_id: &CodeId) {
        self.require(!state.codebook.contains_key(code_id), Rule::DuplicateId, || {
            format!("code id {code_id} already used")
        });
    }
}

/// Checks `proposed` against `state`. `Ok` iff folding it (with the next seq) would succeed.
pub fn validate(state: &ProjectState, proposed: &ProposedEvent) -> Result<(), Vec<Violation>> {
    let mut ck = Checker::default();
    if proposed.actor.as_str().trim().is_empty() {
        ck.fail(Rule::EmptyActor, "actor is empty");
    }
    match &proposed.body {
        EventBody::ProjectCreated { name, .. } => {
            ck.require(!state.is_created(), Rule::ProjectAlreadyCreated, || "project already created".into());
            ck.require(!name.trim().is_empty(), Rule::EmptyName, || "project name is empty".into());
        }
        _ if !state.is_created() => ck.fail(Rule::ProjectNotCreated, "first event must be ProjectCreated"),
        EventBody::DocumentAdded { document } => check_document(&mut ck, state, document),
        EventBody::ProfileUpserted { profile } => {
            ck.require(profile.coder_id == proposed.actor, Rule::InvalidProfile, || {
                format!("{} cannot edit the profile of {}", proposed.actor, profile.coder_id)
            });
            ck.require(!profile.display_name.trim().is_empty(), Rule::InvalidProfile, || {
                "display name is empty".into()
            });
            if let Some(line) = &profile.keywords {
                if let Err(e) = check_keywords(line) {
                    ck.fail(Rule::InvalidProfile, e);
                }
            }
        }
        EventBody::CodeCreated { code } => {
            ck.fresh_code_id(state, &code.code_id);
            ck.new_code_name(state, &code.name, &[], &mut BTreeSet::new());
        }
        EventBody::CodeRenamed { code_id, name } => {
            if ck.active_code(state, code_id).is_some() {
                ck.new_code_name(state, name, &[code_id], &mut BTreeSet::new());
            }
        }
        EventBody::CodeRedefined { code_id, .. } => {
            ck.active_code(state, code_id);
        }
        EventBody::CodesMerged { sources, target } => check_merge(&mut ck, state, sources, target),
        EventBody::CodeSplit { code_id, children, reassignments } => {
            let parent_ok = ck.active_code(state, code_id).is_some();
            if children.is_empty() {
                ck.fail(Rule::InvalidSplit, "split needs at least one child code");
            }
            let mut ids = BTreeSet::new();
            let mut names = BTreeSet::new();
            for child in children {
                ck.fresh_code_id(state, &child.code_id);
                if !ids.insert(&child.code_id) || &child.code_id == code_id {
                    ck.fail(Rule::DuplicateId, format!("child id {} repeated", child.code_id));
                }
                ck.new_code_name(state, &child.name, &[], &mut names);
            }
            for (hid, target) in reassignments {
                match state.highlights.get(hid) {
                    None => ck.fail(Rule::UnknownHighlight, format!("highlight {hid} does not exist")),
                    Some(h) if parent_ok && &h.code_id != code_id => ck.fail(
                        Rule::InvalidSplit,
                        format!("highlight {hid} carries {} not the split code {code_id}", h.code_id),
                    ),
                    Some(_) => {}
                }
                ck.require(ids.contains(target), Rule::InvalidSplit, || {
                    format!("highlight {hid} reassigned to {target}, which is not a child of the split")
                });
            }
        }
        EventBody::HighlightApplied { highlight_id, span, code_id } => {
            ck.require(
                !state.highlights.contains_key(highlight_id) && !state.removed_highlights.contains(highlight_id),
                Rule::DuplicateId,
                || format!("highlight id {highlight_id} already used"),
            );
            ck.span(state, span);
            ck.active_code(state, code_id);
        }
        EventBody::HighlightRemoved { highlight_id } => {
            ck.require(state.highlights.contains_key(highlight_id), Rule::UnknownHighlight, || {
                format!("highlight {highlight_id} does not exist")
            });
        }
        EventBody::NoteAdded { note_id, anchor, text } => {
            ck.require(!state.notes.contains_key(note_id), Rule::DuplicateId, || {
                format!("note id {note_id} already used")
            });
            ck.require(!text.is_empty(), Rule::EmptyNote, || "all four note fields are empty".into());
            match anchor {
                NoteAnchor::Highlight { highlight_id } => {
                    ck.require(state.highlights.contains_key(highlight_id), Rule::UnknownHighlight, || {
                        format!("anchor highlight {highlight_id} does not exist")
                    })
                }
                NoteAnchor::Span { span } => ck.span(state, span),
            }
        }
        EventBody::DriftAlertRecorded { alert_id, code_id, candidate, assessment } => {
            ck.require(!state.drift_alerts.contains_key(alert_id), Rule::DuplicateId, || {
                format!("alert id {alert_id} already used")
            });
            ck.active_code(state, code_id);
            if let Some(span) = candidate {
                ck.span(state, span);
            }
            if let Err(e) = assessment.check() {
                ck.fail(Rule::InvalidAssessment, e);
            }
        }
        EventBody::DriftResolved { alert_id, .. } => match state.drift_alerts.get(alert_id) {
            None => ck.fail(Rule::UnknownAlert, format!("alert {alert_id} does not exist")),
            Some(a) if a.resolution.is_some() => {
                ck.fail(Rule::AlertAlreadyResolved, format!("alert {alert_id} already resolved"))
            }
            Some(_) => {}
        },
        EventBody::DiscussionStatusSet { code_id, level, manual, .. } => {
            ck.require(state.codebook.contains_key(code_id), Rule::UnknownCode, || {
                format!("code {code_id} does not exist")
            });
            if !manual {
                ck.require(level.is_some(), Rule::ManualStatusInEffect, || {
                    "only a manual change can clear a status".into()
                });
                let manual_in_effect = state.discussion_statuses.get(code_id).is_some_and(|s| s.is_manual());
                ck.require(!manual_in_effect, Rule::ManualStatusInEffect, || {
                    format!("code {code_id} has a manual status")
                });
            }
        }
        EventBody::BlindModeSet { .. } => {}
    }
    if ck.violations.is_empty() {
        Ok(())
    } else {
        Err(ck.violations)
    }
}

fn check_document(ck: &mut Checker, state: &ProjectState, doc: &DocumentRef) {
    ck.require(!state.documents.contains_key(&doc.doc_id), Rule::DuplicateId, || {
        format!("document id {} already used", doc.doc_id)
    });
    ck.require(!doc.body.is_empty(), Rule::EmptyBody, || "document body is empty".into());
    let len = doc.char_len();
    let mut prev_end = 0;
    let mut ids = BTreeSet::new();
    for seg in &doc.segments {
        let s = &seg.span;
        let ok = s.doc_id == doc.doc_id && s.start < s.end && s.end <= len && s.start >= prev_end;
        ck.require(ok, Rule::InvalidSegments, || {
            format!("segment {} [{}, {}) is out of order or out of bounds", seg.segment_id, s.start, s.end)
        });
        ck.require(ids.insert(&seg.segment_id), Rule::InvalidSegments, || {
            format!("segment id {} repeated", seg.segment_id)
        });
        prev_end = s.end;
    }
}

fn check_merge(ck: &mut Checker, state: &ProjectState, sources: &[CodeId], target: &MergeTarget) {
    let distinct: BTreeSet<_> = sources.iter().collect();
    if distinct.len() != sources.len() {
        ck.fail(Rule::InvalidMerge, "merge sources repeat");
    }
    for source in sources {
        ck.active_code(state, source);
    }
    match target {
        MergeTarget::New(code) => {
            ck.require(sources.len() >= 2, Rule::InvalidMerge, || {
                "merging into a new code needs at least two sources".into()
            });
            ck.fresh_code_id(state, &code.code_id);
            let ignore: Vec<&CodeId> = sources.iter().collect();
            ck.new_code_name(state, &code.name, &ignore, &mut BTreeSet::new());
        }
        MergeTarget::Existing { code_id } => {
            ck.require(!sources.is_empty(), Rule::InvalidMerge, || "merge has no sources".into());
            ck.require(!distinct.contains(code_id), Rule::InvalidMerge, || {
                format!("code {code_id} cannot merge into itself")
            });
            ck.active_code(state, code_id);
        }
    }
}

/// Folds one event into a copy of `state`; the input is left untouched.
pub fn fold(state: &ProjectState, event: &Event) -> Result<ProjectState, FoldError> {
    let mut next = state.clone();
    next.apply(event)?;
    Ok(next)
}

impl ProjectState {
    /// In-place fold. On error `self` is unchanged.
    pub fn apply(&mut self, event: &Event) -> Result<(), FoldError> {
        let expected = self.last_seq + 1;
        if event.seq != expected {
            return Err(FoldError::Sequence { expected, found: event.seq });
        }
        validate(self, &event.proposal()).map_err(FoldError::Rejected)?;
        self.apply_unchecked(event);
        Ok(())
    }

    /// Folds a whole log from the empty state.
    pub fn replay<'a>(events: impl IntoIterator<Item = &'a Event>) -> Result<ProjectState, FoldError> {
        let mut state = ProjectState::default();
        for event in events {
            state.apply(event)?;
        }
        Ok(state)
    }

    fn insert_code(&mut self, code: &NewCode, event: &Event, lineage: Vec<LineageEntry>) {
        self.codebook.insert(
            code.code_id.clone(),
            Code {
                code_id: code.code_id.clone(),
                name: code.name.clone(),
                definition: code.definition.clone(),
                created_by: event.actor.clone(),
                created_at: event.timestamp,
                status: CodeStatus::Active,
                lineage,
            },
        );
    }

    fn apply_unchecked(&mut self, event: &Event) {
        let seq = event.seq;
        let at: Timestamp = event.timestamp;
        match &event.body {
            EventBody::ProjectCreated { project_id, name, settings, blind_mode } => {
                self.project_id = Some(project_id.clone());
                self.name = name.clone();
                self.settings = settings.clone();
                self.blind_mode = *blind_mode;
            }
            EventBody::DocumentAdded { document } => {
                self.documents.insert(document.doc_id.clone(), document.clone());
            }
            EventBody::ProfileUpserted { profile } => {
                self.profiles.insert(profile.coder_id.clone(), profile.clone());
            }
            EventBody::CodeCreated { code } => self.insert_code(code, event, Vec::new()),
            EventBody::CodeRenamed { code_id, name } => {
                if let Some(code) = self.codebook.get_mut(code_id) {
                    code.name = name.clone();
                }
            }
            EventBody::CodeRedefined { code_id, definition } => {
                if let Some(code) = self.codebook.get_mut(code_id) {
                    code.definition = definition.clone();
                }
            }
            EventBody::CodesMerged { sources, target } => {
                let target_id = target.code_id().clone();
                let merged_from = LineageEntry { kind: TransformKind::MergedFrom, related: sources.clone(), seq };
                match target {
                    MergeTarget::New(code) => self.insert_code(code, event, vec![merged_from]),
                    MergeTarget::Existing { code_id } => {
                        if let Some(code) = self.codebook.get_mut(code_id) {
                            code.lineage.push(merged_from);
                        }
                    }
                }
                for source in sources {
                    if let Some(code) = self.codebook.get_mut(source) {
                        code.status = CodeStatus::MergedAway;
                        code.lineage.push(LineageEntry {
                            kind: TransformKind::MergedInto,
                            related: vec![target_id.clone()],
                            seq,
                        });
                    }
                }
                let sources: BTreeSet<&CodeId> = sources.iter().collect();
                for h in self.highlights.values_mut() {
                    if sources.contains(&h.code_id) {
                        h.code_id = target_id.clone();
                    }
                }
            }
            EventBody::CodeSplit { code_id, children, reassignments } => {
                let child_ids: Vec<CodeId> = children.iter().map(|c| c.code_id.clone()).collect();
                for child in children {
                    let lineage =
                        vec![LineageEntry { kind: TransformKind::SplitFrom, related: vec![code_id.clone()], seq }];
                    self.insert_code(child, event, lineage);
                }
                if let Some(parent) = self.codebook.get_mut(code_id) {
                    parent.lineage.push(LineageEntry { kind: TransformKind::SplitInto, related: child_ids, seq });
                }
                for (hid, child) in reassignments {
                    if let Some(h) = self.highlights.get_mut(hid) {
                        h.code_id = child.clone();
                    }
                }
            }
            EventBody::HighlightApplied { highlight_id, span, code_id } => {
                self.highlights.insert(
                    highlight_id.clone(),
                    Highlight {
                        highlight_id: highlight_id.clone(),
                        span: span.clone(),
                        code_id: code_id.clone(),
                        coder_id: event.actor.clone(),
                        created_at: at,
                    },
                );
            }
            EventBody::HighlightRemoved { highlight_id } => {
                self.highlights.remove(highlight_id);
                self.removed_highlights.insert(highlight_id.clone());
            }
            EventBody::NoteAdded { note_id, anchor, text } => {
                self.notes.insert(
                    note_id.clone(),
                    ReflexiveNote {
                        note_id: note_id.clone(),
                        author: event.actor.clone(),
                        anchor: anchor.clone(),
                        created_at: at,
                        justification: text.justification.clone(),
                        positionality: text.positionality.clone(),
                        alternatives: text.alternatives.clone(),
                        free_notes: text.free_notes.clone(),
                    },
                );
            }
            EventBody::DriftAlertRecorded { alert_id, code_id, candidate, assessment } => {
                self.drift_alerts.insert(
                    alert_id.clone(),
                    DriftAlert {
                        alert_id: alert_id.clone(),
                        code_id: code_id.clone(),
                        candidate: candidate.clone(),
                        assessment: assessment.clone(),
                        raised_by: event.actor.clone(),
                        raised_at: at,
                        resolution: None,
                    },
                );
            }
            EventBody::DriftResolved { alert_id, choice } => {
                if let Some(alert) = self.drift_alerts.get_mut(alert_id) {
                    alert.resolution = Some(*choice);
                }
            }
            EventBody::DiscussionStatusSet { code_id, level, reasons, manual } => match level {
                None => {
                    self.discussion_statuses.remove(code_id);
                }
                Some(level) => {
                    let mut reasons = reasons.clone();
                    if *manual && !reasons.contains(&DiscussionReason::ManuallyFlagged) {
                        reasons.push(DiscussionReason::ManuallyFlagged);
                    }
                    let set_by = if *manual { StatusSetter::Coder(event.actor.clone()) } else { StatusSetter::System };
                    self.discussion_statuses.insert(
                        code_id.clone(),
                        DiscussionStatus { code_id: code_id.clone(), level: *level, reasons, set_by },
                    );
                }
            },
            EventBody::BlindModeSet { enabled } => self.blind_mode = *enabled,
        }
        self.members.insert(event.actor.clone());
        self.last_seq = seq;
    }
}
