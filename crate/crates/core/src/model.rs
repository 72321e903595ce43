//! Domain entities and the folded project state.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ids::{AlertId, CodeId, CoderId, DocId, HighlightId, NoteId, ProjectId, SegmentId, Timestamp};

/// A half-open character range `[start, end)` in one document.
///
/// Offsets count Unicode scalar values, not bytes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub doc_id: DocId,
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(doc_id: impl Into<DocId>, start: usize, end: usize) -> Self {
        Span { doc_id: doc_id.into(), start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    /// Number of characters shared with `other`; zero across documents.
    pub fn overlap_len(&self, other: &Span) -> usize {
        if self.doc_id != other.doc_id {
            return 0;
        }
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        hi.saturating_sub(lo)
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.overlap_len(other) > 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentRef {
    pub segment_id: SegmentId,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRef {
    pub doc_id: DocId,
    pub title: String,
    pub body: String,
    #[serde(default)]
    pub segments: Vec<SegmentRef>,
}

impl DocumentRef {
    pub fn char_len(&self) -> usize {
        self.body.chars().count()
    }

    /// The text under `span`, or `None` when the span does not fit this document.
    pub fn text(&self, span: &Span) -> Option<String> {
        if span.doc_id != self.doc_id || span.start >= span.end || span.end > self.char_len() {
            return None;
        }
        Some(self.body.chars().skip(span.start).take(span.len()).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeStatus {
    Active,
    MergedAway,
    Retired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    MergedInto,
    MergedFrom,
    SplitInto,
    SplitFrom,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineageEntry {
    pub kind: TransformKind,
    pub related: Vec<CodeId>,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Code {
    pub code_id: CodeId,
    pub name: String,
    pub definition: String,
    pub created_by: CoderId,
    pub created_at: Timestamp,
    pub status: CodeStatus,
    pub lineage: Vec<LineageEntry>,
}

impl Code {
    pub fn is_active(&self) -> bool {
        self.status == CodeStatus::Active
    }

    /// The code this one was merged into, if any.
    pub fn merged_into(&self) -> Option<&CodeId> {
        self.lineage
            .iter()
            .find(|l| l.kind == TransformKind::MergedInto)
            .and_then(|l| l.related.first())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Highlight {
    pub highlight_id: HighlightId,
    pub span: Span,
    pub code_id: CodeId,
    pub coder_id: CoderId,
    pub created_at: Timestamp,
}

/// What a reflexive note is attached to. Raw spans allow reflection before coding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoteAnchor {
    Highlight { highlight_id: HighlightId },
    Span { span: Span },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflexiveNote {
    pub note_id: NoteId,
    pub author: CoderId,
    pub anchor: NoteAnchor,
    pub created_at: Timestamp,
    pub justification: Option<String>,
    pub positionality: Option<String>,
    pub alternatives: Option<String>,
    pub free_notes: Option<String>,
}

/// The four reflexive text fields of a note, as entered.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoteText {
    #[serde(default)]
    pub justification: Option<String>,
    #[serde(default)]
    pub positionality: Option<String>,
    #[serde(default)]
    pub alternatives: Option<String>,
    #[serde(default)]
    pub free_notes: Option<String>,
}

impl NoteText {
    pub fn is_empty(&self) -> bool {
        [&self.justification, &self.positionality, &self.alternatives, &self.free_notes]
            .iter()
            .all(|f| f.as_deref().is_none_or(|s| s.trim().is_empty()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResearcherProfile {
    pub coder_id: CoderId,
    pub display_name: String,
    #[serde(default)]
    pub qualitative_history: String,
    #[serde(default)]
    pub background_experience: String,
    #[serde(default)]
    pub initial_data_view: String,
    #[serde(default)]
    pub keywords: Option<String>,
}

impl ResearcherProfile {
    pub fn is_blank(&self) -> bool {
        self.qualitative_history.trim().is_empty()
            && self.background_experience.trim().is_empty()
            && self.initial_data_view.trim().is_empty()
    }
}

/// Maximum number of keywords in a positionality keyword line.
pub const MAX_KEYWORDS: usize = 12;
/// Maximum words per keyword.
pub const MAX_KEYWORD_WORDS: usize = 5;

/// Checks a `"; "`-joined keyword line: 1..=12 non-empty items, each at most five words.
pub fn check_keywords(line: &str) -> Result<Vec<&str>, String> {
    let items: Vec<&str> = line.split("; ").collect();
    if items.len() > MAX_KEYWORDS {
        return Err(format!("{} keywords, at most {MAX_KEYWORDS} allowed", items.len()));
    }
    for item in &items {
        if item.trim().is_empty() || item.trim() != *item {
            return Err(format!("malformed keyword item {item:?}"));
        }
        let words = item.split_whitespace().count();
        if words > MAX_KEYWORD_WORDS {
            return Err(format!("keyword {item:?} has {words} words"));
        }
    }
    Ok(items)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscussionLevel {
    Aligned,
    Review,
    NeedsDiscussion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscussionReason {
    LowAgreement,
    BroadUsage,
    ManuallyFlagged,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatusSetter {
    System,
    Coder(CoderId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscussionStatus {
    pub code_id: CodeId,
    pub level: DiscussionLevel,
    pub reasons: Vec<DiscussionReason>,
    pub set_by: StatusSetter,
}

impl DiscussionStatus {
    pub fn is_manual(&self) -> bool {
        matches!(self.set_by, StatusSetter::Coder(_))
    }
}

/// Structured drift verdict. Field names match the provider response schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DriftAssessment {
    pub drift_detected: bool,
    pub explanation: String,
    #[serde(default)]
    pub suggested_definition: Option<String>,
}

impl DriftAssessment {
    pub fn check(&self) -> Result<(), String> {
        if self.explanation.trim().is_empty() {
            return Err("explanation is empty".into());
        }
        if !self.drift_detected && self.suggested_definition.is_some() {
            return Err("suggested_definition present without drift".into());
        }
        if let Some(def) = &self.suggested_definition {
            if def.trim().is_empty() {
                return Err("suggested_definition is empty".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftChoice {
    Refine,
    Split,
    ApplyOriginal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DriftAlert {
    pub alert_id: AlertId,
    pub code_id: CodeId,
    pub candidate: Option<Span>,
    pub assessment: DriftAssessment,
    pub raised_by: CoderId,
    pub raised_at: Timestamp,
    pub resolution: Option<DriftChoice>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectSettings {
    /// Reject active codes whose names collide case-insensitively.
    #[serde(default = "default_true")]
    pub unique_code_names: bool,
}

fn default_true() -> bool {
    true
}

impl Default for ProjectSettings {
    fn default() -> Self {
        ProjectSettings { unique_code_names: true }
    }
}

/// Materialized view of an event log. Always a pure function of the folded prefix.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectState {
    pub project_id: Option<ProjectId>,
    pub name: String,
    pub settings: ProjectSettings,
    pub documents: BTreeMap<DocId, DocumentRef>,
    pub codebook: BTreeMap<CodeId, Code>,
    pub highlights: BTreeMap<HighlightId, Highlight>,
    /// Ids of removed highlights; highlight ids are never reused.
    pub removed_highlights: BTreeSet<HighlightId>,
    pub notes: BTreeMap<NoteId, ReflexiveNote>,
    pub profiles: BTreeMap<CoderId, ResearcherProfile>,
    /// Every coder that has authored at least one event.
    pub members: BTreeSet<CoderId>,
    pub discussion_statuses: BTreeMap<CodeId, DiscussionStatus>,
    pub drift_alerts: BTreeMap<AlertId, DriftAlert>,
    pub blind_mode: bool,
    pub last_seq: u64,
}

impl ProjectState {
    pub fn is_created(&self) -> bool {
        self.project_id.is_some()
    }

    pub fn active_codes(&self) -> impl Iterator<Item = &Code> {
        self.codebook.values().filter(|c| c.is_active())
    }

    /// Follows merge lineage to the code that currently stands for `code_id`.
    pub fn resolve_code<'a>(&'a self, code_id: &'a CodeId) -> &'a CodeId {
        let mut current = code_id;
        // Merge chains are acyclic: a code can only merge into a code that is active at that time.
        for _ in 0..=self.codebook.len() {
            match self.codebook.get(current).and_then(Code::merged_into) {
                Some(next) => current = next,
                None => break,
            }
        }
        current
    }

    pub fn is_known_coder(&self, coder: &CoderId) -> bool {
        self.members.contains(coder) || self.profiles.contains_key(coder)
    }

    pub fn span_text(&self, span: &Span) -> Option<String> {
        self.documents.get(&span.doc_id).and_then(|d| d.text(span))
    }

    pub fn highlights_for_code<'a>(&'a self, code_id: &'a CodeId) -> impl Iterator<Item = &'a Highlight> + 'a {
        self.highlights.values().filter(move |h| &h.code_id == code_id)
    }
}
