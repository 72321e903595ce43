//! Event-sourced core of a collaborative reflexive thematic analysis workspace.
//!
//! Every analytic action is an [`Event`]; [`ProjectState`] is a deterministic
//! fold of the log. On top of the fold sit the provenance reconstruction
//! ([`provenance`]) and the attention-routing agreement signals ([`agreement`]).

pub mod agreement;
pub mod canonical;
pub mod event;
pub mod fold;
pub mod ids;
pub mod model;
pub mod provenance;
pub mod scenario;
#[cfg(any(test, feature = "testgen"))]
pub mod testgen;
pub mod view;

pub use event::{Event, EventBody, EventKind, MergeTarget, NewCode, ProposedEvent};
pub use fold::{fold, validate, FoldError, Rule, Violation};
pub use ids::{AlertId, CodeId, CoderId, DocId, HighlightId, NoteId, ProjectId, SegmentId, Timestamp};
pub use model::{
    Code, CodeStatus, DiscussionLevel, DiscussionReason, DiscussionStatus, DocumentRef, DriftAlert, DriftAssessment,
    DriftChoice, Highlight, LineageEntry, NoteAnchor, NoteText, ProjectSettings, ProjectState, ReflexiveNote,
    ResearcherProfile, SegmentRef, Span, StatusSetter, TransformKind,
};
pub use view::{reflexive_stream, visible_view, ViewError};
