//! Per-viewer projections of a [`ProjectState`].

use thiserror::Error;

use crate::ids::{CodeId, CoderId};
use crate::model::{NoteAnchor, ProjectState, ReflexiveNote};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ViewError {
    #[error("unknown viewer {0}")]
    UnknownViewer(CoderId),
    #[error("unknown code {0}")]
    UnknownCode(CodeId),
    #[error("unknown coder {0}")]
    UnknownCoder(CoderId),
}

/// What `viewer` may see. Under blind mode, other coders' highlights, notes and
/// drift alerts are removed, as are removal tombstones (they do not record an
/// author); the codebook stays fully visible.
pub fn visible_view(state: &ProjectState, viewer: &CoderId) -> Result<ProjectState, ViewError> {
    if !state.is_known_coder(viewer) {
        return Err(ViewError::UnknownViewer(viewer.clone()));
    }
    if !state.blind_mode {
        return Ok(state.clone());
    }
    let mut view = state.clone();
    view.highlights.retain(|_, h| &h.coder_id == viewer);
    view.notes.retain(|_, n| &n.author == viewer);
    view.drift_alerts.retain(|_, a| &a.raised_by == viewer);
    view.removed_highlights.clear();
    Ok(view)
}

/// Time-ordered reflexive notes, optionally restricted to notes anchored on
/// highlights of `code` and/or authored by `coder`.
pub fn reflexive_stream(
    state: &ProjectState,
    code: Option<&CodeId>,
    coder: Option<&CoderId>,
) -> Result<Vec<ReflexiveNote>, ViewError> {
    if let Some(code) = code {
        if !state.codebook.contains_key(code) {
            return Err(ViewError::UnknownCode(code.clone()));
        }
    }
    if let Some(coder) = coder {
        if !state.is_known_coder(coder) {
            return Err(ViewError::UnknownCoder(coder.clone()));
        }
    }
    let mut notes: Vec<ReflexiveNote> = state
        .notes
        .values()
        .filter(|n| coder.is_none_or(|c| &n.author == c))
        .filter(|n| {
            code.is_none_or(|code| match &n.anchor {
                NoteAnchor::Highlight { highlight_id } => {
                    state.highlights.get(highlight_id).is_some_and(|h| &h.code_id == code)
                }
                NoteAnchor::Span { .. } => false,
            })
        })
        .cloned()
        .collect();
    notes.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.note_id.cmp(&b.note_id)));
    Ok(notes)
}
