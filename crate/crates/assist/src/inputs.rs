//! Builds feature inputs from a read-only project state.

use std::collections::BTreeSet;

use rta_core::{reflexive_stream, CodeId, CoderId, DocumentRef, Highlight, ProjectState, ResearcherProfile, Span};

use crate::assistant::AssistError;
use crate::request::{CodeDefinition, DiscussionInput, DriftInput, KeywordsInput, Researcher, SummaryInput};

/// Characters of surrounding text on each side when a span is not inside a segment.
pub const CONTEXT_WINDOW: usize = 200;

/// Default number of most recent exemplars sent with a drift check.
pub const DEFAULT_EXEMPLAR_LIMIT: usize = 5;

fn precondition(msg: impl Into<String>) -> AssistError {
    AssistError::Precondition(msg.into())
}

fn document<'a>(state: &'a ProjectState, span: &Span) -> Result<&'a DocumentRef, AssistError> {
    let doc = state.documents.get(&span.doc_id).ok_or_else(|| precondition(format!("unknown document {}", span.doc_id)))?;
    if span.is_empty() || span.end > doc.char_len() {
        return Err(precondition("span is empty or out of bounds"));
    }
    Ok(doc)
}

/// The enclosing segment's text, or a window of text around `span`.
pub fn context_text(doc: &DocumentRef, span: &Span) -> String {
    if let Some(seg) = doc.segments.iter().find(|s| s.span.start <= span.start && span.end <= s.span.end) {
        return doc.text(&seg.span).unwrap_or_default();
    }
    let start = span.start.saturating_sub(CONTEXT_WINDOW);
    let end = (span.end + CONTEXT_WINDOW).min(doc.char_len());
    doc.text(&Span { doc_id: doc.doc_id.clone(), start, end }).unwrap_or_default()
}

/// Distinct passage texts already coded with `code_id` (after merge resolution),
/// most recent last, excluding the candidate span itself.
pub fn exemplars(state: &ProjectState, code_id: &CodeId, exclude: Option<&Span>) -> Vec<String> {
    let code = state.resolve_code(code_id);
    let mut uses: Vec<&Highlight> = state
        .highlights
        .values()
        .filter(|h| state.resolve_code(&h.code_id) == code && Some(&h.span) != exclude)
        .collect();
    uses.sort_by(|a, b| (a.created_at, &a.highlight_id).cmp(&(b.created_at, &b.highlight_id)));
    let mut seen = BTreeSet::new();
    let mut out: Vec<String> = Vec::new();
    for h in uses.iter().rev() {
        if let Some(text) = state.span_text(&h.span) {
            if seen.insert(text.clone()) {
                out.push(text);
            }
        }
    }
    out.reverse();
    out
}

pub fn drift_input(state: &ProjectState, code_id: &CodeId, candidate: &Span, limit: usize) -> Result<DriftInput, AssistError> {
    let code = state.codebook.get(code_id).ok_or_else(|| precondition(format!("unknown code {code_id}")))?;
    let code = &state.codebook[state.resolve_code(&code.code_id)];
    let doc = document(state, candidate)?;
    let mut passages = exemplars(state, &code.code_id, Some(candidate));
    let skip = passages.len().saturating_sub(limit);
    passages.drain(..skip);
    Ok(DriftInput {
        code_name: code.name.clone(),
        code_definition: code.definition.clone(),
        exemplars: passages,
        candidate: doc.text(candidate).unwrap_or_default(),
        context: context_text(doc, candidate),
    })
}

fn display_name(state: &ProjectState, coder: &CoderId) -> String {
    state
        .profiles
        .get(coder)
        .map(|p| p.display_name.trim())
        .filter(|n| !n.is_empty())
        .map_or_else(|| coder.to_string(), str::to_owned)
}

/// One researcher entry per (coder, code) among highlights overlapping `span`.
pub fn discussion_input(state: &ProjectState, span: &Span) -> Result<DiscussionInput, AssistError> {
    let doc = document(state, span)?;
    let mut overlapping: Vec<&Highlight> = state.highlights.values().filter(|h| h.span.overlaps(span)).collect();
    overlapping.sort_by(|a, b| (a.created_at, &a.highlight_id).cmp(&(b.created_at, &b.highlight_id)));
    let mut pairs: Vec<(CoderId, CodeId)> = Vec::new();
    for h in overlapping {
        let pair = (h.coder_id.clone(), state.resolve_code(&h.code_id).clone());
        if !pairs.contains(&pair) {
            pairs.push(pair);
        }
    }
    let researchers = pairs
        .iter()
        .map(|(coder, code)| Researcher {
            display_name: display_name(state, coder),
            keywords: state.profiles.get(coder).and_then(|p| p.keywords.clone()),
            code_name: state.codebook[code].name.clone(),
        })
        .collect();
    let mut codes: Vec<&CodeId> = Vec::new();
    for (_, code) in &pairs {
        if !codes.contains(&code) {
            codes.push(code);
        }
    }
    let code_definitions = codes
        .into_iter()
        .map(|c| CodeDefinition { name: state.codebook[c].name.clone(), definition: state.codebook[c].definition.clone() })
        .collect();
    Ok(DiscussionInput {
        context: context_text(doc, span),
        coded_text: doc.text(span).unwrap_or_default(),
        document_title: doc.title.clone(),
        researchers,
        code_definitions,
    })
}

pub fn summary_input(state: &ProjectState, code: Option<&CodeId>, coder: Option<&CoderId>) -> Result<SummaryInput, AssistError> {
    let notes = reflexive_stream(state, code, coder).map_err(|e| precondition(e.to_string()))?;
    let mut input = SummaryInput::default();
    for n in notes {
        let pairs = [
            (&n.justification, &mut input.justification),
            (&n.positionality, &mut input.positionality),
            (&n.alternatives, &mut input.alternatives),
            (&n.free_notes, &mut input.other),
        ];
        for (text, bucket) in pairs {
            if let Some(t) = text.as_ref().filter(|t| !t.trim().is_empty()) {
                bucket.push(t.clone());
            }
        }
    }
    Ok(input)
}

pub fn keywords_input(profile: &ResearcherProfile) -> KeywordsInput {
    KeywordsInput {
        display_name: profile.display_name.clone(),
        qualitative_history: profile.qualitative_history.clone(),
        background_experience: profile.background_experience.clone(),
        initial_data_view: profile.initial_data_view.clone(),
    }
}
