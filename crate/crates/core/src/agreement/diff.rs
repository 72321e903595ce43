use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{AgreementError, OverlapRule};
use crate::ids::{CodeId, CoderId, DocId, SegmentId};
use crate::model::{DocumentRef, Highlight, ProjectState, Span};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiffScope {
    #[default]
    Project,
    Document { doc_id: DocId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    CodesDiffer,
    OnlyOneCoded,
}

/// A stretch of text the coders coded differently. `segment_id` is set when the
/// region is a document segment; otherwise `span` is a union of overlapping highlights.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffSegment {
    pub segment_id: Option<SegmentId>,
    pub span: Span,
    /// Code set per contributing coder; empty for coders who left the region uncoded.
    pub per_coder: BTreeMap<CoderId, BTreeSet<CodeId>>,
    pub divergence_kind: DivergenceKind,
}

/// Regions of divergent coding, ordered by document then start offset.
///
/// Segmented documents are compared segment by segment; unsegmented ones by
/// maximal groups of highlights chained together under `rule`.
pub fn diff_segments(state: &ProjectState, rule: &OverlapRule, scope: &DiffScope) -> Result<Vec<DiffSegment>, AgreementError> {
    let contributors: BTreeSet<&CoderId> = state.highlights.values().map(|h| &h.coder_id).collect();
    if contributors.len() < 2 {
        return Err(AgreementError::TooFewCoders(contributors.len()));
    }
    let docs: Vec<&DocumentRef> = match scope {
        DiffScope::Project => state.documents.values().collect(),
        DiffScope::Document { doc_id } => vec![state
            .documents
            .get(doc_id)
            .ok_or_else(|| AgreementError::UnknownDocument(doc_id.clone()))?],
    };
    let mut out = Vec::new();
    for doc in docs {
        let in_doc: Vec<&Highlight> = state.highlights.values().filter(|h| h.span.doc_id == doc.doc_id).collect();
        let mut regions: Vec<(Option<SegmentId>, Span, Vec<&Highlight>)> = if doc.segments.is_empty() {
            overlap_groups(&in_doc, rule)
        } else {
            doc.segments
                .iter()
                .map(|seg| {
                    let members = in_doc.iter().copied().filter(|h| h.span.overlaps(&seg.span)).collect();
                    (Some(seg.segment_id.clone()), seg.span.clone(), members)
                })
                .collect()
        };
        regions.sort_by_key(|a| (a.1.start, a.1.end));
        for (segment_id, span, members) in regions {
            if let Some(seg) = classify(state, &contributors, segment_id, span, &members) {
                out.push(seg);
            }
        }
    }
    Ok(out)
}

fn classify(
    state: &ProjectState,
    contributors: &BTreeSet<&CoderId>,
    segment_id: Option<SegmentId>,
    span: Span,
    members: &[&Highlight],
) -> Option<DiffSegment> {
    let mut per_coder: BTreeMap<CoderId, BTreeSet<CodeId>> =
        contributors.iter().map(|c| ((*c).clone(), BTreeSet::new())).collect();
    for h in members {
        per_coder.entry(h.coder_id.clone()).or_default().insert(state.resolve_code(&h.code_id).clone());
    }
    let touched: Vec<&BTreeSet<CodeId>> = per_coder.values().filter(|s| !s.is_empty()).collect();
    let kind = match touched.len() {
        0 => return None,
        1 => DivergenceKind::OnlyOneCoded,
        _ if touched.windows(2).all(|w| w[0] == w[1]) => return None,
        _ => DivergenceKind::CodesDiffer,
    };
    Some(DiffSegment { segment_id, span, per_coder, divergence_kind: kind })
}

/// Connected components of highlights under `rule`, each with its covering span.
fn overlap_groups<'a>(highlights: &[&'a Highlight], rule: &OverlapRule) -> Vec<(Option<SegmentId>, Span, Vec<&'a Highlight>)> {
    let n = highlights.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if rule.matches(&highlights[i].span, &highlights[j].span) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<&'a Highlight>> = BTreeMap::new();
    for (i, h) in highlights.iter().enumerate() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(*h);
    }
    groups
        .into_values()
        .map(|members| {
            let start = members.iter().map(|h| h.span.start).min().unwrap_or(0);
            let end = members.iter().map(|h| h.span.end).max().unwrap_or(0);
            (None, Span { doc_id: members[0].span.doc_id.clone(), start, end }, members)
        })
        .collect()
}
