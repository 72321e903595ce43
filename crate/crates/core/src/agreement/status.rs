use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{percentage_agreement_in, AgreementError, AgreementReport, AgreementScope, OverlapRule};
use crate::ids::{CodeId, CoderId, DocId};
use crate::model::{DiscussionLevel, DiscussionReason, DiscussionStatus, ProjectState, StatusSetter};

/// Thresholds for Discussion Focus routing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscussionConfig {
    /// Agreement below this needs discussion.
    pub low: f64,
    /// Agreement in `[low, high)` is flagged for review.
    pub high: f64,
    /// Applications needed before a code counts as broadly used...
    pub breadth_n: usize,
    /// ...across at least this many documents.
    pub breadth_docs: usize,
}

impl Default for DiscussionConfig {
    fn default() -> Self {
        DiscussionConfig { low: 0.5, high: 0.8, breadth_n: 10, breadth_docs: 2 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageStats {
    pub applications: usize,
    pub documents: usize,
    pub coders: usize,
}

pub fn usage_stats(state: &ProjectState, code_id: &CodeId) -> UsageStats {
    let code_id = state.resolve_code(code_id);
    let mut docs: BTreeSet<&DocId> = BTreeSet::new();
    let mut coders: BTreeSet<&CoderId> = BTreeSet::new();
    let mut applications = 0;
    for h in state.highlights.values().filter(|h| state.resolve_code(&h.code_id) == code_id) {
        applications += 1;
        docs.insert(&h.span.doc_id);
        coders.insert(&h.coder_id);
    }
    UsageStats { applications, documents: docs.len(), coders: coders.len() }
}

/// Computed routing level for one code.
pub fn discussion_status(
    code_id: &CodeId,
    report: &AgreementReport,
    usage: &UsageStats,
    config: &DiscussionConfig,
) -> Result<DiscussionStatus, AgreementError> {
    match &report.scope {
        AgreementScope::Code { code_id: scoped } if scoped == code_id => {}
        _ => return Err(AgreementError::ScopeMismatch(code_id.clone())),
    }
    let mut reasons = Vec::new();
    if report.agreement.is_some_and(|a| a < config.low) {
        reasons.push(DiscussionReason::LowAgreement);
    }
    if usage.applications >= config.breadth_n && usage.documents >= config.breadth_docs {
        reasons.push(DiscussionReason::BroadUsage);
    }
    let level = if !reasons.is_empty() {
        DiscussionLevel::NeedsDiscussion
    } else {
        match report.agreement {
            Some(a) if a < config.high => DiscussionLevel::Review,
            Some(_) => DiscussionLevel::Aligned,
            None if usage.coders >= 2 => DiscussionLevel::Review,
            None => DiscussionLevel::Aligned,
        }
    };
    Ok(DiscussionStatus { code_id: code_id.clone(), level, reasons, set_by: StatusSetter::System })
}

/// A manual status recorded in the state overrides the computed one.
pub fn effective_status(state: &ProjectState, computed: DiscussionStatus) -> DiscussionStatus {
    match state.discussion_statuses.get(&computed.code_id) {
        Some(stored) if stored.is_manual() => stored.clone(),
        _ => computed,
    }
}

/// Computed (not override-aware) status of one code in `state`.
pub fn code_status(
    state: &ProjectState,
    code_id: &CodeId,
    rule: &OverlapRule,
    config: &DiscussionConfig,
) -> Result<DiscussionStatus, AgreementError> {
    if !state.codebook.contains_key(code_id) {
        return Err(AgreementError::UnknownCode(code_id.clone()));
    }
    let resolved = state.resolve_code(code_id).clone();
    let report = percentage_agreement_in(state, rule, AgreementScope::Code { code_id: resolved.clone() });
    discussion_status(&resolved, &report, &usage_stats(state, &resolved), config)
}

/// Effective status of every active code.
pub fn discussion_statuses(
    state: &ProjectState,
    rule: &OverlapRule,
    config: &DiscussionConfig,
) -> BTreeMap<CodeId, DiscussionStatus> {
    state
        .active_codes()
        .filter_map(|c| code_status(state, &c.code_id, rule, config).ok())
        .map(|s| (s.code_id.clone(), effective_status(state, s)))
        .collect()
}
