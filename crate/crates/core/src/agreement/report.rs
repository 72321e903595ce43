use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::OverlapRule;
use crate::ids::{CodeId, CoderId};
use crate::model::{Highlight, ProjectState};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgreementScope {
    Project,
    Code { code_id: CodeId },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoderTally {
    pub agreed: usize,
    pub total: usize,
}

/// Percentage agreement: highlights matched by at least one other coder over all highlights.
///
/// `agreement` is `None` (undefined, not zero) when the scope is empty or only
/// one coder contributed to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub scope: AgreementScope,
    pub agreed_count: usize,
    pub total_count: usize,
    pub agreement: Option<f64>,
    pub per_coder: BTreeMap<CoderId, CoderTally>,
}

impl AgreementReport {
    pub fn coder_count(&self) -> usize {
        self.per_coder.len()
    }
}

/// True iff some highlight by a different coder carries the same code (after
/// `canonical` identity resolution) and matches the span under `rule`.
pub fn is_agreed_with<F>(h: &Highlight, all: &[Highlight], rule: &OverlapRule, canonical: F) -> bool
where
    F: Fn(&CodeId) -> CodeId,
{
    let code = canonical(&h.code_id);
    all.iter()
        .any(|other| other.coder_id != h.coder_id && canonical(&other.code_id) == code && rule.matches(&h.span, &other.span))
}

pub fn is_agreed(h: &Highlight, all: &[Highlight], rule: &OverlapRule) -> bool {
    is_agreed_with(h, all, rule, CodeId::clone)
}

fn report_with<F>(highlights: &[Highlight], rule: &OverlapRule, scope: AgreementScope, canonical: F) -> AgreementReport
where
    F: Fn(&CodeId) -> CodeId,
{
    let in_scope = |h: &Highlight| match &scope {
        AgreementScope::Project => true,
        AgreementScope::Code { code_id } => &canonical(&h.code_id) == code_id,
    };
    let mut per_coder: BTreeMap<CoderId, CoderTally> = BTreeMap::new();
    let mut agreed_count = 0;
    let mut total_count = 0;
    for h in highlights.iter().filter(|h| in_scope(h)) {
        let agreed = is_agreed_with(h, highlights, rule, &canonical);
        let tally = per_coder.entry(h.coder_id.clone()).or_default();
        tally.total += 1;
        total_count += 1;
        if agreed {
            tally.agreed += 1;
            agreed_count += 1;
        }
    }
    let coders: BTreeSet<&CoderId> = per_coder.keys().collect();
    let agreement = (total_count > 0 && coders.len() >= 2).then(|| agreed_count as f64 / total_count as f64);
    AgreementReport { scope, agreed_count, total_count, agreement, per_coder }
}

/// Agreement over a plain highlight set, taking code ids at face value.
pub fn percentage_agreement(highlights: &[Highlight], rule: &OverlapRule, scope: AgreementScope) -> AgreementReport {
    report_with(highlights, rule, scope, CodeId::clone)
}

/// Agreement over a project state, with code identity resolved through merge lineage.
pub fn percentage_agreement_in(state: &ProjectState, rule: &OverlapRule, scope: AgreementScope) -> AgreementReport {
    let highlights: Vec<Highlight> = state.highlights.values().cloned().collect();
    let scope = match scope {
        AgreementScope::Code { code_id } => AgreementScope::Code { code_id: state.resolve_code(&code_id).clone() },
        project => project,
    };
    report_with(&highlights, rule, scope, |c| state.resolve_code(c).clone())
}
