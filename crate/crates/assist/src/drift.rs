//! When to run drift checks, how superseded checks are cancelled, and how a
//! user's choice turns into domain events.

use std::collections::HashMap;
use std::future::Future;

use futures::future::{AbortHandle, Abortable};
use rta_core::{AlertId, CodeId, DriftAssessment, DriftChoice, EventBody, HighlightId, NewCode, ProjectState, Span};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Mutex;

use crate::inputs::exemplars;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftMode {
    #[default]
    OnApply,
    OnSessionEnd,
    ManualOnly,
}

impl std::str::FromStr for DriftMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "on_apply" => Ok(DriftMode::OnApply),
            "on_session_end" => Ok(DriftMode::OnSessionEnd),
            "manual_only" => Ok(DriftMode::ManualOnly),
            other => Err(format!("unknown drift mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriftPolicy {
    pub mode: DriftMode,
    pub min_exemplars: usize,
    pub cooldown: u64,
}

impl Default for DriftPolicy {
    fn default() -> Self {
        DriftPolicy { mode: DriftMode::OnApply, min_exemplars: 2, cooldown: 5 }
    }
}

/// What prompted a check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Apply,
    SessionEnd,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodeUsage {
    /// Prior applications with distinct passage text.
    pub distinct_exemplars: usize,
    /// Events since the last alert on this code; `None` if there was none.
    pub events_since_alert: Option<u64>,
}

/// Manual checks ignore mode, min_exemplars and cooldown but still need one exemplar.
pub fn should_trigger_drift(policy: &DriftPolicy, usage: &CodeUsage, trigger: Trigger) -> bool {
    let mode_permits = match trigger {
        Trigger::Manual => return usage.distinct_exemplars >= 1,
        Trigger::Apply => policy.mode == DriftMode::OnApply,
        Trigger::SessionEnd => policy.mode == DriftMode::OnSessionEnd,
    };
    let cooled = usage.events_since_alert.is_none_or(|n| n >= policy.cooldown);
    mode_permits && usage.distinct_exemplars >= policy.min_exemplars.max(1) && cooled
}

pub fn code_usage(state: &ProjectState, code_id: &CodeId, candidate: Option<&Span>, last_alert_seq: Option<u64>) -> CodeUsage {
    CodeUsage {
        distinct_exemplars: exemplars(state, code_id, candidate).len(),
        events_since_alert: last_alert_seq.map(|s| state.last_seq.saturating_sub(s)),
    }
}

/// Per-code cooldown bookkeeping and cancellation of superseded checks.
#[derive(Default)]
pub struct DriftMonitor {
    last_alert: Mutex<HashMap<CodeId, u64>>,
    inflight: Mutex<HashMap<CodeId, (u64, AbortHandle)>>,
    generation: std::sync::atomic::AtomicU64,
}

impl DriftMonitor {
    pub fn new() -> Self {
        Self::default()
    }

    pub async fn last_alert(&self, code: &CodeId) -> Option<u64> {
        self.last_alert.lock().await.get(code).copied()
    }

    /// Checks the policy and, if it fires, reserves the cooldown slot at `seq`.
    pub async fn admit(&self, policy: &DriftPolicy, state: &ProjectState, code: &CodeId, candidate: Option<&Span>, trigger: Trigger) -> bool {
        let code = state.resolve_code(code).clone();
        let mut last = self.last_alert.lock().await;
        let usage = code_usage(state, &code, candidate, last.get(&code).copied());
        let fire = should_trigger_drift(policy, &usage, trigger);
        if fire && trigger != Trigger::Manual {
            last.insert(code, state.last_seq);
        }
        fire
    }

    /// Runs `check` for `code`, cancelling any earlier check still running for it.
    /// Returns `None` if this check was itself superseded.
    pub async fn run<F, T>(&self, code: &CodeId, check: F) -> Option<T>
    where
        F: Future<Output = T>,
    {
        let generation = self.generation.fetch_add(1, std::sync::atomic::Ordering::SeqCst) + 1;
        let (handle, registration) = AbortHandle::new_pair();
        if let Some((_, previous)) = self.inflight.lock().await.insert(code.clone(), (generation, handle)) {
            previous.abort();
        }
        let result = Abortable::new(check, registration).await;
        let mut inflight = self.inflight.lock().await;
        let current = inflight.get(code).map(|(g, _)| *g) == Some(generation);
        if current {
            inflight.remove(code);
        }
        match result {
            Ok(value) if current => Some(value),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("missing details for {0:?}: {1}")]
    MissingDetails(DriftChoice, &'static str),
    #[error("assessment is invalid: {0}")]
    InvalidAssessment(String),
    #[error("give either highlight_id or existing_highlight, not both")]
    Conflict,
}

/// A user's answer to a drift alert, as submitted by a client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftResolution {
    pub alert_id: AlertId,
    pub code_id: CodeId,
    pub candidate: Span,
    pub assessment: DriftAssessment,
    pub choice: DriftChoice,
    /// New definition (refine).
    #[serde(default)]
    pub definition: Option<String>,
    /// Child code (split).
    #[serde(default)]
    pub child: Option<NewCode>,
    /// Id for the highlight placed on the candidate passage.
    #[serde(default)]
    pub highlight_id: Option<HighlightId>,
    /// Set when the candidate was already applied as this highlight; nothing new is applied
    /// and a split moves it to the child.
    #[serde(default)]
    pub existing_highlight: Option<HighlightId>,
}

/// DriftAlertRecorded, the choice's own events, then DriftResolved.
pub fn resolve_drift(r: &DriftResolution) -> Result<Vec<EventBody>, ResolveError> {
    r.assessment.check().map_err(ResolveError::InvalidAssessment)?;
    let mut events = vec![EventBody::DriftAlertRecorded {
        alert_id: r.alert_id.clone(),
        code_id: r.code_id.clone(),
        candidate: Some(r.candidate.clone()),
        assessment: r.assessment.clone(),
    }];
    if r.highlight_id.is_some() && r.existing_highlight.is_some() {
        return Err(ResolveError::Conflict);
    }
    let applied = r.existing_highlight.is_some();
    let apply = |code_id: CodeId| -> Result<Option<EventBody>, ResolveError> {
        if applied {
            return Ok(None);
        }
        let highlight_id = r.highlight_id.clone().ok_or(ResolveError::MissingDetails(r.choice, "highlight_id"))?;
        Ok(Some(EventBody::HighlightApplied { highlight_id, span: r.candidate.clone(), code_id }))
    };
    match r.choice {
        DriftChoice::Refine => {
            let definition = r
                .definition
                .clone()
                .filter(|d| !d.trim().is_empty())
                .ok_or(ResolveError::MissingDetails(DriftChoice::Refine, "definition"))?;
            events.push(EventBody::CodeRedefined { code_id: r.code_id.clone(), definition });
            if r.highlight_id.is_some() {
                events.extend(apply(r.code_id.clone())?);
            }
        }
        DriftChoice::Split => {
            let child = r
                .child
                .clone()
                .filter(|c| !c.name.trim().is_empty())
                .ok_or(ResolveError::MissingDetails(DriftChoice::Split, "child"))?;
            let child_id = child.code_id.clone();
            let reassignments = r.existing_highlight.iter().map(|h| (h.clone(), child_id.clone())).collect();
            events.push(EventBody::CodeSplit { code_id: r.code_id.clone(), children: vec![child], reassignments });
            events.extend(apply(child_id)?);
        }
        DriftChoice::ApplyOriginal => events.extend(apply(r.code_id.clone())?),
    }
    events.push(EventBody::DriftResolved { alert_id: r.alert_id.clone(), choice: r.choice });
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn usage(exemplars: usize, since: Option<u64>) -> CodeUsage {
        CodeUsage { distinct_exemplars: exemplars, events_since_alert: since }
    }

    #[test]
    fn policy_arithmetic() {
        let p = DriftPolicy::default();
        assert!(!should_trigger_drift(&DriftPolicy { mode: DriftMode::ManualOnly, ..p }, &usage(9, None), Trigger::Apply));
        assert!(!should_trigger_drift(&DriftPolicy { mode: DriftMode::ManualOnly, ..p }, &usage(9, None), Trigger::SessionEnd));
        assert!(!should_trigger_drift(&p, &usage(1, None), Trigger::Apply));
        assert!(!should_trigger_drift(&p, &usage(3, Some(2)), Trigger::Apply));
        assert!(should_trigger_drift(&p, &usage(3, Some(6)), Trigger::Apply));
        assert!(should_trigger_drift(&p, &usage(3, Some(5)), Trigger::Apply));
        assert!(should_trigger_drift(&p, &usage(2, None), Trigger::Apply));
        assert!(!should_trigger_drift(&p, &usage(3, None), Trigger::SessionEnd));
        let end = DriftPolicy { mode: DriftMode::OnSessionEnd, ..p };
        assert!(should_trigger_drift(&end, &usage(3, None), Trigger::SessionEnd));
        assert!(!should_trigger_drift(&end, &usage(3, None), Trigger::Apply));
        assert!(should_trigger_drift(&DriftPolicy { mode: DriftMode::ManualOnly, ..p }, &usage(1, Some(0)), Trigger::Manual));
        assert!(!should_trigger_drift(&p, &usage(0, None), Trigger::Manual));
    }
}
