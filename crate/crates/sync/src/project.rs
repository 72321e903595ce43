//! One project's sequencer: validates proposals, assigns seq and timestamp,
//! persists, folds, then fans out to subscribers.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use rta_assist::inputs::drift_input;
use rta_assist::{Assistant, DriftMode, DriftMonitor, DriftPolicy, Trigger};
use rta_core::agreement::{discussion_statuses, DiscussionConfig, OverlapRule};
use rta_core::{validate, visible_view, CodeId, CoderId, DiscussionStatus, HighlightId, Event, EventBody, ProjectId, ProjectState, ProposedEvent, Timestamp, Violation};
use serde_json::{json, Value};
use thiserror::Error;
use tokio::sync::{broadcast, mpsc, Mutex};

use crate::frames::EventMeta;
use crate::storage::{restore_state, write_snapshot, EventLog, StorageError};

#[derive(Debug, Clone, Copy)]
pub struct ProjectOptions {
    pub snapshot_every: u64,
    pub broadcast_capacity: usize,
}

impl Default for ProjectOptions {
    fn default() -> Self {
        ProjectOptions { snapshot_every: 1000, broadcast_capacity: 1024 }
    }
}

/// What the background advisor needs to compute drift alerts and status changes.
pub struct Advisor {
    pub assistant: Arc<Assistant>,
    pub policy: DriftPolicy,
    pub rule: OverlapRule,
    pub discussion: DiscussionConfig,
    pub exemplar_limit: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub event: Event,
    pub meta: EventMeta,
}

#[derive(Debug)]
pub enum Outbound {
    Event(Arc<Record>),
    /// Non-event notice; `audience: None` means every subscriber.
    Advisory { audience: Option<CoderId>, payload: Value },
}

#[derive(Debug, Error)]
pub enum SubmitError {
    #[error("empty batch")]
    Empty,
    #[error("event {index} rejected: {}", .violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Rejected { index: usize, violations: Vec<Violation> },
    #[error(transparent)]
    Storage(#[from] StorageError),
}

#[derive(Debug, Error)]
#[error("since={since} is beyond the head seq {head}")]
pub struct SinceError {
    pub since: u64,
    pub head: u64,
}

pub struct Subscription {
    pub replay: Vec<Arc<Record>>,
    /// Blind mode at the head when the subscription was taken; governs the replay.
    pub head_blind: bool,
    pub head_seq: u64,
    pub rx: broadcast::Receiver<Arc<Outbound>>,
}

struct Inner {
    log: EventLog,
    state: ProjectState,
    last_ts: Timestamp,
    since_snapshot: u64,
}

struct Job {
    state: Arc<ProjectState>,
    events: Vec<Event>,
}

pub struct Project {
    id: ProjectId,
    dir: PathBuf,
    opts: ProjectOptions,
    inner: Mutex<Inner>,
    // Lock order: records, then head.
    records: RwLock<Vec<Arc<Record>>>,
    head: RwLock<Arc<ProjectState>>,
    tx: broadcast::Sender<Arc<Outbound>>,
    jobs: Option<mpsc::UnboundedSender<Job>>,
    monitor: Arc<DriftMonitor>,
}

fn touched_owners(state: &ProjectState, body: &EventBody) -> BTreeMap<HighlightId, CoderId> {
    let ids: Vec<&HighlightId> = match body {
        EventBody::HighlightRemoved { highlight_id } => vec![highlight_id],
        EventBody::CodeSplit { reassignments, .. } => reassignments.keys().collect(),
        _ => vec![],
    };
    ids.into_iter()
        .filter_map(|h| state.highlights.get(h).map(|hl| (h.clone(), hl.coder_id.clone())))
        .collect()
}

impl Project {
    /// Opens (or creates) the project stored in `dir`, recovering from a torn final write.
    /// With an advisor, a background task is spawned on the current tokio runtime.
    pub fn open(dir: &Path, opts: ProjectOptions, advisor: Option<Arc<Advisor>>) -> Result<Arc<Project>, StorageError> {
        let (log, scan) = EventLog::open(dir)?;
        let state = restore_state(dir, &scan.events)?;
        // Redaction metadata needs only authorship and the blind flag, not a second fold.
        let mut authors: HashMap<HighlightId, CoderId> = HashMap::new();
        let mut blind = false;
        let mut records = Vec::with_capacity(scan.events.len());
        for event in scan.events {
            let touched: Vec<&HighlightId> = match &event.body {
                EventBody::HighlightRemoved { highlight_id } => vec![highlight_id],
                EventBody::CodeSplit { reassignments, .. } => reassignments.keys().collect(),
                _ => vec![],
            };
            let owners = touched.into_iter().filter_map(|h| authors.get(h).map(|c| (h.clone(), c.clone()))).collect();
            match &event.body {
                EventBody::HighlightApplied { highlight_id, .. } => {
                    authors.insert(highlight_id.clone(), event.actor.clone());
                }
                EventBody::ProjectCreated { blind_mode, .. } => blind = *blind_mode,
                EventBody::BlindModeSet { enabled } => blind = *enabled,
                _ => {}
            }
            records.push(Arc::new(Record { meta: EventMeta { blind_after: blind, owners }, event }));
        }
        let id = state
            .project_id
            .clone()
            .unwrap_or_else(|| ProjectId::new(dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()));
        let last_ts = records.last().map_or(Timestamp(0), |r| r.event.timestamp);
        let (tx, _) = broadcast::channel(opts.broadcast_capacity.max(1));
        let monitor = Arc::new(DriftMonitor::new());
        let head = Arc::new(state.clone());
        let jobs = advisor.map(|advisor| {
            let (jobs_tx, jobs_rx) = mpsc::unbounded_channel();
            tokio::spawn(advise(jobs_rx, tx.clone(), monitor.clone(), advisor, head.clone()));
            jobs_tx
        });
        Ok(Arc::new(Project {
            id,
            dir: dir.to_owned(),
            opts,
            inner: Mutex::new(Inner { log, state, last_ts, since_snapshot: 0 }),
            records: RwLock::new(records),
            head: RwLock::new(head),
            tx,
            jobs,
            monitor,
        }))
    }

    pub fn id(&self) -> &ProjectId {
        &self.id
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn monitor(&self) -> &Arc<DriftMonitor> {
        &self.monitor
    }

    /// Sequences `proposals` atomically: all are persisted and published, or none.
    pub async fn submit(&self, proposals: Vec<ProposedEvent>) -> Result<Vec<Event>, SubmitError> {
        if proposals.is_empty() {
            return Err(SubmitError::Empty);
        }
        let mut inner = self.inner.lock().await;
        let mut state = inner.state.clone();
        let timestamp = Timestamp::now().max(inner.last_ts);
        let mut records = Vec::with_capacity(proposals.len());
        for (index, proposal) in proposals.into_iter().enumerate() {
            validate(&state, &proposal).map_err(|violations| SubmitError::Rejected { index, violations })?;
            let owners = touched_owners(&state, &proposal.body);
            let event = proposal.assign(state.last_seq + 1, timestamp);
            state.apply(&event).expect("validated events fold");
            records.push(Arc::new(Record { meta: EventMeta { blind_after: state.blind_mode, owners }, event }));
        }
        let events: Vec<Event> = records.iter().map(|r| r.event.clone()).collect();
        inner.log.append(&events)?;

        let head = Arc::new(state.clone());
        {
            let mut all = self.records.write().unwrap();
            all.extend(records.iter().cloned());
            *self.head.write().unwrap() = head.clone();
        }
        inner.state = state;
        inner.last_ts = timestamp;
        inner.since_snapshot += events.len() as u64;
        for r in records {
            let _ = self.tx.send(Arc::new(Outbound::Event(r)));
        }
        if let Some(jobs) = &self.jobs {
            let _ = jobs.send(Job { state: head, events: events.clone() });
        }
        if self.opts.snapshot_every > 0 && inner.since_snapshot >= self.opts.snapshot_every {
            match write_snapshot(&self.dir, &inner.state) {
                Ok(()) => inner.since_snapshot = 0,
                Err(e) => tracing::warn!(project = %self.id, error = %e, "snapshot failed"),
            }
        }
        Ok(events)
    }

    /// Replay from `since` plus a live receiver, with no gap or overlap between them.
    pub async fn subscribe(&self, since: u64) -> Result<Subscription, SinceError> {
        let inner = self.inner.lock().await;
        let head = inner.state.last_seq;
        if since > head {
            return Err(SinceError { since, head });
        }
        let replay = self.records.read().unwrap()[since as usize..].to_vec();
        Ok(Subscription { replay, head_blind: inner.state.blind_mode, head_seq: head, rx: self.tx.subscribe() })
    }

    /// Current folded state. Never waits on the sequencer.
    pub fn state(&self) -> Arc<ProjectState> {
        self.head.read().unwrap().clone()
    }

    /// Events and the state folded from exactly those events.
    pub fn snapshot(&self) -> (Vec<Event>, Arc<ProjectState>) {
        let records = self.records.read().unwrap();
        let state = self.head.read().unwrap().clone();
        (records.iter().map(|r| r.event.clone()).collect(), state)
    }

    /// Records with seq greater than `since`, as currently committed.
    pub fn records_after(&self, since: u64) -> Vec<Arc<Record>> {
        let records = self.records.read().unwrap();
        records.get(since as usize..).map(<[_]>::to_vec).unwrap_or_default()
    }

    pub fn head_seq(&self) -> u64 {
        self.records.read().unwrap().len() as u64
    }

    /// Pushes a non-event notice to subscribers.
    pub fn advise(&self, audience: Option<CoderId>, payload: Value) {
        let _ = self.tx.send(Arc::new(Outbound::Advisory { audience, payload }));
    }
}

/// What `viewer` may see of `state`; viewers who have not yet acted see no foreign content either.
pub fn view_for(state: &ProjectState, viewer: &CoderId) -> ProjectState {
    visible_view(state, viewer).unwrap_or_else(|_| {
        let mut v = state.clone();
        if v.blind_mode {
            v.highlights.clear();
            v.notes.clear();
            v.drift_alerts.clear();
            v.removed_highlights.clear();
        }
        v
    })
}

fn changed_statuses(
    before: &BTreeMap<CodeId, DiscussionStatus>,
    now: &BTreeMap<CodeId, DiscussionStatus>,
) -> Vec<DiscussionStatus> {
    now.iter().filter(|(k, v)| before.get(*k) != Some(*v)).map(|(_, v)| v.clone()).collect()
}

async fn advise(
    mut jobs: mpsc::UnboundedReceiver<Job>,
    tx: broadcast::Sender<Arc<Outbound>>,
    monitor: Arc<DriftMonitor>,
    advisor: Arc<Advisor>,
    initial: Arc<ProjectState>,
) {
    let mut shown = discussion_statuses(&initial, &advisor.rule, &advisor.discussion);
    while let Some(first) = jobs.recv().await {
        let mut batch = vec![first];
        while let Ok(more) = jobs.try_recv() {
            batch.push(more);
        }
        if advisor.policy.mode == DriftMode::OnApply {
            for job in &batch {
                for event in &job.events {
                    if let EventBody::HighlightApplied { highlight_id, span, code_id } = &event.body {
                        if monitor.admit(&advisor.policy, &job.state, code_id, Some(span), Trigger::Apply).await {
                            spawn_drift_check(&tx, &monitor, &advisor, job.state.clone(), event.actor.clone(), highlight_id.clone(), code_id.clone(), span.clone());
                        }
                    }
                }
            }
        }
        let latest = &batch.last().expect("non-empty").state;
        // Status changes are withheld under blind mode and delivered once it ends.
        if !latest.blind_mode {
            let now = discussion_statuses(latest, &advisor.rule, &advisor.discussion);
            let changed = changed_statuses(&shown, &now);
            if !changed.is_empty() {
                let payload = json!({"kind": "discussion_status", "seq": latest.last_seq, "statuses": changed});
                let _ = tx.send(Arc::new(Outbound::Advisory { audience: None, payload }));
            }
            shown = now;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn spawn_drift_check(
    tx: &broadcast::Sender<Arc<Outbound>>,
    monitor: &Arc<DriftMonitor>,
    advisor: &Arc<Advisor>,
    state: Arc<ProjectState>,
    actor: CoderId,
    highlight_id: HighlightId,
    code_id: CodeId,
    span: rta_core::Span,
) {
    let (tx, monitor, advisor) = (tx.clone(), monitor.clone(), advisor.clone());
    tokio::spawn(async move {
        // under blind mode the exemplars may only come from the applying coder
        let state = if state.blind_mode { Arc::new(view_for(&state, &actor)) } else { state };
        let input = match drift_input(&state, &code_id, &span, advisor.exemplar_limit) {
            Ok(input) => input,
            Err(e) => return tracing::debug!(error = %e, "drift check skipped"),
        };
        let resolved = state.resolve_code(&code_id).clone();
        match monitor.run(&resolved, advisor.assistant.detect_drift(input)).await {
            Some(Ok(assessment)) if assessment.drift_detected => {
                let payload = json!({
                    "kind": "drift_alert",
                    "seq": state.last_seq,
                    "code_id": resolved,
                    "highlight_id": highlight_id,
                    "candidate": span,
                    "assessment": assessment,
                });
                let _ = tx.send(Arc::new(Outbound::Advisory { audience: Some(actor), payload }));
            }
            Some(Ok(_)) => {}
            Some(Err(e)) => tracing::warn!(code = %resolved, error = %e, "drift check failed"),
            None => tracing::debug!(code = %resolved, "drift check superseded"),
        }
    });
}
