//! HTTP API.

use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::{FromRequestParts, Path, Query, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rta_assist::inputs::{discussion_input, drift_input, keywords_input, summary_input};
use rta_assist::{resolve_drift, AssistError, DriftResolution, ProviderError, Trigger};
use rta_core::agreement::{
    diff_segments, discussion_statuses, percentage_agreement_in, AgreementError, AgreementScope, DiffScope, OverlapRule,
};
use rta_core::provenance::{code_history, diff_since, export_audit, provenance_graph, ProvenanceError};
use rta_core::{
    reflexive_stream, AlertId, CodeId, CoderId, DocId, DocumentRef, DriftAssessment,
    DriftChoice, Event, EventBody, HighlightId, NewCode, ProjectSettings, ProjectState, ProposedEvent, SegmentId,
    SegmentRef, Span,
};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::frames::event_for;
use crate::project::{view_for, Project, SubmitError};
use crate::service::{Service, ServiceError};
use crate::sessions::Session;
use crate::ws;

pub type AppState = Arc<Service>;

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/sessions", post(create_session))
        .route("/projects", post(create_project).get(list_projects))
        .route("/projects/{id}/documents", post(add_document))
        .route("/projects/{id}/events", post(submit_events).get(list_events))
        .route("/projects/{id}/views/{view}", get(view))
        .route("/projects/{id}/audit", get(audit))
        .route("/projects/{id}/stream", get(ws::stream))
        .route("/projects/{id}/session-end", post(session_end))
        .route("/projects/{id}/assist/drift", post(assist_drift))
        .route("/projects/{id}/assist/drift/resolve", post(assist_resolve))
        .route("/projects/{id}/assist/discussion-prompt", post(assist_discussion))
        .route("/projects/{id}/assist/summary", post(assist_summary))
        .route("/projects/{id}/assist/keywords", post(assist_keywords))
        .with_state(service)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    extra: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into(), extra: Value::Null }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn blind() -> Self {
        Self::new(StatusCode::FORBIDDEN, "blind_mode", "not available while blind mode is on")
    }

    fn not_found(what: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", what)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({"error": self.code, "message": self.message});
        if let Value::Object(extra) = self.extra {
            body.as_object_mut().unwrap().extend(extra);
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<SubmitError> for ApiError {
    fn from(e: SubmitError) -> Self {
        match e {
            SubmitError::Empty => ApiError::bad_request("no events given"),
            SubmitError::Rejected { index, ref violations } => ApiError {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                code: "rejected",
                message: e.to_string(),
                extra: json!({"index": index, "violations": violations}),
            },
            SubmitError::Storage(e) => {
                tracing::error!(error = %e, "append failed");
                ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "storage", "the event could not be persisted")
            }
        }
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Submit(s) => s.into(),
            other => {
                tracing::error!(error = %other, "service error");
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", other.to_string())
            }
        }
    }
}

impl From<AssistError> for ApiError {
    fn from(e: AssistError) -> Self {
        let (status, code) = match &e {
            AssistError::Precondition(_) => (StatusCode::UNPROCESSABLE_ENTITY, "precondition"),
            AssistError::SchemaViolation { .. } => (StatusCode::BAD_GATEWAY, "schema_violation"),
            AssistError::Provider(ProviderError::Timeout) => (StatusCode::GATEWAY_TIMEOUT, "provider_timeout"),
            AssistError::Provider(_) => (StatusCode::BAD_GATEWAY, "provider"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<AgreementError> for ApiError {
    fn from(e: AgreementError) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "agreement", e.to_string())
    }
}

impl From<ProvenanceError> for ApiError {
    fn from(e: ProvenanceError) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "provenance", e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Bearer token from the Authorization header, or `token` in the query string.
fn token_of(parts: &Parts) -> Option<String> {
    if let Some(h) = parts.headers.get(header::AUTHORIZATION).and_then(|v| v.to_str().ok()) {
        return h.strip_prefix("Bearer ").map(str::to_owned);
    }
    let Query(mut q) = Query::<HashMap<String, String>>::try_from_uri(&parts.uri).ok()?;
    q.remove("token")
}

/// The authenticated session of the request.
pub struct Caller(pub Session);

impl FromRequestParts<AppState> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        let token = token_of(parts).ok_or_else(|| ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing bearer token"))?;
        state
            .sessions
            .authenticate(&token)
            .map(Caller)
            .ok_or_else(|| ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "unknown or expired session"))
    }
}

impl Caller {
    pub fn coder(&self) -> &CoderId {
        &self.0.coder_id
    }
}

pub fn project_of(service: &Service, id: &str) -> ApiResult<Arc<Project>> {
    service.project(id).ok_or_else(|| ApiError::not_found(format!("no project {id}")))
}

async fn create_session(State(svc): State<AppState>) -> ApiResult<(StatusCode, Json<Value>)> {
    let issued = svc.sessions.issue().map_err(|e| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "storage", e.to_string()))?;
    Ok((StatusCode::CREATED, Json(serde_json::to_value(issued).unwrap())))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateProject {
    name: String,
    #[serde(default)]
    unique_code_names: Option<bool>,
    #[serde(default)]
    blind_mode: bool,
}

async fn create_project(State(svc): State<AppState>, caller: Caller, Json(req): Json<CreateProject>) -> ApiResult<(StatusCode, Json<Value>)> {
    let settings = ProjectSettings { unique_code_names: req.unique_code_names.unwrap_or(true) };
    let (project, event) = svc.create_project(caller.coder(), &req.name, settings, req.blind_mode).await?;
    Ok((StatusCode::CREATED, Json(json!({"project_id": project.id(), "event": event}))))
}

async fn list_projects(State(svc): State<AppState>, _caller: Caller) -> Json<Value> {
    let projects: Vec<Value> = svc
        .projects()
        .iter()
        .map(|p| {
            let s = p.state();
            json!({"project_id": p.id(), "name": s.name, "last_seq": s.last_seq, "blind_mode": s.blind_mode})
        })
        .collect();
    Json(json!({ "projects": projects }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewSegment {
    #[serde(default)]
    segment_id: Option<String>,
    start: usize,
    end: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AddDocument {
    title: String,
    body: String,
    #[serde(default)]
    segments: Vec<NewSegment>,
}

async fn add_document(
    State(svc): State<AppState>,
    Path(id): Path<String>,
    caller: Caller,
    Json(req): Json<AddDocument>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let project = project_of(&svc, &id)?;
    let doc_id = DocId::new(format!("d-{}", uuid::Uuid::new_v4().simple()));
    let segments = req
        .segments
        .into_iter()
        .enumerate()
        .map(|(i, s)| SegmentRef {
            segment_id: SegmentId::new(s.segment_id.unwrap_or_else(|| format!("s{}", i + 1))),
            span: Span::new(doc_id.clone(), s.start, s.end),
        })
        .collect();
    let document = DocumentRef { doc_id: doc_id.clone(), title: req.title, body: req.body, segments };
    let event = project.submit(vec![ProposedEvent::new(caller.coder().clone(), EventBody::DocumentAdded { document })]).await?.remove(0);
    Ok((StatusCode::CREATED, Json(json!({"doc_id": doc_id, "event": event}))))
}

/// A single event body or an array submitted as one atomic batch.
async fn submit_events(
    State(svc): State<AppState>,
    Path(id): Path<String>,
    caller: Caller,
    Json(body): Json<Value>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let project = project_of(&svc, &id)?;
    let bodies: Vec<EventBody> = match body {
        Value::Array(items) => items.into_iter().map(serde_json::from_value).collect::<Result<_, _>>(),
        single => serde_json::from_value(single).map(|b| vec![b]),
    }
    .map_err(|e| ApiError::bad_request(format!("malformed event: {e}")))?;
    let proposals = bodies.into_iter().map(|b| ProposedEvent::new(caller.coder().clone(), b)).collect();
    let events = project.submit(proposals).await?;
    Ok((StatusCode::CREATED, Json(json!({ "events": events }))))
}

#[derive(Deserialize)]
struct Since {
    #[serde(default)]
    since: u64,
}

async fn list_events(State(svc): State<AppState>, Path(id): Path<String>, caller: Caller, Query(q): Query<Since>) -> ApiResult<Json<Value>> {
    let project = project_of(&svc, &id)?;
    let head = project.head_seq();
    if q.since > head {
        return Err(ApiError::bad_request(format!("since={} is beyond the head seq {head}", q.since)));
    }
    let records = project.records_after(q.since);
    let head = q.since + records.len() as u64;
    let blind = project.state().blind_mode;
    let events: Vec<Value> = records.iter().map(|r| event_for(&r.event, &r.meta, caller.coder(), blind)).collect();
    Ok(Json(json!({ "events": events, "seq": head })))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ViewQuery {
    code: Option<String>,
    coder: Option<String>,
    doc: Option<String>,
    since: Option<u64>,
    /// `any` or `jaccard`
    rule: Option<String>,
    threshold: Option<f64>,
}

impl ViewQuery {
    fn rule(&self, default: OverlapRule) -> ApiResult<OverlapRule> {
        match (self.rule.as_deref(), self.threshold) {
            (None, None) => Ok(default),
            (Some("any"), None) => Ok(OverlapRule::AnyCharOverlap),
            (Some("jaccard") | None, Some(t)) => OverlapRule::jaccard(t).map_err(ApiError::from),
            (Some("jaccard"), None) => Err(ApiError::bad_request("rule=jaccard needs threshold")),
            (Some(other), _) => Err(ApiError::bad_request(format!("unknown rule {other:?}"))),
        }
    }

    fn code(&self) -> ApiResult<CodeId> {
        self.code.as_deref().map(CodeId::new).ok_or_else(|| ApiError::bad_request("code is required"))
    }
}

/// Author of every highlight ever applied.
fn highlight_authors(events: &[Event]) -> HashMap<&HighlightId, &CoderId> {
    events
        .iter()
        .filter_map(|e| match &e.body {
            EventBody::HighlightApplied { highlight_id, .. } => Some((highlight_id, &e.actor)),
            _ => None,
        })
        .collect()
}

async fn view(
    State(svc): State<AppState>,
    Path((id, name)): Path<(String, String)>,
    caller: Caller,
    Query(q): Query<ViewQuery>,
) -> ApiResult<Json<Value>> {
    let project = project_of(&svc, &id)?;
    let me = caller.coder();
    let (events, state) = project.snapshot();
    let blind = state.blind_mode;
    let cfg = &svc.config;
    let data = match name.as_str() {
        "state" => serde_json::to_value(view_for(&state, me)).unwrap(),
        "code_history" => {
            let code = q.code()?;
            let mut history = code_history(&events, &code)?;
            if blind {
                let authors = highlight_authors(&events);
                history.retain(|h| h.highlight_id.as_ref().is_none_or(|id| authors.get(id) == Some(&me)));
            }
            serde_json::to_value(history).unwrap()
        }
        "provenance_graph" => serde_json::to_value(provenance_graph(&events)?).unwrap(),
        "changes" => {
            let changes = diff_since(&events, q.since.unwrap_or(0))?;
            let records = project.records_after(q.since.unwrap_or(0));
            let out: Vec<Value> =
                records.iter().take(changes.len()).map(|r| event_for(&r.event, &r.meta, me, blind)).collect();
            Value::Array(out)
        }
        "agreement" => {
            if blind {
                return Err(ApiError::blind());
            }
            let rule = q.rule(cfg.overlap_rule)?;
            let scope = match &q.code {
                Some(code) => {
                    let code = CodeId::new(code.as_str());
                    if !state.codebook.contains_key(&code) {
                        return Err(ApiError::not_found(format!("no code {code}")));
                    }
                    AgreementScope::Code { code_id: state.resolve_code(&code).clone() }
                }
                None => AgreementScope::Project,
            };
            serde_json::to_value(percentage_agreement_in(&state, &rule, scope)).unwrap()
        }
        "diff_segments" => {
            if blind {
                return Err(ApiError::blind());
            }
            let rule = q.rule(cfg.overlap_rule)?;
            let scope = q.doc.as_deref().map_or(DiffScope::Project, |d| DiffScope::Document { doc_id: d.into() });
            serde_json::to_value(diff_segments(&state, &rule, &scope)?).unwrap()
        }
        "discussion_statuses" => {
            if blind {
                return Err(ApiError::blind());
            }
            let rule = q.rule(cfg.overlap_rule)?;
            serde_json::to_value(discussion_statuses(&state, &rule, &cfg.discussion)).unwrap()
        }
        "reflexive_stream" => {
            let coder = q.coder.as_deref().map(CoderId::new);
            if blind && coder.as_ref().is_some_and(|c| c != me) {
                return Err(ApiError::blind());
            }
            let visible = view_for(&state, me);
            let code = q.code.as_deref().map(CodeId::new);
            let notes = reflexive_stream(&visible, code.as_ref(), coder.as_ref())
                .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "view", e.to_string()))?;
            serde_json::to_value(notes).unwrap()
        }
        "audit_export" => {
            if blind {
                return Err(ApiError::blind());
            }
            let bytes = export_audit(&events, &state).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "audit", e.to_string()))?;
            serde_json::from_slice(&bytes).unwrap()
        }
        other => return Err(ApiError::not_found(format!("no view {other:?}"))),
    };
    Ok(Json(json!({"seq": state.last_seq, "view": name, "data": data})))
}

/// The audit trail as exported bytes, suitable for writing straight to a file.
async fn audit(State(svc): State<AppState>, Path(id): Path<String>, _caller: Caller) -> ApiResult<Response> {
    let project = project_of(&svc, &id)?;
    let (events, state) = project.snapshot();
    if state.blind_mode {
        return Err(ApiError::blind());
    }
    let bytes = export_audit(&events, &state).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "audit", e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DriftCheck {
    code_id: CodeId,
    span: Span,
}

/// State the drift check may read on behalf of `actor`: own highlights only under blind mode.
fn drift_basis(state: &ProjectState, actor: &CoderId) -> ProjectState {
    if state.blind_mode {
        view_for(state, actor)
    } else {
        state.clone()
    }
}

async fn run_drift(svc: &Service, project: &Project, state: &ProjectState, actor: &CoderId, code: &CodeId, span: &Span, trigger: Trigger) -> ApiResult<Option<DriftAssessment>> {
    let basis = drift_basis(state, actor);
    if !project.monitor().admit(&svc.config.drift, &basis, code, Some(span), trigger).await {
        return Ok(None);
    }
    let input = drift_input(&basis, code, span, svc.config.exemplar_limit)?;
    Ok(Some(svc.assistant.detect_drift(input).await?))
}

async fn assist_drift(
    State(svc): State<AppState>,
    Path(id): Path<String>,
    caller: Caller,
    Json(req): Json<DriftCheck>,
) -> ApiResult<Json<Value>> {
    let project = project_of(&svc, &id)?;
    let state = project.state();
    if !state.codebook.contains_key(&req.code_id) {
        return Err(ApiError::not_found(format!("no code {}", req.code_id)));
    }
    let assessment = run_drift(&svc, &project, &state, caller.coder(), &req.code_id, &req.span, Trigger::Manual)
        .await?
        .ok_or_else(|| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "precondition", "the code has no prior exemplars"))?;
    Ok(Json(json!({
        "code_id": state.resolve_code(&req.code_id),
        "candidate": req.span,
        "assessment": assessment,
        "seq": state.last_seq,
    })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChildCode {
    #[serde(default)]
    code_id: Option<CodeId>,
    name: String,
    #[serde(default)]
    definition: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ResolveRequest {
    #[serde(default)]
    alert_id: Option<AlertId>,
    code_id: CodeId,
    candidate: Span,
    assessment: DriftAssessment,
    choice: DriftChoice,
    #[serde(default)]
    definition: Option<String>,
    #[serde(default)]
    child: Option<ChildCode>,
    #[serde(default)]
    highlight_id: Option<HighlightId>,
    #[serde(default)]
    existing_highlight: Option<HighlightId>,
}

fn fresh(prefix: &str) -> String {
    format!("{prefix}-{}", uuid::Uuid::new_v4().simple())
}

/// Records the alert, the chosen action and the resolution as one atomic batch.
async fn assist_resolve(
    State(svc): State<AppState>,
    Path(id): Path<String>,
    caller: Caller,
    Json(req): Json<ResolveRequest>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let project = project_of(&svc, &id)?;
    let applies = req.existing_highlight.is_none() && !(req.choice == DriftChoice::Refine && req.highlight_id.is_none());
    let resolution = DriftResolution {
        alert_id: req.alert_id.unwrap_or_else(|| AlertId::new(fresh("alert"))),
        code_id: req.code_id,
        candidate: req.candidate,
        assessment: req.assessment,
        choice: req.choice,
        definition: req.definition,
        child: req.child.map(|c| NewCode { code_id: c.code_id.unwrap_or_else(|| CodeId::new(fresh("code"))), name: c.name, definition: c.definition }),
        highlight_id: if applies { Some(req.highlight_id.unwrap_or_else(|| HighlightId::new(fresh("h")))) } else { req.highlight_id },
        existing_highlight: req.existing_highlight,
    };
    let bodies = resolve_drift(&resolution).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_resolution", e.to_string()))?;
    let proposals = bodies.into_iter().map(|b| ProposedEvent::new(caller.coder().clone(), b)).collect();
    let events = project.submit(proposals).await?;
    Ok((StatusCode::CREATED, Json(json!({ "events": events }))))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpanRequest {
    span: Span,
}

async fn assist_discussion(
    State(svc): State<AppState>,
    Path(id): Path<String>,
    _caller: Caller,
    Json(req): Json<SpanRequest>,
) -> ApiResult<Json<Value>> {
    let project = project_of(&svc, &id)?;
    let state = project.state();
    if state.blind_mode {
        return Err(ApiError::blind());
    }
    let result = svc.assistant.generate_discussion_prompt(discussion_input(&state, &req.span)?).await?;
    Ok(Json(serde_json::to_value(result).unwrap()))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SummaryRequest {
    #[serde(default)]
    code_id: Option<CodeId>,
    #[serde(default)]
    coder_id: Option<CoderId>,
}

async fn assist_summary(
    State(svc): State<AppState>,
    Path(id): Path<String>,
    caller: Caller,
    Json(req): Json<SummaryRequest>,
) -> ApiResult<Json<Value>> {
    let project = project_of(&svc, &id)?;
    let state = project.state();
    if state.blind_mode && req.coder_id.as_ref().is_some_and(|c| c != caller.coder()) {
        return Err(ApiError::blind());
    }
    let visible = view_for(&state, caller.coder());
    let input = summary_input(&visible, req.code_id.as_ref(), req.coder_id.as_ref())?;
    let result = svc.assistant.summarize_reflexive_stream(input).await?;
    Ok(Json(serde_json::to_value(result).unwrap()))
}

/// Generates keywords from the caller's stored profile and saves them to it.
async fn assist_keywords(State(svc): State<AppState>, Path(id): Path<String>, caller: Caller) -> ApiResult<(StatusCode, Json<Value>)> {
    let project = project_of(&svc, &id)?;
    let state = project.state();
    let mut profile = state
        .profiles
        .get(caller.coder())
        .cloned()
        .ok_or_else(|| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "precondition", "no profile for this coder"))?;
    let keywords = svc.assistant.positionality_keywords(keywords_input(&profile)).await?;
    profile.keywords = Some(keywords.clone());
    let event = project
        .submit(vec![ProposedEvent::new(caller.coder().clone(), EventBody::ProfileUpserted { profile })])
        .await?
        .remove(0);
    Ok((StatusCode::CREATED, Json(json!({"keywords": keywords, "event": event}))))
}

/// Runs session-end drift checks on the codes the caller applied, newest application per code.
async fn session_end(State(svc): State<AppState>, Path(id): Path<String>, caller: Caller) -> ApiResult<Json<Value>> {
    let project = project_of(&svc, &id)?;
    let state = project.state();
    let mut latest: HashMap<CodeId, &rta_core::Highlight> = HashMap::new();
    for h in state.highlights.values().filter(|h| &h.coder_id == caller.coder()) {
        let code = state.resolve_code(&h.code_id).clone();
        let newer = latest.get(&code).is_none_or(|cur| (h.created_at, &h.highlight_id) > (cur.created_at, &cur.highlight_id));
        if newer {
            latest.insert(code, h);
        }
    }
    let mut checked = Vec::new();
    for (code, h) in latest {
        match run_drift(&svc, &project, &state, caller.coder(), &code, &h.span, Trigger::SessionEnd).await {
            Ok(Some(assessment)) => checked.push(json!({"code_id": code, "highlight_id": h.highlight_id, "candidate": h.span, "assessment": assessment})),
            Ok(None) => {}
            Err(e) => tracing::warn!(code = %code, error = ?e, "session-end drift check failed"),
        }
    }
    Ok(Json(json!({ "checked": checked })))
}

pub async fn serve(service: Arc<Service>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(service)).await
}
