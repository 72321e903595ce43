//! WebSocket event stream.
//!
//! `GET /projects/{id}/stream?since=N&token=T` upgrades to a socket that first
//! sends every event after `since`, then a `ready` frame, then live events and
//! advisories. Seqs on the socket are strictly increasing with no gaps.

use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::Response;
use serde::Deserialize;
use serde_json::Value;
use tokio::sync::broadcast::error::RecvError;

use crate::api::{project_of, ApiError, AppState, Caller};
use crate::frames::{advisory_frame, error_frame, event_frame, ready_frame};
use crate::project::{Outbound, Project, Record, Subscription};
use rta_core::CoderId;

#[derive(Deserialize)]
pub struct StreamQuery {
    #[serde(default)]
    since: u64,
}

pub async fn stream(
    State(svc): State<AppState>,
    Path(id): Path<String>,
    caller: Caller,
    Query(q): Query<StreamQuery>,
    upgrade: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let project = project_of(&svc, &id)?;
    let sub = project
        .subscribe(q.since)
        .await
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_since", e.to_string()))?;
    let viewer = caller.0.coder_id;
    Ok(upgrade.on_upgrade(move |socket| run(socket, project, viewer, sub)))
}

async fn send(socket: &mut WebSocket, frame: &Value) -> bool {
    socket.send(Message::Text(frame.to_string().into())).await.is_ok()
}

async fn send_record(socket: &mut WebSocket, record: &Record, viewer: &CoderId, blind: bool, last: &mut u64) -> bool {
    if record.event.seq <= *last {
        return true;
    }
    *last = record.event.seq;
    send(socket, &event_frame(&record.event, &record.meta, viewer, blind)).await
}

async fn run(mut socket: WebSocket, project: Arc<Project>, viewer: CoderId, sub: Subscription) {
    let Subscription { replay, head_blind, head_seq, mut rx } = sub;
    let mut last = head_seq - replay.len() as u64;
    for record in &replay {
        if !send_record(&mut socket, record, &viewer, head_blind, &mut last).await {
            return;
        }
    }
    if !send(&mut socket, &ready_frame(head_seq)).await {
        return;
    }
    loop {
        tokio::select! {
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
            out = rx.recv() => match out {
                Ok(out) => match &*out {
                    Outbound::Event(record) => {
                        if !send_record(&mut socket, record, &viewer, record.meta.blind_after, &mut last).await {
                            return;
                        }
                    }
                    Outbound::Advisory { audience, payload } => {
                        if audience.as_ref().is_none_or(|a| a == &viewer) && !send(&mut socket, &advisory_frame(payload)).await {
                            return;
                        }
                    }
                },
                Err(RecvError::Lagged(skipped)) => {
                    tracing::debug!(skipped, "subscriber lagged; refilling from the log");
                    for record in project.records_after(last) {
                        if !send_record(&mut socket, &record, &viewer, record.meta.blind_after, &mut last).await {
                            return;
                        }
                    }
                }
                Err(RecvError::Closed) => {
                    let _ = send(&mut socket, &error_frame("project closed")).await;
                    return;
                }
            },
        }
    }
}
