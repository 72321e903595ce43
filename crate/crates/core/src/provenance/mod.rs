//! Code histories, the provenance graph and the portable audit trail, all
//! reconstructed from the event log.

mod audit;
mod graph;
mod history;

use thiserror::Error;

use crate::event::Event;
use crate::fold::FoldError;
use crate::ids::CodeId;

pub use audit::{export_audit, import_audit, AuditError, AuditSummary, AuditTrail, ProjectMeta, FORMAT_VERSION};
pub use graph::{provenance_graph, EdgeKind, GraphEdge, GraphNode, ProvenanceGraph};
pub use history::{code_history, histories, HistoryAction, HistoryEntry};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProvenanceError {
    #[error("invalid event log: {0}")]
    InvalidLog(#[from] FoldError),
    #[error("code {0} never existed in this log")]
    UnknownCode(CodeId),
    #[error("since_seq {since} outside 0..={last}")]
    SinceOutOfRange { since: u64, last: u64 },
}

/// Events with `seq > since_seq`, in log order.
pub fn diff_since(events: &[Event], since_seq: u64) -> Result<&[Event], ProvenanceError> {
    let last = events.last().map_or(0, |e| e.seq);
    if since_seq > last {
        return Err(ProvenanceError::SinceOutOfRange { since: since_seq, last });
    }
    let start = events.partition_point(|e| e.seq <= since_seq);
    Ok(&events[start..])
}
