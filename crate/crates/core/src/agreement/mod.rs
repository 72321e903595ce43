//! Percentage agreement, the diff view and Discussion Focus routing.
//!
//! Agreement here routes attention; it is deliberately not a chance-corrected
//! reliability statistic.

mod diff;
mod report;
mod rule;
mod status;

use thiserror::Error;

use crate::ids::{CodeId, DocId};

pub use diff::{diff_segments, DiffScope, DiffSegment, DivergenceKind};
pub use report::{is_agreed, is_agreed_with, percentage_agreement, percentage_agreement_in, AgreementReport, AgreementScope, CoderTally};
pub use rule::OverlapRule;
pub use status::{
    code_status, discussion_status, discussion_statuses, effective_status, usage_stats, DiscussionConfig, UsageStats,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgreementError {
    #[error("unknown code {0}")]
    UnknownCode(CodeId),
    #[error("report scope does not match code {0}")]
    ScopeMismatch(CodeId),
    #[error("diff needs at least two coders with highlights, found {0}")]
    TooFewCoders(usize),
    #[error("jaccard threshold {0} outside (0, 1]")]
    InvalidThreshold(String),
    #[error("unknown document {0}")]
    UnknownDocument(DocId),
}
