use serde::{Deserialize, Serialize};

use super::AgreementError;
use crate::model::Span;

/// When two highlights count as covering the same text.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "RawRule")]
pub enum OverlapRule {
    /// At least one shared character.
    #[default]
    AnyCharOverlap,
    /// Character-level Jaccard index of the two spans at least `threshold`.
    JaccardThreshold { threshold: f64 },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawRule {
    AnyCharOverlap,
    JaccardThreshold { threshold: f64 },
}

impl TryFrom<RawRule> for OverlapRule {
    type Error = AgreementError;

    fn try_from(raw: RawRule) -> Result<Self, Self::Error> {
        match raw {
            RawRule::AnyCharOverlap => Ok(OverlapRule::AnyCharOverlap),
            RawRule::JaccardThreshold { threshold } => OverlapRule::jaccard(threshold),
        }
    }
}

impl OverlapRule {
    pub fn jaccard(threshold: f64) -> Result<Self, AgreementError> {
        if threshold > 0.0 && threshold <= 1.0 {
            Ok(OverlapRule::JaccardThreshold { threshold })
        } else {
            Err(AgreementError::InvalidThreshold(threshold.to_string()))
        }
    }

    pub fn matches(&self, a: &Span, b: &Span) -> bool {
        let shared = a.overlap_len(b);
        match *self {
            OverlapRule::AnyCharOverlap => shared > 0,
            OverlapRule::JaccardThreshold { threshold } => {
                if shared == 0 {
                    return false;
                }
                let union = a.len() + b.len() - shared;
                shared as f64 / union as f64 >= threshold
            }
        }
    }
}
