//! Deterministic offline provider. Replies are canonical JSON computed from the
//! structured request input, so identical inputs give identical bytes.

use async_trait::async_trait;
use rta_core::canonical::to_canonical_string;
use serde_json::{json, Value};

use super::{Provider, ProviderError, ProviderKind};
use crate::request::{AssistRequest, DiscussionInput, DriftInput, FeatureInput, KeywordsInput, SummaryInput};
use crate::text::{frequent_terms, jaccard, tokenize, word_count};

/// Best exemplar similarity below this counts as drift.
pub const DRIFT_THRESHOLD: f64 = 0.2;

pub struct StubProvider;

#[async_trait]
impl Provider for StubProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Stub
    }

    async fn complete(&self, request: &AssistRequest) -> Result<String, ProviderError> {
        let reply = match &request.input {
            FeatureInput::Drift(d) => drift(d),
            FeatureInput::DiscussionPrompt(d) => discussion(d),
            FeatureInput::Summary(s) => summary(s),
            FeatureInput::Keywords(k) => keywords(k),
        };
        to_canonical_string(&reply).map_err(|e| ProviderError::Transport(e.to_string()))
    }
}

pub fn max_similarity(d: &DriftInput) -> f64 {
    d.exemplars.iter().map(|e| jaccard(&d.candidate, e)).fold(0.0, f64::max)
}

fn drift(d: &DriftInput) -> Value {
    let sim = max_similarity(d);
    if sim < DRIFT_THRESHOLD {
        let terms = frequent_terms(&d.candidate).into_iter().take(3).collect::<Vec<_>>();
        let about = if terms.is_empty() { "new material".to_owned() } else { terms.join(", ") };
        let base = d.code_definition.trim();
        let suggested = if base.is_empty() { format!("Also covers {about}.") } else { format!("{base} Also covers {about}.") };
        json!({
            "drift_detected": true,
            "explanation": format!(
                "Earlier {} passages share little wording with this one (overlap {sim:.2}), which centers on {about}.",
                d.code_name
            ),
            "suggested_definition": suggested,
        })
    } else {
        json!({
            "drift_detected": false,
            "explanation": format!("The usage is consistent with earlier {} passages (overlap {sim:.2}).", d.code_name),
            "suggested_definition": null,
        })
    }
}

/// Codes in order of first appearance among the researchers.
pub fn distinct_codes(d: &DiscussionInput) -> Vec<&str> {
    let mut codes: Vec<&str> = Vec::new();
    for r in &d.researchers {
        if !codes.contains(&r.code_name.as_str()) {
            codes.push(&r.code_name);
        }
    }
    codes
}

fn discussion(d: &DiscussionInput) -> Value {
    let title = distinct_codes(d).join(" vs ");
    let clauses: Vec<String> = d
        .researchers
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if i == 0 {
                format!("{}, you read this as {}", r.display_name, r.code_name)
            } else {
                format!("{}, as {}", r.display_name, r.code_name)
            }
        })
        .collect();
    json!({
        "title": title,
        "prompt": format!("{title}: {} — what does each lens reveal?", clauses.join("; ")),
    })
}

pub const NO_ENTRIES: &str = "No entries recorded.";

fn category_sentence(notes: &[String], label: &str) -> String {
    if notes.is_empty() {
        return NO_ENTRIES.to_owned();
    }
    let n = notes.len();
    let plural = if n == 1 { "" } else { "s" };
    match frequent_terms(&notes.join("\n")).first() {
        Some(term) => format!("Your team recorded {n} {label} note{plural}, most often mentioning \"{term}\"."),
        None => format!("Your team recorded {n} {label} note{plural}."),
    }
}

fn summary(s: &SummaryInput) -> Value {
    json!({
        "linguisticPatterns": category_sentence(&s.justification, "justification"),
        "positionalityNarrative": category_sentence(&s.positionality, "positionality"),
        "alternativeThinkingPatterns": category_sentence(&s.alternatives, "alternative framing"),
        "notes": category_sentence(&s.other, "other"),
    })
}

/// ceil(words / 8), clamped to 1..=12.
pub fn keyword_count(words: usize) -> usize {
    words.div_ceil(8).clamp(1, 12)
}

fn keywords(k: &KeywordsInput) -> Value {
    let text = k.combined_text();
    let n = keyword_count(word_count(&text));
    let mut picked: Vec<String> = frequent_terms(&text).into_iter().take(n).collect();
    if picked.is_empty() {
        for t in tokenize(&text) {
            if picked.len() == n {
                break;
            }
            if !picked.contains(&t) {
                picked.push(t);
            }
        }
    }
    json!({ "keywords": picked.join("; ") })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyword_count_rule() {
        assert_eq!(keyword_count(0), 1);
        assert_eq!(keyword_count(8), 1);
        assert_eq!(keyword_count(9), 2);
        assert_eq!(keyword_count(10), 2);
        assert_eq!(keyword_count(96), 12);
        assert_eq!(keyword_count(200), 12);
    }
}
