//! Prompt templates and response_format schemas, kept verbatim in `templates/`.
//!
//! Each template file holds a system part and a user part separated by a line
//! of five dashes. Placeholders look like `${name}` and are substituted in a
//! single pass, so substituted text is never rescanned.

use std::sync::OnceLock;

use serde_json::Value;

use crate::request::Feature;

const DRIFT: &str = include_str!("../templates/drift.txt");
const DISCUSSION: &str = include_str!("../templates/discussion.txt");
const SUMMARY: &str = include_str!("../templates/summary.txt");
const KEYWORDS: &str = include_str!("../templates/keywords.txt");

const DRIFT_SCHEMA: &str = include_str!("../templates/drift.schema.json");
const DISCUSSION_SCHEMA: &str = include_str!("../templates/discussion.schema.json");
const SUMMARY_SCHEMA: &str = include_str!("../templates/summary.schema.json");
const KEYWORDS_SCHEMA: &str = include_str!("../templates/keywords.schema.json");

const SEPARATOR: &str = "\n-----\n";

pub struct Template {
    pub system: &'static str,
    pub user: &'static str,
}

fn split(raw: &'static str) -> Template {
    let (system, user) = raw.split_once(SEPARATOR).expect("template has a separator line");
    Template { system: system.trim(), user: user.trim() }
}

pub fn template(feature: Feature) -> Template {
    split(match feature {
        Feature::Drift => DRIFT,
        Feature::DiscussionPrompt => DISCUSSION,
        Feature::Summary => SUMMARY,
        Feature::Keywords => KEYWORDS,
    })
}

/// The `response_format` object sent with every request for `feature`.
pub fn response_format(feature: Feature) -> &'static Value {
    static CELLS: [OnceLock<Value>; 4] = [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let (i, raw) = match feature {
        Feature::Drift => (0, DRIFT_SCHEMA),
        Feature::DiscussionPrompt => (1, DISCUSSION_SCHEMA),
        Feature::Summary => (2, SUMMARY_SCHEMA),
        Feature::Keywords => (3, KEYWORDS_SCHEMA),
    };
    CELLS[i].get_or_init(|| serde_json::from_str(raw).expect("bundled schema is valid JSON"))
}

/// Property names declared by the response schema.
pub fn schema_fields(feature: Feature) -> Vec<&'static str> {
    response_format(feature)["json_schema"]["schema"]["properties"]
        .as_object()
        .map(|props| props.keys().map(String::as_str).collect())
        .unwrap_or_default()
}

pub fn required_fields(feature: Feature) -> Vec<&'static str> {
    response_format(feature)["json_schema"]["schema"]["required"]
        .as_array()
        .map(|r| r.iter().filter_map(Value::as_str).collect())
        .unwrap_or_default()
}

/// Substitutes `${name}` placeholders. Unknown placeholders are left as is.
pub fn render(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        match after.find('}') {
            Some(end) => {
                let name = &after[..end];
                match values.iter().find(|(k, _)| *k == name) {
                    Some((_, v)) => out.push_str(v),
                    None => out.push_str(&rest[start..start + 2 + end + 1]),
                }
                rest = &after[end + 1..];
            }
            None => {
                out.push_str(&rest[start..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

/// Placeholder names still present in `text`.
pub fn placeholders(text: &str) -> Vec<&str> {
    let mut names = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("${") {
        let after = &rest[start + 2..];
        let Some(end) = after.find('}') else { break };
        names.push(&after[..end]);
        rest = &after[end + 1..];
    }
    names
}
