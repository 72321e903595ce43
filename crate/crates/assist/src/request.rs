//! Feature inputs and the provider-neutral request built from them.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::templates::{render, response_format, template};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Drift,
    DiscussionPrompt,
    Summary,
    Keywords,
}

impl Feature {
    pub const ALL: [Feature; 4] = [Feature::Drift, Feature::DiscussionPrompt, Feature::Summary, Feature::Keywords];

    pub fn as_str(self) -> &'static str {
        match self {
            Feature::Drift => "drift",
            Feature::DiscussionPrompt => "discussion_prompt",
            Feature::Summary => "summary",
            Feature::Keywords => "keywords",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftInput {
    pub code_name: String,
    pub code_definition: String,
    pub exemplars: Vec<String>,
    pub candidate: String,
    pub context: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Researcher {
    pub display_name: String,
    #[serde(default)]
    pub keywords: Option<String>,
    pub code_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeDefinition {
    pub name: String,
    pub definition: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscussionInput {
    pub context: String,
    pub coded_text: String,
    #[serde(default)]
    pub document_title: String,
    pub researchers: Vec<Researcher>,
    pub code_definitions: Vec<CodeDefinition>,
}

/// Reflexive notes grouped by prompt category.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryInput {
    #[serde(default)]
    pub justification: Vec<String>,
    #[serde(default)]
    pub positionality: Vec<String>,
    #[serde(default)]
    pub alternatives: Vec<String>,
    #[serde(default)]
    pub other: Vec<String>,
}

impl SummaryInput {
    pub fn total(&self) -> usize {
        self.justification.len() + self.positionality.len() + self.alternatives.len() + self.other.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordsInput {
    pub display_name: String,
    pub qualitative_history: String,
    pub background_experience: String,
    pub initial_data_view: String,
}

impl KeywordsInput {
    pub fn combined_text(&self) -> String {
        [&self.qualitative_history, &self.background_experience, &self.initial_data_view]
            .iter()
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "feature", content = "input", rename_all = "snake_case")]
pub enum FeatureInput {
    Drift(DriftInput),
    DiscussionPrompt(DiscussionInput),
    Summary(SummaryInput),
    Keywords(KeywordsInput),
}

impl FeatureInput {
    pub fn feature(&self) -> Feature {
        match self {
            FeatureInput::Drift(_) => Feature::Drift,
            FeatureInput::DiscussionPrompt(_) => Feature::DiscussionPrompt,
            FeatureInput::Summary(_) => Feature::Summary,
            FeatureInput::Keywords(_) => Feature::Keywords,
        }
    }
}

/// One provider call: instantiated prompt plus the structured input it came from.
#[derive(Debug, Clone)]
pub struct AssistRequest {
    pub request_id: String,
    pub feature: Feature,
    pub system: String,
    pub user: String,
    pub input: FeatureInput,
}

impl AssistRequest {
    pub fn new(input: FeatureInput) -> Self {
        let feature = input.feature();
        let t = template(feature);
        let user = match &input {
            FeatureInput::Drift(d) => {
                let examples = numbered(&d.exemplars);
                render(
                    t.user,
                    &[
                        ("codeDefinition", &d.code_definition),
                        ("codeName", &d.code_name),
                        ("examplesText", &examples),
                        ("newPassage", &d.candidate),
                        ("context", &d.context),
                    ],
                )
            }
            FeatureInput::DiscussionPrompt(d) => {
                let researchers = d
                    .researchers
                    .iter()
                    .map(|r| {
                        let kw = r.keywords.as_deref().filter(|k| !k.trim().is_empty()).unwrap_or("not provided");
                        format!("- {} applied \"{}\" (background keywords: {kw})", r.display_name, r.code_name)
                    })
                    .collect::<Vec<_>>()
                    .join("\n");
                let definitions =
                    d.code_definitions.iter().map(|c| format!("- {}: {}", c.name, c.definition)).collect::<Vec<_>>().join("\n");
                render(
                    t.user,
                    &[
                        ("context", &d.context),
                        ("codedText", &d.coded_text),
                        ("documentTitle", &d.document_title),
                        ("researcherDescriptions", &researchers),
                        ("codeDefinitionsText", &definitions),
                    ],
                )
            }
            FeatureInput::Summary(s) => render(
                t.user,
                &[
                    ("justificationResponses.map(...)", &bulleted(&s.justification)),
                    ("positionalityResponses.map(...)", &bulleted(&s.positionality)),
                    ("alternativeResponses.map(...)", &bulleted(&s.alternatives)),
                    ("notes.map(...)", &bulleted(&s.other)),
                ],
            ),
            FeatureInput::Keywords(k) => render(
                t.user,
                &[
                    ("userName", &k.display_name),
                    ("parsed.qualitativeHistory", &k.qualitative_history),
                    ("parsed.backgroundExperience", &k.background_experience),
                    ("parsed.initialDataView", &k.initial_data_view),
                ],
            ),
        };
        AssistRequest {
            request_id: uuid::Uuid::new_v4().to_string(),
            feature,
            system: t.system.to_owned(),
            user,
            input,
        }
    }

    pub fn response_format(&self) -> &'static Value {
        response_format(self.feature)
    }

    /// Hex SHA-256 of the full prompt, logged instead of the prompt itself.
    pub fn prompt_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.system.as_bytes());
        h.update([0]);
        h.update(self.user.as_bytes());
        hex::encode(h.finalize())
    }
}

fn numbered(items: &[String]) -> String {
    items.iter().enumerate().map(|(i, s)| format!("{}. {s}", i + 1)).collect::<Vec<_>>().join("\n")
}

fn bulleted(items: &[String]) -> String {
    if items.is_empty() {
        return "(none)".to_owned();
    }
    items.iter().map(|s| format!("- {s}")).collect::<Vec<_>>().join("\n")
}
