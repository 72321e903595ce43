//! A worked two-coder session used as a shared fixture: profile setup, independent
//! coding with a drift-driven split, a merge during team review, and reporting.
//!
//! Ids are parameters so the same script can run offline or against a live
//! service that issues its own project, coder and document ids.

use std::collections::BTreeMap;

use crate::event::{EventBody, MergeTarget, NewCode, ProposedEvent};
use crate::ids::{AlertId, CodeId, CoderId, DocId, HighlightId, ProjectId, SegmentId, Timestamp};
use crate::model::{
    DocumentRef, DriftAssessment, DriftChoice, NoteAnchor, NoteText, ProjectSettings, ResearcherProfile, SegmentRef,
    Span,
};
use crate::Event;

pub const PROJECT_NAME: &str = "Civic feedback study";
pub const DOC_TITLE: &str = "Interview 3: city manager";

pub const BUREAUCRATIC_HURDLES: &str = "Bureaucratic Hurdles";
pub const PARTICIPATION_BARRIER: &str = "Participation Barrier";
pub const FINANCIAL_CONSTRAINTS: &str = "Financial Constraints";
pub const SYSTEMIC_EXCLUSION: &str = "Systemic Exclusion";

const LINES: [&str; 4] = [
    "INTERVIEWER: How does the city collect feedback on new services?\n",
    "CITY MANAGER: Every feedback form has to pass three review committees before it goes out, so by the time residents see it the decision is already made. People stop bothering.\n",
    "INTERVIEWER: And the pilot in the east district?\n",
    "CITY MANAGER: The pilot stalled because the budget line for outreach was cut mid-year, and we could not pay the translators.\n",
];

pub const FEEDBACK_PASSAGE: &str =
    "Every feedback form has to pass three review committees before it goes out";
pub const BUDGET_PASSAGE: &str = "the budget line for outreach was cut mid-year, and we could not pay the translators";

/// Ids issued for one run of the scenario.
#[derive(Debug, Clone)]
pub struct ScenarioIds {
    pub project: ProjectId,
    pub alice: CoderId,
    pub bob: CoderId,
    pub doc: DocId,
}

impl Default for ScenarioIds {
    fn default() -> Self {
        ScenarioIds { project: "p-civic".into(), alice: "alice".into(), bob: "bob".into(), doc: "doc-1".into() }
    }
}

pub fn code_ids() -> [CodeId; 4] {
    ["c-bh".into(), "c-pb".into(), "c-fc".into(), "c-se".into()]
}

pub fn body() -> String {
    LINES.concat()
}

/// Character span of the first occurrence of `needle` in `haystack`.
pub fn char_span(doc_id: &DocId, haystack: &str, needle: &str) -> Span {
    let byte = haystack.find(needle).expect("needle present in fixture text");
    let start = haystack[..byte].chars().count();
    Span { doc_id: doc_id.clone(), start, end: start + needle.chars().count() }
}

pub fn document(doc_id: &DocId) -> DocumentRef {
    let mut segments = Vec::new();
    let mut offset = 0;
    for (i, line) in LINES.iter().enumerate() {
        let len = line.trim_end_matches('\n').chars().count();
        segments.push(SegmentRef {
            segment_id: SegmentId::new(format!("s{}", i + 1)),
            span: Span { doc_id: doc_id.clone(), start: offset, end: offset + len },
        });
        offset += line.chars().count();
    }
    DocumentRef { doc_id: doc_id.clone(), title: DOC_TITLE.into(), body: body(), segments }
}

pub fn feedback_span(doc_id: &DocId) -> Span {
    char_span(doc_id, &body(), FEEDBACK_PASSAGE)
}

pub fn budget_span(doc_id: &DocId) -> Span {
    char_span(doc_id, &body(), BUDGET_PASSAGE)
}

pub fn alice_profile(id: &CoderId) -> ResearcherProfile {
    ResearcherProfile {
        coder_id: id.clone(),
        display_name: "Alice".into(),
        qualitative_history: "Eight years reviewing resident surveys and program evaluations for the city.".into(),
        background_experience: "Seasoned policy analyst in municipal government; I read problems as implementation issues.".into(),
        initial_data_view: "Expect process friction between departments.".into(),
        keywords: None,
    }
}

pub fn bob_profile(id: &CoderId) -> ResearcherProfile {
    ResearcherProfile {
        coder_id: id.clone(),
        display_name: "Bob".into(),
        qualitative_history: "University researcher running interview studies on civic participation.".into(),
        background_experience: "Specialist in social equity; attentive to who is left out of public processes.".into(),
        initial_data_view: "Expect unequal access to participation.".into(),
        keywords: None,
    }
}

pub struct Step {
    pub name: &'static str,
    pub events: Vec<ProposedEvent>,
}

/// The full script, grouped by workflow step.
pub fn steps(ids: &ScenarioIds) -> Vec<Step> {
    let [bh, pb, fc, se] = code_ids();
    let (alice, bob) = (ids.alice.clone(), ids.bob.clone());
    let ev = |actor: &CoderId, body: EventBody| ProposedEvent::new(actor.clone(), body);
    let h_alice_feedback = HighlightId::from("h-alice-1");
    let h_bob_feedback = HighlightId::from("h-bob-1");
    let alert = AlertId::from("drift-1");

    let setup = vec![
        ev(
            &alice,
            EventBody::ProjectCreated {
                project_id: ids.project.clone(),
                name: PROJECT_NAME.into(),
                settings: ProjectSettings::default(),
                blind_mode: false,
            },
        ),
        ev(&alice, EventBody::ProfileUpserted { profile: alice_profile(&alice) }),
        ev(&bob, EventBody::ProfileUpserted { profile: bob_profile(&bob) }),
        ev(&alice, EventBody::DocumentAdded { document: document(&ids.doc) }),
    ];

    let independent = vec![
        ev(
            &alice,
            EventBody::CodeCreated {
                code: NewCode::new(bh.clone(), BUREAUCRATIC_HURDLES, "Procedural obstacles in how the city runs its feedback process."),
            },
        ),
        ev(
            &alice,
            EventBody::HighlightApplied { highlight_id: h_alice_feedback.clone(), span: feedback_span(&ids.doc), code_id: bh.clone() },
        ),
        ev(
            &alice,
            EventBody::NoteAdded {
                note_id: "n-alice-1".into(),
                anchor: NoteAnchor::Highlight { highlight_id: h_alice_feedback },
                text: NoteText {
                    justification: Some("Three committee reviews before a form goes out.".into()),
                    positionality: Some("My government background reveals a deep-seated institutional fear of failure.".into()),
                    ..Default::default()
                },
            },
        ),
        ev(
            &bob,
            EventBody::CodeCreated {
                code: NewCode::new(pb.clone(), PARTICIPATION_BARRIER, "Conditions that keep residents from taking part in civic processes."),
            },
        ),
        ev(
            &bob,
            EventBody::HighlightApplied { highlight_id: h_bob_feedback.clone(), span: feedback_span(&ids.doc), code_id: pb.clone() },
        ),
        ev(
            &bob,
            EventBody::NoteAdded {
                note_id: "n-bob-1".into(),
                anchor: NoteAnchor::Highlight { highlight_id: h_bob_feedback },
                text: NoteText {
                    positionality: Some("The system privileges those with resources.".into()),
                    alternatives: Some("Could also be read as simple staff overload.".into()),
                    ..Default::default()
                },
            },
        ),
        ev(
            &alice,
            EventBody::DriftAlertRecorded {
                alert_id: alert.clone(),
                code_id: bh.clone(),
                candidate: Some(budget_span(&ids.doc)),
                assessment: DriftAssessment {
                    drift_detected: true,
                    explanation: "Earlier uses describe review process friction, while this passage is about a funding cut.".into(),
                    suggested_definition: Some("Procedural and financial obstacles in city feedback and outreach.".into()),
                },
            },
        ),
        ev(
            &alice,
            EventBody::CodeSplit {
                code_id: bh.clone(),
                children: vec![NewCode::new(fc.clone(), FINANCIAL_CONSTRAINTS, "Budget shortfalls that limit outreach and services.")],
                reassignments: BTreeMap::new(),
            },
        ),
        ev(
            &alice,
            EventBody::HighlightApplied { highlight_id: "h-alice-2".into(), span: budget_span(&ids.doc), code_id: fc },
        ),
        ev(&alice, EventBody::DriftResolved { alert_id: alert, choice: DriftChoice::Split }),
    ];

    let review = vec![ev(
        &bob,
        EventBody::CodesMerged {
            sources: vec![bh, pb],
            target: MergeTarget::New(NewCode::new(
                se,
                SYSTEMIC_EXCLUSION,
                "Institutional processes that shut residents out of decisions that affect them.",
            )),
        },
    )];

    vec![
        Step { name: "profile and project setup", events: setup },
        Step { name: "independent coding", events: independent },
        Step { name: "team review", events: review },
    ]
}

pub fn proposals(ids: &ScenarioIds) -> Vec<ProposedEvent> {
    steps(ids).into_iter().flat_map(|s| s.events).collect()
}

/// Assigns seqs 1.. and a one-second clock to `proposals`.
pub fn sequence(proposals: impl IntoIterator<Item = ProposedEvent>) -> Vec<Event> {
    proposals
        .into_iter()
        .enumerate()
        .map(|(i, p)| p.assign(i as u64 + 1, Timestamp(1_700_000_000_000 + 1000 * i as i64)))
        .collect()
}

pub fn events() -> Vec<Event> {
    sequence(proposals(&ScenarioIds::default()))
}
