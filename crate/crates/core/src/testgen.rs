//! Random generator of valid event logs for property and acceptance tests.

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use crate::event::{Event, EventBody, MergeTarget, NewCode, ProposedEvent};
use crate::fold::{fold, validate};
use crate::ids::{CodeId, CoderId, HighlightId, Timestamp};
use crate::model::{
    DiscussionLevel, TransformKind, DocumentRef, DriftAssessment, DriftChoice, NoteAnchor, NoteText, ProjectSettings, ProjectState,
    ResearcherProfile, SegmentRef, Span,
};

const WORDS: &[&str] = &[
    "feedback", "budget", "residents", "committee", "camera", "privacy", "street", "data", "city", "outreach",
    "trust", "access", "review", "process", "policy", "équipe", "naïve", "café", "☂", "translators",
];

pub fn random_text(rng: &mut impl Rng, chars: usize) -> String {
    let mut out = String::new();
    while out.chars().count() < chars {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(WORDS.choose(rng).expect("non-empty"));
    }
    out.chars().take(chars).collect()
}

/// Produces random proposals that are valid against the state they are drawn from.
pub struct ProposalGen {
    pub coders: Vec<CoderId>,
    counter: u64,
    prefix: String,
}

impl ProposalGen {
    pub fn new(coders: Vec<CoderId>) -> Self {
        Self::with_prefix(coders, "")
    }

    /// `prefix` keeps ids from different generators disjoint.
    pub fn with_prefix(coders: Vec<CoderId>, prefix: &str) -> Self {
        ProposalGen { coders, counter: 0, prefix: prefix.to_owned() }
    }

    fn id(&mut self, kind: &str) -> String {
        self.counter += 1;
        format!("{}{kind}{}", self.prefix, self.counter)
    }

    fn random_span(&self, rng: &mut impl Rng, state: &ProjectState) -> Option<Span> {
        let docs: Vec<&DocumentRef> = state.documents.values().collect();
        let doc = docs.choose(rng)?;
        let len = doc.char_len();
        let start = rng.gen_range(0..len);
        let end = rng.gen_range(start + 1..=len.min(start + 60));
        Some(Span { doc_id: doc.doc_id.clone(), start, end })
    }

    pub fn document(&mut self, rng: &mut impl Rng) -> DocumentRef {
        let doc_id = self.id("doc");
        let len = rng.gen_range(120..600);
        let body = random_text(rng, len);
        let mut segments = Vec::new();
        if rng.gen_bool(0.5) {
            let mut start = 0;
            let mut n = 0;
            while start + 10 < len {
                let end = (start + rng.gen_range(20..120)).min(len);
                n += 1;
                segments.push(SegmentRef {
                    segment_id: format!("{doc_id}-s{n}").into(),
                    span: Span { doc_id: doc_id.clone().into(), start, end },
                });
                start = end + rng.gen_range(0..3);
            }
        }
        DocumentRef { doc_id: doc_id.into(), title: format!("Transcript {}", self.counter), body, segments }
    }

    fn candidate(&mut self, rng: &mut impl Rng, state: &ProjectState) -> Option<ProposedEvent> {
        let actor = self.coders.choose(rng)?.clone();
        if !state.is_created() {
            let body = EventBody::ProjectCreated {
                project_id: self.id("p").into(),
                name: "Random project".into(),
                settings: ProjectSettings { unique_code_names: rng.gen_bool(0.8) },
                blind_mode: false,
            };
            return Some(ProposedEvent::new(actor, body));
        }
        let active: Vec<CodeId> = state.active_codes().map(|c| c.code_id.clone()).collect();
        let highlights: Vec<HighlightId> = state.highlights.keys().cloned().collect();
        let roll = rng.gen_range(0..100);
        let body = match roll {
            _ if state.documents.is_empty() || roll < 4 => EventBody::DocumentAdded { document: self.document(rng) },
            _ if active.len() < 2 || roll < 16 => {
                let id = self.id("c");
                EventBody::CodeCreated { code: NewCode::new(id.clone(), format!("Code {id}"), random_text(rng, 30)) }
            }
            16..=45 => EventBody::HighlightApplied {
                highlight_id: self.id("h").into(),
                span: self.random_span(rng, state)?,
                code_id: active.choose(rng)?.clone(),
            },
            46..=50 => EventBody::CodeRenamed { code_id: active.choose(rng)?.clone(), name: format!("Renamed {}", self.id("r")) },
            51..=54 => EventBody::CodeRedefined { code_id: active.choose(rng)?.clone(), definition: random_text(rng, 40) },
            55..=59 => {
                let n = rng.gen_range(2..=active.len().min(3));
                let sources: Vec<CodeId> = active.choose_multiple(rng, n).cloned().collect();
                if rng.gen_bool(0.5) {
                    let id = self.id("m");
                    EventBody::CodesMerged { sources, target: MergeTarget::New(NewCode::new(id.clone(), format!("Merged {id}"), "")) }
                } else {
                    let (target, rest) = sources.split_first()?;
                    EventBody::CodesMerged { sources: rest.to_vec(), target: MergeTarget::Existing { code_id: target.clone() } }
                }
            }
            60..=64 => {
                let parent = active.choose(rng)?.clone();
                let children: Vec<NewCode> = (0..rng.gen_range(1..=2))
                    .map(|_| {
                        let id = self.id("s");
                        NewCode::new(id.clone(), format!("Split {id}"), "")
                    })
                    .collect();
                let mut reassignments = BTreeMap::new();
                for h in state.highlights_for_code(&parent) {
                    if rng.gen_bool(0.5) {
                        reassignments.insert(h.highlight_id.clone(), children.choose(rng)?.code_id.clone());
                    }
                }
                EventBody::CodeSplit { code_id: parent, children, reassignments }
            }
            65..=68 => EventBody::HighlightRemoved { highlight_id: highlights.choose(rng)?.clone() },
            69..=78 => {
                let anchor = if !highlights.is_empty() && rng.gen_bool(0.7) {
                    NoteAnchor::Highlight { highlight_id: highlights.choose(rng)?.clone() }
                } else {
                    NoteAnchor::Span { span: self.random_span(rng, state)? }
                };
                let mut text = NoteText::default();
                match rng.gen_range(0..4) {
                    0 => text.justification = Some(random_text(rng, 30)),
                    1 => text.positionality = Some(random_text(rng, 30)),
                    2 => text.alternatives = Some(random_text(rng, 30)),
                    _ => text.free_notes = Some(random_text(rng, 30)),
                }
                EventBody::NoteAdded { note_id: self.id("n").into(), anchor, text }
            }
            79..=82 => {
                let drift = rng.gen_bool(0.5);
                EventBody::DriftAlertRecorded {
                    alert_id: self.id("a").into(),
                    code_id: active.choose(rng)?.clone(),
                    candidate: self.random_span(rng, state),
                    assessment: DriftAssessment {
                        drift_detected: drift,
                        explanation: "Usage shifted.".into(),
                        suggested_definition: drift.then(|| random_text(rng, 20)),
                    },
                }
            }
            83..=85 => {
                let open: Vec<_> = state.drift_alerts.values().filter(|a| a.resolution.is_none()).collect();
                let alert = open.choose(rng)?;
                let choice = *[DriftChoice::Refine, DriftChoice::Split, DriftChoice::ApplyOriginal].choose(rng)?;
                EventBody::DriftResolved { alert_id: alert.alert_id.clone(), choice }
            }
            86..=89 => {
                let levels = [DiscussionLevel::Aligned, DiscussionLevel::Review, DiscussionLevel::NeedsDiscussion];
                EventBody::DiscussionStatusSet {
                    code_id: active.choose(rng)?.clone(),
                    level: Some(*levels.choose(rng)?),
                    reasons: vec![],
                    manual: rng.gen_bool(0.5),
                }
            }
            90..=93 => EventBody::ProfileUpserted {
                profile: ResearcherProfile {
                    coder_id: actor.clone(),
                    display_name: format!("Coder {actor}"),
                    qualitative_history: random_text(rng, 40),
                    background_experience: random_text(rng, 40),
                    initial_data_view: random_text(rng, 20),
                    keywords: rng.gen_bool(0.5).then(|| "policy; equity lens".to_owned()),
                },
            },
            _ => EventBody::BlindModeSet { enabled: rng.gen_bool(0.3) },
        };
        Some(ProposedEvent::new(actor, body))
    }

    /// A proposal that validates against `state`.
    pub fn propose(&mut self, rng: &mut impl Rng, state: &ProjectState) -> ProposedEvent {
        for _ in 0..64 {
            if let Some(p) = self.candidate(rng, state) {
                if validate(state, &p).is_ok() {
                    return p;
                }
            }
        }
        let actor = self.coders[0].clone();
        if state.is_created() {
            ProposedEvent::new(actor, EventBody::BlindModeSet { enabled: false })
        } else {
            ProposedEvent::new(actor, EventBody::ProjectCreated {
                project_id: self.id("p").into(),
                name: "Random project".into(),
                settings: ProjectSettings::default(),
                blind_mode: false,
            })
        }
    }
}

/// A valid log of `len` events from `seed`, folded as it is generated.
pub fn random_log(seed: u64, len: usize) -> Vec<Event> {
    let mut rng = StdRng::seed_from_u64(seed);
    let coders: Vec<CoderId> = (0..rng.gen_range(2..=4)).map(|i| CoderId::new(format!("coder{i}"))).collect();
    let mut gen = ProposalGen::new(coders);
    let mut state = ProjectState::default();
    let mut events = Vec::with_capacity(len);
    for i in 0..len {
        let proposal = gen.propose(&mut rng, &state);
        let event = proposal.assign(i as u64 + 1, Timestamp(1_700_000_000_000 + i as i64 * 997));
        state.apply(&event).expect("generator only proposes valid events");
        events.push(event);
    }
    events
}

fn coder_span_multiset(state: &ProjectState) -> BTreeMap<(CoderId, Span), usize> {
    let mut m = BTreeMap::new();
    for h in state.highlights.values() {
        *m.entry((h.coder_id.clone(), h.span.clone())).or_insert(0) += 1;
    }
    m
}

/// Checks merge conservation and split partition for every transform in `events`.
pub fn check_transforms(events: &[Event]) -> Result<usize, String> {
    let mut state = ProjectState::default();
    let mut checked = 0;
    for e in events {
        let next = fold(&state, e).map_err(|err| err.to_string())?;
        match &e.body {
            EventBody::CodesMerged { sources, target } => {
                checked += 1;
                if state.highlights.len() != next.highlights.len() {
                    return Err(format!("seq {}: highlight count changed", e.seq));
                }
                if coder_span_multiset(&state) != coder_span_multiset(&next) {
                    return Err(format!("seq {}: (coder, span) multiset changed", e.seq));
                }
                for (id, before) in &state.highlights {
                    let after = &next.highlights[id];
                    let expected = if sources.contains(&before.code_id) { target.code_id() } else { &before.code_id };
                    if &after.code_id != expected {
                        return Err(format!("seq {}: highlight {id} on {} not {expected}", e.seq, after.code_id));
                    }
                }
                for s in sources {
                    let code = &next.codebook[s];
                    let merges: Vec<_> = code.lineage.iter().filter(|l| l.kind == TransformKind::MergedInto).collect();
                    if merges.len() != 1 || merges[0].related != vec![target.code_id().clone()] {
                        return Err(format!("seq {}: bad merge lineage on {s}", e.seq));
                    }
                }
            }
            EventBody::CodeSplit { code_id, children, reassignments } => {
                checked += 1;
                if coder_span_multiset(&state) != coder_span_multiset(&next) {
                    return Err(format!("seq {}: split changed highlight multiset", e.seq));
                }
                let allowed: Vec<&CodeId> = std::iter::once(code_id).chain(children.iter().map(|c| &c.code_id)).collect();
                for (id, before) in state.highlights.iter().filter(|(_, h)| &h.code_id == code_id) {
                    let after = &next.highlights[id].code_id;
                    if !allowed.contains(&after) {
                        return Err(format!("seq {}: highlight {id} left the split family", e.seq));
                    }
                    let expected = reassignments.get(id).unwrap_or(&before.code_id);
                    if after != expected {
                        return Err(format!("seq {}: highlight {id} moved unexpectedly", e.seq));
                    }
                }
                for child in children {
                    let lineage = &next.codebook[&child.code_id].lineage;
                    if lineage.first().map(|l| (l.kind, l.related.clone())) != Some((TransformKind::SplitFrom, vec![code_id.clone()])) {
                        return Err(format!("seq {}: child {} lacks split lineage", e.seq, child.code_id));
                    }
                }
            }
            _ => {}
        }
        state = next;
    }
    Ok(checked)
}
