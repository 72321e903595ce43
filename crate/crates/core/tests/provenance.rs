use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rta_core::canonical::to_canonical_bytes;
use rta_core::provenance::{
    code_history, diff_since, export_audit, histories, import_audit, provenance_graph, AuditError, EdgeKind, HistoryAction,
    ProvenanceError,
};
use rta_core::scenario;
use rta_core::testgen::random_log;
use rta_core::{CodeId, Event, EventBody, HighlightId, MergeTarget, NewCode, ProjectSettings, ProjectState, ProposedEvent, Timestamp};

fn log(bodies: Vec<EventBody>) -> Vec<Event> {
    let mut all = vec![EventBody::ProjectCreated {
        project_id: "p".into(),
        name: "p".into(),
        settings: ProjectSettings::default(),
        blind_mode: false,
    }];
    all.extend(bodies);
    all.into_iter()
        .enumerate()
        .map(|(i, b)| ProposedEvent::new("alice", b).assign(i as u64 + 1, Timestamp(i as i64)))
        .collect()
}

fn create(id: &str) -> EventBody {
    EventBody::CodeCreated { code: NewCode::new(id, id.to_uppercase(), format!("{id} definition")) }
}

/// Independent oracle: seqs of events that involve `code`, found by scanning
/// payloads and tracking highlight ownership by hand.
fn involvement_scan(events: &[Event], code: &CodeId) -> Vec<u64> {
    let mut owner: BTreeMap<HighlightId, CodeId> = BTreeMap::new();
    let mut alert_code: BTreeMap<String, CodeId> = BTreeMap::new();
    let mut seqs = Vec::new();
    for e in events {
        let involved = match &e.body {
            EventBody::CodeCreated { code: c } => &c.code_id == code,
            EventBody::CodeRenamed { code_id, .. } | EventBody::CodeRedefined { code_id, .. } => code_id == code,
            EventBody::CodesMerged { sources, target } => sources.contains(code) || target.code_id() == code,
            EventBody::CodeSplit { code_id, children, .. } => code_id == code || children.iter().any(|c| &c.code_id == code),
            EventBody::HighlightApplied { code_id, .. } => code_id == code,
            EventBody::HighlightRemoved { highlight_id } => owner.get(highlight_id) == Some(code),
            EventBody::DriftResolved { alert_id, .. } => alert_code.get(alert_id.as_str()) == Some(code),
            _ => false,
        };
        if involved {
            seqs.push(e.seq);
        }
        match &e.body {
            EventBody::HighlightApplied { highlight_id, code_id, .. } => {
                owner.insert(highlight_id.clone(), code_id.clone());
            }
            EventBody::HighlightRemoved { highlight_id } => {
                owner.remove(highlight_id);
            }
            EventBody::CodesMerged { sources, target } => {
                for c in owner.values_mut() {
                    if sources.contains(c) {
                        *c = target.code_id().clone();
                    }
                }
            }
            EventBody::CodeSplit { reassignments, .. } => {
                for (h, c) in reassignments {
                    owner.insert(h.clone(), c.clone());
                }
            }
            EventBody::DriftAlertRecorded { alert_id, code_id, .. } => {
                alert_code.insert(alert_id.0.clone(), code_id.clone());
            }
            _ => {}
        }
    }
    seqs
}

#[test]
fn untouched_code_has_single_created_entry() {
    let events = log(vec![create("a")]);
    let h = code_history(&events, &"a".into()).unwrap();
    assert_eq!(h.len(), 1);
    assert_eq!(h[0].action, HistoryAction::Created);
    assert_eq!(h[0].seq, 2);
    assert_eq!(code_history(&events, &"zz".into()), Err(ProvenanceError::UnknownCode("zz".into())));
}

#[test]
fn scenario_merge_target_history() {
    let events = scenario::events();
    let [bh, pb, _, se] = scenario::code_ids();
    let h = code_history(&events, &se).unwrap();
    let actions: Vec<_> = h.iter().map(|e| e.action).collect();
    assert_eq!(actions, [HistoryAction::Created, HistoryAction::MergedFrom, HistoryAction::MergedFrom]);
    assert!(h[0].detail.contains("by merging"));
    let counterparts: BTreeSet<_> = h[1..].iter().flat_map(|e| e.related.clone()).collect();
    assert_eq!(counterparts, [bh.clone(), pb].into_iter().collect());
    let bh_actions: Vec<_> = code_history(&events, &bh).unwrap().iter().map(|e| e.action).collect();
    assert_eq!(
        bh_actions,
        [HistoryAction::Created, HistoryAction::Applied, HistoryAction::SplitInto, HistoryAction::DriftResolved, HistoryAction::MergedInto]
    );
}

#[test]
fn histories_match_filter_scan_on_random_logs() {
    for seed in 0..30 {
        let events = random_log(seed, 50);
        let all = histories(&events).unwrap();
        for (code, entries) in &all {
            let got: BTreeSet<u64> = entries.iter().map(|e| e.seq).collect();
            let want: BTreeSet<u64> = involvement_scan(&events, code).into_iter().collect();
            assert_eq!(got, want, "seed {seed} code {code}");
            assert!(entries.windows(2).all(|w| w[0].seq <= w[1].seq));
        }
    }
}

#[test]
fn history_completeness() {
    for seed in 100..120 {
        let events = random_log(seed, 120);
        let all = histories(&events).unwrap();
        let mut covered: BTreeSet<u64> = all.values().flatten().map(|e| e.seq).collect();
        for e in &events {
            let code_event = matches!(
                e.body,
                EventBody::CodeCreated { .. }
                    | EventBody::CodeRenamed { .. }
                    | EventBody::CodeRedefined { .. }
                    | EventBody::CodesMerged { .. }
                    | EventBody::CodeSplit { .. }
                    | EventBody::HighlightApplied { .. }
                    | EventBody::HighlightRemoved { .. }
                    | EventBody::DriftResolved { .. }
            );
            if !code_event {
                assert!(covered.insert(e.seq), "non-code event {} also appears in a code history", e.seq);
            }
        }
        let every: BTreeSet<u64> = events.iter().map(|e| e.seq).collect();
        assert_eq!(covered, every);
    }
}

#[test]
fn empty_log_gives_empty_graph() {
    let g = provenance_graph(&[]).unwrap();
    assert!(g.nodes.is_empty() && g.edges.is_empty());
}

#[test]
fn split_then_merge_graph_shape() {
    // create A; split A -> {A, B}; create C; merge {B, C} -> D
    let events = log(vec![
        create("a"),
        EventBody::CodeSplit { code_id: "a".into(), children: vec![NewCode::new("b", "B", "")], reassignments: BTreeMap::new() },
        create("c"),
        EventBody::CodesMerged { sources: vec!["b".into(), "c".into()], target: MergeTarget::New(NewCode::new("d", "D", "")) },
    ]);
    let g = provenance_graph(&events).unwrap();
    assert_eq!(g.nodes.len(), 4);
    assert_eq!(g.edges_of_kind(EdgeKind::Split).count(), 1);
    let merges: Vec<_> = g.edges_of_kind(EdgeKind::Merge).collect();
    assert_eq!(merges.len(), 2);
    assert!(merges.iter().all(|e| e.target == "d@1"));
    let live: BTreeSet<_> = g.live_codes().into_iter().map(|c| c.0).collect();
    assert_eq!(live, ["a", "d"].map(String::from).into_iter().collect());
}

#[test]
fn renames_chain_versions() {
    let events = log(vec![
        create("a"),
        EventBody::CodeRenamed { code_id: "a".into(), name: "A2".into() },
        EventBody::CodeRenamed { code_id: "a".into(), name: "A3".into() },
    ]);
    let g = provenance_graph(&events).unwrap();
    let versions: Vec<_> = g.nodes.iter().map(|n| (n.version, n.name.as_str())).collect();
    assert_eq!(versions, [(1, "A"), (2, "A2"), (3, "A3")]);
    let renames: Vec<_> = g.edges_of_kind(EdgeKind::Rename).map(|e| (e.source.as_str(), e.target.as_str())).collect();
    assert_eq!(renames, [("a@1", "a@2"), ("a@2", "a@3")]);
}

#[test]
fn merge_into_existing_versions_the_target() {
    let events = log(vec![
        create("a"),
        create("b"),
        EventBody::CodesMerged { sources: vec!["a".into()], target: MergeTarget::Existing { code_id: "b".into() } },
    ]);
    let g = provenance_graph(&events).unwrap();
    let into_b2: Vec<_> = g.edges.iter().filter(|e| e.target == "b@2").map(|e| e.source.as_str()).collect();
    assert_eq!(into_b2, ["b@1", "a@1"]);
}

#[test]
fn node_link_export_shape() {
    let g = provenance_graph(&scenario::events()).unwrap();
    let json = serde_json::to_value(&g).unwrap();
    let node = &json["nodes"][0];
    let mut keys: Vec<_> = node.as_object().unwrap().keys().cloned().collect();
    keys.sort();
    assert_eq!(keys, ["code_id", "definition", "id", "name", "seq", "version"]);
    let mut edge_keys: Vec<_> = json["edges"][0].as_object().unwrap().keys().cloned().collect();
    edge_keys.sort();
    assert_eq!(edge_keys, ["kind", "seq", "source", "target"]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn graph_agrees_with_fold(seed in any::<u64>()) {
        let events = random_log(seed, 150);
        let g = provenance_graph(&events).unwrap();
        let state = ProjectState::replay(&events).unwrap();
        let active: BTreeSet<CodeId> = state.active_codes().map(|c| c.code_id.clone()).collect();
        prop_assert_eq!(g.live_codes(), active);
        for edge in &g.edges {
            let (s, t) = (g.node(&edge.source).unwrap(), g.node(&edge.target).unwrap());
            prop_assert!(s.seq < t.seq, "edge {:?} is not seq-increasing", edge);
        }
        let mut merge_in: BTreeMap<&str, usize> = BTreeMap::new();
        for e in g.edges_of_kind(EdgeKind::Merge) {
            *merge_in.entry(e.target.as_str()).or_default() += 1;
        }
        prop_assert!(merge_in.values().all(|&d| d >= 2));
    }

    #[test]
    fn diff_since_partitions_the_log(seed in any::<u64>(), frac in 0.0f64..=1.0) {
        let events = random_log(seed, 30);
        let since = (frac * 30.0).floor() as u64;
        let tail = diff_since(&events, since).unwrap();
        prop_assert_eq!(tail.len() as u64, 30 - since);
        if let Some(first) = tail.first() {
            prop_assert_eq!(first.seq, since + 1);
        }
        let head: Vec<_> = events.iter().filter(|e| e.seq <= since).cloned().collect();
        let rejoined: Vec<Event> = head.into_iter().chain(tail.iter().cloned()).collect();
        prop_assert_eq!(rejoined, events);
    }

    #[test]
    fn audit_round_trip_is_identity(seed in any::<u64>()) {
        let events = random_log(seed, 80);
        let state = ProjectState::replay(&events).unwrap();
        let bytes = export_audit(&events, &state).unwrap();
        let imported = import_audit(&bytes).unwrap();
        prop_assert_eq!(&imported, &events);
    }
}

#[test]
fn diff_since_edges() {
    let events = random_log(5, 30);
    assert!(diff_since(&events, 30).unwrap().is_empty());
    assert_eq!(diff_since(&events, 0).unwrap().len(), 30);
    assert_eq!(diff_since(&events, 31), Err(ProvenanceError::SinceOutOfRange { since: 31, last: 30 }));
}

#[test]
fn export_of_empty_project() {
    let events = log(vec![]);
    let state = ProjectState::replay(&events).unwrap();
    let bytes = export_audit(&events, &state).unwrap();
    let trail: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(trail["format_version"], "1");
    assert_eq!(trail["events"].as_array().unwrap().len(), 1);
    assert_eq!(import_audit(&bytes).unwrap(), events);
}

#[test]
fn scenario_round_trip_preserves_state_bytes() {
    let events = scenario::events();
    let state = ProjectState::replay(&events).unwrap();
    let imported = import_audit(&export_audit(&events, &state).unwrap()).unwrap();
    let again = ProjectState::replay(&imported).unwrap();
    assert_eq!(to_canonical_bytes(&again).unwrap(), to_canonical_bytes(&state).unwrap());
}

#[test]
fn corrupted_trails_are_rejected() {
    let events = scenario::events();
    let state = ProjectState::replay(&events).unwrap();
    let bytes = export_audit(&events, &state).unwrap();

    let truncated = &bytes[..bytes.len() - 17];
    assert!(matches!(import_audit(truncated), Err(AuditError::ChecksumMismatch)));

    let tampered = String::from_utf8(bytes.clone()).unwrap().replacen("Systemic Exclusion", "Systemic Inclusion", 1);
    assert!(matches!(import_audit(tampered.as_bytes()), Err(AuditError::ChecksumMismatch)));

    let mut trail: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    trail["format_version"] = "9".into();
    assert!(matches!(import_audit(trail.to_string().as_bytes()), Err(AuditError::UnknownVersion(v)) if v == "9"));

    let mut trail: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    trail["summary"]["code_count"] = 99.into();
    assert!(matches!(import_audit(trail.to_string().as_bytes()), Err(AuditError::SummaryMismatch)));

    assert!(matches!(import_audit(b"[1, 2"), Err(AuditError::ChecksumMismatch)));
    assert!(matches!(import_audit(b"{\"x\": nope}"), Err(AuditError::Malformed(_))));
}
