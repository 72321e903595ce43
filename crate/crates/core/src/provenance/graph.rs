use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ProvenanceError;
use crate::event::{Event, EventBody, MergeTarget};
use crate::ids::CodeId;
use crate::model::ProjectState;

/// One version of a code. The version increments on rename and redefine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: String,
    pub code_id: CodeId,
    pub version: u32,
    pub name: String,
    pub definition: String,
    pub seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Rename,
    Redefine,
    Merge,
    Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub source: String,
    pub target: String,
    pub kind: EdgeKind,
    pub seq: u64,
}

/// Node-link provenance graph; serializes directly to the graph export format.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

impl ProvenanceGraph {
    pub fn node(&self, id: &str) -> Option<&GraphNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn edges_of_kind(&self, kind: EdgeKind) -> impl Iterator<Item = &GraphEdge> {
        self.edges.iter().filter(move |e| e.kind == kind)
    }

    /// The latest version node of each code.
    pub fn leaves(&self) -> BTreeMap<&CodeId, &GraphNode> {
        let mut leaves: BTreeMap<&CodeId, &GraphNode> = BTreeMap::new();
        for node in &self.nodes {
            let slot = leaves.entry(&node.code_id).or_insert(node);
            if node.version > slot.version {
                *slot = node;
            }
        }
        leaves
    }

    /// Codes whose leaf version has not been merged away.
    pub fn live_codes(&self) -> BTreeSet<CodeId> {
        let merged_out: BTreeSet<&str> = self.edges_of_kind(EdgeKind::Merge).map(|e| e.source.as_str()).collect();
        self.leaves()
            .into_iter()
            .filter(|(_, node)| !merged_out.contains(node.id.as_str()))
            .map(|(code, _)| code.clone())
            .collect()
    }
}

#[derive(Default)]
struct Builder {
    graph: ProvenanceGraph,
    current: BTreeMap<CodeId, usize>,
}

impl Builder {
    fn add_node(&mut self, code_id: &CodeId, version: u32, name: String, definition: String, seq: u64) -> String {
        let id = format!("{code_id}@{version}");
        self.graph.nodes.push(GraphNode { id: id.clone(), code_id: code_id.clone(), version, name, definition, seq });
        self.current.insert(code_id.clone(), self.graph.nodes.len() - 1);
        id
    }

    fn current(&self, code_id: &CodeId) -> &GraphNode {
        &self.graph.nodes[self.current[code_id]]
    }

    /// Adds the next version of `code_id` and returns (previous id, new id).
    fn bump(&mut self, code_id: &CodeId, name: Option<&str>, definition: Option<&str>, seq: u64) -> (String, String) {
        let prev = self.current(code_id).clone();
        let new_id = self.add_node(
            code_id,
            prev.version + 1,
            name.map_or(prev.name.clone(), str::to_owned),
            definition.map_or(prev.definition.clone(), str::to_owned),
            seq,
        );
        (prev.id, new_id)
    }

    fn edge(&mut self, source: String, target: String, kind: EdgeKind, seq: u64) {
        self.graph.edges.push(GraphEdge { source, target, kind, seq });
    }
}

/// Builds the project-level provenance graph. The log is fully validated by folding it.
pub fn provenance_graph(events: &[Event]) -> Result<ProvenanceGraph, ProvenanceError> {
    let mut state = ProjectState::default();
    let mut b = Builder::default();
    for event in events {
        state.apply(event)?;
        let seq = event.seq;
        match &event.body {
            EventBody::CodeCreated { code } => {
                b.add_node(&code.code_id, 1, code.name.clone(), code.definition.clone(), seq);
            }
            EventBody::CodeRenamed { code_id, name } => {
                let (prev, next) = b.bump(code_id, Some(name), None, seq);
                b.edge(prev, next, EdgeKind::Rename, seq);
            }
            EventBody::CodeRedefined { code_id, definition } => {
                let (prev, next) = b.bump(code_id, None, Some(definition), seq);
                b.edge(prev, next, EdgeKind::Redefine, seq);
            }
            EventBody::CodesMerged { sources, target } => {
                let target_id = match target {
                    MergeTarget::New(code) => {
                        b.add_node(&code.code_id, 1, code.name.clone(), code.definition.clone(), seq)
                    }
                    MergeTarget::Existing { code_id } => {
                        let (prev, next) = b.bump(code_id, None, None, seq);
                        b.edge(prev, next.clone(), EdgeKind::Merge, seq);
                        next
                    }
                };
                for source in sources {
                    let from = b.current(source).id.clone();
                    b.edge(from, target_id.clone(), EdgeKind::Merge, seq);
                }
            }
            EventBody::CodeSplit { code_id, children, .. } => {
                let from = b.current(code_id).id.clone();
                for child in children {
                    let to = b.add_node(&child.code_id, 1, child.name.clone(), child.definition.clone(), seq);
                    b.edge(from.clone(), to, EdgeKind::Split, seq);
                }
            }
            _ => {}
        }
    }
    Ok(b.graph)
}
