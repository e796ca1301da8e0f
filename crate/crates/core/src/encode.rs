//! Graph encoding of stories for export.
//!
//! Entities become anonymized integer nodes; each binary fact over two
//! entities becomes a directed labeled edge; facts whose second argument is
//! a reserved group/property constant become self-loops; each ambiguous
//! fact introduces exactly one ambiguity node, with one edge from the
//! shared first argument into the node and one edge per alternative out of
//! it, labeled with the bound kind.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::story::{EntityKind, GroundAtom, Story};

/// Label on an ambiguity out-edge for `1{...}1` facts.
pub const AMB_EXACTLY_ONE: &str = "amb, exactly 1 is true";
/// Label on an ambiguity out-edge for `1{...}k` facts.
pub const AMB_AT_LEAST_ONE: &str = "amb, at least 1 is true";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Person,
    Place,
    /// Ambiguity node introduced by one ambiguous fact.
    Amb,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedNode {
    pub id: usize,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedEdge {
    pub from: usize,
    pub to: usize,
    /// Human-readable label (`is_male`, `no_sons`, the relation name, or an
    /// ambiguity bound label).
    pub label: String,
    /// Underlying predicate, kept so the encoding stays machine-invertible.
    pub predicate: String,
    /// Reserved constant for self-loop edges.
    pub constant: Option<String>,
}

/// A story (plus query) as an anonymized labeled graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedGraph {
    pub nodes: Vec<EncodedNode>,
    pub edges: Vec<EncodedEdge>,
    pub query: (usize, usize),
    pub labels: BTreeSet<String>,
    /// Entity-node id -> original entity name; ambiguity nodes are absent.
    pub node_names: BTreeMap<usize, String>,
}

fn display_label(predicate: &str, constant: Option<&str>) -> String {
    match constant {
        None => predicate.to_string(),
        Some(c) if predicate == "has_property" => c.to_string(),
        Some(c) => format!("is_{c}"),
    }
}

/// Encodes `story` with the query pair `(source, target)` and label set
/// `labels`.  Panics if the query entities are not in the story.
pub fn encode_graph(
    story: &Story,
    source: &str,
    target: &str,
    labels: &BTreeSet<String>,
) -> EncodedGraph {
    let mut ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut nodes = Vec::new();
    let mut node_names = BTreeMap::new();
    for (name, kind) in story.proper_entities() {
        let id = nodes.len();
        let kind = match kind {
            EntityKind::Person => NodeKind::Person,
            EntityKind::Place => NodeKind::Place,
            EntityKind::Reserved => unreachable!("proper entities are never reserved"),
        };
        nodes.push(EncodedNode { id, kind });
        node_names.insert(id, name.to_string());
        ids.insert(name.to_string(), id);
    }
    let mut edges = Vec::new();
    let push_fact = |fact: &GroundAtom, edges: &mut Vec<EncodedEdge>| {
        let proper: Vec<&str> = fact
            .args
            .iter()
            .filter(|c| story.kind_of(c) != EntityKind::Reserved)
            .map(String::as_str)
            .collect();
        let reserved: Option<&String> =
            fact.args.iter().find(|c| story.kind_of(c) == EntityKind::Reserved);
        match proper.as_slice() {
            [a, b, ..] => edges.push(EncodedEdge {
                from: ids[*a],
                to: ids[*b],
                label: fact.predicate.clone(),
                predicate: fact.predicate.clone(),
                constant: None,
            }),
            [a] => edges.push(EncodedEdge {
                from: ids[*a],
                to: ids[*a],
                label: display_label(&fact.predicate, reserved.map(String::as_str)),
                predicate: fact.predicate.clone(),
                constant: reserved.cloned(),
            }),
            [] => {}
        }
    };
    for fact in &story.facts {
        push_fact(fact, &mut edges);
    }
    for card in &story.ambiguous {
        let amb_id = nodes.len();
        nodes.push(EncodedNode { id: amb_id, kind: NodeKind::Amb });
        let bound_label =
            if card.upper == 1 { AMB_EXACTLY_ONE } else { AMB_AT_LEAST_ONE };
        let first = card.choices[0].args[0].name();
        let predicate = card.choices[0].predicate.clone();
        edges.push(EncodedEdge {
            from: ids[first],
            to: amb_id,
            label: predicate.clone(),
            predicate: predicate.clone(),
            constant: None,
        });
        for choice in &card.choices {
            let b = choice.args[1].name();
            edges.push(EncodedEdge {
                from: amb_id,
                to: ids[b],
                label: bound_label.to_string(),
                predicate: predicate.clone(),
                constant: None,
            });
        }
    }
    EncodedGraph {
        nodes,
        edges,
        query: (ids[source], ids[target]),
        labels: labels.clone(),
        node_names,
    }
}
