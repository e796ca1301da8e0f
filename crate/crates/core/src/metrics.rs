//! The four difficulty metrics: depth, width, backtrack load, and OPEC.
//!
//! All four are defined over the minimal proofs of a query's relations in
//! each refinement of the story:
//!
//! * **depth** — largest minimal-proof step count over every relation in R,
//!   every consistent refinement, and the contradiction proofs of the
//!   inconsistent refinements;
//! * **width** — number of distinct minimal-derivation classes of the goal
//!   across consistent refinements, plus distinct contradiction classes
//!   across inconsistent ones (a refinement contributes its full set of
//!   minimal proofs as one class, so the count is invariant under entity
//!   renaming and is 1 for unambiguous stories);
//! * **backtrack load (BL)** — steps divided by distinct entities touched
//!   by the proof, kept as an exact rational;
//! * **OPEC** — story-fact leaf premises of the proof that lie on no simple
//!   path between the query entities in the story graph.
//!
//! BL and OPEC maximise over *all* minimal proofs of each refinement rather
//! than one tie-broken representative; this keeps every metric invariant
//! under entity renaming.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::{EntailmentResult, RefinementOutcome};
use crate::error::ProofError;
use crate::pathing::StoryGraph;
use crate::proofs::{minimal_proofs, Proof, ProofGoal, SearchLimits};
use crate::story::{EntityKind, GroundAtom, Story};

/// An exact nonnegative rational, compared by cross-multiplication.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub const ZERO: Ratio = Ratio { num: 0, den: 1 };

    pub fn new(num: u64, den: u64) -> Ratio {
        assert!(den != 0, "zero denominator");
        if num == 0 {
            return Ratio::ZERO;
        }
        let g = gcd(num, den);
        Ratio { num: num / g, den: den / g }
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

impl PartialEq for Ratio {
    fn eq(&self, other: &Self) -> bool {
        (self.num as u128) * (other.den as u128) == (other.num as u128) * (self.den as u128)
    }
}
impl Eq for Ratio {}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> Ordering {
        ((self.num as u128) * (other.den as u128)).cmp(&((other.num as u128) * (self.den as u128)))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// The four metrics of one benchmark instance (one story + query pair).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricBundle {
    pub depth: u64,
    pub width: u64,
    pub bl: Ratio,
    pub opec: u64,
    /// Depth restricted to the positive (consistent-refinement) proofs;
    /// split filters that require the answer to be provable without appeal
    /// to contradictions use this value.
    pub depth_positive: u64,
}

/// Computes the metrics of the query `(x, y)` with label set `r_set` on an
/// already-solved story.
///
/// `r_set` is typically `result.relations_between(x, y)`; it may be empty
/// only if the story has inconsistent refinements (the metrics then reflect
/// the contradiction proofs alone).
pub fn instance_metrics(
    story: &Story,
    result: &EntailmentResult,
    x: &str,
    y: &str,
    r_set: &BTreeSet<String>,
    limits: &SearchLimits,
) -> Result<MetricBundle, ProofError> {
    if r_set.is_empty() && result.ref_minus().next().is_none() {
        return Err(ProofError::NotDerivable(format!("{x} -> {y}")));
    }
    let mut depth = 0u64;
    let mut depth_positive = 0u64;
    let mut bl = Ratio::ZERO;
    let mut opec = 0u64;
    let mut width = 0u64;

    for rel in r_set {
        let goal = ProofGoal::Atom(GroundAtom::new(rel.clone(), &[x, y]));
        // Distinct derivation classes, one element per refinement: the set
        // of canonical keys of all its minimal proofs.
        let mut classes: BTreeSet<BTreeSet<String>> = BTreeSet::new();
        for outcome in result.ref_plus() {
            let proofs = minimal_proofs(&outcome.closure, &goal, limits)?;
            let len = proofs[0].len() as u64;
            depth = depth.max(len);
            depth_positive = depth_positive.max(len);
            let graph = refinement_graph(outcome, story);
            for proof in &proofs {
                if let Some(load) = proof_bl(proof, story) {
                    bl = bl.max(load);
                }
                opec = opec.max(proof_opec(proof, &graph, story, x, y));
            }
            classes.insert(proofs.iter().map(Proof::canonical_key).collect());
        }
        width = width.max(classes.len() as u64);
    }
    let mut negative_classes: BTreeSet<BTreeSet<String>> = BTreeSet::new();
    for outcome in result.ref_minus() {
        let proofs = minimal_proofs(&outcome.closure, &ProofGoal::Contradiction, limits)?;
        depth = depth.max(proofs[0].len() as u64);
        negative_classes.insert(proofs.iter().map(Proof::canonical_key).collect());
    }
    width += negative_classes.len() as u64;
    Ok(MetricBundle { depth, width: width.max(1), bl, opec, depth_positive })
}

/// Backtrack load of a single proof: steps over distinct non-reserved
/// constants; `None` for empty proofs.
pub fn proof_bl(proof: &Proof, story: &Story) -> Option<Ratio> {
    if proof.is_empty() {
        return None;
    }
    let entities = proof
        .constants()
        .into_iter()
        .filter(|c| story.kind_of(c) != EntityKind::Reserved)
        .count() as u64;
    assert!(entities > 0, "nonempty proof touches no entity");
    Some(Ratio::new(proof.len() as u64, entities))
}

/// OPEC of a single proof against a story graph: leaf premises that are
/// story-fact edges on no simple path between `x` and `y`.
pub fn proof_opec(proof: &Proof, graph: &StoryGraph, story: &Story, x: &str, y: &str) -> u64 {
    let on_path = graph.on_path_edges(x, y);
    let story_facts = story_fact_set(story);
    proof
        .leaf_premises()
        .iter()
        .filter(|leaf| story_facts.contains(*leaf))
        .filter(|leaf| {
            !graph
                .edges
                .iter()
                .enumerate()
                .any(|(i, e)| e.atom == **leaf && on_path.contains(&i))
        })
        .count() as u64
}

/// The graph of one refinement: plain story facts plus its selected
/// ambiguous alternatives.
pub fn refinement_graph(outcome: &RefinementOutcome, story: &Story) -> StoryGraph {
    let facts = outcome.refinement.facts(story);
    StoryGraph::new(facts.iter(), story)
}

/// All atoms that count as explicit story facts (plain facts plus every
/// ambiguous alternative).
fn story_fact_set(story: &Story) -> BTreeSet<GroundAtom> {
    let mut set = story.facts.clone();
    for card in &story.ambiguous {
        for choice in &card.choices {
            if let Some(ga) = GroundAtom::from_atom(choice) {
                set.insert(ga);
            }
        }
    }
    set
}
