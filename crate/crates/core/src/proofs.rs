//! Minimal-proof extraction from refinement closures.
//!
//! A proof of a goal atom (or of a contradiction, ⊥) is a set of ground rule
//! applications, each counting as one inference step; story facts cost
//! nothing.  The search returns proofs whose step count is the *global*
//! minimum, by iterative deepening over a backward enumeration of acyclic
//! justification assignments, restricted to the backward cone of the goal:
//! for each step bound `k` starting at the goal's derivation height (an
//! admissible lower bound), every assignment of exactly `k` justifying
//! firings is enumerated; the first bound that yields proofs is the
//! minimum, and the enumeration at that bound yields every distinct
//! minimal proof (up to a configurable cap) for width/BL/OPEC accounting.
//!
//! The search carries an explicit visit budget; if it is exhausted before
//! any proof is found the search fails with a budget error, and callers
//! treat the instance as too expensive to measure.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::engine::Closure;
use crate::error::ProofError;
use crate::story::GroundAtom;

/// What a proof establishes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProofGoal {
    Atom(GroundAtom),
    /// A constraint violation.
    Contradiction,
}

/// One ground rule application inside a proof.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProofStep {
    /// Index of the applied rule (or violated constraint) in the world
    /// program's rule list.
    pub rule_index: usize,
    /// The derived atom; `None` for the final step of a ⊥ proof.
    pub derived: Option<GroundAtom>,
    /// Premises in body-literal order.
    pub premises: Vec<GroundAtom>,
}

/// A minimal derivation of one goal, steps in topological order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proof {
    pub goal: ProofGoal,
    pub steps: Vec<ProofStep>,
}

impl Proof {
    /// Number of inference steps (story facts are free).
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Order-independent identity of the step multiset, used to deduplicate
    /// identical derivations across refinements.
    pub fn canonical_key(&self) -> String {
        let mut parts: Vec<String> = self
            .steps
            .iter()
            .map(|s| {
                let derived = s.derived.as_ref().map(|d| d.to_string()).unwrap_or_else(|| "⊥".into());
                let premises: Vec<String> = s.premises.iter().map(|p| p.to_string()).collect();
                format!("{}|{}|{}", s.rule_index, derived, premises.join(","))
            })
            .collect();
        parts.sort();
        parts.join(";")
    }

    /// Premises that no step of this proof derives — the story facts (and
    /// other inputs) the proof stands on.
    pub fn leaf_premises(&self) -> BTreeSet<GroundAtom> {
        let derived: BTreeSet<&GroundAtom> =
            self.steps.iter().filter_map(|s| s.derived.as_ref()).collect();
        self.steps
            .iter()
            .flat_map(|s| s.premises.iter())
            .filter(|p| !derived.contains(p))
            .cloned()
            .collect()
    }

    /// Every constant occurring in any premise or derived atom.
    pub fn constants(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for step in &self.steps {
            for atom in step.premises.iter().chain(step.derived.iter()) {
                out.extend(atom.args.iter().cloned());
            }
        }
        out
    }

    /// Renders the proof as a numbered textual trace.
    pub fn trace(&self) -> String {
        let mut out = String::new();
        for fact in &self.leaf_premises() {
            out.push_str(&format!("Fact: {fact}\n"));
        }
        for (i, step) in self.steps.iter().enumerate() {
            let head = step.derived.as_ref().map(|d| d.to_string()).unwrap_or_else(|| "⊥".into());
            let premises: Vec<String> = step.premises.iter().map(|p| p.to_string()).collect();
            out.push_str(&format!("{}. {} :- {}.\n", i + 1, head, premises.join(", ")));
        }
        out
    }
}

/// Budgets for proof search.
#[derive(Debug, Clone, Copy)]
pub struct SearchLimits {
    /// Maximum number of distinct minimal proofs to enumerate.
    pub max_proofs: usize,
    /// Maximum backward-enumeration recursion visits, cumulative over all
    /// deepening rounds; on exhaustion the proofs found so far are
    /// returned, or a budget error if there are none.
    pub max_enum_visits: usize,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits { max_proofs: 256, max_enum_visits: 2_000_000 }
    }
}

/// All minimal proofs of `goal` in the given refinement closure.
///
/// If the goal atom is an input fact of the refinement, the single empty
/// proof is returned (depth 0).
pub fn minimal_proofs(
    closure: &Closure,
    goal: &ProofGoal,
    limits: &SearchLimits,
) -> Result<Vec<Proof>, ProofError> {
    match goal {
        ProofGoal::Atom(atom) => {
            let id = closure
                .id_of(atom)
                .ok_or_else(|| ProofError::NotDerivable(atom.to_string()))?;
            if closure.is_input[id as usize] {
                return Ok(vec![Proof { goal: goal.clone(), steps: Vec::new() }]);
            }
            Search::new(closure, Some(id)).run(goal, limits)
        }
        ProofGoal::Contradiction => {
            if closure.consistent() {
                return Err(ProofError::NotDerivable("⊥".to_string()));
            }
            Search::new(closure, None).run(goal, limits)
        }
    }
}

/// A firing restricted to the goal's backward cone, in local coordinates.
#[derive(Debug, Clone)]
struct ConeFiring {
    rule_index: usize,
    /// Local index of the derived atom (`usize::MAX`-free: ⊥ gets its own
    /// local slot like any atom).
    head: usize,
    /// Premises as closure atom ids (may be inputs).
    premises: Vec<u32>,
    /// Local indices of the derived (non-input) premises.
    derived_premises: Vec<usize>,
}

struct Search<'a> {
    closure: &'a Closure,
    /// Closure id per local cone atom; `u32::MAX` marks the ⊥ pseudo-atom.
    cone: Vec<u32>,
    firings: Vec<ConeFiring>,
    by_head: Vec<Vec<usize>>,
    goal_local: usize,
}

const BOT: u32 = u32::MAX;

impl<'a> Search<'a> {
    /// Builds the backward-relevant cone of the goal (`None` for ⊥).
    fn new(closure: &'a Closure, goal: Option<u32>) -> Self {
        let mut cone: Vec<u32> = Vec::new();
        let mut local: HashMap<u32, usize> = HashMap::new();
        let mut raw_firings: Vec<(usize, u32, Vec<u32>)> = Vec::new();
        let mut stack: Vec<u32> = Vec::new();
        let push_atom = |id: u32, cone: &mut Vec<u32>, local: &mut HashMap<u32, usize>, stack: &mut Vec<u32>| -> usize {
            if let Some(&l) = local.get(&id) {
                return l;
            }
            let l = cone.len();
            cone.push(id);
            local.insert(id, l);
            stack.push(id);
            l
        };
        let goal_id = goal.unwrap_or(BOT);
        let goal_local = push_atom(goal_id, &mut cone, &mut local, &mut stack);
        while let Some(id) = stack.pop() {
            if id == BOT {
                for v in &closure.violations {
                    raw_firings.push((v.constraint_index, BOT, v.premises.clone()));
                    for &p in &v.premises {
                        if !closure.is_input[p as usize] {
                            push_atom(p, &mut cone, &mut local, &mut stack);
                        }
                    }
                }
            } else {
                for &fi in &closure.firings_by_head[id as usize] {
                    let f = &closure.firings[fi as usize];
                    // A firing whose head is among its own derived premises
                    // can never appear in an acyclic proof.
                    if f.premises.contains(&f.head) {
                        continue;
                    }
                    raw_firings.push((f.rule_index, id, f.premises.clone()));
                    for &p in &f.premises {
                        if !closure.is_input[p as usize] {
                            push_atom(p, &mut cone, &mut local, &mut stack);
                        }
                    }
                }
            }
        }
        let mut firings: Vec<ConeFiring> = raw_firings
            .into_iter()
            .map(|(rule_index, head, premises)| {
                let derived_premises = premises
                    .iter()
                    .filter(|&&p| !closure.is_input[p as usize])
                    .map(|p| local[p])
                    .collect();
                ConeFiring { rule_index, head: local[&head], premises, derived_premises }
            })
            .collect();
        // Deterministic order regardless of discovery order.
        firings.sort_by(|a, b| {
            (a.rule_index, a.head, &a.premises).cmp(&(b.rule_index, b.head, &b.premises))
        });
        let mut by_head: Vec<Vec<usize>> = vec![Vec::new(); cone.len()];
        for (i, f) in firings.iter().enumerate() {
            by_head[f.head].push(i);
        }
        Search { closure, cone, firings, by_head, goal_local }
    }

    /// Minimum derivation height of every cone atom: any proof that derives
    /// atom `a` uses at least `height[a]` steps, so heights are admissible
    /// pruning bounds for the deepening search.
    fn heights(&self) -> Vec<u32> {
        let n = self.cone.len();
        let inf = u32::MAX;
        let mut h: Vec<u32> = vec![inf; n];
        loop {
            let mut changed = false;
            for f in &self.firings {
                let mut worst = 0u32;
                let mut feasible = true;
                for &p in &f.derived_premises {
                    if h[p] == inf {
                        feasible = false;
                        break;
                    }
                    worst = worst.max(h[p]);
                }
                if feasible {
                    let cand = worst.saturating_add(1);
                    if cand < h[f.head] {
                        h[f.head] = cand;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        h
    }

    fn run(&self, goal: &ProofGoal, limits: &SearchLimits) -> Result<Vec<Proof>, ProofError> {
        let heights = self.heights();
        if heights[self.goal_local] == u32::MAX {
            return Err(ProofError::NotDerivable(format!("{goal:?}")));
        }
        // Iterative deepening: every proof derives each of its atoms once,
        // so the step count never exceeds the cone size.
        let mut visits = 0usize;
        for k in heights[self.goal_local] as usize..=self.cone.len() {
            let mut chosen: Vec<Option<usize>> = vec![None; self.cone.len()];
            let mut open_atoms: BTreeSet<usize> = BTreeSet::new();
            open_atoms.insert(self.goal_local);
            let mut proofs: Vec<Proof> = Vec::new();
            self.enumerate(
                goal,
                k,
                &heights,
                &mut chosen,
                &mut open_atoms,
                0,
                &mut proofs,
                &mut visits,
                limits,
            );
            if !proofs.is_empty() {
                proofs.sort_by_key(|p| p.canonical_key());
                proofs.dedup_by_key(|p| p.canonical_key());
                return Ok(proofs);
            }
            if visits >= limits.max_enum_visits {
                return Err(ProofError::Budget(limits.max_enum_visits));
            }
        }
        Err(ProofError::NotDerivable(format!("{goal:?}")))
    }

    #[allow(clippy::too_many_arguments)]
    fn enumerate(
        &self,
        goal: &ProofGoal,
        k: usize,
        heights: &[u32],
        chosen: &mut Vec<Option<usize>>,
        open: &mut BTreeSet<usize>,
        count: usize,
        proofs: &mut Vec<Proof>,
        visits: &mut usize,
        limits: &SearchLimits,
    ) {
        if proofs.len() >= limits.max_proofs || *visits >= limits.max_enum_visits {
            return;
        }
        *visits += 1;
        if open.is_empty() {
            if count == k {
                if let Some(proof) = self.assemble(goal, chosen) {
                    proofs.push(proof);
                }
            }
            return;
        }
        // Each open atom still needs its own (distinct) justifying step.
        if count + open.len() > k {
            return;
        }
        let atom = *open.iter().next().expect("nonempty");
        open.remove(&atom);
        for &fi in &self.by_head[atom] {
            let f = &self.firings[fi];
            chosen[atom] = Some(fi);
            let mut added: Vec<usize> = Vec::new();
            // A premise whose own derivation height exceeds the bound makes
            // the whole assignment infeasible at this depth.
            let mut feasible = true;
            for &p in &f.derived_premises {
                if heights[p] as usize > k {
                    feasible = false;
                    break;
                }
                if chosen[p].is_none() && !open.contains(&p) {
                    open.insert(p);
                    added.push(p);
                }
            }
            if feasible {
                self.enumerate(goal, k, heights, chosen, open, count + 1, proofs, visits, limits);
            }
            for p in added {
                open.remove(&p);
            }
            chosen[atom] = None;
        }
        open.insert(atom);
    }

    /// Turns a complete justification assignment into a topologically
    /// ordered proof, rejecting cyclic assignments.
    fn assemble(&self, goal: &ProofGoal, chosen: &[Option<usize>]) -> Option<Proof> {
        let picked: Vec<usize> = (0..chosen.len()).filter(|&a| chosen[a].is_some()).collect();
        let mut done: HashSet<usize> = HashSet::new();
        let mut order: Vec<usize> = Vec::new();
        loop {
            let mut progressed = false;
            for &a in &picked {
                if done.contains(&a) {
                    continue;
                }
                let f = &self.firings[chosen[a].expect("picked")];
                if f.derived_premises.iter().all(|p| done.contains(p)) {
                    done.insert(a);
                    order.push(a);
                    progressed = true;
                }
            }
            if done.len() == picked.len() {
                break;
            }
            if !progressed {
                return None; // cyclic justification
            }
        }
        let steps = order
            .iter()
            .map(|&a| {
                let f = &self.firings[chosen[a].expect("picked")];
                self.step_of(f)
            })
            .collect();
        Some(Proof { goal: goal.clone(), steps })
    }

    fn step_of(&self, f: &ConeFiring) -> ProofStep {
        let derived = (self.cone[f.head] != BOT)
            .then(|| self.closure.atoms[self.cone[f.head] as usize].clone());
        let premises = f
            .premises
            .iter()
            .map(|&p| self.closure.atoms[p as usize].clone())
            .collect();
        ProofStep { rule_index: f.rule_index, derived, premises }
    }
}
