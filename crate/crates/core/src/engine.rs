//! Refinement enumeration, forward chaining, and entailment.
//!
//! Answer sets of the restricted fragment are computed without ever
//! materializing a reduct: every admissible resolution of the story's
//! ambiguous facts (a *refinement*) is enumerated, the deductive closure of
//! its facts under the world's definite rules is computed by semi-naive
//! evaluation, and constraints are checked against the finished closure.
//! Consistent refinements yield answer sets (ref⁺); the others form ref⁻.
//!
//! The closure records, for every atom, the first fixpoint round in which it
//! appeared, and the full list of ground rule applications (*firings*) that
//! hold in the closure — both are consumed by proof extraction.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SolveError;
use crate::story::{EntityKind, GroundAtom, Story, PERSON_TAG, PLACE_TAG};
use crate::syntax::{Atom, BodyLiteral, Program, Rule, Term};

/// Default bound on the number of refinements per story.
pub const DEFAULT_REFINEMENT_CAP: u64 = 4096;

/// One admissible resolution of every ambiguous fact of a story.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Refinement {
    /// Position in the deterministic enumeration order.
    pub index: usize,
    /// For each ambiguous fact (in story order), the chosen choice indices.
    pub selection: Vec<Vec<usize>>,
}

impl Refinement {
    /// The atoms this refinement adds on top of the story's plain facts.
    pub fn selected_atoms(&self, story: &Story) -> Vec<GroundAtom> {
        let mut out = Vec::new();
        for (card, chosen) in story.ambiguous.iter().zip(&self.selection) {
            for &i in chosen {
                out.push(GroundAtom::from_atom(&card.choices[i]).expect("choices are ground"));
            }
        }
        out
    }

    /// All facts of the refined (unambiguous) story.
    pub fn facts(&self, story: &Story) -> BTreeSet<GroundAtom> {
        let mut facts = story.facts.clone();
        facts.extend(self.selected_atoms(story));
        facts
    }
}

/// Enumerates all refinements in lexicographic (fact index, choice index)
/// order, failing loudly if the count exceeds `cap`.
pub fn enumerate_refinements(story: &Story, cap: u64) -> Result<Vec<Refinement>, SolveError> {
    let per_fact: Vec<Vec<Vec<usize>>> =
        story.ambiguous.iter().map(|c| c.admissible_selections()).collect();
    let mut count: u64 = 1;
    for s in &per_fact {
        count = count.saturating_mul(s.len() as u64);
    }
    if count > cap {
        return Err(SolveError::RefinementOverflow { count, cap });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut cursor = vec![0usize; per_fact.len()];
    loop {
        out.push(Refinement {
            index: out.len(),
            selection: cursor.iter().zip(&per_fact).map(|(&i, s)| s[i].clone()).collect(),
        });
        // Odometer increment, last fact fastest.
        let mut pos = per_fact.len();
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            cursor[pos] += 1;
            if cursor[pos] < per_fact[pos].len() {
                break;
            }
            cursor[pos] = 0;
        }
    }
}

/// One ground application of a definite rule, valid in a closure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Firing {
    /// Index of the rule in the world program's rule list.
    pub rule_index: usize,
    /// Derived atom id.
    pub head: u32,
    /// Matched body atom ids, in body-literal order.
    pub premises: Vec<u32>,
}

/// One violated ground constraint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint_index: usize,
    pub premises: Vec<u32>,
}

/// The deductive closure of one refinement, with provenance.
#[derive(Debug, Clone)]
pub struct Closure {
    /// All atoms; the index into this vector is the atom id.
    pub atoms: Vec<GroundAtom>,
    index: HashMap<GroundAtom, u32>,
    /// First fixpoint round each atom appeared in (0 for inputs).
    pub layers: Vec<u32>,
    /// Whether the atom was an input fact (refinement fact, world fact, or
    /// injected kind tag) rather than a derived one.
    pub is_input: Vec<bool>,
    /// Every ground rule application valid in the closure, each listed once.
    pub firings: Vec<Firing>,
    /// Firing indices grouped by head atom id.
    pub firings_by_head: Vec<Vec<u32>>,
    /// Violated ground constraints (empty iff the refinement is consistent).
    pub violations: Vec<Violation>,
}

impl Closure {
    pub fn id_of(&self, atom: &GroundAtom) -> Option<u32> {
        self.index.get(atom).copied()
    }

    pub fn contains(&self, atom: &GroundAtom) -> bool {
        self.index.contains_key(atom)
    }

    pub fn consistent(&self) -> bool {
        self.violations.is_empty()
    }

    /// Atoms as a set, for intersection-style queries.
    pub fn atom_set(&self) -> BTreeSet<GroundAtom> {
        self.atoms.iter().cloned().collect()
    }
}

/// A refinement together with its closure.
#[derive(Debug, Clone)]
pub struct RefinementOutcome {
    pub refinement: Refinement,
    pub closure: Closure,
}

/// The full result of solving one story.
#[derive(Debug, Clone)]
pub struct EntailmentResult {
    /// One outcome per refinement, in enumeration order.
    pub outcomes: Vec<RefinementOutcome>,
    /// Atoms in every answer set but not among the story's explicit facts.
    pub entailed: BTreeSet<GroundAtom>,
}

impl EntailmentResult {
    /// Consistent refinements (ref⁺).
    pub fn ref_plus(&self) -> impl Iterator<Item = &RefinementOutcome> {
        self.outcomes.iter().filter(|o| o.closure.consistent())
    }

    /// Inconsistent refinements (ref⁻).
    pub fn ref_minus(&self) -> impl Iterator<Item = &RefinementOutcome> {
        self.outcomes.iter().filter(|o| !o.closure.consistent())
    }

    pub fn answer_set_count(&self) -> usize {
        self.ref_plus().count()
    }

    pub fn is_consistent(&self) -> bool {
        self.answer_set_count() > 0
    }

    /// All predicates `p` such that `p(x, y)` holds in every answer set.
    ///
    /// Explicit story relations are included; subtract story facts if only
    /// entailed ones are wanted.
    pub fn relations_between(&self, x: &str, y: &str) -> Result<BTreeSet<String>, SolveError> {
        if !self.is_consistent() {
            return Err(SolveError::Inconsistent);
        }
        let mut rels: Option<BTreeSet<String>> = None;
        for outcome in self.ref_plus() {
            let here: BTreeSet<String> = outcome
                .closure
                .atoms
                .iter()
                .filter(|a| a.args.len() == 2 && a.args[0] == x && a.args[1] == y)
                .map(|a| a.predicate.clone())
                .collect();
            rels = Some(match rels {
                None => here,
                Some(prev) => prev.intersection(&here).cloned().collect(),
            });
        }
        Ok(rels.unwrap_or_default())
    }
}

/// Computes all answer sets and entailed atoms of `story` under `world`.
pub fn solve(world: &Program, story: &Story, cap: u64) -> Result<EntailmentResult, SolveError> {
    let solver = Solver::new(world, story)?;
    let refinements = enumerate_refinements(story, cap)?;
    let outcomes: Vec<RefinementOutcome> = refinements
        .into_par_iter()
        .map(|refinement| {
            let mut facts: Vec<GroundAtom> = story.facts.iter().cloned().collect();
            facts.extend(refinement.selected_atoms(story));
            let closure = solver.close_facts(&facts);
            RefinementOutcome { refinement, closure }
        })
        .collect();
    // Entailed atoms: in every answer set, minus everything that was an input
    // in every refinement (story facts, world facts, kind tags).
    let mut entailed: Option<BTreeSet<GroundAtom>> = None;
    for outcome in outcomes.iter().filter(|o| o.closure.consistent()) {
        let atoms = outcome.closure.atom_set();
        entailed = Some(match entailed {
            None => atoms,
            Some(prev) => prev.intersection(&atoms).cloned().collect(),
        });
    }
    let mut entailed = entailed.unwrap_or_default();
    for f in &story.facts {
        entailed.remove(f);
    }
    for f in solver.common_inputs() {
        entailed.remove(f);
    }
    Ok(EntailmentResult { outcomes, entailed })
}

/// Convenience wrapper: [`solve`] followed by [`EntailmentResult::relations_between`].
pub fn entailed_relations(
    world: &Program,
    story: &Story,
    x: &str,
    y: &str,
) -> Result<BTreeSet<String>, SolveError> {
    if !story.entities.contains_key(x) {
        return Err(SolveError::UnknownEntity(x.to_string()));
    }
    if !story.entities.contains_key(y) {
        return Err(SolveError::UnknownEntity(y.to_string()));
    }
    solve(world, story, DEFAULT_REFINEMENT_CAP)?.relations_between(x, y)
}

/// Enumerates every ground instantiation of the world's rules over the
/// combined constant universe of `world` and `story`, dropping
/// instantiations whose inequalities bind equal constants.
///
/// This materializes the full grounding and is intended for small universes
/// (tests, oracles, debugging); the solver itself never calls it.
pub fn ground(world: &Program, story: &Story) -> Vec<Rule> {
    let mut universe: BTreeSet<String> = story.entities.keys().cloned().collect();
    universe.extend(world.constants());
    let universe: Vec<String> = universe.into_iter().collect();
    let mut out = Vec::new();
    for rule in &world.rules {
        let (head, body) = match rule {
            Rule::Definite { head, body } => (Some(head), body),
            Rule::Constraint { body } => (None, body),
            _ => continue,
        };
        let mut vars: Vec<&str> = Vec::new();
        let mut all_terms: Vec<&Term> = Vec::new();
        for lit in body {
            match lit {
                BodyLiteral::Atom(a) => all_terms.extend(a.args.iter()),
                BodyLiteral::NotEqual(x, y) => {
                    all_terms.push(x);
                    all_terms.push(y);
                }
            }
        }
        if let Some(h) = head {
            all_terms.extend(h.args.iter());
        }
        for t in all_terms {
            if let Term::Variable(v) = t {
                if !vars.contains(&v.as_str()) {
                    vars.push(v.as_str());
                }
            }
        }
        let nv = vars.len();
        if nv > 0 && universe.is_empty() {
            continue;
        }
        let mut assign = vec![0usize; nv];
        'outer: loop {
            let subst = |t: &Term| -> Term {
                match t {
                    Term::Variable(v) => {
                        let i = vars.iter().position(|x| *x == v.as_str()).unwrap();
                        Term::Constant(universe[assign[i]].clone())
                    }
                    c => c.clone(),
                }
            };
            let mut ok = true;
            let new_body: Vec<BodyLiteral> = body
                .iter()
                .filter_map(|lit| match lit {
                    BodyLiteral::Atom(a) => Some(BodyLiteral::Atom(Atom::new(
                        a.predicate.clone(),
                        a.args.iter().map(&subst).collect(),
                    ))),
                    BodyLiteral::NotEqual(x, y) => {
                        let (gx, gy) = (subst(x), subst(y));
                        if gx == gy {
                            ok = false;
                        }
                        None // resolved inequalities are dropped
                    }
                })
                .collect();
            if ok {
                out.push(match head {
                    Some(h) => Rule::Definite {
                        head: Atom::new(h.predicate.clone(), h.args.iter().map(&subst).collect()),
                        body: new_body,
                    },
                    None => Rule::Constraint { body: new_body },
                });
            }
            // Odometer over variable assignments.
            let mut pos = nv;
            loop {
                if pos == 0 {
                    break 'outer;
                }
                pos -= 1;
                assign[pos] += 1;
                if assign[pos] < universe.len() {
                    break;
                }
                assign[pos] = 0;
            }
        }
    }
    out
}

/// Naive forward chaining over an explicit set of ground definite rules.
///
/// Returns the least fixpoint and the first-derivation layer of every atom
/// (0 for inputs).  Like [`ground`], this is a reference implementation for
/// small inputs; the solver uses compiled semi-naive evaluation instead.
pub fn forward_chain(
    facts: &BTreeSet<GroundAtom>,
    ground_rules: &[Rule],
) -> (BTreeSet<GroundAtom>, BTreeMap<GroundAtom, u32>) {
    let mut closure = facts.clone();
    let mut layers: BTreeMap<GroundAtom, u32> =
        facts.iter().map(|f| (f.clone(), 0)).collect();
    let mut round = 1;
    loop {
        let mut new_atoms = Vec::new();
        for rule in ground_rules {
            if let Rule::Definite { head, body } = rule {
                let sat = body.iter().all(|lit| match lit {
                    BodyLiteral::Atom(a) => {
                        GroundAtom::from_atom(a).is_some_and(|g| closure.contains(&g))
                    }
                    BodyLiteral::NotEqual(x, y) => x != y,
                });
                if sat {
                    let h = GroundAtom::from_atom(head).expect("ground rule");
                    if !closure.contains(&h) {
                        new_atoms.push(h);
                    }
                }
            }
        }
        if new_atoms.is_empty() {
            return (closure, layers);
        }
        for a in new_atoms {
            if closure.insert(a.clone()) {
                layers.insert(a, round);
            }
        }
        round += 1;
    }
}

// ---------------------------------------------------------------------------
// Compiled solver
// ---------------------------------------------------------------------------

/// Pattern term of a compiled rule: a variable slot or an interned constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pat {
    Var(usize),
    Const(u32),
}

#[derive(Debug, Clone)]
struct CAtom {
    pred: u32,
    args: Vec<Pat>,
}

#[derive(Debug, Clone)]
struct CRule {
    rule_index: usize,
    head: CAtom,
    body: Vec<CAtom>,
    ineqs: Vec<(Pat, Pat)>,
    /// Variables not bound by any positive body atom; they range over the
    /// whole constant universe (e.g. a head variable constrained only by an
    /// inequality).
    free_vars: Vec<usize>,
    nvars: usize,
}

#[derive(Debug, Clone)]
struct CConstraint {
    constraint_index: usize,
    body: Vec<CAtom>,
    ineqs: Vec<(Pat, Pat)>,
    nvars: usize,
}

/// A world program compiled against one story's constant universe.
///
/// The solver is immutable once built; closures for distinct refinements can
/// be computed from it concurrently.
pub struct Solver {
    rules: Vec<CRule>,
    constraints: Vec<CConstraint>,
    preds: Vec<String>,
    pred_ids: HashMap<String, u32>,
    consts: Vec<String>,
    const_ids: HashMap<String, u32>,
    /// Facts shared by every refinement: world facts plus entity kind tags.
    base_inputs: Vec<GroundAtom>,
}

impl Solver {
    pub fn new(world: &Program, story: &Story) -> Result<Self, SolveError> {
        // Constant universe: story entities plus world constants, sorted so
        // ids are deterministic.
        let mut universe: BTreeSet<String> = story.entities.keys().cloned().collect();
        universe.extend(world.constants());
        let consts: Vec<String> = universe.into_iter().collect();
        let const_ids: HashMap<String, u32> =
            consts.iter().enumerate().map(|(i, c)| (c.clone(), i as u32)).collect();

        let mut preds: Vec<String> = Vec::new();
        let mut pred_ids: HashMap<String, u32> = HashMap::new();
        let mut intern_pred = |name: &str| -> u32 {
            if let Some(&id) = pred_ids.get(name) {
                return id;
            }
            let id = preds.len() as u32;
            preds.push(name.to_string());
            pred_ids.insert(name.to_string(), id);
            id
        };

        let mut base_inputs: Vec<GroundAtom> = Vec::new();
        for fact in world.facts() {
            let ga = GroundAtom::from_atom(fact)
                .ok_or_else(|| SolveError::NonGroundWorldFact(fact.to_string()))?;
            intern_pred(&ga.predicate);
            base_inputs.push(ga);
        }
        // Kind tags let world rules test entity kinds (e.g. `is_place(Z)`).
        for (name, kind) in story.proper_entities() {
            let tag = match kind {
                EntityKind::Person => PERSON_TAG,
                EntityKind::Place => PLACE_TAG,
                EntityKind::Reserved => unreachable!(),
            };
            intern_pred(tag);
            base_inputs.push(GroundAtom::new(tag, &[name]));
        }

        fn compile_term(
            t: &Term,
            vars: &mut Vec<String>,
            const_ids: &HashMap<String, u32>,
        ) -> Pat {
            match t {
                Term::Variable(v) => {
                    let idx = match vars.iter().position(|x| x == v) {
                        Some(i) => i,
                        None => {
                            vars.push(v.clone());
                            vars.len() - 1
                        }
                    };
                    Pat::Var(idx)
                }
                // A constant outside the universe matches nothing.
                Term::Constant(c) => Pat::Const(const_ids.get(c).copied().unwrap_or(u32::MAX)),
            }
        }

        let mut rules = Vec::new();
        let mut constraints = Vec::new();
        for (rule_index, rule) in world.rules.iter().enumerate() {
            let (head, body) = match rule {
                Rule::Definite { head, body } => (Some(head), body),
                Rule::Constraint { body } => (None, body),
                Rule::Fact(_) | Rule::Cardinality(_) => continue,
            };
            let mut vars: Vec<String> = Vec::new();
            let mut catoms = Vec::new();
            // Body atoms first so their variables get the low slots; any
            // variable first seen in an inequality or the head is free.
            for lit in body {
                if let BodyLiteral::Atom(a) = lit {
                    let args = a
                        .args
                        .iter()
                        .map(|t| compile_term(t, &mut vars, &const_ids))
                        .collect();
                    catoms.push(CAtom { pred: intern_pred(&a.predicate), args });
                }
            }
            let bound = vars.len();
            let mut ineqs = Vec::new();
            for lit in body {
                if let BodyLiteral::NotEqual(x, y) = lit {
                    ineqs.push((
                        compile_term(x, &mut vars, &const_ids),
                        compile_term(y, &mut vars, &const_ids),
                    ));
                }
            }
            match head {
                Some(h) => {
                    let args = h
                        .args
                        .iter()
                        .map(|t| compile_term(t, &mut vars, &const_ids))
                        .collect();
                    let chead = CAtom { pred: intern_pred(&h.predicate), args };
                    let free_vars = (bound..vars.len()).collect();
                    rules.push(CRule {
                        rule_index,
                        head: chead,
                        body: catoms,
                        ineqs,
                        free_vars,
                        nvars: vars.len(),
                    });
                }
                None => {
                    constraints.push(CConstraint {
                        constraint_index: rule_index,
                        body: catoms,
                        ineqs,
                        nvars: vars.len(),
                    });
                }
            }
        }
        for fact in &story.facts {
            intern_pred(&fact.predicate);
        }
        for card in &story.ambiguous {
            for c in &card.choices {
                intern_pred(&c.predicate);
            }
        }
        Ok(Solver { rules, constraints, preds, pred_ids, consts, const_ids, base_inputs })
    }

    /// Inputs present in every refinement besides the story's plain facts.
    pub fn common_inputs(&self) -> &[GroundAtom] {
        &self.base_inputs
    }

    /// Computes the deductive closure of the given refinement facts (plus
    /// the common inputs) and checks constraints against it.
    pub fn close_facts(&self, facts: &[GroundAtom]) -> Closure {
        let mut state = State::new(self);
        for fact in facts {
            state.intern_external(self, fact);
        }
        for fact in &self.base_inputs {
            state.intern_external(self, fact);
        }
        state.run(self);
        state.check_constraints(self);
        state.finish(self)
    }
}

/// A firing discovered during a round, before its head atom is interned.
struct PendingFiring {
    rule_index: usize,
    head: (u32, Vec<u32>),
    premises: Vec<u32>,
}

/// Mutable evaluation state for one refinement.
struct State {
    /// Internal atoms: (pred id, arg const ids); index = atom id.
    atoms: Vec<(u32, Vec<u32>)>,
    index: HashMap<(u32, Vec<u32>), u32>,
    layers: Vec<u32>,
    is_input: Vec<bool>,
    by_pred: Vec<Vec<u32>>,
    by_pred_arg0: HashMap<(u32, u32), Vec<u32>>,
    firings: Vec<Firing>,
    violations: Vec<Violation>,
    universe_len: usize,
    round: u32,
}

impl State {
    fn new(solver: &Solver) -> Self {
        State {
            atoms: Vec::new(),
            index: HashMap::new(),
            layers: Vec::new(),
            is_input: Vec::new(),
            by_pred: vec![Vec::new(); solver.preds.len()],
            by_pred_arg0: HashMap::new(),
            firings: Vec::new(),
            violations: Vec::new(),
            universe_len: solver.consts.len(),
            round: 0,
        }
    }

    fn intern_external(&mut self, solver: &Solver, atom: &GroundAtom) {
        let pred = solver.pred_ids[&atom.predicate];
        let args: Vec<u32> = atom.args.iter().map(|a| solver.const_ids[a]).collect();
        self.intern(pred, args, true);
    }

    fn intern(&mut self, pred: u32, args: Vec<u32>, input: bool) -> u32 {
        if let Some(&id) = self.index.get(&(pred, args.clone())) {
            return id;
        }
        let id = self.atoms.len() as u32;
        self.layers.push(self.round);
        self.is_input.push(input);
        self.by_pred[pred as usize].push(id);
        if let Some(&a0) = args.first() {
            self.by_pred_arg0.entry((pred, a0)).or_default().push(id);
        }
        self.index.insert((pred, args.clone()), id);
        self.atoms.push((pred, args));
        id
    }

    fn unify(&self, id: u32, pat: &CAtom, bind: &mut [Option<u32>], touched: &mut Vec<usize>) -> bool {
        let (_, args) = &self.atoms[id as usize];
        if args.len() != pat.args.len() {
            return false;
        }
        for (val, p) in args.iter().zip(&pat.args) {
            match p {
                Pat::Const(c) => {
                    if val != c {
                        return false;
                    }
                }
                Pat::Var(v) => match bind[*v] {
                    Some(b) => {
                        if b != *val {
                            return false;
                        }
                    }
                    None => {
                        bind[*v] = Some(*val);
                        touched.push(*v);
                    }
                },
            }
        }
        true
    }

    /// Candidate atom ids for a body pattern under current bindings; ids are
    /// in insertion (and hence layer) order.
    fn candidates<'a>(&'a self, pat: &CAtom, bind: &[Option<u32>]) -> &'a [u32] {
        let bound0 = match pat.args.first() {
            Some(Pat::Const(c)) => Some(*c),
            Some(Pat::Var(v)) => bind[*v],
            None => None,
        };
        match bound0 {
            Some(c) => self
                .by_pred_arg0
                .get(&(pat.pred, c))
                .map(|v| v.as_slice())
                .unwrap_or(&[]),
            None => self.by_pred.get(pat.pred as usize).map(|v| v.as_slice()).unwrap_or(&[]),
        }
    }

    /// Semi-naive evaluation to fixpoint, recording every ground rule
    /// application exactly once.
    ///
    /// In round `t`, an instantiation is found with its first delta premise
    /// as the pivot: the pivot matches atoms of layer `t-1`, earlier body
    /// positions match strictly older atoms, later positions match anything
    /// visible.  Every valid instantiation therefore fires in exactly one
    /// round at exactly one pivot.
    fn run(&mut self, solver: &Solver) {
        let mut old_bound = 0u32; // ids below this have layer ≤ round-2
        let mut cur_bound = self.atoms.len() as u32; // ids below this are visible
        self.round = 1;
        loop {
            let mut pending: Vec<PendingFiring> = Vec::new();
            for rule in &solver.rules {
                self.eval_rule(rule, old_bound, cur_bound, &mut pending);
            }
            let before = self.atoms.len() as u32;
            for p in pending {
                let id = self.intern(p.head.0, p.head.1, false);
                self.firings.push(Firing { rule_index: p.rule_index, head: id, premises: p.premises });
            }
            let after = self.atoms.len() as u32;
            if after == before {
                // The delta produced no new atoms; the next round's delta
                // would be empty, so the fixpoint is reached.
                break;
            }
            old_bound = cur_bound;
            cur_bound = after;
            self.round += 1;
        }
    }

    fn eval_rule(&self, rule: &CRule, old_bound: u32, cur_bound: u32, out: &mut Vec<PendingFiring>) {
        let n = rule.body.len();
        let mut bind: Vec<Option<u32>> = vec![None; rule.nvars];
        let mut premises: Vec<u32> = vec![0; n];
        for pivot in 0..n {
            let pat = &rule.body[pivot];
            // The pivot iterates the delta only.
            let cands: Vec<u32> = self
                .candidates(pat, &bind)
                .iter()
                .copied()
                .filter(|&id| id >= old_bound && id < cur_bound)
                .collect();
            for id in cands {
                let mut touched = Vec::new();
                if self.unify(id, pat, &mut bind, &mut touched) {
                    premises[pivot] = id;
                    self.join(rule, pivot, 0, old_bound, cur_bound, &mut bind, &mut premises, out);
                }
                for v in touched {
                    bind[v] = None;
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn join(
        &self,
        rule: &CRule,
        pivot: usize,
        mut pos: usize,
        old_bound: u32,
        cur_bound: u32,
        bind: &mut Vec<Option<u32>>,
        premises: &mut Vec<u32>,
        out: &mut Vec<PendingFiring>,
    ) {
        if pos == pivot {
            pos += 1;
        }
        if pos >= rule.body.len() {
            self.expand_free(rule, 0, bind, premises, out);
            return;
        }
        let limit = if pos < pivot { old_bound } else { cur_bound };
        let pat = &rule.body[pos];
        let cands = self.candidates(pat, bind);
        for &id in cands {
            if id >= limit {
                break; // ids are appended in layer order
            }
            let mut touched = Vec::new();
            if self.unify(id, pat, bind, &mut touched) {
                premises[pos] = id;
                self.join(rule, pivot, pos + 1, old_bound, cur_bound, bind, premises, out);
            }
            for v in touched {
                bind[v] = None;
            }
        }
    }

    /// Assigns universe values to free variables, checks inequalities, and
    /// emits the firing.
    fn expand_free(
        &self,
        rule: &CRule,
        fi: usize,
        bind: &mut Vec<Option<u32>>,
        premises: &[u32],
        out: &mut Vec<PendingFiring>,
    ) {
        if fi == rule.free_vars.len() {
            let val = |p: &Pat| -> u32 {
                match p {
                    Pat::Const(c) => *c,
                    Pat::Var(v) => bind[*v].expect("all variables bound"),
                }
            };
            for (x, y) in &rule.ineqs {
                if val(x) == val(y) {
                    return;
                }
            }
            let head_args: Vec<u32> = rule.head.args.iter().map(val).collect();
            out.push(PendingFiring {
                rule_index: rule.rule_index,
                head: (rule.head.pred, head_args),
                premises: premises.to_vec(),
            });
            return;
        }
        let v = rule.free_vars[fi];
        if bind[v].is_some() {
            self.expand_free(rule, fi + 1, bind, premises, out);
            return;
        }
        for c in 0..self.universe_len as u32 {
            bind[v] = Some(c);
            self.expand_free(rule, fi + 1, bind, premises, out);
        }
        bind[v] = None;
    }

    fn check_constraints(&mut self, solver: &Solver) {
        let total = self.atoms.len() as u32;
        for con in &solver.constraints {
            let mut bind: Vec<Option<u32>> = vec![None; con.nvars];
            let mut premises: Vec<u32> = vec![0; con.body.len()];
            let mut hits: Vec<Vec<u32>> = Vec::new();
            self.join_constraint(con, 0, total, &mut bind, &mut premises, &mut hits);
            for premises in hits {
                self.violations.push(Violation { constraint_index: con.constraint_index, premises });
            }
        }
    }

    fn join_constraint(
        &self,
        con: &CConstraint,
        pos: usize,
        limit: u32,
        bind: &mut Vec<Option<u32>>,
        premises: &mut Vec<u32>,
        out: &mut Vec<Vec<u32>>,
    ) {
        if pos >= con.body.len() {
            // Inequality variables unbound by body atoms range over the
            // universe, but a violation only depends on the body atoms, so
            // one witness suffices: require satisfiability.
            let val = |p: &Pat| -> Option<u32> {
                match p {
                    Pat::Const(c) => Some(*c),
                    Pat::Var(v) => bind[*v],
                }
            };
            for (x, y) in &con.ineqs {
                match (val(x), val(y)) {
                    (Some(a), Some(b)) => {
                        if a == b {
                            return;
                        }
                    }
                    // An unbound side can always pick a differing constant
                    // when the universe has ≥ 2 elements.
                    _ => {
                        if self.universe_len < 2 {
                            return;
                        }
                    }
                }
            }
            out.push(premises.clone());
            return;
        }
        let pat = &con.body[pos];
        let cands = self.candidates(pat, bind);
        for &id in cands {
            if id >= limit {
                break;
            }
            let mut touched = Vec::new();
            if self.unify(id, pat, bind, &mut touched) {
                premises[pos] = id;
                self.join_constraint(con, pos + 1, limit, bind, premises, out);
            }
            for v in touched {
                bind[v] = None;
            }
        }
    }

    fn finish(self, solver: &Solver) -> Closure {
        let atoms: Vec<GroundAtom> = self
            .atoms
            .iter()
            .map(|(p, args)| GroundAtom {
                predicate: solver.preds[*p as usize].clone(),
                args: args.iter().map(|&c| solver.consts[c as usize].clone()).collect(),
            })
            .collect();
        let index: HashMap<GroundAtom, u32> =
            atoms.iter().enumerate().map(|(i, a)| (a.clone(), i as u32)).collect();
        let mut firings_by_head: Vec<Vec<u32>> = vec![Vec::new(); atoms.len()];
        for (i, f) in self.firings.iter().enumerate() {
            firings_by_head[f.head as usize].push(i as u32);
        }
        Closure {
            atoms,
            index,
            layers: self.layers,
            is_input: self.is_input,
            firings: self.firings,
            firings_by_head,
            violations: self.violations,
        }
    }
}
