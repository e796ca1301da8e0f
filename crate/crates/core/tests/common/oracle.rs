//! Brute-force reference implementations used to cross-check the engine,
//! proof search, and path analysis, plus a tiny random case generator.
//!
//! Everything here trades efficiency for obviousness: closures are computed
//! by enumerating every substitution of every rule until nothing changes,
//! minimal proof sizes by breadth-first search over sets of established
//! atoms, and on-path edges by enumerating all simple paths.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use storybench::encode::{EncodedGraph, NodeKind};
use storybench::parser::parse_program;
use storybench::pathing::StoryGraph;
use storybench::story::{EntityKind, GroundAtom, Story, PERSON_TAG, PLACE_TAG};
use storybench::syntax::{Atom, BodyLiteral, CardinalityFact, Program, Term};

/// Input facts of one refinement: the refinement's story facts plus the
/// world facts and the injected kind tags.
pub fn oracle_inputs(world: &Program, story: &Story, selected: &[GroundAtom]) -> BTreeSet<GroundAtom> {
    let mut inputs: BTreeSet<GroundAtom> = story.facts.clone();
    inputs.extend(selected.iter().cloned());
    for f in world.facts() {
        inputs.insert(GroundAtom::from_atom(f).expect("world facts are ground"));
    }
    for (name, kind) in story.proper_entities() {
        let tag = match kind {
            EntityKind::Person => PERSON_TAG,
            EntityKind::Place => PLACE_TAG,
            EntityKind::Reserved => unreachable!(),
        };
        inputs.insert(GroundAtom::new(tag, &[name]));
    }
    inputs
}

fn universe(world: &Program, inputs: &BTreeSet<GroundAtom>) -> Vec<String> {
    let mut set: BTreeSet<String> = world.constants();
    for f in inputs {
        set.extend(f.args.iter().cloned());
    }
    set.into_iter().collect()
}

fn subst_term(t: &Term, env: &BTreeMap<&str, &str>) -> String {
    match t {
        Term::Constant(c) => c.clone(),
        Term::Variable(v) => env[v.as_str()].to_string(),
    }
}

fn subst_atom(a: &Atom, env: &BTreeMap<&str, &str>) -> GroundAtom {
    GroundAtom {
        predicate: a.predicate.clone(),
        args: a.args.iter().map(|t| subst_term(t, env)).collect(),
    }
}

fn body_holds(body: &[BodyLiteral], env: &BTreeMap<&str, &str>, set: &BTreeSet<GroundAtom>) -> bool {
    body.iter().all(|lit| match lit {
        BodyLiteral::Atom(a) => set.contains(&subst_atom(a, env)),
        BodyLiteral::NotEqual(x, y) => subst_term(x, env) != subst_term(y, env),
    })
}

fn rule_variables(head: Option<&Atom>, body: &[BodyLiteral]) -> Vec<String> {
    let mut vars: BTreeSet<String> = BTreeSet::new();
    if let Some(h) = head {
        vars.extend(h.variables().map(str::to_string));
    }
    for lit in body {
        match lit {
            BodyLiteral::Atom(a) => vars.extend(a.variables().map(str::to_string)),
            BodyLiteral::NotEqual(x, y) => {
                for t in [x, y] {
                    if t.is_variable() {
                        vars.insert(t.name().to_string());
                    }
                }
            }
        }
    }
    vars.into_iter().collect()
}

/// Calls `f` for every assignment of `vars` to `universe` constants.
fn for_each_env<'a>(
    vars: &'a [String],
    universe: &'a [String],
    env: &mut BTreeMap<&'a str, &'a str>,
    f: &mut dyn FnMut(&BTreeMap<&str, &str>),
) {
    match vars.split_first() {
        None => f(env),
        Some((v, rest)) => {
            for c in universe {
                env.insert(v.as_str(), c.as_str());
                for_each_env(rest, universe, env, f);
            }
            env.remove(v.as_str());
        }
    }
}

/// Naive deductive closure: keeps instantiating every definite rule over
/// the full universe until a fixpoint is reached.
pub fn naive_closure(world: &Program, inputs: &BTreeSet<GroundAtom>) -> BTreeSet<GroundAtom> {
    let universe = universe(world, inputs);
    let mut set = inputs.clone();
    loop {
        let mut added: Vec<GroundAtom> = Vec::new();
        for (_, head, body) in world.definites() {
            let vars = rule_variables(Some(head), body);
            for_each_env(&vars, &universe, &mut BTreeMap::new(), &mut |env| {
                if body_holds(body, env, &set) {
                    let h = subst_atom(head, env);
                    if !set.contains(&h) {
                        added.push(h);
                    }
                }
            });
        }
        if added.is_empty() {
            return set;
        }
        set.extend(added);
    }
}

/// True iff some ground constraint instantiation is violated in `set`.
pub fn naive_violated(world: &Program, inputs: &BTreeSet<GroundAtom>, set: &BTreeSet<GroundAtom>) -> bool {
    let universe = universe(world, inputs);
    let mut violated = false;
    for (_, body) in world.constraints() {
        let vars = rule_variables(None, body);
        for_each_env(&vars, &universe, &mut BTreeMap::new(), &mut |env| {
            if body_holds(body, env, set) {
                violated = true;
            }
        });
    }
    violated
}

/// All admissible selections of one cardinality fact, by checking every
/// subset of the choices against the bounds.
pub fn oracle_selections(card: &CardinalityFact) -> Vec<Vec<GroundAtom>> {
    let k = card.choices.len();
    let mut out = Vec::new();
    for mask in 0u32..(1 << k) {
        let picked: Vec<GroundAtom> = (0..k)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| GroundAtom::from_atom(&card.choices[i]).expect("ground choice"))
            .collect();
        if picked.len() as u32 >= card.lower && picked.len() as u32 <= card.upper {
            out.push(picked);
        }
    }
    out
}

pub struct OracleOutcome {
    pub selected: Vec<GroundAtom>,
    pub closure: BTreeSet<GroundAtom>,
    pub consistent: bool,
}

pub struct OracleResult {
    pub outcomes: Vec<OracleOutcome>,
    pub entailed: BTreeSet<GroundAtom>,
}

impl OracleResult {
    pub fn answer_set_count(&self) -> usize {
        self.outcomes.iter().filter(|o| o.consistent).count()
    }
}

/// Reference answer-set computation: refinement product, naive closure,
/// naive constraint check, intersection of consistent closures.
pub fn oracle_solve(world: &Program, story: &Story) -> OracleResult {
    let mut refinements: Vec<Vec<GroundAtom>> = vec![Vec::new()];
    for card in &story.ambiguous {
        let mut next = Vec::new();
        for base in &refinements {
            for sel in oracle_selections(card) {
                let mut r = base.clone();
                r.extend(sel);
                next.push(r);
            }
        }
        refinements = next;
    }
    let mut outcomes = Vec::new();
    for selected in refinements {
        let inputs = oracle_inputs(world, story, &selected);
        let closure = naive_closure(world, &inputs);
        let consistent = !naive_violated(world, &inputs, &closure);
        outcomes.push(OracleOutcome { selected, closure, consistent });
    }
    let mut entailed: Option<BTreeSet<GroundAtom>> = None;
    for o in outcomes.iter().filter(|o| o.consistent) {
        entailed = Some(match entailed {
            None => o.closure.clone(),
            Some(prev) => prev.intersection(&o.closure).cloned().collect(),
        });
    }
    let mut entailed = entailed.unwrap_or_default();
    for f in &story.facts {
        entailed.remove(f);
    }
    for f in &oracle_inputs(world, story, &[]) {
        entailed.remove(f);
    }
    OracleResult { outcomes, entailed }
}

/// A ground rule application valid in a closure (head and all body atoms
/// present, inequalities satisfied).
struct OracleFiring {
    head: GroundAtom,
    derived_premises: Vec<GroundAtom>,
}

fn oracle_firings(
    world: &Program,
    inputs: &BTreeSet<GroundAtom>,
    closure: &BTreeSet<GroundAtom>,
) -> Vec<OracleFiring> {
    let universe = universe(world, inputs);
    let mut firings = Vec::new();
    for (_, head, body) in world.definites() {
        let vars = rule_variables(Some(head), body);
        for_each_env(&vars, &universe, &mut BTreeMap::new(), &mut |env| {
            if body_holds(body, env, closure) {
                let h = subst_atom(head, env);
                if inputs.contains(&h) {
                    return;
                }
                let derived: Vec<GroundAtom> = body
                    .iter()
                    .filter_map(|lit| match lit {
                        BodyLiteral::Atom(a) => Some(subst_atom(a, env)),
                        BodyLiteral::NotEqual(..) => None,
                    })
                    .filter(|p| !inputs.contains(p))
                    .collect();
                if derived.contains(&h) {
                    return; // self-supporting, never usable acyclically
                }
                firings.push(OracleFiring { head: h, derived_premises: derived });
            }
        });
    }
    firings
}

/// Goal of a reference proof search.
pub enum OracleGoal {
    Atom(GroundAtom),
    Contradiction,
}

/// Reference minimal-proof machinery for one refinement: inputs, closure
/// and firings are computed once, then each goal runs a breadth-first
/// search over sets of established derived atoms (one rule application per
/// step).
pub struct OracleProver<'a> {
    world: &'a Program,
    inputs: BTreeSet<GroundAtom>,
    closure: BTreeSet<GroundAtom>,
    firings: Vec<OracleFiring>,
}

impl<'a> OracleProver<'a> {
    pub fn new(world: &'a Program, story: &Story, selected: &[GroundAtom]) -> Self {
        let inputs = oracle_inputs(world, story, selected);
        let closure = naive_closure(world, &inputs);
        let firings = oracle_firings(world, &inputs, &closure);
        OracleProver { world, inputs, closure, firings }
    }

    /// Minimal proof size for `goal`.  Returns `None` if the goal is
    /// unreachable, `Some(Err(()))` if the state budget is exhausted.
    pub fn min_steps(&self, goal: &OracleGoal) -> Option<Result<usize, ()>> {
        // Target sets of derived atoms that finish the search, plus the
        // step surcharge on completion (1 for applying a constraint).
        let mut targets: Vec<(BTreeSet<GroundAtom>, usize)> = Vec::new();
        match goal {
            OracleGoal::Atom(a) => {
                if !self.closure.contains(a) {
                    return None;
                }
                if self.inputs.contains(a) {
                    return Some(Ok(0));
                }
                targets.push((BTreeSet::from([a.clone()]), 0));
            }
            OracleGoal::Contradiction => {
                let universe = universe(self.world, &self.inputs);
                for (_, body) in self.world.constraints() {
                    let vars = rule_variables(None, body);
                    for_each_env(&vars, &universe, &mut BTreeMap::new(), &mut |env| {
                        if body_holds(body, env, &self.closure) {
                            let derived: BTreeSet<GroundAtom> = body
                                .iter()
                                .filter_map(|lit| match lit {
                                    BodyLiteral::Atom(a) => Some(subst_atom(a, env)),
                                    BodyLiteral::NotEqual(..) => None,
                                })
                                .filter(|p| !self.inputs.contains(p))
                                .collect();
                            targets.push((derived, 1));
                        }
                    });
                }
                if targets.is_empty() {
                    return None;
                }
            }
        }
        if let Some(extra) = targets.iter().filter(|(t, _)| t.is_empty()).map(|(_, e)| *e).min() {
            return Some(Ok(extra));
        }

        // Restrict the search to the backward cone of the targets.
        let mut cone: BTreeSet<&GroundAtom> = targets.iter().flat_map(|(t, _)| t).collect();
        loop {
            let before = cone.len();
            for f in &self.firings {
                if cone.contains(&f.head) {
                    for p in &f.derived_premises {
                        cone.insert(p);
                    }
                }
            }
            if cone.len() == before {
                break;
            }
        }
        let firings: Vec<&OracleFiring> =
            self.firings.iter().filter(|f| cone.contains(&f.head)).collect();

        let done = |state: &BTreeSet<GroundAtom>| {
            targets
                .iter()
                .filter(|(t, _)| t.is_subset(state))
                .map(|(_, extra)| *extra)
                .min()
        };
        let mut frontier: Vec<BTreeSet<GroundAtom>> = vec![BTreeSet::new()];
        let mut visited: HashSet<BTreeSet<GroundAtom>> = HashSet::new();
        visited.insert(BTreeSet::new());
        let mut steps = 0usize;
        while !frontier.is_empty() {
            steps += 1;
            if visited.len() > 50_000 {
                return Some(Err(()));
            }
            let mut next = Vec::new();
            for state in &frontier {
                for f in &firings {
                    if state.contains(&f.head)
                        || !f.derived_premises.iter().all(|p| state.contains(p))
                    {
                        continue;
                    }
                    let mut s = state.clone();
                    s.insert(f.head.clone());
                    if visited.insert(s.clone()) {
                        if let Some(extra) = done(&s) {
                            return Some(Ok(steps + extra));
                        }
                        next.push(s);
                    }
                }
            }
            frontier = next;
        }
        None
    }
}

/// Reference on-path computation: an edge is on a path between `s` and `t`
/// iff some simple path between them traverses it.
pub fn oracle_on_path(graph: &StoryGraph, s: usize, t: usize) -> BTreeSet<usize> {
    let mut on_path = BTreeSet::new();
    if s == t {
        return on_path;
    }
    let mut visited = vec![false; graph.nodes.len()];
    let mut path_edges: Vec<usize> = Vec::new();
    visited[s] = true;
    dfs_paths(graph, s, t, &mut visited, &mut path_edges, &mut on_path);
    on_path
}

fn dfs_paths(
    graph: &StoryGraph,
    at: usize,
    t: usize,
    visited: &mut Vec<bool>,
    path_edges: &mut Vec<usize>,
    on_path: &mut BTreeSet<usize>,
) {
    if at == t {
        on_path.extend(path_edges.iter().copied());
        return;
    }
    for (eid, edge) in graph.edges.iter().enumerate() {
        let next = if edge.u == at {
            edge.v
        } else if edge.v == at {
            edge.u
        } else {
            continue;
        };
        if edge.u == edge.v || visited[next] {
            continue;
        }
        visited[next] = true;
        path_edges.push(eid);
        dfs_paths(graph, next, t, visited, path_edges, on_path);
        path_edges.pop();
        visited[next] = false;
    }
}

/// Inverts the graph encoding back into a story, using the machine fields
/// (`predicate`, `constant`, `node_names`) and the world's arities.
pub fn decode_graph(graph: &EncodedGraph, world: &Program) -> Story {
    let kind_of: BTreeMap<usize, NodeKind> =
        graph.nodes.iter().map(|n| (n.id, n.kind)).collect();
    let name = |id: usize| graph.node_names[&id].clone();
    let mut facts: BTreeSet<GroundAtom> = BTreeSet::new();
    let mut ambiguous: Vec<CardinalityFact> = Vec::new();
    // Ambiguity nodes: one in-edge carrying the predicate, one out-edge per
    // alternative carrying the bound label.
    for node in graph.nodes.iter().filter(|n| n.kind == NodeKind::Amb) {
        let in_edge = graph.edges.iter().find(|e| e.to == node.id).expect("amb in-edge");
        let first = name(in_edge.from);
        let choices: Vec<Atom> = graph
            .edges
            .iter()
            .filter(|e| e.from == node.id)
            .map(|e| {
                Atom::new(
                    e.predicate.clone(),
                    vec![Term::Constant(first.clone()), Term::Constant(name(e.to))],
                )
            })
            .collect();
        let upper = if graph
            .edges
            .iter()
            .any(|e| e.from == node.id && e.label == storybench::encode::AMB_EXACTLY_ONE)
        {
            1
        } else {
            choices.len() as u32
        };
        ambiguous.push(CardinalityFact { lower: 1, upper, choices });
    }
    for edge in &graph.edges {
        if kind_of[&edge.from] == NodeKind::Amb || kind_of[&edge.to] == NodeKind::Amb {
            continue;
        }
        let args = match (&edge.constant, world.arities.get(&edge.predicate)) {
            (Some(c), _) => vec![name(edge.from), c.clone()],
            (None, Some(1)) => vec![name(edge.from)],
            (None, _) => vec![name(edge.from), name(edge.to)],
        };
        facts.insert(GroundAtom { predicate: edge.predicate.clone(), args });
    }
    let mut entities: BTreeMap<String, EntityKind> = BTreeMap::new();
    for node in &graph.nodes {
        match node.kind {
            NodeKind::Person => {
                entities.insert(name(node.id), EntityKind::Person);
            }
            NodeKind::Place => {
                entities.insert(name(node.id), EntityKind::Place);
            }
            NodeKind::Amb => {}
        }
    }
    for fact in &facts {
        for c in &fact.args {
            if !entities.contains_key(c) {
                entities.insert(c.clone(), EntityKind::Reserved);
            }
        }
    }
    Story::new(facts, ambiguous, entities).expect("decoded story is well-formed")
}

/// Samples a tiny random world + story pair: at most 6 constants, 8 world
/// rules and 2 ambiguous facts.
pub fn random_case(rng: &mut ChaCha8Rng) -> (Program, Story) {
    let preds = ["p0", "p1", "p2", "p3"];
    let pick = |rng: &mut ChaCha8Rng| preds[rng.gen_range(0..preds.len())];
    let n_consts = rng.gen_range(3..=6usize);
    let consts: Vec<String> = (0..n_consts).map(|i| format!("c{i}")).collect();
    let cpick = |rng: &mut ChaCha8Rng| consts[rng.gen_range(0..consts.len())].clone();

    let mut world = String::new();
    let n_rules = rng.gen_range(2..=8usize);
    for _ in 0..n_rules {
        let line = match rng.gen_range(0..10u32) {
            0..=2 => format!("{}(X, Y) :- {}(Y, X).\n", pick(rng), pick(rng)),
            3..=4 => format!("{}(X, Y) :- {}(X, Y).\n", pick(rng), pick(rng)),
            5..=7 => format!("{}(X, Z) :- {}(X, Y), {}(Y, Z).\n", pick(rng), pick(rng), pick(rng)),
            8 => format!(
                "{}(X, Z) :- {}(X, Y), {}(Y, Z), X != Z.\n",
                pick(rng),
                pick(rng),
                pick(rng)
            ),
            _ => format!(":- {}(X, Y), {}(Y, X), X != Y.\n", pick(rng), pick(rng)),
        };
        world.push_str(&line);
    }
    let world = parse_program(&world).expect("generated world parses");

    let mut story = String::new();
    let mut used: BTreeSet<(String, String, String)> = BTreeSet::new();
    for _ in 0..rng.gen_range(2..=6usize) {
        let (p, a, b) = (pick(rng).to_string(), cpick(rng), cpick(rng));
        story.push_str(&format!("{p}({a}, {b}).\n"));
        used.insert((p, a, b));
    }
    for _ in 0..rng.gen_range(0..=2usize) {
        let p = pick(rng).to_string();
        let first = cpick(rng);
        let k = rng.gen_range(2..=3usize).min(n_consts - 1);
        // Alternatives may not repeat an atom already in the story.
        let mut seconds: BTreeSet<String> = BTreeSet::new();
        for _ in 0..20 {
            if seconds.len() >= k {
                break;
            }
            let c = cpick(rng);
            if c != first && !used.contains(&(p.clone(), first.clone(), c.clone())) {
                seconds.insert(c);
            }
        }
        if seconds.len() < 2 {
            continue;
        }
        for s in &seconds {
            used.insert((p.clone(), first.clone(), s.clone()));
        }
        let upper = if rng.gen_bool(0.7) { 1 } else { seconds.len() };
        let choices: Vec<String> =
            seconds.iter().map(|s| format!("{p}({first}, {s})")).collect();
        story.push_str(&format!("1{{{}}}{}.\n", choices.join("; "), upper));
    }
    let story =
        Story::from_program(&parse_program(&story).expect("generated story parses"), &world)
            .expect("generated story loads");
    (world, story)
}

/// Runs one full solver-vs-oracle comparison on the random case derived
/// from `case`.  Panics on any mismatch.
pub fn verify_case(case: u64) {
    use storybench::engine::{enumerate_refinements, solve, DEFAULT_REFINEMENT_CAP};
    use storybench::proofs::{minimal_proofs, ProofGoal, SearchLimits};

    let limits = SearchLimits::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + case);
    let (world, story) = random_case(&mut rng);
    let ctx =
        || format!("case {case}:\nworld:\n{:?}\nstory:\n{}", world.rules, story.serialize());

    // Refinement enumeration count: product of per-fact selections.
    let refinements = enumerate_refinements(&story, DEFAULT_REFINEMENT_CAP).unwrap();
    let oracle = oracle_solve(&world, &story);
    assert_eq!(refinements.len(), oracle.outcomes.len(), "{}", ctx());

    let result = solve(&world, &story, DEFAULT_REFINEMENT_CAP).unwrap();

    // Answer sets: same consistent closures, as multisets of atom sets.
    let mut got: Vec<BTreeSet<GroundAtom>> =
        result.ref_plus().map(|o| o.closure.atom_set()).collect();
    let mut want: Vec<BTreeSet<GroundAtom>> = oracle
        .outcomes
        .iter()
        .filter(|o| o.consistent)
        .map(|o| o.closure.clone())
        .collect();
    got.sort();
    want.sort();
    assert_eq!(got, want, "{}", ctx());
    assert_eq!(result.answer_set_count(), oracle.answer_set_count(), "{}", ctx());

    // Entailed atoms.
    assert_eq!(result.entailed, oracle.entailed, "{}", ctx());

    // Minimal proof sizes, on a few goals in a few refinements.
    for outcome in result.outcomes.iter().take(8) {
        let selected = outcome.refinement.selected_atoms(&story);
        let prover = OracleProver::new(&world, &story, &selected);
        let check = |goal: ProofGoal, oracle_goal: OracleGoal| {
            let Some(expected) = prover.min_steps(&oracle_goal) else {
                panic!("oracle says unreachable but the closure derived it\n{}", ctx());
            };
            let Ok(expected) = expected else {
                return; // oracle budget exceeded; skip this goal
            };
            let proofs = minimal_proofs(&outcome.closure, &goal, &limits).unwrap();
            assert!(!proofs.is_empty(), "{}", ctx());
            for p in &proofs {
                assert_eq!(p.len(), expected, "goal {goal:?}\n{}", ctx());
            }
        };
        if outcome.closure.consistent() {
            let derived: Vec<&GroundAtom> = outcome
                .closure
                .atoms
                .iter()
                .zip(outcome.closure.is_input.iter())
                .filter(|(_, is_input)| !**is_input)
                .map(|(a, _)| a)
                .collect();
            for goal in derived.iter().take(3) {
                check(
                    ProofGoal::Atom((*goal).clone()),
                    OracleGoal::Atom((*goal).clone()),
                );
            }
        } else {
            check(ProofGoal::Contradiction, OracleGoal::Contradiction);
        }
    }
}
