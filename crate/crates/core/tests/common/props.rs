//! Shared randomized property checks, used by both the property suite and
//! the acceptance suite.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use storybench::encode::encode_graph;
use storybench::engine::{solve, DEFAULT_REFINEMENT_CAP};
use storybench::metrics::{instance_metrics, Ratio};
use storybench::parser::parse_program;
use storybench::pathing::StoryGraph;
use storybench::proofs::SearchLimits;
use storybench::story::{GroundAtom, Story};

use super::oracle::{decode_graph, oracle_on_path, random_case};

/// Picks some entailed binary relation pair of a solved story, if any.
fn pick_query(result: &storybench::engine::EntailmentResult) -> Option<(String, String)> {
    result
        .entailed
        .iter()
        .find(|a| a.args.len() == 2)
        .map(|a| (a.args[0].clone(), a.args[1].clone()))
}

/// Depth/width/BL/OPEC and the hard-ambiguity label survive a random
/// entity renaming.  Returns the number of cases that had a query.
pub fn check_renaming_invariance(cases: u64) -> usize {
    let limits = SearchLimits::default();
    let mut checked = 0;
    for case in 0..cases {
        let mut rng = ChaCha8Rng::seed_from_u64(0x11_0000 + case);
        let (world, story) = random_case(&mut rng);
        let result = solve(&world, &story, DEFAULT_REFINEMENT_CAP).unwrap();
        let Some((x, y)) = pick_query(&result) else { continue };
        let labels = result.relations_between(&x, &y).unwrap();
        let metrics = instance_metrics(&story, &result, &x, &y, &labels, &limits).unwrap();
        let hard =
            storybench::dataset::label_hard_ambiguous(&story, &result, &x, &y, &labels, &limits)
                .unwrap();

        // A random permutation onto entirely fresh names.
        let mut names: Vec<String> =
            story.proper_entities().map(|(n, _)| n.to_string()).collect();
        names.shuffle(&mut rng);
        let map: BTreeMap<String, String> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), format!("zz{i}")))
            .collect();
        let renamed = story.rename(&map);
        let rx = map[&x].clone();
        let ry = map[&y].clone();
        let r2 = solve(&world, &renamed, DEFAULT_REFINEMENT_CAP).unwrap();
        let labels2 = r2.relations_between(&rx, &ry).unwrap();
        assert_eq!(labels, labels2, "case {case}");
        let metrics2 = instance_metrics(&renamed, &r2, &rx, &ry, &labels2, &limits).unwrap();
        assert_eq!(metrics, metrics2, "case {case}\n{}", story.serialize());
        let hard2 =
            storybench::dataset::label_hard_ambiguous(&renamed, &r2, &rx, &ry, &labels2, &limits)
                .unwrap();
        assert_eq!(hard, hard2, "case {case}");
        checked += 1;
    }
    checked
}

/// Unambiguous stories always have width 1.  Returns the number of cases
/// that produced a query.
pub fn check_width_one(cases: u64) -> usize {
    let limits = SearchLimits::default();
    let mut checked = 0;
    for case in 0..cases {
        let mut rng = ChaCha8Rng::seed_from_u64(0x22_0000 + case);
        let (world, story) = random_case(&mut rng);
        // Strip the ambiguity: keep only the plain facts.
        let story = Story::new(story.facts.clone(), vec![], story.entities.clone()).unwrap();
        let result = solve(&world, &story, DEFAULT_REFINEMENT_CAP).unwrap();
        if !result.is_consistent() {
            continue;
        }
        let Some((x, y)) = pick_query(&result) else { continue };
        let labels = result.relations_between(&x, &y).unwrap();
        if labels.is_empty() {
            continue;
        }
        let metrics = instance_metrics(&story, &result, &x, &y, &labels, &limits).unwrap();
        assert_eq!(metrics.width, 1, "case {case}\n{}", story.serialize());
        checked += 1;
    }
    checked
}

/// Pure composition chains keep BL below 1 and OPEC at 0.
pub fn check_chains(cases: u64) {
    let limits = SearchLimits::default();
    let world = parse_program("r(X, Z) :- r(X, Y), r(Y, Z).\n").unwrap();
    for case in 0..cases {
        let mut rng = ChaCha8Rng::seed_from_u64(0x33_0000 + case);
        let n = rng.gen_range(3..=10usize);
        let mut src = String::new();
        for i in 0..n {
            src.push_str(&format!("r(m{i}, m{}).\n", i + 1));
        }
        let story = Story::from_program(&parse_program(&src).unwrap(), &world).unwrap();
        let (x, y) = (String::from("m0"), format!("m{n}"));
        let result = solve(&world, &story, DEFAULT_REFINEMENT_CAP).unwrap();
        let labels = result.relations_between(&x, &y).unwrap();
        assert_eq!(labels, BTreeSet::from(["r".to_string()]));
        let metrics = instance_metrics(&story, &result, &x, &y, &labels, &limits).unwrap();
        // n - 1 composition steps over n + 1 entities.
        assert!(metrics.bl < Ratio::new(1, 1), "chain of {n}: bl = {}", metrics.bl);
        assert_eq!(metrics.depth, n as u64 - 1);
        assert_eq!(metrics.width, 1);
        assert_eq!(metrics.opec, 0, "a chain has no off-path edges");
    }
}

/// `on_path_edges` agrees with exhaustive simple-path enumeration.
pub fn check_paths(cases: u64) {
    for case in 0..cases {
        let mut rng = ChaCha8Rng::seed_from_u64(0x44_0000 + case);
        let n = rng.gen_range(2..=6usize);
        let n_edges = rng.gen_range(1..=10usize);
        let mut facts: BTreeSet<GroundAtom> = BTreeSet::new();
        for e in 0..n_edges {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            // Distinct predicates so parallel edges survive the fact set.
            facts.insert(GroundAtom::new(
                format!("p{e}"),
                &[&format!("m{a}"), &format!("m{b}")],
            ));
        }
        let entities = (0..n)
            .map(|i| (format!("m{i}"), storybench::story::EntityKind::Person))
            .collect();
        let story = Story::new(facts, vec![], entities).unwrap();
        let graph = StoryGraph::of_story(&story);
        for s in 0..n {
            for t in 0..n {
                let got = graph.on_path_edges(&format!("m{s}"), &format!("m{t}"));
                let want = oracle_on_path(&graph, s, t);
                assert_eq!(got, want, "case {case}, {s} -> {t}, edges {:?}", graph.edges);
            }
        }
    }
}

/// The graph encoding is invertible through the test decoder.
pub fn check_roundtrip(cases: u64) {
    for case in 0..cases {
        let mut rng = ChaCha8Rng::seed_from_u64(0x55_0000 + case);
        let (world, story) = random_case(&mut rng);
        let (x, _) = story.proper_entities().next().unwrap();
        let x = x.to_string();
        let labels = BTreeSet::from(["r".to_string()]);
        let graph = encode_graph(&story, &x, &x, &labels);
        let decoded = decode_graph(&graph, &world);
        assert_eq!(story, decoded, "case {case}");
        assert_eq!(graph.labels, labels);
    }
}
