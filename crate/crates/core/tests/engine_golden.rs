//! Golden end-to-end checks of the entailment engine on the bundled
//! worlds and stories.

mod common;

use std::collections::BTreeSet;

use common::{data_path, load_program, load_story, world_path};
use storybench::engine::{solve, DEFAULT_REFINEMENT_CAP};
use storybench::proofs::{minimal_proofs, ProofGoal, SearchLimits};
use storybench::story::GroundAtom;

fn ga(predicate: &str, args: &[&str]) -> GroundAtom {
    GroundAtom::new(predicate, args)
}

/// The closure of the mini world's three-fact story is exactly the expected
/// sixteen-atom stable model.
#[test]
fn mini_story_stable_model_is_exact() {
    let world = load_program(&world_path("mini.lp"));
    let story = load_story(&data_path("mini_story.lp"), &world);
    let result = solve(&world, &story, DEFAULT_REFINEMENT_CAP).unwrap();
    assert_eq!(result.outcomes.len(), 1, "unambiguous story has one refinement");
    assert_eq!(result.answer_set_count(), 1);

    let model: BTreeSet<GroundAtom> = result.outcomes[0]
        .closure
        .atoms
        .iter()
        .filter(|a| a.predicate != "is_person" && a.predicate != "is_place")
        .cloned()
        .collect();
    let mut expected = BTreeSet::new();
    for x in ["ram", "lola", "irfan"] {
        for y in ["ram", "lola", "irfan"] {
            expected.insert(ga("living_in_same_place", &[x, y]));
        }
    }
    expected.insert(ga("school_mates_with", &["ram", "irfan"]));
    expected.insert(ga("parent_of", &["lola", "ram"]));
    expected.insert(ga("belongs_to", &["ram", "underage"]));
    expected.insert(ga("living_in", &["irfan", "calcutta"]));
    expected.insert(ga("living_in", &["ram", "calcutta"]));
    expected.insert(ga("living_in", &["lola", "calcutta"]));
    expected.insert(ga("is_agegroup", &["underage"]));
    assert_eq!(expected.len(), 16);
    assert_eq!(model, expected);
}

/// The globally minimal derivation of `living_in_same_place(irfan, lola)`
/// in the mini story takes five steps (underage lemma, parent co-location,
/// school-mate co-location, transitivity, symmetry).
#[test]
fn mini_story_goal_needs_five_steps() {
    let world = load_program(&world_path("mini.lp"));
    let story = load_story(&data_path("mini_story.lp"), &world);
    let result = solve(&world, &story, DEFAULT_REFINEMENT_CAP).unwrap();
    let goal = ProofGoal::Atom(ga("living_in_same_place", &["irfan", "lola"]));
    let proofs = minimal_proofs(&result.outcomes[0].closure, &goal, &SearchLimits::default())
        .unwrap();
    assert!(!proofs.is_empty());
    for p in &proofs {
        assert_eq!(p.len(), 5, "unexpected proof:\n{}", p.trace());
    }
}

/// The two-ambiguity story from the full world has exactly two answer sets:
/// the chosen residence for bob clashes with the one derived through his
/// colleague mary unless they coincide.
#[test]
fn full_world_example_story_has_two_answer_sets() {
    let world = load_program(&world_path("family.lp"));
    let story = load_story(&data_path("family_story.lp"), &world);
    let result = solve(&world, &story, DEFAULT_REFINEMENT_CAP).unwrap();
    assert_eq!(result.outcomes.len(), 4);
    assert_eq!(result.answer_set_count(), 2);

    let r = result.relations_between("mary", "rome").unwrap();
    assert_eq!(r, BTreeSet::from(["living_in".to_string()]));
    let r = result.relations_between("eve", "ann").unwrap();
    assert!(r.is_empty(), "child_of(eve, ann) holds in only one answer set: {r:?}");
}

/// An aunt whose co-grandparent has no daughters must be maternal.
#[test]
fn full_world_derives_maternal_aunt() {
    let world = load_program(&world_path("family.lp"));
    let story = load_story(&data_path("aunt_story.lp"), &world);
    let result = solve(&world, &story, DEFAULT_REFINEMENT_CAP).unwrap();
    let r = result.relations_between("ann", "todd").unwrap();
    assert!(r.contains("aunt_of"), "{r:?}");
    assert!(r.contains("maternal_aunt_of"), "{r:?}");
}

/// Three binary ambiguous facts give eight refinements; the underage-parent
/// constraint kills the four where cole is ryan's parent.
#[test]
fn ambiguous_story_refinements_and_entailment() {
    let world = load_program(&data_path("amb_world.lp"));
    let story = load_story(&data_path("amb_story.lp"), &world);
    let result = solve(&world, &story, DEFAULT_REFINEMENT_CAP).unwrap();
    assert_eq!(result.outcomes.len(), 8);
    assert_eq!(result.answer_set_count(), 4);
    assert!(result.entailed.contains(&ga("living_in", &["ryan", "kgp"])));

    // Positive proofs: three steps through phil, four through sheila.
    let goal = ProofGoal::Atom(ga("living_in", &["ryan", "kgp"]));
    let mut lens = BTreeSet::new();
    for outcome in result.ref_plus() {
        let proofs = minimal_proofs(&outcome.closure, &goal, &SearchLimits::default()).unwrap();
        assert_eq!(proofs.len(), 1);
        lens.insert(proofs[0].len());
    }
    assert_eq!(lens, BTreeSet::from([3, 4]));

    // Every inconsistent refinement shares the same three-step contradiction.
    for outcome in result.ref_minus() {
        let proofs =
            minimal_proofs(&outcome.closure, &ProofGoal::Contradiction, &SearchLimits::default())
                .unwrap();
        assert_eq!(proofs.len(), 1);
        assert_eq!(proofs[0].len(), 3, "unexpected:\n{}", proofs[0].trace());
    }
}

/// Refinement count law: |ref⁺| + |ref⁻| equals the product of the per-fact
/// admissible-selection counts.
#[test]
fn refinement_count_law_holds() {
    let world = load_program(&data_path("amb_world.lp"));
    let story = load_story(&data_path("amb_story.lp"), &world);
    let result = solve(&world, &story, DEFAULT_REFINEMENT_CAP).unwrap();
    let product: usize = story
        .ambiguous
        .iter()
        .map(|c| c.admissible_selections().len())
        .product();
    assert_eq!(result.ref_plus().count() + result.ref_minus().count(), product);
}
