//! Stitching: composing two instances into a harder one.
//!
//! The construction deletes a lemma fact from the base story, renames the
//! donor story's entities so its query fact becomes exactly that lemma, and
//! unites the fact sets; a final fresh renaming anonymizes the result.  All
//! metrics are recomputed from scratch on the stitched story — never
//! derived arithmetically from the components.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{build_instance, matches_spec, ProblemInstance, Provenance, SplitSpec};
use crate::error::StitchError;
use crate::proofs::SearchLimits;
use crate::story::{GroundAtom, Story};
use crate::syntax::Program;

/// A reproducible description of one stitch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StitchPlan {
    pub base_id: String,
    pub donor_id: String,
    /// Lemma fact in the base story's namespace; deleted from the base and
    /// supplied by the donor's derivation instead.
    pub lemma: GroundAtom,
    /// Injective donor-entity renaming; must map the donor's query pair
    /// onto the lemma's arguments.
    pub renaming: BTreeMap<String, String>,
    /// Final renaming applied to the merged story (may be empty).
    pub final_renaming: BTreeMap<String, String>,
}

/// Applies `plan` to stitch `donor` into `base`.
pub fn stitch(
    world: &Program,
    base: &ProblemInstance,
    donor: &ProblemInstance,
    plan: &StitchPlan,
    allow_ambiguous: bool,
    limits: &SearchLimits,
) -> anyhow::Result<ProblemInstance> {
    if !allow_ambiguous
        && (base.story.ambiguity_count() > 0 || donor.story.ambiguity_count() > 0)
    {
        return Err(StitchError::AmbiguousInput.into());
    }
    let mut seen: BTreeSet<&String> = BTreeSet::new();
    for target in plan.renaming.values() {
        if !seen.insert(target) {
            return Err(StitchError::RenamingCollision(target.clone()).into());
        }
    }
    let rename = |n: &str| plan.renaming.get(n).cloned().unwrap_or_else(|| n.to_string());
    let donor_query =
        GroundAtom::new(plan.lemma.predicate.clone(), &[&rename(&donor.source), &rename(&donor.target)]);
    if donor_query != plan.lemma || !donor.labels.contains(&plan.lemma.predicate) {
        return Err(StitchError::LemmaMismatch {
            donor: donor_query.to_string(),
            lemma: plan.lemma.to_string(),
        }
        .into());
    }
    let renamed_donor = donor.story.rename(&plan.renaming);
    for (name, kind) in &renamed_donor.entities {
        if let Some(base_kind) = base.story.entities.get(name) {
            if base_kind != kind {
                return Err(StitchError::KindMismatch(name.clone()).into());
            }
        }
    }

    // Union: base facts minus the lemma, plus the renamed donor facts.
    let mut facts = base.story.facts.clone();
    facts.remove(&plan.lemma);
    facts.extend(renamed_donor.facts.iter().cloned());
    let mut ambiguous = base.story.ambiguous.clone();
    ambiguous.extend(renamed_donor.ambiguous.iter().cloned());
    let mut entities = base.story.entities.clone();
    entities.extend(renamed_donor.entities.clone());
    let merged = Story::new(facts, ambiguous, entities)
        .map_err(|e| anyhow::anyhow!("merged story invalid: {e}"))?;
    let merged = merged.rename(&plan.final_renaming);
    let fr = |n: &str| plan.final_renaming.get(n).cloned().unwrap_or_else(|| n.to_string());
    let source = fr(&base.source);
    let target = fr(&base.target);

    let lineage = {
        let mut l = base.lineage.clone();
        l.extend(donor.lineage.iter().cloned());
        l.push(serde_json::to_string(plan).expect("plan serializes"));
        l
    };
    let inst = build_instance(world, &merged, &source, &target, Provenance::default(), lineage, limits)
        .map_err(|e| match e.downcast::<crate::error::SolveError>() {
            Ok(crate::error::SolveError::Inconsistent) => anyhow::Error::from(StitchError::Inconsistent),
            Ok(other) => other.into(),
            Err(e) => e,
        })?;
    if !base.labels.is_subset(&inst.labels) {
        return Err(StitchError::EntailmentLost.into());
    }
    Ok(inst)
}

/// Re-executes the outermost stitch plan of `lineage` against a pool,
/// reproducing the recorded instance.
pub fn replay(
    world: &Program,
    pool: &[ProblemInstance],
    plan_json: &str,
    allow_ambiguous: bool,
    limits: &SearchLimits,
) -> anyhow::Result<ProblemInstance> {
    let plan: StitchPlan = serde_json::from_str(plan_json)?;
    let find = |id: &str| {
        pool.iter()
            .find(|i| i.id == id)
            .ok_or_else(|| anyhow::anyhow!("lineage component `{id}` not in pool"))
    };
    let base = find(&plan.base_id)?;
    let donor = find(&plan.donor_id)?;
    stitch(world, base, donor, &plan, allow_ambiguous, limits)
}

/// Repeatedly stitches random compatible (base, donor) pairs, keeping
/// outputs that satisfy `spec`.  `rounds == 0` just filters the pool.
pub fn recursive_expand(
    world: &Program,
    pool: &[ProblemInstance],
    spec: &SplitSpec,
    rounds: usize,
    seed: u64,
    allow_ambiguous: bool,
    limits: &SearchLimits,
) -> Vec<ProblemInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current: Vec<ProblemInstance> = pool.to_vec();
    let mut emitted: Vec<ProblemInstance> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for inst in pool.iter().filter(|i| matches_spec(i, spec)) {
        if seen.insert(inst.id.clone()) {
            emitted.push(inst.clone());
        }
    }
    for _round in 0..rounds {
        let mut next: Vec<ProblemInstance> = Vec::new();
        let tries = current.len().max(1) * 4;
        for _ in 0..tries {
            let Some(base) = current.choose(&mut rng) else { break };
            let Some(stitched) = try_pair(world, base, pool, &mut rng, allow_ambiguous, limits)
            else {
                continue;
            };
            if seen.contains(&stitched.id) {
                continue;
            }
            if matches_spec(&stitched, spec) {
                seen.insert(stitched.id.clone());
                emitted.push(stitched.clone());
            }
            next.push(stitched);
        }
        if next.is_empty() {
            break;
        }
        current = next;
    }
    emitted
}

/// Attempts one random stitch of some pool donor into `base`.
fn try_pair(
    world: &Program,
    base: &ProblemInstance,
    pool: &[ProblemInstance],
    rng: &mut ChaCha8Rng,
    allow_ambiguous: bool,
    limits: &SearchLimits,
) -> Option<ProblemInstance> {
    // Candidate lemmas: base story facts between two proper entities.
    let lemmas: Vec<&GroundAtom> = base
        .story
        .facts
        .iter()
        .filter(|f| f.args.len() == 2)
        .filter(|f| {
            f.args.iter().all(|c| {
                base.story
                    .entities
                    .get(c)
                    .is_some_and(|k| *k != crate::story::EntityKind::Reserved)
            })
        })
        .collect();
    let lemma = (*lemmas.choose(rng)?).clone();
    // Stitched ambiguity multiplies refinements, so keep the combined count
    // small even when ambiguous inputs are allowed.
    let amb_budget = if allow_ambiguous { 2 } else { 0 };
    let base_amb = base.story.ambiguity_count();
    let donors: Vec<&ProblemInstance> = pool
        .iter()
        .filter(|d| d.labels.contains(&lemma.predicate))
        .filter(|d| d.id != base.id)
        .filter(|d| base_amb + d.story.ambiguity_count() <= amb_budget)
        .collect();
    let donor = *donors.choose(rng)?;
    // Renaming: align the donor query with the lemma; fresh-name the rest.
    let mut renaming: BTreeMap<String, String> = BTreeMap::new();
    renaming.insert(donor.source.clone(), lemma.args[0].clone());
    renaming.insert(donor.target.clone(), lemma.args[1].clone());
    let mut counter = 0usize;
    for (name, _) in donor.story.proper_entities() {
        if renaming.contains_key(name) {
            continue;
        }
        loop {
            let fresh = format!("d{counter}");
            counter += 1;
            if !base.story.entities.contains_key(&fresh)
                && !renaming.values().any(|v| *v == fresh)
            {
                renaming.insert(name.to_string(), fresh);
                break;
            }
        }
    }
    // Final renaming: anonymize every merged entity deterministically.
    let mut merged_names: BTreeSet<String> = base
        .story
        .proper_entities()
        .map(|(n, _)| n.to_string())
        .collect();
    merged_names.extend(renaming.values().cloned());
    merged_names.remove(&lemma.args[0]); // still present via donor alignment
    merged_names.insert(lemma.args[0].clone());
    let salt: u32 = rng.gen();
    let final_renaming: BTreeMap<String, String> = merged_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), format!("e{salt:08x}_{i}")))
        .collect();
    let plan = StitchPlan {
        base_id: base.id.clone(),
        donor_id: donor.id.clone(),
        lemma,
        renaming,
        final_renaming,
    };
    stitch(world, base, donor, &plan, allow_ambiguous, limits).ok()
}
