//! Random story generation under fixed world rules.
//!
//! Generation follows an incremental-consistency loop: entities are sampled
//! first (kinds decided by `person_percent`), genders are assigned to all
//! but a `no_gender_assign` fraction of persons, then facts are added one
//! at a time — any fact that leaves the story without an answer set is
//! discarded and resampled.  Ambiguous facts are injected last, each
//! consistency-checked, so every emitted story has at least one answer set.
//! Stories without at least one entailed atom are regenerated.

use std::collections::{BTreeMap, BTreeSet};

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{build_instance, ProblemInstance, Provenance};
use crate::engine::{solve, DEFAULT_REFINEMENT_CAP};
use crate::error::GenError;
use crate::proofs::SearchLimits;
use crate::story::{EntityKind, GroundAtom, Story};
use crate::syntax::{Atom, CardinalityFact, Program, Term};

/// Kind signature of a story-level predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindSignature {
    PersonPerson,
    PersonPlace,
    PersonGender,
    PersonAgegroup,
    PersonProperty,
}

/// One predicate the generator may emit, with its sampling weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateSpec {
    pub name: String,
    pub weight: f64,
    pub signature: KindSignature,
}

fn pred(name: &str, weight: f64, signature: KindSignature) -> PredicateSpec {
    PredicateSpec { name: name.to_string(), weight, signature }
}

/// Generator configuration; loadable from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub person_percent: f64,
    pub no_gender_assign: f64,
    pub entity_range: (usize, usize),
    pub fact_range: (usize, usize),
    pub ambiguity_range: (usize, usize),
    /// Probability an injected ambiguous fact uses the (1,1) bound.
    pub exactly_one_weight: f64,
    /// Probability an ambiguous fact offers three alternatives.
    pub three_choice_weight: f64,
    pub max_fact_rejections: u32,
    pub max_story_retries: u32,
    pub predicates: Vec<PredicateSpec>,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            person_percent: 0.8,
            no_gender_assign: 0.3,
            entity_range: (20, 50),
            fact_range: (30, 75),
            ambiguity_range: (0, 3),
            exactly_one_weight: 0.7,
            three_choice_weight: 0.25,
            max_fact_rejections: 50,
            max_story_retries: 20,
            predicates: vec![
                pred("child_of", 1.0, KindSignature::PersonPerson),
                pred("parent_of", 1.0, KindSignature::PersonPerson),
                pred("son_of", 0.5, KindSignature::PersonPerson),
                pred("daughter_of", 0.5, KindSignature::PersonPerson),
                pred("sibling_of", 1.0, KindSignature::PersonPerson),
                pred("brother_of", 0.5, KindSignature::PersonPerson),
                pred("sister_of", 0.5, KindSignature::PersonPerson),
                pred("spouse_of", 0.6, KindSignature::PersonPerson),
                pred("husband_of", 0.3, KindSignature::PersonPerson),
                pred("wife_of", 0.3, KindSignature::PersonPerson),
                pred("colleague_of", 0.8, KindSignature::PersonPerson),
                pred("school_mates_with", 0.5, KindSignature::PersonPerson),
                pred("living_in_same_place", 0.5, KindSignature::PersonPerson),
                pred("living_in", 1.2, KindSignature::PersonPlace),
                pred("belongs_to", 0.3, KindSignature::PersonAgegroup),
                pred("has_property", 0.3, KindSignature::PersonProperty),
            ],
        }
    }
}

impl GenConfig {
    pub fn from_toml(text: &str) -> Result<GenConfig, GenError> {
        let cfg: GenConfig =
            toml::from_str(text).map_err(|e| GenError::BadConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let prob = |v: f64, name: &str| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(GenError::BadConfig(format!("{name} must be in [0, 1], got {v}")))
            }
        };
        prob(self.person_percent, "person_percent")?;
        prob(self.no_gender_assign, "no_gender_assign")?;
        prob(self.exactly_one_weight, "exactly_one_weight")?;
        prob(self.three_choice_weight, "three_choice_weight")?;
        let range = |(lo, hi): (usize, usize), name: &str| {
            if lo <= hi {
                Ok(())
            } else {
                Err(GenError::BadConfig(format!("{name} range [{lo}, {hi}] is empty")))
            }
        };
        range(self.entity_range, "entity_range")?;
        range(self.fact_range, "fact_range")?;
        range(self.ambiguity_range, "ambiguity_range")?;
        if self.predicates.is_empty() {
            return Err(GenError::BadConfig("no predicates configured".into()));
        }
        if self.predicates.iter().any(|p| !(p.weight > 0.0)) {
            return Err(GenError::BadConfig("predicate weights must be positive".into()));
        }
        Ok(())
    }
}

/// A generated story with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenRecord {
    pub story: Story,
    pub seed: u64,
    pub person_percent: f64,
    pub no_gender_assign: f64,
    /// Facts discarded across all attempts for this story.
    pub rejected_facts: u64,
}

/// Reserved constant groups declared by the world's `is_*` facts.
struct ReservedGroups {
    genders: Vec<String>,
    agegroups: Vec<String>,
    properties: Vec<String>,
}

impl ReservedGroups {
    fn of(world: &Program) -> ReservedGroups {
        let collect = |pred: &str| -> Vec<String> {
            let mut v: Vec<String> = world
                .facts()
                .filter(|a| a.predicate == pred)
                .flat_map(|a| a.args.iter().map(|t| t.name().to_string()))
                .collect();
            v.sort();
            v.dedup();
            v
        };
        ReservedGroups {
            genders: collect("is_gender"),
            agegroups: collect("is_agegroup"),
            properties: collect("is_property"),
        }
    }

    fn constants_for(&self, sig: KindSignature) -> &[String] {
        match sig {
            KindSignature::PersonGender => &self.genders,
            KindSignature::PersonAgegroup => &self.agegroups,
            KindSignature::PersonProperty => &self.properties,
            _ => &[],
        }
    }
}

/// Generates one story; identical `(world, cfg, seed)` gives an identical
/// record.
pub fn generate_story(world: &Program, cfg: &GenConfig, seed: u64) -> Result<GenRecord, GenError> {
    cfg.validate()?;
    let groups = ReservedGroups::of(world);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rejected_total: u64 = 0;
    for _attempt in 0..cfg.max_story_retries {
        match try_story(world, cfg, &groups, &mut rng, &mut rejected_total) {
            Some(story) => {
                return Ok(GenRecord {
                    story,
                    seed,
                    person_percent: cfg.person_percent,
                    no_gender_assign: cfg.no_gender_assign,
                    rejected_facts: rejected_total,
                })
            }
            None => continue,
        }
    }
    Err(GenError::AttemptsExhausted {
        retries: cfg.max_story_retries,
        rejected_facts: rejected_total,
    })
}

fn try_story(
    world: &Program,
    cfg: &GenConfig,
    groups: &ReservedGroups,
    rng: &mut ChaCha8Rng,
    rejected_total: &mut u64,
) -> Option<Story> {
    // Entities: at least two persons; places as the complement.
    let n_entities = rng.gen_range(cfg.entity_range.0..=cfg.entity_range.1);
    let mut kinds: Vec<EntityKind> = (0..n_entities)
        .map(|_| {
            if rng.gen_bool(cfg.person_percent) {
                EntityKind::Person
            } else {
                EntityKind::Place
            }
        })
        .collect();
    kinds[0] = EntityKind::Person;
    if n_entities > 1 {
        kinds[1] = EntityKind::Person;
    }
    let mut entities: BTreeMap<String, EntityKind> = BTreeMap::new();
    let mut persons: Vec<String> = Vec::new();
    let mut places: Vec<String> = Vec::new();
    for (i, kind) in kinds.iter().enumerate() {
        let name = match kind {
            EntityKind::Person => {
                let n = format!("p{i}");
                persons.push(n.clone());
                n
            }
            _ => {
                let n = format!("l{i}");
                places.push(n.clone());
                n
            }
        };
        entities.insert(name, *kind);
    }
    for g in groups
        .genders
        .iter()
        .chain(groups.agegroups.iter())
        .chain(groups.properties.iter())
    {
        entities.insert(g.clone(), EntityKind::Reserved);
    }

    // Gender assignment.
    let mut facts: BTreeSet<GroundAtom> = BTreeSet::new();
    if !groups.genders.is_empty() {
        for p in &persons {
            if rng.gen_bool(1.0 - cfg.no_gender_assign) {
                let g = groups.genders.choose(rng).expect("nonempty");
                facts.insert(GroundAtom::new("belongs_to_group", &[p, g]));
            }
        }
    }
    let story0 = Story::new(facts.clone(), Vec::new(), entities.clone()).ok()?;
    if !solve(world, &story0, DEFAULT_REFINEMENT_CAP).ok()?.is_consistent() {
        return None;
    }

    let target_facts = rng.gen_range(cfg.fact_range.0..=cfg.fact_range.1);
    let n_amb = rng
        .gen_range(cfg.ambiguity_range.0..=cfg.ambiguity_range.1)
        .min(target_facts.saturating_sub(facts.len()));
    let target_plain = target_facts - n_amb;

    // Usable predicates given the sampled entity kinds.
    let usable: Vec<&PredicateSpec> = cfg
        .predicates
        .iter()
        .filter(|p| match p.signature {
            KindSignature::PersonPerson => persons.len() >= 2,
            KindSignature::PersonPlace => !persons.is_empty() && !places.is_empty(),
            sig => !persons.is_empty() && !groups.constants_for(sig).is_empty(),
        })
        .collect();
    if usable.is_empty() {
        return None;
    }
    let weights = WeightedIndex::new(usable.iter().map(|p| p.weight)).ok()?;

    let mut story = story0;
    while story.facts.len() < target_plain {
        let mut rejections = 0u32;
        loop {
            let spec = usable[weights.sample(rng)];
            let fact = sample_fact(spec, groups, &persons, &places, rng);
            let fresh = !story.facts.contains(&fact);
            let mut ok = false;
            if fresh {
                story.facts.insert(fact.clone());
                ok = solve(world, &story, DEFAULT_REFINEMENT_CAP)
                    .map(|r| r.is_consistent())
                    .unwrap_or(false);
                if !ok {
                    story.facts.remove(&fact);
                }
            }
            if ok {
                break;
            }
            rejections += 1;
            *rejected_total += 1;
            if rejections > cfg.max_fact_rejections {
                return None;
            }
        }
    }

    // Ambiguity injection.
    for _ in 0..n_amb {
        let mut rejections = 0u32;
        loop {
            if let Some(card) = sample_ambiguous(cfg, &story, &usable, &weights, &persons, &places, rng) {
                story.ambiguous.push(card);
                if story.validate_ok()
                    && solve(world, &story, DEFAULT_REFINEMENT_CAP)
                        .map(|r| r.is_consistent())
                        .unwrap_or(false)
                {
                    break;
                }
                story.ambiguous.pop();
            }
            rejections += 1;
            *rejected_total += 1;
            if rejections > cfg.max_fact_rejections {
                return None;
            }
        }
    }

    // Final gate: at least one answer set and one entailed atom.
    let result = solve(world, &story, DEFAULT_REFINEMENT_CAP).ok()?;
    if result.is_consistent() && !result.entailed.is_empty() {
        Some(story)
    } else {
        None
    }
}

fn sample_fact(
    spec: &PredicateSpec,
    groups: &ReservedGroups,
    persons: &[String],
    places: &[String],
    rng: &mut ChaCha8Rng,
) -> GroundAtom {
    let person = persons.choose(rng).expect("persons nonempty").clone();
    let second = match spec.signature {
        KindSignature::PersonPerson => loop {
            let q = persons.choose(rng).expect("nonempty");
            if *q != person {
                break q.clone();
            }
        },
        KindSignature::PersonPlace => places.choose(rng).expect("nonempty").clone(),
        sig => groups.constants_for(sig).choose(rng).expect("nonempty").clone(),
    };
    GroundAtom::new(spec.name.clone(), &[&person, &second])
}

/// Builds one ambiguous fact in an admissible shape: a fixed first entity
/// with 2–3 alternative second arguments of the matching kind.
fn sample_ambiguous(
    cfg: &GenConfig,
    story: &Story,
    usable: &[&PredicateSpec],
    weights: &WeightedIndex<f64>,
    persons: &[String],
    places: &[String],
    rng: &mut ChaCha8Rng,
) -> Option<CardinalityFact> {
    // Only entity-valued second arguments are admissible shapes.
    let spec = usable[weights.sample(rng)];
    let pool: &[String] = match spec.signature {
        KindSignature::PersonPerson => persons,
        KindSignature::PersonPlace => places,
        _ => return None,
    };
    let first = persons.choose(rng)?.clone();
    let k = if cfg.three_choice_weight > 0.0 && rng.gen_bool(cfg.three_choice_weight) { 3 } else { 2 };
    let taken: BTreeSet<GroundAtom> = story
        .ambiguous
        .iter()
        .flat_map(|c| c.choices.iter().filter_map(GroundAtom::from_atom))
        .collect();
    let mut candidates: Vec<&String> = pool
        .iter()
        .filter(|q| **q != first)
        .filter(|q| {
            let ga = GroundAtom::new(spec.name.clone(), &[&first, q]);
            !story.facts.contains(&ga) && !taken.contains(&ga)
        })
        .collect();
    if candidates.len() < k {
        return None;
    }
    candidates.shuffle(rng);
    let mut choices: Vec<Atom> = candidates[..k]
        .iter()
        .map(|q| {
            Atom::new(
                spec.name.clone(),
                vec![Term::Constant(first.clone()), Term::Constant((*q).clone())],
            )
        })
        .collect();
    choices.sort_by_key(|a| a.to_string());
    let upper = if rng.gen_bool(cfg.exactly_one_weight) { 1 } else { k as u32 };
    Some(CardinalityFact { lower: 1, upper, choices })
}

impl Story {
    /// Cheap re-validation used after speculative mutation.
    fn validate_ok(&self) -> bool {
        Story::new(self.facts.clone(), self.ambiguous.clone(), self.entities.clone()).is_ok()
    }
}

/// Harvests up to `max_instances` problem instances from the entailed atoms
/// of a story, deterministically spread over the sorted query pairs.
pub fn harvest_instances(
    world: &Program,
    record: &GenRecord,
    limits: &SearchLimits,
    max_instances: usize,
) -> anyhow::Result<Vec<ProblemInstance>> {
    let result = solve(world, &record.story, DEFAULT_REFINEMENT_CAP)?;
    let pairs: BTreeSet<(String, String)> = result
        .entailed
        .iter()
        .filter(|a| a.args.len() == 2)
        .filter(|a| {
            a.args.iter().all(|c| {
                record.story.entities.get(c).is_some_and(|k| *k != EntityKind::Reserved)
            })
        })
        .map(|a| (a.args[0].clone(), a.args[1].clone()))
        .collect();
    let pairs: Vec<(String, String)> = pairs.into_iter().collect();
    let chosen: Vec<&(String, String)> = if pairs.len() <= max_instances {
        pairs.iter().collect()
    } else {
        (0..max_instances).map(|i| &pairs[i * pairs.len() / max_instances]).collect()
    };
    let provenance = Provenance {
        seed: Some(record.seed),
        person_percent: Some(record.person_percent),
        no_gender_assign: Some(record.no_gender_assign),
    };
    let mut out = Vec::new();
    for (a, b) in chosen {
        match build_instance(world, &record.story, a, b, provenance.clone(), Vec::new(), limits) {
            Ok(inst) => out.push(inst),
            // Queries whose proof search exhausts its budget are skipped
            // rather than failing the whole harvest.
            Err(e) if matches!(
                e.downcast_ref::<crate::error::ProofError>(),
                Some(crate::error::ProofError::Budget(_))
            ) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
