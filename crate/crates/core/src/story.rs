//! Ground stories: plain facts, ambiguous cardinality facts, and entities.
//!
//! Story files use the same surface syntax as rule files but may only
//! contain facts and cardinality facts.  Entity kinds are declared inline
//! with `is_person(c).` / `is_place(c).` tags; constants that appear in the
//! world program's own facts (e.g. `male`, `underage`, `no_sons`) are
//! reserved group/property constants, not entities.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::StoryError;
use crate::syntax::{Atom, CardinalityFact, Program, Rule, Term};

/// Predicate used to tag person entities in story files.
pub const PERSON_TAG: &str = "is_person";
/// Predicate used to tag place entities in story files.
pub const PLACE_TAG: &str = "is_place";

/// A variable-free atom.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl GroundAtom {
    pub fn new(predicate: impl Into<String>, args: &[&str]) -> Self {
        GroundAtom {
            predicate: predicate.into(),
            args: args.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn from_atom(atom: &Atom) -> Option<Self> {
        if !atom.is_ground() {
            return None;
        }
        Some(GroundAtom {
            predicate: atom.predicate.clone(),
            args: atom.args.iter().map(|t| t.name().to_string()).collect(),
        })
    }

    pub fn to_atom(&self) -> Atom {
        Atom::new(
            self.predicate.clone(),
            self.args.iter().map(|a| Term::Constant(a.clone())).collect(),
        )
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.predicate, self.args.join(", "))
    }
}

/// Kind tag for a constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Person,
    Place,
    /// Group/property constant from the world vocabulary (`male`, `underage`,
    /// `no_sons`, ...); never an entity for metric purposes.
    Reserved,
}

/// A set of ground facts over typed entities, with optional ambiguity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Story {
    pub facts: BTreeSet<GroundAtom>,
    /// Ambiguous cardinality facts; their order is part of story identity
    /// (refinements are enumerated in this order).
    pub ambiguous: Vec<CardinalityFact>,
    pub entities: BTreeMap<String, EntityKind>,
}

impl Story {
    /// Builds a story, validating the construction-time invariants:
    /// all constants known, cardinality shapes legal, and alternatives of
    /// distinct ambiguous facts disjoint.
    pub fn new(
        facts: BTreeSet<GroundAtom>,
        ambiguous: Vec<CardinalityFact>,
        entities: BTreeMap<String, EntityKind>,
    ) -> Result<Self, StoryError> {
        let story = Story { facts, ambiguous, entities };
        story.validate()?;
        Ok(story)
    }

    fn validate(&self) -> Result<(), StoryError> {
        for fact in &self.facts {
            for c in &fact.args {
                if !self.entities.contains_key(c) {
                    return Err(StoryError::UnknownConstant(c.clone()));
                }
            }
        }
        let mut seen: BTreeSet<GroundAtom> = BTreeSet::new();
        for card in &self.ambiguous {
            card.check().map_err(StoryError::BadCardinality)?;
            for choice in &card.choices {
                let ga = GroundAtom::from_atom(choice)
                    .ok_or_else(|| StoryError::NonGroundFact(choice.to_string()))?;
                for c in &ga.args {
                    if !self.entities.contains_key(c) {
                        return Err(StoryError::UnknownConstant(c.clone()));
                    }
                }
                if !seen.insert(ga.clone()) {
                    return Err(StoryError::OverlappingAmbiguity { atom: ga.to_string() });
                }
            }
        }
        Ok(())
    }

    /// Number of ambiguous facts (the story's N).
    pub fn ambiguity_count(&self) -> usize {
        self.ambiguous.len()
    }

    /// Plain facts plus one slot per ambiguous fact.
    pub fn fact_count(&self) -> usize {
        self.facts.len() + self.ambiguous.len()
    }

    pub fn kind_of(&self, constant: &str) -> EntityKind {
        self.entities.get(constant).copied().unwrap_or(EntityKind::Reserved)
    }

    /// Non-reserved entity names, sorted.
    pub fn proper_entities(&self) -> impl Iterator<Item = (&str, EntityKind)> {
        self.entities
            .iter()
            .filter(|(_, k)| **k != EntityKind::Reserved)
            .map(|(n, k)| (n.as_str(), *k))
    }

    /// Loads a story from parsed source. `world` supplies predicate arities
    /// and the reserved constants (those occurring in world facts).
    pub fn from_program(parsed: &Program, world: &Program) -> Result<Self, StoryError> {
        let reserved: BTreeSet<String> = world
            .facts()
            .flat_map(|a| a.args.iter().map(|t| t.name().to_string()))
            .collect();
        let mut facts = BTreeSet::new();
        let mut ambiguous = Vec::new();
        let mut entities: BTreeMap<String, EntityKind> = BTreeMap::new();
        let mut declared: BTreeMap<String, EntityKind> = BTreeMap::new();
        let touch = |entities: &mut BTreeMap<String, EntityKind>, c: &str| {
            if reserved.contains(c) {
                entities.insert(c.to_string(), EntityKind::Reserved);
            } else {
                entities.entry(c.to_string()).or_insert(EntityKind::Person);
            }
        };
        for rule in &parsed.rules {
            match rule {
                Rule::Fact(a) => {
                    let ga = GroundAtom::from_atom(a)
                        .ok_or_else(|| StoryError::NonGroundFact(a.to_string()))?;
                    match ga.predicate.as_str() {
                        PERSON_TAG if ga.args.len() == 1 => {
                            declared.insert(ga.args[0].clone(), EntityKind::Person);
                        }
                        PLACE_TAG if ga.args.len() == 1 => {
                            declared.insert(ga.args[0].clone(), EntityKind::Place);
                        }
                        _ => {
                            for c in &ga.args {
                                touch(&mut entities, c);
                            }
                            facts.insert(ga);
                        }
                    }
                }
                Rule::Cardinality(c) => {
                    for choice in &c.choices {
                        for t in &choice.args {
                            touch(&mut entities, t.name());
                        }
                    }
                    ambiguous.push(c.clone());
                }
                other => return Err(StoryError::RuleInStory(other.to_string())),
            }
        }
        for (c, kind) in declared {
            // Explicit tags override the person default, and may introduce
            // entities that no fact mentions yet.
            if !reserved.contains(&c) {
                entities.insert(c, kind);
            }
        }
        Story::new(facts, ambiguous, entities)
    }

    /// Prints the story as parseable source: kind tags first, then plain
    /// facts, then ambiguous facts.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (name, kind) in &self.entities {
            match kind {
                EntityKind::Person => out.push_str(&format!("{PERSON_TAG}({name}).\n")),
                EntityKind::Place => out.push_str(&format!("{PLACE_TAG}({name}).\n")),
                EntityKind::Reserved => {}
            }
        }
        for fact in &self.facts {
            out.push_str(&fact.to_string());
            out.push_str(".\n");
        }
        for card in &self.ambiguous {
            out.push_str(&card.to_string());
            out.push('\n');
        }
        out
    }

    /// Applies an entity renaming to the whole story. Names not in the map
    /// are kept (reserved constants are never renamed).
    pub fn rename(&self, map: &BTreeMap<String, String>) -> Story {
        let rn = |c: &str| map.get(c).cloned().unwrap_or_else(|| c.to_string());
        let facts = self
            .facts
            .iter()
            .map(|f| GroundAtom {
                predicate: f.predicate.clone(),
                args: f.args.iter().map(|a| rn(a)).collect(),
            })
            .collect();
        let ambiguous = self
            .ambiguous
            .iter()
            .map(|c| CardinalityFact {
                lower: c.lower,
                upper: c.upper,
                choices: c
                    .choices
                    .iter()
                    .map(|a| Atom::new(
                        a.predicate.clone(),
                        a.args.iter().map(|t| Term::Constant(rn(t.name()))).collect(),
                    ))
                    .collect(),
            })
            .collect();
        let entities = self.entities.iter().map(|(n, k)| (rn(n), *k)).collect();
        Story { facts, ambiguous, entities }
    }
}
