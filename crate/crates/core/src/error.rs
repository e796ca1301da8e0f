//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised while parsing rule or story source text.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    /// Malformed input that does not fit the grammar.
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    /// The same predicate was used with two different arities.
    #[error(
        "arity conflict for predicate `{predicate}` at line {line}: \
         used with {found} argument(s) but previously with {expected}"
    )]
    ArityConflict { predicate: String, expected: usize, found: usize, line: usize },
    /// A cardinality fact violating the supported fragment.
    #[error("malformed cardinality fact at line {line}: {msg}")]
    BadCardinality { line: usize, msg: String },
}

/// Errors raised when assembling or validating a story.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum StoryError {
    #[error("story fact `{0}` contains a variable; stories must be ground")]
    NonGroundFact(String),
    #[error("story may not contain rules or constraints (found `{0}`)")]
    RuleInStory(String),
    #[error("constant `{0}` does not appear in the story's entity set")]
    UnknownConstant(String),
    #[error("atom `{atom}` overlaps between two distinct ambiguous facts")]
    OverlappingAmbiguity { atom: String },
    #[error("{0}")]
    BadCardinality(String),
}

/// Errors raised by the entailment engine.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SolveError {
    /// The refinement count exceeded the configured cap.
    #[error("story has {count} refinements, exceeding the cap of {cap}")]
    RefinementOverflow { count: u64, cap: u64 },
    /// Entailment was queried on a story with no answer set.
    #[error("story is inconsistent: every refinement violates a constraint")]
    Inconsistent,
    /// A query mentioned a constant outside the story.
    #[error("query constant `{0}` is not a story entity")]
    UnknownEntity(String),
    /// World facts must be ground (variables in facts would be choice rules).
    #[error("world fact `{0}` is not ground")]
    NonGroundWorldFact(String),
}

/// Errors raised during proof search.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProofError {
    #[error("goal `{0}` is not derivable in this refinement")]
    NotDerivable(String),
    #[error("proof search exceeded its budget of {0} visits")]
    Budget(usize),
}

/// Errors raised by the story generator.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GenError {
    #[error(
        "story generation failed after {retries} attempts \
         ({rejected_facts} facts rejected in total)"
    )]
    AttemptsExhausted { retries: u32, rejected_facts: u64 },
    #[error("invalid generator configuration: {0}")]
    BadConfig(String),
    #[error("world has no predicate usable for generation ({0})")]
    UnusableWorld(String),
}

/// Errors raised while stitching two instances together.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum StitchError {
    #[error("base and donor stories must be unambiguous (pass --allow-ambiguous to override)")]
    AmbiguousInput,
    #[error("donor query fact `{donor}` does not match lemma `{lemma}` after renaming")]
    LemmaMismatch { donor: String, lemma: String },
    #[error("renaming collision: `{0}` would merge two distinct donor entities")]
    RenamingCollision(String),
    #[error("entity kinds disagree at alignment point `{0}`")]
    KindMismatch(String),
    #[error("stitched story is inconsistent")]
    Inconsistent,
    #[error("stitched story no longer entails the base labels for the query")]
    EntailmentLost,
}
