//! Library for generating, solving, measuring and exporting systematic
//! relational-reasoning benchmark instances.
//!
//! A benchmark instance pairs a *story* — a set of ground facts, possibly
//! including ambiguous cardinality facts — with a query pair `(source, target)`.
//! Fixed *world rules* (definite rules, constraints and always-true facts)
//! determine which relations between the two entities are entailed: a relation
//! holds exactly when it appears in every answer set of the story.  The crate
//! provides:
//!
//! * a parser and printer for the restricted rule language ([`syntax`],
//!   [`parser`]),
//! * an entailment engine based on refinement enumeration and semi-naive
//!   forward chaining ([`engine`]),
//! * minimal-proof extraction and the four difficulty metrics — depth, width,
//!   backtrack load, and off-path edge count ([`proofs`], [`metrics`],
//!   [`pathing`]),
//! * a randomized story generator ([`generator`]),
//! * split assembly, balancing, labeling and export ([`dataset`], [`encode`]),
//! * instance synthesis by stitching ([`stitch`]),
//! * the command-line front end ([`cli`]).

pub mod cli;
pub mod dataset;
pub mod encode;
pub mod engine;
pub mod error;
pub mod generator;
pub mod metrics;
pub mod parser;
pub mod pathing;
pub mod proofs;
pub mod stitch;
pub mod story;
pub mod syntax;
