//! Abstract syntax for the restricted rule language.
//!
//! The fragment covers exactly what world and story files need: definite
//! rules `head :- body.`, constraints `:- body.`, plain facts, and ground
//! cardinality facts `l{a1; ...; ak}u` with `k ∈ {2,3}` and bounds `(1,1)`
//! or `(1,k)`.  The only builtin is the inequality literal `X != Y`.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ParseError;

/// A variable or constant occurring in an atom.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    /// Starts with an uppercase letter.
    Variable(String),
    /// Starts with a lowercase letter or digit.
    Constant(String),
}

impl Term {
    pub fn name(&self) -> &str {
        match self {
            Term::Variable(n) | Term::Constant(n) => n,
        }
    }

    pub fn is_variable(&self) -> bool {
        matches!(self, Term::Variable(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A predicate applied to terms, e.g. `living_in(X, kgp)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom { predicate: predicate.into(), args }
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_variable())
    }

    /// Variables occurring in the atom, in order of first occurrence.
    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter(|t| t.is_variable()).map(|t| t.name())
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

/// One literal in a rule body: an atom or an inequality between two terms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BodyLiteral {
    Atom(Atom),
    NotEqual(Term, Term),
}

impl fmt::Display for BodyLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BodyLiteral::Atom(a) => write!(f, "{a}"),
            BodyLiteral::NotEqual(x, y) => write!(f, "{x} != {y}"),
        }
    }
}

/// A statement of the rule language.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rule {
    /// `head :- body.` with a nonempty body.
    Definite { head: Atom, body: Vec<BodyLiteral> },
    /// `:- body.` — the body atoms may never be jointly true.
    Constraint { body: Vec<BodyLiteral> },
    /// `head.`
    Fact(Atom),
    /// `l{a1; ...; ak}u.` — between `l` and `u` of the choices are true.
    Cardinality(CardinalityFact),
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn body(f: &mut fmt::Formatter<'_>, lits: &[BodyLiteral]) -> fmt::Result {
            for (i, l) in lits.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{l}")?;
            }
            Ok(())
        }
        match self {
            Rule::Definite { head, body: b } => {
                write!(f, "{head} :- ")?;
                body(f, b)?;
                f.write_str(".")
            }
            Rule::Constraint { body: b } => {
                f.write_str(":- ")?;
                body(f, b)?;
                f.write_str(".")
            }
            Rule::Fact(a) => write!(f, "{a}."),
            Rule::Cardinality(c) => write!(f, "{c}"),
        }
    }
}

/// A ground cardinality fact `l{a1; ...; ak}u`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CardinalityFact {
    pub lower: u32,
    pub upper: u32,
    pub choices: Vec<Atom>,
}

impl CardinalityFact {
    /// Checks the fragment restrictions: ground choices sharing one predicate
    /// and first argument, `k ∈ {2,3}`, bounds `(1,1)` or `(1,k)`.
    pub fn check(&self) -> Result<(), String> {
        let k = self.choices.len();
        if !(2..=3).contains(&k) {
            return Err(format!("cardinality fact must list 2 or 3 choices, found {k}"));
        }
        let k = k as u32;
        if !(self.lower == 1 && (self.upper == 1 || self.upper == k)) {
            return Err(format!(
                "bounds must be (1,1) or (1,{k}), found ({},{})",
                self.lower, self.upper
            ));
        }
        let first = &self.choices[0];
        if first.args.is_empty() {
            return Err("choice atoms must have at least one argument".into());
        }
        for c in &self.choices {
            if !c.is_ground() {
                return Err(format!("choice atom `{c}` is not ground"));
            }
            if c.predicate != first.predicate {
                return Err("all choices must share one predicate".into());
            }
            if c.args.first() != first.args.first() {
                return Err("all choices must share the same first argument".into());
            }
        }
        let distinct: BTreeSet<_> = self.choices.iter().collect();
        if distinct.len() != self.choices.len() {
            return Err("choice atoms must be pairwise distinct".into());
        }
        Ok(())
    }

    /// All admissible selections, as sorted index lists into `choices`.
    ///
    /// `(1,1)` yields the singletons; `(1,k)` yields every nonempty subset.
    pub fn admissible_selections(&self) -> Vec<Vec<usize>> {
        let k = self.choices.len();
        if self.upper == 1 {
            (0..k).map(|i| vec![i]).collect()
        } else {
            (1u32..(1 << k)).map(|mask| (0..k).filter(|i| mask >> i & 1 == 1).collect()).collect()
        }
    }
}

impl fmt::Display for CardinalityFact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{{", self.lower)?;
        for (i, c) in self.choices.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "}}{}.", self.upper)
    }
}

/// A parsed rule file: statements plus the predicate arity table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    pub rules: Vec<Rule>,
    /// Predicate name → arity, covering every predicate that occurs anywhere.
    pub arities: BTreeMap<String, usize>,
    /// Ignored directives and other non-fatal notes collected while parsing.
    pub warnings: Vec<String>,
}

impl Program {
    /// Builds a program, checking arity consistency and cardinality shape.
    ///
    /// `lines` gives the source line of each rule for error reporting; pass
    /// an empty slice when the rules were constructed programmatically.
    pub fn from_rules(rules: Vec<Rule>, lines: &[usize]) -> Result<Self, ParseError> {
        let mut arities: BTreeMap<String, usize> = BTreeMap::new();
        let line_of = |i: usize| lines.get(i).copied().unwrap_or(0);
        for (i, rule) in rules.iter().enumerate() {
            let mut register = |atom: &Atom| -> Result<(), ParseError> {
                match arities.get(&atom.predicate) {
                    Some(&a) if a != atom.args.len() => Err(ParseError::ArityConflict {
                        predicate: atom.predicate.clone(),
                        expected: a,
                        found: atom.args.len(),
                        line: line_of(i),
                    }),
                    Some(_) => Ok(()),
                    None => {
                        arities.insert(atom.predicate.clone(), atom.args.len());
                        Ok(())
                    }
                }
            };
            match rule {
                Rule::Definite { head, body } => {
                    register(head)?;
                    for l in body {
                        if let BodyLiteral::Atom(a) = l {
                            register(a)?;
                        }
                    }
                }
                Rule::Constraint { body } => {
                    for l in body {
                        if let BodyLiteral::Atom(a) = l {
                            register(a)?;
                        }
                    }
                }
                Rule::Fact(a) => register(a)?,
                Rule::Cardinality(c) => {
                    c.check().map_err(|msg| ParseError::BadCardinality {
                        line: line_of(i),
                        msg,
                    })?;
                    for a in &c.choices {
                        register(a)?;
                    }
                }
            }
        }
        Ok(Program { rules, arities, warnings: Vec::new() })
    }

    pub fn definites(&self) -> impl Iterator<Item = (usize, &Atom, &[BodyLiteral])> {
        self.rules.iter().enumerate().filter_map(|(i, r)| match r {
            Rule::Definite { head, body } => Some((i, head, body.as_slice())),
            _ => None,
        })
    }

    pub fn constraints(&self) -> impl Iterator<Item = (usize, &[BodyLiteral])> {
        self.rules.iter().enumerate().filter_map(|(i, r)| match r {
            Rule::Constraint { body } => Some((i, body.as_slice())),
            _ => None,
        })
    }

    pub fn facts(&self) -> impl Iterator<Item = &Atom> {
        self.rules.iter().filter_map(|r| match r {
            Rule::Fact(a) => Some(a),
            _ => None,
        })
    }

    pub fn cardinalities(&self) -> impl Iterator<Item = &CardinalityFact> {
        self.rules.iter().filter_map(|r| match r {
            Rule::Cardinality(c) => Some(c),
            _ => None,
        })
    }

    /// Every constant mentioned anywhere in the program, sorted.
    pub fn constants(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut atom = |a: &Atom| {
            for t in &a.args {
                if let Term::Constant(c) = t {
                    out.insert(c.clone());
                }
            }
        };
        for rule in &self.rules {
            match rule {
                Rule::Definite { head, body } => {
                    atom(head);
                    for l in body {
                        if let BodyLiteral::Atom(a) = l {
                            atom(a);
                        }
                    }
                }
                Rule::Constraint { body } => {
                    for l in body {
                        if let BodyLiteral::Atom(a) = l {
                            atom(a);
                        }
                    }
                }
                Rule::Fact(a) => atom(a),
                Rule::Cardinality(c) => c.choices.iter().for_each(&mut atom),
            }
        }
        out
    }
}

/// Prints a program as parseable source, one rule per line.
pub fn serialize_program(p: &Program) -> String {
    let mut out = String::new();
    for rule in &p.rules {
        out.push_str(&rule.to_string());
        out.push('\n');
    }
    out
}
