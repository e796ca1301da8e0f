//! Hand-rolled lexer and recursive-descent parser for the rule language.
//!
//! The grammar is a small slice of Clingo syntax: statements end with `.`,
//! comments run from `%` to end of line, and unsupported directives
//! (`#show`, `#const`, ...) are skipped with a warning rather than rejected,
//! so published rule files load unmodified.

use crate::error::ParseError;
use crate::syntax::{Atom, BodyLiteral, CardinalityFact, Program, Rule, Term};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    /// Constant identifier or integer literal (lowercase/digit start).
    Const(String),
    /// Variable identifier (uppercase or `_` start).
    Var(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Dot,
    /// `:-`
    If,
    /// `!=`
    Neq,
    /// `#name`, skipped up to the next `.`.
    Directive(String),
}

#[derive(Debug, Clone, Copy)]
struct Pos {
    line: usize,
    col: usize,
}

struct Lexer<'a> {
    src: &'a [u8],
    i: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src: src.as_bytes(), i: 0, line: 1, col: 1 }
    }

    fn bump(&mut self) -> u8 {
        let c = self.src[self.i];
        self.i += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        c
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.i).copied()
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        ParseError::Syntax { line: self.line, col: self.col, msg: msg.into() }
    }

    fn ident(&mut self) -> String {
        let start = self.i;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.bump();
        }
        String::from_utf8_lossy(&self.src[start..self.i]).into_owned()
    }

    fn tokens(mut self) -> Result<Vec<(Tok, Pos)>, ParseError> {
        let mut out = Vec::new();
        while let Some(c) = self.peek() {
            let pos = Pos { line: self.line, col: self.col };
            match c {
                b' ' | b'\t' | b'\r' | b'\n' => {
                    self.bump();
                }
                b'%' => {
                    while matches!(self.peek(), Some(c) if c != b'\n') {
                        self.bump();
                    }
                }
                b'(' => {
                    self.bump();
                    out.push((Tok::LParen, pos));
                }
                b')' => {
                    self.bump();
                    out.push((Tok::RParen, pos));
                }
                b'{' => {
                    self.bump();
                    out.push((Tok::LBrace, pos));
                }
                b'}' => {
                    self.bump();
                    out.push((Tok::RBrace, pos));
                }
                b',' => {
                    self.bump();
                    out.push((Tok::Comma, pos));
                }
                b';' => {
                    self.bump();
                    out.push((Tok::Semi, pos));
                }
                b'.' => {
                    self.bump();
                    out.push((Tok::Dot, pos));
                }
                b':' => {
                    self.bump();
                    if self.peek() == Some(b'-') {
                        self.bump();
                        out.push((Tok::If, pos));
                    } else {
                        return Err(self.error("expected `:-`"));
                    }
                }
                b'!' => {
                    self.bump();
                    if self.peek() == Some(b'=') {
                        self.bump();
                        out.push((Tok::Neq, pos));
                    } else {
                        return Err(self.error("expected `!=`"));
                    }
                }
                b'#' => {
                    // Swallow the whole directive here: its body may use
                    // characters outside the rule grammar (e.g. `p/2`).
                    self.bump();
                    let name = self.ident();
                    while matches!(self.peek(), Some(c) if c != b'.') {
                        self.bump();
                    }
                    if self.peek() == Some(b'.') {
                        self.bump();
                    }
                    out.push((Tok::Directive(name), pos));
                }
                c if c.is_ascii_lowercase() || c.is_ascii_digit() => {
                    out.push((Tok::Const(self.ident()), pos));
                }
                c if c.is_ascii_uppercase() || c == b'_' => {
                    out.push((Tok::Var(self.ident()), pos));
                }
                c => {
                    return Err(self.error(format!("unexpected character `{}`", c as char)));
                }
            }
        }
        Ok(out)
    }
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    i: usize,
    warnings: Vec<String>,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|(t, _)| t)
    }

    fn pos(&self) -> Pos {
        self.toks
            .get(self.i)
            .or_else(|| self.toks.last())
            .map(|&(_, p)| p)
            .unwrap_or(Pos { line: 1, col: 1 })
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        let p = self.pos();
        ParseError::Syntax { line: p.line, col: p.col, msg: msg.into() }
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.i).map(|(t, _)| t.clone());
        self.i += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&want) {
            self.i += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek() {
            Some(Tok::Const(_)) => match self.bump() {
                Some(Tok::Const(n)) => Ok(Term::Constant(n)),
                _ => unreachable!(),
            },
            Some(Tok::Var(_)) => match self.bump() {
                Some(Tok::Var(n)) => Ok(Term::Variable(n)),
                _ => unreachable!(),
            },
            _ => Err(self.error("expected a term")),
        }
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        let name = match self.peek() {
            Some(Tok::Const(_)) => match self.bump() {
                Some(Tok::Const(n)) => n,
                _ => unreachable!(),
            },
            _ => return Err(self.error("expected a predicate name")),
        };
        self.expect(Tok::LParen, "`(`")?;
        let mut args = vec![self.term()?];
        while self.peek() == Some(&Tok::Comma) {
            self.i += 1;
            args.push(self.term()?);
        }
        self.expect(Tok::RParen, "`)` or `,`")?;
        Ok(Atom::new(name, args))
    }

    fn body(&mut self) -> Result<Vec<BodyLiteral>, ParseError> {
        let mut lits = Vec::new();
        loop {
            // Lookahead: `term != term` vs a plain atom.
            let lit = match self.peek() {
                Some(Tok::Var(_)) => {
                    let x = self.term()?;
                    self.expect(Tok::Neq, "`!=`")?;
                    BodyLiteral::NotEqual(x, self.term()?)
                }
                Some(Tok::Const(_)) if self.toks.get(self.i + 1).map(|(t, _)| t) != Some(&Tok::LParen) => {
                    let x = self.term()?;
                    self.expect(Tok::Neq, "`!=` (bare constants are only allowed in inequalities)")?;
                    BodyLiteral::NotEqual(x, self.term()?)
                }
                _ => BodyLiteral::Atom(self.atom()?),
            };
            lits.push(lit);
            if self.peek() == Some(&Tok::Comma) {
                self.i += 1;
            } else {
                break;
            }
        }
        Ok(lits)
    }

    /// `l { atom ; ... } u .` — also accepts `,` as the choice separator.
    fn cardinality(&mut self, lower_tok: String) -> Result<CardinalityFact, ParseError> {
        let line = self.pos().line;
        let lower: u32 = lower_tok
            .parse()
            .map_err(|_| ParseError::BadCardinality { line, msg: format!("bad lower bound `{lower_tok}`") })?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut choices = vec![self.atom()?];
        while matches!(self.peek(), Some(Tok::Semi) | Some(Tok::Comma)) {
            self.i += 1;
            choices.push(self.atom()?);
        }
        self.expect(Tok::RBrace, "`}` or `;`")?;
        let upper = match self.bump() {
            Some(Tok::Const(n)) => n
                .parse()
                .map_err(|_| ParseError::BadCardinality { line, msg: format!("bad upper bound `{n}`") })?,
            _ => return Err(ParseError::BadCardinality { line, msg: "missing upper bound".into() }),
        };
        let fact = CardinalityFact { lower, upper, choices };
        fact.check().map_err(|msg| ParseError::BadCardinality { line, msg })?;
        Ok(fact)
    }

    fn statement(&mut self) -> Result<Option<Rule>, ParseError> {
        match self.peek() {
            Some(Tok::Directive(_)) => {
                let line = self.pos().line;
                let name = match self.bump() {
                    Some(Tok::Directive(n)) => n,
                    _ => unreachable!(),
                };
                self.warnings.push(format!("line {line}: ignoring unsupported directive `#{name}`"));
                Ok(None)
            }
            Some(Tok::If) => {
                self.i += 1;
                let body = self.body()?;
                self.expect(Tok::Dot, "`.`")?;
                Ok(Some(Rule::Constraint { body }))
            }
            Some(Tok::Const(_)) => {
                // A constant token opens either a cardinality fact (`1{...`)
                // or an atom (fact or definite rule head).
                if self.toks.get(self.i + 1).map(|(t, _)| t) == Some(&Tok::LBrace) {
                    let lower = match self.bump() {
                        Some(Tok::Const(n)) => n,
                        _ => unreachable!(),
                    };
                    let card = self.cardinality(lower)?;
                    self.expect(Tok::Dot, "`.`")?;
                    return Ok(Some(Rule::Cardinality(card)));
                }
                let head = self.atom()?;
                match self.bump() {
                    Some(Tok::Dot) => Ok(Some(Rule::Fact(head))),
                    Some(Tok::If) => {
                        let body = self.body()?;
                        self.expect(Tok::Dot, "`.`")?;
                        Ok(Some(Rule::Definite { head, body }))
                    }
                    _ => {
                        self.i -= 1;
                        Err(self.error("expected `.` or `:-` after rule head"))
                    }
                }
            }
            Some(_) => Err(self.error("expected a rule, fact, constraint or cardinality fact")),
            None => Ok(None),
        }
    }
}

/// Parses rule source text into a [`Program`].
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let toks = Lexer::new(text).tokens()?;
    let mut p = Parser { toks, i: 0, warnings: Vec::new() };
    let mut rules = Vec::new();
    let mut lines = Vec::new();
    while p.peek().is_some() {
        let line = p.pos().line;
        if let Some(rule) = p.statement()? {
            rules.push(rule);
            lines.push(line);
        }
    }
    let mut prog = Program::from_rules(rules, &lines)?;
    prog.warnings = p.warnings;
    Ok(prog)
}
