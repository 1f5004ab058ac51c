//! Monadic second-order logic over the full `D`-ary tree, and the syntactic
//! translations that feed the automaton pipeline.
//!
//! The surface language is MSO with individual variables ranging over tree
//! nodes and set variables ranging over sets of nodes:
//!
//! ```text
//! formula := "true" | "false" | ID "(" term ")" | term "=" term | term "<" term
//!          | "~" formula | formula "|" formula | formula "&" formula
//!          | formula "->" formula
//!          | ("ex1"|"all1") id "." formula | ("ex2"|"all2") ID "." formula
//!          | "(" formula ")"
//! term    := id | "root" | "s" NAT "(" term ")"
//! ```
//!
//! Precedence is `~` > `&` > `|` > `->`; quantifier bodies extend maximally to
//! the right. Lowercase identifiers are individual variables, uppercase are
//! set variables, and `sd(t)` is the `d`-th successor with `d` below the tree
//! arity.
//!
//! Three intermediate dialects connect the surface syntax to automata:
//!
//! * **Relational form** ([`to_relational`]) eliminates compound terms, so
//!   the only atoms left are `X(x)`, `sd(x) = y` (the successor relation),
//!   `x = y` and `x < y` with variable arguments.
//! * **Individual-free form** ([`to_individual_free`], [`IfFormula`])
//!   replaces individuals by singleton-guarded set variables; atoms shrink to
//!   `X ⊆ Y` and `Succ_d(X,Y)`. [`to_core_if`] then removes the derived
//!   connectives so only `⊆`, `Succ_d`, `¬`, `∨`, `∃` remain — exactly the
//!   fragment the automaton compiler consumes.
//! * **FSO form** ([`FsoFormula`]) trades set variables for function
//!   variables valued in hereditarily finite sets. [`mso_to_fso`] and
//!   [`fso_to_mso`] translate back and forth; [`eval_hf`] decides the pure
//!   HF fragment by direct enumeration in `V_ω`.

use crate::hf::{self, HfError, HfSet};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

/// Errors from parsing, translating, or evaluating formulae.
#[derive(Debug, Error)]
pub enum LogicError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: u32, col: u32, msg: String },
    #[error("unknown direction {dir} at {line}:{col}: tree arity is {arity}")]
    UnknownDirection { dir: usize, arity: usize, line: u32, col: u32 },
    #[error("unbound variable `{0}` in closed formula")]
    UnboundVariable(String),
    #[error("formula is not in relational form: {0}")]
    NotRelational(String),
    #[error("HF-term is not closed: free HF-variable `{0}`")]
    NotHfClosed(String),
    #[error("free Function variable `{0}`")]
    FreeFunctionVariable(String),
    #[error("cannot evaluate in V_ω: {0} is not HF-bounded")]
    Unbounded(String),
    #[error(transparent)]
    Hf(#[from] HfError),
}

// ---------------------------------------------------------------------------
// MSO abstract syntax
// ---------------------------------------------------------------------------

/// Individual terms: variables, the root, and successors.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Root,
    Succ(usize, Box<Term>),
}

/// MSO formulae. `Or`, `Not` and the two existentials are the core; `And`,
/// `Implies` and the universals are kept as first-class derived nodes so that
/// parsing round-trips.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Formula {
    True,
    False,
    /// `X(t)`: membership of a node in a set variable.
    SetMem(String, Term),
    Eq(Term, Term),
    Lt(Term, Term),
    Not(Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    ExistsInd(String, Box<Formula>),
    ForallInd(String, Box<Formula>),
    ExistsSet(String, Box<Formula>),
    ForallSet(String, Box<Formula>),
}

impl Formula {
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }
    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }
    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }
    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }
    pub fn ex1(x: impl Into<String>, f: Formula) -> Formula {
        Formula::ExistsInd(x.into(), Box::new(f))
    }
    pub fn all1(x: impl Into<String>, f: Formula) -> Formula {
        Formula::ForallInd(x.into(), Box::new(f))
    }
    pub fn ex2(x: impl Into<String>, f: Formula) -> Formula {
        Formula::ExistsSet(x.into(), Box::new(f))
    }
    pub fn all2(x: impl Into<String>, f: Formula) -> Formula {
        Formula::ForallSet(x.into(), Box::new(f))
    }

    /// Free individual and set variables, in sorted order.
    pub fn free_vars(&self) -> (BTreeSet<String>, BTreeSet<String>) {
        let mut ind = BTreeSet::new();
        let mut set = BTreeSet::new();
        let mut bound_ind = Vec::new();
        let mut bound_set = Vec::new();
        free_walk(self, &mut bound_ind, &mut bound_set, &mut ind, &mut set);
        (ind, set)
    }
}

fn term_vars(t: &Term, bound: &[String], out: &mut BTreeSet<String>) {
    match t {
        Term::Var(x) => {
            if !bound.iter().any(|b| b == x) {
                out.insert(x.clone());
            }
        }
        Term::Root => {}
        Term::Succ(_, inner) => term_vars(inner, bound, out),
    }
}

fn free_walk(
    f: &Formula,
    bound_ind: &mut Vec<String>,
    bound_set: &mut Vec<String>,
    ind: &mut BTreeSet<String>,
    set: &mut BTreeSet<String>,
) {
    match f {
        Formula::True | Formula::False => {}
        Formula::SetMem(x, t) => {
            if !bound_set.iter().any(|b| b == x) {
                set.insert(x.clone());
            }
            term_vars(t, bound_ind, ind);
        }
        Formula::Eq(t, u) | Formula::Lt(t, u) => {
            term_vars(t, bound_ind, ind);
            term_vars(u, bound_ind, ind);
        }
        Formula::Not(a) => free_walk(a, bound_ind, bound_set, ind, set),
        Formula::Or(a, b) | Formula::And(a, b) | Formula::Implies(a, b) => {
            free_walk(a, bound_ind, bound_set, ind, set);
            free_walk(b, bound_ind, bound_set, ind, set);
        }
        Formula::ExistsInd(x, a) | Formula::ForallInd(x, a) => {
            bound_ind.push(x.clone());
            free_walk(a, bound_ind, bound_set, ind, set);
            bound_ind.pop();
        }
        Formula::ExistsSet(x, a) | Formula::ForallSet(x, a) => {
            bound_set.push(x.clone());
            free_walk(a, bound_ind, bound_set, ind, set);
            bound_set.pop();
        }
    }
}

/// Disjunction of a list; the empty disjunction is `false`.
pub fn or_all(mut fs: Vec<Formula>) -> Formula {
    match fs.len() {
        0 => Formula::False,
        1 => fs.pop().unwrap(),
        _ => {
            let mut it = fs.into_iter();
            let first = it.next().unwrap();
            it.fold(first, Formula::or)
        }
    }
}

/// Conjunction of a list; the empty conjunction is `true`.
pub fn and_all(mut fs: Vec<Formula>) -> Formula {
    match fs.len() {
        0 => Formula::True,
        1 => fs.pop().unwrap(),
        _ => {
            let mut it = fs.into_iter();
            let first = it.next().unwrap();
            it.fold(first, Formula::and)
        }
    }
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(x) => f.write_str(x),
            Term::Root => f.write_str("root"),
            Term::Succ(d, t) => write!(f, "s{d}({t})"),
        }
    }
}

// Binding strengths for the printer; a child is parenthesized when its own
// strength is below what its context requires.
const PREC_IMPLIES: u8 = 0;
const PREC_OR: u8 = 1;
const PREC_AND: u8 = 2;
const PREC_NOT: u8 = 3;
const PREC_ATOM: u8 = 4;

fn prec(f: &Formula) -> u8 {
    match f {
        Formula::Implies(..)
        | Formula::ExistsInd(..)
        | Formula::ForallInd(..)
        | Formula::ExistsSet(..)
        | Formula::ForallSet(..) => PREC_IMPLIES,
        Formula::Or(..) => PREC_OR,
        Formula::And(..) => PREC_AND,
        Formula::Not(..) => PREC_NOT,
        _ => PREC_ATOM,
    }
}

fn render_into(f: &Formula, ctx: u8, out: &mut String) {
    let wrap = prec(f) < ctx;
    if wrap {
        out.push('(');
    }
    match f {
        Formula::True => out.push_str("true"),
        Formula::False => out.push_str("false"),
        Formula::SetMem(x, t) => {
            out.push_str(x);
            out.push('(');
            out.push_str(&t.to_string());
            out.push(')');
        }
        Formula::Eq(t, u) => {
            out.push_str(&format!("{t} = {u}"));
        }
        Formula::Lt(t, u) => {
            out.push_str(&format!("{t} < {u}"));
        }
        Formula::Not(a) => {
            out.push('~');
            render_into(a, PREC_NOT, out);
        }
        Formula::Or(a, b) => {
            render_into(a, PREC_OR, out);
            out.push_str(" | ");
            render_into(b, PREC_AND, out);
        }
        Formula::And(a, b) => {
            render_into(a, PREC_AND, out);
            out.push_str(" & ");
            render_into(b, PREC_NOT, out);
        }
        Formula::Implies(a, b) => {
            render_into(a, PREC_OR, out);
            out.push_str(" -> ");
            render_into(b, PREC_IMPLIES, out);
        }
        Formula::ExistsInd(x, a) => {
            out.push_str(&format!("ex1 {x}. "));
            render_into(a, PREC_IMPLIES, out);
        }
        Formula::ForallInd(x, a) => {
            out.push_str(&format!("all1 {x}. "));
            render_into(a, PREC_IMPLIES, out);
        }
        Formula::ExistsSet(x, a) => {
            out.push_str(&format!("ex2 {x}. "));
            render_into(a, PREC_IMPLIES, out);
        }
        Formula::ForallSet(x, a) => {
            out.push_str(&format!("all2 {x}. "));
            render_into(a, PREC_IMPLIES, out);
        }
    }
    if wrap {
        out.push(')');
    }
}

impl fmt::Display for Formula {
    /// Surface-syntax rendering; parses back to an identical AST.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        render_into(self, PREC_IMPLIES, &mut out);
        f.write_str(&out)
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    SuccSym(usize),
    LParen,
    RParen,
    Dot,
    Eq,
    Lt,
    Tilde,
    Bar,
    Amp,
    Arrow,
}

struct Lexed {
    toks: Vec<(Tok, u32, u32)>,
    /// Position just past the end of input, for EOF diagnostics.
    end: (u32, u32),
}

fn lex(text: &str) -> Result<Lexed, LogicError> {
    let mut toks = Vec::new();
    let mut line: u32 = 1;
    let mut col: u32 = 1;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, col);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next().unwrap();
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            c
        };
        if c.is_whitespace() {
            bump(&mut chars);
            continue;
        }
        if c.is_ascii_alphabetic() {
            let mut word = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    word.push(bump(&mut chars));
                } else {
                    break;
                }
            }
            // `s` followed by digits only is reserved successor syntax.
            let tok = if word.len() > 1
                && word.starts_with('s')
                && word[1..].bytes().all(|b| b.is_ascii_digit())
            {
                let d = word[1..].parse::<usize>().map_err(|_| LogicError::Syntax {
                    line: tl,
                    col: tc,
                    msg: format!("direction in `{word}` is out of range"),
                })?;
                Tok::SuccSym(d)
            } else {
                Tok::Ident(word)
            };
            toks.push((tok, tl, tc));
            continue;
        }
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '.' => Tok::Dot,
            '=' => Tok::Eq,
            '<' => Tok::Lt,
            '~' => Tok::Tilde,
            '|' => Tok::Bar,
            '&' => Tok::Amp,
            '-' => {
                bump(&mut chars);
                if chars.peek() == Some(&'>') {
                    bump(&mut chars);
                    toks.push((Tok::Arrow, tl, tc));
                    continue;
                }
                return Err(LogicError::Syntax {
                    line: tl,
                    col: tc,
                    msg: "expected `->`".into(),
                });
            }
            other => {
                return Err(LogicError::Syntax {
                    line: tl,
                    col: tc,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        };
        bump(&mut chars);
        toks.push((tok, tl, tc));
    }
    Ok(Lexed { toks, end: (line, col) })
}

const KEYWORDS: [&str; 7] = ["true", "false", "root", "ex1", "all1", "ex2", "all2"];

struct Parser {
    toks: Vec<(Tok, u32, u32)>,
    pos: usize,
    end: (u32, u32),
    arity: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _, _)| t)
    }

    fn here(&self) -> (u32, u32) {
        self.toks.get(self.pos).map(|&(_, l, c)| (l, c)).unwrap_or(self.end)
    }

    fn err(&self, msg: impl Into<String>) -> LogicError {
        let (line, col) = self.here();
        LogicError::Syntax { line, col, msg: msg.into() }
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<(), LogicError> {
        if self.peek() == Some(want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn formula(&mut self) -> Result<Formula, LogicError> {
        let lhs = self.or_level()?;
        if self.peek() == Some(&Tok::Arrow) {
            self.pos += 1;
            let rhs = self.formula()?;
            Ok(Formula::implies(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn or_level(&mut self) -> Result<Formula, LogicError> {
        let mut lhs = self.and_level()?;
        while self.peek() == Some(&Tok::Bar) {
            self.pos += 1;
            let rhs = self.and_level()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_level(&mut self) -> Result<Formula, LogicError> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(&Tok::Amp) {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn binder(&mut self, uppercase: bool) -> Result<String, LogicError> {
        match self.next() {
            Some(Tok::Ident(x)) if !KEYWORDS.contains(&x.as_str()) => {
                let is_upper = x.chars().next().unwrap().is_ascii_uppercase();
                if is_upper == uppercase {
                    Ok(x)
                } else if uppercase {
                    self.pos -= 1;
                    Err(self.err(format!("set variable `{x}` must start uppercase")))
                } else {
                    self.pos -= 1;
                    Err(self.err(format!("individual variable `{x}` must start lowercase")))
                }
            }
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err("expected a variable name"))
            }
        }
    }

    fn unary(&mut self) -> Result<Formula, LogicError> {
        match self.peek() {
            Some(Tok::Tilde) => {
                self.pos += 1;
                Ok(Formula::not(self.unary()?))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let f = self.formula()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(f)
            }
            Some(Tok::Ident(w)) => match w.as_str() {
                "true" => {
                    self.pos += 1;
                    Ok(Formula::True)
                }
                "false" => {
                    self.pos += 1;
                    Ok(Formula::False)
                }
                "ex1" | "all1" | "ex2" | "all2" => {
                    let kw = w.clone();
                    self.pos += 1;
                    let x = self.binder(kw.ends_with('2'))?;
                    self.expect(&Tok::Dot, "`.` after quantified variable")?;
                    let body = self.formula()?;
                    Ok(match kw.as_str() {
                        "ex1" => Formula::ex1(x, body),
                        "all1" => Formula::all1(x, body),
                        "ex2" => Formula::ex2(x, body),
                        _ => Formula::all2(x, body),
                    })
                }
                _ if w.chars().next().unwrap().is_ascii_uppercase() => {
                    let x = w.clone();
                    self.pos += 1;
                    self.expect(&Tok::LParen, "`(` after set variable")?;
                    let t = self.term()?;
                    self.expect(&Tok::RParen, "`)`")?;
                    Ok(Formula::SetMem(x, t))
                }
                _ => self.atom_from_term(),
            },
            Some(Tok::SuccSym(_)) => self.atom_from_term(),
            _ => Err(self.err("expected a formula")),
        }
    }

    fn atom_from_term(&mut self) -> Result<Formula, LogicError> {
        let t = self.term()?;
        match self.next() {
            Some(Tok::Eq) => Ok(Formula::Eq(t, self.term()?)),
            Some(Tok::Lt) => Ok(Formula::Lt(t, self.term()?)),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err("expected `=` or `<` after term"))
            }
        }
    }

    fn term(&mut self) -> Result<Term, LogicError> {
        let (line, col) = self.here();
        match self.next() {
            Some(Tok::Ident(w)) => match w.as_str() {
                "root" => Ok(Term::Root),
                _ if KEYWORDS.contains(&w.as_str()) => {
                    self.pos -= 1;
                    Err(self.err(format!("keyword `{w}` cannot be a term")))
                }
                _ if w.chars().next().unwrap().is_ascii_lowercase() => Ok(Term::Var(w)),
                _ => {
                    self.pos -= 1;
                    Err(self.err(format!("set variable `{w}` cannot appear in a term")))
                }
            },
            Some(Tok::SuccSym(d)) => {
                if d >= self.arity {
                    return Err(LogicError::UnknownDirection { dir: d, arity: self.arity, line, col });
                }
                self.expect(&Tok::LParen, "`(` after successor")?;
                let t = self.term()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(Term::Succ(d, Box::new(t)))
            }
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err("expected a term"))
            }
        }
    }
}

/// Parse a formula (free variables allowed) over a `arity`-ary tree.
pub fn parse(text: &str, arity: usize) -> Result<Formula, LogicError> {
    assert!(arity >= 1, "tree arity must be at least 1");
    let lexed = lex(text)?;
    let mut p = Parser { toks: lexed.toks, pos: 0, end: lexed.end, arity };
    let f = p.formula()?;
    if p.pos != p.toks.len() {
        return Err(p.err("trailing input after formula"));
    }
    Ok(f)
}

/// Parse a closed sentence; any free variable is an error.
pub fn parse_sentence(text: &str, arity: usize) -> Result<Formula, LogicError> {
    let f = parse(text, arity)?;
    let (ind, set) = f.free_vars();
    if let Some(x) = ind.into_iter().chain(set).next() {
        return Err(LogicError::UnboundVariable(x));
    }
    Ok(f)
}

// ---------------------------------------------------------------------------
// Relational form
// ---------------------------------------------------------------------------

struct FreshVars {
    used: BTreeSet<String>,
    next: usize,
}

impl FreshVars {
    fn new(f: &Formula) -> FreshVars {
        let mut used = BTreeSet::new();
        collect_ind_names(f, &mut used);
        FreshVars { used, next: 0 }
    }

    fn fresh(&mut self) -> String {
        loop {
            let cand = format!("z{}", self.next);
            self.next += 1;
            if self.used.insert(cand.clone()) {
                return cand;
            }
        }
    }
}

fn collect_ind_names(f: &Formula, out: &mut BTreeSet<String>) {
    fn term(t: &Term, out: &mut BTreeSet<String>) {
        match t {
            Term::Var(x) => {
                out.insert(x.clone());
            }
            Term::Root => {}
            Term::Succ(_, i) => term(i, out),
        }
    }
    match f {
        Formula::True | Formula::False => {}
        Formula::SetMem(_, t) => term(t, out),
        Formula::Eq(t, u) | Formula::Lt(t, u) => {
            term(t, out);
            term(u, out);
        }
        Formula::Not(a) => collect_ind_names(a, out),
        Formula::Or(a, b) | Formula::And(a, b) | Formula::Implies(a, b) => {
            collect_ind_names(a, out);
            collect_ind_names(b, out);
        }
        Formula::ExistsInd(x, a) | Formula::ForallInd(x, a) => {
            out.insert(x.clone());
            collect_ind_names(a, out);
        }
        Formula::ExistsSet(_, a) | Formula::ForallSet(_, a) => collect_ind_names(a, out),
    }
}

/// The successor atom `sd(x) = z` in its canonical orientation.
fn succ_atom(d: usize, x: &str, z: &str) -> Formula {
    Formula::Eq(
        Term::Succ(d, Box::new(Term::Var(x.to_string()))),
        Term::Var(z.to_string()),
    )
}

/// The defining formula of `z = t`, by structural induction on `t`:
/// a variable is an equality, the root is the node with no predecessor, and
/// a successor peels one step through an intermediate node.
fn eq_term(z: &str, t: &Term, arity: usize, fresh: &mut FreshVars) -> Formula {
    match t {
        Term::Var(y) => Formula::Eq(Term::Var(z.to_string()), Term::Var(y.clone())),
        Term::Root => {
            let zp = fresh.fresh();
            Formula::not(Formula::ex1(
                zp.clone(),
                or_all((0..arity).map(|d| succ_atom(d, &zp, z)).collect()),
            ))
        }
        Term::Succ(d, inner) => {
            let zp = fresh.fresh();
            Formula::ex1(
                zp.clone(),
                Formula::and(eq_term(&zp, inner, arity, fresh), succ_atom(*d, &zp, z)),
            )
        }
    }
}

fn is_var(t: &Term) -> bool {
    matches!(t, Term::Var(_))
}

/// `sd(x) = y` (in either orientation) is already a relational atom.
fn as_succ_atom(t: &Term, u: &Term) -> Option<(usize, String, String)> {
    let probe = |a: &Term, b: &Term| match (a, b) {
        (Term::Succ(d, inner), Term::Var(y)) => match inner.as_ref() {
            Term::Var(x) => Some((*d, x.clone(), y.clone())),
            _ => None,
        },
        _ => None,
    };
    probe(t, u).or_else(|| probe(u, t))
}

/// Rewrite a formula so the only atoms are `X(x)`, `sd(x) = y`, `x = y` and
/// `x < y` with variable arguments. Compound terms are eliminated through
/// fresh existentials asserting `z = t`; the result is MSO-equivalent to the
/// input.
pub fn to_relational(phi: &Formula, arity: usize) -> Formula {
    let mut fresh = FreshVars::new(phi);
    rel(phi, arity, &mut fresh)
}

fn rel(phi: &Formula, arity: usize, fresh: &mut FreshVars) -> Formula {
    match phi {
        Formula::True | Formula::False => phi.clone(),
        Formula::SetMem(x, t) if is_var(t) => phi.clone(),
        Formula::SetMem(x, t) => {
            let z = fresh.fresh();
            Formula::ex1(
                z.clone(),
                Formula::and(eq_term(&z, t, arity, fresh), Formula::SetMem(x.clone(), Term::Var(z))),
            )
        }
        Formula::Eq(t, u) => {
            if is_var(t) && is_var(u) {
                return phi.clone();
            }
            if let Some((d, x, y)) = as_succ_atom(t, u) {
                return succ_atom(d, &x, &y);
            }
            match (t, u) {
                (Term::Var(x), u) => eq_term(x, u, arity, fresh),
                (t, Term::Var(y)) => eq_term(y, t, arity, fresh),
                (t, u) => {
                    let z = fresh.fresh();
                    Formula::ex1(
                        z.clone(),
                        Formula::and(eq_term(&z, t, arity, fresh), eq_term(&z, u, arity, fresh)),
                    )
                }
            }
        }
        Formula::Lt(t, u) => match (is_var(t), is_var(u)) {
            (true, true) => phi.clone(),
            (true, false) => {
                let w = fresh.fresh();
                Formula::ex1(
                    w.clone(),
                    Formula::and(eq_term(&w, u, arity, fresh), Formula::Lt(t.clone(), Term::Var(w))),
                )
            }
            (false, true) => {
                let z = fresh.fresh();
                Formula::ex1(
                    z.clone(),
                    Formula::and(eq_term(&z, t, arity, fresh), Formula::Lt(Term::Var(z), u.clone())),
                )
            }
            (false, false) => {
                let z = fresh.fresh();
                let w = fresh.fresh();
                Formula::ex1(
                    z.clone(),
                    Formula::and(
                        eq_term(&z, t, arity, fresh),
                        Formula::ex1(
                            w.clone(),
                            Formula::and(
                                eq_term(&w, u, arity, fresh),
                                Formula::Lt(Term::Var(z), Term::Var(w)),
                            ),
                        ),
                    ),
                )
            }
        },
        Formula::Not(a) => Formula::not(rel(a, arity, fresh)),
        Formula::Or(a, b) => Formula::or(rel(a, arity, fresh), rel(b, arity, fresh)),
        Formula::And(a, b) => Formula::and(rel(a, arity, fresh), rel(b, arity, fresh)),
        Formula::Implies(a, b) => Formula::implies(rel(a, arity, fresh), rel(b, arity, fresh)),
        Formula::ExistsInd(x, a) => Formula::ex1(x.clone(), rel(a, arity, fresh)),
        Formula::ForallInd(x, a) => Formula::all1(x.clone(), rel(a, arity, fresh)),
        Formula::ExistsSet(x, a) => Formula::ex2(x.clone(), rel(a, arity, fresh)),
        Formula::ForallSet(x, a) => Formula::all2(x.clone(), rel(a, arity, fresh)),
    }
}

// ---------------------------------------------------------------------------
// Individual-free form
// ---------------------------------------------------------------------------

/// Individual-free formulae. Set variables are de Bruijn indices: `0` is the
/// innermost binder, and indices past the binder depth are free. The core
/// fragment is `Subset`, `Succ`, `Not`, `Or`, `Exists`; the remaining nodes
/// are derived and removed by [`to_core_if`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IfFormula {
    /// `X ⊆ Y`.
    Subset(usize, usize),
    /// `Succ_d(X, Y)`: some member of `X` has its `d`-successor in `Y`.
    Succ(usize, usize, usize),
    Not(Box<IfFormula>),
    Or(Box<IfFormula>, Box<IfFormula>),
    And(Box<IfFormula>, Box<IfFormula>),
    Implies(Box<IfFormula>, Box<IfFormula>),
    Exists(Box<IfFormula>),
    Forall(Box<IfFormula>),
}

impl IfFormula {
    pub fn not(f: IfFormula) -> IfFormula {
        IfFormula::Not(Box::new(f))
    }
    pub fn or(a: IfFormula, b: IfFormula) -> IfFormula {
        IfFormula::Or(Box::new(a), Box::new(b))
    }
    pub fn and(a: IfFormula, b: IfFormula) -> IfFormula {
        IfFormula::And(Box::new(a), Box::new(b))
    }
    pub fn implies(a: IfFormula, b: IfFormula) -> IfFormula {
        IfFormula::Implies(Box::new(a), Box::new(b))
    }
    pub fn exists(f: IfFormula) -> IfFormula {
        IfFormula::Exists(Box::new(f))
    }
    pub fn forall(f: IfFormula) -> IfFormula {
        IfFormula::Forall(Box::new(f))
    }

    /// Whether only core connectives (`⊆`, `Succ`, `¬`, `∨`, `∃`) occur.
    pub fn is_core(&self) -> bool {
        match self {
            IfFormula::Subset(..) | IfFormula::Succ(..) => true,
            IfFormula::Not(a) | IfFormula::Exists(a) => a.is_core(),
            IfFormula::Or(a, b) => a.is_core() && b.is_core(),
            IfFormula::And(..) | IfFormula::Implies(..) | IfFormula::Forall(..) => false,
        }
    }
}

fn if_and_all(mut fs: Vec<IfFormula>) -> IfFormula {
    assert!(!fs.is_empty());
    if fs.len() == 1 {
        return fs.pop().unwrap();
    }
    let mut it = fs.into_iter();
    let first = it.next().unwrap();
    it.fold(first, IfFormula::and)
}

/// `Sing(X)` for the variable at de Bruijn index `i`: `X` is nonempty and
/// has no proper nonempty subset, i.e. `¬(X = ∅) ∧ ∀Y (Y ⊆ X → Y = ∅ ∨ X ⊆ Y)`
/// where `X = ∅` abbreviates `∀Y (X ⊆ Y)`.
pub fn sing(i: usize) -> IfFormula {
    let nonempty = IfFormula::not(IfFormula::forall(IfFormula::Subset(i + 1, 0)));
    let minimal = IfFormula::forall(IfFormula::implies(
        IfFormula::Subset(0, i + 1),
        IfFormula::or(
            IfFormula::forall(IfFormula::Subset(1, 0)),
            IfFormula::Subset(i + 1, 0),
        ),
    ));
    IfFormula::and(nonempty, minimal)
}

/// Strict tree order on singletons: `X < Y` holds when `Y` lies in every set
/// that contains all successors of `X` and is closed under all successors.
/// On arbitrary sets this reads as `Y ⊆ strict-descendants(X)`, which is the
/// semantics [`crate::automata::atomic_lt`] realizes directly.
pub(crate) fn lt_encoding(ix: usize, iy: usize, arity: usize) -> IfFormula {
    // Under the outer ∀Z: Z = 0, X = ix+1, Y = iy+1.
    let mut seeds = Vec::new();
    for d in 0..arity {
        // ∀W (Sing(W) ∧ Succ_d(X, W) → W ⊆ Z); under ∀W: W = 0, Z = 1, X = ix+2.
        seeds.push(IfFormula::forall(IfFormula::implies(
            IfFormula::and(sing(0), IfFormula::Succ(d, ix + 2, 0)),
            IfFormula::Subset(0, 1),
        )));
    }
    let mut closed = Vec::new();
    for d in 0..arity {
        // ∀U (Sing(U) ∧ U ⊆ Z → ∃W (Sing(W) ∧ Succ_d(U, W) ∧ W ⊆ Z));
        // under ∀U: U = 0, Z = 1; under the inner ∃W: W = 0, U = 1, Z = 2.
        closed.push(IfFormula::forall(IfFormula::implies(
            IfFormula::and(sing(0), IfFormula::Subset(0, 1)),
            IfFormula::exists(IfFormula::and(
                IfFormula::and(sing(0), IfFormula::Succ(d, 1, 0)),
                IfFormula::Subset(0, 2),
            )),
        )));
    }
    IfFormula::forall(IfFormula::implies(
        IfFormula::and(if_and_all(seeds), if_and_all(closed)),
        IfFormula::Subset(iy + 1, 0),
    ))
}

struct IfCx {
    stack: Vec<String>,
    free: Vec<String>,
}

impl IfCx {
    fn idx(&mut self, name: &str) -> usize {
        for (k, n) in self.stack.iter().rev().enumerate() {
            if n == name {
                return k;
            }
        }
        let pos = match self.free.iter().position(|n| n == name) {
            Some(p) => p,
            None => {
                self.free.push(name.to_string());
                self.free.len() - 1
            }
        };
        self.stack.len() + pos
    }
}

/// Translate a relational formula to individual-free form. Each individual
/// variable becomes a set variable guarded by `Sing`; membership becomes
/// inclusion, equality becomes mutual inclusion, and the strict order is
/// expressed through successor closure. Fails with `NotRelational` if
/// compound terms remain.
pub fn to_individual_free(phi: &Formula, arity: usize) -> Result<IfFormula, LogicError> {
    let mut cx = IfCx { stack: Vec::new(), free: Vec::new() };
    if_walk(phi, arity, &mut cx)
}

fn if_walk(phi: &Formula, arity: usize, cx: &mut IfCx) -> Result<IfFormula, LogicError> {
    match phi {
        // `true` has no individual-free atom of its own; `∃Z (Z ⊆ Z)` holds
        // in every tree and compiles to a two-state automaton.
        Formula::True => Ok(IfFormula::exists(IfFormula::Subset(0, 0))),
        Formula::False => Ok(IfFormula::not(IfFormula::exists(IfFormula::Subset(0, 0)))),
        Formula::SetMem(x, Term::Var(y)) => {
            let iy = cx.idx(y);
            let ix = cx.idx(x);
            Ok(IfFormula::Subset(iy, ix))
        }
        Formula::SetMem(_, t) => Err(LogicError::NotRelational(format!(
            "set membership applied to compound term `{t}`"
        ))),
        Formula::Eq(t, u) => {
            if let Some((d, x, y)) = as_succ_atom(t, u) {
                let ix = cx.idx(&x);
                let iy = cx.idx(&y);
                return Ok(IfFormula::Succ(d, ix, iy));
            }
            match (t, u) {
                (Term::Var(x), Term::Var(y)) => {
                    let ix = cx.idx(x);
                    let iy = cx.idx(y);
                    Ok(IfFormula::and(IfFormula::Subset(ix, iy), IfFormula::Subset(iy, ix)))
                }
                _ => Err(LogicError::NotRelational(format!("equality `{t} = {u}`"))),
            }
        }
        Formula::Lt(Term::Var(x), Term::Var(y)) => {
            let ix = cx.idx(x);
            let iy = cx.idx(y);
            Ok(lt_encoding(ix, iy, arity))
        }
        Formula::Lt(t, u) => Err(LogicError::NotRelational(format!("order `{t} < {u}`"))),
        Formula::Not(a) => Ok(IfFormula::not(if_walk(a, arity, cx)?)),
        Formula::Or(a, b) => Ok(IfFormula::or(if_walk(a, arity, cx)?, if_walk(b, arity, cx)?)),
        Formula::And(a, b) => Ok(IfFormula::and(if_walk(a, arity, cx)?, if_walk(b, arity, cx)?)),
        Formula::Implies(a, b) => {
            Ok(IfFormula::implies(if_walk(a, arity, cx)?, if_walk(b, arity, cx)?))
        }
        Formula::ExistsInd(x, a) => {
            cx.stack.push(x.clone());
            let body = if_walk(a, arity, cx)?;
            cx.stack.pop();
            Ok(IfFormula::exists(IfFormula::and(sing(0), body)))
        }
        Formula::ForallInd(x, a) => {
            cx.stack.push(x.clone());
            let body = if_walk(a, arity, cx)?;
            cx.stack.pop();
            Ok(IfFormula::forall(IfFormula::implies(sing(0), body)))
        }
        Formula::ExistsSet(x, a) => {
            cx.stack.push(x.clone());
            let body = if_walk(a, arity, cx)?;
            cx.stack.pop();
            Ok(IfFormula::exists(body))
        }
        Formula::ForallSet(x, a) => {
            cx.stack.push(x.clone());
            let body = if_walk(a, arity, cx)?;
            cx.stack.pop();
            Ok(IfFormula::forall(body))
        }
    }
}

/// Remove derived connectives: `∧`, `→` and `∀` are rewritten through
/// `¬`/`∨`/`∃`. Idempotent, and the identity on core input.
pub fn to_core_if(psi: &IfFormula) -> IfFormula {
    match psi {
        IfFormula::Subset(..) | IfFormula::Succ(..) => psi.clone(),
        IfFormula::Not(a) => IfFormula::not(to_core_if(a)),
        IfFormula::Or(a, b) => IfFormula::or(to_core_if(a), to_core_if(b)),
        IfFormula::And(a, b) => IfFormula::not(IfFormula::or(
            IfFormula::not(to_core_if(a)),
            IfFormula::not(to_core_if(b)),
        )),
        IfFormula::Implies(a, b) => IfFormula::or(IfFormula::not(to_core_if(a)), to_core_if(b)),
        IfFormula::Exists(a) => IfFormula::exists(to_core_if(a)),
        IfFormula::Forall(a) => {
            IfFormula::not(IfFormula::exists(IfFormula::not(to_core_if(a))))
        }
    }
}

impl IfFormula {
    fn prec(&self) -> u8 {
        match self {
            IfFormula::Implies(..) | IfFormula::Exists(..) | IfFormula::Forall(..) => PREC_IMPLIES,
            IfFormula::Or(..) => PREC_OR,
            IfFormula::And(..) => PREC_AND,
            IfFormula::Not(..) => PREC_NOT,
            _ => PREC_ATOM,
        }
    }

    fn render_into(&self, depth: usize, ctx: u8, out: &mut String) {
        let name = |i: usize| {
            if i < depth {
                format!("X{}", depth - 1 - i)
            } else {
                format!("Y{}", i - depth)
            }
        };
        let wrap = self.prec() < ctx;
        if wrap {
            out.push('(');
        }
        match self {
            IfFormula::Subset(i, j) => out.push_str(&format!("{} <= {}", name(*i), name(*j))),
            IfFormula::Succ(d, i, j) => {
                out.push_str(&format!("Succ_{d}({}, {})", name(*i), name(*j)))
            }
            IfFormula::Not(a) => {
                out.push('~');
                a.render_into(depth, PREC_NOT, out);
            }
            IfFormula::Or(a, b) => {
                a.render_into(depth, PREC_OR, out);
                out.push_str(" | ");
                b.render_into(depth, PREC_AND, out);
            }
            IfFormula::And(a, b) => {
                a.render_into(depth, PREC_AND, out);
                out.push_str(" & ");
                b.render_into(depth, PREC_NOT, out);
            }
            IfFormula::Implies(a, b) => {
                a.render_into(depth, PREC_OR, out);
                out.push_str(" -> ");
                b.render_into(depth, PREC_IMPLIES, out);
            }
            IfFormula::Exists(a) => {
                out.push_str(&format!("ex2 X{depth}. "));
                a.render_into(depth + 1, PREC_IMPLIES, out);
            }
            IfFormula::Forall(a) => {
                out.push_str(&format!("all2 X{depth}. "));
                a.render_into(depth + 1, PREC_IMPLIES, out);
            }
        }
        if wrap {
            out.push(')');
        }
    }
}

impl fmt::Display for IfFormula {
    /// Bound variables print as `X0, X1, …` by binder depth, free ones as
    /// `Y0, Y1, …`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        self.render_into(0, PREC_IMPLIES, &mut out);
        f.write_str(&out)
    }
}

// ---------------------------------------------------------------------------
// FSO: functional second-order formulae over hereditarily finite sets
// ---------------------------------------------------------------------------

/// Terms denoting hereditarily finite sets, built from literals, bound
/// HF-variables, and the set-forming operations.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum HfTerm {
    Var(String),
    Lit(HfSet),
    Singleton(Box<HfTerm>),
    Union(Box<HfTerm>, Box<HfTerm>),
    Pair(Box<HfTerm>, Box<HfTerm>),
    Powerset(Box<HfTerm>),
    PowersetNe(Box<HfTerm>),
    Product(Box<HfTerm>, Box<HfTerm>),
    /// `FuncSpace(K, L)` is the set of functions from `K` to `L`.
    FuncSpace(Box<HfTerm>, Box<HfTerm>),
    Apply(Box<HfTerm>, Box<HfTerm>),
    DisjointUnion(Box<HfTerm>, Box<HfTerm>),
}

impl HfTerm {
    pub fn lit(s: HfSet) -> HfTerm {
        HfTerm::Lit(s)
    }
    pub fn nat(n: usize) -> HfTerm {
        HfTerm::Lit(hf::ordinal(n))
    }
}

impl fmt::Display for HfTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HfTerm::Var(k) => f.write_str(k),
            HfTerm::Lit(s) => write!(f, "{s}"),
            HfTerm::Singleton(a) => write!(f, "sing({a})"),
            HfTerm::Union(a, b) => write!(f, "union({a}, {b})"),
            HfTerm::Pair(a, b) => write!(f, "pair({a}, {b})"),
            HfTerm::Powerset(a) => write!(f, "pow({a})"),
            HfTerm::PowersetNe(a) => write!(f, "pow1({a})"),
            HfTerm::Product(a, b) => write!(f, "prod({a}, {b})"),
            HfTerm::FuncSpace(a, b) => write!(f, "fun({a}, {b})"),
            HfTerm::Apply(a, b) => write!(f, "app({a}, {b})"),
            HfTerm::DisjointUnion(a, b) => write!(f, "du({a}, {b})"),
        }
    }
}

/// Evaluate a closed HF-term under an environment for bound HF-variables.
pub fn eval_hf_term(t: &HfTerm, env: &BTreeMap<String, HfSet>) -> Result<HfSet, LogicError> {
    Ok(match t {
        HfTerm::Var(k) => env.get(k).cloned().ok_or_else(|| LogicError::NotHfClosed(k.clone()))?,
        HfTerm::Lit(s) => s.clone(),
        HfTerm::Singleton(a) => HfSet::singleton(eval_hf_term(a, env)?),
        HfTerm::Union(a, b) => eval_hf_term(a, env)?.union(&eval_hf_term(b, env)?),
        HfTerm::Pair(a, b) => hf::pair(&eval_hf_term(a, env)?, &eval_hf_term(b, env)?),
        HfTerm::Powerset(a) => hf::powerset(&eval_hf_term(a, env)?)?,
        HfTerm::PowersetNe(a) => hf::powerset_nonempty(&eval_hf_term(a, env)?)?,
        HfTerm::Product(a, b) => hf::product(&eval_hf_term(a, env)?, &eval_hf_term(b, env)?)?,
        HfTerm::FuncSpace(a, b) => {
            hf::function_space(&eval_hf_term(a, env)?, &eval_hf_term(b, env)?)?
        }
        HfTerm::Apply(a, b) => hf::apply(&eval_hf_term(a, env)?, &eval_hf_term(b, env)?)?,
        HfTerm::DisjointUnion(a, b) => {
            hf::disjoint_union(&eval_hf_term(a, env)?, &eval_hf_term(b, env)?)
        }
    })
}

/// FSO formulae: tree atoms as in MSO, HF atoms comparing set terms,
/// Function atoms `F(t) = K`, HF-bounded quantifiers, and Function
/// quantifiers `(∃F : K)` ranging over labelings of the tree by members
/// of `K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FsoFormula {
    True,
    False,
    Eq(Term, Term),
    Lt(Term, Term),
    /// `F(t) = K`.
    FunApp(String, Term, HfTerm),
    HfEq(HfTerm, HfTerm),
    HfMem(HfTerm, HfTerm),
    HfSub(HfTerm, HfTerm),
    Not(Box<FsoFormula>),
    Or(Box<FsoFormula>, Box<FsoFormula>),
    And(Box<FsoFormula>, Box<FsoFormula>),
    Implies(Box<FsoFormula>, Box<FsoFormula>),
    ExistsInd(String, Box<FsoFormula>),
    ForallInd(String, Box<FsoFormula>),
    /// `(∃k ∈ K) φ`.
    ExistsHfMem(String, HfTerm, Box<FsoFormula>),
    ForallHfMem(String, HfTerm, Box<FsoFormula>),
    /// `(∃k ⊆ K) φ`.
    ExistsHfSub(String, HfTerm, Box<FsoFormula>),
    ForallHfSub(String, HfTerm, Box<FsoFormula>),
    /// `(∃F : K) φ`.
    ExistsFun(String, HfTerm, Box<FsoFormula>),
    ForallFun(String, HfTerm, Box<FsoFormula>),
    /// Extended atom `X₁…X_n(t) =_{κ⃗} L`: delays the lookup of which `Xᵢ`
    /// holds at `t` until `L` is closed. Produced internally while expanding
    /// Function quantifiers; accepted in input for completeness.
    ExtAtom {
        vars: Vec<String>,
        enumeration: Vec<HfSet>,
        term: Term,
        value: HfTerm,
    },
}

impl FsoFormula {
    pub fn not(f: FsoFormula) -> FsoFormula {
        FsoFormula::Not(Box::new(f))
    }
    pub fn or(a: FsoFormula, b: FsoFormula) -> FsoFormula {
        FsoFormula::Or(Box::new(a), Box::new(b))
    }
    pub fn and(a: FsoFormula, b: FsoFormula) -> FsoFormula {
        FsoFormula::And(Box::new(a), Box::new(b))
    }
    pub fn implies(a: FsoFormula, b: FsoFormula) -> FsoFormula {
        FsoFormula::Implies(Box::new(a), Box::new(b))
    }
}

impl fmt::Display for FsoFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FsoFormula::True => f.write_str("true"),
            FsoFormula::False => f.write_str("false"),
            FsoFormula::Eq(t, u) => write!(f, "{t} = {u}"),
            FsoFormula::Lt(t, u) => write!(f, "{t} < {u}"),
            FsoFormula::FunApp(g, t, k) => write!(f, "{g}({t}) = {k}"),
            FsoFormula::HfEq(k, l) => write!(f, "{k} = {l}"),
            FsoFormula::HfMem(k, l) => write!(f, "{k} in {l}"),
            FsoFormula::HfSub(k, l) => write!(f, "{k} sub {l}"),
            FsoFormula::Not(a) => write!(f, "~({a})"),
            FsoFormula::Or(a, b) => write!(f, "({a} | {b})"),
            FsoFormula::And(a, b) => write!(f, "({a} & {b})"),
            FsoFormula::Implies(a, b) => write!(f, "({a} -> {b})"),
            FsoFormula::ExistsInd(x, a) => write!(f, "ex1 {x}. {a}"),
            FsoFormula::ForallInd(x, a) => write!(f, "all1 {x}. {a}"),
            FsoFormula::ExistsHfMem(k, l, a) => write!(f, "(ex {k} in {l}) {a}"),
            FsoFormula::ForallHfMem(k, l, a) => write!(f, "(all {k} in {l}) {a}"),
            FsoFormula::ExistsHfSub(k, l, a) => write!(f, "(ex {k} sub {l}) {a}"),
            FsoFormula::ForallHfSub(k, l, a) => write!(f, "(all {k} sub {l}) {a}"),
            FsoFormula::ExistsFun(g, k, a) => write!(f, "(ex {g} : {k}) {a}"),
            FsoFormula::ForallFun(g, k, a) => write!(f, "(all {g} : {k}) {a}"),
            FsoFormula::ExtAtom { vars, term, value, .. } => {
                write!(f, "{}({term}) ={{..}} {value}", vars.join(""))
            }
        }
    }
}

/// Translate MSO to FSO: each set variable `X` becomes a Function variable
/// valued in `2`, with `X(t)` becoming `F_X(t) = 1`. The original name is
/// reused for the Function variable.
pub fn mso_to_fso(phi: &Formula) -> FsoFormula {
    match phi {
        Formula::True => FsoFormula::True,
        Formula::False => FsoFormula::False,
        Formula::SetMem(x, t) => FsoFormula::FunApp(x.clone(), t.clone(), HfTerm::nat(1)),
        Formula::Eq(t, u) => FsoFormula::Eq(t.clone(), u.clone()),
        Formula::Lt(t, u) => FsoFormula::Lt(t.clone(), u.clone()),
        Formula::Not(a) => FsoFormula::not(mso_to_fso(a)),
        Formula::Or(a, b) => FsoFormula::or(mso_to_fso(a), mso_to_fso(b)),
        Formula::And(a, b) => FsoFormula::and(mso_to_fso(a), mso_to_fso(b)),
        Formula::Implies(a, b) => FsoFormula::implies(mso_to_fso(a), mso_to_fso(b)),
        Formula::ExistsInd(x, a) => FsoFormula::ExistsInd(x.clone(), Box::new(mso_to_fso(a))),
        Formula::ForallInd(x, a) => FsoFormula::ForallInd(x.clone(), Box::new(mso_to_fso(a))),
        Formula::ExistsSet(x, a) => {
            FsoFormula::ExistsFun(x.clone(), HfTerm::nat(2), Box::new(mso_to_fso(a)))
        }
        Formula::ForallSet(x, a) => {
            FsoFormula::ForallFun(x.clone(), HfTerm::nat(2), Box::new(mso_to_fso(a)))
        }
    }
}

struct FsoCx {
    /// Bound HF-variables, instantiated during bounded-quantifier expansion.
    henv: BTreeMap<String, HfSet>,
    /// Function variables in scope: the set variables standing in for them
    /// and the enumeration of their value space.
    fenv: BTreeMap<String, (Vec<String>, Vec<HfSet>)>,
    used_set_names: BTreeSet<String>,
    used_ind_names: BTreeSet<String>,
    next_ind: usize,
}

impl FsoCx {
    fn fresh_set_name(&mut self, base: &str, i: usize) -> String {
        let mut cand = format!("{base}{i}");
        while !self.used_set_names.insert(cand.clone()) {
            cand.push('_');
        }
        cand
    }

    fn fresh_ind_name(&mut self) -> String {
        loop {
            let cand = format!("x{}", self.next_ind);
            self.next_ind += 1;
            if self.used_ind_names.insert(cand.clone()) {
                return cand;
            }
        }
    }
}

fn collect_fso_names(phi: &FsoFormula, set: &mut BTreeSet<String>, ind: &mut BTreeSet<String>) {
    match phi {
        FsoFormula::True | FsoFormula::False => {}
        FsoFormula::Eq(t, u) | FsoFormula::Lt(t, u) => {
            term_vars(t, &[], ind);
            term_vars(u, &[], ind);
        }
        FsoFormula::FunApp(g, t, _) => {
            set.insert(g.clone());
            term_vars(t, &[], ind);
        }
        FsoFormula::HfEq(..) | FsoFormula::HfMem(..) | FsoFormula::HfSub(..) => {}
        FsoFormula::Not(a) => collect_fso_names(a, set, ind),
        FsoFormula::Or(a, b) | FsoFormula::And(a, b) | FsoFormula::Implies(a, b) => {
            collect_fso_names(a, set, ind);
            collect_fso_names(b, set, ind);
        }
        FsoFormula::ExistsInd(x, a) | FsoFormula::ForallInd(x, a) => {
            ind.insert(x.clone());
            collect_fso_names(a, set, ind);
        }
        FsoFormula::ExistsHfMem(_, _, a)
        | FsoFormula::ForallHfMem(_, _, a)
        | FsoFormula::ExistsHfSub(_, _, a)
        | FsoFormula::ForallHfSub(_, _, a) => collect_fso_names(a, set, ind),
        FsoFormula::ExistsFun(g, _, a) | FsoFormula::ForallFun(g, _, a) => {
            set.insert(g.clone());
            collect_fso_names(a, set, ind);
        }
        FsoFormula::ExtAtom { vars, term, .. } => {
            set.extend(vars.iter().cloned());
            term_vars(term, &[], ind);
        }
    }
}

/// `Part_c(X₁,…,X_c)`: the sets form a partition of the tree — every node
/// lies in exactly one of them.
fn part_formula(names: &[String], cx: &mut FsoCx) -> Formula {
    let x = cx.fresh_ind_name();
    let mut disjuncts = Vec::new();
    for i in 0..names.len() {
        let mut conj = vec![Formula::SetMem(names[i].clone(), Term::Var(x.clone()))];
        for (j, other) in names.iter().enumerate() {
            if j != i {
                conj.push(Formula::not(Formula::SetMem(other.clone(), Term::Var(x.clone()))));
            }
        }
        disjuncts.push(and_all(conj));
    }
    Formula::all1(x, or_all(disjuncts))
}

/// Translate an HF-closed FSO formula without free Function variables back
/// to MSO. HF atoms evaluate to `true`/`false` in `V_ω`; bounded HF
/// quantifiers expand to finite disjunctions or conjunctions over the
/// canonical enumeration of their bound; `(∃F : K)` becomes a block of
/// monadic quantifiers constrained to a partition, with each `F(t) = L`
/// resolved to the matching member of the block.
pub fn fso_to_mso(phi: &FsoFormula) -> Result<Formula, LogicError> {
    let mut set = BTreeSet::new();
    let mut ind = BTreeSet::new();
    collect_fso_names(phi, &mut set, &mut ind);
    let mut cx = FsoCx {
        henv: BTreeMap::new(),
        fenv: BTreeMap::new(),
        used_set_names: set,
        used_ind_names: ind,
        next_ind: 0,
    };
    fso_walk(phi, &mut cx)
}

fn fso_walk(phi: &FsoFormula, cx: &mut FsoCx) -> Result<Formula, LogicError> {
    match phi {
        FsoFormula::True => Ok(Formula::True),
        FsoFormula::False => Ok(Formula::False),
        FsoFormula::Eq(t, u) => Ok(Formula::Eq(t.clone(), u.clone())),
        FsoFormula::Lt(t, u) => Ok(Formula::Lt(t.clone(), u.clone())),
        FsoFormula::HfEq(k, l) => {
            let (k, l) = (eval_hf_term(k, &cx.henv)?, eval_hf_term(l, &cx.henv)?);
            Ok(if k == l { Formula::True } else { Formula::False })
        }
        FsoFormula::HfMem(k, l) => {
            let (k, l) = (eval_hf_term(k, &cx.henv)?, eval_hf_term(l, &cx.henv)?);
            Ok(if l.contains(&k) { Formula::True } else { Formula::False })
        }
        FsoFormula::HfSub(k, l) => {
            let (k, l) = (eval_hf_term(k, &cx.henv)?, eval_hf_term(l, &cx.henv)?);
            Ok(if k.is_subset(&l) { Formula::True } else { Formula::False })
        }
        FsoFormula::FunApp(g, t, l) => {
            let (vars, enumeration) = cx
                .fenv
                .get(g)
                .cloned()
                .ok_or_else(|| LogicError::FreeFunctionVariable(g.clone()))?;
            let value = eval_hf_term(l, &cx.henv)?;
            resolve_ext_atom(&vars, &enumeration, t, &value)
        }
        FsoFormula::ExtAtom { vars, enumeration, term, value } => {
            let value = eval_hf_term(value, &cx.henv)?;
            resolve_ext_atom(vars, enumeration, term, &value)
        }
        FsoFormula::Not(a) => Ok(Formula::not(fso_walk(a, cx)?)),
        FsoFormula::Or(a, b) => Ok(Formula::or(fso_walk(a, cx)?, fso_walk(b, cx)?)),
        FsoFormula::And(a, b) => Ok(Formula::and(fso_walk(a, cx)?, fso_walk(b, cx)?)),
        FsoFormula::Implies(a, b) => Ok(Formula::implies(fso_walk(a, cx)?, fso_walk(b, cx)?)),
        FsoFormula::ExistsInd(x, a) => Ok(Formula::ex1(x.clone(), fso_walk(a, cx)?)),
        FsoFormula::ForallInd(x, a) => Ok(Formula::all1(x.clone(), fso_walk(a, cx)?)),
        FsoFormula::ExistsHfMem(k, l, a) => {
            expand_bounded(k, l, a, cx, false, /* subsets */ false)
        }
        FsoFormula::ForallHfMem(k, l, a) => expand_bounded(k, l, a, cx, true, false),
        FsoFormula::ExistsHfSub(k, l, a) => expand_bounded(k, l, a, cx, false, true),
        FsoFormula::ForallHfSub(k, l, a) => expand_bounded(k, l, a, cx, true, true),
        FsoFormula::ExistsFun(g, k, a) => expand_fun(g, k, a, cx, false),
        FsoFormula::ForallFun(g, k, a) => expand_fun(g, k, a, cx, true),
    }
}

fn resolve_ext_atom(
    vars: &[String],
    enumeration: &[HfSet],
    t: &Term,
    value: &HfSet,
) -> Result<Formula, LogicError> {
    let mut disjuncts = Vec::new();
    for (x, kappa) in vars.iter().zip(enumeration) {
        if kappa == value {
            disjuncts.push(Formula::SetMem(x.clone(), t.clone()));
        }
    }
    Ok(or_all(disjuncts))
}

fn expand_bounded(
    k: &str,
    bound: &HfTerm,
    body: &FsoFormula,
    cx: &mut FsoCx,
    universal: bool,
    subsets: bool,
) -> Result<Formula, LogicError> {
    let b = eval_hf_term(bound, &cx.henv)?;
    let range: Vec<HfSet> = if subsets {
        hf::powerset(&b)?.elems().to_vec()
    } else {
        b.elems().to_vec()
    };
    let prev = cx.henv.get(k).cloned();
    let mut parts = Vec::new();
    for kappa in range {
        cx.henv.insert(k.to_string(), kappa);
        parts.push(fso_walk(body, cx)?);
    }
    match prev {
        Some(v) => {
            cx.henv.insert(k.to_string(), v);
        }
        None => {
            cx.henv.remove(k);
        }
    }
    Ok(if universal { and_all(parts) } else { or_all(parts) })
}

fn expand_fun(
    g: &str,
    bound: &HfTerm,
    body: &FsoFormula,
    cx: &mut FsoCx,
    universal: bool,
) -> Result<Formula, LogicError> {
    let k = eval_hf_term(bound, &cx.henv)?;
    let enumeration: Vec<HfSet> = k.elems().to_vec();
    let names: Vec<String> =
        (0..enumeration.len()).map(|i| cx.fresh_set_name(g, i)).collect();
    let prev = cx.fenv.insert(g.to_string(), (names.clone(), enumeration));
    let inner = fso_walk(body, cx)?;
    match prev {
        Some(v) => {
            cx.fenv.insert(g.to_string(), v);
        }
        None => {
            cx.fenv.remove(g);
        }
    }
    let part = part_formula(&names, cx);
    // ∃F:K φ becomes ∃X⃗ (Part ∧ φ⟨X⃗⟩); the universal is its dual
    // ∀X⃗ (Part → φ⟨X⃗⟩).
    let mut out = if universal {
        Formula::implies(part, inner)
    } else {
        Formula::and(part, inner)
    };
    for name in names.into_iter().rev() {
        out = if universal { Formula::all2(name, out) } else { Formula::ex2(name, out) };
    }
    Ok(out)
}

/// Decide a closed formula of the pure HF fragment (HF atoms and HF-bounded
/// quantifiers only) by direct enumeration in `V_ω`. Any tree atom or
/// unbounded quantifier is rejected with `Unbounded`.
pub fn eval_hf(phi: &FsoFormula) -> Result<bool, LogicError> {
    let mut env = BTreeMap::new();
    eval_hf_walk(phi, &mut env)
}

fn eval_hf_walk(
    phi: &FsoFormula,
    env: &mut BTreeMap<String, HfSet>,
) -> Result<bool, LogicError> {
    match phi {
        FsoFormula::True => Ok(true),
        FsoFormula::False => Ok(false),
        FsoFormula::HfEq(k, l) => Ok(eval_hf_term(k, env)? == eval_hf_term(l, env)?),
        FsoFormula::HfMem(k, l) => {
            let (k, l) = (eval_hf_term(k, env)?, eval_hf_term(l, env)?);
            Ok(l.contains(&k))
        }
        FsoFormula::HfSub(k, l) => {
            let (k, l) = (eval_hf_term(k, env)?, eval_hf_term(l, env)?);
            Ok(k.is_subset(&l))
        }
        FsoFormula::Not(a) => Ok(!eval_hf_walk(a, env)?),
        FsoFormula::Or(a, b) => Ok(eval_hf_walk(a, env)? || eval_hf_walk(b, env)?),
        FsoFormula::And(a, b) => Ok(eval_hf_walk(a, env)? && eval_hf_walk(b, env)?),
        FsoFormula::Implies(a, b) => Ok(!eval_hf_walk(a, env)? || eval_hf_walk(b, env)?),
        FsoFormula::ExistsHfMem(k, bound, a) | FsoFormula::ForallHfMem(k, bound, a) => {
            let universal = matches!(phi, FsoFormula::ForallHfMem(..));
            let b = eval_hf_term(bound, env)?;
            eval_quant(k, b.elems().to_vec(), a, env, universal)
        }
        FsoFormula::ExistsHfSub(k, bound, a) | FsoFormula::ForallHfSub(k, bound, a) => {
            let universal = matches!(phi, FsoFormula::ForallHfSub(..));
            let b = eval_hf_term(bound, env)?;
            eval_quant(k, hf::powerset(&b)?.elems().to_vec(), a, env, universal)
        }
        other => Err(LogicError::Unbounded(other.to_string())),
    }
}

fn eval_quant(
    k: &str,
    range: Vec<HfSet>,
    body: &FsoFormula,
    env: &mut BTreeMap<String, HfSet>,
    universal: bool,
) -> Result<bool, LogicError> {
    let prev = env.get(k).cloned();
    let mut result = universal;
    for kappa in range {
        env.insert(k.to_string(), kappa);
        let v = eval_hf_walk(body, env)?;
        if universal && !v {
            result = false;
            break;
        }
        if !universal && v {
            result = true;
            break;
        }
    }
    match prev {
        Some(v) => {
            env.insert(k.to_string(), v);
        }
        None => {
            env.remove(k);
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn var(x: &str) -> Term {
        Term::Var(x.to_string())
    }

    fn succ(d: usize, t: Term) -> Term {
        Term::Succ(d, Box::new(t))
    }

    fn mem(x: &str, t: Term) -> Formula {
        Formula::SetMem(x.to_string(), t)
    }

    #[test]
    fn parse_examples() {
        assert_eq!(
            parse("ex2 X. all1 x. X(x)", 2).unwrap(),
            Formula::ex2("X", Formula::all1("x", mem("X", var("x")))),
        );
        assert_eq!(
            parse("ex1 x. x < x", 2).unwrap(),
            Formula::ex1("x", Formula::Lt(var("x"), var("x"))),
        );
        match parse("s2(root) = root", 2) {
            Err(LogicError::UnknownDirection { dir: 2, arity: 2, .. }) => {}
            other => panic!("expected UnknownDirection, got {other:?}"),
        }
    }

    #[test]
    fn parse_precedence_and_quantifier_scope() {
        // ~ binds tighter than &, & tighter than |, | tighter than ->.
        assert_eq!(
            parse("~true & false | true -> false", 2).unwrap(),
            Formula::implies(
                Formula::or(
                    Formula::and(Formula::not(Formula::True), Formula::False),
                    Formula::True
                ),
                Formula::False,
            ),
        );
        // Quantifiers swallow everything to their right.
        assert_eq!(
            parse("true & ex1 x. x = x | false", 2).unwrap(),
            Formula::and(
                Formula::True,
                Formula::ex1("x", Formula::or(Formula::Eq(var("x"), var("x")), Formula::False)),
            ),
        );
        // `->` is right-associative.
        assert_eq!(
            parse("true -> false -> true", 2).unwrap(),
            Formula::implies(Formula::True, Formula::implies(Formula::False, Formula::True)),
        );
    }

    #[test]
    fn parse_sentence_rejects_free_variables() {
        match parse_sentence("X(x)", 2) {
            Err(LogicError::UnboundVariable(_)) => {}
            other => panic!("expected UnboundVariable, got {other:?}"),
        }
        assert!(parse_sentence("ex2 X. ex1 x. X(x)", 2).is_ok());
    }

    #[test]
    fn relational_examples() {
        // X(root): the root is the node with no predecessor.
        let got = to_relational(&mem("X", Term::Root), 2);
        let expected = Formula::ex1(
            "z0",
            Formula::and(
                Formula::not(Formula::ex1(
                    "z1",
                    Formula::or(succ_atom(0, "z1", "z0"), succ_atom(1, "z1", "z0")),
                )),
                mem("X", var("z0")),
            ),
        );
        assert_eq!(got, expected);

        // Variables pass through untouched.
        assert_eq!(to_relational(&mem("X", var("x")), 2), mem("X", var("x")));

        // X(s0(x)) peels the successor through an intermediate node.
        let got = to_relational(&mem("X", succ(0, var("x"))), 2);
        let expected = Formula::ex1(
            "z0",
            Formula::and(
                Formula::ex1(
                    "z1",
                    Formula::and(Formula::Eq(var("z1"), var("x")), succ_atom(0, "z1", "z0")),
                ),
                mem("X", var("z0")),
            ),
        );
        assert_eq!(got, expected);
    }

    #[test]
    fn relational_succ_atoms_kept() {
        // sd(x) = y is already relational, in either orientation.
        let f = parse("ex1 x. ex1 y. s0(x) = y", 2).unwrap();
        assert_eq!(to_relational(&f, 2), f);
        let flipped = parse("ex1 x. ex1 y. y = s0(x)", 2).unwrap();
        assert_eq!(
            to_relational(&flipped, 2),
            parse("ex1 x. ex1 y. s0(x) = y", 2).unwrap()
        );
    }

    #[test]
    fn relational_output_is_relational(){
        // Compound-term equalities and orders unfold to relational atoms:
        // the individual-free translation accepts the result.
        for text in [
            "s0(root) = s1(root)",
            "root < s0(s1(root))",
            "ex1 x. s1(x) < root",
            "ex2 X. X(s0(s0(root)))",
            "ex1 x. root = x",
        ] {
            let f = parse(text, 2).unwrap();
            let r = to_relational(&f, 2);
            assert!(
                to_individual_free(&r, 2).is_ok(),
                "not relational after translation: {text} -> {r}"
            );
        }
    }

    #[test]
    fn individual_free_examples() {
        // ∃x. Y(x) → ∃X (Sing(X) ∧ X ⊆ Y) with Y free.
        let f = Formula::ex1("x", mem("Y", var("x")));
        let got = to_individual_free(&f, 2).unwrap();
        let expected = IfFormula::exists(IfFormula::and(sing(0), IfFormula::Subset(0, 1)));
        assert_eq!(got, expected);

        // ∃x ∃y. s0(x) = y → ∃X ∃Y (Sing(X) ∧ (Sing(Y) ∧ Succ_0(X, Y))).
        let f = parse("ex1 x. ex1 y. s0(x) = y", 2).unwrap();
        let got = to_individual_free(&f, 2).unwrap();
        let expected = IfFormula::exists(IfFormula::and(
            sing(0),
            IfFormula::exists(IfFormula::and(sing(0), IfFormula::Succ(0, 1, 0))),
        ));
        assert_eq!(got, expected);

        // Equality of individuals is mutual inclusion of the singletons.
        let f = parse("ex1 x. ex1 y. x = y", 2).unwrap();
        let got = to_individual_free(&f, 2).unwrap();
        let expected = IfFormula::exists(IfFormula::and(
            sing(0),
            IfFormula::exists(IfFormula::and(
                sing(0),
                IfFormula::and(IfFormula::Subset(1, 0), IfFormula::Subset(0, 1)),
            )),
        ));
        assert_eq!(got, expected);
    }

    #[test]
    fn individual_free_rejects_compound_terms() {
        let f = parse("X(s0(root))", 2);
        let f = match f {
            Ok(f) => f,
            Err(e) => panic!("{e}"),
        };
        match to_individual_free(&f, 2) {
            Err(LogicError::NotRelational(_)) => {}
            other => panic!("expected NotRelational, got {other:?}"),
        }
    }

    #[test]
    fn core_if_examples() {
        let a = IfFormula::Subset(0, 1);
        let b = IfFormula::Succ(0, 0, 1);
        let and = IfFormula::and(a.clone(), b.clone());
        assert_eq!(
            to_core_if(&and),
            IfFormula::not(IfFormula::or(IfFormula::not(a.clone()), IfFormula::not(b.clone()))),
        );
        let forall = IfFormula::forall(a.clone());
        assert_eq!(
            to_core_if(&forall),
            IfFormula::not(IfFormula::exists(IfFormula::not(a.clone()))),
        );
        let core = IfFormula::or(IfFormula::not(a.clone()), b.clone());
        assert_eq!(to_core_if(&core), core);
        assert!(to_core_if(&and).is_core());
        assert!(to_core_if(&IfFormula::implies(a, b)).is_core());
    }

    #[test]
    fn mso_to_fso_examples() {
        assert_eq!(
            mso_to_fso(&mem("X", Term::Root)),
            FsoFormula::FunApp("X".into(), Term::Root, HfTerm::nat(1)),
        );
        let eq = Formula::Eq(var("x"), var("y"));
        assert_eq!(mso_to_fso(&eq), FsoFormula::Eq(var("x"), var("y")));
        assert_eq!(
            mso_to_fso(&Formula::ex2("X", mem("X", Term::Root))),
            FsoFormula::ExistsFun(
                "X".into(),
                HfTerm::nat(2),
                Box::new(FsoFormula::FunApp("X".into(), Term::Root, HfTerm::nat(1))),
            ),
        );
    }

    #[test]
    fn fso_to_mso_examples() {
        // (∃k ∈ {∅}) k = ∅ expands to a single disjunct that evaluates true.
        let f = FsoFormula::ExistsHfMem(
            "k".into(),
            HfTerm::lit(HfSet::singleton(HfSet::empty())),
            Box::new(FsoFormula::HfEq(HfTerm::Var("k".into()), HfTerm::lit(HfSet::empty()))),
        );
        assert_eq!(fso_to_mso(&f).unwrap(), Formula::True);

        // (∃F : 2)(∀x)(F(x) = 0 ∨ F(x) = 1) becomes two set variables
        // forming a partition.
        let f = FsoFormula::ExistsFun(
            "X".into(),
            HfTerm::nat(2),
            Box::new(FsoFormula::ForallInd(
                "x".into(),
                Box::new(FsoFormula::or(
                    FsoFormula::FunApp("X".into(), var("x"), HfTerm::nat(0)),
                    FsoFormula::FunApp("X".into(), var("x"), HfTerm::nat(1)),
                )),
            )),
        );
        let part = Formula::all1(
            "x0",
            Formula::or(
                Formula::and(mem("X0", var("x0")), Formula::not(mem("X1", var("x0")))),
                Formula::and(mem("X1", var("x0")), Formula::not(mem("X0", var("x0")))),
            ),
        );
        let body = Formula::all1("x", Formula::or(mem("X0", var("x")), mem("X1", var("x"))));
        let expected = Formula::ex2("X0", Formula::ex2("X1", Formula::and(part, body)));
        assert_eq!(fso_to_mso(&f).unwrap(), expected);

        // 2 ∈ 3 is a fact of V_ω.
        let f = FsoFormula::HfMem(HfTerm::nat(2), HfTerm::nat(3));
        assert_eq!(fso_to_mso(&f).unwrap(), Formula::True);
    }

    #[test]
    fn fso_to_mso_errors() {
        let f = FsoFormula::FunApp("F".into(), Term::Root, HfTerm::nat(1));
        match fso_to_mso(&f) {
            Err(LogicError::FreeFunctionVariable(name)) => assert_eq!(name, "F"),
            other => panic!("expected FreeFunctionVariable, got {other:?}"),
        }
        let f = FsoFormula::HfEq(HfTerm::Var("k".into()), HfTerm::nat(0));
        match fso_to_mso(&f) {
            Err(LogicError::NotHfClosed(name)) => assert_eq!(name, "k"),
            other => panic!("expected NotHfClosed, got {other:?}"),
        }
    }

    #[test]
    fn eval_hf_examples() {
        // ∀k ∈ 2. ∃l ∈ 2. k = l
        let f = FsoFormula::ForallHfMem(
            "k".into(),
            HfTerm::nat(2),
            Box::new(FsoFormula::ExistsHfMem(
                "l".into(),
                HfTerm::nat(2),
                Box::new(FsoFormula::HfEq(HfTerm::Var("k".into()), HfTerm::Var("l".into()))),
            )),
        );
        assert!(eval_hf(&f).unwrap());

        // ∃k ⊆ {∅}. ∅ ∈ k
        let f = FsoFormula::ExistsHfSub(
            "k".into(),
            HfTerm::lit(HfSet::singleton(HfSet::empty())),
            Box::new(FsoFormula::HfMem(HfTerm::lit(HfSet::empty()), HfTerm::Var("k".into()))),
        );
        assert!(eval_hf(&f).unwrap());

        // ∅ ∈ ∅
        let f = FsoFormula::HfMem(HfTerm::lit(HfSet::empty()), HfTerm::lit(HfSet::empty()));
        assert!(!eval_hf(&f).unwrap());
    }

    #[test]
    fn eval_hf_rejects_tree_atoms() {
        let f = FsoFormula::Eq(Term::Root, Term::Root);
        match eval_hf(&f) {
            Err(LogicError::Unbounded(_)) => {}
            other => panic!("expected Unbounded, got {other:?}"),
        }
    }

    #[test]
    fn eval_hf_function_space_cardinality() {
        // L^K has exactly |L|^|K| members, as a closed HF sentence:
        // ∃ pairwise-distinct e_1…e_n ∈ L^K with every member equal to some
        // e_i. Each disequality sits directly under the quantifier binding
        // its later variable, so the search prunes as it goes.
        for k in 0..=3usize {
            for l in 0..=3usize {
                let n = l.pow(k as u32);
                let space = HfTerm::FuncSpace(Box::new(HfTerm::nat(k)), Box::new(HfTerm::nat(l)));
                let names: Vec<String> = (0..n).map(|i| format!("e{i}")).collect();

                let covers = FsoFormula::ForallHfMem(
                    "e".into(),
                    space.clone(),
                    Box::new(names.iter().fold(FsoFormula::False, |acc, ei| {
                        FsoFormula::or(
                            acc,
                            FsoFormula::HfEq(HfTerm::Var("e".into()), HfTerm::Var(ei.clone())),
                        )
                    })),
                );
                let mut body = covers;
                for i in (0..n).rev() {
                    for j in 0..i {
                        body = FsoFormula::and(
                            FsoFormula::not(FsoFormula::HfEq(
                                HfTerm::Var(names[j].clone()),
                                HfTerm::Var(names[i].clone()),
                            )),
                            body,
                        );
                    }
                    body = FsoFormula::ExistsHfMem(names[i].clone(), space.clone(), Box::new(body));
                }
                assert!(eval_hf(&body).unwrap(), "|{l}^{k}| expected to be {n}");
            }
        }
    }

    #[test]
    fn nested_function_quantifiers_get_fresh_names() {
        // Shadowing: the inner ∃F:2 must not clash with the outer block.
        let inner = FsoFormula::ExistsFun(
            "F".into(),
            HfTerm::nat(2),
            Box::new(FsoFormula::FunApp("F".into(), Term::Root, HfTerm::nat(1))),
        );
        let f = FsoFormula::ExistsFun(
            "F".into(),
            HfTerm::nat(2),
            Box::new(FsoFormula::and(
                FsoFormula::FunApp("F".into(), Term::Root, HfTerm::nat(0)),
                inner,
            )),
        );
        let got = fso_to_mso(&f).unwrap();
        let (ind, set) = got.free_vars();
        assert!(ind.is_empty() && set.is_empty(), "translation left free variables: {got}");
    }

    #[test]
    fn lt_encoding_shape() {
        // ex1 x. ex1 y. x < y translates without error and stays closed
        // (spot-check of the de Bruijn arithmetic in the order encoding).
        let f = parse("ex1 x. ex1 y. x < y", 2).unwrap();
        let g = to_individual_free(&f, 2).unwrap();
        let core = to_core_if(&g);
        assert!(core.is_core());
        assert!(max_free_index(&core, 0).is_none(), "unexpected free index in {core}");
    }

    /// Largest de Bruijn index free at the top, if any.
    fn max_free_index(f: &IfFormula, depth: usize) -> Option<usize> {
        let check = |i: usize| if i >= depth { Some(i - depth) } else { None };
        match f {
            IfFormula::Subset(i, j) => check(*i).into_iter().chain(check(*j)).max(),
            IfFormula::Succ(_, i, j) => check(*i).into_iter().chain(check(*j)).max(),
            IfFormula::Not(a) => max_free_index(a, depth),
            IfFormula::Or(a, b) | IfFormula::And(a, b) | IfFormula::Implies(a, b) => {
                max_free_index(a, depth).into_iter().chain(max_free_index(b, depth)).max()
            }
            IfFormula::Exists(a) | IfFormula::Forall(a) => max_free_index(a, depth + 1),
        }
    }

    fn arb_term() -> impl Strategy<Value = Term> {
        let leaf = prop_oneof![
            Just(Term::Root),
            "[a-c]".prop_map(Term::Var),
        ];
        leaf.prop_recursive(3, 8, 1, |inner| {
            (0..2usize, inner).prop_map(|(d, t)| Term::Succ(d, Box::new(t)))
        })
    }

    fn arb_formula() -> impl Strategy<Value = Formula> {
        let leaf = prop_oneof![
            Just(Formula::True),
            Just(Formula::False),
            ("[X-Z]", arb_term()).prop_map(|(x, t)| Formula::SetMem(x, t)),
            (arb_term(), arb_term()).prop_map(|(t, u)| Formula::Eq(t, u)),
            (arb_term(), arb_term()).prop_map(|(t, u)| Formula::Lt(t, u)),
        ];
        leaf.prop_recursive(5, 32, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(Formula::not),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::implies(a, b)),
                ("[a-c]", inner.clone()).prop_map(|(x, a)| Formula::ex1(x, a)),
                ("[a-c]", inner.clone()).prop_map(|(x, a)| Formula::all1(x, a)),
                ("[X-Z]", inner.clone()).prop_map(|(x, a)| Formula::ex2(x, a)),
                ("[X-Z]", inner).prop_map(|(x, a)| Formula::all2(x, a)),
            ]
        })
    }

    fn arb_if_formula() -> impl Strategy<Value = IfFormula> {
        let leaf = prop_oneof![
            (0..4usize, 0..4usize).prop_map(|(i, j)| IfFormula::Subset(i, j)),
            (0..2usize, 0..4usize, 0..4usize).prop_map(|(d, i, j)| IfFormula::Succ(d, i, j)),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(IfFormula::not),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| IfFormula::or(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| IfFormula::and(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| IfFormula::implies(a, b)),
                inner.clone().prop_map(IfFormula::exists),
                inner.prop_map(IfFormula::forall),
            ]
        })
    }

    proptest! {
        /// Rendering then reparsing is the identity on ASTs.
        #[test]
        fn render_parse_round_trip(f in arb_formula()) {
            let text = f.to_string();
            let parsed = parse(&text, 2).expect("rendered formula must parse");
            prop_assert_eq!(parsed, f);
        }

        /// Core translation produces core formulae and is idempotent.
        #[test]
        fn core_if_idempotent(f in arb_if_formula()) {
            let core = to_core_if(&f);
            prop_assert!(core.is_core());
            prop_assert_eq!(to_core_if(&core), core);
        }
    }
}
