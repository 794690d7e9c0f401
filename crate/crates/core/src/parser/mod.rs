//! Surface syntax: programs, queries, single terms, and the inverse
//! formatter. The grammar is documented in `docs/grammar.md`.

mod format;
mod lexer;

use std::collections::HashMap;
use std::fmt;

use crate::term::{Term, TimePoint, Var};
use lexer::{Tok, Token};

pub use format::{format_clause, format_literal, format_term, quote_atom};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at {line}:{col}: expected {expected}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub expected: String,
}

impl SyntaxError {
    pub(crate) fn new(line: usize, col: usize, expected: impl Into<String>) -> Self {
        SyntaxError { line, col, expected: expected.into() }
    }
}

/// A body literal.
#[derive(Clone, Debug, PartialEq)]
pub enum Literal {
    Pos(Term),
    /// `not(G)`: negation as failure.
    Naf(Term),
    /// `neg(G)`: explicit negation, proved by clauses with a `neg(..)` head.
    Neg(Term),
    Cut,
}

impl Literal {
    pub fn term(&self) -> Option<&Term> {
        match self {
            Literal::Pos(t) | Literal::Naf(t) | Literal::Neg(t) => Some(t),
            Literal::Cut => None,
        }
    }

    /// The literal as a callable goal term.
    pub fn to_goal(&self) -> Term {
        match self {
            Literal::Pos(t) => t.clone(),
            Literal::Naf(t) => Term::compound("not", vec![t.clone()]),
            Literal::Neg(t) => Term::compound("neg", vec![t.clone()]),
            Literal::Cut => Term::atom("!"),
        }
    }

    /// Classify a goal term as a literal.
    pub fn from_goal(t: Term) -> Literal {
        match t.functor() {
            Some(("!", 0)) => Literal::Cut,
            Some(("not", 1)) => Literal::Naf(t.args()[0].clone()),
            Some(("neg", 1)) => Literal::Neg(t.args()[0].clone()),
            _ => Literal::Pos(t),
        }
    }

    fn map(&self, f: &mut impl FnMut(&Term) -> Term) -> Literal {
        match self {
            Literal::Pos(t) => Literal::Pos(f(t)),
            Literal::Naf(t) => Literal::Naf(f(t)),
            Literal::Neg(t) => Literal::Neg(f(t)),
            Literal::Cut => Literal::Cut,
        }
    }
}

/// A Horn clause with optional negated body literals.
///
/// Variables are renumbered to clause-local indices `0..var_count` on
/// construction so clauses compare by structure.
#[derive(Clone, Debug)]
pub struct Clause {
    pub head: Term,
    pub body: Vec<Literal>,
    var_count: usize,
    serial: u64,
}

impl PartialEq for Clause {
    fn eq(&self, other: &Self) -> bool {
        self.head == other.head && self.body == other.body
    }
}

impl Clause {
    pub fn new(head: Term, body: Vec<Literal>) -> Self {
        let mut map: HashMap<Var, Term> = HashMap::new();
        let mut next = 0u64;
        let mut renumber = |t: &Term| {
            t.map_vars(&mut |v| {
                if v.is_anonymous() {
                    let t = Term::Var(v.with_index(next));
                    next += 1;
                    return t;
                }
                map.entry(v.clone())
                    .or_insert_with(|| {
                        let t = Term::Var(v.with_index(next));
                        next += 1;
                        t
                    })
                    .clone()
            })
        };
        let head = renumber(&head);
        let body = body.iter().map(|l| l.map(&mut renumber)).collect();
        Clause { head, body, var_count: next as usize, serial: 0 }
    }

    pub fn fact(head: Term) -> Self {
        Clause::new(head, Vec::new())
    }

    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }

    pub fn var_count(&self) -> usize {
        self.var_count
    }

    /// Identity assigned when the clause enters a knowledge base (0 before).
    pub fn serial(&self) -> u64 {
        self.serial
    }

    pub(crate) fn with_serial(mut self, serial: u64) -> Self {
        self.serial = serial;
        self
    }

    /// A copy with every variable replaced by a process-unique one.
    pub fn rename(&self) -> (Term, Vec<Literal>) {
        if self.var_count == 0 {
            return (self.head.clone(), self.body.clone());
        }
        let base = crate::term::fresh_block(self.var_count as u64);
        let mut f = |t: &Term| t.map_vars(&mut |v| Term::Var(v.with_index(base + v.index())));
        let head = f(&self.head);
        let body = self.body.iter().map(|l| l.map(&mut f)).collect();
        (head, body)
    }

    pub fn key(&self) -> (&str, usize) {
        self.head.functor().unwrap_or(("", 0))
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_clause(self))
    }
}

/// Parsed program text: clauses plus load-time directives, in source order.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceModule {
    pub oid: Term,
    pub clauses: Vec<Clause>,
    /// `:- Goal.` lines and top-level `add/remove/update` facts.
    pub directives: Vec<Term>,
}

/// An ordered goal list with the variables it mentions, in first-occurrence order.
#[derive(Clone, Debug, PartialEq)]
pub struct Query {
    pub goals: Vec<Term>,
    pub variables: Vec<Var>,
}

impl Query {
    pub fn from_goals(goals: Vec<Term>) -> Self {
        let mut vars = Vec::new();
        for g in &goals {
            g.collect_vars(&mut vars);
        }
        vars.retain(|v| !v.is_anonymous());
        Query { goals, variables: vars }
    }
}

fn is_directive_head(t: &Term) -> bool {
    matches!(
        t.functor(),
        Some(("add", 1..=3)) | Some(("remove", 1)) | Some(("update", 2..=3))
    )
}

pub fn parse_program(text: &str, oid: Term) -> Result<SourceModule, SyntaxError> {
    let mut p = Parser::new(text)?;
    let mut clauses = Vec::new();
    let mut directives = Vec::new();
    while !p.at(&Tok::Eof) {
        p.vars.clear();
        if p.at_sym(":-") {
            p.bump();
            let goals = p.body()?;
            p.expect_end()?;
            directives.extend(goals.into_iter().map(|l| l.to_goal()));
            continue;
        }
        let (hl, hc) = p.pos();
        let head = p.term(1199)?;
        if !head.is_callable() {
            return Err(SyntaxError::new(hl, hc, "a clause head (atom or compound)"));
        }
        let body = if p.at_sym(":-") {
            p.bump();
            p.body()?
        } else {
            Vec::new()
        };
        p.expect_end()?;
        if body.is_empty() && is_directive_head(&head) {
            directives.push(head);
        } else {
            clauses.push(Clause::new(head, body));
        }
    }
    Ok(SourceModule { oid, clauses, directives })
}

/// Parse `goal, goal, ... ?` (a trailing `.` or nothing is also accepted).
pub fn parse_query(text: &str) -> Result<Query, SyntaxError> {
    let mut p = Parser::new(text)?;
    if p.at(&Tok::QueryEnd) || p.at(&Tok::End) || p.at(&Tok::Eof) {
        let (l, c) = p.pos();
        return Err(SyntaxError::new(l, c, "at least one goal"));
    }
    let goals: Vec<Term> = p.body()?.into_iter().map(|l| l.to_goal()).collect();
    if p.at(&Tok::QueryEnd) || p.at(&Tok::End) {
        p.bump();
    }
    if !p.at(&Tok::Eof) {
        let (l, c) = p.pos();
        return Err(SyntaxError::new(l, c, "end of query"));
    }
    Ok(Query::from_goals(goals))
}

/// Parse a single term (an optional trailing `.` is accepted).
pub fn parse_term(text: &str) -> Result<Term, SyntaxError> {
    let mut p = Parser::new(text)?;
    let t = p.term(1200)?;
    if p.at(&Tok::End) {
        p.bump();
    }
    if !p.at(&Tok::Eof) {
        let (l, c) = p.pos();
        return Err(SyntaxError::new(l, c, "end of term"));
    }
    Ok(t)
}

/// Replace placeholders `_0`, `_1`, ... with the formatted arguments.
pub fn substitute_placeholders(text: &str, args: &[Term]) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let boundary = i == 0 || !(chars[i - 1].is_alphanumeric() || chars[i - 1] == '_');
        if c == '_' && boundary && i + 1 < chars.len() && chars[i + 1].is_ascii_digit() {
            let mut j = i + 1;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let ends = j == chars.len() || !(chars[j].is_alphanumeric() || chars[j] == '_');
            let idx: Option<usize> = chars[i + 1..j].iter().collect::<String>().parse().ok();
            if let (true, Some(arg)) = (ends, idx.and_then(|k| args.get(k))) {
                out.push_str(&format_term(arg));
                i = j;
                continue;
            }
        }
        out.push(c);
        i += 1;
    }
    out
}

fn flatten_conj(t: Term, out: &mut Vec<Term>) {
    if t.is_functor(",", 2) {
        flatten_conj(t.args()[0].clone(), out);
        flatten_conj(t.args()[1].clone(), out);
    } else {
        out.push(t);
    }
}

#[derive(Clone, Copy, PartialEq)]
pub(crate) enum Assoc {
    Xfx,
    Xfy,
    Yfx,
}

pub(crate) fn infix_op(name: &str) -> Option<(u32, Assoc)> {
    Some(match name {
        ":-" => (1200, Assoc::Xfx),
        ";" => (1100, Assoc::Xfy),
        "->" => (1050, Assoc::Xfy),
        "," => (1000, Assoc::Xfy),
        "=" | "\\=" | "==" | "\\==" | "<" | ">" | "<=" | ">=" | "=<" | "is" | "=:=" | "=\\=" => {
            (700, Assoc::Xfx)
        }
        "+" | "-" => (500, Assoc::Yfx),
        "*" | "/" | "mod" => (400, Assoc::Yfx),
        _ => return None,
    })
}

pub(crate) fn infix_prec(name: &str) -> Option<(u32, u32, u32)> {
    infix_op(name).map(|(p, a)| match a {
        Assoc::Xfx => (p, p - 1, p - 1),
        Assoc::Xfy => (p, p - 1, p),
        Assoc::Yfx => (p, p, p - 1),
    })
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    vars: HashMap<String, u64>,
    anon: u64,
}

impl Parser {
    fn new(text: &str) -> Result<Self, SyntaxError> {
        Ok(Parser { toks: lexer::tokenize(text)?, pos: 0, vars: HashMap::new(), anon: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn pos(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn at(&self, t: &Tok) -> bool {
        self.peek() == t
    }

    fn at_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if x == s)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, expected: impl Into<String>) -> Result<T, SyntaxError> {
        let (l, c) = self.pos();
        Err(SyntaxError::new(l, c, expected))
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), SyntaxError> {
        if self.peek() == &t {
            self.bump();
            Ok(())
        } else {
            self.err(what)
        }
    }

    fn expect_end(&mut self) -> Result<(), SyntaxError> {
        self.expect(Tok::End, "'.' ending the clause")
    }

    fn var(&mut self, name: String) -> Term {
        if name == "_" {
            // Each anonymous variable is distinct; clause construction renumbers them.
            self.anon += 1;
            return Term::var("_", (1 << 31) + self.anon);
        }
        let n = self.vars.len() as u64;
        let idx = *self.vars.entry(name.clone()).or_insert(n);
        Term::var(name, idx)
    }

    /// A goal conjunction: one term at priority 1199, flattened on `,`.
    fn body(&mut self) -> Result<Vec<Literal>, SyntaxError> {
        let (l, c) = self.pos();
        let t = self.term(1199)?;
        let mut goals = Vec::new();
        flatten_conj(t, &mut goals);
        goals.into_iter().map(|g| self.literal(g, l, c)).collect()
    }

    fn literal(&self, t: Term, l: usize, c: usize) -> Result<Literal, SyntaxError> {
        let lit = Literal::from_goal(t);
        if let Literal::Naf(inner) | Literal::Neg(inner) = &lit {
            if matches!(inner.functor(), Some(("not", 1)) | Some(("neg", 1))) {
                return Err(SyntaxError::new(l, c, "a positive literal inside not/neg"));
            }
        }
        if let Some(t) = lit.term() {
            if !t.is_callable() && !t.is_var() {
                return Err(SyntaxError::new(l, c, "a callable goal"));
            }
        }
        Ok(lit)
    }

    fn term(&mut self, max: u32) -> Result<Term, SyntaxError> {
        let (mut left, mut left_prec) = self.primary(max)?;
        loop {
            let name = match self.peek() {
                Tok::Sym(s) => s.clone(),
                Tok::Name(s) if s == "is" || s == "mod" => s.clone(),
                _ => break,
            };
            let Some((prec, lmax, rmax)) = infix_prec(&name) else { break };
            if prec > max || left_prec > lmax {
                break;
            }
            self.bump();
            let right = self.term(rmax)?;
            left = Term::compound(name, vec![left, right]);
            left_prec = prec;
        }
        Ok(left)
    }

    fn args(&mut self) -> Result<Vec<Term>, SyntaxError> {
        let mut args = Vec::new();
        if self.at(&Tok::Close) {
            self.bump();
            return Ok(args);
        }
        loop {
            args.push(self.term(999)?);
            if self.at_sym(",") {
                self.bump();
                continue;
            }
            self.expect(Tok::Close, "',' or ')'")?;
            return Ok(args);
        }
    }

    fn compound(&mut self, name: String) -> Result<Term, SyntaxError> {
        self.bump(); // OpenCall
        let args = self.args()?;
        let t = Term::compound(name, args);
        Ok(TimePoint::from_term(&t).map(Term::Time).unwrap_or(t))
    }

    /// Returns the term and its priority (0 for primaries).
    fn primary(&mut self, max: u32) -> Result<(Term, u32), SyntaxError> {
        let tok = self.peek().clone();
        match tok {
            Tok::Int(i) => {
                self.bump();
                Ok((Term::Int(i), 0))
            }
            Tok::Float(f) => {
                self.bump();
                Ok((Term::Float(f), 0))
            }
            Tok::Str(s) => {
                self.bump();
                Ok((Term::string(s), 0))
            }
            Tok::Var(v) => {
                self.bump();
                Ok((self.var(v), 0))
            }
            Tok::Name(n) | Tok::Quoted(n) => {
                self.bump();
                if self.at(&Tok::OpenCall) {
                    return Ok((self.compound(n)?, 0));
                }
                Ok((Term::atom(n), 0))
            }
            Tok::Sym(s) => {
                if s == "-" {
                    match self.peek_at(1).clone() {
                        Tok::Int(i) => {
                            self.bump();
                            self.bump();
                            return Ok((Term::Int(-i), 0));
                        }
                        Tok::Float(f) => {
                            self.bump();
                            self.bump();
                            return Ok((Term::Float(-f), 0));
                        }
                        _ => {}
                    }
                }
                self.bump();
                if self.at(&Tok::OpenCall) {
                    return Ok((self.compound(s)?, 0));
                }
                if s == "!" {
                    return Ok((Term::atom("!"), 0));
                }
                if s == "-" || s == "+" {
                    // Prefix sign on a non-literal operand.
                    if self.starts_term() && max >= 200 {
                        let arg = self.term(200)?;
                        return Ok((Term::compound(s, vec![arg]), 200));
                    }
                }
                if s == "," || s == "|" {
                    return self.err("a term");
                }
                // A bare symbolic atom such as `+` or `=<` used as an operand.
                Ok((Term::atom(s), 0))
            }
            Tok::Open | Tok::OpenCall => {
                self.bump();
                let t = self.term(1200)?;
                self.expect(Tok::Close, "')'")?;
                Ok((t, 0))
            }
            Tok::OpenList => {
                self.bump();
                if self.at(&Tok::CloseList) {
                    self.bump();
                    return Ok((Term::Nil, 0));
                }
                let mut items = vec![self.term(999)?];
                while self.at_sym(",") {
                    self.bump();
                    items.push(self.term(999)?);
                }
                let tail = if self.at_sym("|") {
                    self.bump();
                    self.term(999)?
                } else {
                    Term::Nil
                };
                self.expect(Tok::CloseList, "',' '|' or ']'")?;
                Ok((Term::list_with_tail(items, tail), 0))
            }
            _ => self.err("a term"),
        }
    }

    fn starts_term(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Int(_)
                | Tok::Float(_)
                | Tok::Str(_)
                | Tok::Var(_)
                | Tok::Name(_)
                | Tok::Quoted(_)
                | Tok::Open
                | Tok::OpenList
        )
    }
}
