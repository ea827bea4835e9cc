//! Conjunctive query formulas, sorted judgments `n ⊢ φ`, derivations in the
//! eight-rule calculus, and the set semantics.
//!
//! Binders are locally nameless: free variables are `x_i` by position and a
//! bound variable is a de Bruijn index counting enclosing `exists` nodes.
//! Opening an `Exists` at context `n` turns its bound variable into `x_n`,
//! which is exactly the variable the (∃) rule quantifies.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::sigmodel::{all_tuples, RelModel, Signature, Tuple};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CcqError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("variable x{var} is outside the context {context}")]
    OutOfContext { var: usize, context: usize },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("bound variable `{0}` shadows another variable")]
    Shadowing(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("symbol `{symbol}` takes {expected} arguments, got {got}")]
    ArityMismatch { symbol: String, expected: usize, got: usize },
    #[error("symbol `{0}` has nonzero coarity")]
    NotRelational(String),
    #[error("dangling bound variable")]
    DanglingBound,
    #[error("model does not interpret `{0}` as a relation of the right arity")]
    SignatureMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    Free(usize),
    Bound(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Top,
    Conj(Box<Formula>, Box<Formula>),
    Eq(Var, Var),
    Rel(String, Vec<Var>),
    Exists(Box<Formula>),
}

impl Formula {
    pub fn conj(a: Formula, b: Formula) -> Formula {
        Formula::Conj(Box::new(a), Box::new(b))
    }

    pub fn eq(i: usize, j: usize) -> Formula {
        Formula::Eq(Var::Free(i), Var::Free(j))
    }

    pub fn rel(symbol: &str, args: &[usize]) -> Formula {
        Formula::Rel(symbol.to_string(), args.iter().map(|&i| Var::Free(i)).collect())
    }

    /// `∃x_v. body`, binding the free variable `v` of `body`.
    pub fn exists(v: usize, body: Formula) -> Formula {
        Formula::Exists(Box::new(body.close(v)))
    }

    /// Conjunction of a list, left-associated; `Top` when empty.
    pub fn conj_all(parts: Vec<Formula>) -> Formula {
        parts.into_iter().reduce(Formula::conj).unwrap_or(Formula::Top)
    }

    /// Height of the syntax tree, leaves counting 1.
    pub fn depth(&self) -> usize {
        match self {
            Formula::Top | Formula::Eq(..) | Formula::Rel(..) => 1,
            Formula::Conj(a, b) => 1 + a.depth().max(b.depth()),
            Formula::Exists(b) => 1 + b.depth(),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.visit_vars(&mut |v| {
            if let Var::Free(i) = v {
                out.insert(i);
            }
        });
        out
    }

    fn visit_vars(&self, f: &mut impl FnMut(Var)) {
        match self {
            Formula::Top => {}
            Formula::Conj(a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
            Formula::Eq(a, b) => {
                f(*a);
                f(*b);
            }
            Formula::Rel(_, args) => args.iter().for_each(|&v| f(v)),
            Formula::Exists(b) => b.visit_vars(f),
        }
    }

    fn map_vars(&self, depth: usize, f: &impl Fn(Var, usize) -> Var) -> Formula {
        match self {
            Formula::Top => Formula::Top,
            Formula::Conj(a, b) => Formula::conj(a.map_vars(depth, f), b.map_vars(depth, f)),
            Formula::Eq(a, b) => Formula::Eq(f(*a, depth), f(*b, depth)),
            Formula::Rel(s, args) => Formula::Rel(s.clone(), args.iter().map(|&v| f(v, depth)).collect()),
            Formula::Exists(b) => Formula::Exists(Box::new(b.map_vars(depth + 1, f))),
        }
    }

    /// Renames every free variable through `f`.
    pub fn rename(&self, f: impl Fn(usize) -> usize) -> Formula {
        self.map_vars(0, &|v, _| match v {
            Var::Free(i) => Var::Free(f(i)),
            b => b,
        })
    }

    /// Simultaneous substitution: each `(replacement, replaced)` pair sends
    /// `x_replaced` to `x_replacement`.
    pub fn substitute(&self, pairs: &[(usize, usize)]) -> Formula {
        let map: HashMap<usize, usize> = pairs.iter().map(|&(new, old)| (old, new)).collect();
        self.rename(|i| map.get(&i).copied().unwrap_or(i))
    }

    /// Replaces the variable bound by the outermost binder of an `Exists`
    /// body with `x_v`.
    pub fn open(&self, v: usize) -> Formula {
        self.map_vars(0, &|var, d| match var {
            Var::Bound(k) if k == d => Var::Free(v),
            other => other,
        })
    }

    /// Inverse of [`Formula::open`].
    pub fn close(&self, v: usize) -> Formula {
        self.map_vars(0, &|var, d| match var {
            Var::Free(i) if i == v => Var::Bound(d),
            other => other,
        })
    }

    /// True when no bound index escapes its binders.
    pub fn is_locally_closed(&self) -> bool {
        fn go(f: &Formula, depth: usize) -> bool {
            let ok = |v: &Var| !matches!(v, Var::Bound(k) if *k >= depth);
            match f {
                Formula::Top => true,
                Formula::Conj(a, b) => go(a, depth) && go(b, depth),
                Formula::Eq(a, b) => ok(a) && ok(b),
                Formula::Rel(_, args) => args.iter().all(ok),
                Formula::Exists(b) => go(b, depth + 1),
            }
        }
        go(self, 0)
    }

    /// Relation symbols with the number of arguments they are applied to.
    pub fn symbols(&self) -> BTreeSet<(String, usize)> {
        let mut out = BTreeSet::new();
        fn go(f: &Formula, out: &mut BTreeSet<(String, usize)>) {
            match f {
                Formula::Top | Formula::Eq(..) => {}
                Formula::Conj(a, b) => {
                    go(a, out);
                    go(b, out);
                }
                Formula::Rel(s, args) => {
                    out.insert((s.clone(), args.len()));
                }
                Formula::Exists(b) => go(b, out),
            }
        }
        go(self, &mut out);
        out
    }

    /// Renders the formula; free variables at index `>= split` print as `y`.
    pub fn display_split(&self, split: Option<usize>) -> String {
        let mut s = String::new();
        self.write(&mut s, 0, split);
        s
    }

    fn write_var(v: Var, depth: usize, split: Option<usize>, out: &mut String) {
        match v {
            Var::Free(i) => match split {
                Some(n) if i >= n => out.push_str(&format!("y{}", i - n)),
                _ => out.push_str(&format!("x{i}")),
            },
            Var::Bound(k) if k < depth => out.push_str(&format!("z{}", depth - 1 - k)),
            Var::Bound(k) => out.push_str(&format!("?{k}")),
        }
    }

    fn write(&self, out: &mut String, depth: usize, split: Option<usize>) {
        match self {
            Formula::Top => out.push_str("top"),
            Formula::Eq(a, b) => {
                Self::write_var(*a, depth, split, out);
                out.push_str(" = ");
                Self::write_var(*b, depth, split, out);
            }
            Formula::Rel(s, args) => {
                out.push_str(s);
                out.push('(');
                for (i, v) in args.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    Self::write_var(*v, depth, split, out);
                }
                out.push(')');
            }
            Formula::Exists(b) => {
                out.push_str(&format!("exists z{depth}. "));
                b.write(out, depth + 1, split);
            }
            Formula::Conj(a, b) => {
                let wrap_left = matches!(**a, Formula::Eq(..) | Formula::Exists(_));
                let wrap_right = !matches!(**b, Formula::Top | Formula::Rel(..));
                wrap(out, wrap_left, |o| a.write(o, depth, split));
                out.push_str(" /\\ ");
                wrap(out, wrap_right, |o| b.write(o, depth, split));
            }
        }
    }
}

fn wrap(out: &mut String, parens: bool, body: impl FnOnce(&mut String)) {
    if parens {
        out.push('(');
    }
    body(out);
    if parens {
        out.push(')');
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_split(None))
    }
}

/// A judgment `n ⊢ φ`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Judgment {
    pub context: usize,
    pub formula: Formula,
}

impl Judgment {
    /// Builds a judgment after checking it against a relational signature.
    pub fn new(context: usize, formula: Formula, sig: &Signature) -> Result<Self, CcqError> {
        let j = Judgment { context, formula };
        j.validate(sig)?;
        Ok(j)
    }

    pub fn validate(&self, sig: &Signature) -> Result<(), CcqError> {
        if !self.formula.is_locally_closed() {
            return Err(CcqError::DanglingBound);
        }
        if let Some(&v) = self.formula.free_vars().iter().next_back() {
            if v >= self.context {
                return Err(CcqError::OutOfContext { var: v, context: self.context });
            }
        }
        for (s, got) in self.formula.symbols() {
            check_symbol(sig, &s, got)?;
        }
        Ok(())
    }
}

impl fmt::Display for Judgment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} |- {}", self.context, self.formula)
    }
}

fn check_symbol(sig: &Signature, symbol: &str, got: usize) -> Result<(), CcqError> {
    let sort = sig.get(symbol).ok_or_else(|| CcqError::UnknownSymbol(symbol.to_string()))?;
    if sort.m != 0 {
        return Err(CcqError::NotRelational(symbol.to_string()));
    }
    if sort.n != got {
        return Err(CcqError::ArityMismatch { symbol: symbol.to_string(), expected: sort.n, got });
    }
    Ok(())
}

// ---------------------------------------------------------------- parsing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(usize),
    Turnstile,
    And,
    LParen,
    RParen,
    Comma,
    Dot,
    Equals,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, CcqError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(text[start..i].to_string())));
            continue;
        } else if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n =
                text[start..i].parse().map_err(|_| CcqError::Syntax { pos: start, msg: "number too large".into() })?;
            out.push((start, Tok::Num(n)));
            continue;
        } else if text[i..].starts_with("|-") {
            i += 1;
            Tok::Turnstile
        } else if text[i..].starts_with("/\\") {
            i += 1;
            Tok::And
        } else {
            match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                '.' => Tok::Dot,
                '=' => Tok::Equals,
                _ => return Err(CcqError::Syntax { pos: i, msg: format!("unexpected `{c}`") }),
            }
        };
        i += 1;
        out.push((start, tok));
    }
    Ok(out)
}

/// A parsed judgment, one-sided (`n |- φ`) or two-sided (`n,m |- φ`).
///
/// In the two-sided form `y_j` is stored as the free variable `x_{n+j}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedJudgment {
    pub left: usize,
    pub right: Option<usize>,
    pub formula: Formula,
}

struct Parser<'a> {
    toks: &'a [(usize, Tok)],
    pos: usize,
    end: usize,
    left: usize,
    right: Option<usize>,
    scope: Vec<String>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, CcqError> {
        Err(CcqError::Syntax { pos: self.offset(), msg: msg.into() })
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), CcqError> {
        if self.peek() == Some(&t) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn ident(&mut self) -> Result<String, CcqError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn context_var(&self, name: &str) -> Option<Result<usize, CcqError>> {
        let (prefix, digits) = name.split_at(1);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let idx: usize = digits.parse().ok()?;
        match (prefix, self.right) {
            ("x", _) if idx < self.left => Some(Ok(idx)),
            ("x", _) => Some(Err(CcqError::OutOfContext { var: idx, context: self.left })),
            ("y", Some(m)) if idx < m => Some(Ok(self.left + idx)),
            ("y", Some(m)) => Some(Err(CcqError::OutOfContext { var: self.left + idx, context: self.left + m })),
            _ => None,
        }
    }

    fn var(&mut self) -> Result<Var, CcqError> {
        let name = self.ident()?;
        if let Some(p) = self.scope.iter().rposition(|s| *s == name) {
            return Ok(Var::Bound(self.scope.len() - 1 - p));
        }
        match self.context_var(&name) {
            Some(r) => r.map(Var::Free),
            None => Err(CcqError::UnknownVariable(name)),
        }
    }

    fn formula(&mut self) -> Result<Formula, CcqError> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Formula::conj(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, CcqError> {
        match self.peek() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let f = self.formula()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Some(Tok::Ident(s)) if s == "top" => {
                self.pos += 1;
                Ok(Formula::Top)
            }
            Some(Tok::Ident(s)) if s == "exists" => {
                self.pos += 1;
                let name = self.ident()?;
                let clash = self.scope.contains(&name)
                    || matches!(self.context_var(&name), Some(Ok(_)))
                    || name == "top"
                    || name == "exists";
                if clash {
                    return Err(CcqError::Shadowing(name));
                }
                self.expect(Tok::Dot, "`.`")?;
                self.scope.push(name);
                let body = self.formula()?;
                self.scope.pop();
                Ok(Formula::Exists(Box::new(body)))
            }
            Some(Tok::Ident(_)) => {
                if self.toks.get(self.pos + 1).map(|(_, t)| t) == Some(&Tok::LParen) {
                    let sym = self.ident()?;
                    self.pos += 1;
                    let mut args = Vec::new();
                    if self.peek() != Some(&Tok::RParen) {
                        args.push(self.var()?);
                        while self.peek() == Some(&Tok::Comma) {
                            self.pos += 1;
                            args.push(self.var()?);
                        }
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(Formula::Rel(sym, args))
                } else {
                    let a = self.var()?;
                    self.expect(Tok::Equals, "`=`")?;
                    let b = self.var()?;
                    Ok(Formula::Eq(a, b))
                }
            }
            _ => self.err("expected a formula"),
        }
    }
}

/// Parses `n |- φ` or `n,m |- φ` and validates it against `sig`.
pub fn parse_judgment(text: &str, sig: &Signature) -> Result<ParsedJudgment, CcqError> {
    let toks = lex(text)?;
    let mut p = Parser { toks: &toks, pos: 0, end: text.len(), left: 0, right: None, scope: Vec::new() };
    p.left = match p.peek() {
        Some(Tok::Num(n)) => *n,
        _ => return p.err("expected a context size"),
    };
    p.pos += 1;
    if p.peek() == Some(&Tok::Comma) {
        p.pos += 1;
        p.right = match p.peek() {
            Some(Tok::Num(m)) => Some(*m),
            _ => return p.err("expected a right context size"),
        };
        p.pos += 1;
    }
    p.expect(Tok::Turnstile, "`|-`")?;
    let formula = p.formula()?;
    if p.pos != toks.len() {
        return p.err("trailing input");
    }
    let parsed = ParsedJudgment { left: p.left, right: p.right, formula };
    Judgment { context: parsed.left + parsed.right.unwrap_or(0), formula: parsed.formula.clone() }.validate(sig)?;
    Ok(parsed)
}

/// Parses a judgment. A two-sided `n,m |- φ` becomes `n+m |- φ` with
/// `y_j` read as `x_{n+j}`.
pub fn parse_ccq(text: &str, sig: &Signature) -> Result<Judgment, CcqError> {
    let p = parse_judgment(text, sig)?;
    Ok(Judgment { context: p.left + p.right.unwrap_or(0), formula: p.formula })
}

// ---------------------------------------------------------------- semantics

struct Table {
    vars: Vec<usize>,
    rows: BTreeSet<Tuple>,
}

fn join(a: Table, b: Table) -> Table {
    let mut vars: Vec<usize> = a.vars.iter().chain(&b.vars).copied().collect();
    vars.sort_unstable();
    vars.dedup();
    let common: Vec<usize> = a.vars.iter().filter(|v| b.vars.contains(v)).copied().collect();
    let key = |t: &Table, row: &Tuple| -> Tuple {
        common.iter().map(|v| row[t.vars.iter().position(|w| w == v).unwrap()]).collect()
    };
    let mut index: HashMap<Tuple, Vec<&Tuple>> = HashMap::new();
    for row in &b.rows {
        index.entry(key(&b, row)).or_default().push(row);
    }
    let source: Vec<(bool, usize)> = vars
        .iter()
        .map(|v| match a.vars.iter().position(|w| w == v) {
            Some(i) => (true, i),
            None => (false, b.vars.iter().position(|w| w == v).unwrap()),
        })
        .collect();
    let mut rows = BTreeSet::new();
    for ra in &a.rows {
        if let Some(matches) = index.get(&key(&a, ra)) {
            for rb in matches {
                rows.insert(source.iter().map(|&(left, i)| if left { ra[i] } else { rb[i] }).collect());
            }
        }
    }
    Table { vars, rows }
}

enum Atom<'a> {
    Eq(usize, usize),
    Rel(&'a str, Vec<usize>),
}

/// Collects the atoms of `f`, naming each existential with a fresh variable
/// numbered from `*next`. `env` holds the names of the enclosing binders.
fn flatten<'a>(
    f: &'a Formula,
    ctx: usize,
    env: &mut Vec<usize>,
    next: &mut usize,
    out: &mut Vec<Atom<'a>>,
) -> Result<(), CcqError> {
    let resolve = |v: &Var, env: &[usize]| match *v {
        Var::Free(i) if i < ctx => Ok(i),
        Var::Free(i) => Err(CcqError::OutOfContext { var: i, context: ctx }),
        Var::Bound(k) => env.len().checked_sub(k + 1).map(|p| env[p]).ok_or(CcqError::DanglingBound),
    };
    match f {
        Formula::Top => {}
        Formula::Eq(a, b) => out.push(Atom::Eq(resolve(a, env)?, resolve(b, env)?)),
        Formula::Rel(s, args) => {
            let idx = args.iter().map(|a| resolve(a, env)).collect::<Result<_, _>>()?;
            out.push(Atom::Rel(s, idx));
        }
        Formula::Conj(a, b) => {
            flatten(a, ctx, env, next, out)?;
            flatten(b, ctx, env, next, out)?;
        }
        Formula::Exists(body) => {
            env.push(*next);
            *next += 1;
            flatten(body, ctx, env, next, out)?;
            env.pop();
        }
    }
    Ok(())
}

fn find(parent: &mut BTreeMap<usize, usize>, v: usize) -> usize {
    let p = *parent.get(&v).unwrap_or(&v);
    if p == v {
        return v;
    }
    let root = find(parent, p);
    parent.insert(v, root);
    root
}

fn project(t: Table, keep: impl Fn(usize) -> bool) -> Table {
    let cols: Vec<usize> = (0..t.vars.len()).filter(|&i| keep(t.vars[i])).collect();
    if cols.len() == t.vars.len() {
        return t;
    }
    Table {
        vars: cols.iter().map(|&i| t.vars[i]).collect(),
        rows: t.rows.iter().map(|r| cols.iter().map(|&i| r[i]).collect()).collect(),
    }
}

fn rel_table(s: &str, idx: &[usize], m: &RelModel) -> Result<Table, CcqError> {
    let rho = m.rho(s).ok_or_else(|| CcqError::SignatureMismatch(s.to_string()))?;
    if m.signature().get(s).map(|so| (so.n, so.m)) != Some((idx.len(), 0)) {
        return Err(CcqError::SignatureMismatch(s.to_string()));
    }
    let mut vars = idx.to_vec();
    vars.sort_unstable();
    vars.dedup();
    let mut rows = BTreeSet::new();
    'tuples: for (t, _) in rho {
        let mut row = vec![u32::MAX; vars.len()];
        for (k, &v) in idx.iter().enumerate() {
            let slot = vars.binary_search(&v).unwrap();
            if row[slot] != u32::MAX && row[slot] != t[k] {
                continue 'tuples;
            }
            row[slot] = t[k];
        }
        rows.insert(row);
    }
    Ok(Table { vars, rows })
}

/// Evaluates `f` over variables `0..ctx` with its existentials lifted out:
/// equations become renamings, atoms are joined most shared variables
/// first, and existential variables are dropped once no pending atom
/// mentions them.
fn eval_table(f: &Formula, ctx: usize, m: &RelModel) -> Result<Table, CcqError> {
    let mut atoms = Vec::new();
    let mut next = ctx;
    flatten(f, ctx, &mut Vec::new(), &mut next, &mut atoms)?;
    let mut parent = BTreeMap::new();
    let mut rels = Vec::new();
    for atom in atoms {
        match atom {
            Atom::Eq(a, b) => {
                let (a, b) = (find(&mut parent, a), find(&mut parent, b));
                parent.insert(a.max(b), a.min(b));
                parent.entry(a.min(b)).or_insert(a.min(b));
            }
            Atom::Rel(s, idx) => rels.push((s, idx)),
        }
    }
    let rep: Vec<usize> = (0..next).map(|v| find(&mut parent, v)).collect();
    let mut tables = Vec::new();
    for (s, idx) in rels {
        let idx: Vec<usize> = idx.iter().map(|&v| rep[v]).collect();
        tables.push(rel_table(s, &idx, m)?);
    }
    // classes no atom constrains still range over the carrier
    let used: BTreeSet<usize> = tables.iter().flat_map(|t| t.vars.iter().copied()).collect();
    let classes: BTreeSet<usize> = (0..next).filter(|&v| v >= ctx || parent.contains_key(&v)).map(|v| rep[v]).collect();
    for r in classes.difference(&used) {
        tables.push(Table { vars: vec![*r], rows: (0..m.size() as u32).map(|x| vec![x]).collect() });
    }
    let mut acc = Table { vars: vec![], rows: [vec![]].into_iter().collect() };
    while !tables.is_empty() {
        let pick = (0..tables.len())
            .max_by_key(|&i| {
                let shared = tables[i].vars.iter().filter(|v| acc.vars.contains(v)).count();
                (shared, std::cmp::Reverse(tables[i].rows.len()))
            })
            .unwrap();
        acc = join(acc, tables.swap_remove(pick));
        if acc.rows.is_empty() {
            return Ok(Table { vars: vec![], rows: BTreeSet::new() });
        }
        let pending: BTreeSet<usize> = tables.iter().flat_map(|t| t.vars.iter().copied()).collect();
        acc = project(acc, |v| v < ctx || pending.contains(&v));
    }
    // copy each class representative into the other free members
    let extra: Vec<usize> = (0..ctx).filter(|&v| rep[v] != v).collect();
    if extra.is_empty() {
        return Ok(acc);
    }
    let mut vars = acc.vars.clone();
    vars.extend(&extra);
    vars.sort_unstable();
    let source: Vec<usize> =
        vars.iter().map(|&v| acc.vars.iter().position(|&w| w == rep[v]).expect("representative is bound")).collect();
    let rows = acc.rows.iter().map(|row| source.iter().map(|&i| row[i]).collect()).collect();
    Ok(Table { vars, rows })
}

/// `⟦n ⊢ φ⟧_M ⊆ X^n`, as a sorted set of tuples.
pub fn eval_ccq(j: &Judgment, m: &RelModel) -> Result<BTreeSet<Tuple>, CcqError> {
    let t = eval_table(&j.formula, j.context, m)?;
    if let Some(&v) = t.vars.iter().find(|&&v| v >= j.context) {
        return Err(CcqError::OutOfContext { var: v, context: j.context });
    }
    let missing: Vec<usize> = (0..j.context).filter(|v| !t.vars.contains(v)).collect();
    let mut out = BTreeSet::new();
    for row in &t.rows {
        for extra in all_tuples(missing.len(), m.size()) {
            let mut full = vec![0u32; j.context];
            for (k, &v) in t.vars.iter().enumerate() {
                full[v] = row[k];
            }
            for (k, &v) in missing.iter().enumerate() {
                full[v] = extra[k];
            }
            out.insert(full);
        }
    }
    Ok(out)
}

/// Tarskian satisfaction under an assignment of the free variables.
pub fn satisfies(f: &Formula, env: &[u32], m: &RelModel) -> bool {
    fn go(f: &Formula, env: &mut Vec<u32>, m: &RelModel) -> bool {
        let val = |v: &Var, env: &Vec<u32>| match v {
            Var::Free(i) => env[*i],
            Var::Bound(k) => env[env.len() - 1 - k],
        };
        match f {
            Formula::Top => true,
            Formula::Conj(a, b) => go(a, env, m) && go(b, env, m),
            Formula::Eq(a, b) => val(a, env) == val(b, env),
            Formula::Rel(s, args) => {
                let t: Tuple = args.iter().map(|v| val(v, env)).collect();
                m.rho(s).is_some_and(|r| r.contains(&(t, vec![])))
            }
            Formula::Exists(b) => (0..m.size() as u32).any(|x| {
                env.push(x);
                let ok = go(b, env, m);
                env.pop();
                ok
            }),
        }
    }
    go(f, &mut env.to_vec(), m)
}

// ---------------------------------------------------------------- derivations

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rule {
    Top,
    Sigma {
        symbol: String,
        arity: usize,
    },
    Exists,
    Eq,
    Conj,
    /// Swaps `x_k` and `x_{k+1}` in context `n`.
    Sw {
        n: usize,
        k: usize,
    },
    /// Identifies `x_{n-1}` with `x_{n-2}`, shrinking the context from `n`.
    Id {
        n: usize,
    },
    /// Adds an unused variable to context `n`.
    Nu {
        n: usize,
    },
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::Top => write!(f, "(top)"),
            Rule::Sigma { symbol, .. } => write!(f, "(Sigma {symbol})"),
            Rule::Exists => write!(f, "(exists)"),
            Rule::Eq => write!(f, "(=)"),
            Rule::Conj => write!(f, "(and)"),
            Rule::Sw { n, k } => write!(f, "(Sw {n},{k})"),
            Rule::Id { n } => write!(f, "(Id {n})"),
            Rule::Nu { n } => write!(f, "(Nu {n})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derivation {
    pub rule: Rule,
    pub premises: Vec<Derivation>,
    pub conclusion: Judgment,
}

impl Derivation {
    fn leaf(rule: Rule, context: usize, formula: Formula) -> Self {
        Derivation { rule, premises: vec![], conclusion: Judgment { context, formula } }
    }

    /// Applies a unary rule; `None` when its side condition fails.
    fn unary(rule: Rule, p: Derivation) -> Option<Derivation> {
        let conclusion = rule_conclusion(&rule, std::slice::from_ref(&p.conclusion))?;
        Some(Derivation { rule, premises: vec![p], conclusion })
    }

    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(Derivation::size).sum::<usize>()
    }

    /// True when every node's conclusion follows from its premises.
    pub fn is_valid(&self, sig: &Signature) -> bool {
        let premises: Vec<Judgment> = self.premises.iter().map(|p| p.conclusion.clone()).collect();
        if let Rule::Sigma { symbol, arity } = &self.rule {
            if sig.get(symbol).map(|so| (so.n, so.m)) != Some((*arity, 0)) {
                return false;
            }
        }
        rule_conclusion(&self.rule, &premises).as_ref() == Some(&self.conclusion)
            && self.premises.iter().all(|p| p.is_valid(sig))
    }
}

/// The conclusion a rule yields from the given premises.
pub fn rule_conclusion(rule: &Rule, premises: &[Judgment]) -> Option<Judgment> {
    let j = |context, formula| Some(Judgment { context, formula });
    match (rule, premises) {
        (Rule::Top, []) => j(0, Formula::Top),
        (Rule::Eq, []) => j(2, Formula::eq(0, 1)),
        (Rule::Sigma { symbol, arity }, []) => {
            let args: Vec<usize> = (0..*arity).collect();
            j(*arity, Formula::rel(symbol, &args))
        }
        (Rule::Exists, [p]) if p.context > 0 => j(p.context - 1, Formula::exists(p.context - 1, p.formula.clone())),
        (Rule::Conj, [a, b]) => {
            let shift = a.context;
            j(a.context + b.context, Formula::conj(a.formula.clone(), b.formula.rename(|i| i + shift)))
        }
        (Rule::Sw { n, k }, [p]) if p.context == *n && k + 1 < *n => {
            j(*n, p.formula.substitute(&[(k + 1, *k), (*k, k + 1)]))
        }
        (Rule::Id { n }, [p]) if p.context == *n && *n >= 2 => j(n - 1, p.formula.substitute(&[(n - 2, n - 1)])),
        (Rule::Nu { n }, [p]) if p.context == *n => j(n + 1, p.formula.clone()),
        _ => None,
    }
}

fn sigma_leaf(symbol: &str, arity: usize) -> Derivation {
    let args: Vec<usize> = (0..arity).collect();
    let rule = Rule::Sigma { symbol: symbol.to_string(), arity };
    Derivation::leaf(rule, arity, Formula::rel(symbol, &args))
}

fn step(d: Derivation, rule: Rule) -> Derivation {
    Derivation::unary(rule, d).expect("structural rule side condition")
}

fn swap_at(d: Derivation, cur: &mut [usize], k: usize) -> Derivation {
    cur.swap(k, k + 1);
    let n = d.conclusion.context;
    step(d, Rule::Sw { n, k })
}

/// Renames the context of `d` along `f` (variable `i` becomes `f[i]`) into
/// context `n`, using only (Sw), (Id) and (Nu).
fn remap(mut d: Derivation, f: &[usize], n: usize) -> Derivation {
    let mut cur = f.to_vec();
    // identify variables sharing a target
    loop {
        let dup = (0..cur.len()).find_map(|i| ((i + 1)..cur.len()).find(|&j| cur[i] == cur[j]).map(|j| (i, j)));
        let Some((i, j)) = dup else { break };
        let last = cur.len() - 1;
        for p in j..last {
            d = swap_at(d, &mut cur, p);
        }
        for p in i..last - 1 {
            d = swap_at(d, &mut cur, p);
        }
        let ctx = d.conclusion.context;
        d = step(d, Rule::Id { n: ctx });
        cur.pop();
    }
    for t in 0..n {
        if !cur.contains(&t) {
            let ctx = d.conclusion.context;
            d = step(d, Rule::Nu { n: ctx });
            cur.push(t);
        }
    }
    // bubble sort into place
    for pass in 0..cur.len() {
        for k in 0..cur.len().saturating_sub(pass + 1) {
            if cur[k] > cur[k + 1] {
                d = swap_at(d, &mut cur, k);
            }
        }
    }
    d
}

/// Builds a derivation of `j` in the eight-rule calculus.
pub fn derive(j: &Judgment, sig: &Signature) -> Result<Derivation, CcqError> {
    j.validate(sig)?;
    Ok(derive_formula(&j.formula, j.context))
}

/// Derives `f` over exactly its free variables, renumbered in order.
/// Returns the derivation and the original index of each position.
fn derive_compact(f: &Formula) -> (Derivation, Vec<usize>) {
    let vars: Vec<usize> = f.free_vars().into_iter().collect();
    let g = f.rename(|i| vars.binary_search(&i).expect("free variable"));
    (derive_formula(&g, vars.len()), vars)
}

fn derive_formula(f: &Formula, n: usize) -> Derivation {
    match f {
        Formula::Top => remap(Derivation::leaf(Rule::Top, 0, Formula::Top), &[], n),
        Formula::Eq(a, b) => {
            let (Var::Free(a), Var::Free(b)) = (a, b) else { unreachable!("opened formula") };
            remap(Derivation::leaf(Rule::Eq, 2, Formula::eq(0, 1)), &[*a, *b], n)
        }
        Formula::Rel(s, args) => {
            let idx: Vec<usize> = args
                .iter()
                .map(|v| match v {
                    Var::Free(i) => *i,
                    Var::Bound(_) => unreachable!("opened formula"),
                })
                .collect();
            remap(sigma_leaf(s, idx.len()), &idx, n)
        }
        Formula::Conj(a, b) => {
            let (da, va) = derive_compact(a);
            let (db, vb) = derive_compact(b);
            let both = Derivation {
                rule: Rule::Conj,
                conclusion: rule_conclusion(&Rule::Conj, &[da.conclusion.clone(), db.conclusion.clone()])
                    .expect("conjunction"),
                premises: vec![da, db],
            };
            let f: Vec<usize> = va.into_iter().chain(vb).collect();
            remap(both, &f, n)
        }
        Formula::Exists(body) => {
            let inner = derive_formula(&body.open(n), n + 1);
            step(inner, Rule::Exists)
        }
    }
}

/// Evaluates a derivation bottom-up, node by node, following the semantics
/// of each rule.
pub fn replay(d: &Derivation, m: &RelModel) -> Result<BTreeSet<Tuple>, CcqError> {
    let size = m.size() as u32;
    let prem = |i: usize| replay(&d.premises[i], m);
    Ok(match &d.rule {
        Rule::Top => [vec![]].into_iter().collect(),
        Rule::Eq => (0..size).map(|x| vec![x, x]).collect(),
        Rule::Sigma { symbol: s, .. } => {
            let rho = m.rho(s).ok_or_else(|| CcqError::SignatureMismatch(s.clone()))?;
            rho.iter().map(|(a, _)| a.clone()).collect()
        }
        Rule::Exists => prem(0)?
            .into_iter()
            .map(|mut t| {
                t.pop();
                t
            })
            .collect(),
        Rule::Conj => {
            let a = prem(0)?;
            let b = prem(1)?;
            let mut out = BTreeSet::new();
            for u in &a {
                for v in &b {
                    let mut t = u.clone();
                    t.extend_from_slice(v);
                    out.insert(t);
                }
            }
            out
        }
        Rule::Sw { k, .. } => prem(0)?
            .into_iter()
            .map(|mut t| {
                t.swap(*k, k + 1);
                t
            })
            .collect(),
        Rule::Id { n } => prem(0)?
            .into_iter()
            .filter(|t| t[n - 1] == t[n - 2])
            .map(|mut t| {
                t.pop();
                t
            })
            .collect(),
        Rule::Nu { .. } => {
            let mut out = BTreeSet::new();
            for t in prem(0)? {
                for x in 0..size {
                    let mut t = t.clone();
                    t.push(x);
                    out.insert(t);
                }
            }
            out
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn sig() -> Signature {
        Signature::from_symbols([("R", 2, 0), ("P", 1, 0)]).unwrap()
    }

    fn model(size: usize, r: &[[u32; 2]]) -> RelModel {
        let mut rho = BTreeMap::new();
        rho.insert("R".to_string(), r.iter().map(|t| (t.to_vec(), vec![])).collect());
        RelModel::with_size(sig(), size, rho).unwrap()
    }

    #[test]
    fn parse_intro() {
        let j = parse_ccq("2 |- exists z0. (x0 = x1) /\\ R(x0, z0)", &sig()).unwrap();
        assert_eq!(j.context, 2);
        let expected = Formula::exists(2, Formula::conj(Formula::eq(0, 1), Formula::rel("R", &[0, 2])));
        assert_eq!(j.formula, expected);
        assert_eq!(j.to_string(), "2 |- exists z0. (x0 = x1) /\\ R(x0, z0)");
    }

    #[test]
    fn parse_basic_and_errors() {
        let j = parse_ccq("0 |- top", &sig()).unwrap();
        assert_eq!(j, Judgment { context: 0, formula: Formula::Top });
        assert_eq!(parse_ccq("1 |- x0 = x1", &sig()), Err(CcqError::OutOfContext { var: 1, context: 1 }));
        assert_eq!(parse_ccq("1 |- S(x0)", &sig()), Err(CcqError::UnknownSymbol("S".into())));
        assert!(matches!(parse_ccq("1 |- R(x0)", &sig()), Err(CcqError::ArityMismatch { .. })));
        assert!(matches!(parse_ccq("1 |- exists x0. P(x0)", &sig()), Err(CcqError::Shadowing(_))));
        assert!(matches!(parse_ccq("1 |- exists z. exists z. P(z)", &sig()), Err(CcqError::Shadowing(_))));
        assert!(matches!(parse_ccq("1 |- P(x0) /\\", &sig()), Err(CcqError::Syntax { .. })));
        assert!(matches!(parse_ccq("|- top", &sig()), Err(CcqError::Syntax { .. })));
        assert!(matches!(parse_ccq("1 |- P(w)", &sig()), Err(CcqError::UnknownVariable(_))));
    }

    #[test]
    fn exists_scope_extends_right() {
        let j = parse_ccq("1 |- P(x0) /\\ exists a. P(a) /\\ R(x0, a)", &sig()).unwrap();
        let expected = Formula::conj(
            Formula::rel("P", &[0]),
            Formula::exists(1, Formula::conj(Formula::rel("P", &[1]), Formula::rel("R", &[0, 1]))),
        );
        assert_eq!(j.formula, expected);
    }

    #[test]
    fn two_sided_parse() {
        let p = parse_judgment("1,2 |- (x0 = y0) /\\ (x0 = y1)", &sig()).unwrap();
        assert_eq!((p.left, p.right), (1, Some(2)));
        assert_eq!(p.formula, Formula::conj(Formula::eq(0, 1), Formula::eq(0, 2)));
        assert_eq!(p.formula.display_split(Some(1)), "(x0 = y0) /\\ (x0 = y1)");
        assert!(parse_judgment("1,1 |- x0 = y1", &sig()).is_err());
    }

    #[test]
    fn print_parse_round_trip_nested() {
        let text = "2 |- R(x0, x1) /\\ (exists z0. P(z0) /\\ (exists z1. R(z0, z1))) /\\ (P(x1) /\\ top)";
        let j = parse_ccq(text, &sig()).unwrap();
        let again = parse_ccq(&j.to_string(), &sig()).unwrap();
        assert_eq!(j, again);
        assert_eq!(j.to_string(), text);
    }

    #[test]
    fn substitution_examples() {
        let f = Formula::eq(0, 1);
        assert_eq!(f.substitute(&[(0, 1)]), Formula::eq(0, 0));
        let r = Formula::rel("R", &[0, 1]);
        assert_eq!(r.substitute(&[(1, 0), (0, 1)]), Formula::rel("R", &[1, 0]));
        assert_eq!(r.substitute(&[]), r);
        let e = Formula::exists(1, Formula::rel("R", &[0, 1]));
        assert_eq!(e.substitute(&[(1, 0)]), Formula::exists(2, Formula::rel("R", &[1, 2])));
    }

    #[test]
    fn eval_examples() {
        let empty = model(0, &[]);
        let top = Judgment { context: 0, formula: Formula::Top };
        assert_eq!(eval_ccq(&top, &empty).unwrap(), [vec![]].into_iter().collect());

        let ab = model(2, &[[0, 0]]);
        let eq = Judgment { context: 2, formula: Formula::eq(0, 1) };
        assert_eq!(eval_ccq(&eq, &ab).unwrap(), [vec![0, 0], vec![1, 1]].into_iter().collect());

        let phi = parse_ccq("2 |- exists z0. (x0 = x1) /\\ R(x0, z0)", &sig()).unwrap();
        assert_eq!(eval_ccq(&phi, &ab).unwrap(), [vec![0, 0]].into_iter().collect());
    }

    #[test]
    fn exists_over_empty_carrier() {
        let j = parse_ccq("0 |- exists z. top", &sig()).unwrap();
        assert!(eval_ccq(&j, &model(0, &[])).unwrap().is_empty());
        assert_eq!(eval_ccq(&j, &model(1, &[])).unwrap().len(), 1);
    }

    #[test]
    fn derive_shapes() {
        let d = derive(&Judgment { context: 2, formula: Formula::eq(0, 1) }, &sig()).unwrap();
        assert_eq!(d.rule, Rule::Eq);
        assert!(d.premises.is_empty());

        let d = derive(&Judgment { context: 3, formula: Formula::eq(0, 1) }, &sig()).unwrap();
        assert_eq!(d.rule, Rule::Nu { n: 2 });
        assert_eq!(d.premises[0].rule, Rule::Eq);

        let d = derive(&Judgment { context: 2, formula: Formula::rel("R", &[0, 1]) }, &sig()).unwrap();
        assert_eq!(d.rule, Rule::Sigma { symbol: "R".into(), arity: 2 });
        assert!(d.premises.is_empty());
    }

    #[test]
    fn derive_concludes_input() {
        for text in [
            "2 |- exists z0. (x0 = x1) /\\ R(x0, z0)",
            "3 |- R(x2, x0) /\\ P(x2) /\\ (x1 = x1)",
            "1 |- R(x0, x0)",
            "0 |- exists a. exists b. R(b, a) /\\ top",
            "3 |- top",
        ] {
            let j = parse_ccq(text, &sig()).unwrap();
            let d = derive(&j, &sig()).unwrap();
            assert_eq!(d.conclusion, j, "{text}");
            assert!(d.is_valid(&sig()), "{text}");
        }
    }

    #[test]
    fn replay_matches_eval_small() {
        let j = parse_ccq("2 |- exists z0. (x0 = x1) /\\ R(x0, z0)", &sig()).unwrap();
        let d = derive(&j, &sig()).unwrap();
        for m in [model(0, &[]), model(2, &[[0, 0]]), model(3, &[[0, 1], [2, 2], [1, 0]])] {
            assert_eq!(replay(&d, &m).unwrap(), eval_ccq(&j, &m).unwrap());
        }
    }
}
