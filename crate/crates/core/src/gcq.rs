//! Diagrammatic query terms: syntax, sort inference, n-fold sugar and the
//! relational semantics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::sigmodel::{all_tuples, RelModel, Relation, SigError, Signature, Sort, Tuple};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GcqError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("cannot compose {left} with {right}: {} != {}", left.m, right.n)]
    SortMismatch { left: Sort, right: Sort },
    #[error("symbol `{symbol}` has sort {expected} in the model, {got} in the term")]
    SignatureMismatch { symbol: String, expected: String, got: Sort },
    #[error(transparent)]
    Relation(#[from] SigError),
}

/// A term with its sort cached at every node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GcqTerm {
    Copy,
    Discard,
    Merge,
    Spawn,
    Id0,
    Id1,
    Swap,
    Gen { name: String, sort: Sort },
    Seq(Box<GcqTerm>, Box<GcqTerm>, Sort),
    Tensor(Box<GcqTerm>, Box<GcqTerm>, Sort),
}

impl GcqTerm {
    pub fn sort(&self) -> Sort {
        match self {
            GcqTerm::Copy => Sort::new(1, 2),
            GcqTerm::Discard => Sort::new(1, 0),
            GcqTerm::Merge => Sort::new(2, 1),
            GcqTerm::Spawn => Sort::new(0, 1),
            GcqTerm::Id0 => Sort::new(0, 0),
            GcqTerm::Id1 => Sort::new(1, 1),
            GcqTerm::Swap => Sort::new(2, 2),
            GcqTerm::Gen { sort, .. } | GcqTerm::Seq(_, _, sort) | GcqTerm::Tensor(_, _, sort) => *sort,
        }
    }

    pub fn gen(name: &str, sig: &Signature) -> Result<GcqTerm, GcqError> {
        let sort = sig.get(name).ok_or_else(|| GcqError::UnknownSymbol(name.to_string()))?;
        Ok(GcqTerm::Gen { name: name.to_string(), sort })
    }

    pub fn seq(a: GcqTerm, b: GcqTerm) -> Result<GcqTerm, GcqError> {
        let (sa, sb) = (a.sort(), b.sort());
        if sa.m != sb.n {
            return Err(GcqError::SortMismatch { left: sa, right: sb });
        }
        Ok(GcqTerm::Seq(Box::new(a), Box::new(b), Sort::new(sa.n, sb.m)))
    }

    pub fn tensor(a: GcqTerm, b: GcqTerm) -> GcqTerm {
        let (sa, sb) = (a.sort(), b.sort());
        GcqTerm::Tensor(Box::new(a), Box::new(b), Sort::new(sa.n + sb.n, sa.m + sb.m))
    }

    /// `self ; next`. Panics on a sort mismatch, so it is meant for terms
    /// whose sorts are known to fit.
    pub fn then(self, next: GcqTerm) -> GcqTerm {
        GcqTerm::seq(self, next).expect("sorts of composed terms agree")
    }

    /// `self (+) other`.
    pub fn par(self, other: GcqTerm) -> GcqTerm {
        GcqTerm::tensor(self, other)
    }

    /// Number of leaves of the syntax tree.
    pub fn leaves(&self) -> usize {
        match self {
            GcqTerm::Seq(a, b, _) | GcqTerm::Tensor(a, b, _) => a.leaves() + b.leaves(),
            _ => 1,
        }
    }

    /// Relation symbols occurring in the term, with their sorts.
    pub fn symbols(&self) -> BTreeMap<String, Sort> {
        let mut out = BTreeMap::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeMap<String, Sort>) {
        match self {
            GcqTerm::Gen { name, sort } => {
                out.insert(name.clone(), *sort);
            }
            GcqTerm::Seq(a, b, _) | GcqTerm::Tensor(a, b, _) => {
                a.collect_symbols(out);
                b.collect_symbols(out);
            }
            _ => {}
        }
    }

    /// The smallest signature containing every symbol of the term.
    pub fn signature(&self) -> Result<Signature, SigError> {
        let mut sig = Signature::new();
        for (name, sort) in self.symbols() {
            sig.add(&name, sort)?;
        }
        Ok(sig)
    }

    /// Rechecks every cached sort and symbol against `sig`.
    pub fn check(&self, sig: &Signature) -> Result<Sort, GcqError> {
        match self {
            GcqTerm::Gen { name, sort } => match sig.get(name) {
                Some(s) if s == *sort => Ok(s),
                Some(s) => {
                    Err(GcqError::SignatureMismatch { symbol: name.clone(), expected: s.to_string(), got: *sort })
                }
                None => Err(GcqError::UnknownSymbol(name.clone())),
            },
            GcqTerm::Seq(a, b, s) => {
                let (sa, sb) = (a.check(sig)?, b.check(sig)?);
                if sa.m != sb.n || *s != Sort::new(sa.n, sb.m) {
                    return Err(GcqError::SortMismatch { left: sa, right: sb });
                }
                Ok(*s)
            }
            GcqTerm::Tensor(a, b, s) => {
                let (sa, sb) = (a.check(sig)?, b.check(sig)?);
                debug_assert_eq!(*s, Sort::new(sa.n + sb.n, sa.m + sb.m));
                Ok(*s)
            }
            _ => Ok(self.sort()),
        }
    }

    fn write(&self, out: &mut String) {
        match self {
            GcqTerm::Copy => out.push_str("copy"),
            GcqTerm::Discard => out.push_str("discard"),
            GcqTerm::Merge => out.push_str("merge"),
            GcqTerm::Spawn => out.push_str("spawn"),
            GcqTerm::Id0 => out.push_str("id0"),
            GcqTerm::Id1 => out.push_str("id"),
            GcqTerm::Swap => out.push_str("swap"),
            GcqTerm::Gen { name, .. } => out.push_str(name),
            GcqTerm::Seq(a, b, _) => {
                a.write(out);
                out.push_str(" ; ");
                b.write_wrapped(out, matches!(**b, GcqTerm::Seq(..)));
            }
            GcqTerm::Tensor(a, b, _) => {
                a.write_wrapped(out, matches!(**a, GcqTerm::Seq(..)));
                out.push_str(" (+) ");
                b.write_wrapped(out, matches!(**b, GcqTerm::Seq(..) | GcqTerm::Tensor(..)));
            }
        }
    }

    fn write_wrapped(&self, out: &mut String, parens: bool) {
        if parens {
            out.push('(');
        }
        self.write(out);
        if parens {
            out.push(')');
        }
    }
}

impl fmt::Display for GcqTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.write(&mut s);
        f.write_str(&s)
    }
}

// ---------------------------------------------------------------- sugar

/// `id_k`: the tensor of `k` identity wires, `id0` when `k = 0`.
pub fn id_n(k: usize) -> GcqTerm {
    tensor_all((0..k).map(|_| GcqTerm::Id1).collect())
}

/// Left-associated tensor of a list; `id0` when empty.
pub fn tensor_all(terms: Vec<GcqTerm>) -> GcqTerm {
    terms.into_iter().reduce(GcqTerm::tensor).unwrap_or(GcqTerm::Id0)
}

/// Left-associated composite of a non-empty list of terms.
pub fn seq_all(terms: Vec<GcqTerm>) -> GcqTerm {
    terms.into_iter().reduce(GcqTerm::then).expect("non-empty composite")
}

/// Copies a bundle of `n` wires: sort `(n, 2n)`, `v ↦ (v, v)`.
pub fn n_copy(n: usize) -> GcqTerm {
    match n {
        0 => GcqTerm::Id0,
        1 => GcqTerm::Copy,
        _ => {
            let k = n - 1;
            GcqTerm::Copy.par(n_copy(k)).then(tensor_all(vec![GcqTerm::Id1, n_swap(1, k), id_n(k)]))
        }
    }
}

/// Merges two bundles of `n` wires: sort `(2n, n)`.
pub fn n_merge(n: usize) -> GcqTerm {
    match n {
        0 => GcqTerm::Id0,
        1 => GcqTerm::Merge,
        _ => {
            let k = n - 1;
            tensor_all(vec![GcqTerm::Id1, n_swap(k, 1), id_n(k)]).then(GcqTerm::Merge.par(n_merge(k)))
        }
    }
}

/// Discards `n` wires: sort `(n, 0)`.
pub fn n_discard(n: usize) -> GcqTerm {
    tensor_all((0..n).map(|_| GcqTerm::Discard).collect())
}

/// Spawns `n` wires: sort `(0, n)`.
pub fn n_spawn(n: usize) -> GcqTerm {
    tensor_all((0..n).map(|_| GcqTerm::Spawn).collect())
}

/// Crosses `n` wires over `m` wires: sort `(n+m, m+n)`.
pub fn n_swap(n: usize, m: usize) -> GcqTerm {
    match (n, m) {
        (0, _) => id_n(m),
        (_, 0) => id_n(n),
        (1, 1) => GcqTerm::Swap,
        (1, _) => GcqTerm::Swap.par(id_n(m - 1)).then(GcqTerm::Id1.par(n_swap(1, m - 1))),
        _ => GcqTerm::Id1.par(n_swap(n - 1, m)).then(n_swap(1, m).par(id_n(n - 1))),
    }
}

/// A wire permutation of sort `(k, k)`: output `p` carries input `perm[p]`.
pub fn permutation(perm: &[usize]) -> GcqTerm {
    let k = perm.len();
    let mut cur: Vec<usize> = (0..k).collect();
    let rank: Vec<usize> = {
        let mut r = vec![0; k];
        for (p, &i) in perm.iter().enumerate() {
            r[i] = p;
        }
        r
    };
    let mut layers = Vec::new();
    for pass in 0..k {
        for j in 0..k.saturating_sub(pass + 1) {
            if rank[cur[j]] > rank[cur[j + 1]] {
                cur.swap(j, j + 1);
                layers.push(tensor_all(vec![id_n(j), GcqTerm::Swap, id_n(k - j - 2)]));
            }
        }
    }
    if layers.is_empty() {
        id_n(k)
    } else {
        seq_all(layers)
    }
}

// ---------------------------------------------------------------- parsing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Semi,
    Plus,
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, GcqError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(text[start..i].to_string())));
        } else if text[i..].starts_with("(+)") {
            i += 3;
            out.push((start, Tok::Plus));
        } else {
            let tok = match c {
                b';' => Tok::Semi,
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                _ => {
                    let ch = text[i..].chars().next().unwrap_or('?');
                    return Err(GcqError::Syntax { pos: i, msg: format!("unexpected `{ch}`") });
                }
            };
            i += 1;
            out.push((start, tok));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: &'a [(usize, Tok)],
    pos: usize,
    end: usize,
    sig: &'a Signature,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn seq(&mut self) -> Result<GcqTerm, GcqError> {
        let mut lhs = self.tensor()?;
        while self.peek() == Some(&Tok::Semi) {
            self.pos += 1;
            let rhs = self.tensor()?;
            lhs = GcqTerm::seq(lhs, rhs)?;
        }
        Ok(lhs)
    }

    fn tensor(&mut self) -> Result<GcqTerm, GcqError> {
        let mut lhs = self.atom()?;
        while self.peek() == Some(&Tok::Plus) {
            self.pos += 1;
            let rhs = self.atom()?;
            lhs = GcqTerm::tensor(lhs, rhs);
        }
        Ok(lhs)
    }

    fn atom(&mut self) -> Result<GcqTerm, GcqError> {
        let pos = self.offset();
        match self.peek().cloned() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let t = self.seq()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(GcqError::Syntax { pos: self.offset(), msg: "expected `)`".into() });
                }
                self.pos += 1;
                Ok(t)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                Ok(match name.as_str() {
                    "copy" => GcqTerm::Copy,
                    "discard" => GcqTerm::Discard,
                    "merge" => GcqTerm::Merge,
                    "spawn" => GcqTerm::Spawn,
                    "id" => GcqTerm::Id1,
                    "id0" => GcqTerm::Id0,
                    "swap" => GcqTerm::Swap,
                    _ => GcqTerm::gen(&name, self.sig)?,
                })
            }
            _ => Err(GcqError::Syntax { pos, msg: "expected a term".into() }),
        }
    }
}

/// Parses a term and infers its sort against `sig`.
pub fn parse_gcq(text: &str, sig: &Signature) -> Result<GcqTerm, GcqError> {
    let toks = lex(text)?;
    let mut p = Parser { toks: &toks, pos: 0, end: text.len(), sig };
    let t = p.seq()?;
    if p.pos != toks.len() {
        return Err(GcqError::Syntax { pos: p.offset(), msg: "trailing input".into() });
    }
    Ok(t)
}

// ---------------------------------------------------------------- semantics

type Image = BTreeMap<Tuple, BTreeSet<Tuple>>;

fn constant_image(t: &GcqTerm, x: &[u32], size: usize) -> Vec<Tuple> {
    match t {
        GcqTerm::Copy => vec![vec![x[0], x[0]]],
        GcqTerm::Discard | GcqTerm::Id0 => vec![vec![]],
        GcqTerm::Merge if x[0] == x[1] => vec![vec![x[0]]],
        GcqTerm::Merge => vec![],
        GcqTerm::Spawn => (0..size as u32).map(|v| vec![v]).collect(),
        GcqTerm::Id1 => vec![x.to_vec()],
        GcqTerm::Swap => vec![vec![x[1], x[0]]],
        _ => unreachable!("not a constant"),
    }
}

fn image(t: &GcqTerm, inputs: &BTreeSet<Tuple>, m: &RelModel) -> Result<Image, GcqError> {
    let mut out = Image::new();
    match t {
        GcqTerm::Gen { name, sort } => {
            let rows = match (m.signature().get(name), m.rho(name)) {
                (Some(s), Some(rows)) if s == *sort => rows,
                (found, _) => {
                    return Err(GcqError::SignatureMismatch {
                        symbol: name.clone(),
                        expected: found.map_or("nothing".into(), |s| s.to_string()),
                        got: *sort,
                    })
                }
            };
            for x in inputs {
                let outs: BTreeSet<Tuple> =
                    rows.range((x.clone(), Vec::new())..).take_while(|(a, _)| a == x).map(|(_, b)| b.clone()).collect();
                out.insert(x.clone(), outs);
            }
        }
        GcqTerm::Seq(a, b, _) => {
            let ia = image(a, inputs, m)?;
            let mids: BTreeSet<Tuple> = ia.values().flatten().cloned().collect();
            let ib = image(b, &mids, m)?;
            for (x, ys) in ia {
                let zs = ys.iter().flat_map(|y| ib[y].iter().cloned()).collect();
                out.insert(x, zs);
            }
        }
        GcqTerm::Tensor(a, b, _) => {
            let na = a.sort().n;
            let left: BTreeSet<Tuple> = inputs.iter().map(|x| x[..na].to_vec()).collect();
            let right: BTreeSet<Tuple> = inputs.iter().map(|x| x[na..].to_vec()).collect();
            let (ia, ib) = (image(a, &left, m)?, image(b, &right, m)?);
            for x in inputs {
                let mut zs = BTreeSet::new();
                for y1 in &ia[&x[..na]] {
                    for y2 in &ib[&x[na..]] {
                        let mut z = y1.clone();
                        z.extend_from_slice(y2);
                        zs.insert(z);
                    }
                }
                out.insert(x.clone(), zs);
            }
        }
        c => {
            for x in inputs {
                out.insert(x.clone(), constant_image(c, x, m.size()).into_iter().collect());
            }
        }
    }
    Ok(out)
}

/// The relation a term denotes in a model. Each subterm is only evaluated on
/// the tuples that can reach it.
pub fn eval_gcq(t: &GcqTerm, m: &RelModel) -> Result<Relation, GcqError> {
    let sort = t.sort();
    let inputs: BTreeSet<Tuple> = all_tuples(sort.n, m.size()).collect();
    let pairs =
        image(t, &inputs, m)?.into_iter().flat_map(|(x, ys)| ys.into_iter().map(move |y| (x.clone(), y))).collect();
    Ok(Relation { sort, carrier: m.size(), pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn sig() -> Signature {
        Signature::from_symbols([("R", 2, 0), ("S", 1, 1)]).unwrap()
    }

    fn bare(size: usize) -> RelModel {
        RelModel::with_size(sig(), size, BTreeMap::new()).unwrap()
    }

    #[test]
    fn sort_inference_example() {
        let t = parse_gcq("((id (+) copy) (+) id0) ; (R (+) S)", &sig()).unwrap();
        assert_eq!(t.sort(), Sort::new(2, 1));
        assert_eq!(GcqTerm::Copy.sort(), Sort::new(1, 2));
        assert_eq!(
            GcqTerm::seq(GcqTerm::Copy, GcqTerm::Copy),
            Err(GcqError::SortMismatch { left: Sort::new(1, 2), right: Sort::new(1, 2) })
        );
    }

    #[test]
    fn parse_examples() {
        let t = parse_gcq("copy ; (S (+) id)", &sig()).unwrap();
        let s = GcqTerm::gen("S", &sig()).unwrap();
        assert_eq!(t, GcqTerm::Copy.then(s.par(GcqTerm::Id1)));
        assert!(matches!(parse_gcq("merge ; merge", &sig()), Err(GcqError::SortMismatch { .. })));
        assert_eq!(parse_gcq("Q", &sig()), Err(GcqError::UnknownSymbol("Q".into())));
        assert!(matches!(parse_gcq("copy ;", &sig()), Err(GcqError::Syntax { .. })));
        assert!(matches!(parse_gcq("(copy", &sig()), Err(GcqError::Syntax { .. })));
        assert!(matches!(parse_gcq("copy copy", &sig()), Err(GcqError::Syntax { .. })));
    }

    #[test]
    fn print_parse_round_trip() {
        for text in [
            "((id (+) copy) (+) id0) ; (R (+) S)",
            "copy ; (merge ; copy) ; discard (+) discard",
            "id (+) (id (+) (copy ; merge))",
            "(swap ; swap) (+) spawn ; id (+) id (+) id",
        ] {
            let t = parse_gcq(text, &sig()).unwrap();
            let printed = t.to_string();
            assert_eq!(parse_gcq(&printed, &sig()).unwrap(), t, "{text} -> {printed}");
        }
    }

    #[test]
    fn bone_on_empty_and_nonempty() {
        let bone = GcqTerm::Spawn.then(GcqTerm::Discard);
        assert!(eval_gcq(&bone, &bare(0)).unwrap().is_empty());
        assert_eq!(eval_gcq(&bone, &bare(2)).unwrap(), Relation::unit(2));
    }

    #[test]
    fn generator_semantics() {
        let id = eval_gcq(&GcqTerm::Id1, &bare(2)).unwrap();
        let expected: BTreeSet<_> = [(vec![0], vec![0]), (vec![1], vec![1])].into_iter().collect();
        assert_eq!(id.pairs, expected);

        let mut rho = BTreeMap::new();
        rho.insert("S".to_string(), [(vec![0], vec![1])].into_iter().collect::<BTreeSet<_>>());
        let m = RelModel::with_size(sig(), 2, rho).unwrap();
        let s = eval_gcq(&GcqTerm::gen("S", &sig()).unwrap(), &m).unwrap();
        assert_eq!(&s.pairs, m.rho("S").unwrap());
    }

    #[test]
    fn sugar_base_cases() {
        assert_eq!(n_copy(0), GcqTerm::Id0);
        assert_eq!(n_discard(1), GcqTerm::Discard);
        assert_eq!(n_swap(1, 1), GcqTerm::Swap);
        assert_eq!(n_swap(0, 3), id_n(3));
    }

    #[test]
    fn sugar_sorts() {
        for n in 0..=5 {
            assert_eq!(n_copy(n).sort(), Sort::new(n, 2 * n));
            assert_eq!(n_merge(n).sort(), Sort::new(2 * n, n));
            assert_eq!(n_discard(n).sort(), Sort::new(n, 0));
            assert_eq!(n_spawn(n).sort(), Sort::new(0, n));
            for m in 0..=5 {
                assert_eq!(n_swap(n, m).sort(), Sort::new(n + m, m + n));
            }
        }
    }

    #[test]
    fn n_copy_two_semantics() {
        for size in 0..=3 {
            let r = eval_gcq(&n_copy(2), &bare(size)).unwrap();
            let expected: BTreeSet<_> =
                all_tuples(2, size).map(|t| (t.clone(), vec![t[0], t[1], t[0], t[1]])).collect();
            assert_eq!(r.pairs, expected);
            let merged = eval_gcq(&n_merge(2), &bare(size)).unwrap();
            let expected: BTreeSet<_> = all_tuples(2, size).map(|t| (vec![t[0], t[1], t[0], t[1]], t)).collect();
            assert_eq!(merged.pairs, expected);
        }
    }

    #[test]
    fn n_swap_block_transposition() {
        for size in 0..=3 {
            for (n, m) in [(2, 1), (1, 2), (2, 2), (3, 1), (0, 2)] {
                let r = eval_gcq(&n_swap(n, m), &bare(size)).unwrap();
                let expected: BTreeSet<_> = all_tuples(n + m, size)
                    .map(|t| {
                        let mut out = t[n..].to_vec();
                        out.extend_from_slice(&t[..n]);
                        (t, out)
                    })
                    .collect();
                assert_eq!(r.pairs, expected, "swap {n},{m}");
            }
        }
        let r = eval_gcq(&n_swap(2, 1), &bare(3)).unwrap();
        assert!(r.contains(&[0, 1, 2], &[2, 0, 1]));
    }

    #[test]
    fn permutation_semantics() {
        let perm = [2, 0, 3, 1];
        let r = eval_gcq(&permutation(&perm), &bare(2)).unwrap();
        for (a, b) in &r.pairs {
            for (p, &i) in perm.iter().enumerate() {
                assert_eq!(b[p], a[i]);
            }
        }
        assert_eq!(r.len(), 16);
        assert_eq!(permutation(&[]), GcqTerm::Id0);
    }

    #[test]
    fn eval_rejects_foreign_symbols() {
        let other = Signature::from_symbols([("S", 2, 2)]).unwrap();
        let m = RelModel::with_size(other, 1, BTreeMap::new()).unwrap();
        let s = GcqTerm::gen("S", &sig()).unwrap();
        assert!(matches!(eval_gcq(&s, &m), Err(GcqError::SignatureMismatch { .. })));
    }
}
