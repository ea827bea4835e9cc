//! Discrete cospans of hypergraphs `n -> G <- m`, their pushout composition
//! and coproduct tensor, the compiler from terms and the decompiler back.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gcq::{permutation, seq_all, tensor_all, GcqTerm};
use crate::hypergraph::{disjoint_union, isomorphism_with_pins, HgMorphism, Hypergraph};
use crate::sigmodel::Sort;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CospanError {
    #[error("boundary mismatch: {0} vs {1}")]
    BoundaryMismatch(usize, usize),
    #[error("sort mismatch: {0} vs {1}")]
    SortMismatch(Sort, Sort),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cospan {
    pub n: usize,
    pub m: usize,
    pub apex: Hypergraph,
    pub iota: Vec<usize>,
    pub omega: Vec<usize>,
}

/// Union-find over `0..len`; the representative of a class is its least
/// element.
struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(len: usize) -> Self {
        UnionFind { parent: (0..len).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

impl Cospan {
    pub fn sort(&self) -> Sort {
        Sort::new(self.n, self.m)
    }

    /// `k -> k <- k` with both legs the identity.
    pub fn identity(k: usize) -> Self {
        Cospan { n: k, m: k, apex: Hypergraph::discrete(k), iota: (0..k).collect(), omega: (0..k).collect() }
    }

    /// The cospan of a single edge: `n+m` vertices, sources then targets.
    pub fn edge(symbol: &str, sort: Sort) -> Self {
        let mut apex = Hypergraph::discrete(sort.n + sort.m);
        let src: Vec<usize> = (0..sort.n).collect();
        let tgt: Vec<usize> = (sort.n..sort.n + sort.m).collect();
        apex.add_edge(symbol, src.clone(), tgt.clone());
        Cospan { n: sort.n, m: sort.m, apex, iota: src, omega: tgt }
    }

    fn spider(vcount: usize, iota: Vec<usize>, omega: Vec<usize>) -> Self {
        Cospan { n: iota.len(), m: omega.len(), apex: Hypergraph::discrete(vcount), iota, omega }
    }

    /// Pushout composition along the shared boundary.
    pub fn compose(&self, other: &Cospan) -> Result<Cospan, CospanError> {
        self.compose_with_maps(other).map(|(c, _, _)| c)
    }

    /// Composition together with the vertex maps from each apex into the
    /// pushout. Edges of `self` come first within each symbol, then those of
    /// `other`.
    pub fn compose_with_maps(&self, other: &Cospan) -> Result<(Cospan, Vec<usize>, Vec<usize>), CospanError> {
        if self.m != other.n {
            return Err(CospanError::BoundaryMismatch(self.m, other.n));
        }
        let off = self.apex.vcount;
        let total = off + other.apex.vcount;
        let mut uf = UnionFind::new(total);
        for (a, b) in self.omega.iter().zip(&other.iota) {
            uf.union(*a, off + b);
        }
        let mut fresh = vec![usize::MAX; total];
        let mut next = 0;
        for v in 0..total {
            let r = uf.find(v);
            if fresh[r] == usize::MAX {
                fresh[r] = next;
                next += 1;
            }
            fresh[v] = fresh[r];
        }
        let mut apex = Hypergraph::discrete(next);
        for (g, shift) in [(&self.apex, 0), (&other.apex, off)] {
            for (sym, list) in &g.edges {
                for e in list {
                    let q = |xs: &[usize]| xs.iter().map(|v| fresh[v + shift]).collect();
                    apex.add_edge(sym, q(&e.src), q(&e.tgt));
                }
            }
        }
        let c = Cospan {
            n: self.n,
            m: other.m,
            apex,
            iota: self.iota.iter().map(|&v| fresh[v]).collect(),
            omega: other.omega.iter().map(|&v| fresh[v + off]).collect(),
        };
        let right = fresh[off..].to_vec();
        fresh.truncate(off);
        Ok((c, fresh, right))
    }

    /// Coproduct of apexes with shifted legs.
    pub fn tensor(&self, other: &Cospan) -> Cospan {
        let off = self.apex.vcount;
        let (apex, _, _) = disjoint_union(&self.apex, &other.apex);
        let shift = |a: &[usize], b: &[usize]| a.iter().copied().chain(b.iter().map(|v| v + off)).collect();
        Cospan {
            n: self.n + other.n,
            m: self.m + other.m,
            apex,
            iota: shift(&self.iota, &other.iota),
            omega: shift(&self.omega, &other.omega),
        }
    }

    /// Graphviz rendering; boundary points are drawn as `in<i>` / `out<j>`
    /// nodes with dotted arrows into the apex.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph cospan {\n  rankdir=LR;\n");
        let mut push = |line: String| {
            out.push_str("  ");
            out.push_str(&line);
            out.push('\n');
        };
        for i in 0..self.n {
            push(format!("in{i} [shape=plaintext, label=\"{i}\"];"));
        }
        for j in 0..self.m {
            push(format!("out{j} [shape=plaintext, label=\"{j}\"];"));
        }
        if self.n > 0 {
            let ids: Vec<String> = (0..self.n).map(|i| format!("in{i}")).collect();
            push(format!("{{ rank=source; {}; }}", ids.join("; ")));
        }
        if self.m > 0 {
            let ids: Vec<String> = (0..self.m).map(|j| format!("out{j}")).collect();
            push(format!("{{ rank=sink; {}; }}", ids.join("; ")));
        }
        for line in self.apex.dot_body() {
            push(line);
        }
        for (i, v) in self.iota.iter().enumerate() {
            push(format!("in{i} -> v{v} [style=dotted];"));
        }
        for (j, v) in self.omega.iter().enumerate() {
            push(format!("out{j} -> v{v} [style=dotted];"));
        }
        out.push_str("}\n");
        out
    }
}

/// Compiles a term to its cospan, by structural recursion.
pub fn term_to_cospan(t: &GcqTerm) -> Cospan {
    match t {
        GcqTerm::Copy => Cospan::spider(1, vec![0], vec![0, 0]),
        GcqTerm::Discard => Cospan::spider(1, vec![0], vec![]),
        GcqTerm::Merge => Cospan::spider(1, vec![0, 0], vec![0]),
        GcqTerm::Spawn => Cospan::spider(1, vec![], vec![0]),
        GcqTerm::Id0 => Cospan::identity(0),
        GcqTerm::Id1 => Cospan::identity(1),
        GcqTerm::Swap => Cospan::spider(2, vec![0, 1], vec![1, 0]),
        GcqTerm::Gen { name, sort } => Cospan::edge(name, *sort),
        GcqTerm::Seq(a, b, _) => term_to_cospan(a).compose(&term_to_cospan(b)).expect("well-sorted composite"),
        GcqTerm::Tensor(a, b, _) => term_to_cospan(a).tensor(&term_to_cospan(b)),
    }
}

fn merge_n(k: usize) -> GcqTerm {
    match k {
        0 => GcqTerm::Spawn,
        1 => GcqTerm::Id1,
        _ => merge_n(k - 1).par(GcqTerm::Id1).then(GcqTerm::Merge),
    }
}

fn copy_n(k: usize) -> GcqTerm {
    match k {
        0 => GcqTerm::Discard,
        1 => GcqTerm::Id1,
        _ => GcqTerm::Copy.then(copy_n(k - 1).par(GcqTerm::Id1)),
    }
}

fn grouped(f: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..f.len()).collect();
    order.sort_by_key(|&i| f[i]);
    order
}

/// A term of sort `(f.len(), b)` whose cospan is `a -f-> b <-id- b`.
fn func_term(f: &[usize], b: usize) -> GcqTerm {
    let counts = (0..b).map(|v| f.iter().filter(|&&x| x == v).count());
    permutation(&grouped(f)).then(tensor_all(counts.map(merge_n).collect()))
}

/// A term of sort `(b, f.len())` whose cospan is `b -id-> b <-f- a`.
fn cofunc_term(f: &[usize], b: usize) -> GcqTerm {
    let counts = (0..b).map(|v| f.iter().filter(|&&x| x == v).count());
    let order = grouped(f);
    let mut inverse = vec![0; f.len()];
    for (p, &i) in order.iter().enumerate() {
        inverse[i] = p;
    }
    tensor_all(counts.map(copy_n).collect()).then(permutation(&inverse))
}

/// Reads a cospan back as a term: a merging network onto the vertices, one
/// generator per hyperedge placed in parallel, and a copying network out.
pub fn cospan_to_term(c: &Cospan) -> GcqTerm {
    let v = c.apex.vcount;
    let mut sources: Vec<usize> = (0..v).collect();
    let mut targets: Vec<usize> = (0..v).collect();
    let mut gens = Vec::new();
    for (sym, list) in &c.apex.edges {
        for e in list {
            sources.extend(&e.src);
            targets.extend(&e.tgt);
            gens.push(GcqTerm::Gen { name: sym.clone(), sort: Sort::new(e.src.len(), e.tgt.len()) });
        }
    }
    let mut middle = vec![crate::gcq::id_n(v)];
    middle.extend(gens);
    seq_all(vec![
        func_term(&c.iota, v),
        cofunc_term(&sources, v),
        tensor_all(middle),
        func_term(&targets, v),
        cofunc_term(&c.omega, v),
    ])
}

/// Pins forcing the legs of `a` onto the legs of `b`, or `None` when they
/// contradict each other.
pub fn leg_pins(a: &Cospan, b: &Cospan) -> Option<BTreeMap<usize, usize>> {
    let mut pins = BTreeMap::new();
    for (x, y) in a.iota.iter().zip(&b.iota).chain(a.omega.iter().zip(&b.omega)) {
        if *pins.entry(*x).or_insert(*y) != *y {
            return None;
        }
    }
    Some(pins)
}

/// An apex isomorphism `a -> b` commuting with both legs.
pub fn cospan_isomorphism(a: &Cospan, b: &Cospan) -> Result<Option<HgMorphism>, CospanError> {
    if a.sort() != b.sort() {
        return Err(CospanError::SortMismatch(a.sort(), b.sort()));
    }
    Ok(leg_pins(a, b).and_then(|pins| isomorphism_with_pins(&a.apex, &b.apex, &pins)))
}

pub fn is_isomorphic_cospan(a: &Cospan, b: &Cospan) -> Result<bool, CospanError> {
    Ok(cospan_isomorphism(a, b)?.is_some())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcq::{n_copy, n_merge};
    use crate::sigmodel::Signature;

    fn iso(a: &Cospan, b: &Cospan) -> bool {
        is_isomorphic_cospan(a, b).unwrap()
    }

    #[test]
    fn base_cases() {
        let c = term_to_cospan(&GcqTerm::Copy);
        assert_eq!((c.n, c.m, c.apex.vcount), (1, 2, 1));
        assert_eq!(c.omega, vec![0, 0]);
        let z = term_to_cospan(&GcqTerm::Id0);
        assert_eq!((z.n, z.m, z.apex.vcount), (0, 0, 0));
    }

    #[test]
    fn identity_is_a_unit() {
        let t = GcqTerm::Copy.then(GcqTerm::Swap);
        let c = term_to_cospan(&t);
        assert!(iso(&Cospan::identity(1).compose(&c).unwrap(), &c));
        assert!(iso(&c.compose(&Cospan::identity(2)).unwrap(), &c));
        assert!(iso(&c.tensor(&Cospan::identity(0)), &c));
    }

    #[test]
    fn copy_then_merge_is_identity() {
        let c = term_to_cospan(&GcqTerm::Copy).compose(&term_to_cospan(&GcqTerm::Merge)).unwrap();
        assert!(iso(&c, &Cospan::identity(1)));
    }

    #[test]
    fn merge_then_copy_glues() {
        let c = term_to_cospan(&GcqTerm::Merge).compose(&term_to_cospan(&GcqTerm::Copy)).unwrap();
        assert_eq!((c.n, c.m, c.apex.vcount), (2, 2, 1));
        assert!(!iso(&c, &Cospan::identity(2)));
    }

    #[test]
    fn boundary_mismatch() {
        let a = term_to_cospan(&GcqTerm::Copy);
        assert_eq!(a.compose(&a), Err(CospanError::BoundaryMismatch(2, 1)));
        assert!(is_isomorphic_cospan(&a, &Cospan::identity(1)).is_err());
    }

    #[test]
    fn legs_matter() {
        let swap = term_to_cospan(&GcqTerm::Swap);
        assert!(!iso(&swap, &Cospan::identity(2)));
        let twice = term_to_cospan(&GcqTerm::Swap.then(GcqTerm::Swap));
        assert!(iso(&twice, &Cospan::identity(2)));
    }

    #[test]
    fn sugar_compiles_to_spiders() {
        for n in 0..4 {
            let c = term_to_cospan(&n_copy(n));
            assert_eq!(c.apex.vcount, n);
            let mut expected = (0..n).collect::<Vec<_>>();
            expected.extend(0..n);
            assert_eq!(c.omega, expected);
            assert_eq!(term_to_cospan(&n_merge(n)).iota, expected);
        }
    }

    #[test]
    fn decompile_examples() {
        let sig = Signature::from_symbols([("R", 1, 1), ("T", 2, 1)]).unwrap();
        let id = Cospan::identity(1);
        assert!(iso(&term_to_cospan(&cospan_to_term(&id)), &id));

        let e = Cospan::edge("T", sig.get("T").unwrap());
        let t = cospan_to_term(&e);
        assert_eq!(t.symbols().len(), 1);
        assert!(iso(&term_to_cospan(&t), &e));

        let mut g = Hypergraph::discrete(3);
        g.add_edge("R", vec![0], vec![0]);
        g.add_edge("T", vec![1, 0], vec![2]);
        g.add_edge("T", vec![1, 0], vec![2]);
        let c = Cospan { n: 3, m: 2, apex: g, iota: vec![2, 2, 0], omega: vec![1, 1] };
        assert!(iso(&term_to_cospan(&cospan_to_term(&c)), &c));
    }

    #[test]
    fn dot_has_dotted_legs() {
        let dot = term_to_cospan(&GcqTerm::Copy).to_dot();
        assert!(dot.contains("in0 -> v0 [style=dotted]"));
        assert!(dot.contains("out1 -> v0 [style=dotted]"));
    }
}
