//! Finite labelled hypergraphs and their morphisms.
//!
//! Vertices are `0..vcount`. Each symbol owns a list of hyperedges, each with
//! an ordered source and target tuple of vertices. A morphism maps vertices
//! to vertices and, per symbol, edges to edges, so that tentacles commute.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HgError {
    #[error("map does not fit the hypergraphs: {0}")]
    MapMismatch(String),
    #[error("search budget of {0} steps exhausted")]
    BudgetExhausted(u64),
    #[error("pin {0} -> {1} is outside the hypergraphs")]
    InvalidPin(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Hyperedge {
    pub src: Vec<usize>,
    pub tgt: Vec<usize>,
}

impl Hyperedge {
    fn tentacles(&self) -> impl Iterator<Item = usize> + '_ {
        self.src.iter().chain(&self.tgt).copied()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypergraph {
    pub vcount: usize,
    pub edges: BTreeMap<String, Vec<Hyperedge>>,
}

impl Hypergraph {
    /// `vcount` isolated vertices.
    pub fn discrete(vcount: usize) -> Self {
        Hypergraph { vcount, edges: BTreeMap::new() }
    }

    /// Appends an edge and returns its index among the edges of `symbol`.
    pub fn add_edge(&mut self, symbol: &str, src: Vec<usize>, tgt: Vec<usize>) -> usize {
        debug_assert!(src.iter().chain(&tgt).all(|&v| v < self.vcount));
        let list = self.edges.entry(symbol.to_string()).or_default();
        list.push(Hyperedge { src, tgt });
        list.len() - 1
    }

    pub fn edges_of(&self, symbol: &str) -> &[Hyperedge] {
        self.edges.get(symbol).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn edge_count(&self) -> usize {
        self.edges.values().map(Vec::len).sum()
    }

    /// Number of tentacles attached to each vertex.
    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.vcount];
        for e in self.edges.values().flatten() {
            for v in e.tentacles() {
                d[v] += 1;
            }
        }
        d
    }

    /// `(vertex, per-symbol signature of attachments)` data used as an
    /// isomorphism invariant.
    fn vertex_profile(&self) -> Vec<Vec<(String, bool, usize)>> {
        let mut prof = vec![Vec::new(); self.vcount];
        for (sym, list) in &self.edges {
            for e in list {
                for (p, &v) in e.src.iter().enumerate() {
                    prof[v].push((sym.clone(), false, p));
                }
                for (p, &v) in e.tgt.iter().enumerate() {
                    prof[v].push((sym.clone(), true, p));
                }
            }
        }
        for p in &mut prof {
            p.sort();
        }
        prof
    }

    /// Drops empty edge lists so that structural equality ignores them.
    pub fn normalized(mut self) -> Self {
        self.edges.retain(|_, l| !l.is_empty());
        self
    }

    /// Graphviz rendering: vertices are points, hyperedges are boxes with
    /// numbered tentacles `s<i>` (sources) and `t<j>` (targets).
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph hypergraph {\n  rankdir=LR;\n");
        for line in self.dot_body() {
            out.push_str("  ");
            out.push_str(&line);
            out.push('\n');
        }
        out.push_str("}\n");
        out
    }

    pub(crate) fn dot_body(&self) -> Vec<String> {
        let mut lines = Vec::new();
        for v in 0..self.vcount {
            lines.push(format!("v{v} [shape=point, xlabel=\"v{v}\"];"));
        }
        for (sym, list) in &self.edges {
            for (i, e) in list.iter().enumerate() {
                let id = format!("e_{sym}_{i}");
                lines.push(format!("{id} [shape=box, label=\"{sym}\"];"));
                for (p, v) in e.src.iter().enumerate() {
                    lines.push(format!("v{v} -> {id} [label=\"s{p}\", arrowhead=none];"));
                }
                for (p, v) in e.tgt.iter().enumerate() {
                    lines.push(format!("{id} -> v{v} [label=\"t{p}\"];"));
                }
            }
        }
        lines
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HgMorphism {
    pub vmap: Vec<usize>,
    pub emaps: BTreeMap<String, Vec<usize>>,
}

impl HgMorphism {
    pub fn identity(g: &Hypergraph) -> Self {
        HgMorphism {
            vmap: (0..g.vcount).collect(),
            emaps: g.edges.iter().map(|(s, l)| (s.clone(), (0..l.len()).collect())).collect(),
        }
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &HgMorphism) -> HgMorphism {
        HgMorphism {
            vmap: self.vmap.iter().map(|&v| next.vmap[v]).collect(),
            emaps: self.emaps.iter().map(|(s, l)| (s.clone(), l.iter().map(|&e| next.emaps[s][e]).collect())).collect(),
        }
    }

    pub fn is_injective(&self) -> bool {
        let distinct = |l: &[usize]| {
            let mut s = l.to_vec();
            s.sort_unstable();
            s.windows(2).all(|w| w[0] != w[1])
        };
        distinct(&self.vmap) && self.emaps.values().all(|l| distinct(l))
    }
}

/// Checks that `f` is a morphism `g -> h`.
pub fn validate_morphism(f: &HgMorphism, g: &Hypergraph, h: &Hypergraph) -> Result<bool, HgError> {
    if f.vmap.len() != g.vcount {
        return Err(HgError::MapMismatch(format!("vertex map has {} entries for {} vertices", f.vmap.len(), g.vcount)));
    }
    if let Some(v) = f.vmap.iter().find(|&&v| v >= h.vcount) {
        return Err(HgError::MapMismatch(format!("vertex image {v} out of range")));
    }
    for (sym, list) in &g.edges {
        if list.is_empty() {
            continue;
        }
        let emap = f.emaps.get(sym).ok_or_else(|| HgError::MapMismatch(format!("no edge map for `{sym}`")))?;
        if emap.len() != list.len() {
            return Err(HgError::MapMismatch(format!("edge map for `{sym}` has wrong size")));
        }
        let targets = h.edges_of(sym);
        for (e, &img) in list.iter().zip(emap) {
            let Some(t) = targets.get(img) else {
                return Err(HgError::MapMismatch(format!("edge image {img} of `{sym}` out of range")));
            };
            let mapped = |xs: &[usize]| xs.iter().map(|&v| f.vmap[v]).collect::<Vec<_>>();
            if mapped(&e.src) != t.src || mapped(&e.tgt) != t.tgt {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Controls for [`find_morphisms`].
#[derive(Debug, Clone, Copy, Default)]
pub struct SearchOptions {
    /// Stop after this many morphisms.
    pub limit: Option<usize>,
    /// Abort with [`HgError::BudgetExhausted`] after this many steps.
    pub budget: Option<u64>,
    /// Only injective vertex and edge maps.
    pub injective: bool,
}

impl SearchOptions {
    pub fn first() -> Self {
        SearchOptions { limit: Some(1), ..Self::default() }
    }
}

/// Result of a search: the morphisms found and the steps spent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchOutcome {
    pub morphisms: Vec<HgMorphism>,
    pub steps: u64,
}

struct Search<'a> {
    g_edges: Vec<(usize, usize, Vec<usize>)>,
    h_edges: Vec<Vec<Vec<usize>>>,
    /// `index[sym][pos][w]`: edges of `sym` whose tentacle `pos` is `w`.
    index: Vec<Vec<Vec<Vec<usize>>>>,
    /// Edges of `g` touching each vertex.
    incident: Vec<Vec<usize>>,
    symbols: Vec<&'a str>,
    h_vcount: usize,
    vmap: Vec<Option<usize>>,
    used_v: Vec<bool>,
    eassign: Vec<Option<usize>>,
    used_e: Vec<Vec<bool>>,
    opts: SearchOptions,
    steps: u64,
    found: Vec<HgMorphism>,
}

impl Search<'_> {
    fn tick(&mut self) -> Result<(), HgError> {
        self.steps += 1;
        match self.opts.budget {
            Some(b) if self.steps > b => Err(HgError::BudgetExhausted(b)),
            _ => Ok(()),
        }
    }

    fn done(&self) -> bool {
        self.opts.limit.is_some_and(|l| self.found.len() >= l)
    }

    /// Vertices newly bound if edge `ge` maps onto `he`, or `None`.
    fn fits(&self, ge: usize, he: usize) -> Option<Vec<(usize, usize)>> {
        let (sym, _, tent) = &self.g_edges[ge];
        if self.opts.injective && self.used_e[*sym][he] {
            return None;
        }
        let img = &self.h_edges[*sym][he];
        let mut fresh: Vec<(usize, usize)> = Vec::new();
        for (&v, &w) in tent.iter().zip(img) {
            match self.vmap[v].or_else(|| fresh.iter().find(|p| p.0 == v).map(|p| p.1)) {
                Some(x) if x != w => return None,
                Some(_) => {}
                None => {
                    if self.opts.injective && (self.used_v[w] || fresh.iter().any(|p| p.1 == w)) {
                        return None;
                    }
                    fresh.push((v, w));
                }
            }
        }
        Some(fresh)
    }

    /// Whether `ge` can map onto `he`, without building the new bindings.
    fn fits_quick(&self, ge: usize, he: usize) -> bool {
        let (sym, _, tent) = &self.g_edges[ge];
        if self.opts.injective && self.used_e[*sym][he] {
            return false;
        }
        let img = &self.h_edges[*sym][he];
        for (i, (&v, &w)) in tent.iter().zip(img).enumerate() {
            match self.vmap[v] {
                Some(x) => {
                    if x != w {
                        return false;
                    }
                }
                None => {
                    for j in 0..i {
                        let same_v = tent[j] == v;
                        if same_v != (img[j] == w) && (same_v || self.opts.injective && self.vmap[tent[j]].is_none()) {
                            return false;
                        }
                    }
                    if self.opts.injective && self.used_v[w] {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// The shortest index list among the bound tentacles of `ge`, or `None`
    /// when every edge of its symbol is a candidate.
    fn base(&self, ge: usize) -> Option<&[usize]> {
        let (sym, _, tent) = &self.g_edges[ge];
        if self.h_edges[*sym].is_empty() {
            return Some(&[]);
        }
        tent.iter()
            .enumerate()
            .filter_map(|(p, &v)| self.vmap[v].map(|w| self.index[*sym][p][w].as_slice()))
            .min_by_key(|l| l.len())
    }

    /// Candidate images of `ge` in ascending order.
    fn candidates(&self, ge: usize) -> Vec<usize> {
        match self.base(ge) {
            Some(l) => l.iter().copied().filter(|&he| self.fits_quick(ge, he)).collect(),
            None => (0..self.h_edges[self.g_edges[ge].0].len()).filter(|&he| self.fits_quick(ge, he)).collect(),
        }
    }

    fn count_candidates(&self, ge: usize, cutoff: usize) -> usize {
        let mut n = 0;
        let mut visit = |he: usize| {
            if self.fits_quick(ge, he) {
                n += 1;
            }
            n >= cutoff
        };
        match self.base(ge) {
            Some(l) => {
                for &he in l {
                    if visit(he) {
                        break;
                    }
                }
            }
            None => {
                for he in 0..self.h_edges[self.g_edges[ge].0].len() {
                    if visit(he) {
                        break;
                    }
                }
            }
        }
        n
    }

    fn bound(&self, ge: usize) -> bool {
        self.g_edges[ge].2.iter().all(|&v| self.vmap[v].is_some())
    }

    fn bind(&mut self, pairs: &[(usize, usize)]) {
        for &(v, w) in pairs {
            self.vmap[v] = Some(w);
            self.used_v[w] = true;
        }
    }

    fn unbind(&mut self, pairs: &[(usize, usize)]) {
        for &(v, w) in pairs {
            self.vmap[v] = None;
            self.used_v[w] = false;
        }
    }

    /// `touched` lists the vertices bound since the parent call; `None`
    /// re-checks every edge.
    fn run(&mut self, touched: Option<&[usize]>) -> Result<(), HgError> {
        if self.done() {
            return Ok(());
        }
        let recheck: Vec<usize> = match touched {
            None => (0..self.g_edges.len()).collect(),
            Some(vs) => vs.iter().flat_map(|&v| self.incident[v].iter().copied()).collect(),
        };
        for ge in recheck {
            if self.eassign[ge].is_none() && self.bound(ge) && self.count_candidates(ge, 1) == 0 {
                return Ok(());
            }
        }
        let mut best: Option<(usize, usize)> = None;
        for ge in 0..self.g_edges.len() {
            if self.eassign[ge].is_some() || self.bound(ge) {
                continue;
            }
            let cutoff = best.map_or(usize::MAX, |b| b.1);
            let count = self.count_candidates(ge, cutoff);
            if count == 0 {
                return Ok(());
            }
            if count < cutoff {
                best = Some((ge, count));
                if count == 1 {
                    break;
                }
            }
        }
        let Some((ge, _)) = best else {
            return self.free_vertices(0);
        };
        let sym = self.g_edges[ge].0;
        let cands: Vec<_> =
            self.candidates(ge).into_iter().map(|he| (he, self.fits(ge, he).expect("candidate fits"))).collect();
        for (he, fresh) in cands {
            self.tick()?;
            self.bind(&fresh);
            self.eassign[ge] = Some(he);
            self.used_e[sym][he] = true;
            let vs: Vec<usize> = fresh.iter().map(|p| p.0).collect();
            self.run(Some(&vs))?;
            self.used_e[sym][he] = false;
            self.eassign[ge] = None;
            self.unbind(&fresh);
            if self.done() {
                break;
            }
        }
        Ok(())
    }

    fn free_vertices(&mut self, from: usize) -> Result<(), HgError> {
        let Some(v) = (from..self.vmap.len()).find(|&v| self.vmap[v].is_none()) else {
            return self.bound_edges(0);
        };
        for w in 0..self.h_vcount {
            if self.opts.injective && self.used_v[w] {
                continue;
            }
            self.tick()?;
            self.bind(&[(v, w)]);
            self.free_vertices(v + 1)?;
            self.unbind(&[(v, w)]);
            if self.done() {
                break;
            }
        }
        Ok(())
    }

    /// With every vertex placed, enumerates images of the remaining edges.
    fn bound_edges(&mut self, from: usize) -> Result<(), HgError> {
        let Some(ge) = (from..self.g_edges.len()).find(|&ge| self.eassign[ge].is_none()) else {
            self.record();
            return Ok(());
        };
        let sym = self.g_edges[ge].0;
        for he in self.candidates(ge) {
            self.tick()?;
            self.eassign[ge] = Some(he);
            self.used_e[sym][he] = true;
            self.bound_edges(ge + 1)?;
            self.used_e[sym][he] = false;
            self.eassign[ge] = None;
            if self.done() {
                break;
            }
        }
        Ok(())
    }

    fn record(&mut self) {
        let mut emaps: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (ge, (sym, idx, _)) in self.g_edges.iter().enumerate() {
            let list = emaps.entry(self.symbols[*sym].to_string()).or_default();
            debug_assert_eq!(list.len(), *idx);
            list.push(self.eassign[ge].expect("all edges assigned"));
        }
        let vmap = self.vmap.iter().map(|v| v.expect("all vertices assigned")).collect();
        self.found.push(HgMorphism { vmap, emaps });
    }
}

/// Enumerates morphisms `g -> h` extending the partial vertex map `pins`.
///
/// Edges are handled most-constrained first, ties going to the earlier
/// `(symbol, index)`, and candidate images are tried in ascending order.
/// Edges whose tentacles are already all placed are only checked for an
/// image; vertices untouched by edges and then the images of those edges
/// are enumerated last, in ascending order.
pub fn find_morphisms(
    g: &Hypergraph,
    h: &Hypergraph,
    pins: &BTreeMap<usize, usize>,
    opts: SearchOptions,
) -> Result<SearchOutcome, HgError> {
    let symbols: Vec<&str> = g.edges.keys().map(String::as_str).collect();
    let mut g_edges = Vec::new();
    let mut h_edges = Vec::new();
    for (si, sym) in symbols.iter().enumerate() {
        for (i, e) in g.edges_of(sym).iter().enumerate() {
            g_edges.push((si, i, e.tentacles().collect::<Vec<_>>()));
        }
        h_edges.push(h.edges_of(sym).iter().map(|e| e.tentacles().collect()).collect::<Vec<Vec<usize>>>());
    }
    for (si, sym) in symbols.iter().enumerate() {
        let arity = |l: &[Hyperedge]| l.first().map(|e| (e.src.len(), e.tgt.len()));
        if let (Some(a), Some(b)) = (arity(g.edges_of(sym)), arity(h.edges_of(sym))) {
            if a != b {
                h_edges[si].clear();
            }
        }
    }
    let used_e = h_edges.iter().map(|l| vec![false; l.len()]).collect();
    let index = h_edges
        .iter()
        .map(|list: &Vec<Vec<usize>>| {
            let width = list.first().map_or(0, Vec::len);
            (0..width)
                .map(|p| {
                    let mut by_vertex = vec![Vec::new(); h.vcount];
                    for (he, tent) in list.iter().enumerate() {
                        by_vertex[tent[p]].push(he);
                    }
                    by_vertex
                })
                .collect()
        })
        .collect();
    let mut s = Search {
        g_edges,
        incident: Vec::new(),
        h_edges,
        index,
        symbols,
        h_vcount: h.vcount,
        vmap: vec![None; g.vcount],
        used_v: vec![false; h.vcount],
        eassign: Vec::new(),
        used_e,
        opts,
        steps: 0,
        found: Vec::new(),
    };
    s.eassign = vec![None; s.g_edges.len()];
    s.incident = vec![Vec::new(); g.vcount];
    for (ge, (_, _, tent)) in s.g_edges.iter().enumerate() {
        for &v in tent {
            if s.incident[v].last() != Some(&ge) {
                s.incident[v].push(ge);
            }
        }
    }
    for (&v, &w) in pins {
        if v >= g.vcount || w >= h.vcount {
            return Err(HgError::InvalidPin(v, w));
        }
        if opts.injective && s.used_v[w] {
            return Ok(SearchOutcome { morphisms: vec![], steps: 0 });
        }
        s.vmap[v] = Some(w);
        s.used_v[w] = true;
    }
    if opts.limit == Some(0) {
        return Ok(SearchOutcome { morphisms: vec![], steps: 0 });
    }
    s.run(None)?;
    Ok(SearchOutcome { morphisms: s.found, steps: s.steps })
}

/// All morphisms `g -> h`, without pins or limits.
pub fn all_morphisms(g: &Hypergraph, h: &Hypergraph) -> Vec<HgMorphism> {
    find_morphisms(g, h, &BTreeMap::new(), SearchOptions::default()).expect("unbounded search").morphisms
}

/// Cheap necessary conditions for an isomorphism.
fn same_shape(g: &Hypergraph, h: &Hypergraph) -> bool {
    if g.vcount != h.vcount {
        return false;
    }
    let counts = |x: &Hypergraph| -> BTreeMap<String, usize> {
        x.edges.iter().filter(|(_, l)| !l.is_empty()).map(|(s, l)| (s.clone(), l.len())).collect()
    };
    if counts(g) != counts(h) {
        return false;
    }
    let mut pg = g.vertex_profile();
    let mut ph = h.vertex_profile();
    pg.sort();
    ph.sort();
    pg == ph
}

/// An isomorphism `g -> h` extending `pins`, if one exists.
pub fn isomorphism_with_pins(g: &Hypergraph, h: &Hypergraph, pins: &BTreeMap<usize, usize>) -> Option<HgMorphism> {
    if !same_shape(g, h) {
        return None;
    }
    let opts = SearchOptions { limit: Some(1), budget: None, injective: true };
    find_morphisms(g, h, pins, opts).ok()?.morphisms.pop()
}

/// An isomorphism `g -> h`, if one exists.
pub fn is_isomorphic(g: &Hypergraph, h: &Hypergraph) -> Option<HgMorphism> {
    isomorphism_with_pins(g, h, &BTreeMap::new())
}

/// The coproduct `g ⊎ h` with its two injections; `h`'s vertices are
/// shifted by `g.vcount` and its edges follow `g`'s within each symbol.
pub fn disjoint_union(g: &Hypergraph, h: &Hypergraph) -> (Hypergraph, HgMorphism, HgMorphism) {
    let off = g.vcount;
    let mut u = g.clone();
    u.vcount += h.vcount;
    let mut inr_e = BTreeMap::new();
    for (sym, list) in &h.edges {
        let mut idx = Vec::new();
        for e in list {
            let shift = |xs: &[usize]| xs.iter().map(|v| v + off).collect();
            idx.push(u.add_edge(sym, shift(&e.src), shift(&e.tgt)));
        }
        inr_e.insert(sym.clone(), idx);
    }
    let inl = HgMorphism::identity(g);
    let inr = HgMorphism { vmap: (off..off + h.vcount).collect(), emaps: inr_e };
    (u, inl, inr)
}

/// A short human-readable summary, e.g. `3 vertices, R:2 S:1`.
pub fn summary(g: &Hypergraph) -> String {
    let mut s = format!("{} vertices", g.vcount);
    for (sym, l) in &g.edges {
        let _ = write!(s, ", {sym}:{}", l.len());
    }
    s
}
