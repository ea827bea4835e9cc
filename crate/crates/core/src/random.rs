//! Seeded generators for models, terms, formulas and cospans.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::ccq::{Formula, Judgment};
use crate::cospan::Cospan;
use crate::gcq::{id_n, n_copy, n_discard, n_merge, n_spawn, GcqTerm};
use crate::hypergraph::Hypergraph;
use crate::sigmodel::{all_tuples, RelModel, Signature, Sort};

/// A model of the given size where each possible tuple pair is present
/// with a density drawn per model.
pub fn random_model<R: Rng>(sig: &Signature, size: usize, rng: &mut R) -> RelModel {
    let density = *[0.2, 0.4, 0.6, 0.8].choose(rng).unwrap();
    let mut rho = BTreeMap::new();
    for (name, sort) in sig.iter() {
        let mut set = BTreeSet::new();
        for t in all_tuples(sort.n + sort.m, size) {
            if rng.gen_bool(density) {
                set.insert((t[..sort.n].to_vec(), t[sort.n..].to_vec()));
            }
        }
        rho.insert(name.to_string(), set);
    }
    RelModel::with_size(sig.clone(), size, rho).expect("generated tuples fit")
}

/// `count` models: the empty model first, then random ones with carriers
/// of size `1..=max_carrier`.
pub fn model_sample<R: Rng>(sig: &Signature, count: usize, max_carrier: usize, rng: &mut R) -> Vec<RelModel> {
    let mut out = vec![RelModel::with_size(sig.clone(), 0, BTreeMap::new()).unwrap()];
    while out.len() < count {
        let size = rng.gen_range(1..=max_carrier.max(1));
        out.push(random_model(sig, size, rng));
    }
    out
}

/// Every model of a relational signature with exactly `size` elements.
pub fn all_models(sig: &Signature, size: usize) -> Vec<RelModel> {
    let slots: Vec<(String, Sort, Vec<Vec<u32>>)> =
        sig.iter().map(|(n, s)| (n.to_string(), s, all_tuples(s.n + s.m, size).collect())).collect();
    let bits: usize = slots.iter().map(|s| s.2.len()).sum();
    assert!(bits < 24, "too many models to enumerate");
    (0u64..1 << bits)
        .map(|mask| {
            let mut rho = BTreeMap::new();
            let mut k = 0;
            for (name, sort, tuples) in &slots {
                let mut set = BTreeSet::new();
                for t in tuples {
                    if mask >> k & 1 == 1 {
                        set.insert((t[..sort.n].to_vec(), t[sort.n..].to_vec()));
                    }
                    k += 1;
                }
                rho.insert(name.clone(), set);
            }
            RelModel::with_size(sig.clone(), size, rho).unwrap()
        })
        .collect()
}

fn constants() -> Vec<GcqTerm> {
    vec![GcqTerm::Copy, GcqTerm::Discard, GcqTerm::Merge, GcqTerm::Spawn, GcqTerm::Id0, GcqTerm::Id1, GcqTerm::Swap]
}

/// Generates random terms of a requested sort.
pub struct TermGen<'a> {
    pub sig: &'a Signature,
    /// Widest bundle of wires allowed between composed pieces.
    pub max_width: usize,
}

impl TermGen<'_> {
    fn atoms(&self, sort: Sort) -> Vec<GcqTerm> {
        let mut out: Vec<GcqTerm> = constants().into_iter().filter(|c| c.sort() == sort).collect();
        for (name, s) in self.sig.iter() {
            if s == sort {
                out.push(GcqTerm::Gen { name: name.to_string(), sort: s });
            }
        }
        out
    }

    fn spider(&self, n: usize, m: usize) -> GcqTerm {
        let left = if n == 0 {
            GcqTerm::Spawn
        } else {
            (1..n).fold(GcqTerm::Id1, |acc, _| acc.par(GcqTerm::Id1).then(GcqTerm::Merge))
        };
        let right = if m == 0 {
            GcqTerm::Discard
        } else {
            (1..m).fold(GcqTerm::Id1, |acc, i| acc.then(GcqTerm::Copy.par(id_n(i - 1))))
        };
        left.then(right)
    }

    fn leaf<R: Rng>(&self, n: usize, m: usize, rng: &mut R) -> GcqTerm {
        let atoms = self.atoms(Sort::new(n, m));
        if !atoms.is_empty() && rng.gen_bool(0.85) {
            return atoms.choose(rng).unwrap().clone();
        }
        match rng.gen_range(0..3) {
            0 => n_discard(n).then(n_spawn(m)),
            1 if n + m >= 2 => {
                let n1 = rng.gen_range(0..=n);
                let m1 = rng.gen_range(0..=m);
                if (n1 + m1 == 0) || (n1 == n && m1 == m) {
                    self.spider(n, m)
                } else {
                    self.leaf(n1, m1, rng).par(self.leaf(n - n1, m - m1, rng))
                }
            }
            _ => self.spider(n, m),
        }
    }

    /// A term of sort `(n, m)` with roughly `budget` leaves.
    pub fn term<R: Rng>(&self, n: usize, m: usize, budget: usize, rng: &mut R) -> GcqTerm {
        if budget <= 1 || rng.gen_bool(0.15) {
            return self.leaf(n, m, rng);
        }
        let b1 = rng.gen_range(1..budget);
        if rng.gen_bool(0.55) {
            let k = rng.gen_range(0..=self.max_width);
            self.term(n, k, b1, rng).then(self.term(k, m, budget - b1, rng))
        } else {
            let n1 = rng.gen_range(0..=n);
            let m1 = rng.gen_range(0..=m);
            self.term(n1, m1, b1, rng).par(self.term(n - n1, m - m1, budget - b1, rng))
        }
    }

    /// Replaces a random subterm by something above or below it.
    pub fn mutate<R: Rng>(&self, t: &GcqTerm, rng: &mut R) -> GcqTerm {
        let count = t.leaves();
        let target = rng.gen_range(0..count);
        let mut seen = 0;
        self.mutate_at(t, target, &mut seen, rng)
    }

    fn mutate_at<R: Rng>(&self, t: &GcqTerm, target: usize, seen: &mut usize, rng: &mut R) -> GcqTerm {
        let here = *seen;
        let width = t.leaves();
        if !(here..here + width).contains(&target) {
            *seen += width;
            return t.clone();
        }
        if width == 1 || rng.gen_bool(0.3) {
            *seen += width;
            let s = t.sort();
            return match rng.gen_range(0..3) {
                0 => n_discard(s.n).then(n_spawn(s.m)),
                1 => self.term(s.n, s.m, 3, rng),
                _ => n_copy(s.n).then(t.clone().par(self.term(s.n, s.m, 2, rng))).then(n_merge(s.m)),
            };
        }
        match t {
            GcqTerm::Seq(a, b, _) => {
                let a = self.mutate_at(a, target, seen, rng);
                let b = self.mutate_at(b, target, seen, rng);
                a.then(b)
            }
            GcqTerm::Tensor(a, b, _) => {
                let a = self.mutate_at(a, target, seen, rng);
                let b = self.mutate_at(b, target, seen, rng);
                a.par(b)
            }
            _ => unreachable!("leaves have width 1"),
        }
    }
}

/// Generates random formulas over a relational signature.
pub struct FormulaGen<'a> {
    pub sig: &'a Signature,
    /// Maximum context plus enclosing binders at any point.
    pub max_vars: usize,
}

impl FormulaGen<'_> {
    pub fn judgment<R: Rng>(&self, context: usize, depth: usize, rng: &mut R) -> Judgment {
        Judgment { context, formula: self.formula(context, depth, rng) }
    }

    pub fn formula<R: Rng>(&self, ctx: usize, depth: usize, rng: &mut R) -> Formula {
        let symbols: Vec<(&str, Sort)> = self.sig.iter().collect();
        if depth <= 1 || rng.gen_bool(0.25) {
            let var = |rng: &mut R| rng.gen_range(0..ctx);
            return match rng.gen_range(0..4) {
                _ if ctx == 0 => Formula::Top,
                0 => Formula::Top,
                1 => Formula::eq(var(rng), var(rng)),
                _ if symbols.is_empty() => Formula::eq(var(rng), var(rng)),
                _ => {
                    let (name, sort) = symbols.choose(rng).unwrap();
                    let args: Vec<usize> = (0..sort.n).map(|_| var(rng)).collect();
                    Formula::rel(name, &args)
                }
            };
        }
        if ctx < self.max_vars && rng.gen_bool(0.4) {
            let body = self.formula(ctx + 1, depth - 1, rng);
            Formula::exists(ctx, body)
        } else {
            Formula::conj(self.formula(ctx, depth - 1, rng), self.formula(ctx, depth - 1, rng))
        }
    }
}

/// A cospan with the given boundary sizes, at most `max_v` vertices and at
/// most `max_e` edges drawn from `sig`.
pub fn random_cospan<R: Rng>(sig: &Signature, n: usize, m: usize, max_v: usize, max_e: usize, rng: &mut R) -> Cospan {
    let v = rng.gen_range(usize::from(n + m > 0)..=max_v.max(1));
    let mut apex = Hypergraph::discrete(v);
    let symbols: Vec<(&str, Sort)> = sig.iter().collect();
    if v > 0 && !symbols.is_empty() {
        for _ in 0..rng.gen_range(0..=max_e) {
            let (name, s) = *symbols.choose(rng).unwrap();
            let src = (0..s.n).map(|_| rng.gen_range(0..v)).collect();
            let tgt = (0..s.m).map(|_| rng.gen_range(0..v)).collect();
            apex.add_edge(name, src, tgt);
        }
    }
    let leg = |k: usize, rng: &mut R| (0..k).map(|_| rng.gen_range(0..v)).collect();
    let iota = leg(n, rng);
    let omega = leg(m, rng);
    Cospan { n, m, apex, iota, omega }
}

/// A random hypergraph over `sig`.
pub fn random_hypergraph<R: Rng>(sig: &Signature, max_v: usize, max_e: usize, rng: &mut R) -> Hypergraph {
    random_cospan(sig, 0, 0, max_v, max_e, rng).apex
}
