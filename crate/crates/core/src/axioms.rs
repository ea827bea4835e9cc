//! The equational and inequational laws of graphical conjunctive queries,
//! instantiated over a signature, together with checkers.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::containment::{
    decide_equivalence_with_budget, decide_inclusion_with_budget, ContainmentError, Countermodel,
};
use crate::gcq::{eval_gcq, id_n, n_copy, n_discard, n_merge, n_swap, GcqError, GcqTerm};
use crate::random::model_sample;
use crate::sigmodel::{RelModel, Relation, Signature, Sort, Tuple};

use GcqTerm::{Copy, Discard, Id0, Id1, Merge, Spawn, Swap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxiomKind {
    Equality,
    LeftLeqRight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axiom {
    pub name: String,
    pub kind: AxiomKind,
    pub lhs: GcqTerm,
    pub rhs: GcqTerm,
}

impl Axiom {
    fn new(name: impl Into<String>, kind: AxiomKind, lhs: GcqTerm, rhs: GcqTerm) -> Self {
        assert_eq!(lhs.sort(), rhs.sort(), "axiom sides must share a sort");
        Axiom { name: name.into(), kind, lhs, rhs }
    }

    pub fn sort(&self) -> Sort {
        self.lhs.sort()
    }

    /// The converse inequation `rhs <= lhs`.
    pub fn reversed(&self) -> Axiom {
        Axiom {
            name: format!("{}-rev", self.name),
            kind: AxiomKind::LeftLeqRight,
            lhs: self.rhs.clone(),
            rhs: self.lhs.clone(),
        }
    }
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.kind {
            AxiomKind::Equality => "=",
            AxiomKind::LeftLeqRight => "<=",
        };
        write!(f, "{}: {} {} {}", self.name, self.lhs, op, self.rhs)
    }
}

/// The signature used when no other is supplied.
pub fn default_signature() -> Signature {
    Signature::from_symbols([("R", 1, 1), ("T", 2, 1), ("Q", 2, 0), ("P", 1, 0)]).unwrap()
}

fn seq3(a: GcqTerm, b: GcqTerm, c: GcqTerm) -> GcqTerm {
    a.then(b).then(c)
}

/// Every law instantiated over `sig`. Structural laws use the first symbol
/// of `sig` (or `copy` when it is empty); the lax laws appear once per symbol.
pub fn catalog(sig: &Signature) -> Vec<Axiom> {
    use AxiomKind::{Equality as Eq, LeftLeqRight as Le};
    let c = sig.iter().next().map(|(name, sort)| GcqTerm::Gen { name: name.to_string(), sort }).unwrap_or(Copy);
    let Sort { n: a, m: b } = c.sort();
    let d = n_copy(b);
    let e = n_merge(b);
    let mut out = vec![
        Axiom::new("smc-i", Eq, c.clone().then(d.clone()).then(e.clone()), c.clone().then(d.clone().then(e.clone()))),
        Axiom::new("smc-ii", Eq, id_n(a).then(c.clone()), c.clone().then(id_n(b))),
        Axiom::new("smc-iii", Eq, c.clone().par(Copy).par(Merge), c.clone().par(Copy.par(Merge))),
        Axiom::new("smc-iv", Eq, Id0.par(c.clone()), c.clone().par(Id0)),
        Axiom::new(
            "smc-v",
            Eq,
            c.clone().then(d.clone()).par(Copy.then(Merge)),
            c.clone().par(Copy).then(d.clone().par(Merge)),
        ),
        Axiom::new("smc-vi", Eq, c.clone().par(Id1).then(n_swap(b, 1)), n_swap(a, 1).then(Id1.par(c.clone()))),
        Axiom::new("smc-vii", Eq, Id1.par(c.clone()).then(n_swap(1, b)), n_swap(1, a).then(c.clone().par(Id1))),
        Axiom::new("smc-viii", Eq, Swap.then(Swap), Id1.par(Id1)),
        Axiom::new("A", Eq, Merge.par(Id1).then(Merge), Id1.par(Merge).then(Merge)),
        Axiom::new("C", Eq, Swap.then(Merge), Merge),
        Axiom::new("U", Eq, Spawn.par(Id1).then(Merge), Id1),
        Axiom::new("Aop", Eq, Copy.then(Copy.par(Id1)), Copy.then(Id1.par(Copy))),
        Axiom::new("Cop", Eq, Copy.then(Swap), Copy),
        Axiom::new("Uop", Eq, Copy.then(Discard.par(Id1)), Id1),
        Axiom::new("S", Eq, Copy.then(Merge), Id1),
        Axiom::new("F", Eq, Copy.par(Id1).then(Id1.par(Merge)), Merge.then(Copy)),
        Axiom::new("UC", Le, Spawn.then(Discard), Id0),
        Axiom::new("CU", Le, Id1, Discard.then(Spawn)),
        Axiom::new("MC", Le, Merge.then(Copy), Id1.par(Id1)),
        Axiom::new("CM", Le, Id1, Copy.then(Merge)),
    ];
    for (name, sort) in sig.iter() {
        let r = GcqTerm::Gen { name: name.to_string(), sort };
        out.push(Axiom::new(format!("L1[{name}]"), Le, r.clone().then(n_discard(sort.m)), n_discard(sort.n)));
        out.push(Axiom::new(
            format!("L2[{name}]"),
            Le,
            r.clone().then(n_copy(sort.m)),
            n_copy(sort.n).then(r.clone().par(r)),
        ));
    }
    out
}

/// Looks an axiom up by name, including `-rev` variants.
pub fn find_axiom(sig: &Signature, name: &str) -> Option<Axiom> {
    let all = catalog(sig);
    if let Some(base) = name.strip_suffix("-rev") {
        return all.into_iter().find(|a| a.name == base).map(|a| a.reversed());
    }
    all.into_iter().find(|a| a.name == name)
}

#[derive(Debug, Clone)]
pub struct SemanticReport {
    pub holds: bool,
    pub models_checked: usize,
    pub countermodel: Option<Countermodel>,
}

impl SemanticReport {
    pub fn to_json(&self) -> Value {
        json!({
            "holds": self.holds,
            "models_checked": self.models_checked,
            "countermodel": self.countermodel.as_ref().map(|c| c.to_json()),
        })
    }
}

fn first_missing(a: &Relation, b: &Relation) -> Option<(Vec<u32>, Vec<u32>)> {
    a.pairs.iter().find(|(x, y)| !b.contains(x, y)).cloned()
}

/// Checks the axiom in `model`. Returns the first violating pair.
pub fn check_in_model(ax: &Axiom, model: &RelModel) -> Result<Option<(Tuple, Tuple)>, GcqError> {
    let l = eval_gcq(&ax.lhs, model)?;
    let r = eval_gcq(&ax.rhs, model)?;
    if let Some(p) = first_missing(&l, &r) {
        return Ok(Some(p));
    }
    if ax.kind == AxiomKind::Equality {
        return Ok(first_missing(&r, &l));
    }
    Ok(None)
}

/// Checks the axiom in the empty model and `trials - 1` seeded random models
/// with carriers up to `max_carrier`. Stops at the first countermodel.
pub fn verify_semantic(
    ax: &Axiom,
    sig: &Signature,
    trials: usize,
    max_carrier: usize,
    seed: u64,
) -> Result<SemanticReport, GcqError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let models = model_sample(sig, trials.max(1), max_carrier, &mut rng);
    for (k, model) in models.into_iter().enumerate() {
        if let Some((input, output)) = check_in_model(ax, &model)? {
            return Ok(SemanticReport {
                holds: false,
                models_checked: k + 1,
                countermodel: Some(Countermodel { model, input, output }),
            });
        }
    }
    Ok(SemanticReport { holds: true, models_checked: trials.max(1), countermodel: None })
}

/// Decides the axiom through cospans: isomorphism for equalities,
/// a leg-preserving morphism for inequations.
pub fn verify_graphical(ax: &Axiom, budget: Option<u64>) -> Result<bool, ContainmentError> {
    match ax.kind {
        AxiomKind::Equality => Ok(decide_equivalence_with_budget(&ax.lhs, &ax.rhs, budget)?.holds),
        AxiomKind::LeftLeqRight => Ok(decide_inclusion_with_budget(&ax.lhs, &ax.rhs, budget)?.holds),
    }
}

/// Terms of the calculus of relations over binary symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CpTerm {
    Rel(String),
    Id,
    Top,
    Meet(Box<CpTerm>, Box<CpTerm>),
    Comp(Box<CpTerm>, Box<CpTerm>),
    Converse(Box<CpTerm>),
}

impl CpTerm {
    pub fn rel(name: &str) -> CpTerm {
        CpTerm::Rel(name.to_string())
    }

    pub fn meet(a: CpTerm, b: CpTerm) -> CpTerm {
        CpTerm::Meet(Box::new(a), Box::new(b))
    }

    pub fn comp(a: CpTerm, b: CpTerm) -> CpTerm {
        CpTerm::Comp(Box::new(a), Box::new(b))
    }

    pub fn converse(a: CpTerm) -> CpTerm {
        CpTerm::Converse(Box::new(a))
    }

    /// Direct relational reading, symbols must have sort `(1,1)` in `m`.
    pub fn eval(&self, m: &RelModel) -> Relation {
        let k = m.size();
        match self {
            CpTerm::Rel(name) => m.relation(name).unwrap_or_else(|| Relation::empty(Sort::new(1, 1), k)),
            CpTerm::Id => Relation::identity(1, k),
            CpTerm::Top => {
                let pairs = (0..k as u32).flat_map(|a| (0..k as u32).map(move |b| (vec![a], vec![b])));
                Relation::from_pairs(Sort::new(1, 1), k, pairs).expect("pairs lie in the carrier")
            }
            CpTerm::Meet(a, b) => a.eval(m).intersect(&b.eval(m)),
            CpTerm::Comp(a, b) => a.eval(m).compose(&b.eval(m)).expect("binary relations compose"),
            CpTerm::Converse(a) => a.eval(m).transpose(),
        }
    }
}

/// Encodes a relation-algebra term as a `(1,1)` diagram.
pub fn encode_cp(t: &CpTerm) -> GcqTerm {
    match t {
        CpTerm::Rel(name) => GcqTerm::Gen { name: name.clone(), sort: Sort::new(1, 1) },
        CpTerm::Id => Id1,
        CpTerm::Top => Discard.then(Spawn),
        CpTerm::Meet(a, b) => seq3(Copy, encode_cp(a).par(encode_cp(b)), Merge),
        CpTerm::Comp(a, b) => encode_cp(a).then(encode_cp(b)),
        CpTerm::Converse(a) => {
            seq3(Spawn.then(Copy).par(Id1), Id1.par(encode_cp(a)).par(Id1), Id1.par(Merge.then(Discard)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRelation {
    /// The next diagram equals the previous one.
    Equal,
    /// The next diagram is included in the previous one.
    Below,
}

#[derive(Debug, Clone)]
pub struct DerivationStep {
    pub law: &'static str,
    pub relation: StepRelation,
    pub term: GcqTerm,
}

/// A chain of rewrites proving that the one-edge query
/// `exists z. x0 = x1 /\ R(x0, z)` is included in the four-edge query
/// `exists z0 z1. R(x0,z0) /\ R(x1,z0) /\ R(x0,z1) /\ R(x1,z1)`, with `R`
/// of sort `(1,1)`. Returns the starting diagram and the steps.
pub fn spider_derivation() -> (GcqTerm, Vec<DerivationStep>) {
    use StepRelation::{Below, Equal};
    let r = || GcqTerm::Gen { name: "R".into(), sort: Sort::new(1, 1) };
    let cap = || Merge.then(Discard);
    let crossing = || Id1.par(Swap).par(Id1);
    let start = seq3(Copy.par(Copy), r().par(r()).par(r()).par(r()), crossing().then(cap().par(cap())));
    let rc = || r().then(Copy);
    let steps = vec![
        ("L2", Below, seq3(rc().par(rc()), crossing(), cap().par(cap()))),
        ("spider", Equal, seq3(r().par(r()), Merge.then(Copy), Discard.par(Discard))),
        ("MC", Below, seq3(Merge.then(Copy), r().par(r()), Merge.then(Copy).then(Discard.par(Discard)))),
        ("L2", Below, seq3(Merge, rc(), Merge.then(Copy).then(Discard.par(Discard)))),
        ("S", Equal, seq3(Merge, rc(), Discard.par(Discard))),
        ("Uop", Equal, seq3(Merge, r(), Discard)),
    ];
    let steps = steps.into_iter().map(|(law, relation, term)| DerivationStep { law, relation, term }).collect();
    (start, steps)
}
