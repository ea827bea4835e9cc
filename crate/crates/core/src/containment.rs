//! Query inclusion and equivalence.
//!
//! `c ≦ d` holds iff there is a hypergraph morphism from the apex of `⟦d⟧`
//! to the apex of `⟦c⟧` that commutes with both interface legs. Note the
//! direction: the larger query maps into the smaller one.
//!
//! [`natural_model_check`] decides the same question without any search, by
//! evaluating `d` over the apex of `⟦c⟧` read as a model.

use std::collections::BTreeMap;

use serde_json::{json, Value};
use thiserror::Error;

use crate::cospan::{leg_pins, term_to_cospan, Cospan};
use crate::gcq::{eval_gcq, GcqError, GcqTerm};
use crate::hypergraph::{find_morphisms, HgError, HgMorphism, Hypergraph, SearchOptions};
use crate::sigmodel::{RelModel, SigError, Signature, Sort, Tuple};

/// Step budget used when none is given.
pub const DEFAULT_BUDGET: u64 = 50_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContainmentError {
    #[error("terms have different sorts: {0} vs {1}")]
    SortMismatch(Sort, Sort),
    #[error("search budget of {0} steps exhausted")]
    BudgetExhausted(u64),
    #[error(transparent)]
    Signature(#[from] SigError),
    #[error(transparent)]
    Eval(#[from] GcqError),
}

impl From<HgError> for ContainmentError {
    fn from(e: HgError) -> Self {
        match e {
            HgError::BudgetExhausted(b) => ContainmentError::BudgetExhausted(b),
            other => unreachable!("search inputs are well formed: {other}"),
        }
    }
}

/// A model together with a pair of tuples in `⟦c⟧` but not in `⟦d⟧`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Countermodel {
    pub model: RelModel,
    pub input: Tuple,
    pub output: Tuple,
}

impl Countermodel {
    pub fn to_json(&self) -> Value {
        json!({
            "model": self.model.to_json(),
            "tuple": [self.model.tuple_names(&self.input), self.model.tuple_names(&self.output)],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InclusionVerdict {
    pub holds: bool,
    pub witness: Option<HgMorphism>,
    pub countermodel: Option<Countermodel>,
}

impl InclusionVerdict {
    pub fn to_json(&self) -> Value {
        let mut v = json!({ "holds": self.holds });
        if let Some(w) = &self.witness {
            v["witness"] = serde_json::to_value(w).expect("morphisms serialize");
        }
        if let Some(c) = &self.countermodel {
            v["countermodel"] = c.to_json();
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceVerdict {
    pub holds: bool,
    pub forward: InclusionVerdict,
    pub backward: InclusionVerdict,
}

impl EquivalenceVerdict {
    pub fn to_json(&self) -> Value {
        json!({
            "holds": self.holds,
            "forward": self.forward.to_json(),
            "backward": self.backward.to_json(),
        })
    }
}

fn check_sorts(c: &GcqTerm, d: &GcqTerm) -> Result<(), ContainmentError> {
    if c.sort() != d.sort() {
        return Err(ContainmentError::SortMismatch(c.sort(), d.sort()));
    }
    Ok(())
}

/// The signature of the symbols occurring in either term.
pub fn joint_signature(c: &GcqTerm, d: &GcqTerm) -> Result<Signature, SigError> {
    c.signature()?.union(&d.signature()?)
}

/// A morphism `⟦d⟧ -> ⟦c⟧` between compiled cospans, if any.
pub fn cospan_inclusion_witness(
    cc: &Cospan,
    dc: &Cospan,
    budget: Option<u64>,
) -> Result<Option<HgMorphism>, ContainmentError> {
    let Some(pins) = leg_pins(dc, cc) else {
        return Ok(None);
    };
    let opts = SearchOptions { limit: Some(1), budget, injective: false };
    Ok(find_morphisms(&dc.apex, &cc.apex, &pins, opts)?.morphisms.pop())
}

/// Decides `c ≦ d` with the default step budget.
pub fn decide_inclusion(c: &GcqTerm, d: &GcqTerm) -> Result<InclusionVerdict, ContainmentError> {
    decide_inclusion_with_budget(c, d, Some(DEFAULT_BUDGET))
}

/// Decides `c ≦ d`. A failing verdict carries the natural model of `c` as a
/// countermodel.
pub fn decide_inclusion_with_budget(
    c: &GcqTerm,
    d: &GcqTerm,
    budget: Option<u64>,
) -> Result<InclusionVerdict, ContainmentError> {
    check_sorts(c, d)?;
    let sig = joint_signature(c, d)?;
    let cc = term_to_cospan(c);
    let dc = term_to_cospan(d);
    Ok(match cospan_inclusion_witness(&cc, &dc, budget)? {
        Some(w) => InclusionVerdict { holds: true, witness: Some(w), countermodel: None },
        None => InclusionVerdict { holds: false, witness: None, countermodel: Some(natural_countermodel(&cc, &sig)?) },
    })
}

fn boundary_tuples(c: &Cospan) -> (Tuple, Tuple) {
    let t = |xs: &[usize]| xs.iter().map(|&v| v as u32).collect();
    (t(&c.iota), t(&c.omega))
}

fn natural_countermodel(cc: &Cospan, sig: &Signature) -> Result<Countermodel, SigError> {
    let (input, output) = boundary_tuples(cc);
    Ok(Countermodel { model: hypergraph_as_model(&cc.apex, sig)?, input, output })
}

/// Decides `c ≡ d` as inclusion both ways.
pub fn decide_equivalence(c: &GcqTerm, d: &GcqTerm) -> Result<EquivalenceVerdict, ContainmentError> {
    decide_equivalence_with_budget(c, d, Some(DEFAULT_BUDGET))
}

pub fn decide_equivalence_with_budget(
    c: &GcqTerm,
    d: &GcqTerm,
    budget: Option<u64>,
) -> Result<EquivalenceVerdict, ContainmentError> {
    let forward = decide_inclusion_with_budget(c, d, budget)?;
    let backward = decide_inclusion_with_budget(d, c, budget)?;
    Ok(EquivalenceVerdict { holds: forward.holds && backward.holds, forward, backward })
}

/// Reads a hypergraph as a model: vertices `v0, v1, ...` and one tuple pair
/// per hyperedge.
pub fn hypergraph_as_model(g: &Hypergraph, sig: &Signature) -> Result<RelModel, SigError> {
    let carrier = (0..g.vcount).map(|i| format!("v{i}")).collect();
    let rho = g
        .edges
        .iter()
        .map(|(sym, list)| {
            let set = list
                .iter()
                .map(|e| {
                    let t = |xs: &[usize]| xs.iter().map(|&v| v as u32).collect::<Tuple>();
                    (t(&e.src), t(&e.tgt))
                })
                .collect();
            (sym.clone(), set)
        })
        .collect();
    RelModel::new(sig.clone(), carrier, rho)
}

/// Decides `c ≦ d` by evaluating `d` over the natural model of `c`.
pub fn natural_model_check(c: &GcqTerm, d: &GcqTerm) -> Result<bool, ContainmentError> {
    check_sorts(c, d)?;
    let sig = joint_signature(c, d)?;
    let cc = term_to_cospan(c);
    let model = hypergraph_as_model(&cc.apex, &sig)?;
    let (input, output) = boundary_tuples(&cc);
    Ok(eval_gcq(d, &model)?.contains(&input, &output))
}

/// Counts, for every boundary pair, the morphisms from the apex of `⟦t⟧`
/// into `g` that restrict to it.
pub fn span_semantics(t: &GcqTerm, g: &Hypergraph) -> BTreeMap<(Tuple, Tuple), usize> {
    let c = term_to_cospan(t);
    let all =
        find_morphisms(&c.apex, g, &BTreeMap::new(), SearchOptions::default()).expect("unbounded search").morphisms;
    let mut out = BTreeMap::new();
    for h in all {
        let img = |xs: &[usize]| xs.iter().map(|&v| h.vmap[v] as u32).collect::<Tuple>();
        *out.entry((img(&c.iota), img(&c.omega))).or_insert(0) += 1;
    }
    out
}
