//! Translations between formulas and terms, and between the two model
//! conventions.
//!
//! [`theta`] follows a derivation of `n ⊢ φ` rule by rule and yields a term
//! of sort `(n, 0)`. [`lambda`] follows the structure of a term of sort
//! `(n, m)` and yields a two-sided judgment `n, m ⊢ φ`.

use std::collections::BTreeMap;
use std::fmt;

use crate::ccq::{derive, CcqError, Derivation, Formula, Judgment, Rule};
use crate::gcq::{id_n, tensor_all, GcqTerm};
use crate::sigmodel::{RelModel, Signature, Sort};

/// A judgment `n, m ⊢ φ` whose formula lives in the single context `n + m`:
/// `y_j` is the free variable `x_{n+j}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoSidedJudgment {
    pub left: usize,
    pub right: usize,
    pub formula: Formula,
}

impl TwoSidedJudgment {
    /// The equivalent one-sided judgment `n + m ⊢ φ`.
    pub fn flatten(&self) -> Judgment {
        Judgment { context: self.left + self.right, formula: self.formula.clone() }
    }
}

impl fmt::Display for TwoSidedJudgment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{} |- {}", self.left, self.right, self.formula.display_split(Some(self.left)))
    }
}

/// Translates a judgment into a term of sort `(n, 0)`.
pub fn theta(j: &Judgment, sig: &Signature) -> Result<GcqTerm, CcqError> {
    Ok(theta_derivation(&derive(j, sig)?))
}

/// Translates a derivation, one case per rule.
pub fn theta_derivation(d: &Derivation) -> GcqTerm {
    let premise = |i: usize| theta_derivation(&d.premises[i]);
    match &d.rule {
        Rule::Top => GcqTerm::Id0,
        Rule::Sigma { symbol, arity } => GcqTerm::Gen { name: symbol.clone(), sort: Sort::new(*arity, 0) },
        Rule::Eq => GcqTerm::Merge.then(GcqTerm::Discard),
        Rule::Exists => id_n(d.conclusion.context).par(GcqTerm::Spawn).then(premise(0)),
        Rule::Conj => premise(0).par(premise(1)),
        Rule::Sw { n, k } => tensor_all(vec![id_n(*k), GcqTerm::Swap, id_n(n - k - 2)]).then(premise(0)),
        Rule::Id { n } => id_n(n - 2).par(GcqTerm::Copy).then(premise(0)),
        Rule::Nu { .. } => premise(0).par(GcqTerm::Discard),
    }
}

fn eqs(pairs: &[(usize, usize)]) -> Formula {
    Formula::conj_all(pairs.iter().map(|&(a, b)| Formula::eq(a, b)).collect())
}

/// Translates a term of sort `(n, m)` into `n, m ⊢ φ`.
pub fn lambda(t: &GcqTerm) -> TwoSidedJudgment {
    let Sort { n, m } = t.sort();
    let formula = match t {
        GcqTerm::Copy => eqs(&[(0, 1), (0, 2)]),
        GcqTerm::Discard | GcqTerm::Spawn | GcqTerm::Id0 => Formula::Top,
        GcqTerm::Merge => eqs(&[(0, 2), (1, 2)]),
        GcqTerm::Id1 => eqs(&[(0, 1)]),
        GcqTerm::Swap => eqs(&[(0, 3), (1, 2)]),
        GcqTerm::Gen { name, sort } => {
            let args: Vec<usize> = (0..sort.n + sort.m).collect();
            Formula::rel(name, &args)
        }
        GcqTerm::Tensor(a, b, _) => {
            let (la, lb) = (lambda(a), lambda(b));
            let (na, ma, nb) = (la.left, la.right, lb.left);
            let fa = la.formula.rename(|i| if i < na { i } else { n + (i - na) });
            let fb = lb.formula.rename(|i| if i < nb { na + i } else { n + ma + (i - nb) });
            Formula::conj(fa, fb)
        }
        GcqTerm::Seq(a, b, _) => {
            let (la, lb) = (lambda(a), lambda(b));
            let k = la.right;
            let mid = n + m;
            let fa = la.formula.rename(|i| if i < n { i } else { mid + (i - n) });
            let fb = lb.formula.rename(|i| if i < k { mid + i } else { n + (i - k) });
            let mut body = Formula::conj(fa, fb);
            for v in (mid..mid + k).rev() {
                body = Formula::exists(v, body);
            }
            body
        }
    };
    TwoSidedJudgment { left: n, right: m, formula }
}

/// The relational signature a term signature becomes: `(n, m) ↦ (n+m, 0)`.
pub fn lambda_signature(sig: &Signature) -> Signature {
    let mut out = Signature::new();
    for (name, s) in sig.iter() {
        out.add(name, Sort::new(s.n + s.m, 0)).expect("names already valid");
    }
    out
}

/// Reads a relational model as a term model: each tuple becomes `(t, •)`.
///
/// Relational models already store tuples in that shape, so this only
/// checks that every coarity is zero.
pub fn theta_model(m: &RelModel) -> Option<RelModel> {
    m.signature().is_ccq().then(|| m.clone())
}

/// Flattens each pair `(a, b)` into the tuple `a ++ b`.
pub fn lambda_model(m: &RelModel) -> RelModel {
    let rho: BTreeMap<_, _> = m
        .relations()
        .map(|(name, tuples)| {
            let flat = tuples
                .iter()
                .map(|(a, b)| {
                    let mut t = a.clone();
                    t.extend_from_slice(b);
                    (t, Vec::new())
                })
                .collect();
            (name.to_string(), flat)
        })
        .collect();
    RelModel::new(lambda_signature(m.signature()), m.carrier().to_vec(), rho)
        .expect("flattened tuples fit the flattened signature")
}
