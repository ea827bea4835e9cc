//! Signatures, finite relational models and relations as sets of tuple pairs.
//!
//! Carrier elements are opaque strings on the outside and dense `u32` ids on
//! the inside. A tuple is a `Vec<u32>`; the empty tuple plays the role of the
//! unique element of `X^0`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::de::{Deserializer, MapAccess, Visitor};
use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;

/// A tuple of carrier element ids.
pub type Tuple = Vec<u32>;

/// Names that the term grammars use for constants and keywords.
pub const RESERVED: &[&str] = &["copy", "discard", "merge", "spawn", "id", "id0", "swap", "top", "exists"];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SigError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("duplicate symbol `{0}`")]
    DuplicateSymbol(String),
    #[error("symbol `{0}` has a negative arity or coarity")]
    NegativeArity(String),
    #[error("invalid symbol name `{0}`")]
    InvalidName(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("tuple for `{symbol}` has length {got}, expected {expected}")]
    ArityMismatch { symbol: String, expected: usize, got: usize },
    #[error("element `{0}` is not in the carrier")]
    NotInCarrier(String),
    #[error("duplicate carrier element `{0}`")]
    DuplicateElement(String),
    #[error("sort mismatch: {0}")]
    SortMismatch(String),
    #[error("relations over different carriers ({0} vs {1})")]
    CarrierMismatch(usize, usize),
}

/// The sort `(n, m)` of a term: `n` input wires, `m` output wires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sort {
    pub n: usize,
    pub m: usize,
}

impl Sort {
    pub const fn new(n: usize, m: usize) -> Self {
        Sort { n, m }
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.n, self.m)
    }
}

pub fn is_valid_symbol(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_') && !RESERVED.contains(&name)
}

/// A finite set of relation symbols, each with an arity and a coarity.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Signature {
    symbols: BTreeMap<String, Sort>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a signature from `(name, arity, coarity)` triples.
    pub fn from_symbols<'a, I>(symbols: I) -> Result<Self, SigError>
    where
        I: IntoIterator<Item = (&'a str, usize, usize)>,
    {
        let mut sig = Signature::new();
        for (name, n, m) in symbols {
            sig.add(name, Sort::new(n, m))?;
        }
        Ok(sig)
    }

    pub fn add(&mut self, name: &str, sort: Sort) -> Result<(), SigError> {
        if !is_valid_symbol(name) {
            return Err(SigError::InvalidName(name.to_string()));
        }
        if self.symbols.contains_key(name) {
            return Err(SigError::DuplicateSymbol(name.to_string()));
        }
        self.symbols.insert(name.to_string(), sort);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<Sort> {
        self.symbols.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.symbols.contains_key(name)
    }

    /// Symbols in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, Sort)> {
        self.symbols.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// True when every coarity is zero.
    pub fn is_ccq(&self) -> bool {
        self.symbols.values().all(|s| s.m == 0)
    }

    /// Merges `other` into `self`, failing on a symbol declared with two sorts.
    pub fn union(&self, other: &Signature) -> Result<Signature, SigError> {
        let mut out = self.clone();
        for (name, sort) in other.iter() {
            match out.get(name) {
                Some(s) if s != sort => {
                    return Err(SigError::SortMismatch(format!("`{name}` declared as {s} and {sort}")))
                }
                Some(_) => {}
                None => {
                    out.symbols.insert(name.to_string(), sort);
                }
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Value {
        let map: serde_json::Map<String, Value> =
            self.symbols.iter().map(|(k, s)| (k.clone(), json!([s.n, s.m]))).collect();
        Value::Object(map)
    }
}

struct RawEntries(Vec<(String, Value)>);

impl<'de> Deserialize<'de> for RawEntries {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct EntriesVisitor;
        impl<'de> Visitor<'de> for EntriesVisitor {
            type Value = RawEntries;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a JSON object")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<RawEntries, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Value>()? {
                    out.push((k, v));
                }
                Ok(RawEntries(out))
            }
        }
        deserializer.deserialize_map(EntriesVisitor)
    }
}

/// Parses a signature document of the form `{"R": [arity, coarity], ...}`.
pub fn load_signature(text: &str) -> Result<Signature, SigError> {
    let RawEntries(entries) = serde_json::from_str(text).map_err(|e| SigError::Json(e.to_string()))?;
    let mut sig = Signature::new();
    for (name, value) in entries {
        let pair = value
            .as_array()
            .filter(|a| a.len() == 2)
            .ok_or_else(|| SigError::Json(format!("`{name}`: expected [arity, coarity]")))?;
        let mut dims = [0usize; 2];
        for (slot, v) in dims.iter_mut().zip(pair) {
            let k = v.as_i64().ok_or_else(|| SigError::Json(format!("`{name}`: arity must be an integer")))?;
            if k < 0 {
                return Err(SigError::NegativeArity(name));
            }
            *slot = k as usize;
        }
        sig.add(&name, Sort::new(dims[0], dims[1]))?;
    }
    Ok(sig)
}

/// A finite relational structure `(X, rho)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelModel {
    signature: Signature,
    carrier: Vec<String>,
    rho: BTreeMap<String, BTreeSet<(Tuple, Tuple)>>,
}

impl RelModel {
    /// Validates and builds a model. Symbols absent from `rho` are empty.
    pub fn new(
        signature: Signature,
        carrier: Vec<String>,
        rho: BTreeMap<String, BTreeSet<(Tuple, Tuple)>>,
    ) -> Result<Self, SigError> {
        let mut seen = BTreeSet::new();
        for e in &carrier {
            if !seen.insert(e) {
                return Err(SigError::DuplicateElement(e.clone()));
            }
        }
        let size = carrier.len() as u32;
        for (sym, tuples) in &rho {
            let sort = signature.get(sym).ok_or_else(|| SigError::UnknownSymbol(sym.clone()))?;
            for (a, b) in tuples {
                check_len(sym, sort.n, a.len())?;
                check_len(sym, sort.m, b.len())?;
                if let Some(x) = a.iter().chain(b).find(|&&x| x >= size) {
                    return Err(SigError::NotInCarrier(format!("#{x}")));
                }
            }
        }
        let mut rho = rho;
        for (name, _) in signature.iter() {
            rho.entry(name.to_string()).or_default();
        }
        Ok(RelModel { signature, carrier, rho })
    }

    /// A model over `size` anonymous elements `e0, e1, ...`.
    pub fn with_size(
        signature: Signature,
        size: usize,
        rho: BTreeMap<String, BTreeSet<(Tuple, Tuple)>>,
    ) -> Result<Self, SigError> {
        let carrier = (0..size).map(|i| format!("e{i}")).collect();
        Self::new(signature, carrier, rho)
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn carrier(&self) -> &[String] {
        &self.carrier
    }

    pub fn size(&self) -> usize {
        self.carrier.len()
    }

    /// The interpretation of `symbol`, or `None` if it is not in the signature.
    pub fn rho(&self, symbol: &str) -> Option<&BTreeSet<(Tuple, Tuple)>> {
        self.rho.get(symbol)
    }

    pub fn relations(&self) -> impl Iterator<Item = (&str, &BTreeSet<(Tuple, Tuple)>)> {
        self.rho.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// The interpretation of `symbol` as a [`Relation`].
    pub fn relation(&self, symbol: &str) -> Option<Relation> {
        let sort = self.signature.get(symbol)?;
        Some(Relation { sort, carrier: self.size(), pairs: self.rho[symbol].clone() })
    }

    pub fn element_name(&self, id: u32) -> &str {
        &self.carrier[id as usize]
    }

    pub fn tuple_names(&self, t: &[u32]) -> Vec<String> {
        t.iter().map(|&x| self.element_name(x).to_string()).collect()
    }

    pub fn to_json(&self) -> Value {
        let relations: serde_json::Map<String, Value> = self
            .rho
            .iter()
            .map(|(k, tuples)| {
                let rows: Vec<Value> =
                    tuples.iter().map(|(a, b)| json!([self.tuple_names(a), self.tuple_names(b)])).collect();
                (k.clone(), Value::Array(rows))
            })
            .collect();
        json!({ "carrier": self.carrier, "relations": relations })
    }
}

fn check_len(symbol: &str, expected: usize, got: usize) -> Result<(), SigError> {
    if expected != got {
        return Err(SigError::ArityMismatch { symbol: symbol.to_string(), expected, got });
    }
    Ok(())
}

#[derive(Deserialize)]
struct ModelDoc {
    carrier: Vec<String>,
    #[serde(default)]
    relations: BTreeMap<String, Vec<Value>>,
}

/// Parses a model document and validates it against `sig`.
///
/// Each row is `[[in...], [out...]]`. For symbols of coarity 0 a flat
/// `[in...]` row is accepted as well.
pub fn load_model(text: &str, sig: &Signature) -> Result<RelModel, SigError> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(|e| SigError::Json(e.to_string()))?;
    let index: HashMap<&str, u32> = doc.carrier.iter().enumerate().map(|(i, e)| (e.as_str(), i as u32)).collect();
    let lookup = |v: &Value| -> Result<u32, SigError> {
        let s = v.as_str().ok_or_else(|| SigError::Json(format!("expected element name, got {v}")))?;
        index.get(s).copied().ok_or_else(|| SigError::NotInCarrier(s.to_string()))
    };
    let tuple = |v: &Value| -> Result<Tuple, SigError> {
        v.as_array().ok_or_else(|| SigError::Json(format!("expected tuple, got {v}")))?.iter().map(&lookup).collect()
    };
    let mut rho = BTreeMap::new();
    for (sym, rows) in &doc.relations {
        let sort = sig.get(sym).ok_or_else(|| SigError::UnknownSymbol(sym.clone()))?;
        let mut set = BTreeSet::new();
        for row in rows {
            let arr = row.as_array().ok_or_else(|| SigError::Json(format!("`{sym}`: expected a row, got {row}")))?;
            let flat = arr.iter().all(Value::is_string) && sort.m == 0;
            let (a, b) = if flat && !(arr.is_empty() && sort.n > 0) {
                (tuple(row)?, Vec::new())
            } else if arr.len() == 2 {
                (tuple(&arr[0])?, tuple(&arr[1])?)
            } else {
                return Err(SigError::Json(format!("`{sym}`: expected [[in...],[out...]]")));
            };
            check_len(sym, sort.n, a.len())?;
            check_len(sym, sort.m, b.len())?;
            set.insert((a, b));
        }
        rho.insert(sym.clone(), set);
    }
    RelModel::new(sig.clone(), doc.carrier, rho)
}

/// A relation `r ⊆ X^n × X^m` over a carrier of the given size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub sort: Sort,
    pub carrier: usize,
    pub pairs: BTreeSet<(Tuple, Tuple)>,
}

impl Relation {
    pub fn empty(sort: Sort, carrier: usize) -> Self {
        Relation { sort, carrier, pairs: BTreeSet::new() }
    }

    /// `{(•, •)}`, the unit of tensor.
    pub fn unit(carrier: usize) -> Self {
        let mut pairs = BTreeSet::new();
        pairs.insert((Vec::new(), Vec::new()));
        Relation { sort: Sort::new(0, 0), carrier, pairs }
    }

    /// The identity relation on `X^k`.
    pub fn identity(k: usize, carrier: usize) -> Self {
        let pairs = all_tuples(k, carrier).map(|t| (t.clone(), t)).collect();
        Relation { sort: Sort::new(k, k), carrier, pairs }
    }

    pub fn from_pairs<I>(sort: Sort, carrier: usize, pairs: I) -> Result<Self, SigError>
    where
        I: IntoIterator<Item = (Tuple, Tuple)>,
    {
        let pairs: BTreeSet<_> = pairs.into_iter().collect();
        for (a, b) in &pairs {
            if a.len() != sort.n || b.len() != sort.m {
                return Err(SigError::SortMismatch(format!(
                    "pair of lengths ({},{}) in a relation of sort {sort}",
                    a.len(),
                    b.len()
                )));
            }
            if a.iter().chain(b).any(|&x| x as usize >= carrier) {
                return Err(SigError::NotInCarrier(format!("element outside 0..{carrier}")));
            }
        }
        Ok(Relation { sort, carrier, pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, a: &[u32], b: &[u32]) -> bool {
        self.pairs.contains(&(a.to_vec(), b.to_vec()))
    }

    pub fn is_subset(&self, other: &Relation) -> bool {
        self.pairs.is_subset(&other.pairs)
    }

    /// Relational composition `self ; other`.
    pub fn compose(&self, other: &Relation) -> Result<Relation, SigError> {
        if self.sort.m != other.sort.n {
            return Err(SigError::SortMismatch(format!("cannot compose {} with {}", self.sort, other.sort)));
        }
        if self.carrier != other.carrier {
            return Err(SigError::CarrierMismatch(self.carrier, other.carrier));
        }
        let mut by_input: HashMap<&[u32], Vec<&Tuple>> = HashMap::new();
        for (a, b) in &other.pairs {
            by_input.entry(a.as_slice()).or_default().push(b);
        }
        let mut pairs = BTreeSet::new();
        for (a, b) in &self.pairs {
            if let Some(outs) = by_input.get(b.as_slice()) {
                for c in outs {
                    pairs.insert((a.clone(), (*c).clone()));
                }
            }
        }
        Ok(Relation { sort: Sort::new(self.sort.n, other.sort.m), carrier: self.carrier, pairs })
    }

    /// Tensor product: concatenate inputs and outputs pairwise.
    pub fn tensor(&self, other: &Relation) -> Result<Relation, SigError> {
        if self.carrier != other.carrier {
            return Err(SigError::CarrierMismatch(self.carrier, other.carrier));
        }
        let mut pairs = BTreeSet::new();
        for (a, b) in &self.pairs {
            for (c, d) in &other.pairs {
                let mut x = a.clone();
                x.extend_from_slice(c);
                let mut y = b.clone();
                y.extend_from_slice(d);
                pairs.insert((x, y));
            }
        }
        Ok(Relation {
            sort: Sort::new(self.sort.n + other.sort.n, self.sort.m + other.sort.m),
            carrier: self.carrier,
            pairs,
        })
    }

    /// Swaps inputs and outputs.
    pub fn transpose(&self) -> Relation {
        Relation {
            sort: Sort::new(self.sort.m, self.sort.n),
            carrier: self.carrier,
            pairs: self.pairs.iter().map(|(a, b)| (b.clone(), a.clone())).collect(),
        }
    }

    pub fn intersect(&self, other: &Relation) -> Relation {
        Relation {
            sort: self.sort,
            carrier: self.carrier,
            pairs: self.pairs.intersection(&other.pairs).cloned().collect(),
        }
    }

    /// Rows as element names, sorted.
    pub fn to_json(&self, model: &RelModel) -> Value {
        let rows: Vec<Value> =
            self.pairs.iter().map(|(a, b)| json!([model.tuple_names(a), model.tuple_names(b)])).collect();
        Value::Array(rows)
    }
}

/// All tuples of length `k` over `0..carrier`, in lexicographic order.
pub fn all_tuples(k: usize, carrier: usize) -> impl Iterator<Item = Tuple> {
    let total = if k == 0 { 1 } else { carrier.checked_pow(k as u32).unwrap_or(usize::MAX) };
    (0..total).map(move |mut code| {
        let mut t = vec![0u32; k];
        for slot in t.iter_mut().rev() {
            *slot = (code % carrier.max(1)) as u32;
            code /= carrier.max(1);
        }
        t
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(carrier: usize, pairs: &[(&[u32], &[u32])]) -> Relation {
        let sort = Sort::new(pairs[0].0.len(), pairs[0].1.len());
        Relation::from_pairs(sort, carrier, pairs.iter().map(|(a, b)| (a.to_vec(), b.to_vec()))).unwrap()
    }

    #[test]
    fn signature_loads_sorted() {
        let sig = load_signature(r#"{"S":[1,0],"R":[2,1]}"#).unwrap();
        let names: Vec<_> = sig.iter().collect();
        assert_eq!(names, vec![("R", Sort::new(2, 1)), ("S", Sort::new(1, 0))]);
        assert!(load_signature("{}").unwrap().is_empty());
    }

    #[test]
    fn signature_errors() {
        assert_eq!(load_signature(r#"{"R":[2,1],"R":[1,1]}"#), Err(SigError::DuplicateSymbol("R".into())));
        assert_eq!(load_signature(r#"{"R":[-1,1]}"#), Err(SigError::NegativeArity("R".into())));
        assert!(matches!(load_signature("{"), Err(SigError::Json(_))));
        assert!(matches!(load_signature(r#"{"copy":[1,1]}"#), Err(SigError::InvalidName(_))));
        assert!(matches!(load_signature(r#"{"":[1,1]}"#), Err(SigError::InvalidName(_))));
        assert!(matches!(load_signature(r#"{"R":[1]}"#), Err(SigError::Json(_))));
    }

    #[test]
    fn model_loads() {
        let sig = load_signature(r#"{"R":[2,1]}"#).unwrap();
        let m = load_model(r#"{"carrier":["a","b"],"relations":{"R":[[["a","b"],["a"]]]}}"#, &sig).unwrap();
        let expected: BTreeSet<_> = [(vec![0, 1], vec![0])].into_iter().collect();
        assert_eq!(m.rho("R"), Some(&expected));

        let empty = load_model(r#"{"carrier":[],"relations":{}}"#, &sig).unwrap();
        assert_eq!(empty.size(), 0);
        assert!(empty.rho("R").unwrap().is_empty());
    }

    #[test]
    fn model_errors() {
        let sig = load_signature(r#"{"R":[2,1]}"#).unwrap();
        let bad = |t: &str| load_model(t, &sig).unwrap_err();
        assert_eq!(
            bad(r#"{"carrier":["a","b"],"relations":{"R":[[["a","c"],["a"]]]}}"#),
            SigError::NotInCarrier("c".into())
        );
        assert_eq!(bad(r#"{"carrier":["a"],"relations":{"S":[]}}"#), SigError::UnknownSymbol("S".into()));
        assert!(matches!(
            bad(r#"{"carrier":["a"],"relations":{"R":[[["a"],["a"]]]}}"#),
            SigError::ArityMismatch { .. }
        ));
        assert_eq!(bad(r#"{"carrier":["a","a"],"relations":{}}"#), SigError::DuplicateElement("a".into()));
    }

    #[test]
    fn flat_rows_for_coarity_zero() {
        let sig = load_signature(r#"{"R":[2,0]}"#).unwrap();
        let m = load_model(r#"{"carrier":["a","b"],"relations":{"R":[["a","b"]]}}"#, &sig).unwrap();
        assert!(m.rho("R").unwrap().contains(&(vec![0, 1], vec![])));
    }

    #[test]
    fn model_json_round_trip() {
        let sig = load_signature(r#"{"R":[2,1],"P":[0,0]}"#).unwrap();
        let text = r#"{"carrier":["a","b"],"relations":{"R":[[["b","a"],["a"]],[["a","b"],["b"]]],"P":[[[],[]]]}}"#;
        let m = load_model(text, &sig).unwrap();
        let again = load_model(&m.to_json().to_string(), &sig).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn compose_examples() {
        let r = rel(4, &[(&[0], &[1])]);
        let s = rel(4, &[(&[1], &[2])]);
        assert_eq!(r.compose(&s).unwrap(), rel(4, &[(&[0], &[2])]));
        assert_eq!(r.compose(&Relation::identity(1, 4)).unwrap(), r);

        let r = rel(4, &[(&[0], &[1]), (&[0], &[2])]);
        let s = rel(4, &[(&[1], &[3]), (&[2], &[3])]);
        assert_eq!(r.compose(&s).unwrap(), rel(4, &[(&[0], &[3])]));
    }

    #[test]
    fn compose_sort_mismatch() {
        let r = rel(2, &[(&[0], &[1])]);
        let s = rel(2, &[(&[0, 1], &[1])]);
        assert!(matches!(r.compose(&s), Err(SigError::SortMismatch(_))));
        let t = rel(3, &[(&[0], &[1])]);
        assert!(matches!(r.compose(&t), Err(SigError::CarrierMismatch(2, 3))));
    }

    #[test]
    fn tensor_examples() {
        let r = rel(2, &[(&[0], &[0])]);
        let s = rel(2, &[(&[1], &[1])]);
        assert_eq!(r.tensor(&s).unwrap(), rel(2, &[(&[0, 1], &[0, 1])]));
        assert_eq!(r.tensor(&Relation::unit(2)).unwrap(), r);
    }

    #[test]
    fn empty_carrier_tuples() {
        assert_eq!(all_tuples(0, 0).count(), 1);
        assert_eq!(all_tuples(2, 0).count(), 0);
        assert_eq!(all_tuples(3, 2).count(), 8);
        assert_eq!(Relation::identity(0, 0), Relation::unit(0));
        assert!(Relation::identity(1, 0).is_empty());
    }
}
