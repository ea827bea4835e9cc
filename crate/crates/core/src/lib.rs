//! Graphical conjunctive queries.
//!
//! Parsing and evaluation of conjunctive query formulas and of their
//! variable-free diagrammatic counterparts, translations in both directions,
//! compilation of diagrams to cospans of hypergraphs, and a decision
//! procedure for query inclusion based on hypergraph homomorphisms.

pub mod axioms;
pub mod ccq;
pub mod containment;
pub mod cospan;
pub mod gcq;
pub mod hypergraph;
pub mod random;
pub mod sigmodel;
pub mod translate;
