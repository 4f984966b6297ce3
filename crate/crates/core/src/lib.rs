//! Maximum matching in general graphs.
//!
//! Augmenting paths are found as strongly simple paths in a directed
//! reachability graph, so odd cycles never have to be shrunk. The crate
//! provides a one-path-at-a-time solver, a phase-based solver, a
//! primal-dual weighted solver with optimality certificates, and the
//! brute-force oracles used to test all of them.

pub mod cardinality;
pub mod dsu;
pub mod graph;
pub mod hk;
pub mod mdfs;
pub mod oracle;
pub mod reduction;
pub mod weighted;

pub use cardinality::solve_basic;
pub use dsu::{DisjointSets, DsuError, SetId, UnionToken};
pub use graph::{
    augment, emit_dimacs, format_matching, free_nodes, parse_dimacs, parse_matching,
    validate_matching, AlternatingPath, Edge, Graph, GraphError, Matching, MatchingError,
    ParseError,
};
pub use hk::{solve_hk, HkStats};
pub use reduction::{DirectedMatchingGraph, DirectedPath, LabeledNode};
pub use weighted::{
    format_certificate, parse_certificate, solve_weighted, verify_certificate, BlossomDual,
    CertificateReport, DualState, WeightedError, WeightedSolution, WeightedSolver, WeightedStats,
};
