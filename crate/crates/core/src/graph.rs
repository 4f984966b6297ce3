//! Undirected graphs, matchings and the DIMACS text formats.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

/// An undirected edge with a nonnegative integer weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: u64,
}

impl Edge {
    /// The endpoint of this edge that is not `x`.
    #[inline]
    pub fn other(&self, x: usize) -> usize {
        if self.u == x {
            self.v
        } else {
            self.u
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("node {node} out of range 1..={n}")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("duplicate edge {0}-{1}")]
    DuplicateEdge(usize, usize),
}

/// Simple undirected graph on nodes `1..=n`.
///
/// Adjacency lists keep edges in insertion order; every solver walks them in
/// that order, which is what makes results reproducible.
#[derive(Clone, Debug, Default)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    adj: Vec<Vec<(usize, usize)>>,
    index: HashMap<(usize, usize), usize>,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.edges == other.edges
    }
}

impl Eq for Graph {}

impl Graph {
    pub fn new(n: usize) -> Self {
        Graph {
            n,
            edges: Vec::new(),
            adj: vec![Vec::new(); n + 1],
            index: HashMap::new(),
        }
    }

    /// Builds a graph from `(u, v, w)` triples.
    pub fn from_edges(n: usize, edges: &[(usize, usize, u64)]) -> Result<Self, GraphError> {
        let mut g = Graph::new(n);
        for &(u, v, w) in edges {
            g.add_edge(u, v, w)?;
        }
        Ok(g)
    }

    /// Builds a graph where every edge has weight 1.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut g = Graph::new(n);
        for &(u, v) in pairs {
            g.add_edge(u, v, 1)?;
        }
        Ok(g)
    }

    /// Appends an edge and returns its index.
    pub fn add_edge(&mut self, u: usize, v: usize, w: u64) -> Result<usize, GraphError> {
        for x in [u, v] {
            if x == 0 || x > self.n {
                return Err(GraphError::NodeOutOfRange { node: x, n: self.n });
            }
        }
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        let key = (u.min(v), u.max(v));
        if self.index.contains_key(&key) {
            return Err(GraphError::DuplicateEdge(u, v));
        }
        let e = self.edges.len();
        self.edges.push(Edge { u, v, w });
        self.adj[u].push((v, e));
        self.adj[v].push((u, e));
        self.index.insert(key, e);
        Ok(e)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    #[inline]
    pub fn edge(&self, e: usize) -> Edge {
        self.edges[e]
    }

    /// `(neighbor, edge-index)` pairs of `v` in input order.
    #[inline]
    pub fn adj(&self, v: usize) -> &[(usize, usize)] {
        &self.adj[v]
    }

    pub fn edge_index(&self, u: usize, v: usize) -> Option<usize> {
        self.index.get(&(u.min(v), u.max(v))).copied()
    }

    pub fn max_weight(&self) -> u64 {
        self.edges.iter().map(|e| e.w).max().unwrap_or(0)
    }

    pub fn nodes(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.n
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: malformed header")]
    MalformedHeader { line: usize },
    #[error("line {line}: missing `p edge` header")]
    MissingHeader { line: usize },
    #[error("line {line}: malformed edge line")]
    MalformedEdge { line: usize },
    #[error("line {line}: node {node} out of range 1..={n}")]
    NodeOutOfRange { line: usize, node: usize, n: usize },
    #[error("line {line}: duplicate edge {u}-{v}")]
    DuplicateEdge { line: usize, u: usize, v: usize },
    #[error("line {line}: self-loop at node {node}")]
    SelfLoop { line: usize, node: usize },
    #[error("header announces {expected} edges but {found} were given")]
    EdgeCount { expected: usize, found: usize },
    #[error("line {line}: unrecognized line")]
    UnknownLine { line: usize },
    #[error("line {line}: edge {u}-{v} is not in the graph")]
    UnknownEdge { line: usize, u: usize, v: usize },
}

impl ParseError {
    pub fn line(&self) -> Option<usize> {
        match *self {
            ParseError::MalformedHeader { line }
            | ParseError::MissingHeader { line }
            | ParseError::MalformedEdge { line }
            | ParseError::NodeOutOfRange { line, .. }
            | ParseError::DuplicateEdge { line, .. }
            | ParseError::SelfLoop { line, .. }
            | ParseError::UnknownLine { line }
            | ParseError::UnknownEdge { line, .. } => Some(line),
            ParseError::EdgeCount { .. } => None,
        }
    }
}

/// Parses the DIMACS edge format. Missing weights default to 1.
pub fn parse_dimacs(text: &str) -> Result<Graph, ParseError> {
    let mut graph: Option<(Graph, usize)> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let mut tok = raw.split_whitespace();
        let Some(head) = tok.next() else { continue };
        match head {
            "c" => continue,
            "p" => {
                if graph.is_some() {
                    return Err(ParseError::MalformedHeader { line });
                }
                let fields: Vec<&str> = tok.collect();
                if fields.len() != 3 || fields[0] != "edge" {
                    return Err(ParseError::MalformedHeader { line });
                }
                let n = fields[1].parse::<usize>().map_err(|_| ParseError::MalformedHeader { line })?;
                let m = fields[2].parse::<usize>().map_err(|_| ParseError::MalformedHeader { line })?;
                graph = Some((Graph::new(n), m));
            }
            "e" => {
                let Some((g, _)) = graph.as_mut() else {
                    return Err(ParseError::MissingHeader { line });
                };
                let fields: Vec<&str> = tok.collect();
                if fields.len() != 2 && fields.len() != 3 {
                    return Err(ParseError::MalformedEdge { line });
                }
                let u = fields[0].parse::<usize>().map_err(|_| ParseError::MalformedEdge { line })?;
                let v = fields[1].parse::<usize>().map_err(|_| ParseError::MalformedEdge { line })?;
                let w = match fields.get(2) {
                    Some(s) => s.parse::<u64>().map_err(|_| ParseError::MalformedEdge { line })?,
                    None => 1,
                };
                g.add_edge(u, v, w).map_err(|e| match e {
                    GraphError::SelfLoop(node) => ParseError::SelfLoop { line, node },
                    GraphError::NodeOutOfRange { node, n } => ParseError::NodeOutOfRange { line, node, n },
                    GraphError::DuplicateEdge(u, v) => ParseError::DuplicateEdge { line, u, v },
                })?;
            }
            _ => return Err(ParseError::UnknownLine { line }),
        }
    }
    let Some((g, m)) = graph else {
        return Err(ParseError::MissingHeader { line: text.lines().count().max(1) });
    };
    if g.m() != m {
        return Err(ParseError::EdgeCount { expected: m, found: g.m() });
    }
    Ok(g)
}

/// Writes `g` in DIMACS edge format, always including weights.
pub fn emit_dimacs(g: &Graph) -> String {
    let mut out = String::with_capacity(16 + 16 * g.m());
    let _ = write!(out, "p edge {} {}", g.n(), g.m());
    for e in g.edges() {
        let _ = write!(out, "\ne {} {} {}", e.u, e.v, e.w);
    }
    out
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatchingError {
    #[error("edge index {0} out of range")]
    EdgeOutOfRange(usize),
    #[error("node {0} is matched twice")]
    DoublyMatched(usize),
    #[error("path is not augmenting: {0}")]
    NotAugmenting(&'static str),
}

/// A set of pairwise disjoint edges with a mate table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matching {
    mate: Vec<Option<usize>>,
    mate_edge: Vec<Option<usize>>,
    size: usize,
}

impl Matching {
    pub fn empty(n: usize) -> Self {
        Matching {
            mate: vec![None; n + 1],
            mate_edge: vec![None; n + 1],
            size: 0,
        }
    }

    #[inline]
    pub fn mate(&self, v: usize) -> Option<usize> {
        self.mate[v]
    }

    #[inline]
    pub fn mate_edge(&self, v: usize) -> Option<usize> {
        self.mate_edge[v]
    }

    #[inline]
    pub fn is_free(&self, v: usize) -> bool {
        self.mate[v].is_none()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    /// Matched edge indices in ascending order.
    pub fn edges(&self) -> Vec<usize> {
        let mut out: Vec<usize> = (1..self.mate.len())
            .filter(|&v| self.mate[v].is_some_and(|w| v < w))
            .filter_map(|v| self.mate_edge[v])
            .collect();
        out.sort_unstable();
        out
    }

    /// Matched pairs `(u, v)` with `u < v`, sorted by `u`.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (1..self.mate.len())
            .filter_map(|v| self.mate[v].filter(|&w| v < w).map(|w| (v, w)))
            .collect()
    }

    pub fn weight(&self, g: &Graph) -> u64 {
        self.edges().iter().map(|&e| g.edge(e).w).sum()
    }

    pub fn contains_edge(&self, g: &Graph, e: usize) -> bool {
        let Edge { u, v, .. } = g.edge(e);
        self.mate[u] == Some(v)
    }

    /// Adds edge `e` whose endpoints must both be free.
    pub(crate) fn link(&mut self, g: &Graph, e: usize) {
        let Edge { u, v, .. } = g.edge(e);
        debug_assert!(self.mate[u].is_none() && self.mate[v].is_none());
        self.mate[u] = Some(v);
        self.mate[v] = Some(u);
        self.mate_edge[u] = Some(e);
        self.mate_edge[v] = Some(e);
        self.size += 1;
    }

    pub(crate) fn unlink(&mut self, g: &Graph, e: usize) {
        let Edge { u, v, .. } = g.edge(e);
        debug_assert_eq!(self.mate[u], Some(v));
        self.mate[u] = None;
        self.mate[v] = None;
        self.mate_edge[u] = None;
        self.mate_edge[v] = None;
        self.size -= 1;
    }

    /// Flips an augmenting path in place. Validity is the caller's problem;
    /// see [`augment`] for the checked version.
    pub(crate) fn flip_path(&mut self, g: &Graph, nodes: &[usize]) {
        for pair in nodes.windows(2).skip(1).step_by(2) {
            let e = self.mate_edge[pair[0]].expect("interior edge must be matched");
            self.unlink(g, e);
        }
        for pair in nodes.windows(2).step_by(2) {
            let e = g.edge_index(pair[0], pair[1]).expect("path edge must exist");
            self.link(g, e);
        }
    }
}

/// Node sequence of an alternating path in the undirected graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlternatingPath {
    pub nodes: Vec<usize>,
}

impl AlternatingPath {
    pub fn new(nodes: Vec<usize>) -> Self {
        AlternatingPath { nodes }
    }
}

/// Checks that `edge_set` is a matching of `g`.
pub fn validate_matching(g: &Graph, edge_set: &[usize]) -> Result<Matching, MatchingError> {
    let mut m = Matching::empty(g.n());
    for &e in edge_set {
        if e >= g.m() {
            return Err(MatchingError::EdgeOutOfRange(e));
        }
        let Edge { u, v, .. } = g.edge(e);
        if m.mate[u].is_some() {
            return Err(MatchingError::DoublyMatched(u));
        }
        if m.mate[v].is_some() {
            return Err(MatchingError::DoublyMatched(v));
        }
        m.link(g, e);
    }
    Ok(m)
}

/// Checks that `p` is `m`-augmenting in `g`.
pub fn check_augmenting(g: &Graph, m: &Matching, p: &AlternatingPath) -> Result<(), MatchingError> {
    let nodes = &p.nodes;
    if nodes.len() < 2 || !nodes.len().is_multiple_of(2) {
        return Err(MatchingError::NotAugmenting("odd node count"));
    }
    let mut seen = vec![false; g.n() + 1];
    for &v in nodes {
        if v == 0 || v > g.n() {
            return Err(MatchingError::NotAugmenting("node out of range"));
        }
        if std::mem::replace(&mut seen[v], true) {
            return Err(MatchingError::NotAugmenting("repeated node"));
        }
    }
    if !m.is_free(nodes[0]) || !m.is_free(nodes[nodes.len() - 1]) {
        return Err(MatchingError::NotAugmenting("endpoint not free"));
    }
    for (i, pair) in nodes.windows(2).enumerate() {
        let Some(e) = g.edge_index(pair[0], pair[1]) else {
            return Err(MatchingError::NotAugmenting("missing edge"));
        };
        if m.contains_edge(g, e) != (i % 2 == 1) {
            return Err(MatchingError::NotAugmenting("edges do not alternate"));
        }
    }
    Ok(())
}

/// Returns `m ⊕ p` for an `m`-augmenting path `p`.
pub fn augment(g: &Graph, m: &Matching, p: &AlternatingPath) -> Result<Matching, MatchingError> {
    check_augmenting(g, m, p)?;
    let mut out = m.clone();
    out.flip_path(g, &p.nodes);
    Ok(out)
}

/// Unmatched nodes in ascending order.
pub fn free_nodes(g: &Graph, m: &Matching) -> Vec<usize> {
    g.nodes().filter(|&v| m.is_free(v)).collect()
}

/// Renders a matching as `s <card> <weight>` followed by `m u v` lines.
pub fn format_matching(g: &Graph, m: &Matching) -> String {
    let mut out = String::new();
    let _ = write!(out, "s {} {}", m.len(), m.weight(g));
    for (u, v) in m.pairs() {
        let _ = write!(out, "\nm {u} {v}");
    }
    out
}

/// Reads `m u v` lines (an `s` header line is accepted and ignored) and
/// maps them to edge indices of `g`.
pub fn parse_matching(g: &Graph, text: &str) -> Result<Vec<usize>, ParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let mut tok = raw.split_whitespace();
        match tok.next() {
            None | Some("c") | Some("s") => continue,
            Some("m") => {
                let mut next = || -> Result<usize, ParseError> {
                    tok.next()
                        .and_then(|s| s.parse().ok())
                        .ok_or(ParseError::MalformedEdge { line })
                };
                let u = next()?;
                let v = next()?;
                let e = g.edge_index(u, v).ok_or(ParseError::UnknownEdge { line, u, v })?;
                out.push(e);
            }
            Some(_) => return Err(ParseError::UnknownLine { line }),
        }
    }
    Ok(out)
}
