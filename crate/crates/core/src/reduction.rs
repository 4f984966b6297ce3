//! The directed graph `G_M` whose strongly simple `s`-`t` paths are exactly
//! the `M`-augmenting paths of the undirected graph.
//!
//! Labels are dense integers: `s = 0`, `t = 1`, `[v,A] = 2v`, `[v,B] = 2v+1`.
//! Matched edges run from `A` to `B`, unmatched edges from `B` to `A`.

use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::graph::{AlternatingPath, Graph, Matching};

pub const SOURCE: usize = 0;
pub const TARGET: usize = 1;

#[inline]
pub fn label_a(v: usize) -> usize {
    2 * v
}

#[inline]
pub fn label_b(v: usize) -> usize {
    2 * v + 1
}

#[inline]
pub fn node_of(label: usize) -> usize {
    label / 2
}

#[inline]
pub fn is_a(label: usize) -> bool {
    label >= 2 && label.is_multiple_of(2)
}

#[inline]
pub fn is_b(label: usize) -> bool {
    label >= 2 && label % 2 == 1
}

/// `[v,X] -> [v,X̄]`; `s` and `t` map to each other.
#[inline]
pub fn reverse_label(label: usize) -> usize {
    label ^ 1
}

/// A node of `G_M` in readable form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LabeledNode {
    Source,
    Target,
    A(usize),
    B(usize),
}

impl LabeledNode {
    pub fn index(self) -> usize {
        match self {
            LabeledNode::Source => SOURCE,
            LabeledNode::Target => TARGET,
            LabeledNode::A(v) => label_a(v),
            LabeledNode::B(v) => label_b(v),
        }
    }

    pub fn from_index(label: usize) -> Self {
        match label {
            SOURCE => LabeledNode::Source,
            TARGET => LabeledNode::Target,
            l if l % 2 == 0 => LabeledNode::A(l / 2),
            l => LabeledNode::B(l / 2),
        }
    }

    /// The bar operation; `s` and `t` are their own partners' reverses.
    pub fn reversed(self) -> Self {
        LabeledNode::from_index(reverse_label(self.index()))
    }
}

impl fmt::Display for LabeledNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabeledNode::Source => f.write_str("s"),
            LabeledNode::Target => f.write_str("t"),
            LabeledNode::A(v) => write!(f, "{v}A"),
            LabeledNode::B(v) => write!(f, "{v}B"),
        }
    }
}

/// Where an arc of `G_M` comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArcOrigin {
    Edge(usize),
    Source(usize),
    Target(usize),
}

/// `G_M` in compressed adjacency form.
///
/// Arc ids come in reverse pairs: arc `a` and arc `a ^ 1` are each other's
/// back-path image, so `reverse_arc` is free.
#[derive(Clone, Debug)]
pub struct DirectedMatchingGraph {
    n: usize,
    start: Vec<usize>,
    heads: Vec<usize>,
    arc_ids: Vec<usize>,
    tail: Vec<usize>,
    head: Vec<usize>,
    origin: Vec<ArcOrigin>,
    free_count: usize,
}

/// Sequence of labels.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DirectedPath(pub Vec<usize>);

impl DirectedPath {
    pub fn labels(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of arcs.
    pub fn arc_len(&self) -> usize {
        self.0.len().saturating_sub(1)
    }
}

impl fmt::Display for DirectedPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &l) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", LabeledNode::from_index(l))?;
        }
        Ok(())
    }
}

impl DirectedMatchingGraph {
    /// Builds `G_M`. Successor lists follow the adjacency order of `g`.
    pub fn build(g: &Graph, m: &Matching) -> Self {
        let n = g.n();
        let labels = 2 * n + 2;
        let free: Vec<usize> = g.nodes().filter(|&v| m.is_free(v)).collect();
        let arc_count = 2 * g.m() + 2 * free.len();

        let mut tail = vec![0; arc_count];
        let mut head = vec![0; arc_count];
        let mut origin = vec![ArcOrigin::Edge(0); arc_count];
        for (e, edge) in g.edges().iter().enumerate() {
            let (u, v) = (edge.u, edge.v);
            if m.mate(u) == Some(v) {
                tail[2 * e] = label_a(u);
                head[2 * e] = label_b(v);
                tail[2 * e + 1] = label_a(v);
                head[2 * e + 1] = label_b(u);
            } else {
                tail[2 * e] = label_b(u);
                head[2 * e] = label_a(v);
                tail[2 * e + 1] = label_b(v);
                head[2 * e + 1] = label_a(u);
            }
            origin[2 * e] = ArcOrigin::Edge(e);
            origin[2 * e + 1] = ArcOrigin::Edge(e);
        }
        let base = 2 * g.m();
        for (i, &v) in free.iter().enumerate() {
            tail[base + 2 * i] = SOURCE;
            head[base + 2 * i] = label_b(v);
            origin[base + 2 * i] = ArcOrigin::Source(v);
            tail[base + 2 * i + 1] = label_a(v);
            head[base + 2 * i + 1] = TARGET;
            origin[base + 2 * i + 1] = ArcOrigin::Target(v);
        }

        let mut start = vec![0; labels + 1];
        let mut heads = Vec::with_capacity(arc_count);
        let mut arc_ids = Vec::with_capacity(arc_count);
        let push = |label: usize, a: usize, heads: &mut Vec<usize>, ids: &mut Vec<usize>| {
            debug_assert_eq!(tail[a], label);
            heads.push(head[a]);
            ids.push(a);
        };
        // s
        start[SOURCE] = 0;
        for i in 0..free.len() {
            push(SOURCE, base + 2 * i, &mut heads, &mut arc_ids);
        }
        start[TARGET] = heads.len();
        start[TARGET + 1] = heads.len();
        let mut free_slot = vec![usize::MAX; n + 1];
        for (i, &v) in free.iter().enumerate() {
            free_slot[v] = i;
        }
        for v in 1..=n {
            start[label_a(v)] = heads.len();
            if let Some(e) = m.mate_edge(v) {
                let a = if tail[2 * e] == label_a(v) { 2 * e } else { 2 * e + 1 };
                push(label_a(v), a, &mut heads, &mut arc_ids);
            } else {
                push(label_a(v), base + 2 * free_slot[v] + 1, &mut heads, &mut arc_ids);
            }
            start[label_b(v)] = heads.len();
            for &(w, e) in g.adj(v) {
                if m.mate(v) == Some(w) {
                    continue;
                }
                let a = if tail[2 * e] == label_b(v) { 2 * e } else { 2 * e + 1 };
                push(label_b(v), a, &mut heads, &mut arc_ids);
            }
            start[label_b(v) + 1] = heads.len();
        }
        DirectedMatchingGraph {
            n,
            start,
            heads,
            arc_ids,
            tail,
            head,
            origin,
            free_count: free.len(),
        }
    }

    /// Number of undirected nodes.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn label_count(&self) -> usize {
        2 * self.n + 2
    }

    #[inline]
    pub fn arc_count(&self) -> usize {
        self.tail.len()
    }

    #[inline]
    pub fn free_count(&self) -> usize {
        self.free_count
    }

    /// Successor labels of `label`.
    #[inline]
    pub fn succ(&self, label: usize) -> &[usize] {
        &self.heads[self.start[label]..self.start[label + 1]]
    }

    /// Arc ids leaving `label`, parallel to [`succ`](Self::succ).
    #[inline]
    pub fn out_arcs(&self, label: usize) -> &[usize] {
        &self.arc_ids[self.start[label]..self.start[label + 1]]
    }

    #[inline]
    pub fn arc_tail(&self, a: usize) -> usize {
        self.tail[a]
    }

    #[inline]
    pub fn arc_head(&self, a: usize) -> usize {
        self.head[a]
    }

    #[inline]
    pub fn arc_origin(&self, a: usize) -> ArcOrigin {
        self.origin[a]
    }

    /// The arc of the back-path image: `(x, y) -> (r(y), r(x))`.
    #[inline]
    pub fn reverse_arc(a: usize) -> usize {
        a ^ 1
    }

    pub fn has_arc(&self, from: usize, to: usize) -> bool {
        from < self.label_count() && self.succ(from).contains(&to)
    }

    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.arc_count()).map(|a| (self.tail[a], self.head[a]))
    }

    /// DOT rendering for debugging.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph gm {\n");
        for l in 0..self.label_count() {
            for &h in self.succ(l) {
                let _ = writeln!(
                    out,
                    "  \"{}\" -> \"{}\";",
                    LabeledNode::from_index(l),
                    LabeledNode::from_index(h)
                );
            }
        }
        out.push('}');
        out
    }
}

/// True iff `p` is a path of `gm` that repeats no label and never holds
/// both labels of one node.
pub fn is_strongly_simple(gm: &DirectedMatchingGraph, p: &DirectedPath) -> bool {
    let labels = p.labels();
    if labels.iter().any(|&l| l >= gm.label_count()) {
        return false;
    }
    let mut seen = vec![false; gm.label_count()];
    for &l in labels {
        if std::mem::replace(&mut seen[l], true) {
            return false;
        }
        if l >= 2 && seen[reverse_label(l)] {
            return false;
        }
    }
    labels.windows(2).all(|w| gm.has_arc(w[0], w[1]))
}

/// `r(S) = r(w_k), ..., r(w_1)`.
pub fn back_path(p: &DirectedPath) -> DirectedPath {
    DirectedPath(p.labels().iter().rev().map(|&l| reverse_label(l)).collect())
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReductionError {
    #[error("path does not run from s to t")]
    WrongEndpoints,
    #[error("path is not strongly simple in G_M")]
    NotStronglySimple,
}

/// Projects a strongly simple `s`-`t` path to the augmenting path it encodes.
pub fn lift_path(
    gm: &DirectedMatchingGraph,
    p: &DirectedPath,
) -> Result<AlternatingPath, ReductionError> {
    let labels = p.labels();
    if labels.len() < 4 || labels[0] != SOURCE || labels[labels.len() - 1] != TARGET {
        return Err(ReductionError::WrongEndpoints);
    }
    if !is_strongly_simple(gm, p) {
        return Err(ReductionError::NotStronglySimple);
    }
    let inner = &labels[1..labels.len() - 1];
    debug_assert!(inner.iter().enumerate().all(|(i, &l)| is_b(l) == (i % 2 == 0)));
    Ok(AlternatingPath::new(inner.iter().map(|&l| node_of(l)).collect()))
}

/// The inverse of [`lift_path`]: `v1..vk -> s,[v1,B],[v2,A],...,[vk,A],t`.
pub fn embed_path(p: &AlternatingPath) -> DirectedPath {
    let mut labels = Vec::with_capacity(p.nodes.len() + 2);
    labels.push(SOURCE);
    for (i, &v) in p.nodes.iter().enumerate() {
        labels.push(if i % 2 == 0 { label_b(v) } else { label_a(v) });
    }
    labels.push(TARGET);
    DirectedPath(labels)
}

/// Parses labels written as `s`, `t`, `3A`, `3B`.
pub fn parse_label(s: &str) -> Option<usize> {
    match s {
        "s" => Some(SOURCE),
        "t" => Some(TARGET),
        _ => {
            let (num, side) = s.split_at(s.len().checked_sub(1)?);
            let v: usize = num.parse().ok()?;
            match side {
                "A" => Some(label_a(v)),
                "B" => Some(label_b(v)),
                _ => None,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::validate_matching;

    fn path(s: &str) -> DirectedPath {
        DirectedPath(s.split(',').map(|t| parse_label(t).unwrap()).collect())
    }

    #[test]
    fn p3_empty_matching_counts() {
        let g = Graph::from_pairs(3, &[(1, 2), (2, 3)]).unwrap();
        let gm = DirectedMatchingGraph::build(&g, &Matching::empty(3));
        assert_eq!(gm.label_count(), 8);
        assert_eq!(gm.arc_count(), 10);
    }

    #[test]
    fn p3_matched_arcs() {
        let g = Graph::from_pairs(3, &[(1, 2), (2, 3)]).unwrap();
        let m = validate_matching(&g, &[0]).unwrap();
        let gm = DirectedMatchingGraph::build(&g, &m);
        assert!(gm.has_arc(label_a(1), label_b(2)));
        assert!(gm.has_arc(label_a(2), label_b(1)));
        assert_eq!(gm.succ(SOURCE), &[label_b(3)]);
        let into_t: Vec<_> = gm.arcs().filter(|&(_, h)| h == TARGET).collect();
        assert_eq!(into_t, vec![(label_a(3), TARGET)]);
    }

    #[test]
    fn single_matched_edge_has_no_terminal_arcs() {
        let g = Graph::from_pairs(2, &[(1, 2)]).unwrap();
        let m = validate_matching(&g, &[0]).unwrap();
        let gm = DirectedMatchingGraph::build(&g, &m);
        assert_eq!(gm.arc_count(), 2);
        assert!(gm.succ(SOURCE).is_empty());
    }

    #[test]
    fn arc_pairs_are_back_path_images() {
        let g = Graph::from_pairs(4, &[(1, 2), (2, 3), (3, 4), (1, 3)]).unwrap();
        let m = validate_matching(&g, &[1]).unwrap();
        let gm = DirectedMatchingGraph::build(&g, &m);
        for a in 0..gm.arc_count() {
            let b = DirectedMatchingGraph::reverse_arc(a);
            assert_eq!(gm.arc_tail(b), reverse_label(gm.arc_head(a)));
            assert_eq!(gm.arc_head(b), reverse_label(gm.arc_tail(a)));
        }
    }

    #[test]
    fn strong_simplicity() {
        let g = Graph::from_pairs(3, &[(1, 2), (2, 3)]).unwrap();
        let m = validate_matching(&g, &[0]).unwrap();
        let gm = DirectedMatchingGraph::build(&g, &m);
        assert!(is_strongly_simple(&gm, &path("s,3B,2A,1B")));

        let tri = Graph::from_pairs(3, &[(1, 2), (2, 3), (1, 3)]).unwrap();
        let m = validate_matching(&tri, &[1]).unwrap();
        let gm = DirectedMatchingGraph::build(&tri, &m);
        // 1B -> 2A -> 3B -> 1A is a path, and so is 1B,3A,2B,1A; mixing 2A/2B is not allowed.
        assert!(is_strongly_simple(&gm, &path("s,1B,2A,3B")));
        assert!(!is_strongly_simple(&gm, &path("2A,3B,2A")));
        assert!(!is_strongly_simple(&gm, &path("s,1B,3A,2B,1A")));
    }

    #[test]
    fn back_path_examples() {
        assert_eq!(back_path(&path("1B,2A")), path("2B,1A"));
        assert_eq!(back_path(&path("s,3B")), path("3A,t"));
        let p = path("s,1B,2A,3B,4A,t");
        assert_eq!(back_path(&back_path(&p)), p);
    }

    #[test]
    fn lift_examples() {
        let g = Graph::from_pairs(2, &[(1, 2)]).unwrap();
        let gm = DirectedMatchingGraph::build(&g, &Matching::empty(2));
        assert_eq!(lift_path(&gm, &path("s,1B,2A,t")).unwrap().nodes, vec![1, 2]);

        let p3 = Graph::from_pairs(3, &[(1, 2), (2, 3)]).unwrap();
        let m = validate_matching(&p3, &[0]).unwrap();
        let gm = DirectedMatchingGraph::build(&p3, &m);
        assert!(lift_path(&gm, &path("s,3B,2A,1B,t")).is_err());

        let p4 = Graph::from_pairs(4, &[(1, 2), (2, 3), (3, 4)]).unwrap();
        let m = validate_matching(&p4, &[1]).unwrap();
        let gm = DirectedMatchingGraph::build(&p4, &m);
        let lifted = lift_path(&gm, &path("s,1B,2A,3B,4A,t")).unwrap();
        assert_eq!(lifted.nodes, vec![1, 2, 3, 4]);
        assert_eq!(embed_path(&lifted), path("s,1B,2A,3B,4A,t"));
    }

    #[test]
    fn dot_uses_short_names() {
        let g = Graph::from_pairs(2, &[(1, 2)]).unwrap();
        let gm = DirectedMatchingGraph::build(&g, &Matching::empty(2));
        let dot = gm.to_dot();
        assert!(dot.contains("\"s\" -> \"1B\""));
        assert!(dot.contains("\"2A\" -> \"t\""));
    }
}
