//! Exhaustive reference solvers and instance generation.
//!
//! Nothing here shares code with the solvers under test.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{validate_matching, Graph, Matching};
use crate::reduction::{
    is_b, node_of, reverse_label, DirectedMatchingGraph, DirectedPath, SOURCE,
};

pub const MAX_CARDINALITY_NODES: usize = 14;
pub const MAX_WEIGHT_NODES: usize = 12;
pub const MAX_LABELS: usize = 30;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("instance too large for exhaustive search: {size} > {limit}")]
    TooLarge { size: usize, limit: usize },
    #[error("cannot place {m} edges on {n} nodes")]
    InfeasibleEdgeCount { n: usize, m: usize },
}

/// Best matching over all branch choices: for the lowest undecided node,
/// either leave it single or match it to each free neighbor.
fn search(
    g: &Graph,
    v: usize,
    used: &mut [bool],
    chosen: &mut Vec<usize>,
    best: &mut (u64, Vec<usize>),
    score: &dyn Fn(&[usize]) -> u64,
    bound: &dyn Fn(&[usize], &[bool], usize) -> u64,
) {
    if v > g.n() {
        let s = score(chosen);
        if s > best.0 || best.1.is_empty() && s >= best.0 {
            *best = (s, chosen.clone());
        }
        return;
    }
    if bound(chosen, used, v) <= best.0 && !best.1.is_empty() {
        return;
    }
    if used[v] {
        search(g, v + 1, used, chosen, best, score, bound);
        return;
    }
    for &(w, e) in g.adj(v) {
        if w > v && !used[w] {
            used[v] = true;
            used[w] = true;
            chosen.push(e);
            search(g, v + 1, used, chosen, best, score, bound);
            chosen.pop();
            used[v] = false;
            used[w] = false;
        }
    }
    search(g, v + 1, used, chosen, best, score, bound);
}

/// Maximum-cardinality matching by exhaustive search.
pub fn brute_max_cardinality(g: &Graph) -> Result<Matching, OracleError> {
    if g.n() > MAX_CARDINALITY_NODES {
        return Err(OracleError::TooLarge { size: g.n(), limit: MAX_CARDINALITY_NODES });
    }
    let mut used = vec![false; g.n() + 1];
    let mut best = (0u64, Vec::new());
    let score = |c: &[usize]| c.len() as u64;
    let bound = |c: &[usize], used: &[bool], v: usize| {
        let open = (v..=g.n()).filter(|&x| !used[x]).count();
        (c.len() + open / 2) as u64
    };
    search(g, 1, &mut used, &mut Vec::new(), &mut best, &score, &bound);
    Ok(validate_matching(g, &best.1).expect("oracle builds disjoint edges"))
}

/// Maximum-weight matching by exhaustive search.
pub fn brute_max_weight(g: &Graph) -> Result<(Matching, u64), OracleError> {
    if g.n() > MAX_WEIGHT_NODES {
        return Err(OracleError::TooLarge { size: g.n(), limit: MAX_WEIGHT_NODES });
    }
    let mut used = vec![false; g.n() + 1];
    let mut best = (0u64, Vec::new());
    let score = |c: &[usize]| c.iter().map(|&e| g.edge(e).w).sum::<u64>();
    let bound = |c: &[usize], used: &[bool], v: usize| {
        let fixed: u64 = c.iter().map(|&e| g.edge(e).w).sum();
        let rest: u64 = g
            .edges()
            .iter()
            .filter(|e| e.u.min(e.v) >= v && !used[e.u] && !used[e.v])
            .map(|e| e.w)
            .sum();
        fixed + rest
    };
    search(g, 1, &mut used, &mut Vec::new(), &mut best, &score, &bound);
    let m = validate_matching(g, &best.1).expect("oracle builds disjoint edges");
    let w = m.weight(g);
    Ok((m, w))
}

/// Breadth-first search over `(label, used-node set)` states. Returns the
/// shortest strongly simple distance from `from` to every label together with
/// a parent table for path recovery.
struct StateSearch {
    dist: Vec<Option<usize>>,
    end_state: Vec<Option<usize>>,
    parent: Vec<u32>,
    masks: usize,
}

const UNSEEN: u32 = u32::MAX;

fn node_bit(label: usize) -> u32 {
    if label < 2 {
        0
    } else {
        1u32 << (node_of(label) - 1)
    }
}

fn state_search(gm: &DirectedMatchingGraph, from: usize) -> StateSearch {
    let labels = gm.label_count();
    let masks = 1usize << gm.n();
    let mut dist = vec![None; labels];
    let mut end_state = vec![None; labels];
    let mut parent = vec![UNSEEN; labels * masks];
    let start = from * masks + node_bit(from) as usize;
    parent[start] = start as u32;
    let mut frontier = vec![start];
    let mut d = 0;
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &st in &frontier {
            let (l, mask) = (st / masks, (st % masks) as u32);
            if dist[l].is_none() {
                dist[l] = Some(d);
                end_state[l] = Some(st);
            }
            for &h in gm.succ(l) {
                let bit = node_bit(h);
                if h == from || (bit != 0 && mask & bit != 0) {
                    continue;
                }
                let ns = h * masks + (mask | bit) as usize;
                if parent[ns] == UNSEEN {
                    parent[ns] = st as u32;
                    next.push(ns);
                }
            }
        }
        frontier = next;
        d += 1;
    }
    StateSearch { dist, end_state, parent, masks }
}

fn check_labels(gm: &DirectedMatchingGraph) -> Result<(), OracleError> {
    if gm.label_count() > MAX_LABELS {
        return Err(OracleError::TooLarge { size: gm.label_count(), limit: MAX_LABELS });
    }
    Ok(())
}

/// Shortest strongly simple path from `from` to `to`, with its arc count.
pub fn brute_st_strongly_simple(
    gm: &DirectedMatchingGraph,
    from: usize,
    to: usize,
) -> Result<Option<(DirectedPath, usize)>, OracleError> {
    check_labels(gm)?;
    let ss = state_search(gm, from);
    let Some(d) = ss.dist[to] else { return Ok(None) };
    let mut state = ss.end_state[to].expect("reached label has a state");
    let mut labels = vec![state / ss.masks];
    while ss.parent[state] as usize != state {
        state = ss.parent[state] as usize;
        labels.push(state / ss.masks);
    }
    labels.reverse();
    debug_assert_eq!(labels.len(), d + 1);
    Ok(Some((DirectedPath(labels), d)))
}

/// Shortest strongly simple distance from `s` to every label.
pub fn brute_levels(gm: &DirectedMatchingGraph) -> Result<Vec<Option<usize>>, OracleError> {
    check_labels(gm)?;
    Ok(state_search(gm, SOURCE).dist)
}

/// All shortest strongly simple `s`-`t` paths. Only for tiny graphs.
pub fn brute_shortest_st_paths(
    gm: &DirectedMatchingGraph,
) -> Result<Vec<DirectedPath>, OracleError> {
    check_labels(gm)?;
    let Some((_, len)) = brute_st_strongly_simple(gm, SOURCE, crate::reduction::TARGET)? else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    let mut stack = vec![SOURCE];
    fn rec(
        gm: &DirectedMatchingGraph,
        stack: &mut Vec<usize>,
        mask: u32,
        len: usize,
        out: &mut Vec<DirectedPath>,
    ) {
        let cur = *stack.last().unwrap();
        if stack.len() == len + 1 {
            if cur == crate::reduction::TARGET {
                out.push(DirectedPath(stack.clone()));
            }
            return;
        }
        for &h in gm.succ(cur) {
            let bit = node_bit(h);
            if bit != 0 && mask & bit != 0 {
                continue;
            }
            stack.push(h);
            rec(gm, stack, mask | bit, len, out);
            stack.pop();
        }
    }
    rec(gm, &mut stack, 0, len, &mut out);
    Ok(out)
}

/// DOM of a set of labels by brute force: the deepest `B`-label outside the
/// set lying on every shortest strongly simple path to every member whose
/// `A`-partner has no level in `levels`. Falls back to `s`.
pub fn brute_dom(
    gm: &DirectedMatchingGraph,
    targets: &[usize],
    levels: &[Option<usize>],
) -> Result<usize, OracleError> {
    check_labels(gm)?;
    let truth = brute_levels(gm)?;
    let mut common: Option<HashSet<usize>> = None;
    for &x in targets {
        let Some(len) = truth[x] else { return Ok(SOURCE) };
        let mut on_all: Option<HashSet<usize>> = None;
        let mut stack = vec![SOURCE];
        fn rec(
            gm: &DirectedMatchingGraph,
            stack: &mut Vec<usize>,
            mask: u32,
            len: usize,
            goal: usize,
            on_all: &mut Option<HashSet<usize>>,
        ) {
            let cur = *stack.last().unwrap();
            if stack.len() == len + 1 {
                if cur == goal {
                    let here: HashSet<usize> = stack.iter().copied().collect();
                    *on_all = Some(match on_all.take() {
                        None => here,
                        Some(s) => s.intersection(&here).copied().collect(),
                    });
                }
                return;
            }
            for &h in gm.succ(cur) {
                let bit = node_bit(h);
                if bit != 0 && mask & bit != 0 {
                    continue;
                }
                stack.push(h);
                rec(gm, stack, mask | bit, len, goal, on_all);
                stack.pop();
            }
        }
        rec(gm, &mut stack, node_bit(SOURCE), len, x, &mut on_all);
        let set = on_all.unwrap_or_default();
        common = Some(match common {
            None => set,
            Some(c) => c.intersection(&set).copied().collect(),
        });
    }
    let common = common.unwrap_or_default();
    let best = common
        .into_iter()
        .filter(|&l| is_b(l) && !targets.contains(&l) && levels[reverse_label(l)].is_none())
        .max_by_key(|&l| truth[l]);
    Ok(best.unwrap_or(SOURCE))
}

/// Deterministic random simple graph with `m` edges and weights in
/// `1..=max_weight`.
pub fn gen_random(n: usize, m: usize, seed: u64, max_weight: u64) -> Result<Graph, OracleError> {
    let cap = n.saturating_mul(n.saturating_sub(1)) / 2;
    if m > cap {
        return Err(OracleError::InfeasibleEdgeCount { n, m });
    }
    let max_weight = max_weight.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(m);
    if 2 * m > cap {
        let mut all: Vec<(usize, usize)> = (1..=n)
            .flat_map(|u| (u + 1..=n).map(move |v| (u, v)))
            .collect();
        all.shuffle(&mut rng);
        all.truncate(m);
        pairs = all;
    } else {
        let mut seen = HashSet::with_capacity(m);
        while pairs.len() < m {
            let u = rng.gen_range(1..=n);
            let v = rng.gen_range(1..=n);
            if u == v || !seen.insert((u.min(v), u.max(v))) {
                continue;
            }
            pairs.push((u, v));
        }
    }
    let mut g = Graph::new(n);
    for (u, v) in pairs {
        let w = rng.gen_range(1..=max_weight);
        g.add_edge(u, v, w).expect("generated edges are simple");
    }
    Ok(g)
}

/// Every matching of `g`, including the empty one.
pub fn all_matchings(g: &Graph) -> Vec<Matching> {
    fn rec(g: &Graph, e: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, out: &mut Vec<Matching>) {
        if e == g.m() {
            out.push(validate_matching(g, cur).expect("disjoint by construction"));
            return;
        }
        rec(g, e + 1, used, cur, out);
        let edge = g.edge(e);
        if !used[edge.u] && !used[edge.v] {
            used[edge.u] = true;
            used[edge.v] = true;
            cur.push(e);
            rec(g, e + 1, used, cur, out);
            cur.pop();
            used[edge.u] = false;
            used[edge.v] = false;
        }
    }
    let mut out = Vec::new();
    rec(g, 0, &mut vec![false; g.n() + 1], &mut Vec::new(), &mut out);
    out
}

/// One representative of every isomorphism class of graphs on `n` nodes.
pub fn nonisomorphic_graphs(n: usize) -> Vec<Graph> {
    let mut classes: Vec<Vec<u64>> = vec![vec![0]];
    for k in 2..=n {
        let mut next: HashSet<u64> = HashSet::new();
        for &code in classes.last().unwrap() {
            for nbrs in 0u64..(1 << (k - 1)) {
                let mut adj = decode(code, k - 1);
                adj.push(Vec::new());
                for j in 0..k - 1 {
                    if nbrs >> j & 1 == 1 {
                        adj[j].push(k - 1);
                        adj[k - 1].push(j);
                    }
                }
                next.insert(canonical_code(&adj));
            }
        }
        let mut v: Vec<u64> = next.into_iter().collect();
        v.sort_unstable();
        classes.push(v);
    }
    let codes = &classes[n.max(1) - 1];
    codes
        .iter()
        .map(|&c| {
            let adj = decode(c, n);
            let mut g = Graph::new(n);
            for u in 0..n {
                for &v in &adj[u] {
                    if u < v {
                        g.add_edge(u + 1, v + 1, 1).unwrap();
                    }
                }
            }
            g
        })
        .collect()
}

pub fn is_connected(g: &Graph) -> bool {
    if g.n() == 0 {
        return true;
    }
    let mut seen = vec![false; g.n() + 1];
    let mut stack = vec![1];
    seen[1] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &(w, _) in g.adj(v) {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == g.n()
}

fn pair_bit(i: usize, j: usize) -> usize {
    let (a, b) = (i.min(j), i.max(j));
    b * (b - 1) / 2 + a
}

fn decode(code: u64, n: usize) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for b in 1..n {
        for a in 0..b {
            if code >> pair_bit(a, b) & 1 == 1 {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
    }
    adj
}

/// Smallest adjacency code over all orderings compatible with an
/// equitable colour refinement.
fn canonical_code(adj: &[Vec<usize>]) -> u64 {
    let n = adj.len();
    let mut color: Vec<usize> = adj.iter().map(|a| a.len()).collect();
    loop {
        let mut sig: Vec<(usize, Vec<usize>)> = (0..n)
            .map(|v| {
                let mut c: Vec<usize> = adj[v].iter().map(|&w| color[w]).collect();
                c.sort_unstable();
                (color[v], c)
            })
            .collect();
        let mut uniq = sig.clone();
        uniq.sort();
        uniq.dedup();
        let next: Vec<usize> = sig
            .iter_mut()
            .map(|s| uniq.binary_search(s).unwrap())
            .collect();
        let before = {
            let mut c = color.clone();
            c.sort_unstable();
            c.dedup();
            c.len()
        };
        if uniq.len() == before {
            color = next;
            break;
        }
        color = next;
    }
    let mut cells: Vec<Vec<usize>> = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| color[v]);
    for v in order {
        match cells.last_mut() {
            Some(c) if color[c[0]] == color[v] => c.push(v),
            _ => cells.push(vec![v]),
        }
    }
    let mut best = u64::MAX;
    let mut pos = vec![0usize; n];
    fn permute(
        cells: &mut [Vec<usize>],
        ci: usize,
        slot: usize,
        pos: &mut [usize],
        adj: &[Vec<usize>],
        best: &mut u64,
    ) {
        if ci == cells.len() {
            let mut code = 0u64;
            for (u, nb) in adj.iter().enumerate() {
                for &w in nb {
                    if u < w {
                        code |= 1 << pair_bit(pos[u], pos[w]);
                    }
                }
            }
            *best = (*best).min(code);
            return;
        }
        let len = cells[ci].len();
        heap_permute(cells, ci, len, slot, pos, adj, best);
    }
    fn heap_permute(
        cells: &mut [Vec<usize>],
        ci: usize,
        k: usize,
        slot: usize,
        pos: &mut [usize],
        adj: &[Vec<usize>],
        best: &mut u64,
    ) {
        if k <= 1 {
            for (i, &v) in cells[ci].iter().enumerate() {
                pos[v] = slot + i;
            }
            let next = slot + cells[ci].len();
            permute(cells, ci + 1, next, pos, adj, best);
            return;
        }
        for i in 0..k {
            heap_permute(cells, ci, k - 1, slot, pos, adj, best);
            if k.is_multiple_of(2) {
                cells[ci].swap(i, k - 1);
            } else {
                cells[ci].swap(0, k - 1);
            }
        }
    }
    permute(&mut cells, 0, 0, &mut pos, adj, &mut best);
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::{label_a, label_b, TARGET};

    fn g(n: usize, e: &[(usize, usize)]) -> Graph {
        Graph::from_pairs(n, e).unwrap()
    }

    #[test]
    fn cardinality_examples() {
        assert_eq!(brute_max_cardinality(&g(3, &[(1, 2), (2, 3)])).unwrap().len(), 1);
        let c5 = g(5, &[(1, 2), (2, 3), (3, 4), (4, 5), (5, 1)]);
        assert_eq!(brute_max_cardinality(&c5).unwrap().len(), 2);
        let k4 = g(4, &[(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]);
        assert_eq!(brute_max_cardinality(&k4).unwrap().len(), 2);
        assert!(brute_max_cardinality(&Graph::new(15)).is_err());
    }

    #[test]
    fn weight_examples() {
        let tri = Graph::from_edges(3, &[(1, 2, 3), (1, 3, 4), (2, 3, 5)]).unwrap();
        assert_eq!(brute_max_weight(&tri).unwrap().1, 5);
        let two = Graph::from_edges(4, &[(1, 2, 10), (3, 4, 10)]).unwrap();
        assert_eq!(brute_max_weight(&two).unwrap().1, 20);
        let one = Graph::from_edges(2, &[(1, 2, 6)]).unwrap();
        assert_eq!(brute_max_weight(&one).unwrap().1, 6);
        assert!(brute_max_weight(&Graph::new(13)).is_err());
    }

    #[test]
    fn strongly_simple_examples() {
        let one = g(2, &[(1, 2)]);
        let gm = DirectedMatchingGraph::build(&one, &Matching::empty(2));
        let (p, len) = brute_st_strongly_simple(&gm, SOURCE, TARGET).unwrap().unwrap();
        assert_eq!(len, 3);
        assert_eq!(p.labels(), &[SOURCE, label_b(1), label_a(2), TARGET]);

        let p3 = g(3, &[(1, 2), (2, 3)]);
        let m = validate_matching(&p3, &[0]).unwrap();
        let gm = DirectedMatchingGraph::build(&p3, &m);
        assert_eq!(brute_st_strongly_simple(&gm, SOURCE, TARGET).unwrap(), None);
    }

    #[test]
    fn blossom_instance_levels() {
        // C5 with stem: 1 free, 6 free, M = {(2,3),(4,5)}.
        let gr = g(6, &[(1, 2), (2, 3), (3, 4), (4, 5), (5, 1), (3, 6)]);
        let m = validate_matching(&gr, &[1, 3]).unwrap();
        let gm = DirectedMatchingGraph::build(&gr, &m);
        let lv = brute_levels(&gm).unwrap();
        assert_eq!(lv[label_b(1)], Some(1));
        assert_eq!(lv[label_a(2)], Some(2));
        assert_eq!(lv[label_a(3)], Some(2));
        assert_eq!(lv[label_b(3)], Some(3));
        // [1,A] is only reachable from the 6 side: s,6B,3A,2B,1A.
        assert_eq!(lv[label_a(1)], Some(4));
        assert_eq!(lv[TARGET], Some(5));
    }

    #[test]
    fn gen_random_contract() {
        let a = gen_random(4, 3, 1, 1).unwrap();
        let b = gen_random(4, 3, 1, 1).unwrap();
        assert_eq!(a, b);
        let tri = gen_random(3, 3, 9, 5).unwrap();
        assert_eq!(tri.m(), 3);
        assert_eq!(gen_random(5, 11, 0, 1), Err(OracleError::InfeasibleEdgeCount { n: 5, m: 11 }));
    }

    #[test]
    fn graph_class_counts() {
        let counts: Vec<usize> = (1..=6).map(|n| nonisomorphic_graphs(n).len()).collect();
        assert_eq!(counts, vec![1, 2, 4, 11, 34, 156]);
        let connected = nonisomorphic_graphs(6).iter().filter(|g| is_connected(g)).count();
        assert_eq!(connected, 112);
    }

    #[test]
    fn matchings_of_triangle() {
        assert_eq!(all_matchings(&g(3, &[(1, 2), (2, 3), (1, 3)])).len(), 4);
    }
}
