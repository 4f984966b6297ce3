//! Phase-based maximum-cardinality matching.
//!
//! Each phase levels `G_M` with a modified breadth-first search, keeps the
//! arcs that connect consecutive levels, pulls a maximal set of disjoint
//! shortest `s`-`t` paths out of that layered graph with the modified
//! depth-first search, and augments along all of them.

use crate::dsu::{DisjointSets, SetId};
use crate::graph::{validate_matching, Graph, Matching};
use crate::mdfs::{find_augmenting_path, Mdfs, SearchView};
use crate::reduction::{
    is_a, is_b, lift_path, ArcOrigin, reverse_label, DirectedMatchingGraph, DirectedPath,
    LabeledNode, SOURCE, TARGET,
};
use std::collections::BinaryHeap;

const UNSET: u32 = u32::MAX;

/// A pair of labels waiting for the backward search of Part 2, stored as the
/// unmatched arc `(x, r(y))` that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bridge {
    pub arc: usize,
}

impl Bridge {
    pub fn labels(self, gm: &DirectedMatchingGraph) -> (usize, usize) {
        (gm.arc_tail(self.arc), reverse_label(gm.arc_head(self.arc)))
    }
}

/// Result of one backward search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DomRecord {
    pub pair: (usize, usize),
    pub dom: usize,
    pub phase: usize,
    /// Levels as they stood when the search started, if recording was on.
    pub levels_before: Option<Vec<Option<usize>>>,
}

/// The leveled graph produced by one run of [`mbfs_layers`].
#[derive(Clone, Debug)]
pub struct LayeredGraph {
    level: Vec<u32>,
    second: Vec<bool>,
    assigned_in: Vec<u32>,
    in_bar: Vec<bool>,
    bar_pred: Vec<Vec<usize>>,
    bar_succ: Vec<Vec<usize>>,
    buckets: Vec<Vec<Bridge>>,
    doms: Vec<DomRecord>,
    phases: usize,
    target_level: Option<usize>,
    anomalies: usize,
    skips: usize,
}

impl LayeredGraph {
    pub fn level(&self, label: usize) -> Option<usize> {
        let l = self.level[label];
        (l != UNSET).then_some(l as usize)
    }

    pub fn levels(&self) -> Vec<Option<usize>> {
        (0..self.level.len()).map(|l| self.level(l)).collect()
    }

    /// Smaller of the two label levels of node `v`.
    pub fn level1(&self, v: usize) -> Option<usize> {
        let (a, b) = (self.level(LabeledNode::A(v).index()), self.level(LabeledNode::B(v).index()));
        match (a, b) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, y) => x.or(y),
        }
    }

    /// Larger of the two label levels of node `v`, once both are known.
    pub fn level2(&self, v: usize) -> Option<usize> {
        let a = self.level(LabeledNode::A(v).index())?;
        let b = self.level(LabeledNode::B(v).index())?;
        Some(a.max(b))
    }

    /// True iff the label got its level in a backward search.
    pub fn is_second(&self, label: usize) -> bool {
        self.second[label]
    }

    /// Phase in which the label was leveled.
    pub fn assigned_in(&self, label: usize) -> Option<usize> {
        let p = self.assigned_in[label];
        (p != UNSET).then_some(p as usize)
    }

    pub fn has_arc(&self, arc: usize) -> bool {
        self.in_bar[arc]
    }

    pub fn arc_count(&self) -> usize {
        self.in_bar.iter().filter(|&&b| b).count()
    }

    /// Arcs of the layered graph leaving `label`.
    pub fn out_arcs(&self, label: usize) -> &[usize] {
        &self.bar_succ[label]
    }

    /// Pairs that were queued for Part 2 of phase `k + 1`.
    pub fn bucket(&self, k: usize) -> &[Bridge] {
        self.buckets.get(k).map_or(&[], |b| b.as_slice())
    }

    pub fn doms(&self) -> &[DomRecord] {
        &self.doms
    }

    pub fn phases(&self) -> usize {
        self.phases
    }

    /// Length of the shortest `s`-`t` path, if `t` was reached.
    pub fn target_level(&self) -> Option<usize> {
        self.target_level
    }

    /// Backward-search steps that jumped over a second-leveled label.
    pub fn skips(&self) -> usize {
        self.skips
    }

    /// Level assignments that contradicted an earlier one. Always zero on a
    /// correct run; kept as a diagnostic.
    pub fn anomalies(&self) -> usize {
        self.anomalies
    }
}

/// Options for [`mbfs_layers_with`].
#[derive(Clone, Copy, Debug, Default)]
pub struct MbfsOptions {
    /// Keep a level snapshot per backward search.
    pub record_levels: bool,
}

struct Mbfs<'g> {
    gm: &'g DirectedMatchingGraph,
    opts: MbfsOptions,
    lg: LayeredGraph,
    layers: Vec<Vec<usize>>,
    waiting_pairs: Vec<Vec<usize>>,
    pair_seen: Vec<bool>,
    max_level: u32,
    max_bucket: usize,
    phase: usize,
    // backward search scratch
    stamp: u32,
    front_mark: Vec<u32>,
    done_mark: Vec<u32>,
    skip: DisjointSets<usize>,
    dom_set: Vec<Option<SetId>>,
    heap: BinaryHeap<(u32, usize)>,
    newly: Vec<usize>,
    expanded: Vec<usize>,
    absorbed: Vec<SetId>,
}

/// Levels `gm` and builds the layered graph of shortest strongly simple
/// `s`-`t` paths.
pub fn mbfs_layers(gm: &DirectedMatchingGraph) -> LayeredGraph {
    mbfs_layers_with(gm, MbfsOptions::default())
}

pub fn mbfs_layers_with(gm: &DirectedMatchingGraph, opts: MbfsOptions) -> LayeredGraph {
    let labels = gm.label_count();
    let arcs = gm.arc_count();
    let mut run = Mbfs {
        gm,
        opts,
        lg: LayeredGraph {
            level: vec![UNSET; labels],
            second: vec![false; labels],
            assigned_in: vec![UNSET; labels],
            in_bar: vec![false; arcs],
            bar_pred: vec![Vec::new(); labels],
            bar_succ: vec![Vec::new(); labels],
            buckets: vec![Vec::new(); labels + 4],
            doms: Vec::new(),
            phases: 0,
            target_level: None,
            anomalies: 0,
            skips: 0,
        },
        layers: vec![Vec::new(); labels + 4],
        waiting_pairs: vec![Vec::new(); labels],
        pair_seen: vec![false; arcs / 2 + 1],
        max_level: 0,
        max_bucket: 0,
        phase: 0,
        stamp: 0,
        front_mark: vec![0; labels],
        done_mark: vec![0; labels],
        skip: DisjointSets::new(labels),
        dom_set: vec![None; labels],
        heap: BinaryHeap::new(),
        newly: Vec::new(),
        expanded: Vec::new(),
        absorbed: Vec::new(),
    };
    run.run();
    run.lg
}

impl<'g> Mbfs<'g> {
    fn lv(&self, label: usize) -> u32 {
        self.lg.level[label]
    }

    fn set_level(&mut self, label: usize, level: u32, second: bool) {
        debug_assert_eq!(self.lg.level[label], UNSET);
        debug_assert!(label == TARGET || (level % 2 == 1) == is_b(label) || label == SOURCE);
        self.lg.level[label] = level;
        self.lg.second[label] = second;
        self.lg.assigned_in[label] = self.phase as u32;
        self.max_level = self.max_level.max(level);
        if (level as usize) < self.layers.len() {
            self.layers[level as usize].push(label);
        }
        if is_b(label) {
            for a in std::mem::take(&mut self.waiting_pairs[label]) {
                self.queue_pair(a);
            }
        } else if is_a(label) {
            // A matched edge whose two A-labels are both leveled forms a pair.
            let a = self.gm.out_arcs(label)[0];
            let h = self.gm.arc_head(a);
            if h != TARGET && self.lv(reverse_label(h)) != UNSET {
                self.queue_pair(a);
            }
        }
    }

    fn insert_arc(&mut self, a: usize) {
        if !std::mem::replace(&mut self.lg.in_bar[a], true) {
            self.lg.bar_pred[self.gm.arc_head(a)].push(a);
            self.lg.bar_succ[self.gm.arc_tail(a)].push(a);
        }
    }

    /// Files the pair of arc `a` under `E(k)`, `k` the mean of the two
    /// `B`-levels. Pairs whose phase has passed are dropped.
    fn queue_pair(&mut self, a: usize) {
        let (x, y) = (self.gm.arc_tail(a), reverse_label(self.gm.arc_head(a)));
        let k = (self.lv(x) + self.lv(y)) / 2;
        let cur = self.phase.saturating_sub(1) as u32;
        if k >= cur && (k as usize) < self.lg.buckets.len() {
            self.lg.buckets[k as usize].push(Bridge { arc: a });
            self.max_bucket = self.max_bucket.max(k as usize);
        }
    }

    fn run(&mut self) {
        let limit = self.gm.label_count() + 2;
        self.phase = 1;
        self.set_level(SOURCE, 0, false);
        for l in 0..limit {
            self.phase = l + 1;
            self.part_one(l);
            self.part_two(l);
            self.lg.phases = self.phase;
            let p = l + 1;
            let reached: Vec<usize> = self.layers[p]
                .iter()
                .copied()
                .filter(|&x| is_a(x) && self.gm.out_arcs(x).iter().any(|&a| self.gm.arc_head(a) == TARGET))
                .collect();
            if !reached.is_empty() {
                self.set_level(TARGET, p as u32 + 1, false);
                for x in reached {
                    for &a in self.gm.out_arcs(x) {
                        if self.gm.arc_head(a) == TARGET {
                            self.insert_arc(a);
                        }
                    }
                }
                self.lg.target_level = Some(p + 1);
                return;
            }
            let queued = self.max_bucket >= p;
            if self.layers[p].is_empty() && (self.max_level as usize) <= p && !queued {
                return;
            }
        }
    }

    fn part_one(&mut self, l: usize) {
        let gm = self.gm;
        if l == 0 {
            for &a in gm.out_arcs(SOURCE) {
                let h = gm.arc_head(a);
                if self.lv(h) == UNSET {
                    self.set_level(h, 1, false);
                }
                self.insert_arc(a);
            }
            return;
        }
        let lu = l as u32;
        let mut i = 0;
        while i < self.layers[l].len() {
            let x = self.layers[l][i];
            i += 1;
            if l.is_multiple_of(2) {
                if !is_a(x) {
                    continue;
                }
                let b = self.lv(reverse_label(x));
                if b != UNSET && b < lu {
                    continue;
                }
                let a = gm.out_arcs(x)[0];
                let h = gm.arc_head(a);
                if h == TARGET {
                    continue;
                }
                if self.lv(h) == UNSET {
                    self.set_level(h, lu + 1, false);
                } else if self.lv(h) != lu + 1 {
                    self.lg.anomalies += 1;
                }
                self.insert_arc(a);
            } else {
                if !is_b(x) {
                    continue;
                }
                for &a in gm.out_arcs(x) {
                    let wa = gm.arc_head(a);
                    let wb = reverse_label(wa);
                    let (la, lb) = (self.lv(wa), self.lv(wb));
                    let a_high = la == UNSET || la > lu;
                    let b_high = lb == UNSET || lb > lu;
                    if a_high && b_high {
                        if la == UNSET {
                            self.set_level(wa, lu + 1, false);
                        } else if la != lu + 1 {
                            self.lg.anomalies += 1;
                        }
                        self.insert_arc(a);
                    } else {
                        let e = a / 2;
                        if std::mem::replace(&mut self.pair_seen[e], true) {
                            continue;
                        }
                        if lb != UNSET {
                            self.queue_pair(a);
                        } else {
                            self.waiting_pairs[wb].push(a);
                        }
                    }
                }
            }
        }
    }

    fn part_two(&mut self, l: usize) {
        let mut i = 0;
        while i < self.lg.buckets[l].len() {
            let bridge = self.lg.buckets[l][i];
            i += 1;
            self.backward_search(bridge);
        }
    }

    /// Searches back from both labels of the pair, always advancing a front
    /// label of maximal level, until the front shrinks to the pair's DOM.
    fn backward_search(&mut self, bridge: Bridge) {
        let gm = self.gm;
        let (x, y) = bridge.labels(gm);
        let sum = self.lv(x) + self.lv(y);
        let levels_before = self.opts.record_levels.then(|| self.lg.levels());
        self.stamp += 1;
        let stamp = self.stamp;
        let mut heap = std::mem::take(&mut self.heap);
        heap.clear();
        let mut front = 0usize;
        let mut newly = std::mem::take(&mut self.newly);
        let mut expanded = std::mem::take(&mut self.expanded);
        let mut absorbed = std::mem::take(&mut self.absorbed);

        macro_rules! enter {
            ($f:expr) => {{
                let f = $f;
                if self.front_mark[f] != stamp && self.done_mark[f] != stamp {
                    self.front_mark[f] = stamp;
                    heap.push((self.lg.level[f], f));
                    front += 1;
                }
            }};
        }
        enter!(x);
        enter!(y);

        let dom = loop {
            let Some(&(_, top)) = heap.peek() else {
                self.lg.anomalies += 1;
                break SOURCE;
            };
            if front == 1 && (top == SOURCE || (is_b(top) && self.lv(reverse_label(top)) == UNSET)) {
                break top;
            }
            heap.pop();
            front -= 1;
            self.front_mark[top] = 0;
            self.done_mark[top] = stamp;
            if let Ok(set) = self.skip.find(top) {
                self.lg.skips += 1;
                absorbed.push(set);
                let d = *self.skip.payload(set);
                enter!(d);
                continue;
            }
            expanded.push(top);
            let r = reverse_label(top);
            if self.lv(r) == UNSET {
                let lr = sum + 1 - self.lv(top);
                self.set_level(r, lr, true);
                newly.push(r);
            }
            if let Some(set) = self.dom_set[top].take() {
                if self.skip.is_live(set) {
                    absorbed.push(set);
                }
            }
            for j in 0..self.lg.bar_pred[top].len() {
                let a = self.lg.bar_pred[top][j];
                self.insert_arc(DirectedMatchingGraph::reverse_arc(a));
                enter!(gm.arc_tail(a));
            }
        };
        self.done_mark[dom] = 0;
        self.front_mark[dom] = 0;
        self.insert_arc(bridge.arc);
        self.insert_arc(DirectedMatchingGraph::reverse_arc(bridge.arc));

        let mut set: Option<SetId> = self.dom_set[dom].take().filter(|&s| self.skip.is_live(s));
        let join = |skip: &mut DisjointSets<usize>, cur: &mut Option<SetId>, s: SetId| match *cur {
            None => *cur = Some(s),
            Some(c) if c == s => {}
            Some(c) => *cur = Some(skip.union(c, s, dom).expect("live sets").0),
        };
        for &r in newly.iter().chain(&expanded) {
            if !self.skip.contains(r) {
                let s = self.skip.make_set(r, dom).expect("fresh element");
                join(&mut self.skip, &mut set, s);
            }
        }
        for &s in &absorbed {
            let s = self.skip.find_fast(self.skip.members(s)[0]);
            join(&mut self.skip, &mut set, s);
        }
        if let Some(s) = set {
            *self.skip.payload_mut(s) = dom;
            self.dom_set[dom] = Some(s);
        }
        self.lg.doms.push(DomRecord { pair: (x, y), dom, phase: self.phase, levels_before });
        newly.clear();
        expanded.clear();
        absorbed.clear();
        (self.heap, self.newly, self.expanded, self.absorbed) = (heap, newly, expanded, absorbed);
    }
}

/// DOM of `(x, y)` as computed while leveling, or by a plain backward search
/// over the finished layered graph for pairs that were never queued.
pub fn dom_resolve(
    gm: &DirectedMatchingGraph,
    lg: &LayeredGraph,
    x: usize,
    y: usize,
) -> Result<usize, HkError> {
    for l in [x, y] {
        if lg.level.get(l).is_none_or(|&v| v == UNSET) {
            return Err(HkError::Unleveled(l));
        }
    }
    if let Some(r) = lg.doms.iter().find(|r| r.pair == (x, y) || r.pair == (y, x)) {
        return Ok(r.dom);
    }
    if x == y {
        return Ok(x);
    }
    let mut heap = BinaryHeap::new();
    let mut seen = vec![false; lg.level.len()];
    for l in [x, y] {
        seen[l] = true;
        heap.push((lg.level[l], l));
    }
    loop {
        let (_, top) = heap.pop().expect("s is always reachable backwards");
        if heap.is_empty() && top != x && top != y && (top == SOURCE || is_b(top)) {
            return Ok(top);
        }
        if top == SOURCE {
            return Ok(SOURCE);
        }
        for &a in &lg.bar_pred[top] {
            let p = gm.arc_tail(a);
            if !std::mem::replace(&mut seen[p], true) {
                heap.push((lg.level[p], p));
            }
        }
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum HkError {
    #[error("label {0} has no level")]
    Unleveled(usize),
}

/// Positions a label can take on a shortest `s`-`t` path of length `len`.
/// At position `j` the prefix shows `level <= j`, and the reversed suffix is
/// a path of length `len - j` to the partner label.
fn position_range(lg: &LayeredGraph, label: usize, len: usize) -> Option<(usize, usize)> {
    let lo = lg.level(label)?;
    let hi = len.checked_sub(lg.level(reverse_label(label))?)?;
    (lo <= hi && hi < len).then_some((lo, hi))
}

/// Copies of `G_M` labels pinned to a position on a path of length `len`.
///
/// `(x, p)` and `(r(x), len - p)` form one node of an auxiliary graph whose
/// own `G_M` is skew-symmetric again, so the depth-first search runs on it
/// unchanged. Every `s`-`t` path there has exactly `len` arcs.
struct Expanded {
    graph: Graph,
    /// Original node of each auxiliary node.
    origin: Vec<usize>,
    /// Auxiliary nodes per original node.
    copies: Vec<Vec<usize>>,
    matching: Matching,
}

impl Expanded {
    fn build(gm: &DirectedMatchingGraph, lg: &LayeredGraph, len: usize) -> Self {
        let labels = gm.label_count();
        let range: Vec<Option<(usize, usize)>> =
            (0..labels).map(|l| if l < 2 { None } else { position_range(lg, l, len) }).collect();
        let usable = |a: usize| lg.in_bar[a] || lg.in_bar[DirectedMatchingGraph::reverse_arc(a)];
        let fits = |l: usize, p: usize| range[l].is_some_and(|(lo, hi)| lo <= p && p <= hi);

        // forward sweep over (label, position) copies, layer by layer
        let mut at: Vec<Vec<(usize, usize)>> = vec![Vec::new(); labels];
        let mut copy_label = Vec::new();
        let mut copy_pos = Vec::new();
        let mut succ: Vec<Vec<usize>> = Vec::new();
        let mut final_copy = Vec::new();
        let find = |at: &Vec<Vec<(usize, usize)>>, l: usize, p: usize| {
            at[l].iter().find(|&&(q, _)| q == p).map(|&(_, id)| id)
        };
        for &a in gm.out_arcs(SOURCE) {
            let y = gm.arc_head(a);
            if lg.in_bar[a] && fits(y, 1) {
                at[y].push((1, copy_label.len()));
                copy_label.push(y);
                copy_pos.push(1);
                succ.push(Vec::new());
                final_copy.push(false);
            }
        }
        let mut layer_start = 0;
        for p in 1..len {
            let layer_end = copy_label.len();
            for c in layer_start..layer_end {
                let x = copy_label[c];
                for &a in gm.out_arcs(x) {
                    let y = gm.arc_head(a);
                    if y == TARGET {
                        final_copy[c] = p + 1 == len && lg.in_bar[a];
                        continue;
                    }
                    if p + 1 == len || !fits(y, p + 1) || !usable(a) {
                        continue;
                    }
                    let id = match find(&at, y, p + 1) {
                        Some(id) => id,
                        None => {
                            let id = copy_label.len();
                            at[y].push((p + 1, id));
                            copy_label.push(y);
                            copy_pos.push(p + 1);
                            succ.push(Vec::new());
                            final_copy.push(false);
                            id
                        }
                    };
                    succ[c].push(id);
                }
            }
            layer_start = layer_end;
        }

        // backward sweep: keep copies that still reach t
        let mut good = final_copy;
        for c in (0..copy_label.len()).rev() {
            if !good[c] {
                good[c] = succ[c].iter().any(|&d| good[d]);
            }
        }

        let n = gm.n();
        let mut node_of_copy = vec![usize::MAX; copy_label.len()];
        let mut origin = Vec::new();
        let mut copies = vec![Vec::new(); n + 1];
        for c in 0..copy_label.len() {
            let x = copy_label[c];
            if good[c] && is_a(x) {
                let partner = find(&at, reverse_label(x), len - copy_pos[c]);
                if partner.is_some_and(|d| good[d]) {
                    node_of_copy[c] = origin.len() + 1;
                    copies[x / 2].push(origin.len() + 1);
                    origin.push(x / 2);
                }
            }
        }
        let aux = |l: usize, p: usize| -> Option<usize> {
            let (la, pa) = if is_a(l) { (l, p) } else { (reverse_label(l), len - p) };
            find(&at, la, pa).map(|c| node_of_copy[c]).filter(|&v| v != usize::MAX)
        };
        let mut graph = Graph::new(origin.len());
        let mut matched = Vec::new();
        for c in 0..copy_label.len() {
            if !good[c] {
                continue;
            }
            let (x, p) = (copy_label[c], copy_pos[c]);
            for &d in &succ[c] {
                if !good[d] {
                    continue;
                }
                let Some((u, w)) = aux(x, p).zip(aux(copy_label[d], p + 1)) else { continue };
                // each auxiliary edge shows up once from each of its two arcs
                match graph.add_edge(u, w, 1) {
                    Ok(e) if is_a(x) => matched.push(e),
                    _ => {}
                }
            }
        }
        let matching = validate_matching(&graph, &matched).expect("mates pair up position by position");
        Expanded { graph, origin, copies, matching }
    }

    /// Maps an auxiliary path back to `G_M` labels.
    fn project(&self, p: &DirectedPath) -> DirectedPath {
        let labels = p.labels();
        let mut out = Vec::with_capacity(labels.len());
        for &l in labels {
            out.push(if l < 2 { l } else { 2 * self.origin[l / 2 - 1] + (l & 1) });
        }
        DirectedPath(out)
    }

    fn len(&self) -> usize {
        self.origin.len()
    }
}

/// Search view with deletable labels and arcs; labels left without an in-
/// or out-arc are deleted too.
struct DeletionView<'a> {
    gm: &'a DirectedMatchingGraph,
    dead: Vec<bool>,
    off: Vec<bool>,
    indeg: Vec<usize>,
    outdeg: Vec<usize>,
    queue: Vec<usize>,
}

impl SearchView for DeletionView<'_> {
    fn enabled(&self, arc: usize) -> bool {
        !self.off[arc]
    }

    fn alive(&self, label: usize) -> bool {
        !self.dead[label]
    }
}

impl<'a> DeletionView<'a> {
    fn new(gm: &'a DirectedMatchingGraph) -> Self {
        let labels = gm.label_count();
        let mut indeg = vec![0; labels];
        let mut outdeg = vec![0; labels];
        for a in 0..gm.arc_count() {
            outdeg[gm.arc_tail(a)] += 1;
            indeg[gm.arc_head(a)] += 1;
        }
        let queue = (2..labels).filter(|&l| indeg[l] == 0 || outdeg[l] == 0).collect();
        let mut v = DeletionView {
            gm,
            dead: vec![false; labels],
            off: vec![false; gm.arc_count()],
            indeg,
            outdeg,
            queue,
        };
        v.cascade();
        v
    }

    fn remove_label(&mut self, l: usize) {
        self.queue.push(l);
    }

    fn remove_arc(&mut self, a: usize) {
        if std::mem::replace(&mut self.off[a], true) {
            return;
        }
        let (t, h) = (self.gm.arc_tail(a), self.gm.arc_head(a));
        if self.dead[t] || self.dead[h] {
            return;
        }
        self.outdeg[t] -= 1;
        self.indeg[h] -= 1;
        if self.outdeg[t] == 0 && t != SOURCE {
            self.queue.push(t);
        }
        if self.indeg[h] == 0 && h != TARGET {
            self.queue.push(h);
        }
    }

    fn cascade(&mut self) {
        while let Some(x) = self.queue.pop() {
            if std::mem::replace(&mut self.dead[x], true) {
                continue;
            }
            for &a in self.gm.out_arcs(x) {
                let h = self.gm.arc_head(a);
                if self.off[a] || self.dead[h] {
                    continue;
                }
                self.indeg[h] -= 1;
                if self.indeg[h] == 0 && h != TARGET {
                    self.queue.push(h);
                }
            }
            // in-arcs of x mirror the out-arcs of r(x)
            if x >= 2 {
                for &b in self.gm.out_arcs(reverse_label(x)) {
                    let a = DirectedMatchingGraph::reverse_arc(b);
                    let t = self.gm.arc_tail(a);
                    if self.off[a] || self.dead[t] {
                        continue;
                    }
                    self.outdeg[t] -= 1;
                    if self.outdeg[t] == 0 && t != SOURCE {
                        self.queue.push(t);
                    }
                }
            }
        }
    }
}

/// Counters for one extraction.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExtractStats {
    /// Nodes of the position-pinned auxiliary graph.
    pub expanded_nodes: usize,
    /// Auxiliary paths that visited an original node twice. Each one costs
    /// an arc and a fresh search.
    pub rejected: usize,
    /// Paths found only by the closing fresh search.
    pub late_paths: usize,
    /// Extra rounds on the residual graph after a rejection.
    pub repair_rounds: usize,
    /// Paths that had to be isolated by node deletion.
    pub isolated: usize,
}

/// A maximal set of node-disjoint shortest `s`-`t` paths of the layered
/// graph.
pub fn extract_disjoint_paths(gm: &DirectedMatchingGraph, lg: &LayeredGraph) -> Vec<DirectedPath> {
    extract_disjoint_paths_counted(gm, lg).0
}

pub fn extract_disjoint_paths_counted(
    gm: &DirectedMatchingGraph,
    lg: &LayeredGraph,
) -> (Vec<DirectedPath>, ExtractStats) {
    let mut stats = ExtractStats::default();
    let Some(len) = lg.target_level else { return (Vec::new(), stats) };
    let mut paths = search_expanded(gm, lg, len, &mut stats);
    if stats.rejected == 0 {
        return (paths, stats);
    }
    // A rejection dropped arcs that a valid path may have needed, so keep
    // going on what is left until no path of this length survives.
    let mut removed = vec![false; gm.n() + 1];
    loop {
        for p in &paths {
            for &l in &p.labels()[1..p.len() - 1] {
                removed[l / 2] = true;
            }
        }
        let rest = residual(gm, &removed);
        let rl = mbfs_layers(&rest);
        if rl.target_level != Some(len) {
            break;
        }
        stats.repair_rounds += 1;
        let before = stats.rejected;
        let mut more = search_expanded(&rest, &rl, len, &mut stats);
        if more.is_empty() {
            stats.isolated += 1;
            more.push(isolate_path(&rest, len));
        } else if stats.rejected == before {
            paths.extend(more);
            break;
        }
        paths.extend(more);
    }
    (paths, stats)
}

fn search_expanded(
    gm: &DirectedMatchingGraph,
    lg: &LayeredGraph,
    len: usize,
    stats: &mut ExtractStats,
) -> Vec<DirectedPath> {
    let ex = Expanded::build(gm, lg, len);
    stats.expanded_nodes += ex.len();
    let hm = DirectedMatchingGraph::build(&ex.graph, &ex.matching);
    let mut paths = Vec::new();
    let mut search = Mdfs::new(&hm, DeletionView::new(&hm));
    let mut fresh = false;
    let mut seen = vec![false; gm.n() + 1];
    loop {
        let Some(p) = search.run() else {
            if fresh {
                break;
            }
            // one untouched search over what is left confirms maximality
            search = Mdfs::new(&hm, search.into_view());
            fresh = true;
            continue;
        };
        let q = ex.project(&p);
        let inner = 1..q.len() - 1;
        let repeat = inner.clone().find(|&i| std::mem::replace(&mut seen[q.labels()[i] / 2], true));
        for &l in &q.labels()[inner.clone()] {
            seen[l / 2] = false;
        }
        if let Some(i) = repeat {
            // drop the arc that closes the loop, and its mirror
            stats.rejected += 1;
            let (x, y) = (p.labels()[i - 1], p.labels()[i]);
            let a = hm.out_arcs(x).iter().copied().find(|&a| hm.arc_head(a) == y).expect("path arc");
            let mut v = search.into_view();
            v.remove_arc(a);
            v.remove_arc(DirectedMatchingGraph::reverse_arc(a));
            v.cascade();
            search = Mdfs::new(&hm, v);
            fresh = false;
            continue;
        }
        let v = search.view_mut();
        for &l in &q.labels()[inner] {
            for &c in &ex.copies[l / 2] {
                v.remove_label(2 * c);
                v.remove_label(2 * c + 1);
            }
        }
        v.cascade();
        search.unwind_to_source();
        if fresh {
            stats.late_paths += 1;
            search = Mdfs::new(&hm, search.into_view());
        }
        paths.push(q);
    }
    paths
}

/// `G_M` of the subgraph without the `removed` nodes, keeping node ids.
fn residual(gm: &DirectedMatchingGraph, removed: &[bool]) -> DirectedMatchingGraph {
    let mut g = Graph::new(gm.n());
    let mut matched = Vec::new();
    for a in (0..gm.arc_count()).step_by(2) {
        if !matches!(gm.arc_origin(a), ArcOrigin::Edge(_)) {
            continue;
        }
        let (x, y) = (gm.arc_tail(a), gm.arc_head(a));
        if removed[x / 2] || removed[y / 2] {
            continue;
        }
        let e = g.add_edge(x / 2, y / 2, 1).expect("simple graph");
        if is_a(x) {
            matched.push(e);
        }
    }
    let m = validate_matching(&g, &matched).expect("restriction of a matching");
    DirectedMatchingGraph::build(&g, &m)
}

/// One shortest `s`-`t` path of length `len`, found by deleting nodes, with
/// their mates, for as long as such a path survives.
fn isolate_path(gm: &DirectedMatchingGraph, len: usize) -> DirectedPath {
    let n = gm.n();
    let mut removed = vec![false; n + 1];
    let mate = |v: usize| {
        let h = gm.succ(2 * v)[0];
        (h != TARGET).then_some(h / 2)
    };
    let mut cur = residual(gm, &removed);
    for v in 1..=n {
        if removed[v] || gm.out_arcs(2 * v + 1).is_empty() {
            continue;
        }
        let pair = [Some(v), mate(v)];
        for u in pair.into_iter().flatten() {
            removed[u] = true;
        }
        let trial = residual(gm, &removed);
        if mbfs_layers(&trial).target_level == Some(len) {
            cur = trial;
        } else {
            for u in pair.into_iter().flatten() {
                removed[u] = false;
            }
        }
    }
    let p = find_augmenting_path(&cur).expect("a path of this length survives");
    debug_assert_eq!(p.arc_len(), len);
    p
}

/// Per-run counters.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HkStats {
    pub phases: usize,
    pub paths_per_phase: Vec<usize>,
    pub length_per_phase: Vec<usize>,
    /// Phases where leveling missed `t` but an augmenting path existed.
    pub level_misses: usize,
    pub rejected_paths: usize,
    pub isolated_paths: usize,
    pub late_paths: usize,
    pub level_anomalies: usize,
}

/// Maximum-cardinality matching by phases.
pub fn solve_hk(g: &Graph) -> Matching {
    solve_hk_with_stats(g).0
}

pub fn solve_hk_with_stats(g: &Graph) -> (Matching, HkStats) {
    let mut m = Matching::empty(g.n());
    let mut stats = HkStats::default();
    loop {
        let gm = DirectedMatchingGraph::build(g, &m);
        let lg = mbfs_layers(&gm);
        stats.level_anomalies += lg.anomalies();
        let mut paths = Vec::new();
        if lg.target_level().is_some() {
            let (found, ex) = extract_disjoint_paths_counted(&gm, &lg);
            stats.rejected_paths += ex.rejected;
            stats.isolated_paths += ex.isolated;
            stats.late_paths += ex.late_paths;
            paths = found;
        }
        if paths.is_empty() {
            let Some(p) = find_augmenting_path(&gm) else { break };
            stats.level_misses += 1;
            paths.push(p);
        }
        stats.phases += 1;
        stats.paths_per_phase.push(paths.len());
        stats.length_per_phase.push(paths[0].arc_len());
        for p in &paths {
            let path = lift_path(&gm, p).expect("extracted paths are strongly simple s-t paths");
            m.flip_path(g, &path.nodes);
        }
    }
    (m, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cardinality::solve_basic;
    use crate::oracle::{brute_dom, brute_levels, brute_max_cardinality, brute_shortest_st_paths, gen_random};
    use crate::reduction::{label_a, label_b};
    use proptest::prelude::*;

    fn instance(n: usize, edges: &[(usize, usize)], matched: &[(usize, usize)]) -> DirectedMatchingGraph {
        let g = Graph::from_pairs(n, edges).unwrap();
        let e: Vec<usize> = matched.iter().map(|&(u, v)| g.edge_index(u, v).unwrap()).collect();
        DirectedMatchingGraph::build(&g, &validate_matching(&g, &e).unwrap())
    }

    fn c5_with_pendant() -> DirectedMatchingGraph {
        instance(6, &[(1, 2), (2, 3), (3, 4), (4, 5), (5, 1), (3, 6)], &[(2, 3), (4, 5)])
    }

    /// Free node 1, stem 1-2=3, odd cycle 3-4=5-3.
    fn stem_and_triangle() -> DirectedMatchingGraph {
        instance(5, &[(1, 2), (2, 3), (3, 4), (4, 5), (3, 5)], &[(2, 3), (4, 5)])
    }

    fn recorded(gm: &DirectedMatchingGraph) -> LayeredGraph {
        mbfs_layers_with(gm, MbfsOptions { record_levels: true })
    }

    #[test]
    fn single_free_edge_levels() {
        let gm = instance(2, &[(1, 2)], &[]);
        let lg = mbfs_layers(&gm);
        assert_eq!(lg.level(SOURCE), Some(0));
        for v in [1, 2] {
            assert_eq!(lg.level(label_b(v)), Some(1));
            assert_eq!(lg.level(label_a(v)), Some(2));
        }
        assert_eq!(lg.target_level(), Some(3));
    }

    #[test]
    fn no_augmenting_path_leaves_t_unleveled() {
        let gm = instance(3, &[(1, 2), (2, 3)], &[(1, 2)]);
        let lg = mbfs_layers(&gm);
        assert_eq!(lg.target_level(), None);
        assert_eq!(lg.level(TARGET), None);
    }

    #[test]
    fn blossom_levels_match_brute_force() {
        let gm = c5_with_pendant();
        let lg = mbfs_layers(&gm);
        let truth = brute_levels(&gm).unwrap();
        assert_eq!(lg.levels(), truth);
        // 1A, 4A, 5B and 6A only get their level from a backward search
        let second: Vec<usize> = (2..gm.label_count()).filter(|&l| lg.is_second(l)).collect();
        assert_eq!(second, vec![label_a(1), label_a(4), label_b(5), label_a(6)]);
    }

    #[test]
    fn level_pairs_have_odd_sum() {
        let gm = c5_with_pendant();
        let lg = mbfs_layers(&gm);
        for v in 1..=6 {
            if let (Some(a), Some(b)) = (lg.level1(v), lg.level2(v)) {
                assert!(a < b && (a + b) % 2 == 1);
            }
        }
    }

    #[test]
    fn dom_agrees_with_brute_force() {
        for gm in [c5_with_pendant(), stem_and_triangle()] {
            let lg = recorded(&gm);
            assert!(!lg.doms().is_empty());
            for r in lg.doms() {
                let before = r.levels_before.as_ref().unwrap();
                assert_eq!(brute_dom(&gm, &[r.pair.0, r.pair.1], before).unwrap(), r.dom);
            }
        }
    }

    #[test]
    fn dom_is_the_stem_b_label() {
        let gm = stem_and_triangle();
        let lg = recorded(&gm);
        // the triangle is entered through its matched edge 4-5
        assert_eq!(dom_resolve(&gm, &lg, label_a(5), label_a(4)), Ok(label_b(3)));
        assert_eq!(lg.doms().len(), 1);
    }

    #[test]
    fn dom_of_source_is_source() {
        let gm = c5_with_pendant();
        let lg = mbfs_layers(&gm);
        assert_eq!(dom_resolve(&gm, &lg, SOURCE, SOURCE), Ok(SOURCE));
    }

    #[test]
    fn dom_is_source_when_trees_only_share_it() {
        // the two free nodes approach the cycle from opposite sides
        let gm = c5_with_pendant();
        let lg = recorded(&gm);
        let r = lg.doms().iter().find(|r| r.pair == (label_a(3), label_a(2)) || r.pair == (label_a(2), label_a(3)));
        assert_eq!(r.map(|r| r.dom), Some(SOURCE));
    }

    #[test]
    fn dom_rejects_unleveled_labels() {
        let gm = instance(3, &[(1, 2), (2, 3)], &[(1, 2)]);
        let lg = mbfs_layers(&gm);
        assert_eq!(dom_resolve(&gm, &lg, TARGET, SOURCE), Err(HkError::Unleveled(TARGET)));
    }

    #[test]
    fn two_disjoint_edges_give_two_paths() {
        let gm = instance(4, &[(1, 2), (3, 4)], &[]);
        let lg = mbfs_layers(&gm);
        let paths = extract_disjoint_paths(&gm, &lg);
        assert_eq!(paths.len(), 2);
        assert!(paths.iter().all(|p| p.arc_len() == 3));
    }

    #[test]
    fn single_free_edge_gives_one_path() {
        let gm = instance(2, &[(1, 2)], &[]);
        let paths = extract_disjoint_paths(&gm, &mbfs_layers(&gm));
        assert_eq!(paths.len(), 1);
    }

    #[test]
    fn path_on_three_nodes_takes_one_phase() {
        let g = Graph::from_pairs(3, &[(1, 2), (2, 3)]).unwrap();
        let (m, stats) = solve_hk_with_stats(&g);
        assert_eq!(m.len(), 1);
        assert_eq!(stats.phases, 1);
    }

    #[test]
    fn even_paths_match_basic_solver() {
        for k in 1..=6 {
            let pairs: Vec<(usize, usize)> = (1..2 * k).map(|v| (v, v + 1)).collect();
            let g = Graph::from_pairs(2 * k, &pairs).unwrap();
            assert_eq!(solve_hk(&g).len(), solve_basic(&g, &Matching::empty(g.n())).len());
            assert_eq!(solve_hk(&g).len(), k);
        }
    }

    #[test]
    fn extracted_paths_are_shortest_disjoint_and_maximal() {
        for seed in 0..300u64 {
            let n = 2 + (seed % 9) as usize;
            let cap = n * (n - 1) / 2;
            let g = gen_random(n, 1 + (seed as usize * 5) % cap, seed, 1).unwrap();
            // one augmentation in, so the second phase starts from a nonempty matching
            let gm0 = DirectedMatchingGraph::build(&g, &Matching::empty(n));
            let mut m = Matching::empty(n);
            if let Some(p) = extract_disjoint_paths(&gm0, &mbfs_layers(&gm0)).first() {
                m.flip_path(&g, &lift_path(&gm0, p).unwrap().nodes);
            }
            let gm = DirectedMatchingGraph::build(&g, &m);
            let lg = mbfs_layers(&gm);
            let shortest = brute_shortest_st_paths(&gm).unwrap();
            let paths = extract_disjoint_paths(&gm, &lg);
            let mut used = vec![false; n + 1];
            for p in &paths {
                assert_eq!(p.arc_len(), shortest[0].arc_len());
                for &l in &p.labels()[1..p.len() - 1] {
                    assert!(!std::mem::replace(&mut used[l / 2], true));
                }
            }
            assert_eq!(paths.is_empty(), shortest.is_empty());
            assert!(shortest.iter().all(|q| q.labels()[1..q.len() - 1].iter().any(|&l| used[l / 2])));
        }
    }

    #[test]
    fn random_graphs_match_brute_force() {
        for seed in 0..1000u64 {
            let n = 1 + (seed % 12) as usize;
            let cap = n * (n - 1) / 2;
            let g = gen_random(n, (seed as usize * 3) % (cap + 1), seed, 1).unwrap();
            assert_eq!(solve_hk(&g).len(), brute_max_cardinality(&g).unwrap().len(), "seed {seed}");
        }
    }

    proptest! {
        #[test]
        fn phases_are_bounded_and_lengths_grow(n in 1usize..40, density in 0.0f64..1.0, seed: u64) {
            let cap = n * (n - 1) / 2;
            let g = gen_random(n, (cap as f64 * density) as usize, seed, 1).unwrap();
            let (m, stats) = solve_hk_with_stats(&g);
            prop_assert_eq!(m.len(), solve_basic(&g, &Matching::empty(g.n())).len());
            let root = (n as f64).sqrt().ceil() as usize;
            prop_assert!(stats.phases <= 2 * root + 2);
            prop_assert!(stats.length_per_phase.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn levels_have_label_parity(n in 1usize..14, density in 0.0f64..1.0, seed: u64) {
            let cap = n * (n - 1) / 2;
            let g = gen_random(n, (cap as f64 * density) as usize, seed, 1).unwrap();
            let lg = mbfs_layers(&DirectedMatchingGraph::build(&g, &Matching::empty(n)));
            prop_assert_eq!(lg.level(SOURCE), Some(0));
            for v in 1..=n {
                prop_assert!(lg.level(label_a(v)).is_none_or(|x| x % 2 == 0));
                prop_assert!(lg.level(label_b(v)).is_none_or(|x| x % 2 == 1));
            }
        }
    }
}
