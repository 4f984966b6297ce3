//! Primal-dual maximum-weight matching.
//!
//! Duals are stored doubled (`pihat = 2π`, `muhat = 2μ`, `rhat = 2r`) so
//! every quantity stays an integer. A search step runs MDFS over the arcs
//! of zero reduced cost. Blossoms of the family are contracted on the fly:
//! an unmatched arc entering a blossom away from its base is redirected to
//! the base, so the search can only leave through the base's matched edge.

use std::cell::Cell;
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::dsu::{DisjointSets, UnionToken};
use crate::graph::{check_augmenting, validate_matching, AlternatingPath, Graph, Matching};
use crate::mdfs::{Mdfs, SearchView};
use crate::reduction::{
    is_a, is_b, label_a, label_b, node_of, ArcOrigin, DirectedMatchingGraph, DirectedPath,
    SOURCE, TARGET,
};

const NONE: usize = usize::MAX;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WeightedError {
    #[error("edge {u}-{v} has weight 0; weighted matching needs positive weights")]
    ZeroWeight { u: usize, v: usize },
    #[error("{changes} dual changes between two augmentations exceed the limit {limit}")]
    BudgetExceeded { changes: usize, limit: usize },
    #[error("internal inconsistency: {0}")]
    Internal(String),
    #[error("certificate line {line}: {msg}")]
    Certificate { line: usize, msg: String },
}

fn internal(msg: impl Into<String>) -> WeightedError {
    WeightedError::Internal(msg.into())
}

/// Dual solution in doubled units. Together with a matching it forms an
/// optimality certificate, see [`verify_certificate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualState {
    /// `2π(v)` by node id; index 0 is unused.
    pub pihat: Vec<u64>,
    pub blossoms: Vec<BlossomDual>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlossomDual {
    pub base: usize,
    /// `2μ` of the edge set spanned by `nodes`.
    pub muhat: u64,
    /// Ascending node ids.
    pub nodes: Vec<usize>,
}

/// Which minimum determined the dual change.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DeltaCase {
    /// Free nodes reach dual 0; the matching is optimal.
    FreeNode,
    /// An edge to an unreached node becomes tight.
    Reach,
    /// An edge between two outer nodes becomes tight.
    Join,
    /// A blossom's dual reaches 0 and it is dissolved.
    Dissolve,
}

impl DeltaCase {
    fn index(self) -> usize {
        match self {
            DeltaCase::FreeNode => 0,
            DeltaCase::Reach => 1,
            DeltaCase::Join => 2,
            DeltaCase::Dissolve => 3,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WeightedStats {
    pub augmentations: usize,
    pub search_steps: usize,
    pub dual_changes: usize,
    /// Dual changes between consecutive augmentations, in order. The last
    /// entry covers the changes after the final augmentation.
    pub dual_changes_per_round: Vec<usize>,
    /// Dual changes by case, indexed free node, reach, join, dissolve.
    pub cases: [usize; 4],
    pub zero_changes: usize,
    pub blossoms_created: usize,
    pub blossoms_dissolved: usize,
    pub jumps_expanded: usize,
    pub queue_rebuilds: usize,
}

impl WeightedStats {
    pub fn max_round_changes(&self) -> usize {
        self.dual_changes_per_round.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Clone, Debug)]
pub struct WeightedSolution {
    pub matching: Matching,
    pub duals: DualState,
    pub stats: WeightedStats,
}

/// Labels reached by the last search step that found no path.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Forest {
    /// `A`-labels in the expanded search tree, ascending.
    pub a_t: Vec<usize>,
    /// `B`-labels whose node weight decreases, ascending.
    pub b_t: Vec<usize>,
    /// `B`-labels reached inside blossoms entered through a jump. The
    /// redirect never enters such a blossom, so this stays empty.
    pub b_f: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Augmented,
    Extended { deltahat: u64, case: DeltaCase },
    Optimal,
}

/// Initial duals: every node gets `pihat = W`, the largest edge weight.
pub fn init_duals(g: &Graph) -> Result<DualState, WeightedError> {
    if let Some(e) = g.edges().iter().find(|e| e.w == 0) {
        return Err(WeightedError::ZeroWeight { u: e.u, v: e.v });
    }
    let w = g.max_weight();
    let mut pihat = vec![w; g.n() + 1];
    pihat[0] = 0;
    Ok(DualState { pihat, blossoms: Vec::new() })
}

/// `rhat(e) = pihat(u) + pihat(v) + Σ muhat over blossoms holding both ends - 2w`.
pub fn reduced_cost(g: &Graph, duals: &DualState, e: usize) -> i128 {
    let edge = g.edge(e);
    let mut d = duals.pihat[edge.u] as i128 + duals.pihat[edge.v] as i128;
    for b in &duals.blossoms {
        if b.nodes.binary_search(&edge.u).is_ok() && b.nodes.binary_search(&edge.v).is_ok() {
            d += b.muhat as i128;
        }
    }
    d - 2 * edge.w as i128
}

/// `G*_M`: the arcs of `G_M` whose edge has reduced cost 0, plus all
/// `s`/`t` arcs.
pub fn equality_subgraph(
    g: &Graph,
    m: &Matching,
    duals: &DualState,
) -> Result<DirectedMatchingGraph, WeightedError> {
    let mut tight = Graph::new(g.n());
    let mut matched = Vec::new();
    for (e, edge) in g.edges().iter().enumerate() {
        let r = reduced_cost(g, duals, e);
        if r < 0 {
            return Err(internal(format!("edge {}-{} has reduced cost {r}", edge.u, edge.v)));
        }
        if m.contains_edge(g, e) && r != 0 {
            return Err(internal(format!("matched edge {}-{} is not tight", edge.u, edge.v)));
        }
        if r == 0 {
            let id = tight.add_edge(edge.u, edge.v, edge.w).map_err(|e| internal(e.to_string()))?;
            if m.contains_edge(g, e) {
                matched.push(id);
            }
        }
    }
    let tm = validate_matching(&tight, &matched).map_err(|e| internal(e.to_string()))?;
    Ok(DirectedMatchingGraph::build(&tight, &tm))
}

/// Maximum-weight matching with its dual certificate.
pub fn solve_weighted(g: &Graph) -> Result<WeightedSolution, WeightedError> {
    let mut solver = WeightedSolver::new(g)?;
    while solver.step()? != StepOutcome::Optimal {}
    solver.into_solution()
}

#[derive(Clone, Debug)]
struct Blossom {
    nodes: Vec<usize>,
    base: usize,
    muhat: i64,
    parent: usize,
    children: Vec<usize>,
    tokens: Vec<UnionToken>,
    alive: bool,
}

/// Priority queues of one stage (the stretch between two augmentations).
#[derive(Clone, Debug)]
struct Stage {
    delta1: i64,
    delta2: i64,
    // Per target node j: the cheapest edges from an outer node into j.
    p1: BinaryHeap<Reverse<(i64, usize, u32)>>,
    p1_key: Vec<i64>,
    p1_edges: Vec<Vec<usize>>,
    p1_ver: Vec<u32>,
    p2: BinaryHeap<Reverse<(i64, usize)>>,
    p3: BinaryHeap<Reverse<(i64, usize, u32)>>,
    p3_ver: Vec<u32>,
    prev_s: Vec<bool>,
    prev_t: Vec<bool>,
    prev_inner: Vec<bool>,
    fresh: bool,
}

impl Stage {
    fn new(n: usize) -> Self {
        Stage {
            delta1: 0,
            delta2: 0,
            p1: BinaryHeap::new(),
            p1_key: vec![i64::MAX; n + 1],
            p1_edges: vec![Vec::new(); n + 1],
            p1_ver: vec![0; n + 1],
            p2: BinaryHeap::new(),
            p3: BinaryHeap::new(),
            p3_ver: Vec::new(),
            prev_s: vec![false; n + 1],
            prev_t: vec![false; n + 1],
            prev_inner: Vec::new(),
            fresh: true,
        }
    }

    fn reset(&mut self) {
        let n = self.p1_key.len() - 1;
        let p3_ver = std::mem::take(&mut self.p3_ver);
        *self = Stage::new(n);
        self.p3_ver = p3_ver;
    }

    fn offer(&mut self, j: usize, e: usize, key: i64) {
        if key < self.p1_key[j] {
            self.p1_key[j] = key;
            self.p1_edges[j].clear();
            self.p1_edges[j].push(e);
            self.p1_ver[j] += 1;
            self.p1.push(Reverse((key, j, self.p1_ver[j])));
        } else if key == self.p1_key[j] {
            self.p1_edges[j].push(e);
        }
    }

    fn drop_target(&mut self, j: usize) {
        self.p1_key[j] = i64::MAX;
        self.p1_edges[j].clear();
        self.p1_ver[j] += 1;
    }
}

/// What the last failed search reached, at node level.
struct Classes {
    s: Vec<bool>,
    t: Vec<bool>,
    /// Index into `current` of the outermost current blossom per node.
    cur: Vec<usize>,
    current: Vec<Vec<usize>>,
    inner: Vec<usize>,
    inner_flag: Vec<bool>,
}

impl Classes {
    fn common(&self, u: usize, v: usize) -> bool {
        self.cur[u] != NONE && self.cur[u] == self.cur[v]
    }

    fn target(&self, j: usize) -> bool {
        !self.s[j] && !self.t[j]
    }
}

struct Explored {
    pushed: Vec<bool>,
    sets: Vec<(usize, Vec<usize>)>,
}

/// Maps the nodes of a search instance to graph nodes. The top-level
/// search uses the identity; blossom-internal searches use a renumbering
/// plus one extra node that maps to `NONE`.
struct NodeMap {
    global: Vec<usize>,
    local: HashMap<usize, usize>,
    ceiling: usize,
}

impl NodeMap {
    fn identity() -> Self {
        NodeMap { global: Vec::new(), local: HashMap::new(), ceiling: NONE }
    }

    fn to_global(&self, v: usize) -> usize {
        if self.global.is_empty() {
            v
        } else {
            self.global[v]
        }
    }

    fn to_local(&self, v: usize) -> usize {
        if self.global.is_empty() {
            v
        } else {
            self.local[&v]
        }
    }
}

struct JumpView<'a, 'g> {
    solver: &'a WeightedSolver<'g>,
    tight: Vec<bool>,
    map: &'a NodeMap,
}

impl SearchView for JumpView<'_, '_> {
    fn enabled(&self, arc: usize) -> bool {
        self.tight[arc]
    }

    fn redirect(&self, tail: usize, head: usize) -> usize {
        if tail == SOURCE || head == TARGET || !is_a(head) {
            return head;
        }
        let v = self.map.to_global(node_of(head));
        if v == NONE {
            return head;
        }
        let x = self.map.to_global(node_of(tail));
        match self.solver.jump_blossom(x, v, self.map.ceiling) {
            NONE => head,
            b => label_a(self.map.to_local(self.solver.blossoms[b].base)),
        }
    }
}

/// Stepwise primal-dual solver.
pub struct WeightedSolver<'g> {
    g: &'g Graph,
    m: Matching,
    pihat: Vec<i64>,
    blossoms: Vec<Blossom>,
    // Innermost blossom holding each node.
    inner: Vec<usize>,
    // Live sets are the maximal blossoms and the nodes outside all blossoms.
    family: DisjointSets<usize>,
    gm: DirectedMatchingGraph,
    rhat: Vec<i64>,
    stage: Stage,
    forest: Forest,
    stats: WeightedStats,
    jumps: Cell<usize>,
    round_changes: usize,
    done: bool,
}

impl<'g> WeightedSolver<'g> {
    pub fn new(g: &'g Graph) -> Result<Self, WeightedError> {
        let init = init_duals(g)?;
        let n = g.n();
        let mut family = DisjointSets::new(n + 1);
        for v in 1..=n {
            family.make_set(v, NONE).expect("fresh element");
        }
        let m = Matching::empty(n);
        let gm = DirectedMatchingGraph::build(g, &m);
        Ok(WeightedSolver {
            g,
            m,
            pihat: init.pihat.iter().map(|&p| p as i64).collect(),
            blossoms: Vec::new(),
            inner: vec![NONE; n + 1],
            family,
            gm,
            rhat: vec![0; g.m()],
            stage: Stage::new(n),
            forest: Forest::default(),
            stats: WeightedStats::default(),
            jumps: Cell::new(0),
            round_changes: 0,
            done: false,
        })
    }

    pub fn matching(&self) -> &Matching {
        &self.m
    }

    pub fn pihat(&self) -> &[i64] {
        &self.pihat
    }

    /// Sets reached by the most recent search step that found no path.
    pub fn forest(&self) -> &Forest {
        &self.forest
    }

    pub fn stats(&self) -> WeightedStats {
        let mut s = self.stats.clone();
        s.jumps_expanded = self.jumps.get();
        s
    }

    /// Current duals; blossoms with zero dual are left out.
    pub fn duals(&self) -> Result<DualState, WeightedError> {
        let mut pihat = Vec::with_capacity(self.pihat.len());
        for (v, &p) in self.pihat.iter().enumerate() {
            pihat.push(u64::try_from(p).map_err(|_| internal(format!("node {v} has dual {p}")))?);
        }
        let mut blossoms: Vec<BlossomDual> = self
            .blossoms
            .iter()
            .filter(|b| b.alive && b.muhat > 0)
            .map(|b| BlossomDual { base: b.base, muhat: b.muhat as u64, nodes: b.nodes.clone() })
            .collect();
        blossoms.sort_by(|a, b| (a.nodes.len(), &a.nodes).cmp(&(b.nodes.len(), &b.nodes)));
        Ok(DualState { pihat, blossoms })
    }

    pub fn into_solution(mut self) -> Result<WeightedSolution, WeightedError> {
        if !self.done {
            return Err(internal("solver stopped before reaching optimality"));
        }
        self.stats.dual_changes_per_round.push(self.round_changes);
        self.round_changes = 0;
        let duals = self.duals()?;
        let stats = self.stats();
        Ok(WeightedSolution { matching: self.m, duals, stats })
    }

    /// One search step, followed by an augmentation or a dual change.
    pub fn step(&mut self) -> Result<StepOutcome, WeightedError> {
        if self.done {
            return Ok(StepOutcome::Optimal);
        }
        let free: Vec<usize> = self.g.nodes().filter(|&v| self.m.is_free(v)).collect();
        if free.is_empty() || self.pihat[free[0]] == 0 {
            self.done = true;
            return Ok(StepOutcome::Optimal);
        }
        self.refresh_rhat()?;
        self.stats.search_steps += 1;
        match self.search()? {
            Ok(path) => {
                self.augment(path)?;
                Ok(StepOutcome::Augmented)
            }
            Err(explored) => self.extend(explored, free[0]),
        }
    }

    fn top(&self, v: usize) -> usize {
        *self.family.payload(self.family.find_fast(v))
    }

    fn contains(&self, b: usize, x: usize) -> bool {
        let mut c = self.inner[x];
        while c != NONE {
            if c == b {
                return true;
            }
            c = self.blossoms[c].parent;
        }
        false
    }

    /// Largest blossom strictly below `ceiling` that holds `v` but not `x`.
    fn jump_blossom(&self, x: usize, v: usize, ceiling: usize) -> usize {
        let mut best = NONE;
        let mut b = self.inner[v];
        while b != NONE && b != ceiling {
            if x != NONE && self.contains(b, x) {
                break;
            }
            best = b;
            b = self.blossoms[b].parent;
        }
        best
    }

    fn common_mu(&self, u: usize, v: usize) -> i64 {
        if self.inner[u] == NONE || self.inner[v] == NONE {
            return 0;
        }
        let mut b = self.inner[u];
        while b != NONE && !self.contains(b, v) {
            b = self.blossoms[b].parent;
        }
        let mut sum = 0;
        while b != NONE {
            sum += self.blossoms[b].muhat;
            b = self.blossoms[b].parent;
        }
        sum
    }

    fn refresh_rhat(&mut self) -> Result<(), WeightedError> {
        let mut rhat = std::mem::take(&mut self.rhat);
        for (e, edge) in self.g.edges().iter().enumerate() {
            let r = self.pihat[edge.u] + self.pihat[edge.v] + self.common_mu(edge.u, edge.v)
                - 2 * edge.w as i64;
            if r < 0 {
                return Err(internal(format!("edge {}-{} has reduced cost {r}", edge.u, edge.v)));
            }
            if r != 0 && self.m.mate_edge(edge.u) == Some(e) {
                return Err(internal(format!("matched edge {}-{} is not tight", edge.u, edge.v)));
            }
            rhat[e] = r;
        }
        self.rhat = rhat;
        Ok(())
    }

    fn search(&self) -> Result<Result<Vec<usize>, Explored>, WeightedError> {
        let map = NodeMap::identity();
        let tight = (0..self.gm.arc_count())
            .map(|a| match self.gm.arc_origin(a) {
                ArcOrigin::Edge(e) => self.rhat[e] == 0,
                _ => true,
            })
            .collect();
        let mut mdfs = Mdfs::new(&self.gm, JumpView { solver: self, tight, map: &map });
        match mdfs.run() {
            Some(p) => Ok(Ok(self.expand(&self.gm, &mdfs, &p, &map)?)),
            None => {
                let pushed = (0..self.gm.label_count()).map(|l| mdfs.is_pushed(l)).collect();
                Ok(Err(Explored { pushed, sets: mdfs.current_sets() }))
            }
        }
    }

    /// Node sequence of a found path with every jump replaced by the walk
    /// through the blossom it skipped. The extra node of an inner search
    /// comes out as `NONE`.
    fn expand(
        &self,
        gm: &DirectedMatchingGraph,
        mdfs: &Mdfs<JumpView>,
        p: &DirectedPath,
        map: &NodeMap,
    ) -> Result<Vec<usize>, WeightedError> {
        let labels = p.labels();
        let tight = &mdfs.view().tight;
        let mut out = Vec::with_capacity(labels.len());
        for i in 1..labels.len() - 1 {
            let h = labels[i];
            let x = labels[i - 1];
            let direct = gm.out_arcs(x).iter().any(|&a| gm.arc_head(a) == h && tight[a]);
            if x != SOURCE && is_b(x) && is_a(h) && !direct {
                let raw = mdfs
                    .redirect_origin(x, h)
                    .ok_or_else(|| internal("path uses an arc the search never took"))?;
                let v = map.to_global(node_of(raw));
                let b = self.jump_blossom(map.to_global(node_of(x)), v, map.ceiling);
                if b == NONE || self.blossoms[b].base != map.to_global(node_of(h)) {
                    return Err(internal("jump does not end at the blossom base"));
                }
                out.extend(self.blossom_path(b, v)?);
                self.jumps.set(self.jumps.get() + 1);
            } else {
                out.push(map.to_global(node_of(h)));
            }
        }
        Ok(out)
    }

    /// Even alternating path `v, mate(v), ..., base` inside blossom `b`,
    /// over tight edges and respecting the blossoms nested in `b`.
    fn blossom_path(&self, b: usize, v: usize) -> Result<Vec<usize>, WeightedError> {
        let bl = &self.blossoms[b];
        if v == bl.base {
            return Ok(vec![v]);
        }
        let k = bl.nodes.len();
        let mut global = vec![NONE; k + 2];
        let mut local = HashMap::with_capacity(k);
        for (i, &u) in bl.nodes.iter().enumerate() {
            global[i + 1] = u;
            local.insert(u, i + 1);
        }
        // The extra node k+1 hangs off v, so a path from the base to it
        // must end with v's matched edge followed by the edge to it.
        let mut edges = Vec::new();
        let mut matched = Vec::new();
        for &u in &bl.nodes {
            for &(w, e) in self.g.adj(u) {
                if u < w && self.rhat[e] == 0 {
                    if let Some(&lw) = local.get(&w) {
                        if self.m.mate_edge(u) == Some(e) {
                            matched.push(edges.len());
                        }
                        edges.push((local[&u], lw, 1));
                    }
                }
            }
        }
        edges.push((local[&v], k + 1, 1));
        let sub = Graph::from_edges(k + 1, &edges).map_err(|e| internal(e.to_string()))?;
        let sm = validate_matching(&sub, &matched).map_err(|e| internal(e.to_string()))?;
        let sgm = DirectedMatchingGraph::build(&sub, &sm);
        let map = NodeMap { global, local, ceiling: b };
        let tight = vec![true; sgm.arc_count()];
        let mut mdfs = Mdfs::new(&sgm, JumpView { solver: self, tight, map: &map });
        let p = mdfs
            .run()
            .ok_or_else(|| internal(format!("no walk from node {v} to the base of its blossom")))?;
        let mut nodes = self.expand(&sgm, &mdfs, &p, &map)?;
        if nodes.first() == Some(&NONE) {
            nodes.remove(0);
        } else if nodes.last() == Some(&NONE) {
            nodes.pop();
            nodes.reverse();
        } else {
            return Err(internal("blossom walk misses the extra node"));
        }
        if nodes.first() != Some(&v) || nodes.last() != Some(&bl.base) {
            return Err(internal("blossom walk has wrong endpoints"));
        }
        Ok(nodes)
    }

    fn augment(&mut self, nodes: Vec<usize>) -> Result<(), WeightedError> {
        let path = AlternatingPath::new(nodes);
        check_augmenting(self.g, &self.m, &path).map_err(|e| internal(e.to_string()))?;
        for pair in path.nodes.windows(2) {
            let e = self.g.edge_index(pair[0], pair[1]).expect("checked above");
            if self.rhat[e] != 0 {
                return Err(internal("augmenting path uses a non-tight edge"));
            }
        }
        self.m.flip_path(self.g, &path.nodes);
        self.stats.augmentations += 1;
        self.stats.dual_changes_per_round.push(self.round_changes);
        self.round_changes = 0;
        let mut zero: Vec<usize> = (0..self.blossoms.len())
            .filter(|&b| {
                let bl = &self.blossoms[b];
                bl.alive && bl.parent == NONE && bl.muhat == 0
            })
            .collect();
        while let Some(b) = zero.pop() {
            for c in self.dissolve(b)? {
                if self.blossoms[c].muhat == 0 {
                    zero.push(c);
                }
            }
        }
        for b in 0..self.blossoms.len() {
            if self.blossoms[b].alive {
                self.blossoms[b].base = self.find_base(b, None)?;
            }
        }
        self.gm = DirectedMatchingGraph::build(self.g, &self.m);
        self.stage.reset();
        Ok(())
    }

    /// The one node of `b` not matched inside `b`. `members` marks the
    /// node set when `b` is not registered yet.
    fn find_base(&self, b: usize, members: Option<&[bool]>) -> Result<usize, WeightedError> {
        let inside = |u: usize| match members {
            Some(mark) => mark[u],
            None => self.contains(b, u),
        };
        let mut base = NONE;
        for &u in &self.blossoms[b].nodes {
            if self.m.mate(u).is_none_or(|w| !inside(w)) {
                if base != NONE {
                    return Err(internal(format!("blossom {b} has two nodes matched outside it")));
                }
                base = u;
            }
        }
        if base == NONE {
            return Err(internal(format!("blossom {b} has no base")));
        }
        Ok(base)
    }

    fn create_blossom(&mut self, nodes: Vec<usize>, muhat: i64) -> Result<usize, WeightedError> {
        if nodes.len() < 3 || nodes.len().is_multiple_of(2) {
            return Err(internal(format!("blossom with {} nodes", nodes.len())));
        }
        let id = self.blossoms.len();
        let mut mark = vec![false; self.g.n() + 1];
        for &u in &nodes {
            mark[u] = true;
        }
        let mut parts = Vec::new();
        let mut seen = HashMap::new();
        for &u in &nodes {
            let s = self.family.find_fast(u);
            if seen.insert(s, ()).is_none() {
                parts.push(s);
            }
        }
        let children: Vec<usize> =
            parts.iter().map(|&s| *self.family.payload(s)).filter(|&c| c != NONE).collect();
        let mut tokens = Vec::with_capacity(parts.len());
        let mut cur = parts[0];
        for &p in &parts[1..] {
            let (w, tok) = self.family.union(cur, p, id).map_err(|e| internal(e.to_string()))?;
            cur = w;
            tokens.push(tok);
        }
        for &c in &children {
            self.blossoms[c].parent = id;
        }
        for &u in &nodes {
            if self.inner[u] == NONE {
                self.inner[u] = id;
            }
        }
        self.blossoms.push(Blossom {
            nodes,
            base: NONE,
            muhat,
            parent: NONE,
            children,
            tokens,
            alive: true,
        });
        self.blossoms[id].base = self.find_base(id, Some(&mark))?;
        self.stats.blossoms_created += 1;
        Ok(id)
    }

    /// Removes maximal blossom `b` and returns its children, which become
    /// maximal.
    fn dissolve(&mut self, b: usize) -> Result<Vec<usize>, WeightedError> {
        let tokens = std::mem::take(&mut self.blossoms[b].tokens);
        for tok in tokens.into_iter().rev() {
            self.family.deunion(tok).map_err(|e| internal(e.to_string()))?;
        }
        let children = std::mem::take(&mut self.blossoms[b].children);
        for &c in &children {
            self.blossoms[c].parent = NONE;
        }
        for i in 0..self.blossoms[b].nodes.len() {
            let u = self.blossoms[b].nodes[i];
            if self.inner[u] == b {
                self.inner[u] = NONE;
            }
        }
        self.blossoms[b].alive = false;
        self.stats.blossoms_dissolved += 1;
        Ok(children)
    }

    fn classify(&self, ex: &Explored) -> Result<Classes, WeightedError> {
        let n = self.g.n();
        let pushed = &ex.pushed;
        let mut outer = Vec::new();
        let mut inner = Vec::new();
        let mut inner_flag = vec![false; self.blossoms.len()];
        for (b, bl) in self.blossoms.iter().enumerate() {
            if !bl.alive || bl.parent != NONE {
                continue;
            }
            if pushed[label_b(bl.base)] {
                outer.push(b);
            } else if pushed[label_a(bl.base)] {
                inner.push(b);
                inner_flag[b] = true;
            }
        }
        // Sets found by this search, widened to whole blossoms of the family.
        let mut cands: Vec<Vec<usize>> = Vec::new();
        let mut mark = vec![false; n + 1];
        for (base, members) in &ex.sets {
            let q = node_of(*base);
            if !pushed[label_b(q)] {
                return Err(internal(format!("set based at {q}A without {q}B reached")));
            }
            let mut set = Vec::new();
            for u in std::iter::once(q).chain(members.iter().map(|&l| node_of(l))) {
                let t = self.top(u);
                let add: &[usize] = if t == NONE { std::slice::from_ref(&u) } else { &self.blossoms[t].nodes };
                for &w in add {
                    if !mark[w] {
                        mark[w] = true;
                        set.push(w);
                    }
                }
            }
            for &w in &set {
                mark[w] = false;
            }
            set.sort_unstable();
            cands.push(set);
        }
        for &b in &outer {
            cands.push(self.blossoms[b].nodes.clone());
        }
        cands.sort_by_key(|c| Reverse(c.len()));
        let mut cur = vec![NONE; n + 1];
        let mut current: Vec<Vec<usize>> = Vec::new();
        for c in cands {
            let first = cur[c[0]];
            if first != NONE {
                if c.iter().all(|&u| cur[u] == first) {
                    continue;
                }
                return Err(internal("current blossoms overlap"));
            }
            if c.iter().any(|&u| cur[u] != NONE) {
                return Err(internal("current blossoms overlap"));
            }
            for &u in &c {
                cur[u] = current.len();
            }
            current.push(c);
        }
        let mut s = vec![false; n + 1];
        let mut t = vec![false; n + 1];
        for v in 1..=n {
            s[v] = pushed[label_b(v)] || cur[v] != NONE;
        }
        for &b in &inner {
            for &u in &self.blossoms[b].nodes {
                if s[u] {
                    return Err(internal(format!("node {u} is both outer and inner")));
                }
                t[u] = true;
            }
        }
        for v in 1..=n {
            if !s[v] && pushed[label_a(v)] {
                t[v] = true;
            }
        }
        Ok(Classes { s, t, cur, current, inner, inner_flag })
    }

    fn update_queues(&mut self, cl: &Classes) -> Result<(), WeightedError> {
        let n = self.g.n();
        let st = &mut self.stage;
        st.prev_inner.resize(self.blossoms.len(), false);
        st.p3_ver.resize(self.blossoms.len(), 0);
        let shrunk = !st.fresh
            && (1..=n).any(|v| {
                (st.prev_s[v] && !cl.s[v]) || ((st.prev_s[v] || st.prev_t[v]) && cl.target(v))
            });
        let rebuild = st.fresh || shrunk;
        if shrunk {
            self.stats.queue_rebuilds += 1;
        }
        let join = |e: usize, r: i64, st: &mut Stage| -> Result<(), WeightedError> {
            if r == 0 {
                return Err(internal(format!("tight edge {e} joins two outer nodes outside any blossom")));
            }
            st.p2.push(Reverse((r + st.delta2, e)));
            Ok(())
        };
        if rebuild {
            st.p1.clear();
            st.p2.clear();
            for j in 1..=n {
                st.drop_target(j);
            }
            for (e, edge) in self.g.edges().iter().enumerate() {
                let (u, v, r) = (edge.u, edge.v, self.rhat[e]);
                if cl.s[u] && cl.s[v] {
                    if !cl.common(u, v) {
                        join(e, r, st)?;
                    }
                } else if cl.s[u] && cl.target(v) {
                    st.offer(v, e, r + st.delta1);
                } else if cl.s[v] && cl.target(u) {
                    st.offer(u, e, r + st.delta1);
                }
            }
        } else {
            for j in 1..=n {
                if !(st.prev_s[j] || st.prev_t[j]) && !cl.target(j) {
                    st.drop_target(j);
                }
            }
            for i in 1..=n {
                if !cl.s[i] || st.prev_s[i] {
                    continue;
                }
                for &(j, e) in self.g.adj(i) {
                    let r = self.rhat[e];
                    if cl.s[j] {
                        if (st.prev_s[j] || i < j) && !cl.common(i, j) {
                            join(e, r, st)?;
                        }
                    } else if cl.target(j) {
                        st.offer(j, e, r + st.delta1);
                    }
                }
            }
        }
        for &b in &cl.inner {
            if rebuild || !st.prev_inner[b] {
                st.p3_ver[b] += 1;
                st.p3.push(Reverse((self.blossoms[b].muhat + st.delta2, b, st.p3_ver[b])));
            }
        }
        st.prev_s.clone_from(&cl.s);
        st.prev_t.clone_from(&cl.t);
        st.prev_inner.clone_from(&cl.inner_flag);
        st.fresh = false;
        Ok(())
    }

    /// Minima over the queues, as `(reach, join, dissolve)` in doubled units.
    fn queue_minima(&mut self, cl: &Classes) -> (Option<i64>, Option<i64>, Option<i64>) {
        let st = &mut self.stage;
        let mut d1 = None;
        while let Some(&Reverse((key, j, ver))) = st.p1.peek() {
            if ver == st.p1_ver[j] && cl.target(j) {
                d1 = Some(key - st.delta1);
                break;
            }
            st.p1.pop();
        }
        let mut d2 = None;
        while let Some(&Reverse((key, e))) = st.p2.peek() {
            let edge = self.g.edge(e);
            if !cl.common(edge.u, edge.v) {
                d2 = Some(key - st.delta2);
                break;
            }
            st.p2.pop();
        }
        let mut d3 = None;
        while let Some(&Reverse((key, b, ver))) = st.p3.peek() {
            let bl = &self.blossoms[b];
            if ver == st.p3_ver[b] && bl.alive && bl.parent == NONE && cl.inner_flag[b] {
                d3 = Some(key - st.delta2);
                break;
            }
            st.p3.pop();
        }
        (d1, d2, d3)
    }

    fn scan_minima(&self, cl: &Classes) -> (Option<i64>, Option<i64>, Option<i64>) {
        let mut d1: Option<i64> = None;
        let mut d2: Option<i64> = None;
        for (e, edge) in self.g.edges().iter().enumerate() {
            let (u, v, r) = (edge.u, edge.v, self.rhat[e]);
            if cl.s[u] && cl.s[v] {
                if !cl.common(u, v) && r > 0 {
                    d2 = Some(d2.map_or(r, |d| d.min(r)));
                }
            } else if (cl.s[u] && cl.target(v)) || (cl.s[v] && cl.target(u)) {
                d1 = Some(d1.map_or(r, |d| d.min(r)));
            }
        }
        let d3 = cl.inner.iter().map(|&b| self.blossoms[b].muhat).min();
        (d1, d2, d3)
    }

    fn extend(&mut self, ex: Explored, free: usize) -> Result<StepOutcome, WeightedError> {
        let cl = self.classify(&ex)?;
        let n = self.g.n();
        self.forest = Forest {
            a_t: (1..=n).filter(|&v| ex.pushed[label_a(v)]).map(label_a).collect(),
            b_t: (1..=n).filter(|&v| cl.s[v]).map(label_b).collect(),
            b_f: Vec::new(),
        };
        self.update_queues(&cl)?;
        let (d1, d2, d3) = self.queue_minima(&cl);
        if cfg!(debug_assertions) {
            let scanned = self.scan_minima(&cl);
            if scanned != (d1, d2, d3) {
                return Err(internal(format!(
                    "queue minima {:?} differ from a full scan {:?}",
                    (d1, d2, d3),
                    scanned
                )));
            }
        }
        if d2.is_some_and(|d| d % 2 != 0) {
            return Err(internal("odd reduced cost between two outer nodes"));
        }
        let mut best = (self.pihat[free], DeltaCase::FreeNode);
        for (d, case) in [
            (d1, DeltaCase::Reach),
            (d2.map(|d| d / 2), DeltaCase::Join),
            (d3.map(|d| d / 2), DeltaCase::Dissolve),
        ] {
            if let Some(d) = d {
                if d < best.0 {
                    best = (d, case);
                }
            }
        }
        let (delta, case) = best;
        self.apply(&cl, delta)?;
        self.stats.dual_changes += 1;
        self.stats.cases[case.index()] += 1;
        if delta == 0 {
            self.stats.zero_changes += 1;
        }
        self.round_changes += 1;
        let limit = 3 * n.max(1);
        if self.round_changes > limit {
            return Err(WeightedError::BudgetExceeded { changes: self.round_changes, limit });
        }
        if case == DeltaCase::FreeNode {
            self.done = true;
        }
        Ok(StepOutcome::Extended { deltahat: delta as u64, case })
    }

    fn apply(&mut self, cl: &Classes, delta: i64) -> Result<(), WeightedError> {
        let n = self.g.n();
        for v in 1..=n {
            if cl.s[v] {
                self.pihat[v] -= delta;
                if self.pihat[v] < 0 {
                    return Err(internal(format!("node {v} dual would become negative")));
                }
            } else if cl.t[v] {
                self.pihat[v] += delta;
            }
        }
        for c in &cl.current {
            let t = self.top(c[0]);
            let existing = t != NONE
                && self.blossoms[t].nodes.len() == c.len()
                && c.iter().all(|&u| self.top(u) == t);
            if existing {
                self.blossoms[t].muhat += 2 * delta;
            } else {
                self.create_blossom(c.clone(), 2 * delta)?;
            }
        }
        for &b in &cl.inner {
            self.blossoms[b].muhat -= 2 * delta;
            match self.blossoms[b].muhat {
                0 => {
                    self.dissolve(b)?;
                }
                mu if mu < 0 => return Err(internal(format!("blossom {b} dual would become negative"))),
                _ => {}
            }
        }
        self.stage.delta1 += delta;
        self.stage.delta2 += 2 * delta;
        Ok(())
    }
}

/// Result of [`verify_certificate`]; empty `violations` means the matching
/// is proven to have maximum weight.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CertificateReport {
    pub violations: Vec<String>,
}

impl CertificateReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the optimality conditions for `m` under `duals` from scratch.
pub fn verify_certificate(g: &Graph, m: &Matching, duals: &DualState) -> CertificateReport {
    let mut out = Vec::new();
    let n = g.n();
    if duals.pihat.len() != n + 1 {
        out.push(format!("expected {} node duals, got {}", n, duals.pihat.len().saturating_sub(1)));
        return CertificateReport { violations: out };
    }
    for (i, b) in duals.blossoms.iter().enumerate() {
        let sorted = b.nodes.windows(2).all(|p| p[0] < p[1]);
        if !sorted || b.nodes.iter().any(|&u| u == 0 || u > n) {
            out.push(format!("blossom {i}: node list must be ascending ids in 1..={n}"));
        } else if b.nodes.len() < 3 || b.nodes.len() % 2 == 0 {
            out.push(format!("blossom {i}: {} nodes, need an odd count of at least 3", b.nodes.len()));
        }
    }
    if !out.is_empty() {
        return CertificateReport { violations: out };
    }
    for (e, edge) in g.edges().iter().enumerate() {
        let r = reduced_cost(g, duals, e);
        if r < 0 {
            out.push(format!("(a) edge {}-{}: reduced cost {r} < 0", edge.u, edge.v));
        }
        if m.contains_edge(g, e) && r != 0 {
            out.push(format!("(b) matched edge {}-{}: reduced cost {r} != 0", edge.u, edge.v));
        }
    }
    for v in 1..=n {
        if m.is_free(v) && duals.pihat[v] != 0 {
            out.push(format!("(c) free node {v}: dual {} != 0", duals.pihat[v]));
        }
    }
    let mut bound: i128 = duals.pihat.iter().map(|&p| p as i128).sum();
    for (i, b) in duals.blossoms.iter().enumerate() {
        let cap = (b.nodes.len() - 1) / 2;
        let inside = m
            .pairs()
            .iter()
            .filter(|(u, v)| b.nodes.binary_search(u).is_ok() && b.nodes.binary_search(v).is_ok())
            .count();
        if b.muhat > 0 && inside != cap {
            out.push(format!("(d) blossom {i}: {inside} matched edges inside, capacity {cap}"));
        }
        bound += cap as i128 * b.muhat as i128;
    }
    let twice = 2 * m.weight(g) as i128;
    if twice != bound {
        out.push(format!("(e) 2w(M) = {twice} but the dual objective is {bound}"));
    }
    CertificateReport { violations: out }
}

/// `pi <v> <2π>` per node, then `blossom <base> <2μ> <nodes...>` per set.
pub fn format_certificate(duals: &DualState) -> String {
    let mut out = String::new();
    for (v, p) in duals.pihat.iter().enumerate().skip(1) {
        let _ = writeln!(out, "pi {v} {p}");
    }
    for b in &duals.blossoms {
        let _ = write!(out, "blossom {} {}", b.base, b.muhat);
        for u in &b.nodes {
            let _ = write!(out, " {u}");
        }
        out.push('\n');
    }
    out
}

/// Reads [`format_certificate`] output for a graph on `n` nodes. Nodes
/// without a `pi` line get dual 0; `c` lines are comments.
pub fn parse_certificate(n: usize, text: &str) -> Result<DualState, WeightedError> {
    let mut pihat = vec![0u64; n + 1];
    let mut blossoms = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let bad = |msg: &str| WeightedError::Certificate { line: i + 1, msg: msg.to_string() };
        let mut tok = line.split_whitespace();
        let Some(kind) = tok.next() else { continue };
        let nums: Result<Vec<u64>, _> = tok.map(str::parse::<u64>).collect();
        let nums = match kind {
            "c" => continue,
            _ => nums.map_err(|_| bad("expected nonnegative integers"))?,
        };
        let node = |x: u64| -> Result<usize, WeightedError> {
            usize::try_from(x)
                .ok()
                .filter(|&v| (1..=n).contains(&v))
                .ok_or_else(|| bad("node id out of range"))
        };
        match kind {
            "pi" => {
                let [v, p] = nums[..] else { return Err(bad("expected `pi <node> <value>`")) };
                pihat[node(v)?] = p;
            }
            "blossom" => {
                if nums.len() < 3 {
                    return Err(bad("expected `blossom <base> <value> <nodes...>`"));
                }
                let mut nodes = nums[2..].iter().map(|&x| node(x)).collect::<Result<Vec<_>, _>>()?;
                nodes.sort_unstable();
                blossoms.push(BlossomDual { base: node(nums[0])?, muhat: nums[1], nodes });
            }
            _ => return Err(bad("unknown line kind")),
        }
    }
    Ok(DualState { pihat, blossoms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{brute_max_weight, gen_random};
    use crate::reduction::parse_label;
    use proptest::prelude::*;

    fn wg(n: usize, e: &[(usize, usize, u64)]) -> Graph {
        Graph::from_edges(n, e).unwrap()
    }

    fn labels(s: &str) -> Vec<usize> {
        s.split_whitespace().map(|t| parse_label(t).unwrap()).collect()
    }

    #[test]
    fn init_examples() {
        assert_eq!(init_duals(&wg(2, &[(1, 2, 6)])).unwrap().pihat, vec![0, 6, 6]);
        let p3 = wg(3, &[(1, 2, 5), (2, 3, 3)]);
        let d = init_duals(&p3).unwrap();
        assert_eq!(d.pihat, vec![0, 5, 5, 5]);
        assert_eq!(reduced_cost(&p3, &d, 0), 0);
        assert_eq!(reduced_cost(&p3, &d, 1), 4);
        assert!(matches!(
            init_duals(&wg(2, &[(1, 2, 0)])),
            Err(WeightedError::ZeroWeight { u: 1, v: 2 })
        ));
    }

    #[test]
    fn equality_subgraph_examples() {
        let p3 = wg(3, &[(1, 2, 5), (2, 3, 3)]);
        let d = init_duals(&p3).unwrap();
        let gs = equality_subgraph(&p3, &Matching::empty(3), &d).unwrap();
        assert_eq!(gs.arc_count(), 2 + 6);
        assert!(gs.has_arc(label_b(1), label_a(2)));
        assert!(!gs.has_arc(label_b(2), label_a(3)));

        let one = wg(2, &[(1, 2, 6)]);
        let m = validate_matching(&one, &[0]).unwrap();
        let gs = equality_subgraph(&one, &m, &init_duals(&one).unwrap()).unwrap();
        assert!(gs.succ(SOURCE).is_empty());

        let flat = wg(3, &[(1, 2, 4), (2, 3, 4), (1, 3, 4)]);
        let gs = equality_subgraph(&flat, &Matching::empty(3), &init_duals(&flat).unwrap()).unwrap();
        assert_eq!(gs.arc_count(), DirectedMatchingGraph::build(&flat, &Matching::empty(3)).arc_count());
    }

    #[test]
    fn single_edge_is_found_at_once() {
        let g = wg(2, &[(1, 2, 6)]);
        let mut s = WeightedSolver::new(&g).unwrap();
        assert_eq!(s.step().unwrap(), StepOutcome::Augmented);
        assert_eq!(s.step().unwrap(), StepOutcome::Optimal);
        let sol = s.into_solution().unwrap();
        assert_eq!(sol.matching.weight(&g), 6);
        assert_eq!(sol.duals.pihat, vec![0, 6, 6]);
        assert!(verify_certificate(&g, &sol.matching, &sol.duals).is_valid());
    }

    #[test]
    fn path_on_three_nodes_trace() {
        let g = wg(3, &[(1, 2, 5), (2, 3, 3)]);
        let mut s = WeightedSolver::new(&g).unwrap();
        assert_eq!(s.step().unwrap(), StepOutcome::Augmented);
        assert_eq!(s.matching().pairs(), vec![(1, 2)]);

        let out = s.step().unwrap();
        assert_eq!(out, StepOutcome::Extended { deltahat: 4, case: DeltaCase::Reach });
        assert_eq!(s.forest().b_t, labels("3B"));
        assert!(s.forest().a_t.is_empty());
        assert_eq!(s.pihat(), &[0, 5, 5, 1]);

        let out = s.step().unwrap();
        assert_eq!(out, StepOutcome::Extended { deltahat: 1, case: DeltaCase::FreeNode });
        assert_eq!(s.forest().b_t, labels("1B 3B"));
        assert_eq!(s.forest().a_t, labels("2A"));
        assert_eq!(s.pihat(), &[0, 4, 6, 0]);
        assert_eq!(s.step().unwrap(), StepOutcome::Optimal);

        let sol = s.into_solution().unwrap();
        assert_eq!(sol.matching.weight(&g), 5);
        assert!(verify_certificate(&g, &sol.matching, &sol.duals).is_valid());
    }

    #[test]
    fn small_weighted_examples() {
        let tri = wg(3, &[(1, 2, 3), (1, 3, 4), (2, 3, 5)]);
        assert_eq!(solve_weighted(&tri).unwrap().matching.weight(&tri), 5);
        let two = wg(4, &[(1, 2, 10), (3, 4, 10)]);
        assert_eq!(solve_weighted(&two).unwrap().matching.weight(&two), 20);
        let empty = Graph::new(3);
        let sol = solve_weighted(&empty).unwrap();
        assert!(sol.matching.is_empty());
        assert!(verify_certificate(&empty, &sol.matching, &sol.duals).is_valid());
    }

    #[test]
    fn blossom_duals_appear_in_the_certificate() {
        // Heavy triangle with a pendant edge: the optimum needs a blossom dual.
        let g = wg(4, &[(1, 2, 10), (2, 3, 10), (1, 3, 10), (3, 4, 2)]);
        let sol = solve_weighted(&g).unwrap();
        assert_eq!(sol.matching.weight(&g), brute_max_weight(&g).unwrap().1);
        assert!(verify_certificate(&g, &sol.matching, &sol.duals).is_valid());
    }

    #[test]
    fn tampered_certificates_fail() {
        let g = wg(2, &[(1, 2, 6)]);
        let sol = solve_weighted(&g).unwrap();
        let report = verify_certificate(&g, &Matching::empty(2), &sol.duals);
        assert!(!report.is_valid());
        assert!(report.violations.iter().any(|v| v.starts_with("(c)")));

        let mut low = sol.duals.clone();
        low.pihat[1] -= 1;
        assert!(!verify_certificate(&g, &sol.matching, &low).is_valid());

        let mut odd = sol.duals.clone();
        odd.blossoms.push(BlossomDual { base: 1, muhat: 2, nodes: vec![1, 2] });
        assert!(!verify_certificate(&g, &sol.matching, &odd).is_valid());
    }

    #[test]
    fn certificate_text_round_trips() {
        let g = wg(4, &[(1, 2, 10), (2, 3, 10), (1, 3, 10), (3, 4, 2)]);
        let sol = solve_weighted(&g).unwrap();
        let text = format_certificate(&sol.duals);
        assert_eq!(parse_certificate(4, &text).unwrap(), sol.duals);
        assert!(parse_certificate(4, "pi 9 1").is_err());
        assert!(parse_certificate(4, "pi 1").is_err());
        assert!(parse_certificate(4, "mu 1 2").is_err());
    }

    #[test]
    fn random_graphs_match_brute_force() {
        let mut cases = [0usize; 4];
        let mut jumps = 0;
        for seed in 0..400u64 {
            let n = 2 + (seed % 9) as usize;
            let m = (seed as usize * 7) % (n * (n - 1) / 2 + 1);
            let g = gen_random(n, m, seed, 20).unwrap();
            let sol = solve_weighted(&g).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
            assert_eq!(sol.matching.weight(&g), brute_max_weight(&g).unwrap().1, "seed {seed}");
            let report = verify_certificate(&g, &sol.matching, &sol.duals);
            assert!(report.is_valid(), "seed {seed}: {:?}", report.violations);
            assert!(sol.stats.max_round_changes() <= 3 * n);
            for (c, k) in cases.iter_mut().zip(sol.stats.cases) {
                *c += k;
            }
            jumps += sol.stats.jumps_expanded;
        }
        assert!(cases.iter().all(|&c| c > 0), "every case fires somewhere: {cases:?}");
        assert!(jumps > 0);
    }

    proptest! {
        #[test]
        fn optimal_with_valid_certificate(n in 2usize..9, density in 0.2f64..1.0, seed in 0u64..1_000_000) {
            let m = ((n * (n - 1) / 2) as f64 * density) as usize;
            let g = gen_random(n, m, seed, 20).unwrap();
            let sol = solve_weighted(&g).unwrap();
            prop_assert_eq!(sol.matching.weight(&g), brute_max_weight(&g).unwrap().1);
            prop_assert!(verify_certificate(&g, &sol.matching, &sol.duals).is_valid());
            prop_assert!(sol.stats.max_round_changes() <= 3 * n);
            prop_assert!(sol.duals.blossoms.iter().all(|b| b.muhat > 0 && b.nodes.len() % 2 == 1));
        }
    }
}
