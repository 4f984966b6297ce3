//! Modified depth-first search for strongly simple `s`-`t` paths in `G_M`.
//!
//! The search keeps the whole search tree with parent links; `POP` only
//! moves the top pointer. Deferred pushes of `A`-labels are driven by the
//! sets `L_[w,A]`, represented through disjoint sets over `A`-labels: a
//! label is in `L` once inserted, and `L_[w,A]` is the base of its current
//! set unless that base has been pushed.

use std::collections::{HashMap, VecDeque};

use crate::dsu::{DisjointSets, SetId};
use crate::reduction::{
    is_a, is_b, reverse_label, DirectedMatchingGraph, DirectedPath, LabeledNode, SOURCE,
    TARGET,
};

const NONE: usize = usize::MAX;

/// Restricts and reroutes the arcs a search may use.
pub trait SearchView {
    fn enabled(&self, _arc: usize) -> bool {
        true
    }

    fn alive(&self, _label: usize) -> bool {
        true
    }

    /// Label that the unmatched arc `tail -> head` is treated as entering.
    fn redirect(&self, _tail: usize, head: usize) -> usize {
        head
    }
}

/// Every arc of `G_M`, unchanged.
#[derive(Clone, Copy, Debug, Default)]
pub struct FullView;

impl SearchView for FullView {}

/// How an arc was classified when the search considered it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArcCase {
    /// Arc into a `B`-label (or into `t`).
    Matched,
    /// Head is on the stack.
    Back,
    /// Partner on the stack, head already pushed.
    Cross,
    /// Partner on the stack, head never pushed.
    WeakBack,
    /// Head pushed earlier and already popped.
    ForwardOrCross,
    /// Head reached for the first time.
    Tree,
}

impl ArcCase {
    pub fn name(self) -> &'static str {
        match self {
            ArcCase::Matched => "tree-matched",
            ArcCase::Back => "back",
            ArcCase::Cross => "cross",
            ArcCase::WeakBack => "weak-back",
            ArcCase::ForwardOrCross => "forward-or-cross",
            ArcCase::Tree => "tree",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MdfsStats {
    pub arcs_considered: usize,
    pub arcs_skipped: usize,
    pub matched: usize,
    pub back: usize,
    pub cross: usize,
    pub weak_back: usize,
    pub forward_or_cross: usize,
    pub tree: usize,
    pub pushes: usize,
    pub collects: usize,
    pub invariant_checks: usize,
    pub invariant_violations: usize,
}

impl MdfsStats {
    fn record(&mut self, case: ArcCase) {
        match case {
            ArcCase::Matched => self.matched += 1,
            ArcCase::Back => self.back += 1,
            ArcCase::Cross => self.cross += 1,
            ArcCase::WeakBack => self.weak_back += 1,
            ArcCase::ForwardOrCross => self.forward_or_cross += 1,
            ArcCase::Tree => self.tree += 1,
        }
    }

    /// Sum over the classification buckets.
    pub fn classified(&self) -> usize {
        self.matched + self.back + self.cross + self.weak_back + self.forward_or_cross + self.tree
    }
}

struct Frame {
    label: usize,
    next: usize,
    // Set while a deferred push from the arc at `next - 1` is being explored.
    retry: bool,
}

pub struct Mdfs<'g, V: SearchView = FullView> {
    gm: &'g DirectedMatchingGraph,
    view: V,
    parent: Vec<usize>,
    via: Vec<usize>,
    pushed: Vec<bool>,
    in_stack: Vec<bool>,
    e_sets: Vec<Vec<usize>>,
    r_sets: Vec<Vec<usize>>,
    p_rec: Vec<(usize, usize)>,
    // Labels considered by the backward search of collect number `epoch`.
    visited: Vec<u32>,
    epoch: u32,
    sets: DisjointSets<usize>,
    set_of_base: Vec<Option<SetId>>,
    // Per set: members holding arcs recorded after the set was completed.
    pending: Vec<Vec<usize>>,
    // Base of the collect in which a label joined L. Its B-label is a tree
    // ancestor of the label, unlike the base of a set merged later.
    orig: Vec<usize>,
    woken: Vec<usize>,
    frames: Vec<Frame>,
    redirected: HashMap<(usize, usize), usize>,
    deferred: Vec<(usize, usize)>,
    stats: MdfsStats,
    check_invariants: bool,
    trace: Option<Vec<String>>,
    started: bool,
}

/// Strongly simple `s`-`t` path in `gm`, if one exists.
pub fn find_augmenting_path(gm: &DirectedMatchingGraph) -> Option<DirectedPath> {
    Mdfs::new(gm, FullView).run()
}

impl<'g, V: SearchView> Mdfs<'g, V> {
    pub fn new(gm: &'g DirectedMatchingGraph, view: V) -> Self {
        let k = gm.label_count();
        Mdfs {
            gm,
            view,
            parent: vec![NONE; k],
            via: vec![NONE; k],
            pushed: vec![false; k],
            in_stack: vec![false; k],
            e_sets: vec![Vec::new(); k],
            r_sets: vec![Vec::new(); k],
            p_rec: vec![(NONE, NONE); k],
            visited: vec![0; k],
            epoch: 0,
            sets: DisjointSets::new(k),
            set_of_base: vec![None; k],
            pending: vec![Vec::new(); k],
            orig: vec![NONE; k],
            woken: Vec::new(),
            frames: Vec::new(),
            redirected: HashMap::new(),
            deferred: Vec::new(),
            stats: MdfsStats::default(),
            check_invariants: false,
            trace: None,
            started: false,
        }
    }

    /// Checks the `L`-set invariants at every pop (slow).
    pub fn with_invariant_checks(mut self) -> Self {
        self.check_invariants = true;
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn stats(&self) -> &MdfsStats {
        &self.stats
    }

    pub fn trace(&self) -> &[String] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn view(&self) -> &V {
        &self.view
    }

    pub fn view_mut(&mut self) -> &mut V {
        &mut self.view
    }

    pub fn into_view(self) -> V {
        self.view
    }

    pub fn graph(&self) -> &'g DirectedMatchingGraph {
        self.gm
    }

    pub fn is_pushed(&self, label: usize) -> bool {
        self.pushed[label]
    }

    pub fn tree_parent(&self, label: usize) -> Option<usize> {
        (self.parent[label] != NONE).then_some(self.parent[label])
    }

    /// The node-id-level original head of a redirected arc.
    pub fn redirect_origin(&self, tail: usize, head: usize) -> Option<usize> {
        self.redirected.get(&(tail, head)).copied()
    }

    /// `L_[w,A]`: the label a deferred push from `w` would reach.
    pub fn l_value(&self, w: usize) -> Option<usize> {
        if !self.sets.contains(w) {
            return None;
        }
        let base = *self.sets.payload(self.sets.find_fast(w));
        (!self.pushed[base] && self.view.alive(base)).then_some(base)
    }

    pub fn in_l(&self, w: usize) -> bool {
        self.sets.contains(w)
    }

    /// Current sets as `(base, members)`, bases ascending.
    pub fn current_sets(&self) -> Vec<(usize, Vec<usize>)> {
        let mut out: Vec<(usize, Vec<usize>)> = self
            .sets
            .live_sets()
            .map(|s| {
                let mut m = self.sets.members(s).to_vec();
                m.sort_unstable();
                (*self.sets.payload(s), m)
            })
            .collect();
        out.sort();
        out
    }

    fn event(&mut self, f: impl FnOnce() -> String) {
        if let Some(t) = self.trace.as_mut() {
            t.push(f());
        }
    }

    fn push(&mut self, label: usize, parent: usize, via: usize) {
        self.parent[label] = parent;
        self.via[label] = via;
        self.pushed[label] = true;
        self.in_stack[label] = true;
        self.frames.push(Frame { label, next: 0, retry: false });
        self.stats.pushes += 1;
        self.event(|| format!("push {}", LabeledNode::from_index(label)));
    }

    /// Continues the search. Returns the next path found, or `None` once the
    /// search from `s` is exhausted.
    pub fn run(&mut self) -> Option<DirectedPath> {
        if !self.started {
            self.started = true;
            self.push(SOURCE, NONE, NONE);
        }
        while let Some(frame) = self.frames.last_mut() {
            let x = frame.label;
            let arcs = self.gm.out_arcs(x);
            if frame.retry {
                // Re-examine the arc whose deferred push just returned.
                frame.retry = false;
                let a = arcs[frame.next - 1];
                let h = self.view.redirect(x, self.gm.arc_head(a));
                if let Some(u) = self.l_value(h) {
                    self.defer_push(x, h, u);
                }
                continue;
            }
            if frame.next == arcs.len() {
                self.finish_frame(x);
                continue;
            }
            let a = arcs[frame.next];
            frame.next += 1;
            let raw = self.gm.arc_head(a);
            if !self.view.enabled(a) || !self.view.alive(raw) {
                self.stats.arcs_skipped += 1;
                continue;
            }
            self.stats.arcs_considered += 1;
            if raw == TARGET {
                self.stats.record(ArcCase::Matched);
                self.push(TARGET, x, NONE);
                return self.reconstruct();
            }
            if is_b(raw) {
                if self.pushed[raw] {
                    self.stats.arcs_skipped += 1;
                    self.stats.arcs_considered -= 1;
                    continue;
                }
                self.classify(x, raw, ArcCase::Matched);
                self.push(raw, x, NONE);
                continue;
            }
            let h = self.view.redirect(x, raw);
            if h != raw {
                self.redirected.entry((x, h)).or_insert(raw);
                if !self.view.alive(h) {
                    continue;
                }
            }
            let hb = reverse_label(h);
            if self.in_stack[h] {
                self.classify(x, h, ArcCase::Back);
                self.e_sets[h].push(x);
            } else if self.in_stack[hb] {
                if self.pushed[h] {
                    self.classify(x, h, ArcCase::Cross);
                    self.e_sets[h].push(x);
                } else {
                    self.classify(x, h, ArcCase::WeakBack);
                    self.r_sets[h].push(x);
                }
            } else if self.pushed[h] {
                self.classify(x, h, ArcCase::ForwardOrCross);
                if let Some(u) = self.l_value(h) {
                    self.defer_push(x, h, u);
                } else if !self.in_l(h) {
                    self.e_sets[h].push(x);
                } else {
                    // The set's base is already pushed. Keep the arc so a
                    // later backward search that absorbs the set sees it.
                    self.e_sets[h].push(x);
                    let s = self.sets.find_fast(h).index();
                    self.pending[s].push(h);
                }
            } else {
                self.classify(x, h, ArcCase::Tree);
                self.push(h, x, NONE);
            }
        }
        None
    }

    fn classify(&mut self, x: usize, h: usize, case: ArcCase) {
        self.stats.record(case);
        self.event(|| {
            format!(
                "arc {} {} {}",
                LabeledNode::from_index(x),
                LabeledNode::from_index(h),
                case.name()
            )
        });
    }

    fn defer_push(&mut self, x: usize, w: usize, u: usize) {
        self.frames.last_mut().expect("caller frame").retry = true;
        self.event(|| {
            format!(
                "extend {} {} {}",
                LabeledNode::from_index(x),
                LabeledNode::from_index(w),
                LabeledNode::from_index(u)
            )
        });
        if self.check_invariants {
            self.deferred.push((w, u));
        }
        self.push(u, x, w);
    }

    fn finish_frame(&mut self, x: usize) {
        if x != SOURCE && is_b(x) && !self.pushed[reverse_label(x)] {
            self.collect(reverse_label(x), x);
        }
        self.frames.pop();
        self.in_stack[x] = false;
        self.event(|| format!("pop {}", LabeledNode::from_index(x)));
        if self.check_invariants {
            self.check_l_invariants();
        }
    }

    fn check_l_invariants(&mut self) {
        self.stats.invariant_checks += 1;
        let mut bad = 0;
        for &(w, u) in &self.deferred {
            if self.l_value(w) != self.l_value(u) {
                bad += 1;
            }
        }
        for s in self.sets.live_sets() {
            for &m in self.sets.members(s) {
                if self.sets.find_fast(m) != s || !is_a(m) {
                    bad += 1;
                }
            }
        }
        self.stats.invariant_violations += bad;
    }

    /// Backward search after popping `xb` with its partner `lcur` never
    /// pushed: collects every `A`-label with a found path to `lcur` that
    /// avoids `xb`.
    fn collect(&mut self, lcur: usize, xb: usize) {
        let starts = std::mem::take(&mut self.r_sets[lcur]);
        if starts.is_empty() {
            return;
        }
        self.stats.collects += 1;
        self.epoch += 1;
        self.event(|| format!("collect {}", LabeledNode::from_index(lcur)));
        let mut queue = VecDeque::new();
        for qb in starts {
            self.constrl(qb, lcur, xb, lcur, &mut queue);
            queue.extend(self.woken.drain(..));
        }
        while let Some(k) = queue.pop_front() {
            for qb in std::mem::take(&mut self.e_sets[k]) {
                self.constrl(qb, k, xb, lcur, &mut queue);
                queue.extend(self.woken.drain(..));
            }
        }
    }

    fn add_to_current(&mut self, lcur: usize, y: usize) {
        let single = self.sets.make_set(y, lcur).expect("label joins L once");
        self.orig[y] = lcur;
        self.merge_into_current(lcur, single);
    }

    fn merge_into_current(&mut self, lcur: usize, s: SetId) {
        if self.current_set(lcur) != Some(s) {
            let woken = std::mem::take(&mut self.pending[s.index()]);
            self.woken.extend(woken);
        }
        let merged = match self.current_set(lcur) {
            None => {
                *self.sets.payload_mut(s) = lcur;
                s
            }
            Some(cur) if cur == s => return,
            Some(cur) => self.sets.union(cur, s, lcur).expect("live sets").0,
        };
        self.set_of_base[lcur] = Some(merged);
    }

    fn current_set(&self, base: usize) -> Option<SetId> {
        self.set_of_base[base].filter(|&s| self.sets.is_live(s) && *self.sets.payload(s) == base)
    }

    fn constrl(&mut self, qb: usize, head: usize, xb: usize, lcur: usize, queue: &mut VecDeque<usize>) {
        let pcur = (qb, head);
        let mut z = qb;
        loop {
            if z == xb || z == SOURCE || z == NONE || self.visited[z] == self.epoch {
                return;
            }
            self.visited[z] = self.epoch;
            let mut y = self.parent[z];
            // Follow tree edges upwards through labels already in L.
            loop {
                if y == NONE || y == SOURCE {
                    return;
                }
                if !self.in_l(y) {
                    break;
                }
                let s = self.sets.find_fast(y);
                let r = *self.sets.payload(s);
                if r != lcur {
                    self.event(|| {
                        format!(
                            "merge {} {}",
                            LabeledNode::from_index(r),
                            LabeledNode::from_index(lcur)
                        )
                    });
                    self.merge_into_current(lcur, s);
                }
                z = reverse_label(self.orig[y]);
                if z == xb || self.visited[z] == self.epoch {
                    return;
                }
                self.visited[z] = self.epoch;
                y = self.parent[z];
            }
            if self.visited[y] == self.epoch {
                return;
            }
            self.visited[y] = self.epoch;
            self.event(|| {
                format!(
                    "join {} {}",
                    LabeledNode::from_index(y),
                    LabeledNode::from_index(lcur)
                )
            });
            self.add_to_current(lcur, y);
            if let Some(own) = self.current_set(y) {
                self.merge_into_current(lcur, own);
            }
            self.p_rec[y] = pcur;
            queue.push_back(y);
            z = self.parent[y];
        }
    }

    /// Abandons the current stack after a found path so the search can
    /// continue from `s` on a graph whose path labels have been removed.
    pub fn unwind_to_source(&mut self) {
        while self.frames.len() > 1 {
            let f = self.frames.pop().unwrap();
            self.in_stack[f.label] = false;
        }
        if let Some(f) = self.frames.last_mut() {
            f.retry = false;
        }
    }

    fn reconstruct(&mut self) -> Option<DirectedPath> {
        let limit = 4 * self.gm.label_count() + 8;
        enum Task {
            Walk(usize, usize),
        }
        let mut out = Vec::new();
        let mut tasks = vec![Task::Walk(TARGET, SOURCE)];
        while let Some(Task::Walk(mut cur, stop)) = tasks.pop() {
            loop {
                if out.len() > limit || cur == NONE {
                    return None;
                }
                out.push(cur);
                if cur == stop {
                    break;
                }
                let w = self.via[cur];
                if w != NONE {
                    tasks.push(Task::Walk(self.parent[cur], stop));
                    let mut st = w;
                    let mut blocks = Vec::new();
                    loop {
                        blocks.push(st);
                        let (p1, p2) = self.p_rec[st];
                        if p1 == NONE || blocks.len() > limit {
                            return None;
                        }
                        if p2 == cur {
                            break;
                        }
                        st = p2;
                    }
                    for st in blocks {
                        tasks.push(Task::Walk(self.p_rec[st].0, st));
                    }
                    break;
                }
                cur = self.parent[cur];
            }
        }
        out.reverse();
        Some(DirectedPath(out))
    }
}
