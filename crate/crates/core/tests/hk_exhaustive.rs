//! Layering, DOM lookup and path extraction checked against brute force.

use blossomless::graph::{validate_matching, Graph, Matching};
use blossomless::hk::{extract_disjoint_paths_counted, mbfs_layers_with, solve_hk_with_stats, MbfsOptions};
use blossomless::oracle::{
    all_matchings, brute_dom, brute_levels, brute_max_cardinality, brute_shortest_st_paths, gen_random,
    nonisomorphic_graphs,
};
use blossomless::reduction::{node_of, DirectedMatchingGraph, TARGET};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Default, Debug)]
struct Tally {
    instances: usize,
    wrong_level: usize,
    missing_t: usize,
    missing_path: usize,
    wrong_dom: usize,
    bad_extract: usize,
    not_maximal: usize,
    anomalies: usize,
    expanded_nodes: usize,
    rejected: usize,
    isolated: usize,
}

impl Tally {
    fn failures(&self) -> [usize; 7] {
        [
            self.wrong_level,
            self.missing_t,
            self.missing_path,
            self.wrong_dom,
            self.bad_extract,
            self.not_maximal,
            self.anomalies,
        ]
    }
}

fn check(g: &Graph, m: &Matching, t: &mut Tally) {
    let gm = DirectedMatchingGraph::build(g, m);
    let lg = mbfs_layers_with(&gm, MbfsOptions { record_levels: true });
    let truth = brute_levels(&gm).unwrap();
    t.instances += 1;
    t.anomalies += lg.anomalies();

    for v in 1..=g.n() {
        let (la, lb) = (lg.level(2 * v), lg.level(2 * v + 1));
        assert!(la.is_none_or(|x| x % 2 == 0) && lb.is_none_or(|x| x % 2 == 1));
        if let (Some(a), Some(b)) = (la, lb) {
            // the later of the two levels is fixed in the phase right after the pair's midpoint
            let later = if a > b { 2 * v } else { 2 * v + 1 };
            assert_eq!(lg.assigned_in(later), Some((a + b - 1) / 2 + 1));
        }
    }
    for (l, &d) in truth.iter().enumerate() {
        if lg.level(l).is_some_and(|x| Some(x) != d) {
            t.wrong_level += 1;
        }
    }
    for r in lg.doms() {
        let expect = brute_dom(&gm, &[r.pair.0, r.pair.1], r.levels_before.as_ref().unwrap()).unwrap();
        if expect != r.dom {
            t.wrong_dom += 1;
        }
    }
    if truth[TARGET].is_some() != lg.target_level().is_some() {
        t.missing_t += 1;
    }
    if lg.target_level().is_none() {
        return;
    }

    let shortest = brute_shortest_st_paths(&gm).unwrap();
    let in_layered = |p: &blossomless::reduction::DirectedPath| {
        p.labels()
            .windows(2)
            .all(|w| gm.out_arcs(w[0]).iter().any(|&a| gm.arc_head(a) == w[1] && lg.has_arc(a)))
    };
    if !shortest.iter().all(in_layered) {
        t.missing_path += 1;
    }

    let (paths, ex) = extract_disjoint_paths_counted(&gm, &lg);
    let mut used = vec![false; g.n() + 1];
    for p in &paths {
        assert_eq!(Some(p.arc_len()), lg.target_level());
        for &l in &p.labels()[1..p.len() - 1] {
            assert!(!std::mem::replace(&mut used[node_of(l)], true), "paths share a node");
        }
    }
    if shortest.iter().any(|q| !q.labels()[1..q.len() - 1].iter().any(|&l| used[node_of(l)])) {
        t.not_maximal += 1;
    }
    t.expanded_nodes += ex.expanded_nodes;
    t.rejected += ex.rejected;
    t.isolated += ex.isolated;
    if paths.is_empty() || ex.late_paths > 0 {
        t.bad_extract += 1;
    }
}

#[test]
fn every_matching_of_every_graph_up_to_seven_nodes() {
    let mut t = Tally::default();
    for n in 1..=7 {
        for g in nonisomorphic_graphs(n) {
            for m in all_matchings(&g) {
                check(&g, &m, &mut t);
            }
            let (m, _) = solve_hk_with_stats(&g);
            assert_eq!(m.len(), brute_max_cardinality(&g).unwrap().len());
        }
    }
    eprintln!("{t:?}");
    assert_eq!(t.failures(), [0; 7]);
}

fn random_matching(g: &Graph, rng: &mut ChaCha8Rng) -> Matching {
    let mut order: Vec<usize> = (0..g.m()).collect();
    order.shuffle(rng);
    let mut used = vec![false; g.n() + 1];
    let mut picked = Vec::new();
    for e in order {
        let ed = g.edge(e);
        if !used[ed.u] && !used[ed.v] && rng.gen_bool(0.7) {
            used[ed.u] = true;
            used[ed.v] = true;
            picked.push(e);
        }
    }
    validate_matching(g, &picked).unwrap()
}

#[test]
fn random_instances_eight_to_thirteen_nodes() {
    let mut t = Tally::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6b);
    for seed in 0..40_000u64 {
        let n = rng.gen_range(8..=13);
        let m = rng.gen_range(n..=n * (n - 1) / 2);
        let g = gen_random(n, m, seed, 1).unwrap();
        let mm = random_matching(&g, &mut rng);
        check(&g, &mm, &mut t);
    }
    eprintln!("{t:?}");
    assert_eq!(t.failures(), [0; 7]);
}
