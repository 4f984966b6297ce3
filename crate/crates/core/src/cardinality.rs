//! Repeated single-path augmentation to a maximum-cardinality matching.

use crate::graph::{Graph, Matching};
use crate::mdfs::find_augmenting_path;
use crate::reduction::{lift_path, DirectedMatchingGraph};

/// Grows `initial` one augmenting path at a time until none is left.
pub fn solve_basic(g: &Graph, initial: &Matching) -> Matching {
    solve_basic_counted(g, initial).0
}

/// Like [`solve_basic`], also returning the number of augmentations.
pub fn solve_basic_counted(g: &Graph, initial: &Matching) -> (Matching, usize) {
    let mut m = initial.clone();
    let mut rounds = 0;
    loop {
        let gm = DirectedMatchingGraph::build(g, &m);
        let Some(p) = find_augmenting_path(&gm) else { break };
        let path = lift_path(&gm, &p).expect("search returns strongly simple s-t paths");
        let before = m.len();
        m.flip_path(g, &path.nodes);
        debug_assert_eq!(m.len(), before + 1);
        rounds += 1;
    }
    (m, rounds)
}
