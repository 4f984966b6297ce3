//! Fixed instance families shared by the benchmarks.

use blossomless::oracle::gen_random;
use blossomless::Graph;

/// Sparse random graph with `m = density * n` edges and unit weights.
pub fn sparse(n: usize, density: usize, seed: u64) -> Graph {
    let cap = n * (n - 1) / 2;
    gen_random(n, (density * n).min(cap), seed, 1).expect("edge count fits")
}

/// Random graph with weights in `1..=max_weight`.
pub fn weighted(n: usize, m: usize, seed: u64, max_weight: u64) -> Graph {
    gen_random(n, m.min(n * (n - 1) / 2), seed, max_weight).expect("edge count fits")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_have_requested_sizes() {
        let g = sparse(100, 4, 1);
        assert_eq!((g.n(), g.m()), (100, 400));
        assert_eq!(sparse(5, 10, 1).m(), 10);
        assert!(weighted(30, 60, 2, 7).edges().iter().all(|e| (1..=7).contains(&e.w)));
    }
}
