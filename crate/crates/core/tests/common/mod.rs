#![allow(dead_code)]

use cnss::graph::Graph;

/// Largest number of flagged nodes over connected node subsets of each
/// size, by enumerating every subset. Index 0 is unused.
pub fn brute_force_max(g: &Graph, flagged: &[bool]) -> Vec<usize> {
    let n = g.node_count();
    assert!(n <= 20, "exhaustive search is limited to 20 nodes");
    let adj: Vec<u32> = (0..n)
        .map(|v| g.neighbors(v).iter().fold(0u32, |m, &w| m | (1 << w)))
        .collect();
    let flag_mask = (0..n).filter(|&v| flagged[v]).fold(0u32, |m, v| m | (1 << v));
    let mut best = vec![0usize; n + 1];
    for set in 1u32..(1u32 << n) {
        // Flood fill inside `set` from its lowest member.
        let mut reach = set & set.wrapping_neg();
        let mut frontier = reach;
        while frontier != 0 {
            let v = frontier.trailing_zeros() as usize;
            frontier &= frontier - 1;
            let new = adj[v] & set & !reach;
            reach |= new;
            frontier |= new;
        }
        if reach == set {
            let size = set.count_ones() as usize;
            best[size] = best[size].max((set & flag_mask).count_ones() as usize);
        }
    }
    best
}

/// KL divergence between Bernoulli(a) and Bernoulli(b), written out
/// directly, with the `0 ln 0 = 0` convention.
pub fn kl_reference(a: f64, b: f64) -> f64 {
    let term = |x: f64, y: f64| if x == 0.0 { 0.0 } else { x * (x / y).ln() };
    term(a, b) + term(1.0 - a, 1.0 - b)
}

/// Every connected node subset of `g` as a bitmask.
pub fn connected_masks(g: &Graph) -> Vec<u32> {
    let n = g.node_count();
    assert!(n <= 20, "exhaustive search is limited to 20 nodes");
    let adj: Vec<u32> = (0..n)
        .map(|v| g.neighbors(v).iter().fold(0u32, |m, &w| m | (1 << w)))
        .collect();
    (1u32..(1u32 << n))
        .filter(|&set| {
            let mut reach = set & set.wrapping_neg();
            let mut frontier = reach;
            while frontier != 0 {
                let v = frontier.trailing_zeros() as usize;
                frontier &= frontier - 1;
                let new = adj[v] & set & !reach;
                reach |= new;
                frontier |= new;
            }
            reach == set
        })
        .collect()
}
