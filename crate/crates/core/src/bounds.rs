//! Closed-form lower bounds on the calibration surface.
//!
//! Two bounds are available. The neighborhood bound takes a connected
//! subgraph of size `c` with `m_c` distinct neighbors: a size-`N` subgraph
//! built from it plus `N - c` of those neighbors, significant ones first,
//! has at least `c alpha + min(m_c alpha, N - c) - sigma_c / 2` expected
//! significant nodes, with `sigma_c` the binomial standard deviation.
//! The percolation bound uses the giant-component size of the significant
//! nodes in an Erdos-Renyi graph. Neither needs a single null replica.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::calibration::{AlphaGrid, CalibrationTable, Provenance};
use crate::error::{invalid, Result};
use crate::graph::{Graph, NodeSet};

/// Greedy lower estimates of the largest ext-degree of a connected
/// subgraph of each size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtDegreeProfile {
    /// `k[c - 1]` is the ext-degree of the first `c` nodes of `order`.
    pub k: Vec<usize>,
    /// `boundary[c - 1]` counts the distinct nodes adjacent to them.
    pub boundary: Vec<usize>,
    /// Growth order; every prefix is connected.
    pub order: Vec<usize>,
}

impl ExtDegreeProfile {
    pub fn k_c(&self, c: usize) -> Option<usize> {
        c.checked_sub(1).and_then(|i| self.k.get(i)).copied()
    }

    /// The connected seed subgraph of size `c`.
    pub fn seed_set(&self, c: usize) -> NodeSet {
        self.order[..c].iter().copied().collect()
    }
}

/// Number of distinct nodes outside `s` adjacent to it.
pub fn boundary_size(g: &Graph, s: &NodeSet) -> usize {
    let mut seen: Vec<usize> = s
        .iter()
        .flat_map(|v| g.neighbors(v).iter().copied())
        .filter(|&w| !s.contains(w))
        .collect();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Number of edges leaving `s`.
pub fn ext_degree(g: &Graph, s: &NodeSet) -> usize {
    s.iter()
        .map(|v| g.neighbors(v).iter().filter(|&&w| !s.contains(w)).count())
        .sum()
}

/// Grows a subgraph from the highest-degree node, always adding the
/// neighbor with the most neighbors still outside the subgraph (lowest id
/// on ties), and records the ext-degree after each step. Growth ends when
/// the starting component is exhausted.
pub fn ext_degree_profile(g: &Graph) -> ExtDegreeProfile {
    let n = g.node_count();
    let start = (0..n).max_by_key(|&v| (g.degree(v), Reverse(v))).unwrap_or(0);
    let mut inside = vec![false; n];
    let mut inside_nbrs = vec![0usize; n];
    let mut heap: BinaryHeap<(usize, Reverse<usize>)> = BinaryHeap::new();
    let mut order = Vec::new();
    let mut k = Vec::new();
    let mut boundary = Vec::new();
    let mut ext = 0usize;
    let mut outside = 0usize;

    let mut add = |v: usize,
                   inside: &mut Vec<bool>,
                   inside_nbrs: &mut Vec<usize>,
                   heap: &mut BinaryHeap<(usize, Reverse<usize>)>| {
        inside[v] = true;
        ext = ext + g.degree(v) - 2 * inside_nbrs[v];
        if inside_nbrs[v] > 0 {
            outside -= 1;
        }
        for &w in g.neighbors(v) {
            if !inside[w] {
                if inside_nbrs[w] == 0 {
                    outside += 1;
                }
                inside_nbrs[w] += 1;
                heap.push((g.degree(w) - inside_nbrs[w], Reverse(w)));
            }
        }
        order.push(v);
        k.push(ext);
        boundary.push(outside);
    };

    add(start, &mut inside, &mut inside_nbrs, &mut heap);
    while let Some((out, Reverse(v))) = heap.pop() {
        if inside[v] || out != g.degree(v) - inside_nbrs[v] {
            continue;
        }
        add(v, &mut inside, &mut inside_nbrs, &mut heap);
    }
    ExtDegreeProfile { k, boundary, order }
}

/// `(c alpha + min(n - c, mu_c), sigma_c / 2)`: the expected-count floor
/// for seed size `c`, where `mu_c` and `sigma_c` are the mean and standard
/// deviation of the number of significant boundary nodes.
fn seed_terms(profile: &ExtDegreeProfile, c: usize, alpha: f64) -> (f64, f64) {
    let m = profile.boundary[c - 1] as f64;
    (m * alpha, 0.5 * (m * alpha * (1.0 - alpha)).sqrt())
}

/// Neighborhood bound at one size: the largest
/// `(c alpha + min(n - c, m_c alpha) - sigma_c / 2) / n` over
/// `c <= n <= c + m_c`, floored at `alpha`.
///
/// `m_c` is the number of distinct nodes adjacent to the seed subgraph and
/// `sigma_c = sqrt(m_c alpha (1 - alpha))`. With `X ~ Bin(m_c, alpha)`
/// significant boundary nodes, `E[min(X, j)] >= min(j, E[X]) - sigma_c / 2`
/// because `E[(X - E[X])+] = E|X - E[X]| / 2 <= sigma_c / 2`.
pub fn lower_bound_neighborhood(profile: &ExtDegreeProfile, n: usize, alpha: f64) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for (i, &m) in profile.boundary.iter().enumerate() {
        let c = i + 1;
        if c <= n && n <= c + m {
            let (mu, half_sigma) = seed_terms(profile, c, alpha);
            best = best.max(c as f64 * alpha + ((n - c) as f64).min(mu) - half_sigma);
        }
    }
    (best / n as f64).max(alpha)
}

/// Maps floats to integers with the same order.
fn order_key(x: f64) -> u64 {
    let bits = x.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | 1 << 63
    }
}

/// Neighborhood bound for every size `1..=n_max` in `O(V log V)`.
///
/// For a fixed `c` the numerator is `N + c (alpha - 1) - sigma_c / 2` up
/// to `N = c + m_c alpha` and a constant after it, so a sweep over `N` only
/// has to track the largest active offset on the rising parts and the
/// largest active constant.
pub fn neighborhood_curve(profile: &ExtDegreeProfile, n_max: usize, alpha: f64) -> Vec<f64> {
    // (start, end, c) for both kinds of segment.
    let mut rising: Vec<(usize, usize, usize)> = Vec::new();
    let mut flat: Vec<(usize, usize, usize)> = Vec::new();
    for (i, &m) in profile.boundary.iter().enumerate() {
        let c = i + 1;
        let (mu, _) = seed_terms(profile, c, alpha);
        rising.push((c, (c + mu.floor() as usize).min(c + m), c));
        let flat_start = c + mu.ceil() as usize;
        if flat_start <= c + m {
            flat.push((flat_start, c + m, c));
        }
    }
    rising.sort_unstable();
    flat.sort_unstable();

    let rise_value = |c: usize, n: usize| {
        let (_, half_sigma) = seed_terms(profile, c, alpha);
        c as f64 * alpha + (n - c) as f64 - half_sigma
    };
    let flat_value = |c: usize| {
        let (mu, half_sigma) = seed_terms(profile, c, alpha);
        c as f64 * alpha + mu - half_sigma
    };
    let mut out = Vec::with_capacity(n_max);
    let mut active_rise: BinaryHeap<(u64, usize, usize)> = BinaryHeap::new();
    let mut active_flat: BinaryHeap<(u64, usize, usize)> = BinaryHeap::new();
    let (mut ri, mut fi) = (0, 0);
    for n in 1..=n_max {
        while ri < rising.len() && rising[ri].0 <= n {
            let (_, end, c) = rising[ri];
            // Rising numerators differ by a constant offset in N.
            let offset = rise_value(c, c) - c as f64;
            active_rise.push((order_key(offset), end, c));
            ri += 1;
        }
        while fi < flat.len() && flat[fi].0 <= n {
            let (_, end, c) = flat[fi];
            active_flat.push((order_key(flat_value(c)), end, c));
            fi += 1;
        }
        while active_rise.peek().is_some_and(|&(_, end, _)| end < n) {
            active_rise.pop();
        }
        while active_flat.peek().is_some_and(|&(_, end, _)| end < n) {
            active_flat.pop();
        }
        let mut numerator = f64::NEG_INFINITY;
        if let Some(&(_, _, c)) = active_rise.peek() {
            numerator = numerator.max(rise_value(c, n));
        }
        if let Some(&(_, _, c)) = active_flat.peek() {
            numerator = numerator.max(flat_value(c));
        }
        out.push((numerator / n as f64).max(alpha));
    }
    out
}

/// Percolation bound for an Erdos-Renyi graph with `n_nodes` nodes and
/// edge probability `p_edge`:
/// `min(1, (alpha n_nodes / n) (1 - exp(-<k> n / n_nodes)))` with
/// `<k> = (n_nodes - 1) p_edge`.
pub fn lower_bound_percolation(n_nodes: usize, p_edge: f64, n: usize, alpha: f64) -> f64 {
    let nodes = n_nodes as f64;
    let mean_degree = (nodes - 1.0) * p_edge;
    let size = n as f64;
    (alpha * nodes / size * (1.0 - (-mean_degree * size / nodes).exp())).min(1.0)
}

pub fn percolation_curve(n_nodes: usize, p_edge: f64, n_max: usize, alpha: f64) -> Vec<f64> {
    (1..=n_max)
        .map(|n| lower_bound_percolation(n_nodes, p_edge, n, alpha))
        .collect()
}

/// Erdos-Renyi parameters for the percolation bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErParams {
    pub n: usize,
    pub p: f64,
}

impl ErParams {
    /// Node count and edge density of `g`.
    pub fn empirical(g: &Graph) -> Self {
        Self {
            n: g.node_count(),
            p: g.density(),
        }
    }
}

pub const FLAG_EMPIRICAL_PERCOLATION: &str = "percolation_bound_uses_empirical_density";

/// Table of `max(alpha, neighborhood bound, percolation bound)` per cell.
///
/// Without `er`, the percolation bound uses the graph's own node count and
/// edge density and the table is flagged: the bound is only guaranteed for
/// Erdos-Renyi graphs.
pub fn bound_table(g: &Graph, grid: &AlphaGrid, er: Option<ErParams>) -> Result<CalibrationTable> {
    let (params, flagged) = match er {
        Some(params) => {
            if params.n == 0 || !(0.0..=1.0).contains(&params.p) {
                return Err(invalid(format!(
                    "invalid Erdos-Renyi parameters n={}, p={}",
                    params.n, params.p
                )));
            }
            (params, false)
        }
        None => (ErParams::empirical(g), true),
    };
    let n_max = g.node_count();
    let profile = ext_degree_profile(g);
    let mut values = Vec::with_capacity(n_max * grid.len());
    for &alpha in grid.values() {
        let nb = neighborhood_curve(&profile, n_max, alpha);
        for (i, b1) in nb.into_iter().enumerate() {
            let b2 = lower_bound_percolation(params.n, params.p, i + 1, alpha);
            values.push(alpha.max(b1).max(b2).min(1.0));
        }
    }
    let mut table = CalibrationTable::from_parts(g, grid.clone(), values, None, Provenance::LowerBound);
    if flagged {
        table.flags.push(FLAG_EMPIRICAL_PERCOLATION.to_owned());
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{erdos_renyi, is_connected};

    fn star(leaves: usize) -> Graph {
        Graph::from_edges(leaves + 1, (1..=leaves).map(|v| (0, v))).unwrap()
    }

    #[test]
    fn profile_examples() {
        assert_eq!(ext_degree_profile(&star(10)).k_c(1), Some(10));
        let k5 = erdos_renyi(5, 1.0, 0).unwrap();
        let prof = ext_degree_profile(&k5);
        assert_eq!((prof.k_c(1), prof.k_c(2)), (Some(4), Some(6)));
        let p5 = Graph::from_edges(5, (1..5).map(|i| (i - 1, i))).unwrap();
        assert_eq!(ext_degree_profile(&p5).k_c(1), Some(2));
    }

    #[test]
    fn profile_values_are_actual_ext_degrees() {
        let g = erdos_renyi(120, 0.04, 3).unwrap();
        let prof = ext_degree_profile(&g);
        for c in 1..=prof.k.len() {
            let s = prof.seed_set(c);
            assert!(is_connected(&g, &s).unwrap());
            assert_eq!(ext_degree(&g, &s), prof.k[c - 1]);
            assert_eq!(boundary_size(&g, &s), prof.boundary[c - 1]);
        }
    }

    #[test]
    fn neighborhood_examples() {
        // Star, c = 1: m = 10, mu = 1, sigma / 2 = sqrt(0.9) / 2.
        let prof = ext_degree_profile(&star(10));
        let expected = (0.1 + 1.0 - 0.9f64.sqrt() / 2.0) / 2.0;
        assert!((lower_bound_neighborhood(&prof, 2, 0.1) - expected).abs() < 1e-12);
        // The exact expectation 0.1 + P(X >= 1) is larger.
        assert!(expected * 2.0 < 0.1 + 1.0 - 0.9f64.powi(10));
        // K5, alpha = 0.5, N = 3: c = 1 gives (0.5 + 2 - 0.5) / 3, c = 2
        // gives (1 + 1 - sqrt(0.75) / 2) / 3.
        let k5 = ext_degree_profile(&erdos_renyi(5, 1.0, 0).unwrap());
        assert!((lower_bound_neighborhood(&k5, 3, 0.5) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(lower_bound_neighborhood(&k5, 1, 0.3), 0.3);
    }

    #[test]
    fn sweep_matches_direct_evaluation() {
        for (seed, p) in [(1, 0.01), (2, 0.05), (3, 0.2)] {
            let g = erdos_renyi(300, p, seed).unwrap();
            let prof = ext_degree_profile(&g);
            for alpha in [0.001, 0.01, 0.05, 0.09, 0.5] {
                let curve = neighborhood_curve(&prof, 300, alpha);
                for n in 1..=300 {
                    let direct = lower_bound_neighborhood(&prof, n, alpha);
                    assert!(
                        (curve[n - 1] - direct).abs() < 1e-12,
                        "n={n} alpha={alpha}: {} vs {direct}",
                        curve[n - 1]
                    );
                }
            }
        }
    }

    #[test]
    fn percolation_examples() {
        assert!((lower_bound_percolation(1000, 0.05, 1000, 0.05) - 0.05).abs() < 1e-12);
        assert_eq!(lower_bound_percolation(1000, 0.05, 10, 0.05), 1.0);
        assert!((lower_bound_percolation(1000, 0.05, 100, 0.05) - 0.4966).abs() < 1e-4);
    }

    #[test]
    fn empty_graph_collapses_to_alpha() {
        let g = Graph::from_edges(20, []).unwrap();
        let grid = AlphaGrid::default();
        let t = bound_table(&g, &grid, None).unwrap();
        for (a, &alpha) in grid.values().iter().enumerate() {
            assert!(t.curve(a).iter().all(|&x| x == alpha));
        }
        assert_eq!(t.provenance, Provenance::LowerBound);
        assert_eq!(t.flags, vec![FLAG_EMPIRICAL_PERCOLATION.to_owned()]);
    }

    #[test]
    fn clique_neighborhood_bound_exceeds_alpha() {
        let g = erdos_renyi(5, 1.0, 0).unwrap();
        let prof = ext_degree_profile(&g);
        let curve = neighborhood_curve(&prof, 5, 0.3);
        for n in 2..=3 {
            assert!(curve[n - 1] > 0.3, "n={n}");
        }
    }
}
