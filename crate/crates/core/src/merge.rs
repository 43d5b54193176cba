//! Greedy contraction estimating the largest significant-node count for
//! every connected subgraph size.
//!
//! The search runs on *units*: each unit is a graph node carrying a weight
//! `(n, n_alpha)`. For a plain scan every unit is one node and `n_alpha` is
//! 1 when the node's p-value is at most `alpha`. Core-tree compression
//! produces heavier units; the merge logic is the same.
//!
//! Adjacent significant units are first contracted into supernodes. The
//! supernode with the highest significance ratio (ties: larger size, then
//! lower minimum member id) is then repeatedly taken as the root and grown
//! by the best of three moves:
//!
//! 1. merge an adjacent supernode that holds significant units;
//! 2. absorb a non-significant neighbor that also touches another
//!    significant supernode;
//! 3. absorb the highest-degree non-significant neighbor.
//!
//! The move giving the highest post-merge ratio wins, with ties resolved in
//! the order 1, 2, 3. The root's `(n, n_alpha)` is recorded initially and
//! after each move 1. Recorded sizes are finally filtered so that the
//! ratio strictly increases as the size decreases.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rustc_hash::FxHashSet;

use crate::error::{invalid, Error, Result};
use crate::graph::{Graph, NodeSet};
use crate::signals::PValues;

/// One retained `(n, n_alpha)` pair and, optionally, the subgraph that
/// achieved it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrontierEntry {
    pub n: usize,
    pub n_alpha: usize,
    pub members: Option<NodeSet>,
}

/// The filtered merge record for one significance level, sorted by `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Frontier {
    pub alpha: f64,
    pub entries: Vec<FrontierEntry>,
}

impl Frontier {
    /// `(n, n_alpha)` pairs in increasing `n`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.entries.iter().map(|e| (e.n, e.n_alpha))
    }
}

/// Runs the greedy merge on `g` with node p-values `p`.
///
/// With `record_sets` false the member sets are not reconstructed, which is
/// all a null replica needs.
pub fn greedy_merge(g: &Graph, p: &PValues, alpha: f64, record_sets: bool) -> Result<Frontier> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha = {alpha} outside (0, 1)")));
    }
    if p.len() != g.node_count() {
        return Err(invalid(format!(
            "{} p-values supplied for a graph with {} nodes",
            p.len(),
            g.node_count()
        )));
    }
    let weights: Vec<Weight> = (0..g.node_count())
        .map(|v| Weight {
            n: 1,
            n_alpha: usize::from(p.is_significant(v, alpha)),
        })
        .collect();
    Ok(Frontier {
        alpha,
        entries: merge_units(g, &weights, record_sets),
    })
}

/// Dense estimate of the largest `n_alpha` for sizes `1..=n_max`.
///
/// Values between recorded sizes are interpolated linearly; outside the
/// recorded range the nearest recorded value is held. Each estimate is
/// clipped to `[0, N]`.
pub fn frontier_interpolate(f: &Frontier, n_max: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n_max];
    interpolate_pairs(
        &f.entries.iter().map(|e| (e.n, e.n_alpha)).collect::<Vec<_>>(),
        &mut out,
    )?;
    Ok(out)
}

pub(crate) fn interpolate_pairs(pairs: &[(usize, usize)], out: &mut [f64]) -> Result<()> {
    let (&(first_n, first_k), &(last_n, last_k)) = match (pairs.first(), pairs.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::EmptyInput("frontier has no entries")),
    };
    let mut seg = 0;
    for (i, slot) in out.iter_mut().enumerate() {
        let size = i + 1;
        let value = if size <= first_n {
            first_k as f64
        } else if size >= last_n {
            last_k as f64
        } else {
            while pairs[seg + 1].0 < size {
                seg += 1;
            }
            let (n0, k0) = pairs[seg];
            let (n1, k1) = pairs[seg + 1];
            let t = (size - n0) as f64 / (n1 - n0) as f64;
            k0 as f64 + t * (k1 as f64 - k0 as f64)
        };
        *slot = value.clamp(0.0, size as f64);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Weight {
    pub n: usize,
    pub n_alpha: usize,
}

/// `a_k / a_n` versus `b_k / b_n` without rounding.
#[inline]
fn cmp_ratio(a_k: usize, a_n: usize, b_k: usize, b_n: usize) -> Ordering {
    ((a_k as u128) * (b_n as u128)).cmp(&((b_k as u128) * (a_n as u128)))
}

/// Priority of a supernode: ratio, then size, then lower minimum id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Rank {
    n_alpha: usize,
    n: usize,
    min_id: usize,
    rep: usize,
    version: u32,
}

impl Ord for Rank {
    fn cmp(&self, other: &Self) -> Ordering {
        cmp_ratio(self.n_alpha, self.n, other.n_alpha, other.n)
            .then(self.n.cmp(&other.n))
            .then(other.min_id.cmp(&self.min_id))
    }
}

impl PartialOrd for Rank {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Non-significant candidate: higher degree first, then lower id.
type Candidate = (usize, Reverse<usize>);

#[derive(Default)]
struct Super {
    n: usize,
    n_alpha: usize,
    min_id: usize,
    version: u32,
    /// Units (possibly stale representatives) of adjacent significant
    /// supernodes.
    sig_nbrs: Vec<usize>,
    /// Adjacent free non-significant units; may hold units absorbed since.
    free_nbrs: FxHashSet<usize>,
    bridges: BinaryHeap<Candidate>,
    by_degree: BinaryHeap<Candidate>,
}

struct Recorded {
    n: usize,
    n_alpha: usize,
    log_len: usize,
    unit: usize,
}

struct Merger<'a> {
    g: &'a Graph,
    weights: &'a [Weight],
    parent: Vec<usize>,
    in_super: Vec<bool>,
    bridge_count: Vec<u32>,
    sup: Vec<Super>,
    queue: BinaryHeap<Rank>,
    comp_sig: Vec<usize>,
    stamp: Vec<u32>,
    epoch: u32,
    log: Vec<(usize, usize)>,
    record_sets: bool,
}

impl<'a> Merger<'a> {
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            let gp = self.parent[self.parent[x]];
            self.parent[x] = gp;
            x = gp;
        }
        x
    }

    fn next_epoch(&mut self) -> u32 {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.epoch = 1;
        }
        self.epoch
    }

    fn link(&mut self, into: usize, from: usize) {
        self.parent[from] = into;
        if self.record_sets {
            self.log.push((into, from));
        }
    }

    fn push_rank(&mut self, rep: usize) {
        let s = &mut self.sup[rep];
        s.version += 1;
        self.queue.push(Rank {
            n_alpha: s.n_alpha,
            n: s.n,
            min_id: s.min_id,
            rep,
            version: s.version,
        });
    }

    fn candidate(&self, v: usize) -> Candidate {
        (self.g.degree(v), Reverse(v))
    }

    /// Offers `w` as a move-2 candidate to every adjacent significant
    /// supernode.
    fn announce_bridge(&mut self, w: usize) {
        let epoch = self.next_epoch();
        let cand = self.candidate(w);
        for i in 0..self.g.degree(w) {
            let u = self.g.neighbors(w)[i];
            if !self.in_super[u] {
                continue;
            }
            let ru = self.find(u);
            if self.stamp[ru] != epoch {
                self.stamp[ru] = epoch;
                self.sup[ru].bridges.push(cand);
            }
        }
    }

    /// Records that supernode `rep` is adjacent to the free unit `w`.
    fn touch_free(&mut self, rep: usize, w: usize) {
        if self.sup[rep].free_nbrs.insert(w) {
            let cand = self.candidate(w);
            self.sup[rep].by_degree.push(cand);
            self.bridge_count[w] += 1;
            match self.bridge_count[w] {
                2 => self.announce_bridge(w),
                c if c > 2 => self.sup[rep].bridges.push(cand),
                _ => {}
            }
        }
    }

    fn new(g: &'a Graph, weights: &'a [Weight], record_sets: bool) -> Self {
        let n = g.node_count();
        let mut m = Merger {
            g,
            weights,
            parent: (0..n).collect(),
            in_super: weights.iter().map(|w| w.n_alpha > 0).collect(),
            bridge_count: vec![0; n],
            sup: (0..n).map(|_| Super::default()).collect(),
            queue: BinaryHeap::new(),
            comp_sig: vec![0; g.component_count()],
            stamp: vec![0; n],
            epoch: 0,
            log: Vec::new(),
            record_sets,
        };

        for (u, v) in g.edges() {
            if m.in_super[u] && m.in_super[v] {
                let (ru, rv) = (m.find(u), m.find(v));
                if ru != rv {
                    let (into, from) = if ru < rv { (ru, rv) } else { (rv, ru) };
                    m.link(into, from);
                }
            }
        }
        for (v, w) in weights.iter().enumerate() {
            if m.in_super[v] {
                let r = m.find(v);
                if r == v {
                    m.sup[r].min_id = v;
                    m.comp_sig[g.components().id[v]] += 1;
                }
                m.sup[r].n += w.n;
                m.sup[r].n_alpha += w.n_alpha;
            }
        }
        // Significant units adjacent to each other were contracted above, so
        // every neighbor across a supernode boundary is free.
        for v in 0..n {
            if m.in_super[v] {
                let r = m.find(v);
                for i in 0..g.degree(v) {
                    let w = g.neighbors(v)[i];
                    if !m.in_super[w] && m.sup[r].free_nbrs.insert(w) {
                        let cand = m.candidate(w);
                        m.sup[r].by_degree.push(cand);
                        m.bridge_count[w] += 1;
                    }
                }
            }
        }
        for w in 0..n {
            if !m.in_super[w] && m.bridge_count[w] >= 2 {
                m.announce_bridge(w);
            }
        }
        for v in 0..n {
            if m.in_super[v] && m.parent[v] == v {
                m.push_rank(v);
            }
        }
        m
    }

    fn top(&mut self) -> Option<Rank> {
        while let Some(rank) = self.queue.pop() {
            if self.parent[rank.rep] == rank.rep && self.sup[rank.rep].version == rank.version {
                return Some(rank);
            }
        }
        None
    }

    /// Best adjacent significant supernode: highest merged ratio, then
    /// larger `n_alpha`, then lower minimum id. Compacts the neighbor list.
    fn best_sig_neighbor(&mut self, r: usize) -> Option<usize> {
        let epoch = self.next_epoch();
        self.stamp[r] = epoch;
        let list = std::mem::take(&mut self.sup[r].sig_nbrs);
        let mut kept = Vec::with_capacity(list.len());
        let (rn, rk) = (self.sup[r].n, self.sup[r].n_alpha);
        let mut best: Option<usize> = None;
        for x in list {
            let t = self.find(x);
            if self.stamp[t] == epoch {
                continue;
            }
            self.stamp[t] = epoch;
            kept.push(t);
            let better = match best {
                None => true,
                Some(b) => {
                    let (s, bs) = (&self.sup[t], &self.sup[b]);
                    cmp_ratio(rk + s.n_alpha, rn + s.n, rk + bs.n_alpha, rn + bs.n)
                        .then(s.n_alpha.cmp(&bs.n_alpha))
                        .then(bs.min_id.cmp(&s.min_id))
                        == Ordering::Greater
                }
            };
            if better {
                best = Some(t);
            }
        }
        self.sup[r].sig_nbrs = kept;
        best
    }

    fn best_bridge(&mut self, r: usize) -> Option<usize> {
        while let Some(&(_, Reverse(v))) = self.sup[r].bridges.peek() {
            if !self.in_super[v] && self.bridge_count[v] >= 2 {
                return Some(v);
            }
            self.sup[r].bridges.pop();
        }
        None
    }

    fn best_by_degree(&mut self, r: usize) -> Option<usize> {
        while let Some(&(_, Reverse(v))) = self.sup[r].by_degree.peek() {
            if !self.in_super[v] {
                return Some(v);
            }
            self.sup[r].by_degree.pop();
        }
        None
    }

    /// Move 1: merges supernodes `a` and `b`, returning the surviving
    /// representative.
    fn merge_supers(&mut self, a: usize, b: usize) -> usize {
        let (big, small) = if self.sup[a].free_nbrs.len() >= self.sup[b].free_nbrs.len() {
            (a, b)
        } else {
            (b, a)
        };
        self.link(big, small);
        let mut s = std::mem::take(&mut self.sup[small]);
        for &v in &s.free_nbrs {
            if self.in_super[v] {
                continue;
            }
            if !self.sup[big].free_nbrs.insert(v) {
                self.bridge_count[v] -= 1;
            }
        }
        let target = &mut self.sup[big];
        target.n += s.n;
        target.n_alpha += s.n_alpha;
        target.min_id = target.min_id.min(s.min_id);
        target.sig_nbrs.append(&mut s.sig_nbrs);
        target.bridges.append(&mut s.bridges);
        target.by_degree.append(&mut s.by_degree);
        let comp = self.g.components().id[big];
        self.comp_sig[comp] -= 1;
        big
    }

    /// Moves 2 and 3: absorbs the free unit `v` into supernode `r`.
    fn absorb(&mut self, r: usize, v: usize) {
        self.in_super[v] = true;
        self.link(r, v);
        self.sup[r].n += self.weights[v].n;
        self.sup[r].min_id = self.sup[r].min_id.min(v);
        self.sup[r].free_nbrs.remove(&v);
        for i in 0..self.g.degree(v) {
            let w = self.g.neighbors(v)[i];
            if self.in_super[w] {
                let rw = self.find(w);
                if rw != r {
                    self.sup[r].sig_nbrs.push(rw);
                    self.sup[rw].sig_nbrs.push(r);
                }
            } else {
                self.touch_free(r, w);
            }
        }
    }

    fn run(mut self) -> Vec<FrontierEntry> {
        let mut recorded = Vec::new();
        if let Some(first) = self.queue.peek().copied() {
            recorded.push(Recorded {
                n: first.n,
                n_alpha: first.n_alpha,
                log_len: self.log.len(),
                unit: first.rep,
            });
        } else {
            let members = self.record_sets.then(|| NodeSet::from_sorted_unchecked(vec![0]));
            return vec![FrontierEntry {
                n: self.weights[0].n,
                n_alpha: 0,
                members,
            }];
        }

        while let Some(rank) = self.top() {
            let r = rank.rep;
            // Once a supernode is the only significant one left in its
            // component, no further move 1 (and so no record) is possible.
            if self.comp_sig[self.g.components().id[r]] <= 1 {
                continue;
            }
            let opt1 = self.best_sig_neighbor(r);
            let opt2 = self.best_bridge(r);
            let opt3 = if opt2.is_some() { None } else { self.best_by_degree(r) };
            let (rn, rk) = (self.sup[r].n, self.sup[r].n_alpha);
            let free = opt2.or(opt3);
            let take_sig = match (opt1, free) {
                (Some(t), Some(v)) => {
                    let s = &self.sup[t];
                    cmp_ratio(rk + s.n_alpha, rn + s.n, rk, rn + self.weights[v].n) != Ordering::Less
                }
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => continue,
            };
            if take_sig {
                let root = self.merge_supers(r, opt1.unwrap());
                self.push_rank(root);
                let s = &self.sup[root];
                recorded.push(Recorded {
                    n: s.n,
                    n_alpha: s.n_alpha,
                    log_len: self.log.len(),
                    unit: root,
                });
            } else {
                self.absorb(r, free.unwrap());
                self.push_rank(r);
            }
        }
        self.finish(recorded)
    }

    fn finish(self, mut recorded: Vec<Recorded>) -> Vec<FrontierEntry> {
        // Largest n_alpha per size, earliest record on ties; then keep only
        // sizes whose ratio strictly beats every larger size.
        recorded.sort_by(|a, b| {
            b.n.cmp(&a.n)
                .then(b.n_alpha.cmp(&a.n_alpha))
                .then(a.log_len.cmp(&b.log_len))
        });
        recorded.dedup_by_key(|r| r.n);
        let mut kept: Vec<Recorded> = Vec::new();
        for r in recorded {
            match kept.last() {
                Some(prev) if cmp_ratio(r.n_alpha, r.n, prev.n_alpha, prev.n) != Ordering::Greater => {}
                _ => kept.push(r),
            }
        }
        kept.reverse();

        let members = if self.record_sets {
            replay(self.g.node_count(), &self.log, &kept)
        } else {
            vec![None; kept.len()]
        };
        kept.into_iter()
            .zip(members)
            .map(|(r, members)| FrontierEntry {
                n: r.n,
                n_alpha: r.n_alpha,
                members,
            })
            .collect()
    }
}

/// Re-applies the union log and snapshots the member set of each retained
/// record at the moment it was taken.
fn replay(n: usize, log: &[(usize, usize)], kept: &[Recorded]) -> Vec<Option<NodeSet>> {
    let mut order: Vec<usize> = (0..kept.len()).collect();
    order.sort_by_key(|&i| kept[i].log_len);
    let mut parent: Vec<usize> = (0..n).collect();
    let mut members: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut out = vec![None; kept.len()];
    let mut applied = 0;
    for i in order {
        while applied < kept[i].log_len {
            let (a, b) = log[applied];
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            let (big, small) = if members[ra].len() >= members[rb].len() {
                (ra, rb)
            } else {
                (rb, ra)
            };
            parent[small] = big;
            let moved = std::mem::take(&mut members[small]);
            members[big].extend(moved);
            applied += 1;
        }
        let r = find(&mut parent, kept[i].unit);
        let mut set = members[r].clone();
        set.sort_unstable();
        out[i] = Some(NodeSet::from_sorted_unchecked(set));
    }
    out
}

pub(crate) fn merge_units(g: &Graph, weights: &[Weight], record_sets: bool) -> Vec<FrontierEntry> {
    debug_assert_eq!(weights.len(), g.node_count());
    Merger::new(g, weights, record_sets).run()
}
