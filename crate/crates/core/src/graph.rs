//! Undirected simple graphs with dense node ids.
//!
//! A [`Graph`] is immutable once built and stores adjacency in compressed
//! sparse row form with every neighbor list sorted. Node ids are dense
//! (`0..node_count`); an optional label table maps them back to the tokens of
//! the edge list they were read from.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::rng;

/// Edge-list directive declaring a node without listing an edge. Other
/// readers of the format see an ordinary comment.
pub const NODE_DIRECTIVE: &str = "#@node";

#[derive(Clone, Debug)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    labels: Option<Vec<String>>,
    components: OnceLock<Components>,
}

#[derive(Clone, Debug)]
pub(crate) struct Components {
    pub(crate) id: Vec<usize>,
    pub(crate) sizes: Vec<usize>,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.offsets == other.offsets && self.targets == other.targets && self.labels == other.labels
    }
}

impl Eq for Graph {}

impl Graph {
    /// Builds a graph from an undirected edge list. Self-loops and repeated
    /// edges (in either direction) are dropped.
    pub fn from_edges<I>(node_count: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if node_count == 0 {
            return Err(Error::EmptyInput("graph must have at least one node"));
        }
        let mut arcs = Vec::new();
        for (u, v) in edges {
            for id in [u, v] {
                if id >= node_count {
                    return Err(Error::NodeOutOfRange { id, node_count });
                }
            }
            if u != v {
                arcs.push((u, v));
                arcs.push((v, u));
            }
        }
        arcs.sort_unstable();
        arcs.dedup();

        let mut offsets = vec![0usize; node_count + 1];
        for &(u, _) in &arcs {
            offsets[u + 1] += 1;
        }
        for i in 0..node_count {
            offsets[i + 1] += offsets[i];
        }
        let targets = arcs.into_iter().map(|(_, v)| v).collect();
        Ok(Self {
            offsets,
            targets,
            labels: None,
            components: OnceLock::new(),
        })
    }

    /// Attaches external labels, one per node.
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.node_count() {
            return Err(invalid(format!(
                "{} labels supplied for {} nodes",
                labels.len(),
                self.node_count()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Edge density `m / (n choose 2)`; zero for a single node.
    pub fn density(&self) -> f64 {
        let n = self.node_count() as f64;
        if n < 2.0 {
            0.0
        } else {
            self.edge_count() as f64 / (n * (n - 1.0) / 2.0)
        }
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.node_count())
            .flat_map(move |u| self.neighbors(u).iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// External label of `v`, falling back to the decimal id.
    pub fn label(&self, v: usize) -> String {
        match &self.labels {
            Some(labels) => labels[v].clone(),
            None => v.to_string(),
        }
    }

    /// Map from label to dense id.
    pub fn label_index(&self) -> HashMap<String, usize> {
        (0..self.node_count()).map(|v| (self.label(v), v)).collect()
    }

    /// SHA-256 over the node count and the sorted dense-id edge list.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.node_count() as u64).to_le_bytes());
        for (u, v) in self.edges() {
            hasher.update((u as u64).to_le_bytes());
            hasher.update((v as u64).to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }

    pub(crate) fn components(&self) -> &Components {
        self.components.get_or_init(|| {
            let n = self.node_count();
            let mut id = vec![usize::MAX; n];
            let mut sizes = Vec::new();
            let mut stack = Vec::new();
            for start in 0..n {
                if id[start] != usize::MAX {
                    continue;
                }
                let comp = sizes.len();
                let mut size = 0;
                id[start] = comp;
                stack.push(start);
                while let Some(u) = stack.pop() {
                    size += 1;
                    for &w in self.neighbors(u) {
                        if id[w] == usize::MAX {
                            id[w] = comp;
                            stack.push(w);
                        }
                    }
                }
                sizes.push(size);
            }
            Components { id, sizes }
        })
    }

    /// Size of the connected component containing `v`.
    pub fn component_size(&self, v: usize) -> usize {
        let c = self.components();
        c.sizes[c.id[v]]
    }

    pub fn component_count(&self) -> usize {
        self.components().sizes.len()
    }

    /// Subgraph induced by the nodes with `keep[v]`, relabeled densely in id
    /// order. Returns the subgraph and the original id of each new node.
    pub fn induced_subgraph(&self, keep: &[bool]) -> Result<(Graph, Vec<usize>)> {
        let originals: Vec<usize> = (0..self.node_count()).filter(|&v| keep[v]).collect();
        let mut new_id = vec![usize::MAX; self.node_count()];
        for (i, &v) in originals.iter().enumerate() {
            new_id[v] = i;
        }
        let edges = self
            .edges()
            .filter(|&(u, v)| keep[u] && keep[v])
            .map(|(u, v)| (new_id[u], new_id[v]));
        let mut sub = Graph::from_edges(originals.len(), edges)?;
        if let Some(labels) = &self.labels {
            sub.labels = Some(originals.iter().map(|&v| labels[v].clone()).collect());
        }
        Ok((sub, originals))
    }

    /// Writes the graph as a whitespace-separated edge list.
    ///
    /// Nodes are emitted so that reading the file back assigns the same dense
    /// ids: a node with no smaller-id neighbor is declared with
    /// [`NODE_DIRECTIVE`] just before it would otherwise first appear.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# nodes={} edges={}", self.node_count(), self.edge_count())?;
        for b in 0..self.node_count() {
            let lower: Vec<usize> = self.neighbors(b).iter().copied().take_while(|&a| a < b).collect();
            if lower.is_empty() {
                writeln!(out, "{NODE_DIRECTIVE} {}", self.label(b))?;
            }
            for a in lower {
                writeln!(out, "{} {}", self.label(a), self.label(b))?;
            }
        }
        Ok(())
    }
}

/// Reads a SNAP-style edge list: one `u v` pair per line, `#` comments.
///
/// Tokens become labels; dense ids follow first appearance. Directed input
/// is symmetrized, self-loops and duplicate edges are dropped.
pub fn load_edge_list<R: BufRead>(reader: R) -> Result<Graph> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut edges = Vec::new();
    let mut intern = |token: &str| -> usize {
        if let Some(&id) = index.get(token) {
            return id;
        }
        let id = labels.len();
        index.insert(token.to_owned(), id);
        labels.push(token.to_owned());
        id
    };

    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix(NODE_DIRECTIVE) {
            if rest.starts_with(char::is_whitespace) {
                let tokens: Vec<&str> = rest.split_whitespace().collect();
                if tokens.len() != 1 {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: format!("node directive needs exactly one label, found {}", tokens.len()),
                    });
                }
                intern(tokens[0]);
                continue;
            }
        }
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected 2 node tokens, found {}", tokens.len()),
            });
        }
        let u = intern(tokens[0]);
        let v = intern(tokens[1]);
        edges.push((u, v));
    }

    if labels.is_empty() {
        return Err(Error::EmptyInput("edge list contains no nodes"));
    }
    Graph::from_edges(labels.len(), edges)?.with_labels(labels)
}

/// G(n, p) random graph. Pairs are visited with geometric skips, so the cost
/// is proportional to the number of edges rather than `n²`.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::EmptyInput("Erdos-Renyi graph needs n >= 1"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("edge probability {p} outside [0, 1]")));
    }
    let pairs = (n as u64) * (n as u64 - 1) / 2;
    let mut edges = Vec::new();
    if p >= 1.0 {
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v));
            }
        }
    } else if p > 0.0 {
        let mut rng = rng::stream(seed, rng::STREAM_GRAPH);
        let skips = Geometric::new(p).map_err(|e| invalid(e.to_string()))?;
        // Pair index k enumerates (u, v), u < v, row by row.
        let mut k: u64 = 0;
        let mut row: u64 = 0;
        let mut row_start: u64 = 0;
        loop {
            k = match k.checked_add(skips.sample(&mut rng)) {
                Some(k) => k,
                None => break,
            };
            if k >= pairs {
                break;
            }
            // Row u holds n - 1 - u pairs.
            while k >= row_start + (n as u64 - 1 - row) {
                row_start += n as u64 - 1 - row;
                row += 1;
            }
            let u = row as usize;
            let v = u + 1 + (k - row_start) as usize;
            edges.push((u, v));
            k += 1;
        }
    }
    Graph::from_edges(n, edges)
}

/// A set of dense node ids, kept sorted and duplicate-free.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<usize>", into = "Vec<usize>")]
pub struct NodeSet(Vec<usize>);

impl From<Vec<usize>> for NodeSet {
    fn from(ids: Vec<usize>) -> Self {
        ids.into_iter().collect()
    }
}

impl From<NodeSet> for Vec<usize> {
    fn from(s: NodeSet) -> Self {
        s.0
    }
}

impl NodeSet {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn from_sorted_unchecked(ids: Vec<usize>) -> Self {
        debug_assert!(ids.windows(2).all(|w| w[0] < w[1]));
        Self(ids)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn intersection_len(&self, other: &NodeSet) -> usize {
        let (mut i, mut j, mut count) = (0, 0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    count += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        count
    }

    /// Checks that every id is a node of `g`.
    pub fn validate(&self, g: &Graph) -> Result<()> {
        match self.0.last() {
            Some(&id) if id >= g.node_count() => Err(Error::NodeOutOfRange {
                id,
                node_count: g.node_count(),
            }),
            _ => Ok(()),
        }
    }

    /// Membership mask over `0..node_count`.
    pub fn mask(&self, node_count: usize) -> Vec<bool> {
        let mut mask = vec![false; node_count];
        for &v in &self.0 {
            mask[v] = true;
        }
        mask
    }
}

impl FromIterator<usize> for NodeSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut ids: Vec<usize> = iter.into_iter().collect();
        ids.sort_unstable();
        ids.dedup();
        Self(ids)
    }
}

impl IntoIterator for NodeSet {
    type Item = usize;
    type IntoIter = std::vec::IntoIter<usize>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.into_iter()
    }
}

/// True iff the subgraph induced by `s` is connected.
pub fn is_connected(g: &Graph, s: &NodeSet) -> Result<bool> {
    if s.is_empty() {
        return Err(Error::EmptyInput("connectivity of an empty node set"));
    }
    s.validate(g)?;
    let mut seen = vec![false; s.len()];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut reached = 1;
    while let Some(i) = stack.pop() {
        for &w in g.neighbors(s.0[i]) {
            if let Ok(j) = s.0.binary_search(&w) {
                if !seen[j] {
                    seen[j] = true;
                    reached += 1;
                    stack.push(j);
                }
            }
        }
    }
    Ok(reached == s.len())
}

/// Connected node set of exactly `size` nodes collected by a simple random
/// walk.
///
/// The start is uniform over nodes whose component has at least `size`
/// nodes. Each step moves to a uniform neighbor and collects it if new. When
/// the walk sits on a node whose neighbors are all collected, it restarts
/// from a uniformly chosen collected node.
pub fn random_walk_subgraph(g: &Graph, size: usize, seed: u64) -> Result<NodeSet> {
    if size == 0 {
        return Err(invalid("random walk subgraph size must be positive"));
    }
    if size > g.node_count() {
        return Err(Error::NoLargeComponent { size });
    }
    let eligible: Vec<usize> = (0..g.node_count()).filter(|&v| g.component_size(v) >= size).collect();
    if eligible.is_empty() {
        return Err(Error::NoLargeComponent { size });
    }
    let mut rng = rng::stream(seed, rng::STREAM_WALK);
    let start = eligible[rng.random_range(0..eligible.len())];

    let mut collected = vec![false; g.node_count()];
    let mut order = vec![start];
    collected[start] = true;
    let mut current = start;
    while order.len() < size {
        let nbrs = g.neighbors(current);
        if nbrs.iter().all(|&w| collected[w]) {
            current = order[rng.random_range(0..order.len())];
            continue;
        }
        let next = nbrs[rng.random_range(0..nbrs.len())];
        if !collected[next] {
            collected[next] = true;
            order.push(next);
        }
        current = next;
    }
    Ok(order.into_iter().collect())
}
