//! Core-tree decomposition and compression of significant periphery nodes.
//!
//! The decomposition peels nodes of degree at most `d` until none remain.
//! Survivors form the core; peeled nodes form the periphery. With `d = 1`
//! the core is the 2-core and the periphery is a forest of trees hanging
//! off it.
//!
//! Compression then folds significant periphery nodes into adjacent core
//! nodes, so the merge search only has to run on the core.

use rustc_hash::FxHashMap;

use crate::error::{invalid, Error, Result};
use crate::graph::{Graph, NodeSet};
use crate::merge::Weight;
use crate::signals::PValues;

/// A connected group of periphery nodes and the core nodes it touches.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PeripheryTree {
    pub nodes: Vec<usize>,
    pub attachments: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct CoreTreeDecomposition {
    d: usize,
    core: NodeSet,
    elimination_order: Vec<usize>,
    trees: Vec<PeripheryTree>,
    core_graph: Option<Graph>,
    /// Core index of each original node, `usize::MAX` for periphery nodes.
    core_index: Vec<usize>,
    /// Core nodes with at least one periphery neighbor.
    attach: Vec<usize>,
}

/// Peels nodes whose remaining degree is at most `d`.
pub fn core_tree_decompose(g: &Graph, d: usize) -> Result<CoreTreeDecomposition> {
    if d == 0 {
        return Err(invalid("core-tree width parameter d must be at least 1"));
    }
    let n = g.node_count();
    let mut degree: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();
    let mut removed = vec![false; n];
    let mut queued = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    for v in (0..n).rev() {
        if degree[v] <= d {
            queued[v] = true;
            stack.push(v);
        }
    }
    let mut elimination_order = Vec::new();
    while let Some(v) = stack.pop() {
        removed[v] = true;
        elimination_order.push(v);
        for &w in g.neighbors(v) {
            if !removed[w] {
                degree[w] -= 1;
                if degree[w] <= d && !queued[w] {
                    queued[w] = true;
                    stack.push(w);
                }
            }
        }
    }

    let core: NodeSet = (0..n).filter(|&v| !removed[v]).collect();
    let mut core_index = vec![usize::MAX; n];
    for (i, v) in core.iter().enumerate() {
        core_index[v] = i;
    }
    let core_graph = if core.is_empty() {
        None
    } else {
        let keep: Vec<bool> = removed.iter().map(|r| !r).collect();
        Some(g.induced_subgraph(&keep)?.0)
    };

    let mut tree_of = vec![usize::MAX; n];
    let mut trees = Vec::new();
    for start in 0..n {
        if !removed[start] || tree_of[start] != usize::MAX {
            continue;
        }
        let id = trees.len();
        let mut nodes = vec![start];
        let mut attachments = Vec::new();
        tree_of[start] = id;
        let mut i = 0;
        while i < nodes.len() {
            for &w in g.neighbors(nodes[i]) {
                if !removed[w] {
                    attachments.push(w);
                } else if tree_of[w] == usize::MAX {
                    tree_of[w] = id;
                    nodes.push(w);
                }
            }
            i += 1;
        }
        nodes.sort_unstable();
        attachments.sort_unstable();
        attachments.dedup();
        trees.push(PeripheryTree { nodes, attachments });
    }
    let mut attach: Vec<usize> = trees.iter().flat_map(|t| t.attachments.iter().copied()).collect();
    attach.sort_unstable();
    attach.dedup();

    Ok(CoreTreeDecomposition {
        d,
        core,
        elimination_order,
        trees,
        core_graph,
        core_index,
        attach,
    })
}

impl CoreTreeDecomposition {
    pub fn width(&self) -> usize {
        self.d
    }

    pub fn core(&self) -> &NodeSet {
        &self.core
    }

    pub fn trees(&self) -> &[PeripheryTree] {
        &self.trees
    }

    /// Periphery nodes in the order they were peeled.
    pub fn elimination_order(&self) -> &[usize] {
        &self.elimination_order
    }

    /// Subgraph induced by the core, with core nodes numbered in id order.
    pub fn core_graph(&self) -> Option<&Graph> {
        self.core_graph.as_ref()
    }

    pub fn is_core(&self, v: usize) -> bool {
        self.core_index[v] != usize::MAX
    }

    /// Folds significant periphery nodes into core nodes.
    ///
    /// Non-significant periphery nodes are dropped. Core nodes are visited
    /// in increasing p-value (then id); each runs a breadth-first search
    /// through still-unclaimed significant periphery nodes and absorbs what
    /// it reaches. Significant periphery nodes no search reaches are
    /// dropped. With an empty core the original graph is passed through
    /// unchanged.
    pub fn compress<'a>(&'a self, g: &'a Graph, p: &PValues, alpha: f64) -> CompressedGraph<'a> {
        let order = self.core_order(p);
        self.compress_ordered(g, p, alpha, &order)
    }

    /// Core nodes that touch the periphery, sorted by `(p, id)`. Other core
    /// nodes never absorb anything, so they are left out.
    pub(crate) fn core_order(&self, p: &PValues) -> Vec<usize> {
        let mut order = self.attach.clone();
        order.sort_by(|&a, &b| p.get(a).total_cmp(&p.get(b)).then(a.cmp(&b)));
        order
    }

    pub(crate) fn compress_ordered<'a>(
        &'a self,
        g: &'a Graph,
        p: &PValues,
        alpha: f64,
        order: &[usize],
    ) -> CompressedGraph<'a> {
        let Some(core_graph) = &self.core_graph else {
            return CompressedGraph {
                graph: g,
                originals: None,
                absorbed: FxHashMap::default(),
                weights: unit_weights((0..g.node_count()).map(|v| p.is_significant(v, alpha))),
            };
        };

        let mut weights = unit_weights(self.core.iter().map(|c| p.is_significant(c, alpha)));
        let mut claimed = vec![false; g.node_count()];
        let mut absorbed = FxHashMap::default();
        let mut queue = Vec::new();
        for &c in order {
            queue.clear();
            queue.push(c);
            let mut i = 0;
            while i < queue.len() {
                for &w in g.neighbors(queue[i]) {
                    if !self.is_core(w) && !claimed[w] && p.is_significant(w, alpha) {
                        claimed[w] = true;
                        queue.push(w);
                    }
                }
                i += 1;
            }
            if queue.len() > 1 {
                let ci = self.core_index[c];
                let extra = queue.len() - 1;
                weights[ci].n += extra;
                weights[ci].n_alpha += extra;
                absorbed.insert(ci, queue[1..].to_vec());
            }
        }
        CompressedGraph {
            graph: core_graph,
            originals: Some(self.core.as_slice()),
            absorbed,
            weights,
        }
    }
}

fn unit_weights(significant: impl Iterator<Item = bool>) -> Vec<Weight> {
    significant
        .map(|s| Weight {
            n: 1,
            n_alpha: usize::from(s),
        })
        .collect()
}

/// The core graph with per-node absorbed periphery members.
#[derive(Clone, Debug)]
pub struct CompressedGraph<'a> {
    graph: &'a Graph,
    /// Original id per compressed node; `None` when nothing was compressed.
    originals: Option<&'a [usize]>,
    absorbed: FxHashMap<usize, Vec<usize>>,
    pub(crate) weights: Vec<Weight>,
}

impl CompressedGraph<'_> {
    pub fn graph(&self) -> &Graph {
        self.graph
    }

    /// Original id of compressed node `i`.
    pub fn original(&self, i: usize) -> usize {
        self.originals.map_or(i, |o| o[i])
    }

    /// Periphery nodes folded into compressed node `i`.
    pub fn absorbed(&self, i: usize) -> &[usize] {
        self.absorbed.get(&i).map_or(&[], Vec::as_slice)
    }

    /// `(n, n_alpha)` carried by compressed node `i`.
    pub fn counts(&self, i: usize) -> (usize, usize) {
        (self.weights[i].n, self.weights[i].n_alpha)
    }

    /// Original node set represented by a set of compressed nodes.
    pub fn expand_result(&self, core_set: &NodeSet) -> Result<NodeSet> {
        let count = self.graph.node_count();
        if let Some(id) = core_set.iter().find(|&i| i >= count) {
            return Err(Error::NodeOutOfRange { id, node_count: count });
        }
        Ok(core_set
            .iter()
            .flat_map(|i| std::iter::once(self.original(i)).chain(self.absorbed(i).iter().copied()))
            .collect())
    }
}
