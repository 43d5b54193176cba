//! Frontier search over a graph, optionally through core-tree compression.

use std::fmt;
use std::str::FromStr;

use crate::coretree::{core_tree_decompose, CoreTreeDecomposition};
use crate::error::{invalid, Error, Result};
use crate::graph::Graph;
use crate::merge::{greedy_merge, merge_units, Frontier, FrontierEntry};
use crate::signals::PValues;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SearchMode {
    #[default]
    Plain,
    CoreTree {
        d: usize,
    },
}

impl fmt::Display for SearchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SearchMode::Plain => f.write_str("plain"),
            SearchMode::CoreTree { d } => write!(f, "coretree:{d}"),
        }
    }
}

impl FromStr for SearchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "plain" {
            return Ok(SearchMode::Plain);
        }
        s.strip_prefix("coretree:")
            .and_then(|d| d.parse().ok())
            .map(|d| SearchMode::CoreTree { d })
            .ok_or_else(|| invalid(format!("unknown search mode {s:?}")))
    }
}

/// Runs the greedy merge for a graph, reporting sizes and member sets in
/// original node ids regardless of compression.
#[derive(Clone, Debug)]
pub struct Searcher<'g> {
    graph: &'g Graph,
    mode: SearchMode,
    decomposition: Option<CoreTreeDecomposition>,
}

impl<'g> Searcher<'g> {
    pub fn new(graph: &'g Graph, mode: SearchMode) -> Result<Self> {
        let decomposition = match mode {
            SearchMode::Plain => None,
            SearchMode::CoreTree { d } => Some(core_tree_decompose(graph, d)?),
        };
        Ok(Self {
            graph,
            mode,
            decomposition,
        })
    }

    pub fn plain(graph: &'g Graph) -> Self {
        Self {
            graph,
            mode: SearchMode::Plain,
            decomposition: None,
        }
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn mode(&self) -> SearchMode {
        self.mode
    }

    pub fn decomposition(&self) -> Option<&CoreTreeDecomposition> {
        self.decomposition.as_ref()
    }

    /// One frontier per significance level, in the order given.
    pub fn frontiers(&self, p: &PValues, alphas: &[f64], record_sets: bool) -> Result<Vec<Frontier>> {
        if p.len() != self.graph.node_count() {
            return Err(invalid(format!(
                "{} p-values supplied for a graph with {} nodes",
                p.len(),
                self.graph.node_count()
            )));
        }
        let Some(dec) = &self.decomposition else {
            return alphas
                .iter()
                .map(|&a| greedy_merge(self.graph, p, a, record_sets))
                .collect();
        };
        let order = dec.core_order(p);
        alphas
            .iter()
            .map(|&alpha| {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(invalid(format!("alpha = {alpha} outside (0, 1)")));
                }
                let cg = dec.compress_ordered(self.graph, p, alpha, &order);
                let entries = merge_units(cg.graph(), &cg.weights, record_sets)
                    .into_iter()
                    .map(|e| {
                        let members = e.members.map(|m| cg.expand_result(&m)).transpose()?;
                        Ok(FrontierEntry { members, ..e })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Frontier { alpha, entries })
            })
            .collect()
    }
}
