//! Calibrated nonparametric scan statistics for finding anomalous connected
//! subgraphs.
//!
//! Each node of a graph carries a p-value. A nonparametric scan statistic
//! scores a connected subgraph by comparing its share of significant nodes
//! (`p <= alpha`) with `alpha`. Maximized over all connected subgraphs, that
//! comparison is badly biased: even under the null some connected subgraph
//! of every size holds far more than an `alpha` share of significant nodes.
//! This crate replaces `alpha` by the expected *maximum* share, estimated per
//! subgraph size either by randomization or by closed-form lower bounds.
//!
//! ```
//! use cnss::calibration::{calibrate_randomization, AlphaGrid};
//! use cnss::detect::Detector;
//! use cnss::graph::{erdos_renyi, random_walk_subgraph};
//! use cnss::search::SearchMode;
//! use cnss::signals::inject_piecewise;
//! use cnss::statistics::Statistic;
//!
//! let g = erdos_renyi(300, 0.02, 1)?;
//! let grid = AlphaGrid::with_max(0.05)?;
//! let table = calibrate_randomization(&g, &grid, 20, 1_000)?;
//!
//! let truth = random_walk_subgraph(&g, 10, 2)?;
//! let p = inject_piecewise(&g, 100.0, 0.01, truth.clone(), 3)?;
//! let detector = Detector::new(&g, &table, &grid, Statistic::Cbj, SearchMode::Plain)?;
//! let found = detector.detect(&p)?;
//! assert!(found.subgraph.intersection_len(&truth) > 0);
//! # Ok::<(), cnss::Error>(())
//! ```
//!
//! The modules follow the pipeline: [`graph`] and [`signals`] produce
//! inputs, [`merge`] searches for the best subgraph of each size,
//! [`calibration`] and [`bounds`] build the reference surface,
//! [`statistics`] scores, [`detect`] ties the steps together, and [`eval`]
//! measures the outcome. [`coretree`] optionally shrinks the graph first.

pub mod bounds;
pub mod calibration;
pub mod coretree;
pub mod detect;
pub mod error;
pub mod eval;
pub mod graph;
pub mod merge;
mod rng;
pub mod search;
pub mod signals;
pub mod statistics;

pub use error::{Error, Result};

/// The guide's chapters, compiled so their snippets run as doc-tests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/scores.md")]
    mod scores {}
    #[doc = include_str!("../../../book/src/calibration.md")]
    mod calibration {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/search.md")]
    mod search {}
    #[doc = include_str!("../../../book/src/detection.md")]
    mod detection {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
