//! End-to-end detection: search every significance level, score the
//! frontiers against a calibration table, and test the winner against null
//! replicas.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::calibration::{ordered_replicas, AlphaGrid, CalibrationTable, Provenance};
use crate::error::{invalid, Error, Result};
use crate::graph::{Graph, NodeSet};
use crate::merge::Frontier;
use crate::search::{SearchMode, Searcher};
use crate::signals::{null_pvalues, PValues};
use crate::statistics::Statistic;

/// The highest-scoring connected subgraph and how it was scored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub subgraph: NodeSet,
    pub labels: Vec<String>,
    pub alpha_star: f64,
    pub n: usize,
    pub n_alpha: usize,
    pub score: f64,
    pub statistic: Statistic,
    pub provenance: Provenance,
    #[serde(default)]
    pub calibration_seed: Option<u64>,
    #[serde(default)]
    pub significance_p: Option<f64>,
    #[serde(default)]
    pub significance_seed: Option<u64>,
    #[serde(default)]
    pub null_scores: Option<Vec<f64>>,
}

impl DetectionResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("detection results serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| invalid(format!("malformed detection result: {e}")))
    }

    pub fn is_significant(&self, threshold: f64) -> bool {
        self.significance_p.is_some_and(|p| p <= threshold)
    }
}

/// Best `(score, n, alpha index)` under the ordering: higher score, then
/// smaller subgraph, then smaller alpha.
#[derive(Clone, Copy, Debug)]
struct Best {
    score: f64,
    n: usize,
    alpha_pos: usize,
    entry: usize,
}

impl Best {
    fn beats(&self, other: &Best) -> bool {
        self.score > other.score || (self.score == other.score && (self.n, self.alpha_pos) < (other.n, other.alpha_pos))
    }
}

/// Scans p-value assignments on one graph against one calibration table.
#[derive(Clone, Debug)]
pub struct Detector<'a> {
    searcher: Searcher<'a>,
    table: &'a CalibrationTable,
    alphas: Vec<f64>,
    table_index: Vec<usize>,
    statistic: Statistic,
}

impl<'a> Detector<'a> {
    pub fn new(
        g: &'a Graph,
        table: &'a CalibrationTable,
        grid: &AlphaGrid,
        statistic: Statistic,
        mode: SearchMode,
    ) -> Result<Self> {
        Self::with_searcher(Searcher::new(g, mode)?, table, grid, statistic)
    }

    pub fn with_searcher(
        searcher: Searcher<'a>,
        table: &'a CalibrationTable,
        grid: &AlphaGrid,
        statistic: Statistic,
    ) -> Result<Self> {
        let g = searcher.graph();
        table.check_fingerprint(g)?;
        if table.n_max != g.node_count() {
            return Err(invalid(format!(
                "table covers {} sizes, graph has {} nodes",
                table.n_max,
                g.node_count()
            )));
        }
        let table_index = grid
            .values()
            .iter()
            .map(|&a| table.alpha_index(a))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            searcher,
            table,
            alphas: grid.values().to_vec(),
            table_index,
            statistic,
        })
    }

    pub fn graph(&self) -> &'a Graph {
        self.searcher.graph()
    }

    pub fn table(&self) -> &'a CalibrationTable {
        self.table
    }

    pub fn statistic(&self) -> Statistic {
        self.statistic
    }

    pub fn searcher(&self) -> &Searcher<'a> {
        &self.searcher
    }

    pub fn grid(&self) -> AlphaGrid {
        AlphaGrid::new(self.alphas.clone()).expect("grid was validated on construction")
    }

    /// Calibrated score of a subgraph with the given counts.
    pub fn score_of(&self, alpha: f64, n_alpha: usize, n: usize) -> Result<f64> {
        let idx = self.table.alpha_index(alpha)?;
        if n == 0 || n > self.table.n_max || n_alpha > n {
            return Err(invalid(format!("counts n={n}, n_alpha={n_alpha} outside the table")));
        }
        Ok(self.statistic.score(alpha, n_alpha, n, self.table.alpha_prime(n, idx)))
    }

    fn best(&self, frontiers: &[Frontier]) -> Best {
        let mut best: Option<Best> = None;
        for (a, f) in frontiers.iter().enumerate() {
            let alpha = self.alphas[a];
            for (i, e) in f.entries.iter().enumerate() {
                let ap = self.table.alpha_prime(e.n, self.table_index[a]);
                let candidate = Best {
                    score: self.statistic.score(alpha, e.n_alpha, e.n, ap),
                    n: e.n,
                    alpha_pos: a,
                    entry: i,
                };
                if best.as_ref().is_none_or(|b| candidate.beats(b)) {
                    best = Some(candidate);
                }
            }
        }
        best.expect("every frontier has at least one entry")
    }

    /// Highest calibrated score over all levels and frontier entries.
    pub fn detect(&self, p: &PValues) -> Result<DetectionResult> {
        let frontiers = self.searcher.frontiers(p, &self.alphas, true)?;
        let best = self.best(&frontiers);
        let entry = &frontiers[best.alpha_pos].entries[best.entry];
        let subgraph = entry.members.clone().expect("member sets were recorded");
        let g = self.graph();
        Ok(DetectionResult {
            labels: subgraph.iter().map(|v| g.label(v)).collect(),
            subgraph,
            alpha_star: self.alphas[best.alpha_pos],
            n: entry.n,
            n_alpha: entry.n_alpha,
            score: best.score,
            statistic: self.statistic,
            provenance: self.table.provenance,
            calibration_seed: self.table.base_seed,
            significance_p: None,
            significance_seed: None,
            null_scores: None,
        })
    }

    /// The detected score alone; skips member-set reconstruction.
    pub fn max_score(&self, p: &PValues) -> Result<f64> {
        let frontiers = self.searcher.frontiers(p, &self.alphas, false)?;
        Ok(self.best(&frontiers).score)
    }

    /// Detected scores on null replicas with seeds `base_seed..base_seed + replicas`.
    pub fn null_scores(&self, replicas: usize, base_seed: u64) -> Result<Vec<f64>> {
        if replicas == 0 {
            return Err(invalid("significance testing needs at least one replica"));
        }
        self.table.check_disjoint(seed_range(base_seed, replicas))?;
        let n = self.graph().node_count();
        let mut scores = Vec::with_capacity(replicas);
        ordered_replicas(
            replicas,
            |r| self.max_score(&null_pvalues(n, base_seed.wrapping_add(r as u64))?),
            |_, s| scores.push(s),
        )?;
        Ok(scores)
    }

    /// Attaches the replica p-value `(1 + #{null >= observed}) / (1 + R)`.
    pub fn significance_test(
        &self,
        observed: &DetectionResult,
        replicas: usize,
        base_seed: u64,
    ) -> Result<DetectionResult> {
        let scores = self.null_scores(replicas, base_seed)?;
        Ok(with_null_scores(observed, scores, base_seed))
    }
}

fn seed_range(base_seed: u64, replicas: usize) -> Range<u64> {
    base_seed..base_seed.saturating_add(replicas as u64)
}

/// `(1 + #{s in null : s >= observed}) / (1 + |null|)`.
pub fn replica_pvalue(observed: f64, null: &[f64]) -> f64 {
    let exceed = null.iter().filter(|&&s| s >= observed).count();
    (1 + exceed) as f64 / (1 + null.len()) as f64
}

fn with_null_scores(observed: &DetectionResult, scores: Vec<f64>, seed: u64) -> DetectionResult {
    DetectionResult {
        significance_p: Some(replica_pvalue(observed.score, &scores)),
        significance_seed: Some(seed),
        null_scores: Some(scores),
        ..observed.clone()
    }
}

/// One-call detection on `g`.
pub fn detect(
    g: &Graph,
    p: &PValues,
    table: &CalibrationTable,
    grid: &AlphaGrid,
    statistic: Statistic,
    mode: SearchMode,
) -> Result<DetectionResult> {
    Detector::new(g, table, grid, statistic, mode)?.detect(p)
}

/// How a detected cluster is taken out before searching for the next one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RemovalMode {
    /// Set the cluster's p-values to 1; the graph and table stay valid.
    #[default]
    PValueOne,
    /// Delete the cluster's nodes; needs a fresh table for the smaller graph.
    DeleteNodes,
}

#[derive(Clone, Copy, Debug)]
pub struct MultiOptions {
    pub max_clusters: usize,
    /// A cluster is reported when its replica p-value is at most this.
    pub threshold: f64,
    pub removal: RemovalMode,
    pub replicas: usize,
    pub base_seed: u64,
}

/// Builds a calibration table for a graph with some nodes deleted.
pub type Recalibrate<'r> = dyn Fn(&Graph) -> Result<CalibrationTable> + 'r;

/// Repeated single-cluster detection. Stops at the first cluster that is
/// not significant or after `max_clusters`; only significant clusters are
/// returned, in detection order.
pub fn detect_multiple(
    detector: &Detector<'_>,
    p: &PValues,
    opts: &MultiOptions,
    recalibrate: Option<&Recalibrate<'_>>,
) -> Result<Vec<DetectionResult>> {
    if opts.max_clusters == 0 {
        return Err(invalid("max_clusters must be at least 1"));
    }
    match opts.removal {
        RemovalMode::PValueOne => {
            let null = detector.null_scores(opts.replicas, opts.base_seed)?;
            let mut current = p.clone();
            let mut found = Vec::new();
            while found.len() < opts.max_clusters {
                let result = with_null_scores(&detector.detect(&current)?, null.clone(), opts.base_seed);
                if !result.is_significant(opts.threshold) {
                    break;
                }
                current.mask_out(&result.subgraph);
                found.push(result);
            }
            Ok(found)
        }
        RemovalMode::DeleteNodes => {
            let recalibrate = recalibrate.ok_or(Error::StaleCalibration)?;
            let g = detector.graph();
            let grid = detector.grid();
            let mode = detector.searcher().mode();
            let mut keep = vec![true; g.node_count()];
            let mut found = Vec::new();
            let first = detector.significance_test(&detector.detect(p)?, opts.replicas, opts.base_seed)?;
            if !first.is_significant(opts.threshold) {
                return Ok(found);
            }
            for v in first.subgraph.iter() {
                keep[v] = false;
            }
            found.push(first);
            while found.len() < opts.max_clusters {
                if !keep.iter().any(|&k| k) {
                    break;
                }
                let (sub, originals) = g.induced_subgraph(&keep)?;
                let table = recalibrate(&sub)?;
                let sub_p = PValues::new(originals.iter().map(|&v| p.get(v)).collect())?;
                let sub_detector = Detector::new(&sub, &table, &grid, detector.statistic(), mode)?;
                let local = sub_detector.detect(&sub_p)?;
                let local = sub_detector.significance_test(&local, opts.replicas, opts.base_seed)?;
                if !local.is_significant(opts.threshold) {
                    break;
                }
                let subgraph: NodeSet = local.subgraph.iter().map(|v| originals[v]).collect();
                for v in subgraph.iter() {
                    keep[v] = false;
                }
                found.push(DetectionResult {
                    labels: subgraph.iter().map(|v| g.label(v)).collect(),
                    subgraph,
                    ..local
                });
            }
            Ok(found)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::calibrate_randomization;
    use crate::graph::{erdos_renyi, is_connected, random_walk_subgraph};
    use crate::signals::inject_piecewise;

    #[test]
    fn no_evidence_gives_single_node() {
        let g = erdos_renyi(50, 0.1, 1).unwrap();
        let grid = AlphaGrid::default();
        let table = CalibrationTable::uncalibrated(&g, &grid);
        let p = PValues::new(vec![1.0; 50]).unwrap();
        let r = detect(&g, &p, &table, &grid, Statistic::Cbj, SearchMode::Plain).unwrap();
        assert_eq!(r.score, 0.0);
        assert_eq!(r.n, 1);
        assert_eq!(r.subgraph.len(), 1);
        assert_eq!(r.alpha_star, 0.001);
    }

    #[test]
    fn missing_alpha_and_wrong_graph_are_errors() {
        let g = erdos_renyi(30, 0.1, 1).unwrap();
        let table = CalibrationTable::uncalibrated(&g, &AlphaGrid::new(vec![0.01]).unwrap());
        let grid = AlphaGrid::new(vec![0.01, 0.05]).unwrap();
        assert!(matches!(
            Detector::new(&g, &table, &grid, Statistic::Cbj, SearchMode::Plain),
            Err(Error::AlphaNotInTable(_))
        ));
        let other = erdos_renyi(30, 0.1, 2).unwrap();
        assert!(matches!(
            Detector::new(
                &other,
                &table,
                &AlphaGrid::new(vec![0.01]).unwrap(),
                Statistic::Cbj,
                SearchMode::Plain
            ),
            Err(Error::FingerprintMismatch { .. })
        ));
    }

    #[test]
    fn replica_pvalue_examples() {
        let null: Vec<f64> = (1..=99).map(f64::from).collect();
        assert_eq!(replica_pvalue(1000.0, &null), 0.01);
        assert_eq!(replica_pvalue(0.0, &null), 1.0);
    }

    #[test]
    fn detection_is_connected_and_rescorable() {
        let g = erdos_renyi(300, 0.02, 3).unwrap();
        let grid = AlphaGrid::with_max(0.05).unwrap();
        let table = calibrate_randomization(&g, &grid, 10, 1000).unwrap();
        let truth = random_walk_subgraph(&g, 12, 4).unwrap();
        let p = inject_piecewise(&g, 100.0, 0.01, truth, 5).unwrap();
        let det = Detector::new(&g, &table, &grid, Statistic::Cbj, SearchMode::Plain).unwrap();
        let r = det.detect(&p).unwrap();
        assert!(is_connected(&g, &r.subgraph).unwrap());
        assert_eq!(r.n, r.subgraph.len());
        assert_eq!(p.significant_in(&r.subgraph, r.alpha_star), r.n_alpha);
        assert_eq!(
            det.score_of(r.alpha_star, r.n_alpha, r.n).unwrap().to_bits(),
            r.score.to_bits()
        );
        assert_eq!(det.max_score(&p).unwrap(), r.score);

        let back = DetectionResult::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);

        assert!(matches!(
            det.significance_test(&r, 5, 1003),
            Err(Error::SeedOverlap { .. })
        ));
        let tested = det.significance_test(&r, 9, 5000).unwrap();
        assert_eq!(tested.null_scores.as_ref().unwrap().len(), 9);
        assert_eq!(tested.significance_p, Some(0.1));
    }

    #[test]
    fn delete_nodes_needs_recalibration() {
        let g = erdos_renyi(100, 0.05, 3).unwrap();
        let grid = AlphaGrid::new(vec![0.01, 0.05]).unwrap();
        let table = CalibrationTable::uncalibrated(&g, &grid);
        let det = Detector::new(&g, &table, &grid, Statistic::Cbj, SearchMode::Plain).unwrap();
        let p = null_pvalues(100, 1).unwrap();
        let opts = MultiOptions {
            max_clusters: 2,
            threshold: 0.05,
            removal: RemovalMode::DeleteNodes,
            replicas: 9,
            base_seed: 0,
        };
        assert!(matches!(
            detect_multiple(&det, &p, &opts, None),
            Err(Error::StaleCalibration)
        ));
        let grid2 = grid.clone();
        let recal = move |sub: &Graph| Ok(CalibrationTable::uncalibrated(sub, &grid2));
        assert!(detect_multiple(&det, &p, &opts, Some(&recal)).is_ok());
    }
}
