//! Calibration surfaces: the expected maximum proportion of significant
//! nodes over connected subgraphs of each size, under the null.
//!
//! A [`CalibrationTable`] stores one value per `(N, alpha)` cell. Tables come
//! from randomization ([`calibrate`]), from closed-form lower bounds (see
//! [`crate::bounds`]), or are the identity surface `alpha` that turns every
//! calibrated statistic back into its uncalibrated form.

use std::fmt;
use std::io::{BufRead, Write};
use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::Graph;
use crate::merge::interpolate_pairs;
use crate::search::{SearchMode, Searcher};
use crate::signals::null_pvalues;
use crate::statistics::kl_unchecked;

/// Default significance levels: 0.001 to 0.009 and 0.01 to 0.09.
pub const DEFAULT_ALPHAS: [f64; 18] = [
    0.001, 0.002, 0.003, 0.004, 0.005, 0.006, 0.007, 0.008, 0.009, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09,
];

const ALPHA_MATCH: f64 = 1e-12;

/// Strictly increasing significance levels in `(0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaGrid(Vec<f64>);

impl Default for AlphaGrid {
    fn default() -> Self {
        Self(DEFAULT_ALPHAS.to_vec())
    }
}

impl AlphaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("alpha grid"));
        }
        if let Some(a) = values.iter().find(|&&a| !(a > 0.0 && a < 1.0)) {
            return Err(invalid(format!("alpha {a} outside (0, 1)")));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("alpha grid must be strictly increasing"));
        }
        Ok(Self(values))
    }

    /// The default grid truncated at `alpha_max`.
    pub fn with_max(alpha_max: f64) -> Result<Self> {
        Self::new(
            DEFAULT_ALPHAS
                .iter()
                .copied()
                .filter(|&a| a <= alpha_max + ALPHA_MATCH)
                .collect(),
        )
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn position(&self, alpha: f64) -> Option<usize> {
        self.0.iter().position(|&a| (a - alpha).abs() <= ALPHA_MATCH)
    }
}

impl FromStr for AlphaGrid {
    type Err = Error;

    /// Comma-separated levels, e.g. `0.01,0.05,0.09`.
    fn from_str(s: &str) -> Result<Self> {
        let values = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| invalid(format!("invalid alpha {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(values)
    }
}

/// Where the values of a calibration table came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Randomization,
    LowerBound,
    None,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Randomization => "randomization",
            Provenance::LowerBound => "lower_bound",
            Provenance::None => "none",
        })
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "randomization" => Ok(Provenance::Randomization),
            "lower_bound" => Ok(Provenance::LowerBound),
            "none" => Ok(Provenance::None),
            other => Err(invalid(format!("unknown provenance {other:?}"))),
        }
    }
}

/// Calibration values for sizes `1..=n_max` and every level of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationTable {
    pub fingerprint: String,
    pub grid: AlphaGrid,
    pub n_max: usize,
    /// Alpha-major: cell `(N, a)` lives at `a * n_max + N - 1`.
    values: Vec<f64>,
    stderr: Option<Vec<f64>>,
    pub replicas: usize,
    pub provenance: Provenance,
    /// First replica seed; replicas used `base_seed..base_seed + replicas`.
    pub base_seed: Option<u64>,
    pub search: SearchMode,
    /// Free-form warnings, e.g. a bound applied outside its guarantee.
    pub flags: Vec<String>,
}

impl CalibrationTable {
    pub(crate) fn from_parts(
        g: &Graph,
        grid: AlphaGrid,
        values: Vec<f64>,
        stderr: Option<Vec<f64>>,
        provenance: Provenance,
    ) -> Self {
        debug_assert_eq!(values.len(), grid.len() * g.node_count());
        Self {
            fingerprint: g.fingerprint(),
            n_max: g.node_count(),
            grid,
            values,
            stderr,
            replicas: 0,
            provenance,
            base_seed: None,
            search: SearchMode::Plain,
            flags: Vec::new(),
        }
    }

    /// Every cell equal to its own `alpha`: calibrated statistics reduce to
    /// the uncalibrated ones.
    pub fn uncalibrated(g: &Graph, grid: &AlphaGrid) -> Self {
        let n = g.node_count();
        let values = grid.values().iter().flat_map(|&a| std::iter::repeat_n(a, n)).collect();
        Self::from_parts(g, grid.clone(), values, None, Provenance::None)
    }

    #[inline]
    fn cell(&self, n: usize, alpha_index: usize) -> usize {
        debug_assert!(n >= 1 && n <= self.n_max);
        alpha_index * self.n_max + n - 1
    }

    /// Table value at size `n` and the `alpha_index`-th level of the grid.
    #[inline]
    pub fn alpha_prime(&self, n: usize, alpha_index: usize) -> f64 {
        self.values[self.cell(n, alpha_index)]
    }

    pub fn stderr(&self, n: usize, alpha_index: usize) -> Option<f64> {
        self.stderr.as_ref().map(|s| s[self.cell(n, alpha_index)])
    }

    /// The curve `N -> alpha'(N, alpha)` for one level.
    pub fn curve(&self, alpha_index: usize) -> &[f64] {
        &self.values[alpha_index * self.n_max..(alpha_index + 1) * self.n_max]
    }

    pub fn alpha_index(&self, alpha: f64) -> Result<usize> {
        self.grid.position(alpha).ok_or(Error::AlphaNotInTable(alpha))
    }

    pub fn check_fingerprint(&self, g: &Graph) -> Result<()> {
        let graph = g.fingerprint();
        if graph == self.fingerprint {
            Ok(())
        } else {
            Err(Error::FingerprintMismatch {
                table: self.fingerprint.clone(),
                graph,
            })
        }
    }

    /// Replica seeds consumed by a randomization table.
    pub fn seed_range(&self) -> Option<Range<u64>> {
        match (self.provenance, self.base_seed) {
            (Provenance::Randomization, Some(s)) => Some(s..s.saturating_add(self.replicas as u64)),
            _ => None,
        }
    }

    /// Errors when `seeds` overlaps the seeds this table was built from.
    pub fn check_disjoint(&self, seeds: Range<u64>) -> Result<()> {
        match self.seed_range() {
            Some(cal) if seeds.start < cal.end && cal.start < seeds.end => Err(Error::SeedOverlap {
                start: seeds.start,
                end: seeds.end,
                cal_start: cal.start,
                cal_end: cal.end,
            }),
            _ => Ok(()),
        }
    }

    /// Largest uncalibrated score the null surface itself would earn,
    /// `max N * KL(alpha', alpha)` over all cells.
    pub fn star_score(&self) -> f64 {
        let mut best = 0.0f64;
        for (a, &alpha) in self.grid.values().iter().enumerate() {
            for (i, &ap) in self.curve(a).iter().enumerate() {
                best = best.max((i + 1) as f64 * kl_unchecked(ap.min(1.0), alpha));
            }
        }
        best
    }

    /// Writes the table as a commented header block followed by long-format
    /// CSV rows `N,alpha,alpha_prime,stderr`, size-major.
    pub fn save<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# fingerprint={}", self.fingerprint)?;
        writeln!(out, "# K={}", self.replicas)?;
        writeln!(out, "# provenance={}", self.provenance)?;
        writeln!(out, "# n_max={}", self.n_max)?;
        if let Some(seed) = self.base_seed {
            writeln!(out, "# base_seed={seed}")?;
        }
        writeln!(out, "# search={}", self.search)?;
        if !self.flags.is_empty() {
            writeln!(out, "# flags={}", self.flags.join(";"))?;
        }
        writeln!(out, "N,alpha,alpha_prime,stderr")?;
        for n in 1..=self.n_max {
            for (a, &alpha) in self.grid.values().iter().enumerate() {
                write!(out, "{n},{alpha:.16e},{:.16e},", self.alpha_prime(n, a))?;
                if let Some(se) = self.stderr(n, a) {
                    write!(out, "{se:.16e}")?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }

    /// Reads a table written by [`save`](Self::save). When `graph` is
    /// given, its fingerprint must match.
    pub fn load<R: BufRead>(reader: R, graph: Option<&Graph>) -> Result<Self> {
        let mut header: Vec<(String, String)> = Vec::new();
        let mut rows: Vec<(usize, String)> = Vec::new();
        let mut saw_columns = false;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('#') {
                let (k, v) = rest.trim().split_once('=').ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: format!("malformed header line {trimmed:?}"),
                })?;
                header.push((k.trim().to_owned(), v.trim().to_owned()));
            } else if !saw_columns {
                if trimmed != "N,alpha,alpha_prime,stderr" {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("expected column header, found {trimmed:?}"),
                    });
                }
                saw_columns = true;
            } else {
                rows.push((line_no, trimmed.to_owned()));
            }
        }
        let get = |key: &str| header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let require =
            |key: &'static str| get(key).ok_or_else(|| invalid(format!("calibration table header lacks `{key}`")));
        let header_num = |key: &'static str| -> Result<u64> {
            require(key)?
                .parse()
                .map_err(|_| invalid(format!("calibration table header `{key}` is not an integer")))
        };

        let fingerprint = require("fingerprint")?.to_owned();
        let replicas = header_num("K")? as usize;
        let provenance: Provenance = require("provenance")?.parse()?;
        let n_max = header_num("n_max")? as usize;
        let base_seed = get("base_seed").map(|_| header_num("base_seed")).transpose()?;
        let search: SearchMode = get("search").unwrap_or("plain").parse()?;
        let flags = get("flags")
            .map(|f| f.split(';').map(str::to_owned).collect())
            .unwrap_or_default();
        if n_max == 0 {
            return Err(invalid("calibration table has n_max = 0"));
        }

        // The grid is the alpha column of the N = 1 rows.
        let mut parsed = Vec::with_capacity(rows.len());
        for (line_no, row) in &rows {
            let cells: Vec<&str> = row.split(',').collect();
            if cells.len() != 4 {
                return Err(Error::Parse {
                    line: *line_no,
                    message: format!("expected 4 columns, found {}", cells.len()),
                });
            }
            let number = |col: usize, name: &str| -> Result<f64> {
                cells[col].trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: *line_no,
                    message: format!("column {} ({name}): invalid number {:?}", col + 1, cells[col]),
                })
            };
            let n: usize = cells[0].trim().parse().map_err(|_| Error::Parse {
                line: *line_no,
                message: format!("column 1 (N): invalid size {:?}", cells[0]),
            })?;
            let alpha = number(1, "alpha")?;
            let value = number(2, "alpha_prime")?;
            let se = if cells[3].trim().is_empty() {
                None
            } else {
                Some(number(3, "stderr")?)
            };
            if !(value > 0.0 && value <= 1.0) {
                return Err(Error::Parse {
                    line: *line_no,
                    message: format!("column 3 (alpha_prime): value {value} outside (0, 1] at N={n}, alpha={alpha}"),
                });
            }
            parsed.push((*line_no, n, alpha, value, se));
        }
        let grid = AlphaGrid::new(parsed.iter().take_while(|r| r.1 == 1).map(|r| r.2).collect())
            .map_err(|e| invalid(format!("calibration table rows for N=1: {e}")))?;
        let expected = n_max * grid.len();
        if parsed.len() != expected {
            let missing = parsed.len().min(expected);
            return Err(invalid(format!(
                "calibration table has {} rows, expected {expected}; first missing cell is N={}, alpha={}",
                parsed.len(),
                missing / grid.len() + 1,
                grid.values()[missing % grid.len()]
            )));
        }
        let has_stderr = parsed[0].4.is_some();
        let mut values = vec![0.0; expected];
        let mut stderr = has_stderr.then(|| vec![0.0; expected]);
        for (idx, &(line_no, n, alpha, value, se)) in parsed.iter().enumerate() {
            let want_n = idx / grid.len() + 1;
            let a = idx % grid.len();
            if n != want_n || (alpha - grid.values()[a]).abs() > ALPHA_MATCH {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!(
                        "expected cell N={want_n}, alpha={}, found N={n}, alpha={alpha}",
                        grid.values()[a]
                    ),
                });
            }
            let cell = a * n_max + n - 1;
            values[cell] = value;
            match (&mut stderr, se) {
                (Some(s), Some(se)) => s[cell] = se,
                (None, None) => {}
                _ => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("column 4 (stderr): present on some rows only (N={n}, alpha={alpha})"),
                    })
                }
            }
        }

        let table = Self {
            fingerprint,
            grid,
            n_max,
            values,
            stderr,
            replicas,
            provenance,
            base_seed,
            search,
            flags,
        };
        if let Some(g) = graph {
            table.check_fingerprint(g)?;
            if g.node_count() != n_max {
                return Err(invalid(format!(
                    "table covers {n_max} sizes, graph has {} nodes",
                    g.node_count()
                )));
            }
        }
        Ok(table)
    }
}

/// Dense null surface of one replica: for each level (alpha-major) and each
/// size `N`, the interpolated largest significant proportion found.
pub fn replica_surface(searcher: &Searcher<'_>, grid: &AlphaGrid, seed: u64) -> Result<Vec<f64>> {
    let n = searcher.graph().node_count();
    let p = null_pvalues(n, seed)?;
    let frontiers = searcher.frontiers(&p, grid.values(), false)?;
    let mut out = vec![0.0; n * grid.len()];
    for (f, chunk) in frontiers.iter().zip(out.chunks_mut(n)) {
        let pairs: Vec<(usize, usize)> = f.pairs().collect();
        interpolate_pairs(&pairs, chunk)?;
        for (i, x) in chunk.iter_mut().enumerate() {
            *x /= (i + 1) as f64;
        }
    }
    Ok(out)
}

/// Runs `work` on every replica index in parallel and feeds the results to
/// `fold` strictly in index order.
pub(crate) fn ordered_replicas<T, W, F>(count: usize, work: W, mut fold: F) -> Result<()>
where
    T: Send,
    W: Fn(usize) -> Result<T> + Sync,
    F: FnMut(usize, T),
{
    let chunk = (rayon::current_num_threads() * 4).max(8);
    let mut start = 0;
    while start < count {
        let end = (start + chunk).min(count);
        let batch: Vec<T> = (start..end).into_par_iter().map(&work).collect::<Result<_>>()?;
        for (offset, item) in batch.into_iter().enumerate() {
            fold(start + offset, item);
        }
        start = end;
    }
    Ok(())
}

/// Randomization calibration with a plain search.
pub fn calibrate_randomization(
    g: &Graph,
    grid: &AlphaGrid,
    k_replicas: usize,
    base_seed: u64,
) -> Result<CalibrationTable> {
    calibrate(&Searcher::plain(g), grid, k_replicas, base_seed)
}

/// Randomization calibration: the mean over `k_replicas` null replicas of
/// the largest significant proportion found at each size.
///
/// Replica `r` uses seed `base_seed + r` and the same p-value draw for every
/// level, so the table is monotone in alpha. Replica results are summed in
/// index order, making the table independent of the thread count.
pub fn calibrate(
    searcher: &Searcher<'_>,
    grid: &AlphaGrid,
    k_replicas: usize,
    base_seed: u64,
) -> Result<CalibrationTable> {
    if k_replicas == 0 {
        return Err(invalid("calibration needs at least one replica"));
    }
    let g = searcher.graph();
    let cells = g.node_count() * grid.len();
    let mut mean = vec![0.0f64; cells];
    let mut m2 = vec![0.0f64; cells];
    ordered_replicas(
        k_replicas,
        |r| replica_surface(searcher, grid, base_seed.wrapping_add(r as u64)),
        |r, surface| {
            let count = (r + 1) as f64;
            for ((m, s), x) in mean.iter_mut().zip(m2.iter_mut()).zip(surface) {
                let delta = x - *m;
                *m += delta / count;
                *s += delta * (x - *m);
            }
        },
    )?;
    let k = k_replicas as f64;
    let stderr = m2
        .iter()
        .map(|&s| {
            if k_replicas > 1 {
                (s / (k - 1.0) / k).max(0.0).sqrt()
            } else {
                0.0
            }
        })
        .collect();
    // A cell stays at zero only if no replica had a significant node at all;
    // keep it a valid proportion. Scoring floors it at alpha anyway.
    let values = mean.into_iter().map(|m| m.clamp(f64::MIN_POSITIVE, 1.0)).collect();
    let mut table = CalibrationTable::from_parts(g, grid.clone(), values, Some(stderr), Provenance::Randomization);
    table.replicas = k_replicas;
    table.base_seed = Some(base_seed);
    table.search = searcher.mode();
    Ok(table)
}

/// Distribution of calibrated null scores on held-out replicas.
#[derive(Clone, Debug, PartialEq)]
pub struct NullScoreSummary {
    /// Per replica, the largest `N * KL(h, alpha')` over all cells.
    pub replica_max: Vec<f64>,
    pub mean_max: f64,
    pub p95_max: f64,
    /// Per cell (alpha-major, as in the table), the mean score.
    pub cell_mean: Vec<f64>,
    pub n_max: usize,
}

impl NullScoreSummary {
    pub fn cell(&self, n: usize, alpha_index: usize) -> f64 {
        self.cell_mean[alpha_index * self.n_max + n - 1]
    }
}

/// Scores held-out null replicas against `table`.
///
/// Each replica's dense surface `h(N, alpha)` is scored cell by cell as
/// `N * KL(h, max(alpha', alpha))`. Small values mean the table captures
/// the null maxima well.
pub fn calibrated_null_score_check(
    searcher: &Searcher<'_>,
    table: &CalibrationTable,
    grid: &AlphaGrid,
    holdout_seeds: Range<u64>,
) -> Result<NullScoreSummary> {
    let g = searcher.graph();
    table.check_fingerprint(g)?;
    table.check_disjoint(holdout_seeds.clone())?;
    if holdout_seeds.is_empty() {
        return Err(Error::EmptyInput("holdout seed range"));
    }
    let n = g.node_count();
    let indices = grid
        .values()
        .iter()
        .map(|&a| table.alpha_index(a))
        .collect::<Result<Vec<_>>>()?;
    let count = (holdout_seeds.end - holdout_seeds.start) as usize;
    let mut replica_max = Vec::with_capacity(count);
    let mut cell_sum = vec![0.0; n * grid.len()];
    ordered_replicas(
        count,
        |r| {
            let surface = replica_surface(searcher, grid, holdout_seeds.start + r as u64)?;
            let mut scores = vec![0.0; surface.len()];
            for (a, (&alpha, &ti)) in grid.values().iter().zip(&indices).enumerate() {
                for size in 1..=n {
                    let cell = a * n + size - 1;
                    let reference = table.alpha_prime(size, ti).max(alpha);
                    if reference < 1.0 {
                        scores[cell] = size as f64 * kl_unchecked(surface[cell].min(1.0), reference);
                    }
                }
            }
            Ok(scores)
        },
        |_, scores| {
            replica_max.push(scores.iter().copied().fold(0.0, f64::max));
            for (s, x) in cell_sum.iter_mut().zip(&scores) {
                *s += x;
            }
        },
    )?;
    let cell_mean = cell_sum.into_iter().map(|s| s / count as f64).collect();
    let mean_max = replica_max.iter().sum::<f64>() / count as f64;
    let mut sorted = replica_max.clone();
    sorted.sort_by(f64::total_cmp);
    let rank = ((0.95 * count as f64).ceil() as usize).clamp(1, count);
    Ok(NullScoreSummary {
        p95_max: sorted[rank - 1],
        replica_max,
        mean_max,
        cell_mean,
        n_max: n,
    })
}
