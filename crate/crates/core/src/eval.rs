//! Detection quality metrics and detection power.

use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::graph::NodeSet;

/// Precision, recall, and their harmonic mean for one run.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

/// Scores a detected set `detected` against the true set `truth`.
/// An empty detection scores zero everywhere.
pub fn prf(truth: &NodeSet, detected: &NodeSet) -> Result<Prf> {
    if truth.is_empty() {
        return Err(Error::EmptyInput("true subgraph"));
    }
    if detected.is_empty() {
        return Ok(Prf::default());
    }
    let hits = truth.intersection_len(detected) as f64;
    let precision = hits / detected.len() as f64;
    let recall = hits / truth.len() as f64;
    let f_score = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Prf {
        precision,
        recall,
        f_score,
    })
}

/// Per-run metrics and their means.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricReport {
    pub runs: Vec<Prf>,
}

impl MetricReport {
    pub fn push(&mut self, run: Prf) {
        self.runs.push(run);
    }

    pub fn run_count(&self) -> usize {
        self.runs.len()
    }

    pub fn mean(&self) -> Prf {
        if self.runs.is_empty() {
            return Prf::default();
        }
        let k = self.runs.len() as f64;
        let sum = self.runs.iter().fold(Prf::default(), |a, r| Prf {
            precision: a.precision + r.precision,
            recall: a.recall + r.recall,
            f_score: a.f_score + r.f_score,
        });
        Prf {
            precision: sum.precision / k,
            recall: sum.recall / k,
            f_score: sum.f_score / k,
        }
    }

    /// CSV rows `run,precision,recall,fscore` followed by a `mean` row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "run,precision,recall,fscore")?;
        for (i, r) in self.runs.iter().enumerate() {
            writeln!(out, "{i},{},{},{}", r.precision, r.recall, r.f_score)?;
        }
        let m = self.mean();
        writeln!(out, "mean,{},{},{}", m.precision, m.recall, m.f_score)?;
        Ok(())
    }
}

/// Fraction of alternative scores whose null p-value is below `level`.
///
/// Each alternative score gets the p-value "fraction of null scores
/// strictly greater"; a tie with a null score therefore does not count in
/// the alternative's favor.
pub fn detection_power(alt_scores: &[f64], null_scores: &[f64], level: f64) -> Result<f64> {
    if null_scores.is_empty() {
        return Err(Error::EmptyInput("null scores"));
    }
    if alt_scores.is_empty() {
        return Err(Error::EmptyInput("alternative scores"));
    }
    if !(level > 0.0 && level <= 1.0) {
        return Err(invalid(format!("level {level} outside (0, 1]")));
    }
    let mut sorted = null_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let total = sorted.len() as f64;
    let detected = alt_scores
        .iter()
        .filter(|&&s| {
            let greater = sorted.len() - sorted.partition_point(|&x| x <= s);
            (greater as f64 / total) < level
        })
        .count();
    Ok(detected as f64 / alt_scores.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ids: impl IntoIterator<Item = usize>) -> NodeSet {
        ids.into_iter().collect()
    }

    #[test]
    fn prf_examples() {
        let r = set(0..10);
        assert_eq!(
            prf(&r, &r).unwrap(),
            Prf {
                precision: 1.0,
                recall: 1.0,
                f_score: 1.0
            }
        );
        assert_eq!(prf(&r, &set(10..20)).unwrap(), Prf::default());
        assert_eq!(prf(&r, &NodeSet::new()).unwrap(), Prf::default());
        assert!(prf(&NodeSet::new(), &r).is_err());

        // |R| = 100, |S| = 96, 69 shared.
        let m = prf(&set(0..100), &set(31..127)).unwrap();
        assert!((m.precision - 0.72).abs() < 0.005);
        assert!((m.recall - 0.69).abs() < 0.005);
        assert!((m.f_score - 0.70).abs() < 0.01);
    }

    #[test]
    fn power_examples() {
        let null: Vec<f64> = (0..100).map(f64::from).collect();
        assert_eq!(detection_power(&[1000.0, 500.0], &null, 0.05).unwrap(), 1.0);
        assert_eq!(detection_power(&[-1.0, -5.0], &null, 0.05).unwrap(), 0.0);
        // Scores 95..99 have fewer than 5 of 100 null scores strictly above.
        assert_eq!(detection_power(&null, &null, 0.05).unwrap(), 0.05);
        assert!(detection_power(&[1.0], &[], 0.05).is_err());
    }

    #[test]
    fn report_csv_has_mean_row() {
        let mut rep = MetricReport::default();
        rep.push(prf(&set(0..4), &set(0..2)).unwrap());
        rep.push(prf(&set(0..4), &set(0..4)).unwrap());
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("run,precision,recall,fscore\n0,1,0.5,"));
        assert!(text
            .trim_end()
            .ends_with(&format!("mean,1,0.75,{}", rep.mean().f_score)));
    }
}
