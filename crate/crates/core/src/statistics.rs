//! Scan statistic score functions.
//!
//! Every score compares the observed proportion `n_alpha / n` of
//! significant nodes with a reference proportion. The uncalibrated
//! reference is `alpha` itself; the calibrated variants use the expected
//! maximum proportion under the null instead.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

fn check_proportion(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {x} outside [0, 1]")))
    }
}

fn check_open(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {x} outside (0, 1)")))
    }
}

fn check_counts(n_alpha: usize, n: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("subgraph size n must be at least 1"));
    }
    if n_alpha > n {
        return Err(invalid(format!("n_alpha = {n_alpha} exceeds n = {n}")));
    }
    Ok(())
}

/// `x ln(x / y)` with the `0 ln 0 = 0` convention.
fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).ln()
    }
}

/// Bernoulli KL divergence `KL(a || b)` when `a > b`, zero otherwise.
pub fn kl_one_sided(a: f64, b: f64) -> Result<f64> {
    check_proportion("a", a)?;
    check_open("b", b)?;
    Ok(kl_unchecked(a, b))
}

#[inline]
pub(crate) fn kl_unchecked(a: f64, b: f64) -> f64 {
    if a <= b {
        0.0
    } else {
        xlogy(a, b) + xlogy(1.0 - a, 1.0 - b)
    }
}

/// Berk-Jones statistic `n * KL(n_alpha / n, alpha)`.
pub fn bj_score(alpha: f64, n_alpha: usize, n: usize) -> Result<f64> {
    check_open("alpha", alpha)?;
    check_counts(n_alpha, n)?;
    Ok(n as f64 * kl_unchecked(n_alpha as f64 / n as f64, alpha))
}

/// Calibrated Berk-Jones statistic `n * KL(n_alpha / n, alpha_prime)`.
/// An `alpha_prime` of 1 can never be exceeded and scores 0.
pub fn cbj_score(alpha: f64, n_alpha: usize, n: usize, alpha_prime: f64) -> Result<f64> {
    check_open("alpha", alpha)?;
    check_counts(n_alpha, n)?;
    if alpha_prime == 1.0 {
        return Ok(0.0);
    }
    check_open("alpha_prime", alpha_prime)?;
    Ok(n as f64 * kl_unchecked(n_alpha as f64 / n as f64, alpha_prime))
}

/// Calibrated higher criticism, floored at zero.
pub fn chc_score(alpha: f64, n_alpha: usize, n: usize, alpha_ref: f64) -> Result<f64> {
    check_open("alpha", alpha)?;
    check_counts(n_alpha, n)?;
    check_open("alpha_ref", alpha_ref)?;
    Ok(chc_unchecked(n_alpha, n, alpha_ref))
}

fn chc_unchecked(n_alpha: usize, n: usize, alpha_ref: f64) -> f64 {
    let n = n as f64;
    let excess = n_alpha as f64 - alpha_ref * n;
    (excess / (n * alpha_ref * (1.0 - alpha_ref)).sqrt()).max(0.0)
}

/// Calibrated Kolmogorov-Smirnov statistic, floored at zero.
pub fn cks_score(alpha: f64, n_alpha: usize, n: usize, alpha_ref: f64) -> Result<f64> {
    check_open("alpha", alpha)?;
    check_counts(n_alpha, n)?;
    check_open("alpha_ref", alpha_ref)?;
    Ok(cks_unchecked(n_alpha, n, alpha_ref))
}

fn cks_unchecked(n_alpha: usize, n: usize, alpha_ref: f64) -> f64 {
    let nf = n as f64;
    (nf.sqrt() * (n_alpha as f64 / nf - alpha_ref)).max(0.0)
}

/// Which calibrated statistic a scan maximizes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    #[default]
    Cbj,
    Chc,
    Cks,
}

impl Statistic {
    pub fn name(self) -> &'static str {
        match self {
            Statistic::Cbj => "cbj",
            Statistic::Chc => "chc",
            Statistic::Cks => "cks",
        }
    }

    /// Scores a subgraph against a table value `alpha_prime`.
    ///
    /// The reference proportion is `max(alpha_prime, alpha)`: a table value
    /// below `alpha` can only come from sampling noise. A reference of 1
    /// scores 0 for every statistic.
    pub fn score(self, alpha: f64, n_alpha: usize, n: usize, alpha_prime: f64) -> f64 {
        debug_assert!(n >= 1 && n_alpha <= n);
        let alpha_ref = alpha_prime.max(alpha);
        if alpha_ref >= 1.0 {
            return 0.0;
        }
        match self {
            Statistic::Cbj => n as f64 * kl_unchecked(n_alpha as f64 / n as f64, alpha_ref),
            Statistic::Chc => chc_unchecked(n_alpha, n, alpha_ref),
            Statistic::Cks => cks_unchecked(n_alpha, n, alpha_ref),
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cbj" => Ok(Statistic::Cbj),
            "chc" => Ok(Statistic::Chc),
            "cks" => Ok(Statistic::Cks),
            other => Err(invalid(format!(
                "unknown statistic {other:?} (expected cbj, chc or cks)"
            ))),
        }
    }
}
