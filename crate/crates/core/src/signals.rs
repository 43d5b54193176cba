//! Node p-values: null draws, injected signals, and empirical ranking.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::graph::{is_connected, Graph, NodeSet};
use crate::rng;

/// One p-value per node, each in `(0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PValues(Vec<f64>);

impl PValues {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("p-value vector"));
        }
        if let Some((i, p)) = values.iter().enumerate().find(|(_, p)| !(**p > 0.0 && **p <= 1.0)) {
            return Err(invalid(format!("p-value {p} of node {i} outside (0, 1]")));
        }
        Ok(Self(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn get(&self, v: usize) -> f64 {
        self.0[v]
    }

    /// A node counts as significant at level `alpha` when `p <= alpha`.
    #[inline]
    pub fn is_significant(&self, v: usize, alpha: f64) -> bool {
        self.0[v] <= alpha
    }

    pub fn significant_count(&self, alpha: f64) -> usize {
        self.0.iter().filter(|&&p| p <= alpha).count()
    }

    pub fn significant_in(&self, s: &NodeSet, alpha: f64) -> usize {
        s.iter().filter(|&v| self.0[v] <= alpha).count()
    }

    /// Sets the p-value of every node in `s` to 1.
    pub fn mask_out(&mut self, s: &NodeSet) {
        for v in s.iter() {
            self.0[v] = 1.0;
        }
    }

    /// Writes `label p` lines in node-id order.
    pub fn write<W: Write>(&self, g: &Graph, mut out: W) -> Result<()> {
        for (v, p) in self.0.iter().enumerate() {
            writeln!(out, "{} {:e}", g.label(v), p)?;
        }
        Ok(())
    }

    /// Reads `label p` lines; every node of `g` must receive exactly one value.
    pub fn read<R: BufRead>(g: &Graph, reader: R) -> Result<Self> {
        let index = g.label_index();
        let mut values = vec![f64::NAN; g.node_count()];
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: i + 1, message };
            let tokens: Vec<&str> = trimmed.split_whitespace().collect();
            if tokens.len() != 2 {
                return Err(parse_err(format!("expected `label p`, found {} tokens", tokens.len())));
            }
            let &v = index
                .get(tokens[0])
                .ok_or_else(|| parse_err(format!("unknown node label {:?}", tokens[0])))?;
            let p: f64 = tokens[1]
                .parse()
                .map_err(|_| parse_err(format!("invalid p-value {:?}", tokens[1])))?;
            if !(p > 0.0 && p <= 1.0) {
                return Err(parse_err(format!("p-value {p} outside (0, 1]")));
            }
            if !values[v].is_nan() {
                return Err(parse_err(format!("duplicate p-value for node {:?}", tokens[0])));
            }
            values[v] = p;
        }
        if let Some(v) = values.iter().position(|p| p.is_nan()) {
            return Err(invalid(format!("no p-value given for node {:?}", g.label(v))));
        }
        Self::new(values)
    }
}

/// I.i.d. Uniform(0, 1] p-values.
pub fn null_pvalues(n: usize, seed: u64) -> Result<PValues> {
    if n == 0 {
        return Err(Error::EmptyInput("null p-values need n >= 1"));
    }
    let mut rng = rng::stream(seed, rng::STREAM_NULL);
    Ok(PValues((0..n).map(|_| 1.0 - rng.random::<f64>()).collect()))
}

/// Distribution of p-values inside the true subgraph.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SignalKind {
    /// `x ~ Normal(mu, 1)` and `p = 1 - Phi(x)`.
    Gaussian { mu: f64 },
    /// With probability `q / 100`, `p ~ Uniform(0, alpha_sig]`, otherwise
    /// `p ~ Uniform(alpha_sig, 1]`.
    Piecewise { q: f64, alpha_sig: f64 },
}

impl SignalKind {
    pub fn piecewise(q: f64) -> Self {
        SignalKind::Piecewise { q, alpha_sig: 0.01 }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            // mu = 0 is accepted so the signal can be switched off in place.
            SignalKind::Gaussian { mu } if !(mu >= 0.0 && mu.is_finite()) => Err(invalid(format!(
                "gaussian signal strength {mu} must be finite and >= 0"
            ))),
            SignalKind::Piecewise { q, .. } if !(q > 0.0 && q <= 100.0) => {
                Err(invalid(format!("piecewise signal strength q={q} outside (0, 100]")))
            }
            SignalKind::Piecewise { alpha_sig, .. } if !(alpha_sig > 0.0 && alpha_sig < 1.0) => {
                Err(invalid(format!("piecewise threshold {alpha_sig} outside (0, 1)")))
            }
            _ => Ok(()),
        }
    }
}

/// Parses `gaussian:MU`, `piecewise:Q` or `piecewise:Q:ALPHA_SIG`.
impl FromStr for SignalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| invalid(format!("bad number {t:?} in signal {s:?}")))
        };
        let kind = match parts.as_slice() {
            ["gaussian", mu] => SignalKind::Gaussian { mu: num(mu)? },
            ["piecewise", q] => SignalKind::piecewise(num(q)?),
            ["piecewise", q, a] => SignalKind::Piecewise {
                q: num(q)?,
                alpha_sig: num(a)?,
            },
            _ => return Err(invalid(format!("signal {s:?} is not gaussian:MU or piecewise:Q"))),
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalKind::Gaussian { mu } => write!(f, "gaussian:{mu}"),
            SignalKind::Piecewise { q, alpha_sig } => write!(f, "piecewise:{q}:{alpha_sig}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignalSpec {
    pub kind: SignalKind,
    pub truth: NodeSet,
}

/// Upper tail of the standard normal, floored at the smallest positive
/// double so the result stays a valid p-value.
pub fn normal_upper_tail(z: f64) -> f64 {
    (0.5 * erfc(z / std::f64::consts::SQRT_2)).clamp(f64::MIN_POSITIVE, 1.0)
}

/// Null p-values everywhere, then signal p-values on `spec.truth`.
///
/// Nodes outside the truth set receive exactly `null_pvalues(n, seed)`;
/// the signal draws come from a separate stream.
pub fn inject(g: &Graph, spec: &SignalSpec, seed: u64) -> Result<PValues> {
    spec.kind.validate()?;
    if spec.truth.is_empty() {
        return Err(Error::EmptyInput("true subgraph"));
    }
    if !is_connected(g, &spec.truth)? {
        return Err(invalid("true subgraph is not connected"));
    }
    let mut values = null_pvalues(g.node_count(), seed)?.0;
    let mut rng = rng::stream(seed, rng::STREAM_SIGNAL);
    for v in spec.truth.iter() {
        values[v] = match spec.kind {
            SignalKind::Gaussian { mu } => {
                let z: f64 = rng.sample(StandardNormal);
                normal_upper_tail(mu + z)
            }
            SignalKind::Piecewise { q, alpha_sig } => {
                let hit = rng.random::<f64>() < q / 100.0;
                let u = 1.0 - rng.random::<f64>();
                if hit {
                    (alpha_sig * u).max(f64::MIN_POSITIVE)
                } else {
                    alpha_sig + (1.0 - alpha_sig) * u
                }
            }
        };
    }
    Ok(PValues(values))
}

pub fn inject_gaussian(g: &Graph, mu: f64, truth: NodeSet, seed: u64) -> Result<PValues> {
    inject(
        g,
        &SignalSpec {
            kind: SignalKind::Gaussian { mu },
            truth,
        },
        seed,
    )
}

pub fn inject_piecewise(g: &Graph, q: f64, alpha_sig: f64, truth: NodeSet, seed: u64) -> Result<PValues> {
    inject(
        g,
        &SignalSpec {
            kind: SignalKind::Piecewise { q, alpha_sig },
            truth,
        },
        seed,
    )
}

/// `(1 + #{h in history : h >= x}) / (1 + T)`.
pub fn empirical_pvalue(x: f64, history: &[f64]) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::EmptyInput("empirical p-value history"));
    }
    let exceed = history.iter().filter(|&&h| h >= x).count();
    Ok((1 + exceed) as f64 / (1 + history.len()) as f64)
}

/// Two-stage empirical p-value of a feature vector against `T` historical
/// vectors.
///
/// Stage one ranks each feature against its history; the historical
/// vectors are ranked the same way with the current vector included in
/// their reference set. Stage two ranks the minimum stage-one p-value of the
/// current vector against the minima of the historical vectors.
pub fn two_stage_pvalue(current: &[f64], history: &[Vec<f64>]) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::EmptyInput("two-stage p-value history"));
    }
    if current.is_empty() {
        return Err(Error::EmptyInput("feature vector"));
    }
    let dim = current.len();
    if let Some(t) = history.iter().position(|h| h.len() != dim) {
        return Err(invalid(format!(
            "historical vector {t} has {} features, current has {dim}",
            history[t].len()
        )));
    }
    let t_count = history.len();
    let denom = (1 + t_count) as f64;
    let mut current_min = f64::INFINITY;
    let mut history_min = vec![f64::INFINITY; t_count];
    let mut column = Vec::with_capacity(t_count);
    for j in 0..dim {
        column.clear();
        column.extend(history.iter().map(|h| h[j]));
        column.sort_by(f64::total_cmp);
        let at_least = |x: f64| t_count - column.partition_point(|&h| h < x);
        let x = current[j];
        current_min = current_min.min((1 + at_least(x)) as f64 / denom);
        for (t, h) in history.iter().enumerate() {
            let h = h[j];
            let others = at_least(h) - 1;
            let p = (1 + usize::from(x >= h) + others) as f64 / denom;
            history_min[t] = history_min[t].min(p);
        }
    }
    let rank = history_min.iter().filter(|&&p| p <= current_min).count();
    Ok((1 + rank) as f64 / denom)
}

/// Reads a truth file: one node label per line, `#` comments.
pub fn read_truth<R: BufRead>(g: &Graph, reader: R) -> Result<NodeSet> {
    let index: HashMap<String, usize> = g.label_index();
    let mut ids = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let &v = index.get(trimmed).ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("unknown node label {trimmed:?}"),
        })?;
        ids.push(v);
    }
    if ids.is_empty() {
        return Err(Error::EmptyInput("truth file lists no nodes"));
    }
    Ok(ids.into_iter().collect())
}

pub fn write_truth<W: Write>(g: &Graph, truth: &NodeSet, mut out: W) -> Result<()> {
    for v in truth.iter() {
        writeln!(out, "{}", g.label(v))?;
    }
    Ok(())
}
