//! NBNN evidence as per-descriptor log-odds increments.
//!
//! With `P(C|d) ∝ exp(−dist_C / β)`, the increment for class `C` is
//!
//! ```text
//! log [ P(C|d) / (1 − P(C|d)) ] − log [ P(C) / (1 − P(C)) ]
//! ```
//!
//! i.e. the change from prior odds to posterior odds. Everything is
//! evaluated in log space: `log P(C|d) = a_C − LSE(a)` and
//! `log(1 − P(C|d)) = LSE_{j≠C}(a) − LSE(a)` with `a_j = −dist_j / β`, so
//! arbitrarily large distances never underflow to `0/0`.

use super::ClassScores;
use crate::descriptor::ClassId;
use crate::error::{Error, Result};

/// Posterior temperature β used when none is given.
pub const DEFAULT_BANDWIDTH: f64 = 1.0;

/// Result of a log-odds classification of one image.
#[derive(Clone, Debug, PartialEq)]
pub struct LogOddsOutcome {
    pub predicted: ClassId,
    /// Accumulated increments; higher is better.
    pub scores: ClassScores,
    pub increments_applied: usize,
    pub descriptors: usize,
}

impl LogOddsOutcome {
    pub fn mean_increments_per_descriptor(&self) -> f64 {
        self.increments_applied as f64 / self.descriptors as f64
    }
}

/// Class priors stored as `log((1 − p) / p)`.
pub(crate) struct Prior {
    log_inverse_odds: Vec<f64>,
}

impl Prior {
    pub fn uniform(class_count: usize) -> Self {
        Prior {
            log_inverse_odds: vec![((class_count - 1) as f64).ln(); class_count],
        }
    }

    pub fn new(priors: &[f64]) -> Result<Self> {
        if priors.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::InvalidInput("priors must lie strictly between 0 and 1".into()));
        }
        let sum: f64 = priors.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("priors sum to {sum}, not 1")));
        }
        Ok(Prior {
            log_inverse_odds: priors.iter().map(|&p| (-p).ln_1p() - p.ln()).collect(),
        })
    }
}

/// Log-odds increment of every class for one descriptor.
///
/// `distances[c]` is the squared distance from the descriptor to its nearest
/// neighbor in class `c`; `priors[c]` is `P(c)`. `bandwidth` is β.
pub fn log_odds_increments(distances: &[f64], priors: &[f64], bandwidth: f64) -> Result<Vec<f64>> {
    if distances.len() != priors.len() {
        return Err(Error::InvalidInput(format!(
            "{} distances for {} priors",
            distances.len(),
            priors.len()
        )));
    }
    let prior = Prior::new(priors)?;
    let mut out = vec![0.0; distances.len()];
    increments_into(distances, &prior, bandwidth, &mut out)?;
    Ok(out)
}

pub(crate) fn increments_into(distances: &[f64], prior: &Prior, bandwidth: f64, out: &mut [f64]) -> Result<()> {
    let n = distances.len();
    if n < 2 {
        return Err(Error::InvalidInput(
            "log-odds increments need at least two classes".into(),
        ));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "bandwidth must be finite and > 0, got {bandwidth}"
        )));
    }
    if let Some(d) = distances.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(Error::InvalidInput(format!("invalid squared distance {d}")));
    }

    // a_j = -dist_j / β; LSE over all j except c via prefix and suffix sums
    let logit = |j: usize| -distances[j] / bandwidth;
    let mut prefix = vec![f64::NEG_INFINITY; n + 1];
    for j in 0..n {
        prefix[j + 1] = log_add_exp(prefix[j], logit(j));
    }
    let mut suffix = vec![f64::NEG_INFINITY; n + 1];
    for j in (0..n).rev() {
        suffix[j] = log_add_exp(suffix[j + 1], logit(j));
    }
    for c in 0..n {
        let others = log_add_exp(prefix[c], suffix[c + 1]);
        out[c] = (logit(c) - others) + prior.log_inverse_odds[c];
    }
    Ok(())
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}
