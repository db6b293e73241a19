//! Image classification rules built on nearest-neighbor search.
//!
//! - [`NbnnModel`]: one index per class; every query descriptor is matched
//!   against every class and the image goes to the class with the smallest
//!   summed squared distance.
//! - [`LocalNbnnModel`]: one merged index; each descriptor only updates the
//!   classes found among its `k` nearest neighbors, discounted by the
//!   distance to the `k+1`-st neighbor.
//! - [`log_odds_increments`] / [`NbnnModel::classify_positive_increments`]:
//!   the NBNN evidence recast as per-descriptor log-odds updates.
//!
//! Per-class totals are accumulated in descriptor order regardless of how
//! many threads computed the per-descriptor terms, so scores are
//! bit-identical across thread counts.

mod local;
mod log_odds;
mod nbnn;

pub use local::LocalNbnnModel;
pub use log_odds::{log_odds_increments, LogOddsOutcome, DEFAULT_BANDWIDTH};
pub use nbnn::NbnnModel;

use crate::ann::{AnyIndex, BruteForceIndex, ForestConfig, KdForestIndex};
use crate::descriptor::ClassId;
use crate::error::Result;

/// Which search structure a model builds over its descriptors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchEngine {
    /// Linear scan; exact nearest neighbors.
    Exact,
    /// Randomized KD-tree forest with the given budget and seed.
    Forest(ForestConfig),
}

impl SearchEngine {
    pub(crate) fn build(&self, dim: usize, data: Vec<f32>, stream: u64) -> Result<AnyIndex> {
        Ok(match self {
            SearchEngine::Exact => AnyIndex::Exact(BruteForceIndex::new(dim, data)?),
            SearchEngine::Forest(config) => {
                let config = ForestConfig {
                    rng_seed: crate::rng::derive_seed(config.rng_seed, stream),
                    ..*config
                };
                AnyIndex::Forest(KdForestIndex::build(dim, data, config)?)
            }
        })
    }
}

/// Per-class accumulated score, dense over `0..class_count`.
///
/// For the distance rules lower is better; for the log-odds rules higher is
/// better. Classes a rule never touched hold 0.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassScores {
    totals: Vec<f64>,
}

impl ClassScores {
    pub(crate) fn zeros(class_count: usize) -> Self {
        ClassScores {
            totals: vec![0.0; class_count],
        }
    }

    pub fn get(&self, class: ClassId) -> f64 {
        self.totals[class.index()]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.totals
    }

    pub fn len(&self) -> usize {
        self.totals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.totals.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ClassId, f64)> + '_ {
        self.totals
            .iter()
            .enumerate()
            .map(|(c, &v)| (ClassId::new(c as u32), v))
    }

    pub(crate) fn add(&mut self, class: usize, value: f64) {
        self.totals[class] += value;
    }
}
