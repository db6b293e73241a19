use rayon::prelude::*;

use super::log_odds::{increments_into, LogOddsOutcome, Prior};
use super::{ClassScores, SearchEngine};
use crate::ann::{AnyIndex, NnIndex};
use crate::descriptor::{argmax_class, argmin_class, ClassId, LabeledDescriptorSet, QueryImage};
use crate::error::{Error, Result};

/// Original NBNN: a separate nearest-neighbor index for every class.
#[derive(Clone, Debug)]
pub struct NbnnModel {
    dim: usize,
    indices: Vec<AnyIndex>,
}

impl NbnnModel {
    /// Builds one index per class. Forest seeds are derived per class from
    /// the engine's seed.
    pub fn build(train: &LabeledDescriptorSet, engine: &SearchEngine) -> Result<Self> {
        let indices = (0..train.class_count())
            .into_par_iter()
            .map(|c| {
                let class = ClassId::new(c as u32);
                engine.build(train.dim(), train.class_data(class), c as u64)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NbnnModel {
            dim: train.dim(),
            indices,
        })
    }

    pub fn class_count(&self) -> usize {
        self.indices.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_index(&self, class: ClassId) -> &AnyIndex {
        &self.indices[class.index()]
    }

    /// Change the distance-check budget of every per-class forest.
    pub fn set_leaf_checks(&mut self, leaf_checks: usize) -> Result<()> {
        for index in &mut self.indices {
            if let AnyIndex::Forest(f) = index {
                f.set_leaf_checks(leaf_checks)?;
            }
        }
        Ok(())
    }

    /// Squared distance from every query descriptor to its nearest neighbor
    /// in every class: row `i` holds the `class_count` distances of
    /// descriptor `i`.
    pub fn nearest_class_distances(&self, q: &QueryImage) -> Result<Vec<Vec<f64>>> {
        check_query_image(self.dim, q)?;
        (0..q.len())
            .into_par_iter()
            .map(|i| {
                let d = q.descriptor(i);
                self.indices
                    .iter()
                    .map(|index| Ok(index.knn(d, 1)?[0].squared_distance))
                    .collect()
            })
            .collect()
    }

    /// `totals[C] = Σ_i ‖d_i − NN_C(d_i)‖²`, prediction `argmin_C totals[C]`.
    pub fn classify(&self, q: &QueryImage) -> Result<(ClassId, ClassScores)> {
        let distances = self.nearest_class_distances(q)?;
        let mut scores = ClassScores::zeros(self.class_count());
        for row in &distances {
            for (c, &d) in row.iter().enumerate() {
                scores.add(c, d);
            }
        }
        let predicted = argmin_class(scores.iter())?;
        Ok((predicted, scores))
    }

    /// Log-odds classification applying every increment (uniform prior).
    pub fn classify_log_odds(&self, q: &QueryImage, bandwidth: f64) -> Result<LogOddsOutcome> {
        self.log_odds(q, bandwidth, false)
    }

    /// Log-odds classification applying only the positive increments
    /// (uniform prior). The prediction is the class with the largest
    /// accumulated score, ties to the lowest id.
    pub fn classify_positive_increments(&self, q: &QueryImage, bandwidth: f64) -> Result<LogOddsOutcome> {
        self.log_odds(q, bandwidth, true)
    }

    fn log_odds(&self, q: &QueryImage, bandwidth: f64, positive_only: bool) -> Result<LogOddsOutcome> {
        if self.class_count() < 2 {
            return Err(Error::InvalidInput(
                "log-odds classification needs at least two classes".into(),
            ));
        }
        let distances = self.nearest_class_distances(q)?;
        let prior = Prior::uniform(self.class_count());
        let mut scores = ClassScores::zeros(self.class_count());
        let mut increments = vec![0.0; self.class_count()];
        let mut applied = 0usize;
        for row in &distances {
            increments_into(row, &prior, bandwidth, &mut increments)?;
            for (c, &inc) in increments.iter().enumerate() {
                if !positive_only || inc > 0.0 {
                    scores.add(c, inc);
                    applied += 1;
                }
            }
        }
        let predicted = argmax_class(scores.iter())?;
        Ok(LogOddsOutcome {
            predicted,
            scores,
            increments_applied: applied,
            descriptors: distances.len(),
        })
    }
}

pub(crate) fn check_query_image(dim: usize, q: &QueryImage) -> Result<()> {
    if q.is_empty() {
        return Err(Error::Empty("query image has no descriptors"));
    }
    if q.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: q.dim(),
        });
    }
    Ok(())
}
