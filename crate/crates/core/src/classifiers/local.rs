use rayon::prelude::*;

use super::nbnn::check_query_image;
use super::{ClassScores, SearchEngine};
use crate::ann::{knn_with_class_lookup, AnyIndex, NnIndex};
use crate::descriptor::{argmin_class, ClassId, LabeledDescriptorSet, QueryImage};
use crate::error::{Error, Result};

/// Local NBNN: all training descriptors in one index plus a class lookup.
#[derive(Clone, Debug)]
pub struct LocalNbnnModel {
    index: AnyIndex,
    labels: Vec<ClassId>,
    class_count: usize,
    k: usize,
}

impl LocalNbnnModel {
    /// Indexes every training descriptor together. `k` is the neighborhood
    /// size; each query descriptor retrieves `k + 1` neighbors.
    pub fn build(train: &LabeledDescriptorSet, k: usize, engine: &SearchEngine) -> Result<Self> {
        let index = engine.build(train.dim(), train.data().to_vec(), 0)?;
        LocalNbnnModel::from_index(index, train.labels().to_vec(), train.class_count(), k)
    }

    pub fn from_index(index: AnyIndex, labels: Vec<ClassId>, class_count: usize, k: usize) -> Result<Self> {
        if labels.len() != index.len() {
            return Err(Error::InvalidInput(format!(
                "{} labels for {} indexed descriptors",
                labels.len(),
                index.len()
            )));
        }
        if let Some(l) = labels.iter().find(|l| l.index() >= class_count) {
            return Err(Error::InvalidInput(format!(
                "label {l} out of range for {class_count} classes"
            )));
        }
        let mut model = LocalNbnnModel {
            index,
            labels,
            class_count,
            k: 1,
        };
        model.set_k(k)?;
        Ok(model)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Change the neighborhood size without rebuilding the index.
    pub fn set_k(&mut self, k: usize) -> Result<()> {
        if k == 0 {
            return Err(Error::InvalidInput("k must be >= 1".into()));
        }
        if k + 1 > self.index.len() {
            return Err(Error::NeighborhoodTooLarge {
                requested: k + 1,
                available: self.index.len(),
            });
        }
        self.k = k;
        Ok(())
    }

    pub fn set_leaf_checks(&mut self, leaf_checks: usize) -> Result<()> {
        if let AnyIndex::Forest(f) = &mut self.index {
            f.set_leaf_checks(leaf_checks)?;
        }
        Ok(())
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn index(&self) -> &AnyIndex {
        &self.index
    }

    /// The updates one descriptor makes: `(class, dist_C − dist_B)` for every
    /// class among its `k` nearest neighbors, in order of first appearance.
    pub fn descriptor_updates(&self, descriptor: &[f32]) -> Result<Vec<(ClassId, f64)>> {
        let neighbors = knn_with_class_lookup(&self.index, &self.labels, descriptor, self.k + 1)?;
        if neighbors.len() < self.k + 1 {
            return Err(Error::NeighborhoodTooLarge {
                requested: self.k + 1,
                available: neighbors.len(),
            });
        }
        let background = neighbors[self.k].0.squared_distance;
        let mut updates: Vec<(ClassId, f64)> = Vec::with_capacity(self.k);
        // neighbors are ascending, so the first hit of a class is its minimum
        for (n, class) in &neighbors[..self.k] {
            if !updates.iter().any(|(c, _)| c == class) {
                updates.push((*class, n.squared_distance - background));
            }
        }
        Ok(updates)
    }

    /// Sums every descriptor's updates and returns the class with the
    /// smallest total; classes never found near any descriptor stay at 0.
    pub fn classify(&self, q: &QueryImage) -> Result<(ClassId, ClassScores)> {
        check_query_image(self.index.dim(), q)?;
        let per_descriptor = (0..q.len())
            .into_par_iter()
            .map(|i| self.descriptor_updates(q.descriptor(i)))
            .collect::<Result<Vec<_>>>()?;
        let mut scores = ClassScores::zeros(self.class_count);
        for updates in &per_descriptor {
            for &(class, delta) in updates {
                scores.add(class.index(), delta);
            }
        }
        let predicted = argmin_class(scores.iter())?;
        Ok((predicted, scores))
    }
}
