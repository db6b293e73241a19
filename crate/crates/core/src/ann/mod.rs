//! Nearest-neighbor search engines.
//!
//! [`BruteForceIndex`] is the exact oracle. [`KdForestIndex`] is a forest of
//! randomized KD-trees searched best-bin-first with one priority queue and
//! one distance-check budget shared by all trees. Both order results by
//! `(squared_distance, point_index)`, so at full budget the forest returns
//! exactly what the brute-force search returns.

mod brute;
mod forest;
mod io;
mod results;

pub use brute::{brute_force_knn, BruteForceIndex};
pub use forest::{ForestConfig, KdForestIndex, LEAF_CAPACITY, SPLIT_CANDIDATES};
pub use io::{FORMAT_VERSION, MAGIC};

use crate::descriptor::ClassId;
use crate::error::{Error, Result};

/// One search hit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub point_index: usize,
    pub squared_distance: f64,
}

/// Work done by one query.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SearchStats {
    /// Distinct points whose distance to the query was computed.
    pub distance_checks: usize,
    /// Tree leaves scanned (zero for brute force).
    pub leaves_visited: usize,
}

/// A k-nearest-neighbor search structure over a fixed set of points.
pub trait NnIndex: Send + Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn dim(&self) -> usize;

    /// Row `i` of the indexed point set.
    fn point(&self, i: usize) -> &[f32];

    /// Up to `k` neighbors of `query`, ascending by distance then index.
    fn knn_with_stats(&self, query: &[f32], k: usize) -> Result<(Vec<Neighbor>, SearchStats)>;

    fn knn(&self, query: &[f32], k: usize) -> Result<Vec<Neighbor>> {
        self.knn_with_stats(query, k).map(|(n, _)| n)
    }
}

pub(crate) fn check_query(dim: usize, query: &[f32], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be >= 1".into()));
    }
    if query.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: query.len(),
        });
    }
    if query.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("query has non-finite values".into()));
    }
    Ok(())
}

pub(crate) fn check_points(dim: usize, data: &[f32]) -> Result<usize> {
    if dim == 0 {
        return Err(Error::InvalidInput("dimension must be >= 1".into()));
    }
    if data.is_empty() {
        return Err(Error::Empty("cannot index an empty point set"));
    }
    if !data.len().is_multiple_of(dim) {
        return Err(Error::InvalidInput(format!(
            "{} values do not form points of dimension {dim}",
            data.len()
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("indexed points contain non-finite values".into()));
    }
    Ok(data.len() / dim)
}

/// [`NnIndex::knn`] with every neighbor annotated by its class, looked up
/// in `labels` (parallel to the indexed points).
pub fn knn_with_class_lookup<I: NnIndex + ?Sized>(
    index: &I,
    labels: &[ClassId],
    query: &[f32],
    k: usize,
) -> Result<Vec<(Neighbor, ClassId)>> {
    if labels.len() != index.len() {
        return Err(Error::InvalidInput(format!(
            "{} labels for an index of {} points",
            labels.len(),
            index.len()
        )));
    }
    Ok(index
        .knn(query, k)?
        .into_iter()
        .map(|n| (n, labels[n.point_index]))
        .collect())
}

/// Either search engine behind one type, so models can hold a uniform
/// collection of indices.
#[derive(Clone, Debug)]
pub enum AnyIndex {
    Exact(BruteForceIndex),
    Forest(KdForestIndex),
}

impl NnIndex for AnyIndex {
    fn len(&self) -> usize {
        match self {
            AnyIndex::Exact(i) => i.len(),
            AnyIndex::Forest(i) => i.len(),
        }
    }

    fn dim(&self) -> usize {
        match self {
            AnyIndex::Exact(i) => i.dim(),
            AnyIndex::Forest(i) => i.dim(),
        }
    }

    fn point(&self, i: usize) -> &[f32] {
        match self {
            AnyIndex::Exact(x) => x.point(i),
            AnyIndex::Forest(x) => x.point(i),
        }
    }

    fn knn_with_stats(&self, query: &[f32], k: usize) -> Result<(Vec<Neighbor>, SearchStats)> {
        match self {
            AnyIndex::Exact(i) => i.knn_with_stats(query, k),
            AnyIndex::Forest(i) => i.knn_with_stats(query, k),
        }
    }
}

/// Fraction of `truth` (by point index) present in `found`.
pub fn recall(found: &[Neighbor], truth: &[Neighbor]) -> f64 {
    if truth.is_empty() {
        return 1.0;
    }
    let hits = truth
        .iter()
        .filter(|t| found.iter().any(|f| f.point_index == t.point_index))
        .count();
    hits as f64 / truth.len() as f64
}
