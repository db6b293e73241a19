use super::results::KnnResults;
use super::{check_points, check_query, Neighbor, NnIndex, SearchStats};
use crate::descriptor::squared_distance_unchecked;
use crate::error::Result;

/// Exact k-nearest neighbors of `query` among the rows of `data`.
///
/// Returns `min(k, rows)` neighbors ascending by squared distance, with
/// distance ties broken by lower point index.
pub fn brute_force_knn(dim: usize, data: &[f32], query: &[f32], k: usize) -> Result<Vec<Neighbor>> {
    check_points(dim, data)?;
    check_query(dim, query, k)?;
    Ok(scan(dim, data, query, k))
}

fn scan(dim: usize, data: &[f32], query: &[f32], k: usize) -> Vec<Neighbor> {
    let mut results = KnnResults::new(k);
    for (i, p) in data.chunks_exact(dim).enumerate() {
        results.offer(i as u32, squared_distance_unchecked(query, p));
    }
    results.into_sorted()
}

/// Linear-scan index; the exact reference for every approximate search.
#[derive(Clone, Debug, PartialEq)]
pub struct BruteForceIndex {
    dim: usize,
    data: Vec<f32>,
}

impl BruteForceIndex {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        check_points(dim, &data)?;
        Ok(BruteForceIndex { dim, data })
    }
}

impl NnIndex for BruteForceIndex {
    fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn point(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn knn_with_stats(&self, query: &[f32], k: usize) -> Result<(Vec<Neighbor>, SearchStats)> {
        check_query(self.dim, query, k)?;
        let stats = SearchStats {
            distance_checks: self.len(),
            leaves_visited: 0,
        };
        Ok((scan(self.dim, &self.data, query, k), stats))
    }
}
