use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::Neighbor;

/// Candidate ordered by `(distance, index)`; the max-heap top is the worst.
#[derive(Clone, Copy, Debug)]
struct Candidate {
    dist: f64,
    index: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then(self.index.cmp(&other.index))
    }
}

/// The `k` best points seen so far.
pub(crate) struct KnnResults {
    k: usize,
    heap: BinaryHeap<Candidate>,
}

impl KnnResults {
    pub fn new(k: usize) -> Self {
        KnnResults {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    pub fn is_full(&self) -> bool {
        self.heap.len() >= self.k
    }

    /// Distance of the current k-th best, or infinity while not full.
    pub fn worst_distance(&self) -> f64 {
        if self.is_full() {
            self.heap.peek().map_or(f64::INFINITY, |c| c.dist)
        } else {
            f64::INFINITY
        }
    }

    pub fn offer(&mut self, index: u32, dist: f64) {
        let cand = Candidate { dist, index };
        if self.heap.len() < self.k {
            self.heap.push(cand);
        } else if let Some(mut top) = self.heap.peek_mut() {
            if cand < *top {
                *top = cand;
            }
        }
    }

    pub fn into_sorted(self) -> Vec<Neighbor> {
        self.heap
            .into_sorted_vec()
            .into_iter()
            .map(|c| Neighbor {
                point_index: c.index as usize,
                squared_distance: c.dist,
            })
            .collect()
    }
}
