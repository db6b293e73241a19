//! Randomized KD-tree forest with shared best-bin-first search.
//!
//! Construction: at every node, compute per-dimension variance of the
//! node's points, pick the split dimension uniformly among the
//! [`SPLIT_CANDIDATES`] highest-variance dimensions, and split at the mean.
//! Nodes with at most [`LEAF_CAPACITY`] points become leaves.
//!
//! Search: each tree is first descended root-to-leaf; every branch not
//! taken goes into one min-heap keyed by a lower bound on the squared
//! distance from the query to the branch's region. Branches are then
//! popped in bound order across all trees. The budget
//! ([`ForestConfig::leaf_checks`]) counts distinct points whose distance is
//! computed; points already seen through another tree are skipped without
//! being counted again.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rayon::prelude::*;
use rustc_hash::FxHashSet;

use super::results::KnnResults;
use super::{check_points, check_query, Neighbor, NnIndex, SearchStats};
use crate::descriptor::squared_distance_unchecked;
use crate::error::{Error, Result};
use crate::rng;

/// Maximum number of points stored in one leaf.
pub const LEAF_CAPACITY: usize = 16;

/// Number of highest-variance dimensions the split dimension is drawn from.
pub const SPLIT_CANDIDATES: usize = 5;

// Relative slack when pruning on the lower bound. The bound is updated
// incrementally and can exceed the directly computed distance by a few ulps.
const PRUNE_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ForestConfig {
    pub num_trees: usize,
    /// Distinct distance computations allowed per query, shared by all trees.
    pub leaf_checks: usize,
    pub rng_seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            num_trees: 4,
            leaf_checks: 128,
            rng_seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_trees == 0 {
            return Err(Error::InvalidInput("num_trees must be >= 1".into()));
        }
        if self.leaf_checks == 0 {
            return Err(Error::InvalidInput("leaf_checks must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Node {
    /// Points in `left` have `p[dim] <= value`, points in `right` have
    /// `p[dim] >= value`.
    Split {
        dim: u32,
        value: f32,
        left: u32,
        right: u32,
    },
    /// Range into the tree's point order.
    Leaf { start: u32, end: u32 },
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Tree {
    pub nodes: Vec<Node>,
    pub order: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KdForestIndex {
    pub(crate) dim: usize,
    pub(crate) data: Vec<f32>,
    pub(crate) trees: Vec<Tree>,
    pub(crate) config: ForestConfig,
}

impl KdForestIndex {
    /// Builds `config.num_trees` trees over the rows of `data`.
    ///
    /// Tree `t` draws from its own stream derived from `config.rng_seed`, so
    /// trees are built in parallel and the result depends only on the data
    /// and the seed.
    pub fn build(dim: usize, data: Vec<f32>, config: ForestConfig) -> Result<Self> {
        config.validate()?;
        let n = check_points(dim, &data)?;
        if n > u32::MAX as usize {
            return Err(Error::InvalidInput(format!("{n} points exceed the index limit")));
        }
        let trees = (0..config.num_trees)
            .into_par_iter()
            .map(|t| build_tree(dim, &data, rng::derive_seed(config.rng_seed, t as u64)))
            .collect();
        Ok(KdForestIndex {
            dim,
            data,
            trees,
            config,
        })
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    /// The same index searched with a different budget.
    pub fn with_leaf_checks(mut self, leaf_checks: usize) -> Result<Self> {
        self.config.leaf_checks = leaf_checks;
        self.config.validate()?;
        Ok(self)
    }

    pub fn set_leaf_checks(&mut self, leaf_checks: usize) -> Result<()> {
        let mut config = self.config;
        config.leaf_checks = leaf_checks;
        config.validate()?;
        self.config = config;
        Ok(())
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    /// Tree depth (longest root-to-leaf path, root at depth 0), per tree.
    pub fn depths(&self) -> Vec<usize> {
        self.trees.iter().map(tree_depth).collect()
    }

    /// Largest number of points in any leaf of any tree.
    pub fn max_leaf_size(&self) -> usize {
        self.trees
            .iter()
            .flat_map(|t| t.nodes.iter())
            .filter_map(|n| match n {
                Node::Leaf { start, end } => Some((end - start) as usize),
                Node::Split { .. } => None,
            })
            .max()
            .unwrap_or(0)
    }

    fn search(&self, query: &[f32], k: usize) -> (Vec<Neighbor>, SearchStats) {
        let mut search = Search {
            index: self,
            query,
            budget: self.config.leaf_checks,
            results: KnnResults::new(k),
            visited: FxHashSet::default(),
            heap: BinaryHeap::new(),
            offsets: Vec::new(),
            stats: SearchStats::default(),
        };
        let mut scratch = vec![0.0f64; self.dim];
        for t in 0..self.trees.len() {
            if search.exhausted() {
                break;
            }
            scratch.iter_mut().for_each(|v| *v = 0.0);
            search.descend(t, 0, 0.0, &mut scratch);
        }
        while let Some(branch) = search.heap.pop() {
            if search.exhausted() || search.prunable(branch.bound) {
                break;
            }
            let start = branch.offsets * self.dim;
            scratch.copy_from_slice(&search.offsets[start..start + self.dim]);
            search.descend(branch.tree as usize, branch.node, branch.bound, &mut scratch);
        }
        let stats = search.stats;
        (search.results.into_sorted(), stats)
    }
}

impl NnIndex for KdForestIndex {
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
        Ok(self.search(query, k))
    }
}

/// Unexplored subtree waiting in the shared queue.
#[derive(Clone, Copy, Debug)]
struct Branch {
    bound: f64,
    tree: u32,
    node: u32,
    /// Row in the query-local offset arena.
    offsets: usize,
}

impl PartialEq for Branch {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Branch {}

impl PartialOrd for Branch {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Branch {
    // reversed: BinaryHeap pops the smallest bound first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(other.tree.cmp(&self.tree))
            .then(other.node.cmp(&self.node))
    }
}

struct Search<'a> {
    index: &'a KdForestIndex,
    query: &'a [f32],
    budget: usize,
    results: KnnResults,
    visited: FxHashSet<u32>,
    heap: BinaryHeap<Branch>,
    /// Per-branch squared offsets from the query to the branch region along
    /// each dimension, one row of `dim` values per queued branch.
    offsets: Vec<f64>,
    stats: SearchStats,
}

impl Search<'_> {
    fn exhausted(&self) -> bool {
        self.stats.distance_checks >= self.budget && self.results.is_full()
    }

    fn prunable(&self, bound: f64) -> bool {
        bound > self.results.worst_distance() * (1.0 + PRUNE_SLACK)
    }

    /// Walks from `node` down to a leaf, queueing every far branch.
    ///
    /// `offsets[j]` holds the signed distance from the query to the current
    /// region along dimension `j` (zero when inside), and `bound` is the sum
    /// of their squares.
    fn descend(&mut self, tree: usize, mut node: u32, bound: f64, offsets: &mut [f64]) {
        let t = &self.index.trees[tree];
        loop {
            match t.nodes[node as usize] {
                Node::Split {
                    dim,
                    value,
                    left,
                    right,
                } => {
                    let d = dim as usize;
                    let diff = f64::from(self.query[d]) - f64::from(value);
                    let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                    let old = offsets[d];
                    let far_bound = bound - old * old + diff * diff;
                    if !self.prunable(far_bound) {
                        let row = self.offsets.len() / self.index.dim;
                        self.offsets.extend_from_slice(offsets);
                        self.offsets[row * self.index.dim + d] = diff;
                        self.heap.push(Branch {
                            bound: far_bound,
                            tree: tree as u32,
                            node: far,
                            offsets: row,
                        });
                    }
                    // the near child keeps the parent's offsets and bound
                    node = near;
                }
                Node::Leaf { start, end } => {
                    self.stats.leaves_visited += 1;
                    for &p in &t.order[start as usize..end as usize] {
                        if self.exhausted() {
                            return;
                        }
                        if !self.visited.insert(p) {
                            continue;
                        }
                        self.stats.distance_checks += 1;
                        let dist = squared_distance_unchecked(self.query, self.index.point(p as usize));
                        self.results.offer(p, dist);
                    }
                    return;
                }
            }
        }
    }
}

fn build_tree(dim: usize, data: &[f32], seed: u64) -> Tree {
    let n = data.len() / dim;
    let mut rng = rng::seeded(seed);
    let mut order: Vec<u32> = (0..n as u32).collect();
    let mut nodes = vec![Node::Leaf {
        start: 0,
        end: n as u32,
    }];
    let mut pending = vec![(0usize, 0usize, n)];
    let mut mean = vec![0.0f64; dim];
    let mut var = vec![0.0f64; dim];
    let mut ranked: Vec<usize> = Vec::with_capacity(dim);

    while let Some((slot, start, end)) = pending.pop() {
        let points = &mut order[start..end];
        let Some((split_dim, value, mid)) = choose_split(dim, data, points, &mut mean, &mut var, &mut ranked, &mut rng)
        else {
            nodes[slot] = Node::Leaf {
                start: start as u32,
                end: end as u32,
            };
            continue;
        };
        let left = nodes.len();
        nodes.push(Node::Leaf { start: 0, end: 0 });
        nodes.push(Node::Leaf { start: 0, end: 0 });
        nodes[slot] = Node::Split {
            dim: split_dim as u32,
            value,
            left: left as u32,
            right: left as u32 + 1,
        };
        // right is pushed first so the left subtree gets the lower node ids
        pending.push((left + 1, start + mid, end));
        pending.push((left, start, start + mid));
    }
    Tree { nodes, order }
}

/// Picks a split for `points` and partitions them in place.
///
/// Returns `(dimension, value, size of the left part)`, or `None` when the
/// node should be a leaf.
fn choose_split(
    dim: usize,
    data: &[f32],
    points: &mut [u32],
    mean: &mut [f64],
    var: &mut [f64],
    ranked: &mut Vec<usize>,
    rng: &mut rng::PortableRng,
) -> Option<(usize, f32, usize)> {
    if points.len() <= LEAF_CAPACITY {
        return None;
    }
    let row = |p: u32| &data[p as usize * dim..(p as usize + 1) * dim];

    mean.iter_mut().for_each(|m| *m = 0.0);
    var.iter_mut().for_each(|v| *v = 0.0);
    for &p in points.iter() {
        for (m, &x) in mean.iter_mut().zip(row(p)) {
            *m += f64::from(x);
        }
    }
    let count = points.len() as f64;
    mean.iter_mut().for_each(|m| *m /= count);
    for &p in points.iter() {
        for ((v, m), &x) in var.iter_mut().zip(mean.iter()).zip(row(p)) {
            let d = f64::from(x) - m;
            *v += d * d;
        }
    }

    ranked.clear();
    ranked.extend((0..dim).filter(|&j| var[j] > 0.0));
    if ranked.is_empty() {
        // all points identical
        return None;
    }
    ranked.sort_by(|&a, &b| var[b].total_cmp(&var[a]).then(a.cmp(&b)));
    ranked.truncate(SPLIT_CANDIDATES);
    let split_dim = ranked[rng.gen_range(0..ranked.len())];

    let value = mean[split_dim] as f32;
    let mid = partition(points, |p| row(p)[split_dim] < value);
    if mid > 0 && mid < points.len() {
        return Some((split_dim, value, mid));
    }
    // the mean rounded onto an extreme value; fall back to a median split
    points.sort_by(|&a, &b| row(a)[split_dim].total_cmp(&row(b)[split_dim]).then(a.cmp(&b)));
    let mid = points.len() / 2;
    Some((split_dim, row(points[mid])[split_dim], mid))
}

/// Stable-order-independent in-place partition; returns the number of
/// elements satisfying `pred`, which end up at the front.
fn partition(points: &mut [u32], pred: impl Fn(u32) -> bool) -> usize {
    let mut i = 0;
    let mut j = points.len();
    while i < j {
        if pred(points[i]) {
            i += 1;
        } else {
            j -= 1;
            points.swap(i, j);
        }
    }
    i
}

fn tree_depth(tree: &Tree) -> usize {
    let mut deepest = 0;
    let mut stack = vec![(0u32, 0usize)];
    while let Some((node, depth)) = stack.pop() {
        deepest = deepest.max(depth);
        if let Node::Split { left, right, .. } = tree.nodes[node as usize] {
            stack.push((left, depth + 1));
            stack.push((right, depth + 1));
        }
    }
    deepest
}
