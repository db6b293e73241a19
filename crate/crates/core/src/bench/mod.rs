//! Experiment harness: evaluation reports and the sweeps behind the CLI.
//!
//! Every experiment is deterministic given its seed except for the wall-time
//! fields. Query images are classified in parallel on a pool of
//! [`EvalParams::threads`] workers; results are reassembled in query order.

mod report;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;

pub use report::{strip_columns, ClassificationReport, ConfusionMatrix};

use crate::ann::{brute_force_knn, recall, ForestConfig, KdForestIndex, NnIndex};
use crate::classifiers::{LocalNbnnModel, NbnnModel, SearchEngine, DEFAULT_BANDWIDTH};
use crate::dataset::{generate_synthetic, SyntheticSpec};
use crate::descriptor::{ClassId, LabeledDescriptorSet, QueryImage};
use crate::error::{Error, Result};
use report::finish;

/// Column names that hold wall-clock measurements.
pub const TIMING_COLUMNS: &[&str] = &["query_seconds", "build_seconds", "mean_query_seconds_per_image"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// Sum of nearest-neighbor distances per class.
    Nbnn,
    /// Local NBNN over one merged index.
    Local,
    /// Log-odds increments, positive ones only.
    Positive,
    /// Log-odds increments, all of them.
    LogOdds,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Nbnn, Method::Local, Method::Positive, Method::LogOdds];

    pub fn name(self) -> &'static str {
        match self {
            Method::Nbnn => "nbnn",
            Method::Local => "local",
            Method::Positive => "positive",
            Method::LogOdds => "log-odds",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            Error::InvalidInput(format!(
                "unknown method {s:?} (expected nbnn, local, positive or log-odds)"
            ))
        })
    }
}

/// Parameters shared by every experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalParams {
    /// Local NBNN neighborhood size.
    pub k: usize,
    /// Location weight; applied when descriptors are loaded, echoed here.
    pub alpha: f32,
    pub trees: usize,
    /// Distance-check budget; `None` searches exactly.
    pub checks: Option<usize>,
    pub seed: u64,
    /// Worker threads; 0 lets the pool pick.
    pub threads: usize,
    /// Posterior temperature for the log-odds methods.
    pub bandwidth: f64,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            k: 10,
            alpha: 1.6,
            trees: 4,
            checks: None,
            seed: 0,
            threads: 0,
            bandwidth: DEFAULT_BANDWIDTH,
        }
    }
}

impl EvalParams {
    pub fn engine(&self) -> SearchEngine {
        match self.checks {
            None => SearchEngine::Exact,
            Some(leaf_checks) => SearchEngine::Forest(ForestConfig {
                num_trees: self.trees,
                leaf_checks,
                rng_seed: self.seed,
            }),
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))
    }
}

impl fmt::Display for EvalParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let checks = self.checks.map_or("exact".to_string(), |c| c.to_string());
        write!(
            f,
            "k={} alpha={} trees={} checks={} seed={} threads={} bandwidth={}",
            self.k, self.alpha, self.trees, checks, self.seed, self.threads, self.bandwidth
        )
    }
}

/// A model built for one method, reusable across parameter sweeps.
#[derive(Clone, Debug)]
pub enum TrainedModel {
    PerClass(NbnnModel),
    Merged(LocalNbnnModel),
}

impl TrainedModel {
    pub fn build(method: Method, train: &LabeledDescriptorSet, params: &EvalParams) -> Result<Self> {
        Ok(match method {
            Method::Local => TrainedModel::Merged(LocalNbnnModel::build(train, params.k, &params.engine())?),
            _ => TrainedModel::PerClass(NbnnModel::build(train, &params.engine())?),
        })
    }

    pub fn set_leaf_checks(&mut self, checks: usize) -> Result<()> {
        match self {
            TrainedModel::PerClass(m) => m.set_leaf_checks(checks),
            TrainedModel::Merged(m) => m.set_leaf_checks(checks),
        }
    }

    /// Predicted class and, for the log-odds methods, `(increments
    /// applied, descriptors)`.
    fn classify(
        &self,
        method: Method,
        q: &QueryImage,
        params: &EvalParams,
    ) -> Result<(ClassId, Option<(usize, usize)>)> {
        match (method, self) {
            (Method::Nbnn, TrainedModel::PerClass(m)) => Ok((m.classify(q)?.0, None)),
            (Method::Local, TrainedModel::Merged(m)) => Ok((m.classify(q)?.0, None)),
            (Method::Positive, TrainedModel::PerClass(m)) => {
                let out = m.classify_positive_increments(q, params.bandwidth)?;
                Ok((out.predicted, Some((out.increments_applied, out.descriptors))))
            }
            (Method::LogOdds, TrainedModel::PerClass(m)) => {
                let out = m.classify_log_odds(q, params.bandwidth)?;
                Ok((out.predicted, Some((out.increments_applied, out.descriptors))))
            }
            (method, _) => Err(Error::InvalidInput(format!("model was not built for method {method}"))),
        }
    }

    fn class_count(&self) -> usize {
        match self {
            TrainedModel::PerClass(m) => m.class_count(),
            TrainedModel::Merged(m) => m.class_count(),
        }
    }
}

struct QueryOutcome {
    predictions: Vec<ClassId>,
    confusion: ConfusionMatrix,
    mean_increments: Option<f64>,
    elapsed: Duration,
}

fn run_queries(
    model: &TrainedModel,
    method: Method,
    queries: &[QueryImage],
    params: &EvalParams,
) -> Result<QueryOutcome> {
    if queries.is_empty() {
        return Err(Error::Empty("no query images"));
    }
    let truths = queries
        .iter()
        .map(|q| {
            q.true_label()
                .ok_or_else(|| Error::InvalidInput("query image without a true label".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    let started = Instant::now();
    let outcomes = queries
        .par_iter()
        .map(|q| model.classify(method, q, params))
        .collect::<Result<Vec<_>>>()?;
    let elapsed = started.elapsed();

    let mut confusion = ConfusionMatrix::new(model.class_count());
    let mut applied = 0usize;
    let mut descriptors = 0usize;
    let mut predictions = Vec::with_capacity(outcomes.len());
    for (truth, (predicted, increments)) in truths.iter().zip(outcomes) {
        if truth.index() >= model.class_count() {
            return Err(Error::InvalidInput(format!("query label {truth} out of range")));
        }
        confusion.record(*truth, predicted);
        predictions.push(predicted);
        if let Some((a, d)) = increments {
            applied += a;
            descriptors += d;
        }
    }
    Ok(QueryOutcome {
        predictions,
        confusion,
        mean_increments: (descriptors > 0).then(|| applied as f64 / descriptors as f64),
        elapsed,
    })
}

/// Builds the model for `method` on `train` and classifies every query.
pub fn evaluate(
    method: Method,
    train: &LabeledDescriptorSet,
    queries: &[QueryImage],
    params: &EvalParams,
) -> Result<ClassificationReport> {
    params.pool()?.install(|| {
        let started = Instant::now();
        let model = TrainedModel::build(method, train, params)?;
        let build_time = started.elapsed();
        let outcome = run_queries(&model, method, queries, params)?;
        Ok(ClassificationReport {
            method,
            params: *params,
            confusion: outcome.confusion,
            predictions: outcome.predictions,
            mean_increments_per_descriptor: outcome.mean_increments,
            build_time,
            query_time: outcome.elapsed,
        })
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct KSweepRow {
    pub k: usize,
    pub accuracy: f64,
}

/// Local NBNN accuracy for each `k` over one split; the merged index is
/// built once.
pub fn sweep_k(
    train: &LabeledDescriptorSet,
    queries: &[QueryImage],
    ks: &[usize],
    params: &EvalParams,
) -> Result<Vec<KSweepRow>> {
    let first = *ks.first().ok_or(Error::Empty("no k values to sweep"))?;
    params.pool()?.install(|| {
        let mut model = LocalNbnnModel::build(train, first, &params.engine())?;
        ks.iter()
            .map(|&k| {
                model.set_k(k)?;
                let wrapped = TrainedModel::Merged(model.clone());
                let outcome = run_queries(&wrapped, Method::Local, queries, params)?;
                Ok(KSweepRow {
                    k,
                    accuracy: outcome.confusion.mean_per_class_accuracy(),
                })
            })
            .collect()
    })
}

pub fn k_sweep_csv(rows: &[KSweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "accuracy"])?;
    for r in rows {
        w.write_record([r.k.to_string(), r.accuracy.to_string()])?;
    }
    finish(w)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChecksSweepRow {
    pub method: Method,
    pub checks: usize,
    pub accuracy: f64,
    pub query_seconds: f64,
}

/// Accuracy and query time against the distance-check budget. For the
/// per-class methods the budget applies to each class index; for Local
/// NBNN to the merged index. Each model is built once.
pub fn sweep_checks(
    train: &LabeledDescriptorSet,
    queries: &[QueryImage],
    methods: &[Method],
    budgets: &[usize],
    params: &EvalParams,
) -> Result<Vec<ChecksSweepRow>> {
    let first = *budgets.first().ok_or(Error::Empty("no budgets to sweep"))?;
    let base = EvalParams {
        checks: Some(first),
        ..*params
    };
    params.pool()?.install(|| {
        let mut rows = Vec::with_capacity(methods.len() * budgets.len());
        for &method in methods {
            let mut model = TrainedModel::build(method, train, &base)?;
            for &checks in budgets {
                model.set_leaf_checks(checks)?;
                let outcome = run_queries(&model, method, queries, &base)?;
                rows.push(ChecksSweepRow {
                    method,
                    checks,
                    accuracy: outcome.confusion.mean_per_class_accuracy(),
                    query_seconds: outcome.elapsed.as_secs_f64(),
                });
            }
        }
        Ok(rows)
    })
}

pub fn checks_sweep_csv(rows: &[ChecksSweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "checks", "accuracy", "query_seconds"])?;
    for r in rows {
        w.write_record([
            r.method.to_string(),
            r.checks.to_string(),
            r.accuracy.to_string(),
            format!("{:.9}", r.query_seconds),
        ])?;
    }
    finish(w)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingRow {
    pub class_count: usize,
    pub method: Method,
    pub build_seconds: f64,
    pub mean_query_seconds_per_image: f64,
    pub accuracy: f64,
}

/// NBNN and Local NBNN build and per-image query time as the number of
/// classes grows, with per-class data held fixed by `base`.
pub fn scaling_experiment(
    class_counts: &[usize],
    base: &SyntheticSpec,
    params: &EvalParams,
) -> Result<Vec<ScalingRow>> {
    if class_counts.is_empty() {
        return Err(Error::Empty("no class counts"));
    }
    if class_counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("class counts must be strictly increasing".into()));
    }
    let mut rows = Vec::with_capacity(2 * class_counts.len());
    for &class_count in class_counts {
        let spec = SyntheticSpec {
            class_count,
            ..base.clone()
        };
        let (train, queries) = generate_synthetic(&spec)?;
        for method in [Method::Nbnn, Method::Local] {
            let report = evaluate(method, &train, &queries, params)?;
            rows.push(ScalingRow {
                class_count,
                method,
                build_seconds: report.build_time.as_secs_f64(),
                mean_query_seconds_per_image: report.mean_query_seconds_per_image(),
                accuracy: report.mean_per_class_accuracy(),
            });
        }
    }
    Ok(rows)
}

pub fn scaling_csv(rows: &[ScalingRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "class_count",
        "method",
        "build_seconds",
        "mean_query_seconds_per_image",
        "accuracy",
    ])?;
    for r in rows {
        w.write_record([
            r.class_count.to_string(),
            r.method.to_string(),
            format!("{:.9}", r.build_seconds),
            format!("{:.9}", r.mean_query_seconds_per_image),
            r.accuracy.to_string(),
        ])?;
    }
    finish(w)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecallRow {
    pub checks: usize,
    pub mean_recall: f64,
    pub mean_distance_checks: f64,
}

/// Mean recall@k of a forest against the exact search, per budget. The
/// forest is built once; `queries` is a flat row-major buffer.
pub fn recall_curve(
    dim: usize,
    data: &[f32],
    queries: &[f32],
    k: usize,
    budgets: &[usize],
    config: ForestConfig,
) -> Result<Vec<RecallRow>> {
    if queries.is_empty() || !queries.len().is_multiple_of(dim) {
        return Err(Error::InvalidInput("query buffer does not hold whole rows".into()));
    }
    let truth = queries
        .par_chunks(dim)
        .map(|q| brute_force_knn(dim, data, q, k))
        .collect::<Result<Vec<_>>>()?;
    let mut forest = KdForestIndex::build(dim, data.to_vec(), config)?;
    let n = truth.len() as f64;
    budgets
        .iter()
        .map(|&checks| {
            forest.set_leaf_checks(checks)?;
            let per_query = queries
                .par_chunks(dim)
                .zip(&truth)
                .map(|(q, t)| {
                    let (found, stats) = forest.knn_with_stats(q, k)?;
                    Ok((recall(&found, t), stats.distance_checks))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(RecallRow {
                checks,
                mean_recall: per_query.iter().map(|p| p.0).sum::<f64>() / n,
                mean_distance_checks: per_query.iter().map(|p| p.1 as f64).sum::<f64>() / n,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> (LabeledDescriptorSet, Vec<QueryImage>) {
        generate_synthetic(&SyntheticSpec {
            class_count: 4,
            train_images_per_class: 3,
            query_images_per_class: 3,
            descriptors_per_image: 8,
            dimension: 6,
            class_mean_separation: 10.0,
            within_class_stddev: 1.0,
            rng_seed: 2,
        })
        .unwrap()
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("svm".parse::<Method>().is_err());
    }

    #[test]
    fn separable_data_is_classified_perfectly() {
        let (train, queries) = separable();
        for method in Method::ALL {
            for checks in [None, Some(32)] {
                let params = EvalParams {
                    checks,
                    ..EvalParams::default()
                };
                let report = evaluate(method, &train, &queries, &params).unwrap();
                assert_eq!(report.mean_per_class_accuracy(), 1.0, "{method} {checks:?}");
                for c in 0..4 {
                    assert_eq!(report.confusion.row_sum(c), 3);
                }
                assert_eq!(
                    report.mean_increments_per_descriptor.is_some(),
                    matches!(method, Method::Positive | Method::LogOdds)
                );
            }
        }
    }

    #[test]
    fn log_odds_reports_all_increments() {
        let (train, queries) = separable();
        let report = evaluate(Method::LogOdds, &train, &queries, &EvalParams::default()).unwrap();
        assert_eq!(report.mean_increments_per_descriptor, Some(4.0));
    }

    #[test]
    fn queries_need_labels() {
        let (train, mut queries) = separable();
        queries[0] = QueryImage::from_flat(6, queries[0].descriptor(0).to_vec(), None).unwrap();
        assert!(evaluate(Method::Nbnn, &train, &queries, &EvalParams::default()).is_err());
    }

    #[test]
    fn single_k_gives_single_row() {
        let (train, queries) = separable();
        let rows = sweep_k(&train, &queries, &[5], &EvalParams::default()).unwrap();
        assert_eq!(rows.len(), 1);
        let csv = k_sweep_csv(&rows).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with("k,accuracy\n5,"));
    }

    #[test]
    fn checks_sweep_header() {
        let (train, queries) = separable();
        let rows = sweep_checks(
            &train,
            &queries,
            &[Method::Nbnn, Method::Local],
            &[4, 64],
            &EvalParams::default(),
        )
        .unwrap();
        assert_eq!(rows.len(), 4);
        let csv = checks_sweep_csv(&rows).unwrap();
        assert_eq!(csv.lines().next().unwrap(), "method,checks,accuracy,query_seconds");
    }

    #[test]
    fn scaling_with_two_classes_records_times() {
        let base = SyntheticSpec {
            train_images_per_class: 2,
            query_images_per_class: 2,
            descriptors_per_image: 5,
            dimension: 4,
            ..SyntheticSpec::default()
        };
        let params = EvalParams {
            checks: Some(16),
            ..EvalParams::default()
        };
        let rows = scaling_experiment(&[2], &base, &params).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows
            .iter()
            .all(|r| r.mean_query_seconds_per_image > 0.0 && r.build_seconds > 0.0));
        assert!(scaling_experiment(&[4, 2], &base, &params).is_err());
    }
}
