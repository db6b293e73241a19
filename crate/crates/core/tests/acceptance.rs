//! End-to-end acceptance checks. Runs as a plain binary so every check
//! prints its verdict line even when it passes:
//!
//! ```text
//! cargo test -p lnbnn-core --test acceptance
//! ```
//!
//! Set `LNBNN_SKIP_PERF=1` to skip the timing-sensitive scaling check on a
//! loaded machine; it then reports SKIP instead of PASS or FAIL.

use std::process::ExitCode;
use std::time::Instant;

use astro_float::{BigFloat, Consts, RoundingMode};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use lnbnn::ann::{brute_force_knn, ForestConfig, KdForestIndex, NnIndex};
use lnbnn::bench::{
    checks_sweep_csv, evaluate, k_sweep_csv, recall_curve, scaling_csv, scaling_experiment, strip_columns,
    sweep_checks, sweep_k, EvalParams, Method, ScalingRow, TIMING_COLUMNS,
};
use lnbnn::classifiers::{log_odds_increments, LocalNbnnModel, NbnnModel, SearchEngine};
use lnbnn::dataset::{generate_synthetic, SyntheticSpec};
use lnbnn::rng::{seeded, PortableRng};
use lnbnn::{ClassId, LabeledDescriptorSet, QueryImage};

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

type Check = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let checks: [Check; 9] = [
        ("forest at full budget equals brute force", forest_exactness),
        ("local nbnn with a full neighborhood equals nbnn", local_equals_nbnn),
        ("three-point local nbnn trace", three_point_trace),
        ("log-odds increments against a 256-bit oracle", log_odds_oracle),
        (
            "positive increments within 2 points of full log-odds",
            positive_increment_parity,
        ),
        ("k = 10 beats k = 1 and stays within 1 point of full k", k_sweep_shape),
        ("query time scaling with the number of classes", class_scaling),
        ("recall@10 non-decreasing in the check budget", recall_monotonicity),
        ("CSV outputs identical at 1 and 8 threads", thread_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let started = Instant::now();
        let outcome = check();
        let secs = started.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("[{tag}] criterion {}: {name} ({secs:.1}s): {detail}", i + 1);
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", checks.len());
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn gaussian(rng: &mut PortableRng) -> f32 {
    let z: f64 = StandardNormal.sample(rng);
    z as f32
}

/// Points drawn around `centres` uniform centres in `[-1, 1]^dim` with
/// per-coordinate standard deviation `spread`.
fn mixture(rng: &mut PortableRng, dim: usize, centres: usize, n: usize, spread: f32) -> Vec<f32> {
    let means: Vec<f32> = (0..centres * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut out = Vec::with_capacity(n * dim);
    for _ in 0..n {
        let c = rng.gen_range(0..centres);
        for j in 0..dim {
            out.push(means[c * dim + j] + spread * gaussian(rng));
        }
    }
    out
}

fn forest_exactness() -> Verdict {
    let mut rng = seeded(101);
    let mut datasets = 0;
    let mut mismatches = Vec::new();
    let mut total_queries = 0;
    while datasets < 60 {
        let dim = rng.gen_range(2..=64);
        let n = rng.gen_range(20..=5000);
        let data: Vec<f32> = match datasets % 3 {
            0 => (0..n * dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            1 => {
                let centres = rng.gen_range(1..=20);
                mixture(&mut rng, dim, centres, n, 0.05)
            }
            // coarse integer grid: many exact distance ties and duplicates
            _ => (0..n * dim).map(|_| rng.gen_range(-3i32..=3) as f32).collect(),
        };
        let config = ForestConfig {
            num_trees: rng.gen_range(1..=8),
            leaf_checks: n,
            rng_seed: rng.gen(),
        };
        let forest = KdForestIndex::build(dim, data.clone(), config).expect("forest builds");
        for _ in 0..100 {
            let k = rng.gen_range(1..=20.min(n));
            let query: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let truth = brute_force_knn(dim, &data, &query, k).expect("brute force");
            let found = forest.knn(&query, k).expect("forest search");
            if !same_up_to_ties(&found, &truth) {
                mismatches.push(format!("dataset {datasets} (n={n}, dim={dim}, k={k})"));
            }
            total_queries += 1;
        }
        datasets += 1;
    }
    verdict(
        mismatches.is_empty(),
        format!(
            "{datasets} datasets, {total_queries} queries, {} mismatches{}",
            mismatches.len(),
            mismatches.first().map(|m| format!(", first: {m}")).unwrap_or_default()
        ),
    )
}

/// Equal distance lists, and equal index sets apart from points tied with
/// the k-th distance.
fn same_up_to_ties(found: &[lnbnn::ann::Neighbor], truth: &[lnbnn::ann::Neighbor]) -> bool {
    if found.len() != truth.len() {
        return false;
    }
    if found
        .iter()
        .zip(truth)
        .any(|(a, b)| a.squared_distance != b.squared_distance)
    {
        return false;
    }
    let Some(last) = truth.last() else { return true };
    let strict = |v: &[lnbnn::ann::Neighbor]| {
        let mut ids: Vec<usize> = v
            .iter()
            .filter(|n| n.squared_distance < last.squared_distance)
            .map(|n| n.point_index)
            .collect();
        ids.sort_unstable();
        ids
    };
    strict(found) == strict(truth)
}

fn random_labeled_set(
    rng: &mut PortableRng,
    classes: usize,
    dim: usize,
    per_class: usize,
    spread: f32,
) -> LabeledDescriptorSet {
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut images = Vec::new();
    for c in 0..classes {
        let mean: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for i in 0..per_class {
            data.extend(mean.iter().map(|m| m + spread * gaussian(rng)));
            labels.push(ClassId::new(c as u32));
            images.push((c * per_class + i / 3) as u32);
        }
    }
    LabeledDescriptorSet::with_default_names(dim, data, labels, images, classes).expect("valid set")
}

fn local_equals_nbnn() -> Verdict {
    let mut rng = seeded(202);
    let mut images = 0;
    let mut agree = 0;
    for _ in 0..50 {
        let classes = rng.gen_range(2..=6);
        let dim = rng.gen_range(2..=16);
        let per_class = rng.gen_range(2..=12);
        let spread = [0.1f32, 0.5, 2.0][rng.gen_range(0..3)];
        let train = random_labeled_set(&mut rng, classes, dim, per_class, spread);
        let n = train.len();
        let local = LocalNbnnModel::build(&train, n - 1, &SearchEngine::Exact).expect("local model");
        let nbnn = NbnnModel::build(&train, &SearchEngine::Exact).expect("nbnn model");
        for _ in 0..5 {
            let count = rng.gen_range(1..=15);
            let values: Vec<f32> = (0..count * dim).map(|_| 1.5 * gaussian(&mut rng)).collect();
            let q = QueryImage::from_flat(dim, values, None).expect("query");
            let (a, _) = local.classify(&q).expect("local");
            let (b, _) = nbnn.classify(&q).expect("nbnn");
            images += 1;
            agree += usize::from(a == b);
        }
    }
    verdict(
        agree == images && images >= 200,
        format!("{agree}/{images} query images agree"),
    )
}

fn three_point_trace() -> Verdict {
    let train = LabeledDescriptorSet::with_default_names(
        2,
        vec![0.0, 0.0, 5.0, 0.0, 20.0, 0.0],
        vec![ClassId::new(0), ClassId::new(1), ClassId::new(2)],
        vec![0, 1, 2],
        3,
    )
    .expect("valid set");
    let model = LocalNbnnModel::build(&train, 2, &SearchEngine::Exact).expect("model");
    let q = QueryImage::from_flat(2, vec![1.0, 0.0], None).expect("query");
    let (class, scores) = model.classify(&q).expect("classify");
    let ok = scores.as_slice() == [-360.0, -345.0, 0.0] && class == ClassId::new(0);
    verdict(ok, format!("totals {:?}, predicted class {class}", scores.as_slice()))
}

const ORACLE_BITS: usize = 256;
const RM: RoundingMode = RoundingMode::ToEven;

fn big(v: f64) -> BigFloat {
    BigFloat::from_f64(v, ORACLE_BITS)
}

fn to_f64(v: &BigFloat) -> f64 {
    v.to_string().parse().expect("decimal rendering parses as f64")
}

/// Increments evaluated directly from the definition in 256-bit arithmetic:
/// posterior by normalized exponentials, then the difference of logits.
fn oracle_increments(distances: &[f64], priors: &[f64], bandwidth: f64, cc: &mut Consts) -> Vec<(BigFloat, bool)> {
    let one = big(1.0);
    let weights: Vec<BigFloat> = distances
        .iter()
        .map(|&d| big(-d).div(&big(bandwidth), ORACLE_BITS, RM).exp(ORACLE_BITS, RM, cc))
        .collect();
    let mut total = big(0.0);
    for w in &weights {
        total = total.add(w, ORACLE_BITS, RM);
    }
    let logit = |p: &BigFloat, cc: &mut Consts| {
        p.div(&one.sub(p, ORACLE_BITS, RM), ORACLE_BITS, RM)
            .ln(ORACLE_BITS, RM, cc)
    };
    weights
        .iter()
        .zip(priors)
        .map(|(w, &prior)| {
            let posterior = w.div(&total, ORACLE_BITS, RM);
            let prior = big(prior);
            let above = posterior.cmp(&prior).expect("comparable") > 0;
            let inc = logit(&posterior, cc).sub(&logit(&prior, cc), ORACLE_BITS, RM);
            (inc, above)
        })
        .collect()
}

fn log_odds_oracle() -> Verdict {
    let mut rng = seeded(404);
    let mut cc = Consts::new().expect("constants cache");
    let mut worst = 0.0f64;
    let mut sign_errors = 0;
    let mut values = 0;
    for _ in 0..1000 {
        let classes = rng.gen_range(2..=12);
        let scale = [1.0, 10.0, 100.0][rng.gen_range(0..3)];
        let distances: Vec<f64> = (0..classes).map(|_| rng.gen_range(0.0..scale)).collect();
        let uniform = rng.gen_bool(0.5);
        let raw: Vec<f64> = (0..classes)
            .map(|_| if uniform { 1.0 } else { rng.gen_range(0.05..1.0) })
            .collect();
        let sum: f64 = raw.iter().sum();
        let priors: Vec<f64> = raw.iter().map(|r| r / sum).collect();
        let bandwidth = [1.0, 0.5, 7.5][rng.gen_range(0..3)];

        let ours = log_odds_increments(&distances, &priors, bandwidth).expect("increments");
        let oracle = oracle_increments(&distances, &priors, bandwidth, &mut cc);
        for (value, (exact, above)) in ours.iter().zip(&oracle) {
            let diff = big(*value).sub(exact, ORACLE_BITS, RM).abs();
            let rel = to_f64(&diff.div(&exact.abs(), ORACLE_BITS, RM));
            worst = worst.max(rel);
            if (*value > 0.0) != *above {
                sign_errors += 1;
            }
            values += 1;
        }
    }
    verdict(
        worst <= 1e-10 && sign_errors == 0,
        format!("{values} increments, worst relative error {worst:.2e}, {sign_errors} sign errors"),
    )
}

const BENCHMARK_SEEDS: u64 = 5;

fn positive_increment_parity() -> Verdict {
    let mut full = 0.0;
    let mut positive = 0.0;
    let mut increments = 0.0;
    for seed in 0..BENCHMARK_SEEDS {
        let (train, queries) = generate_synthetic(&SyntheticSpec::overlapping_benchmark(seed)).expect("benchmark");
        let params = EvalParams {
            seed,
            ..EvalParams::default()
        };
        full += evaluate(Method::LogOdds, &train, &queries, &params)
            .expect("log-odds")
            .mean_per_class_accuracy();
        let report = evaluate(Method::Positive, &train, &queries, &params).expect("positive");
        positive += report.mean_per_class_accuracy();
        increments += report.mean_increments_per_descriptor.unwrap_or(0.0);
    }
    let n = BENCHMARK_SEEDS as f64;
    let (full, positive, increments) = (full / n, positive / n, increments / n);
    verdict(
        (positive - full).abs() <= 0.02,
        format!(
            "mean accuracy over {BENCHMARK_SEEDS} seeds: full {full:.4}, positive only {positive:.4} \
             (gap {:.1} points, {increments:.2} of 10 increments per descriptor)",
            100.0 * (positive - full).abs()
        ),
    )
}

fn k_sweep_shape() -> Verdict {
    let ks_head = [1usize, 2, 5, 10, 20, 50, 100, 300, 1000];
    let mut sums = vec![0.0; ks_head.len() + 1];
    let mut nbnn = 0.0;
    for seed in 0..BENCHMARK_SEEDS {
        let (train, queries) = generate_synthetic(&SyntheticSpec::overlapping_benchmark(seed)).expect("benchmark");
        let params = EvalParams {
            seed,
            ..EvalParams::default()
        };
        let mut ks = ks_head.to_vec();
        ks.push(train.len() - 1);
        let rows = sweep_k(&train, &queries, &ks, &params).expect("sweep");
        for (s, r) in sums.iter_mut().zip(&rows) {
            *s += r.accuracy;
        }
        nbnn += evaluate(Method::Nbnn, &train, &queries, &params)
            .expect("nbnn")
            .mean_per_class_accuracy();
    }
    let n = BENCHMARK_SEEDS as f64;
    let acc: Vec<f64> = sums.iter().map(|s| s / n).collect();
    let at = |k: usize| acc[ks_head.iter().position(|&v| v == k).expect("swept k")];
    let full = *acc.last().expect("full k swept");
    let curve: Vec<String> = ks_head
        .iter()
        .map(|k| format!("{k}:{:.3}", at(*k)))
        .chain([format!("full:{full:.3}")])
        .collect();
    verdict(
        at(10) >= at(1) && at(10) >= full - 0.01,
        format!(
            "mean accuracy by k [{}], nbnn {:.3}; k=10 vs k=1 {:+.1} points, vs full k {:+.1} points",
            curve.join(" "),
            nbnn / n,
            100.0 * (at(10) - at(1)),
            100.0 * (at(10) - full)
        ),
    )
}

const SCALING_CLASSES: [usize; 5] = [4, 8, 16, 32, 64];
const SCALING_REPEATS: usize = 3;

fn class_scaling() -> Verdict {
    if std::env::var_os("LNBNN_SKIP_PERF").is_some_and(|v| v != "0") {
        return Verdict::Skip("LNBNN_SKIP_PERF is set".into());
    }
    let base = SyntheticSpec::default();
    let params = EvalParams {
        checks: Some(128),
        threads: 1,
        ..EvalParams::default()
    };
    let runs: Vec<Vec<ScalingRow>> = (0..SCALING_REPEATS)
        .map(|_| scaling_experiment(&SCALING_CLASSES, &base, &params).expect("scaling run"))
        .collect();
    // per-row median over repeats
    let time = |classes: usize, method: Method| {
        let mut t: Vec<f64> = runs
            .iter()
            .map(|rows| {
                rows.iter()
                    .find(|r| r.class_count == classes && r.method == method)
                    .expect("row present")
                    .mean_query_seconds_per_image
            })
            .collect();
        t.sort_by(f64::total_cmp);
        t[t.len() / 2]
    };
    let accuracy = |classes: usize, method: Method| {
        runs[0]
            .iter()
            .find(|r| r.class_count == classes && r.method == method)
            .expect("row present")
            .accuracy
    };
    let (first, last) = (SCALING_CLASSES[0], SCALING_CLASSES[SCALING_CLASSES.len() - 1]);
    let nbnn_growth = time(last, Method::Nbnn) / time(first, Method::Nbnn);
    let local_growth = time(last, Method::Local) / time(first, Method::Local);
    let ratio = time(last, Method::Nbnn) / time(last, Method::Local);
    let (acc_nbnn, acc_local) = (accuracy(last, Method::Nbnn), accuracy(last, Method::Local));
    verdict(
        nbnn_growth >= 4.0 && local_growth <= 2.0 && ratio >= 5.0 && (acc_nbnn - acc_local).abs() <= 0.01,
        format!(
            "{first}->{last} classes: nbnn x{nbnn_growth:.1}, local x{local_growth:.2}; \
             nbnn/local at {last} classes x{ratio:.1} with accuracy {acc_nbnn:.3} vs {acc_local:.3}"
        ),
    )
}

fn recall_monotonicity() -> Verdict {
    let dim = 32;
    let mut rng = seeded(808);
    let both = mixture(&mut rng, dim, 100, 50_000 + 200, 0.15);
    let (data, queries) = both.split_at(50_000 * dim);
    let budgets = [32, 64, 128, 256, 512];
    let config = ForestConfig {
        num_trees: 4,
        leaf_checks: budgets[0],
        rng_seed: 8,
    };
    let rows = recall_curve(dim, data, queries, 10, &budgets, config).expect("recall curve");
    let monotone = rows.windows(2).all(|w| w[1].mean_recall >= w[0].mean_recall);
    let curve: Vec<String> = rows
        .iter()
        .map(|r| format!("{}:{:.3}", r.checks, r.mean_recall))
        .collect();
    verdict(
        monotone,
        format!("200 queries, mean recall@10 by budget [{}]", curve.join(" ")),
    )
}

fn outputs_at(threads: usize) -> Vec<(String, String)> {
    let (train, queries) = generate_synthetic(&SyntheticSpec::overlapping_benchmark(3)).expect("benchmark");
    let params = EvalParams {
        checks: Some(48),
        seed: 9,
        threads,
        ..EvalParams::default()
    };
    let mut out = Vec::new();
    for method in Method::ALL {
        let report = evaluate(method, &train, &queries, &params).expect("evaluate");
        let predictions: Vec<String> = report.predictions.iter().map(ToString::to_string).collect();
        out.push((format!("confusion-{method}"), report.confusion.to_csv().expect("csv")));
        out.push((format!("predictions-{method}"), predictions.join(",")));
    }
    let k = sweep_k(&train, &queries, &[1, 10, 40], &params).expect("sweep k");
    out.push(("sweep-k".into(), k_sweep_csv(&k).expect("csv")));
    let checks = sweep_checks(&train, &queries, &Method::ALL, &[8, 64, 512], &params).expect("sweep checks");
    let text = checks_sweep_csv(&checks).expect("csv");
    out.push((
        "sweep-checks".into(),
        strip_columns(&text, TIMING_COLUMNS).expect("strip"),
    ));
    let small = SyntheticSpec {
        train_images_per_class: 4,
        query_images_per_class: 3,
        ..SyntheticSpec::default()
    };
    let rows = scaling_experiment(&[2, 4, 8], &small, &params).expect("scaling");
    let text = scaling_csv(&rows).expect("csv");
    out.push(("scaling".into(), strip_columns(&text, TIMING_COLUMNS).expect("strip")));
    out
}

fn thread_determinism() -> Verdict {
    let serial = outputs_at(1);
    let parallel = outputs_at(8);
    let differing: Vec<&str> = serial
        .iter()
        .zip(&parallel)
        .filter(|(a, b)| a.1 != b.1)
        .map(|(a, _)| a.0.as_str())
        .collect();
    let bytes: usize = serial.iter().map(|(_, text)| text.len()).sum();
    verdict(
        differing.is_empty(),
        format!(
            "{} outputs ({bytes} bytes) compared, differing: {differing:?}",
            serial.len()
        ),
    )
}
