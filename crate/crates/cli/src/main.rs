use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lnbnn::bench::{
    checks_sweep_csv, evaluate, k_sweep_csv, scaling_csv, scaling_experiment, sweep_checks, sweep_k, EvalParams, Method,
};
use lnbnn::dataset::{
    generate_synthetic, group_into_queries, queries_to_set, read_any, split_by_image, write_any, DescriptorFile,
    SyntheticSpec,
};
use lnbnn::{LabeledDescriptorSet, QueryImage};

/// NBNN and Local NBNN descriptor classification experiments.
#[derive(Parser)]
#[command(name = "lnbnn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify query images with one method and report accuracy.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "local")]
        method: Method,
        /// Write the confusion matrix as CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Local NBNN accuracy for each neighborhood size.
    SweepK {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,2,5,10,20,50,100")]
        ks: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Accuracy and query time against the distance-check budget.
    SweepChecks {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', default_value = "nbnn,local")]
        methods: Vec<Method>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32,64,128,256")]
        budgets: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// NBNN and Local NBNN timing as the number of synthetic classes grows.
    Scaling {
        #[command(flatten)]
        synthetic: SyntheticArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32,64")]
        class_counts: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic training set and query set to descriptor files.
    GenSynthetic {
        #[command(flatten)]
        synthetic: SyntheticArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Training descriptors (`.csv` for CSV, anything else binary).
        #[arg(long)]
        out: PathBuf,
        /// Query descriptors, one image id per query image.
        #[arg(long)]
        queries_out: PathBuf,
    },
    /// Convert a descriptor file between CSV and the binary format.
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// The CSV input has `x,y` columns after the image id.
        #[arg(long)]
        locations: bool,
    },
}

/// Where descriptors come from: one labeled file split by image, separate
/// train and query files, or a synthetic draw.
#[derive(Args)]
struct DataArgs {
    /// Labeled descriptor file to split into train and query images.
    #[arg(long, conflicts_with_all = ["train", "queries"])]
    data: Option<PathBuf>,
    /// Training images per class when splitting `--data`.
    #[arg(long, default_value_t = 15)]
    train_images: usize,
    /// Training descriptor file.
    #[arg(long, requires = "queries")]
    train: Option<PathBuf>,
    /// Query descriptor file; descriptors sharing an image id form one query image.
    #[arg(long, requires = "train")]
    queries: Option<PathBuf>,
    /// CSV inputs carry `x,y` columns.
    #[arg(long)]
    csv_locations: bool,
    #[command(flatten)]
    synthetic: SyntheticArgs,
}

/// Synthetic data shape. Unset values come from the default settings, or from
/// the overlapping 10-class benchmark with `--overlapping`.
#[derive(Args)]
struct SyntheticArgs {
    #[arg(long)]
    overlapping: bool,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    train_per_class: Option<usize>,
    #[arg(long)]
    queries_per_class: Option<usize>,
    #[arg(long)]
    descriptors_per_image: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    stddev: Option<f64>,
}

#[derive(Args)]
struct ModelArgs {
    /// Local NBNN neighborhood size.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Weight of the (x, y) location appended to located descriptors.
    #[arg(long, default_value_t = 1.6, value_parser = parse_alpha)]
    alpha: f32,
    #[arg(long, default_value_t = 4)]
    trees: usize,
    /// Distance-check budget per search; exact search when omitted.
    #[arg(long)]
    checks: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Posterior temperature for the log-odds methods.
    #[arg(long, default_value_t = 1.0)]
    bandwidth: f64,
}

fn parse_alpha(s: &str) -> Result<f32, String> {
    let v: f32 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("alpha must be finite and >= 0, got {v}"))
    }
}

impl ModelArgs {
    fn params(&self) -> EvalParams {
        EvalParams {
            k: self.k,
            alpha: self.alpha,
            trees: self.trees,
            checks: self.checks,
            seed: self.seed,
            threads: self.threads,
            bandwidth: self.bandwidth,
        }
    }
}

impl SyntheticArgs {
    fn spec(&self, seed: u64) -> SyntheticSpec {
        let base = if self.overlapping {
            SyntheticSpec::overlapping_benchmark(seed)
        } else {
            SyntheticSpec {
                rng_seed: seed,
                ..SyntheticSpec::default()
            }
        };
        SyntheticSpec {
            class_count: self.classes.unwrap_or(base.class_count),
            train_images_per_class: self.train_per_class.unwrap_or(base.train_images_per_class),
            query_images_per_class: self.queries_per_class.unwrap_or(base.query_images_per_class),
            descriptors_per_image: self.descriptors_per_image.unwrap_or(base.descriptors_per_image),
            dimension: self.dim.unwrap_or(base.dimension),
            class_mean_separation: self.separation.unwrap_or(base.class_mean_separation),
            within_class_stddev: self.stddev.unwrap_or(base.within_class_stddev),
            rng_seed: seed,
        }
    }
}

fn load(path: &Path, csv_locations: bool, alpha: f32) -> Result<LabeledDescriptorSet> {
    Ok(read_any(path, csv_locations)?.into_descriptor_set(alpha)?)
}

fn load_data(data: &DataArgs, model: &ModelArgs) -> Result<(LabeledDescriptorSet, Vec<QueryImage>)> {
    if let Some(path) = &data.data {
        let set = load(path, data.csv_locations, model.alpha)?;
        return Ok(split_by_image(&set, data.train_images, model.seed)?);
    }
    if let (Some(train), Some(queries)) = (&data.train, &data.queries) {
        let train = load(train, data.csv_locations, model.alpha)?;
        let queries = load(queries, data.csv_locations, model.alpha)?;
        if queries.dim() != train.dim() {
            bail!(
                "query descriptors have dimension {} but training descriptors {}",
                queries.dim(),
                train.dim()
            );
        }
        if queries.class_count() > train.class_count() {
            bail!(
                "query file has {} classes but the training file only {}",
                queries.class_count(),
                train.class_count()
            );
        }
        return Ok((train, group_into_queries(&queries)?));
    }
    Ok(generate_synthetic(&data.synthetic.spec(model.seed))?)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Evaluate {
            data,
            model,
            method,
            out,
        } => {
            let (train, queries) = load_data(&data, &model)?;
            let report = evaluate(method, &train, &queries, &model.params())?;
            println!("{report}");
            for (c, acc) in report.per_class_accuracy().iter().enumerate() {
                if let Some(acc) = acc {
                    println!("  {}: {acc:.4}", train.class_names()[c]);
                }
            }
            if let Some(path) = out {
                emit(Some(&path), &report.confusion.to_csv()?)?;
            }
        }
        Command::SweepK { data, model, ks, out } => {
            let (train, queries) = load_data(&data, &model)?;
            let rows = sweep_k(&train, &queries, &ks, &model.params())?;
            emit(out.as_deref(), &k_sweep_csv(&rows)?)?;
        }
        Command::SweepChecks {
            data,
            model,
            methods,
            budgets,
            out,
        } => {
            let (train, queries) = load_data(&data, &model)?;
            let rows = sweep_checks(&train, &queries, &methods, &budgets, &model.params())?;
            emit(out.as_deref(), &checks_sweep_csv(&rows)?)?;
        }
        Command::Scaling {
            synthetic,
            model,
            class_counts,
            out,
        } => {
            let spec = synthetic.spec(model.seed);
            let rows = scaling_experiment(&class_counts, &spec, &model.params())?;
            emit(out.as_deref(), &scaling_csv(&rows)?)?;
        }
        Command::GenSynthetic {
            synthetic,
            seed,
            out,
            queries_out,
        } => {
            let spec = synthetic.spec(seed);
            let (train, queries) = generate_synthetic(&spec)?;
            let first_query_image = (spec.class_count * spec.train_images_per_class) as u32;
            let query_set = queries_to_set(&queries, spec.class_count, first_query_image)?;
            write_any(
                &out,
                &DescriptorFile {
                    set: train,
                    locations: None,
                },
            )?;
            write_any(
                &queries_out,
                &DescriptorFile {
                    set: query_set,
                    locations: None,
                },
            )?;
        }
        Command::Convert {
            input,
            output,
            locations,
        } => {
            write_any(&output, &read_any(&input, locations)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
