use std::fmt;
use std::time::Duration;

use crate::descriptor::ClassId;
use crate::error::{Error, Result};

use super::{EvalParams, Method};

/// Counts of (true class, predicted class) pairs; row = true, column =
/// predicted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    class_count: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(class_count: usize) -> Self {
        ConfusionMatrix {
            class_count,
            counts: vec![0; class_count * class_count],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("confusion matrix must be square".into()));
        }
        Ok(ConfusionMatrix {
            class_count: n,
            counts: rows.concat(),
        })
    }

    pub fn record(&mut self, truth: ClassId, predicted: ClassId) {
        self.counts[truth.index() * self.class_count + predicted.index()] += 1;
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn get(&self, truth: ClassId, predicted: ClassId) -> u64 {
        self.counts[truth.index() * self.class_count + predicted.index()]
    }

    pub fn row(&self, truth: usize) -> &[u64] {
        &self.counts[truth * self.class_count..(truth + 1) * self.class_count]
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        self.row(truth).iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Diagonal over row sum per class; `None` for classes with no queries.
    pub fn per_class_accuracy(&self) -> Vec<Option<f64>> {
        (0..self.class_count)
            .map(|c| {
                let total = self.row_sum(c);
                (total > 0).then(|| self.row(c)[c] as f64 / total as f64)
            })
            .collect()
    }

    /// Mean of the per-class accuracies over classes that have queries.
    pub fn mean_per_class_accuracy(&self) -> f64 {
        let present: Vec<f64> = self.per_class_accuracy().into_iter().flatten().collect();
        if present.is_empty() {
            return 0.0;
        }
        present.iter().sum::<f64>() / present.len() as f64
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["true\\predicted".to_string()];
        header.extend((0..self.class_count).map(|c| c.to_string()));
        w.write_record(&header)?;
        for c in 0..self.class_count {
            let mut row = vec![c.to_string()];
            row.extend(self.row(c).iter().map(u64::to_string));
            w.write_record(&row)?;
        }
        finish(w)
    }
}

/// Outcome of classifying a set of query images with one method.
#[derive(Clone, Debug)]
pub struct ClassificationReport {
    pub method: Method,
    pub params: EvalParams,
    pub confusion: ConfusionMatrix,
    pub predictions: Vec<ClassId>,
    /// Average increments applied per descriptor (log-odds methods only).
    pub mean_increments_per_descriptor: Option<f64>,
    pub build_time: Duration,
    pub query_time: Duration,
}

impl ClassificationReport {
    pub fn per_class_accuracy(&self) -> Vec<Option<f64>> {
        self.confusion.per_class_accuracy()
    }

    pub fn mean_per_class_accuracy(&self) -> f64 {
        self.confusion.mean_per_class_accuracy()
    }

    pub fn mean_query_seconds_per_image(&self) -> f64 {
        let n = self.predictions.len().max(1);
        self.query_time.as_secs_f64() / n as f64
    }
}

impl fmt::Display for ClassificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "method: {}", self.method)?;
        writeln!(f, "params: {}", self.params)?;
        writeln!(f, "query images: {}", self.predictions.len())?;
        writeln!(f, "mean per-class accuracy: {:.4}", self.mean_per_class_accuracy())?;
        if let Some(inc) = self.mean_increments_per_descriptor {
            writeln!(f, "mean increments per descriptor: {inc:.3}")?;
        }
        writeln!(f, "build seconds: {:.6}", self.build_time.as_secs_f64())?;
        write!(
            f,
            "query seconds: {:.6} ({:.6} per image)",
            self.query_time.as_secs_f64(),
            self.mean_query_seconds_per_image()
        )
    }
}

pub(crate) fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidInput(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Drops the named columns from a CSV document; used to compare outputs
/// whose only nondeterministic fields are wall times.
pub fn strip_columns(csv_text: &str, columns: &[&str]) -> Result<String> {
    let mut reader = csv::ReaderBuilder::new().from_reader(csv_text.as_bytes());
    let header = reader.headers()?.clone();
    let keep: Vec<usize> = (0..header.len()).filter(|&i| !columns.contains(&&header[i])).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(keep.iter().map(|&i| &header[i]))?;
    for record in reader.records() {
        let record = record?;
        w.write_record(keep.iter().map(|&i| &record[i]))?;
    }
    finish(w)
}
