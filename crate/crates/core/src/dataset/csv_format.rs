//! CSV fixtures: one record per line,
//! `class_id,image_id[,x,y],v1,...,vd`, no header.

use std::path::Path;

use super::DescriptorFile;
use crate::descriptor::{default_class_names, ClassId, LabeledDescriptorSet};
use crate::error::{Error, Result};

/// Reads a CSV fixture. `with_locations` says whether columns 3 and 4 are
/// `x, y`. The class count is one more than the largest class id.
pub fn read_csv(path: &Path, with_locations: bool) -> Result<DescriptorFile> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let leading = if with_locations { 4 } else { 2 };
    let mut dim = None;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut image_ids = Vec::new();
    let mut locations = Vec::new();

    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let line = line + 1;
        let bad = |message: String| Error::InvalidInput(format!("{}:{line}: {message}", path.display()));
        if record.len() <= leading {
            return Err(bad(format!(
                "expected at least {} fields, got {}",
                leading + 1,
                record.len()
            )));
        }
        let d = record.len() - leading;
        if *dim.get_or_insert(d) != d {
            return Err(bad(format!("{d} values but earlier records have {}", dim.unwrap())));
        }
        let int = |i: usize| -> Result<u32> {
            record[i].parse().map_err(|_| {
                bad(format!(
                    "field {} ({:?}) is not a non-negative integer",
                    i + 1,
                    &record[i]
                ))
            })
        };
        let real = |i: usize| -> Result<f32> {
            record[i]
                .parse::<f32>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("field {} ({:?}) is not a finite number", i + 1, &record[i])))
        };
        labels.push(ClassId::new(int(0)?));
        image_ids.push(int(1)?);
        if with_locations {
            locations.push((real(2)?, real(3)?));
        }
        for i in leading..record.len() {
            data.push(real(i)?);
        }
    }
    let dim = dim.ok_or(Error::Empty("CSV file has no records"))?;
    let class_count = labels.iter().map(|l| l.index() + 1).max().unwrap_or(0);
    let set = LabeledDescriptorSet::new(dim, data, labels, image_ids, default_class_names(class_count))?;
    Ok(DescriptorFile {
        set,
        locations: with_locations.then_some(locations),
    })
}

pub fn write_csv(path: &Path, file: &DescriptorFile) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    let set = &file.set;
    let mut row: Vec<String> = Vec::with_capacity(set.dim() + 4);
    for i in 0..set.len() {
        row.clear();
        row.push(set.labels()[i].to_string());
        row.push(set.image_ids()[i].to_string());
        if let Some(locations) = &file.locations {
            row.push(locations[i].0.to_string());
            row.push(locations[i].1.to_string());
        }
        row.extend(set.descriptor(i).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
