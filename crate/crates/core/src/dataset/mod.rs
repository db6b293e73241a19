//! Descriptor datasets: binary and CSV files, synthetic generation, and
//! split-by-image train/query partitioning.

mod csv_format;
mod file;
mod split;
mod synthetic;

use std::path::Path;

pub use csv_format::{read_csv, write_csv};
pub use file::{read_descriptor_file, write_descriptor_file, FORMAT_VERSION, MAGIC};
pub use split::split_by_image;
pub use synthetic::{class_means, generate_synthetic, SyntheticSpec};

use crate::descriptor::{
    augment_with_location, default_class_names, ClassId, Descriptor, LabeledDescriptorSet, LocatedDescriptor,
    QueryImage,
};
use crate::error::{Error, Result};

/// A labeled descriptor set with optional per-descriptor `(x, y)` locations
/// normalized to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DescriptorFile {
    pub set: LabeledDescriptorSet,
    pub locations: Option<Vec<(f32, f32)>>,
}

impl DescriptorFile {
    /// The descriptor set to index: location-augmented (dimension `d + 2`)
    /// when locations are present and `alpha > 0`, the plain descriptors
    /// otherwise.
    pub fn into_descriptor_set(self, alpha: f32) -> Result<LabeledDescriptorSet> {
        let Some(locations) = self.locations else {
            return Ok(self.set);
        };
        if alpha == 0.0 {
            return Ok(self.set);
        }
        let (dim, data, labels, image_ids, names) = self.set.into_parts();
        let mut augmented = Vec::with_capacity(labels.len() * (dim + 2));
        for (values, &(x, y)) in data.chunks_exact(dim).zip(&locations) {
            let located = LocatedDescriptor::new(Descriptor::new(values.to_vec())?, x, y)?;
            augmented.extend(augment_with_location(&located, alpha)?.into_vec());
        }
        LabeledDescriptorSet::new(dim + 2, augmented, labels, image_ids, names)
    }
}

/// Reads a descriptor file, choosing the format by extension (`.csv` is
/// CSV, anything else the binary format). CSV files carry locations only
/// when `csv_with_locations` is set.
pub fn read_any(path: &Path, csv_with_locations: bool) -> Result<DescriptorFile> {
    if is_csv(path) {
        read_csv(path, csv_with_locations)
    } else {
        read_descriptor_file(path)
    }
}

pub fn write_any(path: &Path, file: &DescriptorFile) -> Result<()> {
    if is_csv(path) {
        write_csv(path, file)
    } else {
        write_descriptor_file(path, file)
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Loads a descriptor file and applies location augmentation with `alpha`.
pub fn load_descriptor_file(path: &Path, alpha: f32) -> Result<LabeledDescriptorSet> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "alpha must be finite and >= 0, got {alpha}"
        )));
    }
    read_any(path, false)?.into_descriptor_set(alpha)
}

/// Groups a descriptor set into labeled query images, one per image id, in
/// order of each image's first descriptor.
pub fn group_into_queries(set: &LabeledDescriptorSet) -> Result<Vec<QueryImage>> {
    let mut order: Vec<u32> = Vec::new();
    let mut grouped: std::collections::HashMap<u32, (ClassId, Vec<f32>)> = std::collections::HashMap::new();
    for i in 0..set.len() {
        let image = set.image_ids()[i];
        let label = set.labels()[i];
        let entry = grouped.entry(image).or_insert_with(|| {
            order.push(image);
            (label, Vec::new())
        });
        if entry.0 != label {
            return Err(Error::InvalidInput(format!(
                "image {image} has descriptors of both class {} and class {label}",
                entry.0
            )));
        }
        entry.1.extend_from_slice(set.descriptor(i));
    }
    order
        .into_iter()
        .map(|image| {
            let (label, data) = grouped.remove(&image).expect("grouped above");
            QueryImage::from_flat(set.dim(), data, Some(label))
        })
        .collect()
}

/// Flattens labeled query images into a descriptor set, numbering images
/// from `first_image_id`.
pub fn queries_to_set(queries: &[QueryImage], class_count: usize, first_image_id: u32) -> Result<LabeledDescriptorSet> {
    let dim = queries
        .first()
        .map(QueryImage::dim)
        .ok_or(Error::Empty("no query images"))?;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut image_ids = Vec::new();
    for (i, q) in queries.iter().enumerate() {
        let label = q
            .true_label()
            .ok_or_else(|| Error::InvalidInput(format!("query image {i} has no label")))?;
        if q.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: q.dim(),
            });
        }
        for d in q.descriptors() {
            data.extend_from_slice(d);
            labels.push(label);
            image_ids.push(first_image_id + i as u32);
        }
    }
    // a descriptor set needs every class present
    let present: std::collections::BTreeSet<ClassId> = labels.iter().copied().collect();
    if present.len() == class_count {
        LabeledDescriptorSet::new(dim, data, labels, image_ids, default_class_names(class_count))
    } else {
        Err(Error::InvalidInput(format!(
            "query images cover {} of {class_count} classes",
            present.len()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::ClassId;

    fn located_file(dim: usize, records: usize) -> DescriptorFile {
        let data = (0..dim * records).map(|i| i as f32).collect();
        let labels = (0..records).map(|i| ClassId::new((i % 2) as u32)).collect();
        let ids = (0..records as u32).collect();
        let set = LabeledDescriptorSet::with_default_names(dim, data, labels, ids, 2).unwrap();
        let locations = Some((0..records).map(|i| (i as f32 / records as f32, 0.5)).collect());
        DescriptorFile { set, locations }
    }

    #[test]
    fn alpha_augments_located_descriptors_at_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("located.ldsc");
        write_descriptor_file(&path, &located_file(128, 6)).unwrap();
        let set = load_descriptor_file(&path, 1.6).unwrap();
        assert_eq!(set.dim(), 130);
        let last = set.descriptor(3);
        assert_eq!(
            last[..128],
            (3 * 128..4 * 128).map(|v| v as f32).collect::<Vec<_>>()[..]
        );
        assert_eq!(last[128], 1.6 * 0.5);
        assert_eq!(last[129], 1.6 * 0.5);
        assert_eq!(load_descriptor_file(&path, 0.0).unwrap().dim(), 128);
        assert!(load_descriptor_file(&path, -1.0).is_err());
    }

    #[test]
    fn queries_group_by_image() {
        let set = LabeledDescriptorSet::with_default_names(
            1,
            vec![1.0, 2.0, 3.0, 4.0],
            vec![ClassId::new(1), ClassId::new(0), ClassId::new(1), ClassId::new(0)],
            vec![8, 3, 8, 3],
            2,
        )
        .unwrap();
        let queries = group_into_queries(&set).unwrap();
        assert_eq!(queries.len(), 2);
        assert_eq!(queries[0].true_label(), Some(ClassId::new(1)));
        assert_eq!(
            queries[0].descriptors().collect::<Vec<_>>(),
            vec![&[1.0][..], &[3.0][..]]
        );
        let back = queries_to_set(&queries, 2, 0).unwrap();
        assert_eq!(group_into_queries(&back).unwrap(), queries);
    }

    #[test]
    fn extension_selects_format() {
        let dir = tempfile::tempdir().unwrap();
        let file = located_file(3, 4);
        for name in ["a.csv", "a.ldsc"] {
            let path = dir.path().join(name);
            write_any(&path, &file).unwrap();
            assert_eq!(read_any(&path, true).unwrap(), file);
        }
    }
}
