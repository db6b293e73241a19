use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::descriptor::{ClassId, LabeledDescriptorSet, QueryImage};
use crate::error::{Error, Result};
use crate::rng;

/// Splits a corpus by image: per class, `train_images_per_class` randomly
/// chosen images go to training and every other image of that class becomes
/// one labeled query image.
///
/// Query images come out ordered by class, then by image id.
pub fn split_by_image(
    set: &LabeledDescriptorSet,
    train_images_per_class: usize,
    rng_seed: u64,
) -> Result<(LabeledDescriptorSet, Vec<QueryImage>)> {
    if train_images_per_class == 0 {
        return Err(Error::InvalidInput("train_images_per_class must be >= 1".into()));
    }
    // image id -> class, and per-class image lists in ascending id order
    let mut owner: BTreeMap<u32, ClassId> = BTreeMap::new();
    for (&image, &label) in set.image_ids().iter().zip(set.labels()) {
        if let Some(&other) = owner.get(&image) {
            if other != label {
                return Err(Error::InvalidInput(format!(
                    "image {image} has descriptors of both class {other} and class {label}"
                )));
            }
        } else {
            owner.insert(image, label);
        }
    }
    let mut images_of: Vec<Vec<u32>> = vec![Vec::new(); set.class_count()];
    for (&image, class) in &owner {
        images_of[class.index()].push(image);
    }

    let mut is_train: BTreeMap<u32, bool> = BTreeMap::new();
    let mut query_images: Vec<Vec<u32>> = Vec::with_capacity(set.class_count());
    for (c, images) in images_of.iter_mut().enumerate() {
        if images.len() <= train_images_per_class {
            return Err(Error::InsufficientImages {
                class: set.class_names()[c].clone(),
                available: images.len(),
                required: train_images_per_class + 1,
            });
        }
        let mut rng = rng::seeded(rng::derive_seed(rng_seed, c as u64));
        images.shuffle(&mut rng);
        let (train, query) = images.split_at(train_images_per_class);
        is_train.extend(train.iter().map(|&i| (i, true)));
        let mut query = query.to_vec();
        query.sort_unstable();
        query_images.push(query);
    }

    let dim = set.dim();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut image_ids = Vec::new();
    let mut query_data: BTreeMap<u32, Vec<f32>> = BTreeMap::new();
    for i in 0..set.len() {
        let image = set.image_ids()[i];
        if is_train.contains_key(&image) {
            data.extend_from_slice(set.descriptor(i));
            labels.push(set.labels()[i]);
            image_ids.push(image);
        } else {
            query_data
                .entry(image)
                .or_default()
                .extend_from_slice(set.descriptor(i));
        }
    }
    let train = LabeledDescriptorSet::new(dim, data, labels, image_ids, set.class_names().to_vec())?;

    let mut queries = Vec::new();
    for (c, images) in query_images.iter().enumerate() {
        for image in images {
            let values = query_data.remove(image).expect("every query image has descriptors");
            queries.push(QueryImage::from_flat(dim, values, Some(ClassId::new(c as u32)))?);
        }
    }
    Ok((train, queries))
}
