//! Descriptor types and the primitive operations every other module shares.
//!
//! Distances are squared Euclidean everywhere and are never rooted.
//! Descriptor coordinates are stored as `f32`; distances accumulate in `f64`.

use std::fmt;

use crate::error::{Error, Result};

/// A fixed-dimension descriptor with finite coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Descriptor(Vec<f32>);

impl Descriptor {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("descriptor has no coordinates"));
        }
        check_finite(&values)?;
        Ok(Descriptor(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.0
    }
}

impl AsRef<[f32]> for Descriptor {
    fn as_ref(&self) -> &[f32] {
        &self.0
    }
}

/// A descriptor together with its image-normalized location, `x, y ∈ [0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocatedDescriptor {
    descriptor: Descriptor,
    x: f32,
    y: f32,
}

impl LocatedDescriptor {
    pub fn new(descriptor: Descriptor, x: f32, y: f32) -> Result<Self> {
        for (name, v) in [("x", x), ("y", y)] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidInput(format!("location {name} = {v} is outside [0, 1]")));
            }
        }
        Ok(LocatedDescriptor { descriptor, x, y })
    }

    /// Builds a located descriptor from pixel coordinates, dividing both by
    /// the longest image side so that `alpha` means the same thing for every
    /// image size.
    pub fn from_pixels(descriptor: Descriptor, px: f32, py: f32, width: f32, height: f32) -> Result<Self> {
        let side = width.max(height);
        if !(side > 0.0) {
            return Err(Error::InvalidInput(format!(
                "image size {width}x{height} is not positive"
            )));
        }
        LocatedDescriptor::new(descriptor, px / side, py / side)
    }

    pub fn descriptor(&self) -> &Descriptor {
        &self.descriptor
    }

    pub fn location(&self) -> (f32, f32) {
        (self.x, self.y)
    }
}

/// Dense class identifier, `0..class_count` within one dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassId(u32);

impl ClassId {
    pub const fn new(id: u32) -> Self {
        ClassId(id)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl From<u32> for ClassId {
    fn from(id: u32) -> Self {
        ClassId(id)
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Training corpus: descriptors with parallel class labels and image ids.
///
/// Descriptors are stored row-major in one flat buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDescriptorSet {
    dim: usize,
    data: Vec<f32>,
    labels: Vec<ClassId>,
    image_ids: Vec<u32>,
    class_names: Vec<String>,
}

impl LabeledDescriptorSet {
    /// Validates and wraps a flat row-major descriptor buffer.
    ///
    /// Every class in `0..class_names.len()` must have at least one
    /// descriptor.
    pub fn new(
        dim: usize,
        data: Vec<f32>,
        labels: Vec<ClassId>,
        image_ids: Vec<u32>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("descriptor dimension must be >= 1".into()));
        }
        if labels.is_empty() {
            return Err(Error::Empty("labeled descriptor set has no descriptors"));
        }
        if data.len() != labels.len() * dim {
            return Err(Error::InvalidInput(format!(
                "{} values do not form {} descriptors of dimension {dim}",
                data.len(),
                labels.len()
            )));
        }
        if image_ids.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} image ids for {} descriptors",
                image_ids.len(),
                labels.len()
            )));
        }
        check_finite(&data)?;
        let class_count = class_names.len();
        let mut seen = vec![false; class_count];
        for (i, label) in labels.iter().enumerate() {
            if label.index() >= class_count {
                return Err(Error::InvalidInput(format!(
                    "descriptor {i} has class id {label} but there are {class_count} classes"
                )));
            }
            seen[label.index()] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidInput(format!(
                "class {missing} ({}) has no descriptors",
                class_names[missing]
            )));
        }
        Ok(LabeledDescriptorSet {
            dim,
            data,
            labels,
            image_ids,
            class_names,
        })
    }

    /// Like [`LabeledDescriptorSet::new`] with classes named `class0`, `class1`, ...
    pub fn with_default_names(
        dim: usize,
        data: Vec<f32>,
        labels: Vec<ClassId>,
        image_ids: Vec<u32>,
        class_count: usize,
    ) -> Result<Self> {
        LabeledDescriptorSet::new(dim, data, labels, image_ids, default_class_names(class_count))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_name(&self, class: ClassId) -> &str {
        &self.class_names[class.index()]
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn descriptor(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn descriptors(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn image_ids(&self) -> &[u32] {
        &self.image_ids
    }

    /// Flat buffer of all descriptors labeled `class`, in corpus order.
    pub fn class_data(&self, class: ClassId) -> Vec<f32> {
        self.labels
            .iter()
            .zip(self.descriptors())
            .filter(|(l, _)| **l == class)
            .flat_map(|(_, d)| d.iter().copied())
            .collect()
    }

    pub(crate) fn into_parts(self) -> (usize, Vec<f32>, Vec<ClassId>, Vec<u32>, Vec<String>) {
        (self.dim, self.data, self.labels, self.image_ids, self.class_names)
    }
}

pub(crate) fn default_class_names(class_count: usize) -> Vec<String> {
    (0..class_count).map(|c| format!("class{c}")).collect()
}

/// The descriptors of one image to classify.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryImage {
    dim: usize,
    data: Vec<f32>,
    true_label: Option<ClassId>,
}

impl QueryImage {
    pub fn new(descriptors: Vec<Descriptor>, true_label: Option<ClassId>) -> Result<Self> {
        let dim = descriptors
            .first()
            .map(Descriptor::dim)
            .ok_or(Error::Empty("query image has no descriptors"))?;
        let mut data = Vec::with_capacity(dim * descriptors.len());
        for d in descriptors {
            if d.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: d.dim(),
                });
            }
            data.extend_from_slice(d.as_slice());
        }
        Ok(QueryImage { dim, data, true_label })
    }

    pub fn from_flat(dim: usize, data: Vec<f32>, true_label: Option<ClassId>) -> Result<Self> {
        if dim == 0 || data.is_empty() {
            return Err(Error::Empty("query image has no descriptors"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidInput(format!(
                "{} values do not form descriptors of dimension {dim}",
                data.len()
            )));
        }
        check_finite(&data)?;
        Ok(QueryImage { dim, data, true_label })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn true_label(&self) -> Option<ClassId> {
        self.true_label
    }

    pub fn descriptor(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn descriptors(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }
}

fn check_finite(values: &[f32]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::InvalidInput(format!(
            "non-finite descriptor value {} at position {i}",
            values[i]
        ))),
        None => Ok(()),
    }
}

/// Squared Euclidean distance between two descriptors.
pub fn squared_distance(a: &Descriptor, b: &Descriptor) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    Ok(squared_distance_unchecked(a.as_slice(), b.as_slice()))
}

/// Squared Euclidean distance over raw slices of equal length.
#[inline]
pub fn squared_distance_unchecked(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum()
}

/// Appends `(alpha * x, alpha * y)` to the descriptor.
pub fn augment_with_location(ld: &LocatedDescriptor, alpha: f32) -> Result<Descriptor> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::InvalidInput(format!(
            "alpha must be finite and >= 0, got {alpha}"
        )));
    }
    let mut values = Vec::with_capacity(ld.descriptor.dim() + 2);
    values.extend_from_slice(ld.descriptor.as_slice());
    values.push(alpha * ld.x);
    values.push(alpha * ld.y);
    Ok(Descriptor(values))
}

/// Class with the smallest total; ties go to the lowest id.
pub fn argmin_class<I>(totals: I) -> Result<ClassId>
where
    I: IntoIterator<Item = (ClassId, f64)>,
{
    select_class(totals, |candidate, best| candidate < best)
}

/// Class with the largest score; ties go to the lowest id.
pub fn argmax_class<I>(scores: I) -> Result<ClassId>
where
    I: IntoIterator<Item = (ClassId, f64)>,
{
    select_class(scores, |candidate, best| candidate > best)
}

fn select_class<I>(values: I, better: impl Fn(f64, f64) -> bool) -> Result<ClassId>
where
    I: IntoIterator<Item = (ClassId, f64)>,
{
    let mut best: Option<(ClassId, f64)> = None;
    for (class, value) in values {
        if !value.is_finite() {
            return Err(Error::InvalidInput(format!(
                "class {class} has non-finite total {value}"
            )));
        }
        best = match best {
            None => Some((class, value)),
            Some((bc, bv)) if better(value, bv) || (value == bv && class < bc) => Some((class, value)),
            keep => keep,
        };
    }
    best.map(|(c, _)| c)
        .ok_or(Error::Empty("no class totals to choose from"))
}
