//! Naive Bayes Nearest Neighbor (NBNN) and Local NBNN image classification
//! over local descriptors.
//!
//! The crate is organised bottom-up:
//!
//! - [`descriptor`]: descriptor types, squared Euclidean distance, location
//!   augmentation and deterministic argmin.
//! - [`ann`]: an exact brute-force search and a randomized KD-tree forest
//!   searched best-bin-first under a shared distance-check budget.
//! - [`classifiers`]: NBNN, Local NBNN and the log-odds increment rules.
//! - [`dataset`]: binary/CSV descriptor files, synthetic data and
//!   split-by-image.
//! - [`bench`]: evaluation reports and the k / budget / class-count sweeps.
//!
//! ```
//! use lnbnn::classifiers::{LocalNbnnModel, SearchEngine};
//! use lnbnn::dataset::{generate_synthetic, SyntheticSpec};
//!
//! let spec = SyntheticSpec { class_count: 3, ..SyntheticSpec::default() };
//! let (train, queries) = generate_synthetic(&spec).unwrap();
//! let model = LocalNbnnModel::build(&train, 10, &SearchEngine::Exact).unwrap();
//! let (predicted, _scores) = model.classify(&queries[0]).unwrap();
//! assert!(predicted.index() < 3);
//! ```

pub mod ann;
pub mod bench;
pub mod classifiers;
pub mod dataset;
pub mod descriptor;
mod error;
pub mod rng;

pub use descriptor::{
    argmin_class, augment_with_location, squared_distance, ClassId, Descriptor, LabeledDescriptorSet,
    LocatedDescriptor, QueryImage,
};
pub use error::{Error, Result};
