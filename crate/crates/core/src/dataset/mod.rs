//! Dataset ingestion, epoch scheduling and provenance for generated images.

mod generate;
mod layout;
mod manifest;
mod schedule;
mod stl10;

use std::fmt;

use thiserror::Error;

pub use generate::{generate, generate_plan, GenerationItem, SourcePool};
pub use layout::{load_labeled_images, load_masked_examples, read_labels, write_labels, write_masked_examples};
pub use manifest::{read_manifest, write_manifest, ManifestEntry, MANIFEST_HEADER, MANIFEST_SCHEMA_VERSION};
pub use schedule::{schedule_epoch, EpochSchedule};
pub use stl10::{encode_stl10, load_stl10, parse_stl10, STL10_RECORD_BYTES, STL10_SIDE};

use crate::augment::AugmentError;
use crate::compose::ComposeError;
use crate::imaging::ImagingError;
use crate::seed::{rng_from, stream};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("label byte {0} out of range 1..=10")]
    LabelOutOfRange(u8),
    #[error("category {label} has {available} examples, {requested} requested")]
    InsufficientClassCount { label: CategoryLabel, available: usize, requested: usize },
    #[error("count mismatch: {0}")]
    CountMismatch(String),
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate output id '{0}'")]
    DuplicateOutputId(String),
    #[error("setup {0} has no epoch schedule")]
    UnsupportedSetup(crate::compose::BackgroundSetup),
    #[error("unknown source id '{0}'")]
    MissingSource(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

pub type Result<T> = std::result::Result<T, DatasetError>;

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.display().to_string(), source }
}

pub const CATEGORY_NAMES: [&str; 10] = ["airplane", "bird", "car", "cat", "deer", "dog", "horse", "monkey", "ship", "truck"];

/// Class id in `0..10`, named after the STL-10 categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CategoryLabel(u8);

impl CategoryLabel {
    pub const COUNT: usize = 10;

    pub fn new(id: u8) -> Option<Self> {
        ((id as usize) < Self::COUNT).then_some(Self(id))
    }

    pub fn from_name(name: &str) -> Option<Self> {
        CATEGORY_NAMES.iter().position(|&n| n == name).map(|i| Self(i as u8))
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        CATEGORY_NAMES[self.0 as usize]
    }

    pub fn all() -> impl Iterator<Item = CategoryLabel> {
        (0..Self::COUNT as u8).map(Self)
    }
}

impl fmt::Display for CategoryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name(), self.0)
    }
}

/// Picks `per_class` examples of every category present in `labels` by a
/// seeded shuffle. Returned indices are ordered by (category, draw index).
pub fn select_subset(labels: &[CategoryLabel], per_class: usize, seed: u64) -> Result<Vec<usize>> {
    use rand::seq::SliceRandom;

    let mut by_class: std::collections::BTreeMap<CategoryLabel, Vec<usize>> = Default::default();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut out = Vec::with_capacity(per_class * by_class.len());
    for (label, mut idx) in by_class {
        if idx.len() < per_class {
            return Err(DatasetError::InsufficientClassCount { label, available: idx.len(), requested: per_class });
        }
        idx.shuffle(&mut rng_from(&[stream::SUBSET, seed, label.id() as u64]));
        out.extend_from_slice(&idx[..per_class]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn balanced(per_class: usize) -> Vec<CategoryLabel> {
        (0..per_class * 10).map(|i| CategoryLabel::new((i % 10) as u8).unwrap()).collect()
    }

    #[test]
    fn label_names_are_bijective() {
        for l in CategoryLabel::all() {
            assert_eq!(CategoryLabel::from_name(l.name()), Some(l));
        }
        assert_eq!(CategoryLabel::new(10), None);
        assert_eq!(CategoryLabel::from_name("zebra"), None);
    }

    #[test]
    fn subset_of_stl_sized_train_split() {
        let labels = balanced(500);
        let picked = select_subset(&labels, 50, 3).unwrap();
        assert_eq!(picked.len(), 500);
        let mut hist = [0usize; 10];
        for &i in &picked {
            hist[labels[i].index()] += 1;
        }
        assert_eq!(hist, [50; 10]);
        // grouped by class
        assert!(picked.windows(2).all(|w| labels[w[0]] <= labels[w[1]]));
        assert_eq!(picked, select_subset(&labels, 50, 3).unwrap());
        assert_ne!(picked, select_subset(&labels, 50, 4).unwrap());
    }

    #[test]
    fn subset_edge_cases() {
        let labels = balanced(3);
        assert!(select_subset(&labels, 0, 1).unwrap().is_empty());
        assert!(matches!(select_subset(&labels, 4, 1), Err(DatasetError::InsufficientClassCount { requested: 4, available: 3, .. })));
    }
}
