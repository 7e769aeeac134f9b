//! Building blocks for segmentation-based context augmentation.
//!
//! A labeled image is split into a foreground layer and an infilled
//! background ([`compose::extract_layers`]), the pieces are recombined
//! under one of five background setups, transformed by standard or
//! foreground-only augmentations, and written out with a provenance
//! manifest for training.

pub mod augment;
pub mod compose;
pub mod dataset;
pub mod imaging;
pub mod inpaint;
pub mod seed;
pub mod synth;

pub use compose::{BackgroundImage, BackgroundSetup, CompositePlan, ForegroundLayer, MaskedExample};
pub use dataset::CategoryLabel;
pub use imaging::{FloatImage, Mask, RawImage};
pub use inpaint::{InpaintParams, NearestNeighborField};
