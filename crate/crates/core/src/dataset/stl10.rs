//! Reader for the STL-10 binary files.
//!
//! Each image record is 3x96x96 bytes: channel planes (red, green, blue),
//! each stored column by column. Label files hold one byte per image in
//! `1..=10`.

use std::path::Path;

use super::{io_err, CategoryLabel, DatasetError, Result};
use crate::imaging::RawImage;

pub const STL10_SIDE: usize = 96;
pub const STL10_RECORD_BYTES: usize = 3 * STL10_SIDE * STL10_SIDE;

pub fn load_stl10(images: &Path, labels: &Path) -> Result<Vec<(RawImage, CategoryLabel)>> {
    let bytes = std::fs::read(images).map_err(io_err(images))?;
    let label_bytes = std::fs::read(labels).map_err(io_err(labels))?;
    parse_stl10(&bytes, &label_bytes)
}

pub fn parse_stl10(bytes: &[u8], label_bytes: &[u8]) -> Result<Vec<(RawImage, CategoryLabel)>> {
    if !bytes.len().is_multiple_of(STL10_RECORD_BYTES) {
        return Err(DatasetError::SizeMismatch(format!(
            "{} bytes is not a multiple of {STL10_RECORD_BYTES}",
            bytes.len()
        )));
    }
    let n = bytes.len() / STL10_RECORD_BYTES;
    if label_bytes.len() != n {
        return Err(DatasetError::SizeMismatch(format!("{n} images but {} labels", label_bytes.len())));
    }
    let plane = STL10_SIDE * STL10_SIDE;
    bytes
        .chunks_exact(STL10_RECORD_BYTES)
        .zip(label_bytes)
        .map(|(rec, &lb)| {
            let label = lb.checked_sub(1).and_then(CategoryLabel::new).ok_or(DatasetError::LabelOutOfRange(lb))?;
            let img = RawImage::from_fn(STL10_SIDE, STL10_SIDE, |x, y| {
                std::array::from_fn(|c| rec[c * plane + x * STL10_SIDE + y])
            })?;
            Ok((img, label))
        })
        .collect()
}

/// Inverse of [`parse_stl10`], mainly for fixtures.
pub fn encode_stl10(items: &[(RawImage, CategoryLabel)]) -> (Vec<u8>, Vec<u8>) {
    let plane = STL10_SIDE * STL10_SIDE;
    let mut bytes = vec![0u8; items.len() * STL10_RECORD_BYTES];
    for (rec, (img, _)) in bytes.chunks_exact_mut(STL10_RECORD_BYTES).zip(items) {
        assert_eq!(img.dims(), (STL10_SIDE, STL10_SIDE), "STL-10 images are 96x96");
        for x in 0..STL10_SIDE {
            for y in 0..STL10_SIDE {
                let p = img.pixel(x, y);
                for c in 0..3 {
                    rec[c * plane + x * STL10_SIDE + y] = p[c];
                }
            }
        }
    }
    (bytes, items.iter().map(|(_, l)| l.id() + 1).collect())
}
