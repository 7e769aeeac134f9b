//! On-disk layout shared by the annotator export, the CLI and the trainer:
//!
//! ```text
//! <dir>/images/<id>.png   8-bit RGB
//! <dir>/masks/<id>.png    8-bit grayscale, nonzero = foreground
//! <dir>/labels.tsv        "<id>\t<label id>" per line
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use super::{io_err, read_manifest, CategoryLabel, DatasetError, Result};
use crate::compose::MaskedExample;
use crate::imaging::{decode_image, decode_mask, encode_image, encode_mask, RawImage};

pub fn read_labels(path: &Path) -> Result<BTreeMap<String, CategoryLabel>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: &str| DatasetError::MalformedRecord { line: i + 1, reason: reason.to_string() };
        let (id, label) = line.split_once('\t').ok_or_else(|| bad("expected '<id>\\t<label>'"))?;
        let label = label.trim().parse::<u8>().ok().and_then(CategoryLabel::new).ok_or_else(|| bad("bad label"))?;
        if out.insert(id.to_string(), label).is_some() {
            return Err(bad("duplicate id"));
        }
    }
    Ok(out)
}

pub fn write_labels(path: &Path, labels: &BTreeMap<String, CategoryLabel>) -> Result<()> {
    let text: String = labels.iter().map(|(id, l)| format!("{id}\t{}\n", l.id())).collect();
    std::fs::write(path, text).map_err(io_err(path))
}

fn png_ids(dir: &Path) -> Result<Vec<String>> {
    let mut ids = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().is_some_and(|e| e == "png") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                ids.push(stem.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(io_err(path))
}

/// Loads every example that has an image, a mask and a label, sorted by id.
pub fn load_masked_examples(dir: &Path) -> Result<Vec<MaskedExample>> {
    let labels = read_labels(&dir.join("labels.tsv"))?;
    let mut out = Vec::new();
    for id in png_ids(&dir.join("images"))? {
        let mask_path = dir.join("masks").join(format!("{id}.png"));
        if !mask_path.exists() {
            continue;
        }
        let label = *labels.get(&id).ok_or_else(|| DatasetError::MissingSource(format!("no label for '{id}'")))?;
        let image = decode_image(&read_file(&dir.join("images").join(format!("{id}.png")))?)?;
        let mask = decode_mask(&read_file(&mask_path)?)?;
        out.push(MaskedExample { id, image, mask, label });
    }
    Ok(out)
}

pub fn write_masked_examples(dir: &Path, examples: &[MaskedExample]) -> Result<()> {
    for sub in ["images", "masks"] {
        let d = dir.join(sub);
        std::fs::create_dir_all(&d).map_err(io_err(&d))?;
    }
    let mut labels = BTreeMap::new();
    for ex in examples {
        let p = dir.join("images").join(format!("{}.png", ex.id));
        std::fs::write(&p, encode_image(&ex.image)).map_err(io_err(&p))?;
        let p = dir.join("masks").join(format!("{}.png", ex.id));
        std::fs::write(&p, encode_mask(&ex.mask)).map_err(io_err(&p))?;
        labels.insert(ex.id.clone(), ex.label);
    }
    write_labels(&dir.join("labels.tsv"), &labels)
}

/// Labeled images for training or evaluation. Reads `manifest.tsv` when the
/// directory has one (generator output), otherwise `images/` + `labels.tsv`.
pub fn load_labeled_images(dir: &Path) -> Result<Vec<(String, RawImage, CategoryLabel)>> {
    let manifest = dir.join("manifest.tsv");
    if manifest.exists() {
        return read_manifest(&manifest)?
            .into_iter()
            .map(|e| Ok((e.output_id, decode_image(&read_file(&dir.join(&e.path))?)?, e.label)))
            .collect();
    }
    let labels = read_labels(&dir.join("labels.tsv"))?;
    labels
        .into_iter()
        .map(|(id, label)| {
            let image = decode_image(&read_file(&dir.join("images").join(format!("{id}.png")))?)?;
            Ok((id, image, label))
        })
        .collect()
}
