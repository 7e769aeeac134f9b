//! Content-addressed store for infilled backgrounds. The key hashes the
//! encoded image, the encoded mask and every inpainting parameter, so a
//! hit is always the exact result of recomputing.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ctxaug_core::imaging::{decode_image, encode_image, encode_mask, Mask, RawImage};
use ctxaug_core::inpaint::{infill, InpaintParams};
use sha2::{Digest, Sha256};

pub struct BackgroundCache {
    dir: Option<PathBuf>,
}

impl BackgroundCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        BackgroundCache { dir: Some(dir.into()) }
    }

    /// A cache that always recomputes.
    pub fn disabled() -> Self {
        BackgroundCache { dir: None }
    }

    pub fn key(image: &RawImage, mask: &Mask, params: &InpaintParams) -> String {
        let mut h = Sha256::new();
        h.update(encode_image(image));
        h.update(encode_mask(mask));
        h.update(format!(
            "{}/{}/{:?}/{}/{}",
            params.patch_size, params.iterations, params.search_decay, params.pyramid_levels, params.rng_seed
        ));
        h.finalize().iter().fold(String::new(), |mut s, b| {
            write!(s, "{b:02x}").unwrap();
            s
        })
    }

    pub fn path_for(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(&key[..2]).join(format!("{key}.png")))
    }

    pub fn background(&self, image: &RawImage, mask: &Mask, params: &InpaintParams) -> Result<RawImage> {
        let Some(path) = self.path_for(&Self::key(image, mask, params)) else {
            return Ok(infill(image, mask, params)?);
        };
        if let Ok(bytes) = std::fs::read(&path) {
            if let Ok(img) = decode_image(&bytes) {
                if img.dims() == image.dims() {
                    return Ok(img);
                }
            }
        }
        let out = infill(image, mask, params)?;
        write_atomic(&path, &encode_image(&out))?;
        Ok(out)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap();
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
