use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::manifest::{render_manifest, ManifestEntry};
use super::{io_err, CategoryLabel, DatasetError, Result};
use crate::augment::{AugmentInput, AugmentPipeline};
use crate::compose::{BackgroundImage, BackgroundSetup, CompositePlan, ForegroundLayer, SourceRef, GRAY};
use crate::imaging::{encode_image, mean_color, RawImage, Region};

/// Foreground layers and infilled backgrounds addressable by source id.
#[derive(Debug, Clone, Default)]
pub struct SourcePool {
    pub fgs: BTreeMap<String, ForegroundLayer>,
    pub bgs: BTreeMap<String, BackgroundImage>,
}

impl SourcePool {
    pub fn new(fgs: Vec<ForegroundLayer>, bgs: Vec<BackgroundImage>) -> Self {
        Self {
            fgs: fgs.into_iter().map(|f| (f.source_id.clone(), f)).collect(),
            bgs: bgs.into_iter().map(|b| (b.source_id.clone(), b)).collect(),
        }
    }

    pub fn fg_refs(&self) -> Vec<SourceRef> {
        self.fgs.values().map(SourceRef::from).collect()
    }

    pub fn bg_refs(&self) -> Vec<SourceRef> {
        self.bgs.values().map(SourceRef::from).collect()
    }

    fn fg(&self, id: Option<&str>) -> Result<&ForegroundLayer> {
        let id = id.ok_or_else(|| DatasetError::MissingSource("<foreground>".into()))?;
        self.fgs.get(id).ok_or_else(|| DatasetError::MissingSource(id.to_string()))
    }

    fn bg(&self, id: Option<&str>) -> Result<&BackgroundImage> {
        let id = id.ok_or_else(|| DatasetError::MissingSource("<background>".into()))?;
        self.bgs.get(id).ok_or_else(|| DatasetError::MissingSource(id.to_string()))
    }
}

/// An owned plan item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationItem {
    pub fg: Option<String>,
    pub bg: Option<String>,
    pub label: CategoryLabel,
}

fn ops_hash(ops: &str, index: u64) -> String {
    let digest = Sha256::digest(format!("{ops}#{index}").as_bytes());
    digest[..8].iter().fold(String::new(), |mut s, b| {
        write!(s, "{b:02x}").unwrap();
        s
    })
}

fn render(setup: BackgroundSetup, item: &GenerationItem, pool: &SourcePool, pipeline: &AugmentPipeline, index: u64) -> Result<(RawImage, Vec<crate::augment::AugmentOpSpec>)> {
    let (fg_id, bg_id) = (item.fg.as_deref(), item.bg.as_deref());
    let out = match setup {
        BackgroundSetup::OnlyBg => pipeline.apply(AugmentInput::Image(&pool.bg(bg_id)?.image), index)?,
        BackgroundSetup::GrayBgWithFg | BackgroundSetup::MeanBgWithFg => {
            let fg = pool.fg(fg_id)?;
            let color = match setup {
                BackgroundSetup::GrayBgWithFg => GRAY,
                _ => mean_color(&fg.image, &fg.mask, Region::Background)?,
            };
            let bg = RawImage::filled(fg.image.width(), fg.image.height(), color)?;
            pipeline.apply(AugmentInput::Layered { fg, bg: &bg }, index)?
        }
        BackgroundSetup::SameCategoryBgWithFg | BackgroundSetup::AllCategoriesBgWithFg => {
            let fg = pool.fg(fg_id)?;
            let bg = pool.bg(bg_id)?;
            pipeline.apply(AugmentInput::Layered { fg, bg: &bg.image }, index)?
        }
    };
    Ok(out)
}

/// Materializes `items` through `pipeline` into `out_dir` and writes
/// `out_dir/manifest.tsv`. On failure every file written so far is removed.
pub fn generate(
    setup: BackgroundSetup,
    items: &[GenerationItem],
    pool: &SourcePool,
    pipeline: &AugmentPipeline,
    out_dir: &Path,
) -> Result<Vec<ManifestEntry>> {
    let mut written: Vec<PathBuf> = Vec::new();
    let result = generate_inner(setup, items, pool, pipeline, out_dir, &mut written);
    if result.is_err() {
        for p in written.iter().rev() {
            let _ = std::fs::remove_file(p);
        }
    }
    result
}

fn generate_inner(
    setup: BackgroundSetup,
    items: &[GenerationItem],
    pool: &SourcePool,
    pipeline: &AugmentPipeline,
    out_dir: &Path,
    written: &mut Vec<PathBuf>,
) -> Result<Vec<ManifestEntry>> {
    let mut entries = Vec::with_capacity(items.len());
    for (index, item) in items.iter().enumerate() {
        let index = index as u64;
        let (image, ops) = render(setup, item, pool, pipeline, index)?;
        let ops_text = ops.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        let rel = format!(
            "{setup}/{}/{}_{}_{}.png",
            item.label.name(),
            item.fg.as_deref().unwrap_or("none"),
            item.bg.as_deref().unwrap_or("none"),
            ops_hash(&ops_text, index)
        );
        let path = out_dir.join(&rel);
        let parent = path.parent().expect("relative path has a parent");
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
        std::fs::write(&path, encode_image(&image)).map_err(io_err(&path))?;
        written.push(path);
        entries.push(ManifestEntry {
            output_id: format!("{setup}-{index:07}"),
            fg_source_id: item.fg.clone(),
            bg_source_id: item.bg.clone(),
            setup,
            ops,
            label: item.label,
            path: rel,
            seed: pipeline.seed,
        });
    }
    let manifest = out_dir.join("manifest.tsv");
    let text = render_manifest(&entries)?;
    std::fs::write(&manifest, text).map_err(io_err(&manifest))?;
    written.push(manifest);
    Ok(entries)
}

/// [`generate`] over every item of a plan.
pub fn generate_plan(plan: &CompositePlan, pool: &SourcePool, pipeline: &AugmentPipeline, out_dir: &Path) -> Result<Vec<ManifestEntry>> {
    let items: Vec<GenerationItem> = plan
        .iter()
        .map(|it| GenerationItem { fg: it.fg.map(str::to_string), bg: it.bg.map(str::to_string), label: it.label })
        .collect();
    generate(plan.setup(), &items, pool, pipeline, out_dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::enumerate_pairs;
    use crate::dataset::read_manifest;
    use crate::imaging::Mask;

    fn pool(per_class: usize, classes: u8) -> SourcePool {
        let mut fgs = Vec::new();
        let mut bgs = Vec::new();
        for c in 0..classes {
            for i in 0..per_class {
                let label = CategoryLabel::new(c).unwrap();
                let img = RawImage::from_fn(16, 16, |x, y| [(x * 10) as u8, (y * 10) as u8, c.wrapping_mul(50).wrapping_add(i as u8)]).unwrap();
                let mask = Mask::from_fn(16, 16, |x, y| (5..11).contains(&x) && (4..12).contains(&y)).unwrap();
                fgs.push(ForegroundLayer::new(img.clone(), mask, label, format!("c{c}f{i}")).unwrap());
                bgs.push(BackgroundImage { image: img, label, source_id: format!("c{c}b{i}") });
            }
        }
        SourcePool::new(fgs, bgs)
    }

    #[test]
    fn same_category_demo_counts() {
        let pool = pool(2, 2);
        let plan = enumerate_pairs(BackgroundSetup::SameCategoryBgWithFg, &pool.fg_refs(), &pool.bg_refs()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let entries = generate_plan(&plan, &pool, &AugmentPipeline::empty(1), dir.path()).unwrap();
        assert_eq!(entries.len(), 8);
        assert_eq!(read_manifest(&dir.path().join("manifest.tsv")).unwrap(), entries);
        for e in &entries {
            assert!(dir.path().join(&e.path).exists());
        }
    }

    #[test]
    fn ten_pairs_empty_pipeline() {
        let pool = pool(1, 10);
        let plan = enumerate_pairs(BackgroundSetup::SameCategoryBgWithFg, &pool.fg_refs(), &pool.bg_refs()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let entries = generate_plan(&plan, &pool, &AugmentPipeline::empty(1), dir.path()).unwrap();
        assert_eq!(entries.len(), 10);
        let pngs = walk_pngs(dir.path());
        assert_eq!(pngs.len(), 10);
    }

    fn walk_pngs(dir: &Path) -> Vec<PathBuf> {
        let mut out = Vec::new();
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                out.extend(walk_pngs(&p));
            } else if p.extension().is_some_and(|e| e == "png") {
                out.push(p);
            }
        }
        out.sort();
        out
    }

    #[test]
    fn deterministic_bytes() {
        let pool = pool(2, 2);
        let pipeline = AugmentPipeline::parse("hflip,translate,seg-rotate,seg-translate", 77).unwrap();
        let run = || {
            let dir = tempfile::tempdir().unwrap();
            for setup in BackgroundSetup::ALL {
                let plan = enumerate_pairs(setup, &pool.fg_refs(), &pool.bg_refs()).unwrap();
                let sub = dir.path().join(setup.name());
                let pipe = if setup == BackgroundSetup::OnlyBg { AugmentPipeline::parse("hflip,rotate", 77).unwrap() } else { pipeline.clone() };
                generate_plan(&plan, &pool, &pipe, &sub).unwrap();
            }
            walk_pngs(dir.path()).iter().map(|p| (p.strip_prefix(dir.path()).unwrap().to_path_buf(), std::fs::read(p).unwrap())).collect::<Vec<_>>()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.len(), 2 * 2 + 4 + 4 + 8 + 16);
        assert_eq!(a, b);
    }

    #[test]
    fn failure_removes_partial_output() {
        let pool = pool(1, 2);
        let items = vec![
            GenerationItem { fg: Some("c0f0".into()), bg: Some("c0b0".into()), label: CategoryLabel::new(0).unwrap() },
            GenerationItem { fg: Some("missing".into()), bg: Some("c0b0".into()), label: CategoryLabel::new(0).unwrap() },
        ];
        let dir = tempfile::tempdir().unwrap();
        let err = generate(BackgroundSetup::AllCategoriesBgWithFg, &items, &pool, &AugmentPipeline::empty(0), dir.path()).unwrap_err();
        assert!(matches!(err, DatasetError::MissingSource(_)));
        assert!(walk_pngs(dir.path()).is_empty());
        assert!(!dir.path().join("manifest.tsv").exists());
    }

    #[test]
    fn only_bg_rejects_segmented_ops() {
        let pool = pool(1, 1);
        let plan = enumerate_pairs(BackgroundSetup::OnlyBg, &[], &pool.bg_refs()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let err = generate_plan(&plan, &pool, &AugmentPipeline::parse("seg-hflip", 0).unwrap(), dir.path()).unwrap_err();
        assert!(matches!(err, DatasetError::Augment(_)));
    }
}
