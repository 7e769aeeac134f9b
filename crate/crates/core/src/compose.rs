//! Foreground/background recombination under the five background setups.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::dataset::CategoryLabel;
use crate::imaging::{mean_color, round_half_up, ImagingError, Mask, RawImage, Region};
use crate::inpaint::{infill, InpaintError, InpaintParams};

#[derive(Debug, Error, PartialEq)]
pub enum ComposeError {
    #[error("mask is empty")]
    EmptyMask,
    #[error("mask covers the whole image")]
    FullMask,
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("no background available for category {0}")]
    MissingCategory(CategoryLabel),
    #[error("plan needs at least one {0}")]
    EmptyInput(&'static str),
    #[error(transparent)]
    Inpaint(#[from] InpaintError),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

pub type Result<T> = std::result::Result<T, ComposeError>;

/// An image, its foreground mask and class label.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedExample {
    pub id: String,
    pub image: RawImage,
    pub mask: Mask,
    pub label: CategoryLabel,
}

impl MaskedExample {
    /// Checks the preconditions for splitting into layers.
    pub fn validate(&self) -> Result<()> {
        check_dims(&self.image, &self.mask)?;
        if self.mask.is_empty() {
            return Err(ComposeError::EmptyMask);
        }
        if self.mask.is_full() {
            return Err(ComposeError::FullMask);
        }
        Ok(())
    }
}

/// Original pixels plus the mask selecting the object.
#[derive(Debug, Clone, PartialEq)]
pub struct ForegroundLayer {
    pub image: RawImage,
    pub mask: Mask,
    pub label: CategoryLabel,
    pub source_id: String,
}

impl ForegroundLayer {
    pub fn new(image: RawImage, mask: Mask, label: CategoryLabel, source_id: impl Into<String>) -> Result<Self> {
        check_dims(&image, &mask)?;
        Ok(Self { image, mask, label, source_id: source_id.into() })
    }
}

/// Infilled background of a source example.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundImage {
    pub image: RawImage,
    pub label: CategoryLabel,
    pub source_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BackgroundSetup {
    OnlyBg,
    GrayBgWithFg,
    MeanBgWithFg,
    SameCategoryBgWithFg,
    AllCategoriesBgWithFg,
}

impl BackgroundSetup {
    pub const ALL: [BackgroundSetup; 5] = [
        BackgroundSetup::OnlyBg,
        BackgroundSetup::GrayBgWithFg,
        BackgroundSetup::MeanBgWithFg,
        BackgroundSetup::SameCategoryBgWithFg,
        BackgroundSetup::AllCategoriesBgWithFg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BackgroundSetup::OnlyBg => "only-bg",
            BackgroundSetup::GrayBgWithFg => "gray",
            BackgroundSetup::MeanBgWithFg => "mean",
            BackgroundSetup::SameCategoryBgWithFg => "same-category",
            BackgroundSetup::AllCategoriesBgWithFg => "all",
        }
    }
}

impl fmt::Display for BackgroundSetup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BackgroundSetup {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown setup '{s}' (expected only-bg|gray|mean|same-category|all)"))
    }
}

pub const GRAY: [u8; 3] = [128, 128, 128];

fn check_dims(a: &RawImage, m: &Mask) -> Result<()> {
    if a.dims() != m.dims() {
        return Err(ComposeError::DimensionMismatch(a.width(), a.height(), m.width(), m.height()));
    }
    Ok(())
}

/// Splits an example into its foreground layer and infilled background.
pub fn extract_layers(example: &MaskedExample, params: &InpaintParams) -> Result<(ForegroundLayer, BackgroundImage)> {
    example.validate()?;
    let background = infill(&example.image, &example.mask, params)?;
    Ok((
        ForegroundLayer {
            image: example.image.clone(),
            mask: example.mask.clone(),
            label: example.label,
            source_id: example.id.clone(),
        },
        BackgroundImage { image: background, label: example.label, source_id: example.id.clone() },
    ))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CompositeOptions {
    /// Blend background pixels 4-adjacent to the mask 50/50 with the
    /// foreground image.
    pub feather: bool,
}

/// Hard binary compositing: foreground where the mask is set, else background.
pub fn composite(fg: &ForegroundLayer, bg: &RawImage) -> Result<RawImage> {
    composite_with(fg, bg, CompositeOptions::default())
}

pub fn composite_with(fg: &ForegroundLayer, bg: &RawImage, opts: CompositeOptions) -> Result<RawImage> {
    if fg.image.dims() != bg.dims() {
        let (w, h) = bg.dims();
        return Err(ComposeError::DimensionMismatch(fg.image.width(), fg.image.height(), w, h));
    }
    let (w, h) = bg.dims();
    let mut out = bg.clone();
    for y in 0..h {
        for x in 0..w {
            if fg.mask.get(x, y) {
                out.set_pixel(x, y, fg.image.pixel(x, y));
            } else if opts.feather {
                let touches = [(x.wrapping_sub(1), y), (x + 1, y), (x, y.wrapping_sub(1)), (x, y + 1)]
                    .into_iter()
                    .any(|(nx, ny)| nx < w && ny < h && fg.mask.get(nx, ny));
                if touches {
                    let (a, b) = (fg.image.pixel(x, y), bg.pixel(x, y));
                    out.set_pixel(x, y, std::array::from_fn(|c| round_half_up((a[c] as f64 + b[c] as f64) / 2.0)));
                }
            }
        }
    }
    Ok(out)
}

pub fn gray_background(fg: &ForegroundLayer) -> Result<RawImage> {
    let (w, h) = fg.image.dims();
    composite(fg, &RawImage::filled(w, h, GRAY)?)
}

/// Foreground over a uniform fill of the mean background color of `original`.
pub fn mean_background(fg: &ForegroundLayer, original: &RawImage) -> Result<RawImage> {
    let color = mean_color(original, &fg.mask, Region::Background)?;
    let (w, h) = fg.image.dims();
    composite(fg, &RawImage::filled(w, h, color)?)
}

/// Identity and label of one plan source.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SourceRef {
    pub id: String,
    pub label: CategoryLabel,
}

impl SourceRef {
    pub fn new(id: impl Into<String>, label: CategoryLabel) -> Self {
        Self { id: id.into(), label }
    }
}

impl From<&ForegroundLayer> for SourceRef {
    fn from(l: &ForegroundLayer) -> Self {
        Self::new(l.source_id.clone(), l.label)
    }
}

impl From<&BackgroundImage> for SourceRef {
    fn from(b: &BackgroundImage) -> Self {
        Self::new(b.source_id.clone(), b.label)
    }
}

/// One item of a composite plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanItem<'a> {
    pub fg: Option<&'a str>,
    pub bg: Option<&'a str>,
    pub label: CategoryLabel,
}

/// All (foreground, background) pairings of a setup, enumerated lazily in
/// foreground-id-major, background-id-minor order.
#[derive(Debug, Clone)]
pub struct CompositePlan {
    setup: BackgroundSetup,
    fgs: Vec<SourceRef>,
    bgs: Vec<SourceRef>,
    bgs_by_label: BTreeMap<CategoryLabel, Vec<usize>>,
}

/// Builds the plan for `setup`; sources are sorted by id.
pub fn enumerate_pairs(setup: BackgroundSetup, fgs: &[SourceRef], bgs: &[SourceRef]) -> Result<CompositePlan> {
    let mut fgs = fgs.to_vec();
    let mut bgs = bgs.to_vec();
    fgs.sort();
    bgs.sort();
    let needs_fg = setup != BackgroundSetup::OnlyBg;
    let needs_bg = matches!(
        setup,
        BackgroundSetup::OnlyBg | BackgroundSetup::SameCategoryBgWithFg | BackgroundSetup::AllCategoriesBgWithFg
    );
    if needs_fg && fgs.is_empty() {
        return Err(ComposeError::EmptyInput("foreground"));
    }
    if needs_bg && bgs.is_empty() {
        return Err(ComposeError::EmptyInput("background"));
    }
    let mut bgs_by_label: BTreeMap<CategoryLabel, Vec<usize>> = BTreeMap::new();
    for (i, b) in bgs.iter().enumerate() {
        bgs_by_label.entry(b.label).or_default().push(i);
    }
    if setup == BackgroundSetup::SameCategoryBgWithFg {
        if let Some(f) = fgs.iter().find(|f| !bgs_by_label.contains_key(&f.label)) {
            return Err(ComposeError::MissingCategory(f.label));
        }
    }
    Ok(CompositePlan { setup, fgs, bgs, bgs_by_label })
}

impl CompositePlan {
    pub fn setup(&self) -> BackgroundSetup {
        self.setup
    }

    pub fn foregrounds(&self) -> &[SourceRef] {
        &self.fgs
    }

    pub fn backgrounds(&self) -> &[SourceRef] {
        &self.bgs
    }

    /// Number of items, computed without enumerating.
    pub fn len(&self) -> usize {
        match self.setup {
            BackgroundSetup::OnlyBg => self.bgs.len(),
            BackgroundSetup::GrayBgWithFg | BackgroundSetup::MeanBgWithFg => self.fgs.len(),
            BackgroundSetup::AllCategoriesBgWithFg => self.fgs.len() * self.bgs.len(),
            BackgroundSetup::SameCategoryBgWithFg => {
                self.fgs.iter().map(|f| self.bgs_by_label.get(&f.label).map_or(0, Vec::len)).sum()
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> PlanIter<'_> {
        PlanIter { plan: self, fg: 0, bg: 0 }
    }
}

impl<'a> IntoIterator for &'a CompositePlan {
    type Item = PlanItem<'a>;
    type IntoIter = PlanIter<'a>;

    fn into_iter(self) -> PlanIter<'a> {
        self.iter()
    }
}

pub struct PlanIter<'a> {
    plan: &'a CompositePlan,
    fg: usize,
    bg: usize,
}

impl<'a> Iterator for PlanIter<'a> {
    type Item = PlanItem<'a>;

    fn next(&mut self) -> Option<PlanItem<'a>> {
        let plan = self.plan;
        match plan.setup {
            BackgroundSetup::OnlyBg => {
                let b = plan.bgs.get(self.bg)?;
                self.bg += 1;
                Some(PlanItem { fg: None, bg: Some(&b.id), label: b.label })
            }
            BackgroundSetup::GrayBgWithFg | BackgroundSetup::MeanBgWithFg => {
                let f = plan.fgs.get(self.fg)?;
                self.fg += 1;
                Some(PlanItem { fg: Some(&f.id), bg: None, label: f.label })
            }
            BackgroundSetup::AllCategoriesBgWithFg => loop {
                let f = plan.fgs.get(self.fg)?;
                if let Some(b) = plan.bgs.get(self.bg) {
                    self.bg += 1;
                    return Some(PlanItem { fg: Some(&f.id), bg: Some(&b.id), label: f.label });
                }
                self.fg += 1;
                self.bg = 0;
            },
            BackgroundSetup::SameCategoryBgWithFg => loop {
                let f = plan.fgs.get(self.fg)?;
                let same = plan.bgs_by_label.get(&f.label).map_or(&[][..], Vec::as_slice);
                if let Some(&bi) = same.get(self.bg) {
                    self.bg += 1;
                    let b = &plan.bgs[bi];
                    return Some(PlanItem { fg: Some(&f.id), bg: Some(&b.id), label: f.label });
                }
                self.fg += 1;
                self.bg = 0;
            },
        }
    }
}
