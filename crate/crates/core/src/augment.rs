//! Whole-image augmentations and their foreground-only ("segmented")
//! counterparts, which move the object while the infilled background stays
//! put.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::compose::{composite, ComposeError, ForegroundLayer};
use crate::imaging::{round_half_up, Mask, RawImage};
use crate::seed::{rng_from, stream};

#[derive(Debug, Error, PartialEq)]
pub enum AugmentError {
    #[error("offset ({0}, {1}) out of range for {2} translation")]
    OffsetOutOfRange(i32, i32, Mode),
    #[error("angle {0} out of range for {1} rotation")]
    AngleOutOfRange(f64, Mode),
    #[error("parameter out of range: {0}")]
    ParamOutOfRange(String),
    #[error("{0} has no segmented form")]
    NotSegmentable(AugmentKind),
    #[error("segmented operations need a foreground layer and background")]
    NeedsLayers,
    #[error("unknown augmentation '{0}'")]
    UnknownOp(String),
    #[error("malformed op record '{0}'")]
    MalformedOp(String),
    #[error(transparent)]
    Compose(#[from] ComposeError),
}

pub type Result<T> = std::result::Result<T, AugmentError>;

pub const SEGMENTED_OFFSETS: [i32; 8] = [-20, -15, -10, -5, 5, 10, 15, 20];
pub const SEGMENTED_ANGLES: [f64; 4] = [-10.0, -5.0, 5.0, 10.0];
pub const MAX_STANDARD_OFFSET: i32 = 20;
pub const MAX_STANDARD_ANGLE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AugmentKind {
    Flip,
    Translate,
    Rotate,
    HueShift,
    Contrast,
    GaussianNoise,
}

impl AugmentKind {
    fn tag(self) -> &'static str {
        match self {
            AugmentKind::Flip => "flip",
            AugmentKind::Translate => "translate",
            AugmentKind::Rotate => "rotate",
            AugmentKind::HueShift => "hue",
            AugmentKind::Contrast => "contrast",
            AugmentKind::GaussianNoise => "noise",
        }
    }

    fn from_tag(s: &str) -> Option<Self> {
        [Self::Flip, Self::Translate, Self::Rotate, Self::HueShift, Self::Contrast, Self::GaussianNoise]
            .into_iter()
            .find(|k| k.tag() == s)
    }

    pub fn is_geometric(self) -> bool {
        matches!(self, AugmentKind::Flip | AugmentKind::Translate | AugmentKind::Rotate)
    }
}

impl fmt::Display for AugmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Standard,
    Segmented,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Standard => "standard",
            Mode::Segmented => "segmented",
        })
    }
}

/// Concrete parameters of one operation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpParams {
    Flip { apply: bool },
    Translate { dx: i32, dy: i32 },
    Rotate { degrees: f64 },
    HueShift { degrees: f64 },
    Contrast { factor: f64 },
    GaussianNoise { sigma: f64, seed: u64 },
}

impl OpParams {
    pub fn kind(&self) -> AugmentKind {
        match self {
            OpParams::Flip { .. } => AugmentKind::Flip,
            OpParams::Translate { .. } => AugmentKind::Translate,
            OpParams::Rotate { .. } => AugmentKind::Rotate,
            OpParams::HueShift { .. } => AugmentKind::HueShift,
            OpParams::Contrast { .. } => AugmentKind::Contrast,
            OpParams::GaussianNoise { .. } => AugmentKind::GaussianNoise,
        }
    }
}

/// A fully specified operation: kind (implied by `params`), mode, params.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentOpSpec {
    pub mode: Mode,
    pub params: OpParams,
}

impl AugmentOpSpec {
    pub fn new(mode: Mode, params: OpParams) -> Result<Self> {
        let spec = Self { mode, params };
        spec.validate()?;
        Ok(spec)
    }

    pub fn kind(&self) -> AugmentKind {
        self.params.kind()
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.kind();
        if self.mode == Mode::Segmented && !kind.is_geometric() {
            return Err(AugmentError::NotSegmentable(kind));
        }
        match (self.params, self.mode) {
            (OpParams::Flip { .. }, _) => Ok(()),
            (OpParams::Translate { dx, dy }, mode) => check_offset(dx, dy, mode),
            (OpParams::Rotate { degrees }, mode) => check_angle(degrees, mode),
            (OpParams::HueShift { degrees }, _) => {
                if (-180.0..180.0).contains(&degrees) {
                    Ok(())
                } else {
                    Err(AugmentError::ParamOutOfRange(format!("hue delta {degrees} not in [-180, 180)")))
                }
            }
            (OpParams::Contrast { factor }, _) => check_contrast(factor),
            (OpParams::GaussianNoise { sigma, .. }, _) => check_sigma(sigma),
        }
    }
}

/// `kind:mode:params`, with multiple params joined by `/`.
impl fmt::Display for AugmentOpSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:", self.kind(), self.mode)?;
        match self.params {
            OpParams::Flip { apply } => write!(f, "{}", apply as u8),
            OpParams::Translate { dx, dy } => write!(f, "{dx}/{dy}"),
            OpParams::Rotate { degrees } => write!(f, "{degrees:?}"),
            OpParams::HueShift { degrees } => write!(f, "{degrees:?}"),
            OpParams::Contrast { factor } => write!(f, "{factor:?}"),
            OpParams::GaussianNoise { sigma, seed } => write!(f, "{sigma:?}/{seed}"),
        }
    }
}

impl FromStr for AugmentOpSpec {
    type Err = AugmentError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || AugmentError::MalformedOp(s.to_string());
        let mut parts = s.splitn(3, ':');
        let (kind, mode, params) = (parts.next().ok_or_else(bad)?, parts.next().ok_or_else(bad)?, parts.next().ok_or_else(bad)?);
        let kind = AugmentKind::from_tag(kind).ok_or_else(bad)?;
        let mode = match mode {
            "standard" => Mode::Standard,
            "segmented" => Mode::Segmented,
            _ => return Err(bad()),
        };
        let num = |v: &str| v.parse::<f64>().map_err(|_| bad());
        let pair = || params.split_once('/').ok_or_else(bad);
        let params = match kind {
            AugmentKind::Flip => OpParams::Flip {
                apply: match params {
                    "0" => false,
                    "1" => true,
                    _ => return Err(bad()),
                },
            },
            AugmentKind::Translate => {
                let (a, b) = pair()?;
                OpParams::Translate { dx: a.parse().map_err(|_| bad())?, dy: b.parse().map_err(|_| bad())? }
            }
            AugmentKind::Rotate => OpParams::Rotate { degrees: num(params)? },
            AugmentKind::HueShift => OpParams::HueShift { degrees: num(params)? },
            AugmentKind::Contrast => OpParams::Contrast { factor: num(params)? },
            AugmentKind::GaussianNoise => {
                let (a, b) = pair()?;
                OpParams::GaussianNoise { sigma: num(a)?, seed: b.parse().map_err(|_| bad())? }
            }
        };
        AugmentOpSpec::new(mode, params)
    }
}

fn check_offset(dx: i32, dy: i32, mode: Mode) -> Result<()> {
    let ok = match mode {
        Mode::Standard => dx.abs() <= MAX_STANDARD_OFFSET && dy.abs() <= MAX_STANDARD_OFFSET,
        Mode::Segmented => SEGMENTED_OFFSETS.contains(&dx) && SEGMENTED_OFFSETS.contains(&dy),
    };
    if ok {
        Ok(())
    } else {
        Err(AugmentError::OffsetOutOfRange(dx, dy, mode))
    }
}

fn check_angle(degrees: f64, mode: Mode) -> Result<()> {
    let ok = match mode {
        Mode::Standard => degrees.abs() <= MAX_STANDARD_ANGLE,
        Mode::Segmented => SEGMENTED_ANGLES.contains(&degrees),
    };
    if ok {
        Ok(())
    } else {
        Err(AugmentError::AngleOutOfRange(degrees, mode))
    }
}

fn check_contrast(factor: f64) -> Result<()> {
    if factor > 0.0 && factor <= 4.0 {
        Ok(())
    } else {
        Err(AugmentError::ParamOutOfRange(format!("contrast factor {factor} not in (0, 4]")))
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma >= 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(AugmentError::ParamOutOfRange(format!("noise sigma {sigma} must be >= 0")))
    }
}

/// What an operation acts on.
#[derive(Debug, Clone, Copy)]
pub enum AugmentInput<'a> {
    Image(&'a RawImage),
    Layered { fg: &'a ForegroundLayer, bg: &'a RawImage },
}

impl AugmentInput<'_> {
    fn flatten(&self) -> Result<RawImage> {
        match *self {
            AugmentInput::Image(img) => Ok(img.clone()),
            AugmentInput::Layered { fg, bg } => Ok(composite(fg, bg)?),
        }
    }

    fn layers(&self) -> Result<(&ForegroundLayer, &RawImage)> {
        match *self {
            AugmentInput::Image(_) => Err(AugmentError::NeedsLayers),
            AugmentInput::Layered { fg, bg } => Ok((fg, bg)),
        }
    }
}

// ---------------------------------------------------------------------------
// geometric primitives

pub fn flip_image(img: &RawImage) -> RawImage {
    let w = img.width();
    RawImage::from_fn(w, img.height(), |x, y| img.pixel(w - 1 - x, y)).expect("same dims")
}

fn flip_mask(m: &Mask) -> Mask {
    let w = m.width();
    Mask::from_fn(w, m.height(), |x, y| m.get(w - 1 - x, y)).expect("same dims")
}

pub fn flip_layer(fg: &ForegroundLayer) -> ForegroundLayer {
    ForegroundLayer { image: flip_image(&fg.image), mask: flip_mask(&fg.mask), ..fg.clone() }
}

/// Shift by `(dx, dy)`; vacated pixels replicate the nearest edge.
pub fn translate_image(img: &RawImage, dx: i32, dy: i32) -> RawImage {
    let (w, h) = (img.width() as i64, img.height() as i64);
    RawImage::from_fn(img.width(), img.height(), |x, y| {
        let sx = (x as i64 - dx as i64).clamp(0, w - 1);
        let sy = (y as i64 - dy as i64).clamp(0, h - 1);
        img.pixel(sx as usize, sy as usize)
    })
    .expect("same dims")
}

/// Shift the object; anything leaving the frame is clipped.
pub fn translate_layer(fg: &ForegroundLayer, dx: i32, dy: i32) -> ForegroundLayer {
    let (w, h) = fg.image.dims();
    let mut image = fg.image.clone();
    let mut mask = Mask::empty(w, h).expect("same dims");
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = (x as i64 - dx as i64, y as i64 - dy as i64);
            if sx >= 0 && sy >= 0 && (sx as usize) < w && (sy as usize) < h && fg.mask.get(sx as usize, sy as usize) {
                mask.set(x, y, true);
                image.set_pixel(x, y, fg.image.pixel(sx as usize, sy as usize));
            }
        }
    }
    ForegroundLayer { image, mask, ..fg.clone() }
}

/// Source position for an output pixel when rotating counter-clockwise (as
/// displayed) by `degrees` about `(cx, cy)`.
#[inline]
fn inverse_rotate(x: f64, y: f64, cx: f64, cy: f64, cos: f64, sin: f64) -> (f64, f64) {
    let (u, v) = (x - cx, y - cy);
    (cx + cos * u - sin * v, cy + sin * u + cos * v)
}

/// Rotation about the image center with bilinear sampling; samples falling
/// outside the frame replicate the edge.
pub fn rotate_image(img: &RawImage, degrees: f64) -> RawImage {
    if degrees == 0.0 {
        return img.clone();
    }
    let (w, h) = img.dims();
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (sin, cos) = degrees.to_radians().sin_cos();
    let clampx = |v: i64| v.clamp(0, w as i64 - 1) as usize;
    let clampy = |v: i64| v.clamp(0, h as i64 - 1) as usize;
    RawImage::from_fn(w, h, |x, y| {
        let (sx, sy) = inverse_rotate(x as f64, y as f64, cx, cy, cos, sin);
        let (x0, y0) = (sx.floor(), sy.floor());
        let (fx, fy) = (sx - x0, sy - y0);
        let (x0, y0) = (x0 as i64, y0 as i64);
        let taps = [
            (clampx(x0), clampy(y0), (1.0 - fx) * (1.0 - fy)),
            (clampx(x0 + 1), clampy(y0), fx * (1.0 - fy)),
            (clampx(x0), clampy(y0 + 1), (1.0 - fx) * fy),
            (clampx(x0 + 1), clampy(y0 + 1), fx * fy),
        ];
        std::array::from_fn(|c| round_half_up(taps.iter().map(|&(px, py, wt)| wt * img.pixel(px, py)[c] as f64).sum()))
    })
    .expect("same dims")
}

/// Centroid of the set mask pixels.
pub fn mask_centroid(m: &Mask) -> Option<(f64, f64)> {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
    for y in 0..m.height() {
        for x in 0..m.width() {
            if m.get(x, y) {
                sx += x as f64;
                sy += y as f64;
                n += 1.0;
            }
        }
    }
    (n > 0.0).then(|| (sx / n, sy / n))
}

/// Rotates the object about its mask centroid. A pixel belongs to the
/// rotated mask when the bilinear coverage of the source mask is at least
/// 0.5; its color averages only the covered source pixels.
pub fn rotate_layer(fg: &ForegroundLayer, degrees: f64) -> ForegroundLayer {
    let Some((cx, cy)) = mask_centroid(&fg.mask) else {
        return fg.clone();
    };
    if degrees == 0.0 {
        return fg.clone();
    }
    let (w, h) = fg.image.dims();
    let (sin, cos) = degrees.to_radians().sin_cos();
    let mut image = fg.image.clone();
    let mut mask = Mask::empty(w, h).expect("same dims");
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = inverse_rotate(x as f64, y as f64, cx, cy, cos, sin);
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as i64, y0 as i64);
            let mut coverage = 0.0;
            let mut acc = [0.0f64; 3];
            for (px, py, wt) in [
                (x0, y0, (1.0 - fx) * (1.0 - fy)),
                (x0 + 1, y0, fx * (1.0 - fy)),
                (x0, y0 + 1, (1.0 - fx) * fy),
                (x0 + 1, y0 + 1, fx * fy),
            ] {
                if px < 0 || py < 0 || px as usize >= w || py as usize >= h || !fg.mask.get(px as usize, py as usize) {
                    continue;
                }
                coverage += wt;
                let p = fg.image.pixel(px as usize, py as usize);
                for c in 0..3 {
                    acc[c] += wt * p[c] as f64;
                }
            }
            if coverage >= 0.5 {
                mask.set(x, y, true);
                image.set_pixel(x, y, acc.map(|v| round_half_up(v / coverage)));
            }
        }
    }
    ForegroundLayer { image, mask, ..fg.clone() }
}

// ---------------------------------------------------------------------------
// photometric primitives

fn rgb_to_hsv(p: [u8; 3]) -> (f64, f64, f64) {
    let [r, g, b] = p.map(|v| v as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    (h, s, max)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let c = v * s;
    let hp = h.rem_euclid(360.0) / 60.0;
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r, g, b].map(|ch| round_half_up((ch + m) * 255.0))
}

/// Adds `degrees` to the HSV hue of every pixel (wrapping modulo 360).
pub fn hue_shift(img: &RawImage, degrees: f64) -> RawImage {
    RawImage::from_fn(img.width(), img.height(), |x, y| {
        let (h, s, v) = rgb_to_hsv(img.pixel(x, y));
        hsv_to_rgb((h + degrees).rem_euclid(360.0), s, v)
    })
    .expect("same dims")
}

pub fn contrast(img: &RawImage, factor: f64) -> RawImage {
    if factor == 1.0 {
        return img.clone();
    }
    let data = img.data().iter().map(|&v| round_half_up((v as f64 - 128.0) * factor + 128.0)).collect();
    RawImage::new(img.width(), img.height(), data).expect("same dims")
}

pub fn gaussian_noise(img: &RawImage, sigma: f64, seed: u64) -> RawImage {
    if sigma == 0.0 {
        return img.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    let mut rng = rng_from(&[stream::AUGMENT, seed, 0xA015E]);
    let data = img.data().iter().map(|&v| round_half_up(v as f64 + normal.sample(&mut rng))).collect();
    RawImage::new(img.width(), img.height(), data).expect("same dims")
}

// ---------------------------------------------------------------------------
// mode-aware operations

pub fn flip(input: AugmentInput<'_>, mode: Mode) -> Result<RawImage> {
    match mode {
        Mode::Standard => Ok(flip_image(&input.flatten()?)),
        Mode::Segmented => {
            let (fg, bg) = input.layers()?;
            Ok(composite(&flip_layer(fg), bg)?)
        }
    }
}

pub fn translate(input: AugmentInput<'_>, dx: i32, dy: i32, mode: Mode) -> Result<RawImage> {
    check_offset(dx, dy, mode)?;
    match mode {
        Mode::Standard => Ok(translate_image(&input.flatten()?, dx, dy)),
        Mode::Segmented => {
            let (fg, bg) = input.layers()?;
            Ok(composite(&translate_layer(fg, dx, dy), bg)?)
        }
    }
}

pub fn rotate(input: AugmentInput<'_>, degrees: f64, mode: Mode) -> Result<RawImage> {
    check_angle(degrees, mode)?;
    match mode {
        Mode::Standard => Ok(rotate_image(&input.flatten()?, degrees)),
        Mode::Segmented => {
            let (fg, bg) = input.layers()?;
            Ok(composite(&rotate_layer(fg, degrees), bg)?)
        }
    }
}

/// Photometric change; `foreground_only` restricts it to the object of a
/// layered input.
pub fn photometric(input: AugmentInput<'_>, params: OpParams, foreground_only: bool) -> Result<RawImage> {
    let apply = |img: &RawImage| -> Result<RawImage> {
        match params {
            // hue deltas wrap, so any finite value is accepted here
            OpParams::HueShift { degrees } if degrees.is_finite() => Ok(hue_shift(img, degrees)),
            OpParams::Contrast { factor } => check_contrast(factor).map(|_| contrast(img, factor)),
            OpParams::GaussianNoise { sigma, seed } => check_sigma(sigma).map(|_| gaussian_noise(img, sigma, seed)),
            other => Err(AugmentError::ParamOutOfRange(format!("{other:?} is not photometric"))),
        }
    };
    if foreground_only {
        let (fg, bg) = input.layers()?;
        let changed = ForegroundLayer { image: apply(&fg.image)?, ..fg.clone() };
        Ok(composite(&changed, bg)?)
    } else {
        apply(&input.flatten()?)
    }
}

/// Draws parameters for `kind` under `mode`.
pub fn sample_params<R: Rng + ?Sized>(kind: AugmentKind, mode: Mode, rng: &mut R) -> Result<OpParams> {
    if mode == Mode::Segmented && !kind.is_geometric() {
        return Err(AugmentError::NotSegmentable(kind));
    }
    Ok(match (kind, mode) {
        (AugmentKind::Flip, _) => OpParams::Flip { apply: rng.random_bool(0.5) },
        (AugmentKind::Translate, Mode::Standard) => OpParams::Translate {
            dx: rng.random_range(-MAX_STANDARD_OFFSET..=MAX_STANDARD_OFFSET),
            dy: rng.random_range(-MAX_STANDARD_OFFSET..=MAX_STANDARD_OFFSET),
        },
        (AugmentKind::Translate, Mode::Segmented) => OpParams::Translate {
            dx: SEGMENTED_OFFSETS[rng.random_range(0..SEGMENTED_OFFSETS.len())],
            dy: SEGMENTED_OFFSETS[rng.random_range(0..SEGMENTED_OFFSETS.len())],
        },
        (AugmentKind::Rotate, Mode::Standard) => {
            // open interval (-10, 10)
            let mut a = -MAX_STANDARD_ANGLE;
            while a == -MAX_STANDARD_ANGLE {
                a = rng.random_range(-MAX_STANDARD_ANGLE..MAX_STANDARD_ANGLE);
            }
            OpParams::Rotate { degrees: a }
        }
        (AugmentKind::Rotate, Mode::Segmented) => {
            OpParams::Rotate { degrees: SEGMENTED_ANGLES[rng.random_range(0..SEGMENTED_ANGLES.len())] }
        }
        (AugmentKind::HueShift, _) => OpParams::HueShift { degrees: rng.random_range(-20.0..20.0) },
        (AugmentKind::Contrast, _) => OpParams::Contrast { factor: rng.random_range(0.8..=1.25) },
        (AugmentKind::GaussianNoise, _) => OpParams::GaussianNoise { sigma: rng.random_range(0.0..=8.0), seed: rng.random() },
    })
}

/// Applies one concrete operation to a layered input, returning the new
/// layer for segmented geometry or the flattened image otherwise.
fn apply_to_layer(fg: &ForegroundLayer, spec: &AugmentOpSpec) -> ForegroundLayer {
    match spec.params {
        OpParams::Flip { apply: true } => flip_layer(fg),
        OpParams::Flip { apply: false } => fg.clone(),
        OpParams::Translate { dx, dy } => translate_layer(fg, dx, dy),
        OpParams::Rotate { degrees } => rotate_layer(fg, degrees),
        _ => unreachable!("validated as geometric"),
    }
}

fn apply_to_image(img: &RawImage, spec: &AugmentOpSpec) -> RawImage {
    match spec.params {
        OpParams::Flip { apply: true } => flip_image(img),
        OpParams::Flip { apply: false } => img.clone(),
        OpParams::Translate { dx, dy } => translate_image(img, dx, dy),
        OpParams::Rotate { degrees } => rotate_image(img, degrees),
        OpParams::HueShift { degrees } => hue_shift(img, degrees),
        OpParams::Contrast { factor } => contrast(img, factor),
        OpParams::GaussianNoise { sigma, seed } => gaussian_noise(img, sigma, seed),
    }
}

/// An operation selected for a pipeline; parameters are drawn per item.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentOp {
    pub kind: AugmentKind,
    pub mode: Mode,
}

impl AugmentOp {
    /// CLI name: `hflip`, `translate`, `rotate`, `hue`, `contrast`, `noise`,
    /// and `seg-` prefixed geometric variants.
    pub fn name(&self) -> String {
        let base = match self.kind {
            AugmentKind::Flip => "hflip",
            k => k.tag(),
        };
        match self.mode {
            Mode::Standard => base.to_string(),
            Mode::Segmented => format!("seg-{base}"),
        }
    }
}

impl FromStr for AugmentOp {
    type Err = AugmentError;

    fn from_str(s: &str) -> Result<Self> {
        let (mode, base) = match s.strip_prefix("seg-") {
            Some(rest) => (Mode::Segmented, rest),
            None => (Mode::Standard, s),
        };
        let kind = match base {
            "hflip" => AugmentKind::Flip,
            other => AugmentKind::from_tag(other).filter(|k| *k != AugmentKind::Flip).ok_or_else(|| AugmentError::UnknownOp(s.to_string()))?,
        };
        if mode == Mode::Segmented && !kind.is_geometric() {
            return Err(AugmentError::NotSegmentable(kind));
        }
        Ok(AugmentOp { kind, mode })
    }
}

/// Ordered operation list plus master seed.
///
/// Segmented operations act on the foreground layer first (in list order);
/// the result is composited and the whole-image operations follow in list
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentPipeline {
    pub ops: Vec<AugmentOp>,
    pub seed: u64,
}

impl AugmentPipeline {
    pub fn new(ops: Vec<AugmentOp>, seed: u64) -> Self {
        Self { ops, seed }
    }

    pub fn empty(seed: u64) -> Self {
        Self::new(Vec::new(), seed)
    }

    /// Parses a comma-separated list such as `hflip,seg-translate`.
    pub fn parse(list: &str, seed: u64) -> Result<Self> {
        let ops = list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect::<Result<_>>()?;
        Ok(Self::new(ops, seed))
    }

    pub fn has_segmented(&self) -> bool {
        self.ops.iter().any(|op| op.mode == Mode::Segmented)
    }

    /// Concrete parameters for item `item_index`; independent of the order
    /// in which items are expanded.
    pub fn expand(&self, item_index: u64) -> Vec<AugmentOpSpec> {
        self.ops
            .iter()
            .enumerate()
            .map(|(op_index, op)| {
                let mut rng = rng_from(&[stream::AUGMENT, self.seed, item_index, op_index as u64]);
                let params = sample_params(op.kind, op.mode, &mut rng).expect("ops validated on construction");
                AugmentOpSpec { mode: op.mode, params }
            })
            .collect()
    }

    /// Runs concrete ops on an input, segmented ones first.
    pub fn apply_specs(input: AugmentInput<'_>, specs: &[AugmentOpSpec]) -> Result<RawImage> {
        let segmented: Vec<_> = specs.iter().filter(|s| s.mode == Mode::Segmented).collect();
        let flat = if segmented.is_empty() {
            input.flatten()?
        } else {
            let (fg, bg) = input.layers()?;
            let layer = segmented.iter().fold(fg.clone(), |l, s| apply_to_layer(&l, s));
            composite(&layer, bg)?
        };
        Ok(specs.iter().filter(|s| s.mode == Mode::Standard).fold(flat, |img, s| apply_to_image(&img, s)))
    }

    pub fn apply(&self, input: AugmentInput<'_>, item_index: u64) -> Result<(RawImage, Vec<AugmentOpSpec>)> {
        let specs = self.expand(item_index);
        Ok((Self::apply_specs(input, &specs)?, specs))
    }
}
