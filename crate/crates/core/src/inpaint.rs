//! Hole filling with a randomized nearest-neighbor field.
//!
//! Every patch that overlaps the hole (a *target*) is matched to a patch
//! lying entirely outside the hole and inside the image (a *source*). The
//! field is refined by alternating propagation and random search, first on
//! a coarse copy of the image and then on successively finer levels, and
//! hole pixels are finally voted from all overlapping source patches.

use rand::Rng;
use thiserror::Error;

use crate::imaging::{round_half_up, Mask, RawImage};
use crate::seed::{derive_seed, rng_from, stream};

#[derive(Debug, Error, PartialEq)]
pub enum InpaintError {
    #[error("invalid inpainting parameters: {0}")]
    InvalidParams(String),
    #[error("hole leaves no fully valid source patch")]
    NoValidSource,
    #[error("hole mask is {0}x{1} but image is {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
}

pub type Result<T> = std::result::Result<T, InpaintError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InpaintParams {
    /// Odd side length of the square patch.
    pub patch_size: usize,
    /// Propagation/search sweeps per pyramid level.
    pub iterations: usize,
    /// Shrink factor of the random-search radius between probes.
    pub search_decay: f64,
    pub pyramid_levels: usize,
    pub rng_seed: u64,
}

impl Default for InpaintParams {
    fn default() -> Self {
        Self { patch_size: 7, iterations: 5, search_decay: 0.5, pyramid_levels: 3, rng_seed: 0 }
    }
}

impl InpaintParams {
    pub fn with_seed(seed: u64) -> Self {
        Self { rng_seed: seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size < 3 || self.patch_size.is_multiple_of(2) {
            return Err(InpaintError::InvalidParams(format!("patch size {} must be odd and >= 3", self.patch_size)));
        }
        if self.iterations == 0 {
            return Err(InpaintError::InvalidParams("iterations must be >= 1".into()));
        }
        if !(self.search_decay > 0.0 && self.search_decay < 1.0) {
            return Err(InpaintError::InvalidParams(format!("search decay {} not in (0,1)", self.search_decay)));
        }
        if self.pyramid_levels == 0 {
            return Err(InpaintError::InvalidParams("pyramid levels must be >= 1".into()));
        }
        Ok(())
    }
}

const NO_SLOT: u32 = u32::MAX;

/// Offsets and patch distances for every target patch center.
///
/// Offsets are `(dx, dy)` from the target center to the matched source
/// center; distances are sums of squared channel differences over the
/// whole window.
#[derive(Debug, Clone, PartialEq)]
pub struct NearestNeighborField {
    width: usize,
    height: usize,
    patch_size: usize,
    targets: Vec<(usize, usize)>,
    slot: Vec<u32>,
    offsets: Vec<(i32, i32)>,
    distances: Vec<f64>,
}

/// One field entry as seen from outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldEntry {
    pub target: (usize, usize),
    pub offset: (i32, i32),
    pub distance: f64,
}

impl NearestNeighborField {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn entries(&self) -> impl Iterator<Item = FieldEntry> + '_ {
        self.targets.iter().enumerate().map(|(i, &target)| FieldEntry {
            target,
            offset: self.offsets[i],
            distance: self.distances[i],
        })
    }

    pub fn get(&self, x: usize, y: usize) -> Option<FieldEntry> {
        if x >= self.width || y >= self.height {
            return None;
        }
        match self.slot[y * self.width + x] {
            NO_SLOT => None,
            s => {
                let s = s as usize;
                Some(FieldEntry { target: (x, y), offset: self.offsets[s], distance: self.distances[s] })
            }
        }
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn total_distance(&self) -> f64 {
        self.distances.iter().sum()
    }

    pub fn mean_distance(&self) -> f64 {
        if self.distances.is_empty() {
            0.0
        } else {
            self.total_distance() / self.distances.len() as f64
        }
    }
}

/// Target and source sets induced by a hole at a given patch size.
struct Domain {
    width: usize,
    height: usize,
    radius: usize,
    valid_source: Vec<bool>,
    sources: Vec<(usize, usize)>,
    targets: Vec<(usize, usize)>,
}

impl Domain {
    fn new(hole: &Mask, patch_size: usize) -> Self {
        let (w, h) = hole.dims();
        let r = patch_size / 2;
        let mut valid_source = vec![false; w * h];
        let mut sources = Vec::new();
        let mut targets = Vec::new();
        if w >= patch_size && h >= patch_size {
            // summed-area table of the hole
            let mut sat = vec![0u32; (w + 1) * (h + 1)];
            for y in 0..h {
                for x in 0..w {
                    sat[(y + 1) * (w + 1) + x + 1] = hole.get(x, y) as u32 + sat[y * (w + 1) + x + 1]
                        + sat[(y + 1) * (w + 1) + x]
                        - sat[y * (w + 1) + x];
                }
            }
            let window = |cx: usize, cy: usize| {
                let (x0, y0, x1, y1) = (cx - r, cy - r, cx + r + 1, cy + r + 1);
                sat[y1 * (w + 1) + x1] + sat[y0 * (w + 1) + x0] - sat[y0 * (w + 1) + x1] - sat[y1 * (w + 1) + x0]
            };
            for cy in r..h - r {
                for cx in r..w - r {
                    if window(cx, cy) == 0 {
                        valid_source[cy * w + cx] = true;
                        sources.push((cx, cy));
                    } else {
                        targets.push((cx, cy));
                    }
                }
            }
        }
        Self { width: w, height: h, radius: r, valid_source, sources, targets }
    }

    #[inline]
    fn is_source(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.valid_source[y as usize * self.width + x as usize]
    }
}

/// Sum of squared differences between the windows centered at `t` and `s`,
/// abandoning once the running sum exceeds `cap`.
#[inline]
fn window_ssd(img: &RawImage, t: (usize, usize), s: (usize, usize), r: usize, cap: f64) -> f64 {
    let w = img.width();
    let data = img.data();
    let side = (2 * r + 1) * 3;
    let cap = if cap.is_finite() { cap as u64 } else { u64::MAX };
    let mut sum = 0u64;
    for dy in 0..=2 * r {
        let ti = ((t.1 + dy - r) * w + t.0 - r) * 3;
        let si = ((s.1 + dy - r) * w + s.0 - r) * 3;
        sum += data[ti..ti + side]
            .iter()
            .zip(&data[si..si + side])
            .map(|(&a, &b)| {
                let d = a as i32 - b as i32;
                (d * d) as u64
            })
            .sum::<u64>();
        if sum > cap {
            break;
        }
    }
    sum as f64
}

fn check_dims(image: &RawImage, hole: &Mask) -> Result<()> {
    if image.dims() != hole.dims() {
        return Err(InpaintError::DimensionMismatch(hole.width(), hole.height(), image.width(), image.height()));
    }
    Ok(())
}

/// Random initialization: each target gets a uniformly chosen valid source.
pub fn nnf_init<R: Rng + ?Sized>(
    image: &RawImage,
    hole: &Mask,
    params: &InpaintParams,
    rng: &mut R,
) -> Result<NearestNeighborField> {
    params.validate()?;
    check_dims(image, hole)?;
    let domain = Domain::new(hole, params.patch_size);
    init_field(image, &domain, params.patch_size, rng, None)
}

fn init_field<R: Rng + ?Sized>(
    image: &RawImage,
    domain: &Domain,
    patch_size: usize,
    rng: &mut R,
    guide: Option<&NearestNeighborField>,
) -> Result<NearestNeighborField> {
    let (w, h) = (domain.width, domain.height);
    let mut field = NearestNeighborField {
        width: w,
        height: h,
        patch_size,
        targets: domain.targets.clone(),
        slot: vec![NO_SLOT; w * h],
        offsets: Vec::with_capacity(domain.targets.len()),
        distances: Vec::with_capacity(domain.targets.len()),
    };
    if domain.targets.is_empty() {
        return Ok(field);
    }
    if domain.sources.is_empty() {
        return Err(InpaintError::NoValidSource);
    }
    for (i, &(tx, ty)) in domain.targets.iter().enumerate() {
        field.slot[ty * w + tx] = i as u32;
        let upsampled = guide.and_then(|g| g.get(tx / 2, ty / 2)).and_then(|e| {
            let (sx, sy) = (tx as i64 + 2 * e.offset.0 as i64, ty as i64 + 2 * e.offset.1 as i64);
            domain.is_source(sx, sy).then_some((sx as usize, sy as usize))
        });
        let src = match upsampled {
            Some(s) => s,
            None => domain.sources[rng.random_range(0..domain.sources.len())],
        };
        field.offsets.push((src.0 as i32 - tx as i32, src.1 as i32 - ty as i32));
        field.distances.push(window_ssd(image, (tx, ty), src, domain.radius, f64::INFINITY));
    }
    Ok(field)
}

/// One propagation + random-search sweep. Even iterations scan in raster
/// order, odd iterations in reverse. Candidates replace the incumbent only
/// on a strict improvement, so no distance ever increases.
pub fn nnf_iterate(
    field: &mut NearestNeighborField,
    image: &RawImage,
    hole: &Mask,
    params: &InpaintParams,
    iteration_index: usize,
) -> Result<()> {
    params.validate()?;
    check_dims(image, hole)?;
    let domain = Domain::new(hole, params.patch_size);
    sweep(field, image, &domain, params, iteration_index);
    Ok(())
}

fn sweep(
    field: &mut NearestNeighborField,
    image: &RawImage,
    domain: &Domain,
    params: &InpaintParams,
    iteration_index: usize,
) {
    let mut rng = rng_from(&[stream::INPAINT, params.rng_seed, 1, iteration_index as u64]);
    let n = field.targets.len();
    let forward = iteration_index.is_multiple_of(2);
    let step: i64 = if forward { -1 } else { 1 };
    let w = field.width;
    let r = domain.radius;
    let max_radius = field.width.max(field.height) as f64;

    for k in 0..n {
        let i = if forward { k } else { n - 1 - k };
        let (tx, ty) = field.targets[i];
        let mut best = field.offsets[i];
        let mut best_d = field.distances[i];

        let consider = |off: (i32, i32), best: &mut (i32, i32), best_d: &mut f64| {
            let (sx, sy) = (tx as i64 + off.0 as i64, ty as i64 + off.1 as i64);
            if *best_d > 0.0 && domain.is_source(sx, sy) {
                let d = window_ssd(image, (tx, ty), (sx as usize, sy as usize), r, *best_d);
                if d < *best_d {
                    *best = off;
                    *best_d = d;
                }
            }
        };

        // propagation from the already-visited horizontal and vertical neighbors
        for (nx, ny) in [(tx as i64 + step, ty as i64), (tx as i64, ty as i64 + step)] {
            if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= field.height {
                continue;
            }
            let s = field.slot[ny as usize * w + nx as usize];
            if s != NO_SLOT {
                let off = field.offsets[s as usize];
                consider(off, &mut best, &mut best_d);
            }
        }

        // random search around the current best with shrinking radius
        let mut radius = max_radius;
        while radius >= 1.0 {
            let ri = radius as i32;
            let cand = (best.0 + rng.random_range(-ri..=ri), best.1 + rng.random_range(-ri..=ri));
            consider(cand, &mut best, &mut best_d);
            radius *= params.search_decay;
        }

        field.offsets[i] = best;
        field.distances[i] = best_d;
    }
}

/// Fills the pixels under `hole`; every other pixel is returned untouched.
pub fn infill(image: &RawImage, hole: &Mask, params: &InpaintParams) -> Result<RawImage> {
    infill_with_field(image, hole, params).map(|(img, _)| img)
}

/// Like [`infill`], also returning the finest-level field used for voting.
pub fn infill_with_field(
    image: &RawImage,
    hole: &Mask,
    params: &InpaintParams,
) -> Result<(RawImage, NearestNeighborField)> {
    params.validate()?;
    check_dims(image, hole)?;
    let finest = Domain::new(hole, params.patch_size);
    if hole.is_empty() {
        let field = init_field(image, &finest, params.patch_size, &mut rng_from(&[0]), None)?;
        return Ok((image.clone(), field));
    }
    if finest.sources.is_empty() {
        return Err(InpaintError::NoValidSource);
    }

    let mut levels = vec![(image.clone(), hole.clone(), finest)];
    while levels.len() < params.pyramid_levels {
        let (img, m, _) = levels.last().unwrap();
        if img.width() / 2 < params.patch_size || img.height() / 2 < params.patch_size {
            break;
        }
        let (ci, cm) = (downsample_image(img), downsample_mask(m));
        let domain = Domain::new(&cm, params.patch_size);
        if domain.sources.is_empty() {
            break;
        }
        levels.push((ci, cm, domain));
    }

    let mut estimate: Option<RawImage> = None;
    let mut field: Option<NearestNeighborField> = None;
    for (level, (level_img, level_hole, domain)) in levels.iter().enumerate().rev() {
        let working = match &estimate {
            None => diffuse_seed(level_img, level_hole),
            Some(coarse) => upsample_into(level_img, level_hole, coarse),
        };
        let level_params = InpaintParams {
            rng_seed: derive_seed(&[params.rng_seed, level as u64]),
            ..*params
        };
        let mut rng = rng_from(&[stream::INPAINT, level_params.rng_seed, 0]);
        let mut f = init_field(&working, domain, params.patch_size, &mut rng, field.as_ref())?;
        for it in 0..params.iterations {
            sweep(&mut f, &working, domain, &level_params, it);
        }
        estimate = Some(vote(&working, level_hole, &f));
        field = Some(f);
    }
    Ok((estimate.expect("at least one level"), field.expect("at least one level")))
}

/// Hole pixels become the weighted average of the source pixels that every
/// overlapping target patch maps onto them. Weight is
/// `exp(-d / (2 sigma^2))` with sigma the mean field distance.
fn vote(working: &RawImage, hole: &Mask, field: &NearestNeighborField) -> RawImage {
    let (w, h) = working.dims();
    let r = field.patch_size / 2;
    let sigma = field.mean_distance();
    let mut acc = vec![[0.0f64; 3]; w * h];
    let mut wsum = vec![0.0f64; w * h];
    for e in field.entries() {
        let weight = if sigma > 0.0 { (-e.distance / (2.0 * sigma * sigma)).exp() } else { 1.0 };
        let (tx, ty) = e.target;
        for y in ty - r..=ty + r {
            for x in tx - r..=tx + r {
                if !hole.get(x, y) {
                    continue;
                }
                let sx = (x as i64 + e.offset.0 as i64) as usize;
                let sy = (y as i64 + e.offset.1 as i64) as usize;
                let p = working.pixel(sx, sy);
                let a = &mut acc[y * w + x];
                for c in 0..3 {
                    a[c] += weight * p[c] as f64;
                }
                wsum[y * w + x] += weight;
            }
        }
    }
    let mut out = working.clone();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if hole.get(x, y) && wsum[i] > 0.0 {
                out.set_pixel(x, y, acc[i].map(|v| round_half_up(v / wsum[i])));
            }
        }
    }
    out
}

fn downsample_image(img: &RawImage) -> RawImage {
    let (w, h) = (img.width() / 2, img.height() / 2);
    RawImage::from_fn(w, h, |x, y| {
        let q = [img.pixel(2 * x, 2 * y), img.pixel(2 * x + 1, 2 * y), img.pixel(2 * x, 2 * y + 1), img.pixel(2 * x + 1, 2 * y + 1)];
        std::array::from_fn(|c| ((q.iter().map(|p| p[c] as u32).sum::<u32>() + 2) / 4) as u8)
    })
    .expect("halved dimensions are nonzero")
}

/// A coarse pixel is in the hole if any of its four children is.
fn downsample_mask(m: &Mask) -> Mask {
    Mask::from_fn(m.width() / 2, m.height() / 2, |x, y| {
        m.get(2 * x, 2 * y) || m.get(2 * x + 1, 2 * y) || m.get(2 * x, 2 * y + 1) || m.get(2 * x + 1, 2 * y + 1)
    })
    .expect("halved dimensions are nonzero")
}

fn upsample_into(fine: &RawImage, hole: &Mask, coarse: &RawImage) -> RawImage {
    let mut out = fine.clone();
    for y in 0..fine.height() {
        for x in 0..fine.width() {
            if hole.get(x, y) {
                let cx = (x / 2).min(coarse.width() - 1);
                let cy = (y / 2).min(coarse.height() - 1);
                out.set_pixel(x, y, coarse.pixel(cx, cy));
            }
        }
    }
    out
}

/// Seeds hole pixels with the mean known color, then relaxes each toward the
/// mean of its 8-neighborhood until no value moves by 0.5 or more.
fn diffuse_seed(img: &RawImage, hole: &Mask) -> RawImage {
    let (w, h) = img.dims();
    let known = hole.inverted();
    let start = crate::imaging::mean_color(img, &known, crate::imaging::Region::Foreground)
        .unwrap_or([128, 128, 128]);
    let mut vals: Vec<[f64; 3]> = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let p = if hole.get(x, y) { start } else { img.pixel(x, y) };
            p.map(|v| v as f64)
        })
        .collect();
    let hole_px: Vec<(usize, usize)> = (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).filter(|&(x, y)| hole.get(x, y)).collect();
    for _ in 0..10_000 {
        let mut max_change = 0.0f64;
        for &(x, y) in &hole_px {
            let mut sum = [0.0; 3];
            let mut n = 0.0;
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    if (nx, ny) != (x, y) {
                        let v = vals[ny * w + nx];
                        for c in 0..3 {
                            sum[c] += v[c];
                        }
                        n += 1.0;
                    }
                }
            }
            let cur = &mut vals[y * w + x];
            for c in 0..3 {
                let next = sum[c] / n;
                max_change = max_change.max((next - cur[c]).abs());
                cur[c] = next;
            }
        }
        if max_change < 0.5 {
            break;
        }
    }
    let mut out = img.clone();
    for &(x, y) in &hole_px {
        out.set_pixel(x, y, vals[y * w + x].map(round_half_up));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(w: usize, h: usize, seed: u64) -> RawImage {
        let mut rng = rng_from(&[seed]);
        RawImage::from_fn(w, h, |_, _| [rng.random(), rng.random(), rng.random()]).unwrap()
    }

    fn square_hole(w: usize, h: usize, x0: usize, y0: usize, side: usize) -> Mask {
        Mask::from_fn(w, h, |x, y| x >= x0 && x < x0 + side && y >= y0 && y < y0 + side).unwrap()
    }

    /// Plain nested-loop distance, independent of `window_ssd`.
    fn reference_distance(img: &RawImage, t: (usize, usize), s: (usize, usize), r: usize) -> f64 {
        let mut d = 0.0;
        for dy in -(r as i64)..=r as i64 {
            for dx in -(r as i64)..=r as i64 {
                let a = img.pixel((t.0 as i64 + dx) as usize, (t.1 as i64 + dy) as usize);
                let b = img.pixel((s.0 as i64 + dx) as usize, (s.1 as i64 + dy) as usize);
                for c in 0..3 {
                    let e = a[c] as f64 - b[c] as f64;
                    d += e * e;
                }
            }
        }
        d
    }

    fn assert_field_consistent(field: &NearestNeighborField, img: &RawImage, hole: &Mask) {
        let r = field.patch_size() / 2;
        for e in field.entries() {
            let s = ((e.target.0 as i64 + e.offset.0 as i64) as usize, (e.target.1 as i64 + e.offset.1 as i64) as usize);
            assert!(s.0 >= r && s.1 >= r && s.0 + r < img.width() && s.1 + r < img.height());
            for y in s.1 - r..=s.1 + r {
                for x in s.0 - r..=s.0 + r {
                    assert!(!hole.get(x, y), "source window touches the hole");
                }
            }
            assert_eq!(e.distance, reference_distance(img, e.target, s, r));
        }
    }

    #[test]
    fn empty_hole_gives_empty_field() {
        let img = textured(12, 12, 1);
        let hole = Mask::empty(12, 12).unwrap();
        let field = nnf_init(&img, &hole, &InpaintParams::default(), &mut rng_from(&[1])).unwrap();
        assert!(field.is_empty());
    }

    #[test]
    fn constant_image_has_zero_distances() {
        let img = RawImage::filled(10, 10, [40, 50, 60]).unwrap();
        let hole = square_hole(10, 10, 6, 6, 3);
        let params = InpaintParams { patch_size: 3, ..Default::default() };
        let field = nnf_init(&img, &hole, &params, &mut rng_from(&[2])).unwrap();
        assert!(!field.is_empty());
        assert!(field.distances().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn init_distances_match_recomputation() {
        let img = textured(16, 16, 3);
        let hole = square_hole(16, 16, 2, 2, 4);
        let params = InpaintParams::default();
        let field = nnf_init(&img, &hole, &params, &mut rng_from(&[3])).unwrap();
        assert_field_consistent(&field, &img, &hole);
    }

    #[test]
    fn centered_hole_without_sources_errors() {
        let img = textured(12, 12, 4);
        let hole = square_hole(12, 12, 4, 4, 4);
        let err = nnf_init(&img, &hole, &InpaintParams::default(), &mut rng_from(&[4])).unwrap_err();
        assert_eq!(err, InpaintError::NoValidSource);
        assert_eq!(infill(&img, &hole, &InpaintParams::default()).unwrap_err(), InpaintError::NoValidSource);
    }

    #[test]
    fn iterate_never_increases_and_stays_consistent() {
        let img = textured(16, 16, 5);
        let hole = square_hole(16, 16, 9, 3, 4);
        let params = InpaintParams { patch_size: 5, ..Default::default() };
        let mut field = nnf_init(&img, &hole, &params, &mut rng_from(&[5])).unwrap();
        for it in 0..6 {
            let before = field.distances().to_vec();
            nnf_iterate(&mut field, &img, &hole, &params, it).unwrap();
            for (a, b) in before.iter().zip(field.distances()) {
                assert!(b <= a);
            }
        }
        assert_field_consistent(&field, &img, &hole);
    }

    #[test]
    fn zero_field_is_fixed_point() {
        let img = RawImage::filled(12, 12, [3, 3, 3]).unwrap();
        let hole = square_hole(12, 12, 1, 1, 3);
        let params = InpaintParams { patch_size: 3, ..Default::default() };
        let mut field = nnf_init(&img, &hole, &params, &mut rng_from(&[6])).unwrap();
        let before = field.clone();
        nnf_iterate(&mut field, &img, &hole, &params, 0).unwrap();
        assert_eq!(field, before);
    }

    #[test]
    fn infill_empty_hole_is_identity() {
        let img = textured(20, 20, 7);
        let hole = Mask::empty(20, 20).unwrap();
        assert_eq!(infill(&img, &hole, &InpaintParams::default()).unwrap(), img);
    }

    #[test]
    fn infill_constant_stays_constant() {
        let img = RawImage::filled(32, 32, [10, 200, 30]).unwrap();
        let hole = Mask::from_fn(32, 32, |x, y| (x as i32 - 16).pow(2) + (y as i32 - 14).pow(2) < 30).unwrap();
        assert_eq!(infill(&img, &hole, &InpaintParams::default()).unwrap(), img);
    }

    #[test]
    fn infill_keeps_known_pixels_and_is_deterministic() {
        let img = textured(40, 40, 8);
        let hole = square_hole(40, 40, 12, 15, 10);
        let params = InpaintParams::with_seed(99);
        let out = infill(&img, &hole, &params).unwrap();
        for y in 0..40 {
            for x in 0..40 {
                if !hole.get(x, y) {
                    assert_eq!(out.pixel(x, y), img.pixel(x, y));
                }
            }
        }
        assert_eq!(out, infill(&img, &hole, &params).unwrap());
    }

    #[test]
    fn rejects_bad_params() {
        let img = textured(12, 12, 9);
        let hole = Mask::empty(12, 12).unwrap();
        for p in [
            InpaintParams { patch_size: 4, ..Default::default() },
            InpaintParams { patch_size: 1, ..Default::default() },
            InpaintParams { iterations: 0, ..Default::default() },
            InpaintParams { search_decay: 1.0, ..Default::default() },
            InpaintParams { pyramid_levels: 0, ..Default::default() },
        ] {
            assert!(matches!(infill(&img, &hole, &p), Err(InpaintError::InvalidParams(_))));
        }
        let wrong = Mask::empty(11, 12).unwrap();
        assert!(matches!(infill(&img, &wrong, &InpaintParams::default()), Err(InpaintError::DimensionMismatch(..))));
    }
}
