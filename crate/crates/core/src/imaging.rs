//! Pixel containers, PNG I/O and the per-image preprocessing fed to the
//! trainer.

use std::io::Cursor;

use image::{ColorType, ImageEncoder, ImageFormat};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ImagingError {
    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("pixel buffer has {actual} bytes, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
    #[error("mask value {0} is not binary")]
    NonBinaryMask(u8),
    #[error("selected region is empty")]
    EmptyRegion,
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("malformed PNG stream: {0}")]
    MalformedStream(String),
    #[error("wrong color type {found}, expected {expected}")]
    WrongColorType { expected: &'static str, found: String },
}

pub type Result<T> = std::result::Result<T, ImagingError>;

/// Rounds to the nearest integer with ties going up, clamped to `u8`.
#[inline]
pub fn round_half_up(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// 8-bit RGB image, row-major, channels interleaved.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RawImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for RawImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "RawImage({}x{})", self.width, self.height)
    }
}

impl RawImage {
    pub const CHANNELS: usize = 3;

    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ImagingError::InvalidDimensions { width, height });
        }
        let expected = width * height * Self::CHANNELS;
        if data.len() != expected {
            return Err(ImagingError::BufferSize { expected, actual: data.len() });
        }
        Ok(Self { width, height, data })
    }

    /// Uniform image of one color.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::new(width, height, data)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn same_dims<T: Dimensions>(&self, other: &T) -> Result<()> {
        let (w, h) = other.dims();
        if (w, h) != (self.width, self.height) {
            return Err(ImagingError::DimensionMismatch(self.width, self.height, w, h));
        }
        Ok(())
    }
}

pub trait Dimensions {
    fn dims(&self) -> (usize, usize);
}

impl Dimensions for RawImage {
    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

impl Dimensions for Mask {
    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

/// Binary mask, 1 = foreground.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for Mask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Mask({}x{}, {} set)", self.width, self.height, self.count())
    }
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ImagingError::InvalidDimensions { width, height });
        }
        if data.len() != width * height {
            return Err(ImagingError::BufferSize { expected: width * height, actual: data.len() });
        }
        if let Some(&v) = data.iter().find(|&&v| v > 1) {
            return Err(ImagingError::NonBinaryMask(v));
        }
        Ok(Self { width, height, data })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0; width * height])
    }

    pub fn full(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![1; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y) as u8);
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] != 0
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.data[y * self.width + x] = on as u8;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn is_full(&self) -> bool {
        self.count() == self.data.len()
    }

    pub fn inverted(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| 1 - v).collect(),
        }
    }

    /// Inclusive bounding box `(x0, y0, x1, y1)` of the set pixels.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    bb = Some(match bb {
                        None => (x, y, x, y),
                        Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                    });
                }
            }
        }
        bb
    }
}

/// Floating-point image, row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl FloatImage {
    /// Values re-ordered channel-major (`c, y, x`), the layout the trainer uses.
    pub fn to_planar(&self) -> Vec<f64> {
        let plane = self.width * self.height;
        let mut out = vec![0.0; self.data.len()];
        for p in 0..plane {
            for c in 0..self.channels {
                out[c * plane + p] = self.data[p * self.channels + c];
            }
        }
        out
    }
}

/// Global contrast normalization: scale to `[0,1]`, then standardize over
/// all pixels and channels jointly using the population standard deviation.
pub fn gcn(img: &RawImage) -> FloatImage {
    // Centering in integers keeps constant images at exactly zero.
    let n = img.data.len() as i64;
    let sum: i64 = img.data.iter().map(|&v| v as i64).sum();
    let scale = (n * 255) as f64;
    let centered: Vec<f64> = img.data.iter().map(|&v| (v as i64 * n - sum) as f64 / scale).collect();
    let var = centered.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let denom = var.sqrt().max(1e-8);
    FloatImage {
        width: img.width,
        height: img.height,
        channels: RawImage::CHANNELS,
        data: centered.iter().map(|v| v / denom).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Foreground,
    Background,
}

/// Per-channel mean of the selected side of `region`, rounded half-up.
pub fn mean_color(img: &RawImage, region: &Mask, select: Region) -> Result<[u8; 3]> {
    img.same_dims(region)?;
    let want = matches!(select, Region::Foreground);
    let mut sums = [0u64; 3];
    let mut n = 0u64;
    for (i, &m) in region.data.iter().enumerate() {
        if (m != 0) == want {
            for c in 0..3 {
                sums[c] += img.data[i * 3 + c] as u64;
            }
            n += 1;
        }
    }
    if n == 0 {
        return Err(ImagingError::EmptyRegion);
    }
    // floor(sum / n + 1/2) in exact integer arithmetic
    Ok(sums.map(|s| ((2 * s + n) / (2 * n)) as u8))
}

fn decode_png(bytes: &[u8]) -> Result<image::DynamicImage> {
    image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| ImagingError::MalformedStream(e.to_string()))
}

fn encode_png(width: usize, height: usize, data: &[u8], color: image::ExtendedColorType) -> Vec<u8> {
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(Cursor::new(&mut out))
        .write_image(data, width as u32, height as u32, color)
        .expect("in-memory PNG encoding of a validated buffer");
    out
}

pub fn decode_image(bytes: &[u8]) -> Result<RawImage> {
    match decode_png(bytes)? {
        image::DynamicImage::ImageRgb8(buf) => {
            let (w, h) = buf.dimensions();
            RawImage::new(w as usize, h as usize, buf.into_raw())
        }
        other => Err(ImagingError::WrongColorType {
            expected: "8-bit RGB",
            found: format!("{:?}", other.color()),
        }),
    }
}

pub fn encode_image(img: &RawImage) -> Vec<u8> {
    encode_png(img.width, img.height, &img.data, image::ExtendedColorType::Rgb8)
}

/// Decodes an 8-bit grayscale PNG; any nonzero value is foreground.
pub fn decode_mask(bytes: &[u8]) -> Result<Mask> {
    let dynimg = decode_png(bytes)?;
    if dynimg.color() != ColorType::L8 {
        return Err(ImagingError::WrongColorType {
            expected: "8-bit grayscale",
            found: format!("{:?}", dynimg.color()),
        });
    }
    let buf = dynimg.into_luma8();
    let (w, h) = buf.dimensions();
    let data = buf.into_raw().into_iter().map(|v| (v != 0) as u8).collect();
    Mask::new(w as usize, h as usize, data)
}

/// Encodes a mask as grayscale with foreground at 255.
pub fn encode_mask(mask: &Mask) -> Vec<u8> {
    let data: Vec<u8> = mask.data.iter().map(|&v| v * 255).collect();
    encode_png(mask.width, mask.height, &data, image::ExtendedColorType::L8)
}

pub fn read_image(path: &std::path::Path) -> std::io::Result<RawImage> {
    let bytes = std::fs::read(path)?;
    decode_image(&bytes).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))
}

pub fn read_mask(path: &std::path::Path) -> std::io::Result<Mask> {
    let bytes = std::fs::read(path)?;
    decode_mask(&bytes).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FIXED_4X4: [u8; 48] = [
        61, 173, 23, 54, 81, 79, 232, 204, 234, 254, 20, 36, 222, 20, 42, 46, 233, 92, 67, 43, 117, 150, 204, 157, 252,
        26, 124, 144, 176, 1, 51, 119, 16, 249, 164, 204, 131, 152, 88, 83, 33, 52, 196, 113, 211, 71, 184, 223,
    ];

    fn pop_stats(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let mut mean = 0.0;
        for x in v {
            mean += x;
        }
        mean /= n;
        let mut var = 0.0;
        for x in v {
            var += (x - mean) * (x - mean);
        }
        (mean, (var / n).sqrt())
    }

    #[test]
    fn gcn_constant_image_is_zero() {
        let img = RawImage::filled(5, 3, [77, 77, 77]).unwrap();
        assert!(gcn(&img).data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gcn_two_values_map_to_unit() {
        // 1x2 single-channel case realized as two gray pixels: every channel
        // sees {0, 255}, so the joint statistics are identical.
        let img = RawImage::new(2, 1, vec![0, 0, 0, 255, 255, 255]).unwrap();
        let out = gcn(&img);
        assert_eq!(out.data, vec![-1.0, -1.0, -1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn gcn_matches_scalar_reference() {
        // Reference values computed with an independent float64 implementation.
        let img = RawImage::new(4, 4, FIXED_4X4.to_vec()).unwrap();
        let out = gcn(&img);
        assert!((out.data[0] - -0.803589111626444).abs() < 1e-12);
        assert!((out.data[1] - 0.6465938571898578).abs() < 1e-12);
        assert!((out.data[47] - 1.293996968268564).abs() < 1e-12);
    }

    #[test]
    fn mean_color_rounds_half_up() {
        let img = RawImage::new(2, 1, vec![0, 0, 0, 255, 255, 255]).unwrap();
        let mask = Mask::empty(2, 1).unwrap();
        assert_eq!(mean_color(&img, &mask, Region::Background).unwrap(), [128, 128, 128]);
    }

    #[test]
    fn mean_color_uniform() {
        let img = RawImage::filled(4, 4, [0, 0, 255]).unwrap();
        let mask = Mask::from_fn(4, 4, |x, _| x < 2).unwrap();
        assert_eq!(mean_color(&img, &mask, Region::Foreground).unwrap(), [0, 0, 255]);
        assert_eq!(mean_color(&img, &mask, Region::Background).unwrap(), [0, 0, 255]);
    }

    #[test]
    fn mean_color_matches_accumulation() {
        let img = RawImage::new(4, 4, FIXED_4X4.to_vec()).unwrap();
        let mask = Mask::from_fn(4, 4, |x, y| x + y < 3).unwrap();
        let mut expect = [0u8; 3];
        for c in 0..3 {
            let mut sum = 0.0;
            let mut n = 0.0;
            for y in 0..4 {
                for x in 0..4 {
                    if x + y >= 3 {
                        sum += img.pixel(x, y)[c] as f64;
                        n += 1.0;
                    }
                }
            }
            expect[c] = (sum / n + 0.5).floor() as u8;
        }
        assert_eq!(mean_color(&img, &mask, Region::Background).unwrap(), expect);
    }

    #[test]
    fn mean_color_empty_region() {
        let img = RawImage::filled(2, 2, [1, 2, 3]).unwrap();
        let mask = Mask::full(2, 2).unwrap();
        assert_eq!(mean_color(&img, &mask, Region::Background), Err(ImagingError::EmptyRegion));
    }

    #[test]
    fn png_round_trip() {
        let img = RawImage::new(2, 2, (0..12).map(|v| v * 20).collect()).unwrap();
        assert_eq!(decode_image(&encode_image(&img)).unwrap(), img);
    }

    #[test]
    fn grayscale_png_thresholds_to_mask() {
        let bytes = encode_png(2, 1, &[0, 255], image::ExtendedColorType::L8);
        let mask = decode_mask(&bytes).unwrap();
        assert_eq!(mask.data(), &[0, 1]);
        let bytes = encode_png(3, 1, &[0, 7, 200], image::ExtendedColorType::L8);
        assert_eq!(decode_mask(&bytes).unwrap().data(), &[0, 1, 1]);
    }

    #[test]
    fn truncated_stream_is_malformed() {
        let img = RawImage::filled(8, 8, [9, 9, 9]).unwrap();
        let bytes = encode_image(&img);
        let err = decode_image(&bytes[..bytes.len() / 2]).unwrap_err();
        assert!(matches!(err, ImagingError::MalformedStream(_)));
    }

    #[test]
    fn color_type_is_checked() {
        let img = RawImage::filled(2, 2, [9, 9, 9]).unwrap();
        assert!(matches!(decode_mask(&encode_image(&img)), Err(ImagingError::WrongColorType { .. })));
        let mask = Mask::full(2, 2).unwrap();
        assert!(matches!(decode_image(&encode_mask(&mask)), Err(ImagingError::WrongColorType { .. })));
    }

    #[test]
    fn rejects_bad_buffers() {
        assert!(RawImage::new(0, 1, vec![]).is_err());
        assert!(RawImage::new(2, 2, vec![0; 11]).is_err());
        assert_eq!(Mask::new(1, 1, vec![2]), Err(ImagingError::NonBinaryMask(2)));
    }

    fn arb_image() -> impl Strategy<Value = RawImage> {
        (1usize..6, 1usize..6).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<u8>(), w * h * 3).prop_map(move |d| RawImage::new(w, h, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn gcn_standardizes(img in arb_image()) {
            prop_assume!(img.data().iter().any(|&v| v != img.data()[0]));
            let (mean, std) = pop_stats(&gcn(&img).data);
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((std - 1.0).abs() < 1e-9);
        }

        #[test]
        fn gcn_affine_invariant(img in arb_image(), a in 1u32..3, b in 0u8..40) {
            let mapped = RawImage::new(img.width(), img.height(),
                img.data().iter().map(|&v| ((v / 3) as u32 * a + b as u32) as u8).collect()).unwrap();
            let base = RawImage::new(img.width(), img.height(),
                img.data().iter().map(|&v| v / 3).collect()).unwrap();
            prop_assume!(base.data().iter().any(|&v| v != base.data()[0]));
            for (p, q) in gcn(&mapped).data.iter().zip(gcn(&base).data.iter()) {
                prop_assert!((p - q).abs() < 1e-9);
            }
        }

        #[test]
        fn full_mask_foreground_is_global_mean(img in arb_image()) {
            let full = Mask::full(img.width(), img.height()).unwrap();
            let n = (img.width() * img.height()) as f64;
            let got = mean_color(&img, &full, Region::Foreground).unwrap();
            for c in 0..3 {
                let s: f64 = img.data().iter().skip(c).step_by(3).map(|&v| v as f64).sum();
                prop_assert_eq!(got[c], (s / n + 0.5).floor() as u8);
            }
            prop_assert_eq!(mean_color(&img, &full, Region::Background), Err(ImagingError::EmptyRegion));
        }

        #[test]
        fn png_round_trip_is_exact(img in arb_image()) {
            prop_assert_eq!(decode_image(&encode_image(&img)).unwrap(), img);
        }
    }
}
