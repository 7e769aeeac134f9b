//! Procedural datasets for tests, demos and the scaled-down experiments.
//!
//! Two families: colored blobs on noise (two classes, trivially separable
//! by a small network) and masked shapes on striped textures whose
//! background is only correlated with the class.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::compose::MaskedExample;
use crate::dataset::CategoryLabel;
use crate::imaging::{Mask, RawImage};
use crate::seed::{rng_from, stream, Rng};

const BLOB_COLORS: [[f64; 3]; 2] = [[210.0, 70.0, 60.0], [60.0, 80.0, 210.0]];

/// Shapes used as foregrounds of the toy set, one per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Disk,
    Square,
    Triangle,
    Cross,
    Ring,
}

impl Shape {
    pub const ALL: [Shape; 5] = [Shape::Disk, Shape::Square, Shape::Triangle, Shape::Cross, Shape::Ring];

    /// Whether the offset `(dx, dy)` from the center lies inside a shape of half-extent `s`.
    pub fn contains(self, dx: f64, dy: f64, s: f64) -> bool {
        match self {
            Shape::Disk => dx * dx + dy * dy <= s * s,
            Shape::Square => dx.abs() <= s * 0.85 && dy.abs() <= s * 0.85,
            Shape::Triangle => dy <= s * 0.8 && dy >= -s && dx.abs() <= (dy + s) * 0.55,
            Shape::Cross => (dx.abs() <= s * 0.3 && dy.abs() <= s) || (dy.abs() <= s * 0.3 && dx.abs() <= s),
            Shape::Ring => {
                let r2 = dx * dx + dy * dy;
                r2 <= s * s && r2 >= (s * 0.55) * (s * 0.55)
            }
        }
    }
}

// Stripe palettes for the toy backgrounds, indexed by class.
const TEXTURES: [([f64; 3], [f64; 3], f64); 5] = [
    ([40.0, 110.0, 40.0], [90.0, 170.0, 80.0], 0.0),
    ([150.0, 150.0, 170.0], [200.0, 210.0, 230.0], 36.0),
    ([120.0, 80.0, 40.0], [170.0, 130.0, 80.0], 72.0),
    ([30.0, 60.0, 140.0], [80.0, 130.0, 200.0], 108.0),
    ([160.0, 140.0, 60.0], [220.0, 200.0, 120.0], 144.0),
];

const FG_COLOR: [f64; 3] = [230.0, 40.0, 40.0];

fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn noisy(rng: &mut Rng, noise: &Normal<f64>, rgb: [f64; 3]) -> [u8; 3] {
    let n = noise.sample(rng);
    [clamp_u8(rgb[0] + n), clamp_u8(rgb[1] + n), clamp_u8(rgb[2] + n)]
}

/// `count` square images of side `side`, alternating between two classes:
/// a reddish disk or a bluish disk at a random position on gray noise.
pub fn blob_images(count: usize, side: usize, seed: u64) -> Vec<(RawImage, CategoryLabel)> {
    assert!(side >= 8, "blob images need side >= 8");
    let mut rng = rng_from(&[stream::SYNTH, seed, 0]);
    let noise = Normal::new(0.0, 12.0).unwrap();
    (0..count)
        .map(|i| {
            let class = i % 2;
            let r = rng.random_range(2.5..(side as f64 / 4.0).max(3.0));
            let cx = rng.random_range(r..side as f64 - r);
            let cy = rng.random_range(r..side as f64 - r);
            let gray = rng.random_range(80.0..140.0);
            let img = RawImage::from_fn(side, side, |x, y| {
                let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                if dx * dx + dy * dy <= r * r {
                    noisy(&mut rng, &noise, BLOB_COLORS[class])
                } else {
                    noisy(&mut rng, &noise, [gray; 3])
                }
            })
            .unwrap();
            (img, CategoryLabel::new(class as u8).unwrap())
        })
        .collect()
}

/// Parameters of the shapes-on-textures toy set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyConfig {
    pub classes: usize,
    pub per_class: usize,
    pub side: usize,
    /// Probability that a background uses the texture of its own class.
    pub bg_correlation: f64,
    pub noise_sigma: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig { classes: 5, per_class: 10, side: 32, bg_correlation: 0.7, noise_sigma: 14.0 }
    }
}

fn texture(rng: &mut Rng, class: usize, side: usize, noise: &Normal<f64>) -> RawImage {
    let (a, b, angle) = TEXTURES[class];
    let theta = angle.to_radians();
    let (c, s) = (theta.cos(), theta.sin());
    let period = rng.random_range(5.0..8.0);
    let phase = rng.random_range(0.0..period);
    RawImage::from_fn(side, side, |x, y| {
        let t = (x as f64 * c + y as f64 * s + phase).rem_euclid(period) / period;
        noisy(rng, noise, if t < 0.5 { a } else { b })
    })
    .unwrap()
}

/// Generates the masked toy set: `per_class` examples for each of the
/// first `classes` shapes, ids `toy-<class>-<index>`, class-major order.
pub fn toy_masked_set(config: &ToyConfig, seed: u64) -> Vec<MaskedExample> {
    assert!((1..=Shape::ALL.len()).contains(&config.classes), "toy set supports 1..=5 classes");
    assert!(config.side >= 24, "toy images need side >= 24");
    let mut rng = rng_from(&[stream::SYNTH, seed, 1]);
    let noise = Normal::new(0.0, config.noise_sigma.max(0.0)).unwrap();
    let side = config.side as f64;
    let mut out = Vec::with_capacity(config.classes * config.per_class);
    for class in 0..config.classes {
        for i in 0..config.per_class {
            let bg_class = if config.classes > 1 && rng.random::<f64>() >= config.bg_correlation {
                let other = rng.random_range(0..config.classes - 1);
                if other >= class { other + 1 } else { other }
            } else {
                class
            };
            let mut image = texture(&mut rng, bg_class, config.side, &noise);
            let s = rng.random_range(side / 4.0..side / 3.0);
            let cx = rng.random_range(s + 1.0..side - s - 1.0);
            let cy = rng.random_range(s + 1.0..side - s - 1.0);
            let shape = Shape::ALL[class];
            let mask = Mask::from_fn(config.side, config.side, |x, y| {
                shape.contains(x as f64 + 0.5 - cx, y as f64 + 0.5 - cy, s)
            })
            .unwrap();
            for y in 0..config.side {
                for x in 0..config.side {
                    if mask.get(x, y) {
                        image.set_pixel(x, y, noisy(&mut rng, &noise, FG_COLOR));
                    }
                }
            }
            out.push(MaskedExample {
                id: format!("toy-{class}-{i:03}"),
                image,
                mask,
                label: CategoryLabel::new(class as u8).unwrap(),
            });
        }
    }
    out
}

/// Small demo set: two categories, two masked examples each.
pub fn demo_set(seed: u64) -> Vec<MaskedExample> {
    toy_masked_set(&ToyConfig { classes: 2, per_class: 2, ..ToyConfig::default() }, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_are_deterministic_and_alternate() {
        let a = blob_images(10, 16, 3);
        let b = blob_images(10, 16, 3);
        assert_eq!(a, b);
        assert_ne!(a, blob_images(10, 16, 4));
        for (i, (img, label)) in a.iter().enumerate() {
            assert_eq!(img.dims(), (16, 16));
            assert_eq!(label.index(), i % 2);
        }
    }

    #[test]
    fn toy_examples_are_valid() {
        let set = toy_masked_set(&ToyConfig::default(), 9);
        assert_eq!(set.len(), 50);
        for ex in &set {
            ex.validate().unwrap();
            assert!(ex.mask.count() > 20);
        }
        assert_eq!(set[0].id, "toy-0-000");
        assert_eq!(set[49].label.index(), 4);
    }

    #[test]
    fn toy_set_is_deterministic() {
        assert_eq!(demo_set(1), demo_set(1));
        assert_ne!(demo_set(1), demo_set(2));
        assert_eq!(demo_set(1).len(), 4);
    }

    #[test]
    fn shapes_differ() {
        let masks: Vec<Mask> = Shape::ALL
            .iter()
            .map(|&sh| Mask::from_fn(32, 32, |x, y| sh.contains(x as f64 - 15.5, y as f64 - 15.5, 8.0)).unwrap())
            .collect();
        for i in 0..masks.len() {
            for j in i + 1..masks.len() {
                assert_ne!(masks[i], masks[j]);
            }
        }
    }
}
