use super::{ImageDataset, IMAGE_CHANNELS, IMAGE_SIDE, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::tensor::{Rng, Tensor};

pub const SYNTHETIC_NOISE: f32 = 0.1;

const DARK: f32 = 0.2;
const BRIGHT: f32 = 0.8;

/// Base brightness of pixel `(y, x)` for class `k`: quadrant `q` (0 top-left,
/// 1 top-right, 2 bottom-left, 3 bottom-right) is bright when bit `q` of `k`
/// is set.
fn base_pixel(class: usize, y: usize, x: usize) -> f32 {
    let half = IMAGE_SIDE / 2;
    let q = 2 * usize::from(y >= half) + usize::from(x >= half);
    if class >> q & 1 == 1 {
        BRIGHT
    } else {
        DARK
    }
}

pub fn gen_synthetic_images(n: usize, seed: u64) -> Result<ImageDataset> {
    gen_synthetic_images_with_noise(n, SYNTHETIC_NOISE, seed)
}

/// Image `i` has class `i mod 10`: its quadrant code plus uniform noise in
/// `[−noise, noise]`, clamped to `[0, 1]`.
pub fn gen_synthetic_images_with_noise(n: usize, noise: f32, seed: u64) -> Result<ImageDataset> {
    if n == 0 {
        return Err(Error::Domain(
            "synthetic dataset needs at least one image".into(),
        ));
    }
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::Domain(format!(
            "noise amplitude {noise} outside [0, 1]"
        )));
    }
    let mut rng = Rng::new(seed);
    let plane = IMAGE_SIDE * IMAGE_SIDE;
    let mut pixels = Vec::with_capacity(n * IMAGE_CHANNELS * plane);
    let labels: Vec<usize> = (0..n).map(|i| i % NUM_CLASSES).collect();
    for &class in &labels {
        for _ in 0..IMAGE_CHANNELS {
            for y in 0..IMAGE_SIDE {
                for x in 0..IMAGE_SIDE {
                    let jitter = if noise > 0.0 {
                        rng.uniform_range(-1.0, 1.0) as f32 * noise
                    } else {
                        0.0
                    };
                    pixels.push((base_pixel(class, y, x) + jitter).clamp(0.0, 1.0));
                }
            }
        }
    }
    let images = Tensor::from_vec(vec![n, IMAGE_CHANNELS, IMAGE_SIDE, IMAGE_SIDE], pixels)?;
    ImageDataset::new(images, labels)
}
