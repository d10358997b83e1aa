//! Datasets: CIFAR-10 binaries, deterministic subsets, synthetic images and
//! synthetic phase sequences with their CSV form.

mod cifar;
mod phases;
mod synthetic;

pub use cifar::{
    load_cifar10_binary, load_cifar10_dir, CIFAR_RECORD_BYTES, CIFAR_TEST_FILE, CIFAR_TRAIN_FILES,
};
pub use phases::{
    gen_synthetic_phases, load_phase_csv, save_phase_csv, PhaseGenConfig, PhaseSequence,
};
pub use synthetic::{gen_synthetic_images, gen_synthetic_images_with_noise, SYNTHETIC_NOISE};

use crate::error::{Error, Result};
use crate::tensor::{Rng, Tensor};

pub const NUM_CLASSES: usize = 10;
pub const IMAGE_SIDE: usize = 32;
pub const IMAGE_CHANNELS: usize = 3;

/// `N × 3 × 32 × 32` images with pixels in `[0, 1]` and one label per image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageDataset {
    images: Tensor,
    labels: Vec<usize>,
}

impl ImageDataset {
    pub fn new(images: Tensor, labels: Vec<usize>) -> Result<Self> {
        let n = labels.len();
        images.expect_shape(
            &[n, IMAGE_CHANNELS, IMAGE_SIDE, IMAGE_SIDE],
            "image dataset",
        )?;
        if let Some(&label) = labels.iter().find(|&&l| l >= NUM_CLASSES) {
            return Err(Error::LabelOutOfRange {
                label,
                classes: NUM_CLASSES,
            });
        }
        if images.data().iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Domain("image pixels must lie in [0, 1]".into()));
        }
        Ok(ImageDataset { images, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn images(&self) -> &Tensor {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Images and labels at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<ImageDataset> {
        let images = self.images.gather_outer(indices)?;
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Ok(ImageDataset { images, labels })
    }
}

/// Indices chosen by [`subset`], ascending.
pub fn subset_indices(labels: &[usize], n: usize, seed: u64) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::Domain("subset size must be positive".into()));
    }
    if n > labels.len() {
        return Err(Error::Domain(format!(
            "subset of {n} from {} images",
            labels.len()
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = Rng::new(seed);
    for members in &mut by_class {
        rng.shuffle(members);
    }
    let mut take = [n / NUM_CLASSES; NUM_CLASSES];
    for extra in take.iter_mut().take(n % NUM_CLASSES) {
        *extra += 1;
    }
    let mut chosen = Vec::with_capacity(n);
    for (class, (members, &k)) in by_class.iter().zip(&take).enumerate() {
        if members.len() < k {
            return Err(Error::Domain(format!(
                "class {class} has {} images, stratified subset needs {k}",
                members.len()
            )));
        }
        chosen.extend_from_slice(&members[..k]);
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Stratified sample: `⌊n/10⌋` images per class from a seeded shuffle, the
/// remainder taken one each from classes 0, 1, ….
pub fn subset(ds: &ImageDataset, n: usize, seed: u64) -> Result<ImageDataset> {
    let indices = subset_indices(ds.labels(), n, seed)?;
    ds.select(&indices)
}
