use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::IdxImageSet;

/// 28×28 images of soft blobs whose placement depends on the label, for
/// running the pipeline without the real dataset.
pub fn synthetic_dataset(count: usize, seed: u64) -> IdxImageSet {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (rows, cols) = (28, 28);
    let mut images = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let label: u8 = rng.random_range(0..10);
        // Class centers on a ring, jittered per image.
        let angle = label as f64 * std::f64::consts::TAU / 10.0;
        let cy = 14.0 + 7.0 * angle.sin() + rng.random_range(-2.0..2.0);
        let cx = 14.0 + 7.0 * angle.cos() + rng.random_range(-2.0..2.0);
        let radius: f64 = rng.random_range(3.0..6.0);
        let mut img = vec![0u8; rows * cols];
        for y in 0..rows {
            for x in 0..cols {
                let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                let v = 255.0 * (-d2 / (2.0 * radius * radius)).exp() + rng.random_range(0.0..20.0);
                img[y * cols + x] = v.clamp(0.0, 255.0) as u8;
            }
        }
        images.push(img);
        labels.push(label);
    }
    IdxImageSet {
        rows,
        cols,
        images,
        labels,
    }
}
