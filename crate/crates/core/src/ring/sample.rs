use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{RingParams, RingPoly};

/// Standard deviation of the RLWE error distribution.
pub const ERROR_STD_DEV: f64 = 3.2;
/// Error samples are truncated at 6σ, i.e. `|e| <= 19`.
pub const ERROR_BOUND: i64 = 19;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleKind {
    /// Coefficients uniform in `[0, q)`.
    Uniform,
    /// Coefficients uniform in `{-1, 0, 1}`.
    TernarySecret,
    /// Rounded Gaussian with σ = 3.2, rejected outside 6σ.
    Error,
}

pub fn sample<R: Rng + ?Sized>(kind: SampleKind, params: &RingParams, rng: &mut R) -> RingPoly {
    let n = params.n();
    let m = params.modulus();
    let coeffs = match kind {
        SampleKind::Uniform => (0..n).map(|_| rng.random_range(0..m.value())).collect(),
        SampleKind::TernarySecret => (0..n).map(|_| m.reduce_i64(rng.random_range(0..3i64) - 1)).collect(),
        SampleKind::Error => {
            let normal = Normal::new(0.0, ERROR_STD_DEV).expect("valid σ");
            let cutoff = 6.0 * ERROR_STD_DEV;
            (0..n)
                .map(|_| loop {
                    let x: f64 = normal.sample(rng);
                    if x.abs() <= cutoff {
                        break m.reduce_i64(x.round() as i64);
                    }
                })
                .collect()
        }
    };
    RingPoly::from_raw(params, coeffs)
}
