//! Secret-key introspection of ciphertext noise. A real evaluator cannot
//! call anything in here; the experiment harness plays both roles.
//!
//! Messages are always constant polynomials, so coefficients `1..n` of
//! `c(s)` carry pure noise and act as witnesses: a wrap in coefficient 0
//! would be invisible on its own, but its exchangeable siblings expose the
//! noise magnitude.

use super::{BfvError, Ciphertext, SecretKey};
use crate::ring::RingPoly;

/// Decryption plus the measured scaled noise `max |t·c(s) − q·round(...)|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoisyDecryption {
    pub value: i64,
    /// Largest scaled noise magnitude over all coefficients.
    pub max_noise: u128,
    /// `log2(q / (2·max_noise))`, clamped at 0.
    pub budget_bits: f64,
}

pub fn decrypt_with_noise(sk: &SecretKey, ct: &Ciphertext) -> Result<NoisyDecryption, BfvError> {
    let x = sk.evaluate(ct)?;
    let params = sk.params();
    let (q, t) = (params.q() as i128, params.t() as i128);
    let x0 = x.coeffs()[0];
    let (value, raw) = sk.decode(x0);
    let d0 = (t * x0 as i128 - q * raw as i128).unsigned_abs();
    let witness = x.center_lift()[1..]
        .iter()
        .map(|&c| (t * c as i128).unsigned_abs())
        .max()
        .unwrap_or(0);
    let max_noise = d0.max(witness);
    Ok(NoisyDecryption {
        value,
        max_noise,
        budget_bits: budget_from_noise(params.q(), max_noise),
    })
}

pub fn noise_budget(sk: &SecretKey, ct: &Ciphertext) -> Result<f64, BfvError> {
    Ok(decrypt_with_noise(sk, ct)?.budget_bits)
}

fn budget_from_noise(q: u64, max_noise: u128) -> f64 {
    let noise = max_noise.max(1) as f64;
    (q as f64 / (2.0 * noise)).log2().max(0.0)
}

/// Adds `e` to the first ciphertext part; used to construct noise-exhausted
/// ciphertexts in tests.
pub fn inject_noise(ct: &Ciphertext, e: &RingPoly) -> Result<Ciphertext, BfvError> {
    let mut out = ct.clone();
    out.parts_mut()[0].add_assign(e)?;
    Ok(out)
}
