//! Encrypted inference: one ciphertext per tensor element, homomorphic
//! affine layers, and nonlinearities through an explicit decrypt, apply,
//! re-encrypt oracle that stands in for a client round-trip.

mod affine;
mod oracle;
mod pipeline;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::bfv::debug::{decrypt_with_noise, NoisyDecryption};
use crate::bfv::{BfvError, Ciphertext, PublicKey, SecretKey};
use crate::nn::{NnError, QuantTensor, Shape};

pub use affine::{he_affine, he_affine_reference, SparseAffine};
pub use oracle::{ActivationOracle, OracleKind};
pub use pipeline::{run_encrypted_dnn, run_encrypted_snn, EncryptedRun, TraceRecord};

#[derive(Debug, thiserror::Error)]
pub enum HeError {
    #[error(transparent)]
    Bfv(#[from] BfvError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// One ciphertext per scalar element, CHW order.
#[derive(Clone, Debug)]
pub struct EncryptedTensor {
    pub cts: Vec<Ciphertext>,
    pub shape: Shape,
    pub scale: f64,
}

impl EncryptedTensor {
    pub fn len(&self) -> usize {
        self.cts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cts.is_empty()
    }
}

/// Encrypts each element under its own seed. Seeds are drawn from `rng`
/// in element order before the parallel phase, so the result does not
/// depend on the worker count.
pub fn encrypt_values<R: Rng + ?Sized>(
    values: &[i64],
    pk: &PublicKey,
    rng: &mut R,
) -> Result<Vec<Ciphertext>, HeError> {
    let seeds: Vec<[u8; 32]> = values.iter().map(|_| rng.random()).collect();
    values
        .par_iter()
        .zip(seeds)
        .map(|(&v, seed)| Ok(pk.encrypt(v, &mut ChaCha20Rng::from_seed(seed))?))
        .collect()
}

pub fn encrypt_tensor<R: Rng + ?Sized>(
    x: &QuantTensor,
    pk: &PublicKey,
    rng: &mut R,
) -> Result<EncryptedTensor, HeError> {
    if x.data.len() != x.shape.len() {
        return Err(HeError::Shape(format!(
            "{} values for shape {:?}",
            x.data.len(),
            x.shape
        )));
    }
    Ok(EncryptedTensor {
        cts: encrypt_values(&x.data, pk, rng)?,
        shape: x.shape,
        scale: x.scale,
    })
}

pub fn decrypt_tensor(x: &EncryptedTensor, sk: &SecretKey) -> Result<QuantTensor, HeError> {
    Ok(decrypt_tensor_with_noise(x, sk)?.0)
}

pub(crate) fn decrypt_noisy(x: &EncryptedTensor, sk: &SecretKey) -> Result<Vec<NoisyDecryption>, HeError> {
    Ok(x.cts
        .par_iter()
        .map(|ct| decrypt_with_noise(sk, ct))
        .collect::<Result<Vec<_>, _>>()?)
}

/// Decrypts every element and reports the smallest noise budget seen.
pub fn decrypt_tensor_with_noise(x: &EncryptedTensor, sk: &SecretKey) -> Result<(QuantTensor, f64), HeError> {
    let decs = decrypt_noisy(x, sk)?;
    let min_nb = decs.iter().map(|d| d.budget_bits).fold(f64::INFINITY, f64::min);
    Ok((
        QuantTensor {
            data: decs.iter().map(|d| d.value).collect(),
            shape: x.shape,
            scale: x.scale,
        },
        min_nb,
    ))
}
