//! BFV scheme over a single coefficient modulus, without relinearization.
//!
//! Plaintexts are scalars mod `t`, encoded as constant polynomials and held
//! in centered form `[-t/2, t/2)`. Ciphertext-ciphertext products grow the
//! number of parts by one per multiplication.

mod cipher;
pub mod debug;
mod keys;
mod select;
pub mod serialize;

use std::fmt;

use crate::ring::{RingError, RingParams};

pub use cipher::Ciphertext;
pub use keys::{keygen, KeyPair, PublicKey, SecretKey};
pub use select::{security_bound_bits, select_q, SUPPORTED_DEGREES};

#[derive(Debug, thiserror::Error)]
pub enum BfvError {
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error("incompatible BFV parameters: {0} vs {1}")]
    ParamMismatch(String, String),
    #[error("plaintext {value} outside the centered range of t = {t}")]
    PlaintextOutOfRange { value: i64, t: u64 },
    #[error("invalid BFV parameters: {0}")]
    InvalidParams(String),
    #[error("unsupported ring degree {0} for modulus selection (expected 1024, 2048 or 4096)")]
    UnsupportedDegree(usize),
    #[error("unsupported security level {0} bits (expected 128, 192 or 256)")]
    UnsupportedSecurity(u32),
    #[error("malformed serialized object: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Ring parameters plus the plaintext modulus `t`.
#[derive(Clone, PartialEq, Eq)]
pub struct BfvParams {
    ring: RingParams,
    t: u64,
}

impl BfvParams {
    pub fn new(ring: RingParams, t: u64) -> Result<Self, BfvError> {
        if t < 2 {
            return Err(BfvError::InvalidParams(format!("t = {t} must be at least 2")));
        }
        if t >= ring.q() {
            return Err(BfvError::InvalidParams(format!(
                "t = {t} must be below q = {}",
                ring.q()
            )));
        }
        Ok(Self { ring, t })
    }

    /// Convenience constructor: ring of degree `n` with modulus `q`.
    pub fn with_modulus(n: usize, q: u64, t: u64) -> Result<Self, BfvError> {
        Self::new(RingParams::new(n, q)?, t)
    }

    /// Ring of degree `n` with `q` from [`select_q`] at the given security level.
    pub fn standard(n: usize, t: u64, security_bits: u32) -> Result<Self, BfvError> {
        Self::with_modulus(n, select_q(n, security_bits)?, t)
    }

    #[inline]
    pub fn ring(&self) -> &RingParams {
        &self.ring
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.ring.n()
    }

    #[inline]
    pub fn q(&self) -> u64 {
        self.ring.q()
    }

    #[inline]
    pub fn t(&self) -> u64 {
        self.t
    }

    /// `floor(q / t)`.
    pub fn delta(&self) -> u64 {
        self.q() / self.t
    }

    pub fn check_compatible(&self, other: &BfvParams) -> Result<(), BfvError> {
        if self == other {
            Ok(())
        } else {
            Err(BfvError::ParamMismatch(format!("{self:?}"), format!("{other:?}")))
        }
    }

    /// `round(q * m / t) mod q`, the scaled encoding of a centered plaintext.
    pub(crate) fn scale_plaintext(&self, m: i64) -> u64 {
        let (q, t) = (self.q() as i128, self.t as i128);
        let scaled = (2 * q * m as i128 + t).div_euclid(2 * t);
        self.ring.modulus().reduce_i128(scaled)
    }

    /// Validates that `m` lies in `[-t/2, t/2)`.
    pub fn check_plaintext(&self, m: i64) -> Result<PlainScalar, BfvError> {
        PlainScalar::new(m, self.t)
    }
}

impl fmt::Debug for BfvParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BfvParams(n={}, q={}, t={})", self.n(), self.q(), self.t)
    }
}

/// A plaintext scalar in canonical centered form `[-t/2, t/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PlainScalar(i64);

impl PlainScalar {
    pub fn new(value: i64, t: u64) -> Result<Self, BfvError> {
        let (lo, hi) = centered_bounds(t);
        if value < lo || value > hi {
            return Err(BfvError::PlaintextOutOfRange { value, t });
        }
        Ok(Self(value))
    }

    /// The canonical representative of `value mod t`.
    pub fn reduce(value: i128, t: u64) -> Self {
        Self(center_mod(value, t))
    }

    #[inline]
    pub fn value(self) -> i64 {
        self.0
    }
}

/// Inclusive bounds of the centered residue range `[-t/2, t/2)`.
pub fn centered_bounds(t: u64) -> (i64, i64) {
    let lo = -((t / 2) as i64);
    (lo, lo + t as i64 - 1)
}

/// `value mod t`, mapped into `[-t/2, t/2)`.
pub fn center_mod(value: i128, t: u64) -> i64 {
    let r = value.rem_euclid(t as i128) as u64;
    if r >= t - t / 2 {
        r as i64 - t as i64
    } else {
        r as i64
    }
}
