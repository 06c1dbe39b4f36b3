//! Exact arithmetic in the negacyclic ring `Z_q[x]/(x^n + 1)`.
//!
//! Coefficients are always stored as unsigned residues in `[0, q)`; the
//! signed view is only available through [`RingPoly::center_lift`].

pub mod modulus;
pub mod ntt;
mod sample;

use std::fmt;
use std::sync::Arc;

pub use modulus::{is_prime, Modulus, MAX_MODULUS_BITS};
pub use ntt::NttTables;
pub use sample::{sample, SampleKind, ERROR_BOUND, ERROR_STD_DEV};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum RingError {
    #[error("incompatible ring parameters: (n={0}, q={1}) vs (n={2}, q={3})")]
    ParamMismatch(usize, u64, usize, u64),
    #[error("invalid ring parameters: {0}")]
    InvalidParams(String),
    #[error("expected {expected} coefficients, got {got}")]
    Length { expected: usize, got: usize },
}

struct RingContext {
    n: usize,
    modulus: Modulus,
    ntt: Option<NttTables>,
}

/// Ring degree `n` and coefficient modulus `q`, shared by reference.
///
/// Equality compares `(n, q)` only.
#[derive(Clone)]
pub struct RingParams {
    ctx: Arc<RingContext>,
}

pub const MIN_DEGREE: usize = 16;

impl RingParams {
    pub fn new(n: usize, q: u64) -> Result<Self, RingError> {
        if !n.is_power_of_two() || n < MIN_DEGREE {
            return Err(RingError::InvalidParams(format!(
                "degree {n} must be a power of two >= {MIN_DEGREE}"
            )));
        }
        if q < 3 || q.is_multiple_of(2) || q >> MAX_MODULUS_BITS != 0 {
            return Err(RingError::InvalidParams(format!(
                "modulus {q} must be odd, >= 3 and below 2^{MAX_MODULUS_BITS}"
            )));
        }
        Ok(Self::new_unchecked(n, q))
    }

    /// Small-degree constructor used by tests that exercise the wraparound
    /// rules on toy rings (e.g. `n = 4`). No NTT is attached.
    pub fn toy(n: usize, q: u64) -> Result<Self, RingError> {
        if !n.is_power_of_two() || q < 2 || q >> MAX_MODULUS_BITS != 0 {
            return Err(RingError::InvalidParams(format!("bad toy ring n={n} q={q}")));
        }
        Ok(Self {
            ctx: Arc::new(RingContext {
                n,
                modulus: Modulus::new(q),
                ntt: None,
            }),
        })
    }

    fn new_unchecked(n: usize, q: u64) -> Self {
        Self {
            ctx: Arc::new(RingContext {
                n,
                modulus: Modulus::new(q),
                ntt: NttTables::new(n, q),
            }),
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.ctx.n
    }

    #[inline]
    pub fn q(&self) -> u64 {
        self.ctx.modulus.value()
    }

    #[inline]
    pub fn modulus(&self) -> &Modulus {
        &self.ctx.modulus
    }

    /// Present when `q` is a prime `≡ 1 (mod 2n)`.
    pub fn ntt(&self) -> Option<&NttTables> {
        self.ctx.ntt.as_ref()
    }

    /// Same parameters, but forced onto the schoolbook multiplier.
    pub fn without_ntt(&self) -> Self {
        Self {
            ctx: Arc::new(RingContext {
                n: self.n(),
                modulus: self.ctx.modulus,
                ntt: None,
            }),
        }
    }

    pub fn check_compatible(&self, other: &RingParams) -> Result<(), RingError> {
        if self == other {
            Ok(())
        } else {
            Err(RingError::ParamMismatch(self.n(), self.q(), other.n(), other.q()))
        }
    }
}

impl PartialEq for RingParams {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.ctx, &other.ctx) || (self.n() == other.n() && self.q() == other.q())
    }
}

impl Eq for RingParams {}

impl fmt::Debug for RingParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RingParams")
            .field("n", &self.n())
            .field("q", &self.q())
            .field("ntt", &self.ntt().is_some())
            .finish()
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct RingPoly {
    coeffs: Vec<u64>,
    params: RingParams,
}

impl fmt::Debug for RingPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shown = self.coeffs.len().min(8);
        write!(
            f,
            "RingPoly(n={}, q={}, {:?}",
            self.params.n(),
            self.params.q(),
            &self.coeffs[..shown]
        )?;
        if shown < self.coeffs.len() {
            write!(f, "...")?;
        }
        write!(f, ")")
    }
}

impl RingPoly {
    pub fn zero(params: &RingParams) -> Self {
        Self {
            coeffs: vec![0; params.n()],
            params: params.clone(),
        }
    }

    /// The constant polynomial `value mod q`.
    pub fn constant(params: &RingParams, value: i64) -> Self {
        let mut p = Self::zero(params);
        p.coeffs[0] = params.modulus().reduce_i64(value);
        p
    }

    /// Builds a polynomial from residues; each is reduced mod q.
    pub fn from_coeffs(params: &RingParams, coeffs: Vec<u64>) -> Result<Self, RingError> {
        if coeffs.len() != params.n() {
            return Err(RingError::Length {
                expected: params.n(),
                got: coeffs.len(),
            });
        }
        let q = params.q();
        let coeffs = coeffs.into_iter().map(|c| c % q).collect();
        Ok(Self {
            coeffs,
            params: params.clone(),
        })
    }

    /// Builds a polynomial from signed values, storing negatives as `q - |v|`.
    pub fn from_signed(params: &RingParams, values: &[i64]) -> Result<Self, RingError> {
        if values.len() != params.n() {
            return Err(RingError::Length {
                expected: params.n(),
                got: values.len(),
            });
        }
        let m = params.modulus();
        Ok(Self {
            coeffs: values.iter().map(|&v| m.reduce_i64(v)).collect(),
            params: params.clone(),
        })
    }

    pub(crate) fn from_raw(params: &RingParams, coeffs: Vec<u64>) -> Self {
        debug_assert_eq!(coeffs.len(), params.n());
        debug_assert!(coeffs.iter().all(|&c| c < params.q()));
        Self {
            coeffs,
            params: params.clone(),
        }
    }

    #[inline]
    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [u64] {
        &mut self.coeffs
    }

    #[inline]
    pub fn params(&self) -> &RingParams {
        &self.params
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    /// True when every coefficient above degree 0 vanishes.
    pub fn is_constant(&self) -> bool {
        self.coeffs[1..].iter().all(|&c| c == 0)
    }

    /// Each coefficient mapped to its representative in `[-q/2, q/2)`.
    pub fn center_lift(&self) -> Vec<i64> {
        let m = self.params.modulus();
        self.coeffs.iter().map(|&c| m.center(c)).collect()
    }

    pub fn add(&self, other: &RingPoly) -> Result<RingPoly, RingError> {
        self.params.check_compatible(&other.params)?;
        let m = self.params.modulus();
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| m.add(a, b))
            .collect();
        Ok(Self::from_raw(&self.params, coeffs))
    }

    pub fn add_assign(&mut self, other: &RingPoly) -> Result<(), RingError> {
        self.params.check_compatible(&other.params)?;
        let m = *self.params.modulus();
        for (a, &b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a = m.add(*a, b);
        }
        Ok(())
    }

    pub fn sub(&self, other: &RingPoly) -> Result<RingPoly, RingError> {
        self.params.check_compatible(&other.params)?;
        let m = self.params.modulus();
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| m.sub(a, b))
            .collect();
        Ok(Self::from_raw(&self.params, coeffs))
    }

    pub fn neg(&self) -> RingPoly {
        let m = self.params.modulus();
        Self::from_raw(&self.params, self.coeffs.iter().map(|&a| m.neg(a)).collect())
    }

    /// Multiplies every coefficient by a residue `s < q`.
    pub fn scalar_mul(&self, s: u64) -> RingPoly {
        let m = self.params.modulus();
        debug_assert!(s < m.value());
        let ss = m.shoup(s);
        Self::from_raw(
            &self.params,
            self.coeffs.iter().map(|&a| m.mul_shoup(a, s, ss)).collect(),
        )
    }

    /// Product modulo `x^n + 1` and `q`.
    ///
    /// Constant operands take a scalar path and NTT-friendly moduli take the
    /// transform path; both agree bit-for-bit with [`Self::mul_schoolbook`].
    pub fn negacyclic_mul(&self, other: &RingPoly) -> Result<RingPoly, RingError> {
        self.params.check_compatible(&other.params)?;
        if other.is_constant() {
            return Ok(self.scalar_mul(other.coeffs[0]));
        }
        if self.is_constant() {
            return Ok(other.scalar_mul(self.coeffs[0]));
        }
        match self.params.ntt() {
            Some(ntt) => {
                let mut a = self.coeffs.clone();
                let mut b = other.coeffs.clone();
                ntt.forward(&mut a);
                ntt.forward(&mut b);
                ntt.pointwise_mul(&mut a, &b);
                ntt.inverse(&mut a);
                Ok(Self::from_raw(&self.params, a))
            }
            None => self.mul_schoolbook(other),
        }
    }

    /// Reference O(n²) negacyclic product.
    pub fn mul_schoolbook(&self, other: &RingPoly) -> Result<RingPoly, RingError> {
        self.params.check_compatible(&other.params)?;
        let n = self.params.n();
        let m = self.params.modulus();
        let q = m.value() as u128;
        // Accumulate positive and wrapped (negated) contributions separately,
        // folding into [0, q) before the u128 could overflow.
        let mut pos = vec![0u128; n];
        let mut negs = vec![0u128; n];
        let fold_every = {
            let term_bits = 2 * (64 - m.value().leading_zeros());
            1usize << (127 - term_bits).min(30)
        };
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                let prod = a as u128 * b as u128;
                let k = i + j;
                if k < n {
                    pos[k] += prod;
                } else {
                    negs[k - n] += prod;
                }
            }
            if (i + 1) % fold_every == 0 {
                for v in pos.iter_mut().chain(negs.iter_mut()) {
                    *v %= q;
                }
            }
        }
        let coeffs = pos
            .into_iter()
            .zip(negs)
            .map(|(p, ng)| m.sub((p % q) as u64, (ng % q) as u64))
            .collect();
        Ok(Self::from_raw(&self.params, coeffs))
    }
}
