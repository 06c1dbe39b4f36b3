use rand::Rng;

use super::{BfvError, BfvParams, Ciphertext};
use crate::ring::{sample, RingPoly, SampleKind};

/// Ternary secret `s`, with its transform cached when the ring has an NTT.
#[derive(Clone)]
pub struct SecretKey {
    params: BfvParams,
    s: RingPoly,
    s_ntt: Option<Vec<u64>>,
}

/// RLWE public key `(p0, p1) = (-(a·s + e), a)`.
#[derive(Clone)]
pub struct PublicKey {
    params: BfvParams,
    p0: RingPoly,
    p1: RingPoly,
    p0_ntt: Option<Vec<u64>>,
    p1_ntt: Option<Vec<u64>>,
}

#[derive(Clone)]
pub struct KeyPair {
    pub secret: SecretKey,
    pub public: PublicKey,
}

pub fn keygen<R: Rng + ?Sized>(params: &BfvParams, rng: &mut R) -> KeyPair {
    let ring = params.ring();
    let s = sample(SampleKind::TernarySecret, ring, rng);
    let a = sample(SampleKind::Uniform, ring, rng);
    let e = sample(SampleKind::Error, ring, rng);
    let a_s = a.negacyclic_mul(&s).expect("same ring");
    let p0 = a_s.add(&e).expect("same ring").neg();
    KeyPair {
        secret: SecretKey::from_poly(params.clone(), s),
        public: PublicKey::from_polys(params.clone(), p0, a),
    }
}

fn transformed(p: &RingPoly) -> Option<Vec<u64>> {
    p.params().ntt().map(|ntt| {
        let mut v = p.coeffs().to_vec();
        ntt.forward(&mut v);
        v
    })
}

impl SecretKey {
    pub(crate) fn from_poly(params: BfvParams, s: RingPoly) -> Self {
        let s_ntt = transformed(&s);
        Self { params, s, s_ntt }
    }

    pub fn params(&self) -> &BfvParams {
        &self.params
    }

    pub fn poly(&self) -> &RingPoly {
        &self.s
    }

    /// Evaluates `c(s) = Σ parts[i]·s^i` in the ring.
    pub(crate) fn evaluate(&self, ct: &Ciphertext) -> Result<RingPoly, BfvError> {
        self.params.check_compatible(ct.params())?;
        let parts = ct.parts();
        let ring = self.params.ring();
        match (ring.ntt(), &self.s_ntt) {
            (Some(ntt), Some(s_ntt)) => {
                let n = ring.n();
                let m = ring.modulus();
                let mut acc = vec![0u64; n];
                let mut s_pow = s_ntt.clone();
                for (i, part) in parts.iter().enumerate().skip(1) {
                    if i > 1 {
                        ntt.pointwise_mul(&mut s_pow, s_ntt);
                    }
                    let mut c = part.coeffs().to_vec();
                    ntt.forward(&mut c);
                    ntt.pointwise_mul_add(&mut acc, &c, &s_pow);
                }
                ntt.inverse(&mut acc);
                for (a, &c0) in acc.iter_mut().zip(parts[0].coeffs()) {
                    *a = m.add(*a, c0);
                }
                Ok(RingPoly::from_raw(ring, acc))
            }
            _ => {
                let mut acc = parts[0].clone();
                let mut s_pow = self.s.clone();
                for (i, part) in parts.iter().enumerate().skip(1) {
                    if i > 1 {
                        s_pow = s_pow.negacyclic_mul(&self.s)?;
                    }
                    acc.add_assign(&part.negacyclic_mul(&s_pow)?)?;
                }
                Ok(acc)
            }
        }
    }

    /// Decrypts to the centered plaintext. A ciphertext whose noise budget is
    /// exhausted decrypts to garbage rather than an error.
    pub fn decrypt(&self, ct: &Ciphertext) -> Result<i64, BfvError> {
        let x = self.evaluate(ct)?;
        Ok(self.decode(x.coeffs()[0]).0)
    }

    /// Returns the centered plaintext and the unreduced rounding
    /// `round(t·x0/q)` it came from.
    pub(crate) fn decode(&self, x0: u64) -> (i64, u128) {
        let (q, t) = (self.params.q() as u128, self.params.t() as u128);
        let raw = (2 * t * x0 as u128 + q) / (2 * q);
        (super::center_mod(raw as i128, self.params.t()), raw)
    }
}

impl PublicKey {
    pub(crate) fn from_polys(params: BfvParams, p0: RingPoly, p1: RingPoly) -> Self {
        let p0_ntt = transformed(&p0);
        let p1_ntt = transformed(&p1);
        Self {
            params,
            p0,
            p1,
            p0_ntt,
            p1_ntt,
        }
    }

    pub fn params(&self) -> &BfvParams {
        &self.params
    }

    pub fn polys(&self) -> (&RingPoly, &RingPoly) {
        (&self.p0, &self.p1)
    }

    /// Fresh encryption of `m ∈ [-t/2, t/2)`:
    /// `c0 = p0·u + e1 + ⌊q·m/t⌉`, `c1 = p1·u + e2`.
    pub fn encrypt<R: Rng + ?Sized>(&self, m: i64, rng: &mut R) -> Result<Ciphertext, BfvError> {
        self.params.check_plaintext(m)?;
        let ring = self.params.ring();
        let u = sample(SampleKind::TernarySecret, ring, rng);
        let e1 = sample(SampleKind::Error, ring, rng);
        let e2 = sample(SampleKind::Error, ring, rng);
        let (mut c0, mut c1) = match (ring.ntt(), &self.p0_ntt, &self.p1_ntt) {
            (Some(ntt), Some(p0), Some(p1)) => {
                let mut u_hat = u.coeffs().to_vec();
                ntt.forward(&mut u_hat);
                let mut a = p0.clone();
                ntt.pointwise_mul(&mut a, &u_hat);
                ntt.inverse(&mut a);
                let mut b = p1.clone();
                ntt.pointwise_mul(&mut b, &u_hat);
                ntt.inverse(&mut b);
                (RingPoly::from_raw(ring, a), RingPoly::from_raw(ring, b))
            }
            _ => (self.p0.negacyclic_mul(&u)?, self.p1.negacyclic_mul(&u)?),
        };
        c0.add_assign(&e1)?;
        c1.add_assign(&e2)?;
        let md = ring.modulus();
        let c00 = &mut c0.coeffs_mut()[0];
        *c00 = md.add(*c00, self.params.scale_plaintext(m));
        Ok(Ciphertext::from_parts(self.params.clone(), vec![c0, c1], 0))
    }
}
