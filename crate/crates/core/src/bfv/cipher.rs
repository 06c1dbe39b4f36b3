use super::{BfvError, BfvParams};
use crate::ring::{RingParams, RingPoly};

/// A BFV ciphertext with `k >= 2` parts, decrypting as `Σ parts[i]·s^i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ciphertext {
    parts: Vec<RingPoly>,
    params: BfvParams,
    /// Ciphertext-ciphertext multiplications on the longest path.
    mult_depth: u32,
}

impl Ciphertext {
    pub(crate) fn from_parts(params: BfvParams, parts: Vec<RingPoly>, mult_depth: u32) -> Self {
        debug_assert!(parts.len() >= 2);
        debug_assert!(parts.iter().all(|p| p.params() == params.ring()));
        Self {
            parts,
            params,
            mult_depth,
        }
    }

    /// Builds a ciphertext from raw parts, e.g. after deserialization.
    pub fn try_from_parts(params: BfvParams, parts: Vec<RingPoly>, mult_depth: u32) -> Result<Self, BfvError> {
        if parts.len() < 2 {
            return Err(BfvError::Format(format!(
                "ciphertext needs >= 2 parts, got {}",
                parts.len()
            )));
        }
        for p in &parts {
            params.ring().check_compatible(p.params())?;
        }
        Ok(Self::from_parts(params, parts, mult_depth))
    }

    /// The all-zero ciphertext, which decrypts to 0 with no noise.
    pub fn zero(params: &BfvParams) -> Self {
        let z = RingPoly::zero(params.ring());
        Self::from_parts(params.clone(), vec![z.clone(), z], 0)
    }

    pub fn parts(&self) -> &[RingPoly] {
        &self.parts
    }

    pub(crate) fn parts_mut(&mut self) -> &mut [RingPoly] {
        &mut self.parts
    }

    pub fn params(&self) -> &BfvParams {
        &self.params
    }

    pub fn mult_depth(&self) -> u32 {
        self.mult_depth
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Homomorphic addition; the shorter operand is padded with zero parts.
    pub fn add(&self, other: &Ciphertext) -> Result<Ciphertext, BfvError> {
        self.params.check_compatible(&other.params)?;
        let (long, short) = if self.len() >= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut parts = long.parts.clone();
        for (p, q) in parts.iter_mut().zip(&short.parts) {
            p.add_assign(q)?;
        }
        Ok(Self::from_parts(
            self.params.clone(),
            parts,
            self.mult_depth.max(other.mult_depth),
        ))
    }

    /// Adds a plaintext scalar `m ∈ [-t/2, t/2)`.
    pub fn add_plain(&self, m: i64) -> Result<Ciphertext, BfvError> {
        self.params.check_plaintext(m)?;
        let mut out = self.clone();
        let modulus = *self.params.ring().modulus();
        let c00 = &mut out.parts[0].coeffs_mut()[0];
        *c00 = modulus.add(*c00, self.params.scale_plaintext(m));
        Ok(out)
    }

    /// Multiplies by a plaintext scalar `m ∈ [-t/2, t/2)`, i.e. by the
    /// constant polynomial `m̂`.
    pub fn mul_plain(&self, m: i64) -> Result<Ciphertext, BfvError> {
        self.params.check_plaintext(m)?;
        let m_hat = RingPoly::constant(self.params.ring(), m);
        let parts = self
            .parts
            .iter()
            .map(|p| p.negacyclic_mul(&m_hat))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_parts(self.params.clone(), parts, self.mult_depth))
    }

    /// Ciphertext-ciphertext product without relinearization: the output
    /// has `len(a) + len(b) - 1` parts, each `⌊t/q · Σ_{i+j=l} a_i ⋆ b_j⌉`
    /// with the tensor product taken over the integers.
    pub fn mul_ct(&self, other: &Ciphertext) -> Result<Ciphertext, BfvError> {
        self.params.check_compatible(&other.params)?;
        let ring = self.params.ring();
        let lifted_a: Vec<Vec<i64>> = self.parts.iter().map(RingPoly::center_lift).collect();
        let lifted_b: Vec<Vec<i64>> = other.parts.iter().map(RingPoly::center_lift).collect();
        let out_len = self.len() + other.len() - 1;
        let q2 = (self.params.q() as i128) * (self.params.q() as i128);
        let parts = (0..out_len)
            .map(|l| {
                let mut acc = vec![0i128; ring.n()];
                for (i, a) in lifted_a.iter().enumerate() {
                    if l < i || l - i >= lifted_b.len() {
                        continue;
                    }
                    negacyclic_accumulate_mod(&mut acc, a, &lifted_b[l - i], q2);
                }
                scale_down(ring, &acc, self.params.t())
            })
            .collect();
        Ok(Self::from_parts(
            self.params.clone(),
            parts,
            self.mult_depth.max(other.mult_depth) + 1,
        ))
    }
}

/// `acc += a ⋆ b` over the integers, kept reduced modulo `q²`.
///
/// The rounded scaling `⌊t·X/q⌉ mod q` only depends on `X mod q²`, so the
/// exact tensor product never needs more than 128 bits.
fn negacyclic_accumulate_mod(acc: &mut [i128], a: &[i64], b: &[i64], q2: i128) {
    let n = acc.len();
    // |a_i·b_j| <= q²/4; fold before acc could leave (-2^127, 2^127).
    let term_max = (q2 / 4).max(1);
    let rows_per_fold = (((1i128 << 126) / term_max) - 4).clamp(1, n as i128) as usize;
    for (i, &ai) in a.iter().enumerate() {
        if ai != 0 {
            let ai = ai as i128;
            let (head, tail) = b.split_at(n - i);
            // x^i · x^j = x^(i+j), negated once i + j wraps past n.
            for (slot, &bj) in acc[i..].iter_mut().zip(head) {
                *slot += ai * bj as i128;
            }
            for (slot, &bj) in acc[..i].iter_mut().zip(tail) {
                *slot -= ai * bj as i128;
            }
        }
        if (i + 1) % rows_per_fold == 0 {
            for v in acc.iter_mut() {
                *v %= q2;
            }
        }
    }
    for v in acc.iter_mut() {
        *v %= q2;
    }
}

fn scale_down(ring: &RingParams, acc: &[i128], t: u64) -> RingPoly {
    let m = ring.modulus();
    let q = ring.q() as u128;
    let q2 = (q * q) as i128;
    let t_mod = t % ring.q();
    let coeffs = acc
        .iter()
        .map(|&x| {
            let x = x.rem_euclid(q2) as u128;
            let (hi, lo) = (x / q, x % q);
            // t·x/q = t·hi + t·lo/q with hi < q, lo < q.
            let rounded = (2 * t as u128 * lo + q) / (2 * q);
            m.add(m.mul(t_mod, hi as u64), (rounded % q) as u64)
        })
        .collect();
    RingPoly::from_raw(ring, coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bfv::keygen;
    use num_bigint::BigInt;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn tensor_scaling_matches_bigint() {
        // Exact oracle for one output part of a 2x2 product at a 62-bit modulus.
        let ring = RingParams::new(16, (1u64 << 61) - 1).unwrap();
        let t = 65_537u64;
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let q = ring.q() as i64;
        let a: Vec<i64> = (0..16).map(|_| rng.random_range(-q / 2..q / 2)).collect();
        let b: Vec<i64> = (0..16).map(|_| rng.random_range(-q / 2..q / 2)).collect();
        let q2 = (q as i128) * (q as i128);
        let mut acc = vec![0i128; 16];
        negacyclic_accumulate_mod(&mut acc, &a, &b, q2);
        let got = scale_down(&ring, &acc, t);

        let qb = BigInt::from(q);
        for k in 0..16 {
            let mut x = BigInt::from(0);
            for i in 0..16 {
                for j in 0..16 {
                    let prod = BigInt::from(a[i]) * BigInt::from(b[j]);
                    if i + j == k {
                        x += prod;
                    } else if i + j == k + 16 {
                        x -= prod;
                    }
                }
            }
            // round(t·x/q) with ties toward +∞, then mod q.
            let num = BigInt::from(2 * t) * &x + &qb;
            let den = BigInt::from(2) * &qb;
            let mut r = num.clone() / &den;
            if num < BigInt::from(0) && &r * &den != num {
                r -= 1;
            }
            let r = ((r % &qb) + &qb) % &qb;
            assert_eq!(r, BigInt::from(got.coeffs()[k]), "coefficient {k}");
        }
    }

    #[test]
    fn add_pads_shorter_operand() {
        let p = BfvParams::standard(2048, 97, 128).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let kp = keygen(&p, &mut rng);
        let a = kp.public.encrypt(3, &mut rng).unwrap();
        let b = kp.public.encrypt(-6, &mut rng).unwrap();
        let prod = a.mul_ct(&b).unwrap();
        assert_eq!(prod.len(), 3);
        assert_eq!(prod.mult_depth(), 1);
        let sum = prod.add(&a).unwrap();
        assert_eq!(sum.len(), 3);
        assert_eq!(kp.secret.decrypt(&sum).unwrap(), -15);
    }
}
