//! Negacyclic number-theoretic transform over `Z_q[x]/(x^n + 1)`.
//!
//! The forward transform is Cooley-Tukey with the powers of a primitive
//! 2n-th root of unity `psi` merged into the twiddles (bit-reversed output);
//! the inverse is Gentleman-Sande taking bit-reversed input back to natural
//! order. Pointwise products in the transformed domain are negacyclic
//! products in the coefficient domain.

use super::modulus::Modulus;

#[derive(Debug)]
pub struct NttTables {
    modulus: Modulus,
    n: usize,
    psi_rev: Vec<u64>,
    psi_rev_shoup: Vec<u64>,
    psi_inv_rev: Vec<u64>,
    psi_inv_rev_shoup: Vec<u64>,
    n_inv: u64,
    n_inv_shoup: u64,
}

fn bit_reverse(x: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        x.reverse_bits() >> (usize::BITS - bits)
    }
}

/// Finds a primitive 2n-th root of unity mod a prime `q ≡ 1 (mod 2n)`.
fn find_psi(m: &Modulus, n: usize) -> Option<u64> {
    let q = m.value();
    let two_n = 2 * n as u64;
    if !(q - 1).is_multiple_of(two_n) {
        return None;
    }
    let exp = (q - 1) / two_n;
    (2..q.min(1 << 20)).find_map(|g| {
        let psi = m.pow(g, exp);
        // psi has order exactly 2n iff psi^n = -1.
        (m.pow(psi, n as u64) == q - 1).then_some(psi)
    })
}

impl NttTables {
    /// Returns `None` unless `q` is a prime congruent to 1 mod 2n.
    pub fn new(n: usize, q: u64) -> Option<Self> {
        if !n.is_power_of_two() || !super::modulus::is_prime(q) {
            return None;
        }
        let modulus = Modulus::new(q);
        let psi = find_psi(&modulus, n)?;
        let psi_inv = modulus.inv_prime(psi);
        let bits = n.trailing_zeros();

        let mut psi_rev = vec![0u64; n];
        let mut psi_inv_rev = vec![0u64; n];
        let (mut p, mut pi) = (1u64, 1u64);
        for i in 0..n {
            let r = bit_reverse(i, bits);
            psi_rev[r] = p;
            psi_inv_rev[r] = pi;
            p = modulus.mul(p, psi);
            pi = modulus.mul(pi, psi_inv);
        }
        let psi_rev_shoup = psi_rev.iter().map(|&w| modulus.shoup(w)).collect();
        let psi_inv_rev_shoup = psi_inv_rev.iter().map(|&w| modulus.shoup(w)).collect();
        let n_inv = modulus.inv_prime(n as u64 % q);
        Some(Self {
            modulus,
            n,
            psi_rev,
            psi_rev_shoup,
            psi_inv_rev,
            psi_inv_rev_shoup,
            n_inv,
            n_inv_shoup: modulus.shoup(n_inv),
        })
    }

    pub fn forward(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let m = &self.modulus;
        let mut t = self.n;
        let mut groups = 1;
        while groups < self.n {
            t >>= 1;
            for i in 0..groups {
                let w = self.psi_rev[groups + i];
                let ws = self.psi_rev_shoup[groups + i];
                let start = 2 * i * t;
                let (lo, hi) = a[start..start + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let u = *x;
                    let v = m.mul_shoup(*y, w, ws);
                    *x = m.add(u, v);
                    *y = m.sub(u, v);
                }
            }
            groups <<= 1;
        }
    }

    pub fn inverse(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let m = &self.modulus;
        let mut t = 1;
        let mut groups = self.n;
        while groups > 1 {
            let half = groups >> 1;
            for i in 0..half {
                let w = self.psi_inv_rev[half + i];
                let ws = self.psi_inv_rev_shoup[half + i];
                let start = 2 * i * t;
                let (lo, hi) = a[start..start + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let u = *x;
                    let v = *y;
                    *x = m.add(u, v);
                    *y = m.mul_shoup(m.sub(u, v), w, ws);
                }
            }
            t <<= 1;
            groups = half;
        }
        for x in a.iter_mut() {
            *x = m.mul_shoup(*x, self.n_inv, self.n_inv_shoup);
        }
    }

    /// In-place pointwise product `a <- a ⊙ b`.
    pub fn pointwise_mul(&self, a: &mut [u64], b: &[u64]) {
        for (x, &y) in a.iter_mut().zip(b) {
            *x = self.modulus.mul(*x, y);
        }
    }

    /// Accumulates `acc <- acc + a ⊙ b`.
    pub fn pointwise_mul_add(&self, acc: &mut [u64], a: &[u64], b: &[u64]) {
        for ((z, &x), &y) in acc.iter_mut().zip(a).zip(b) {
            *z = self.modulus.add(*z, self.modulus.mul(x, y));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unfriendly_moduli() {
        assert!(NttTables::new(16, 17).is_none()); // 17 != 1 mod 32
        assert!(NttTables::new(16, 97 * 3).is_none());
        assert!(NttTables::new(16, 97).is_some()); // 97 = 3*32 + 1
    }

    #[test]
    fn round_trip_is_identity() {
        let q = 12289; // 1 mod 2048
        let tables = NttTables::new(1024, q).unwrap();
        let original: Vec<u64> = (0..1024u64).map(|i| (i * 7919 + 13) % q).collect();
        let mut a = original.clone();
        tables.forward(&mut a);
        assert_ne!(a, original);
        tables.inverse(&mut a);
        assert_eq!(a, original);
    }
}
