//! Word-sized modular arithmetic for moduli below 2^62.

/// An odd modulus `q < 2^62` with precomputed Barrett constants.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Modulus {
    value: u64,
    // floor(2^128 / q), split into 64-bit halves.
    ratio_lo: u64,
    ratio_hi: u64,
}

pub const MAX_MODULUS_BITS: u32 = 62;

impl Modulus {
    /// Panics if `q < 2` or `q >= 2^62`; callers validate first.
    pub fn new(q: u64) -> Self {
        assert!(
            (2..(1u64 << MAX_MODULUS_BITS)).contains(&q),
            "modulus out of range: {q}"
        );
        // floor(2^128 / q) = floor((2^128 - 1) / q) unless q divides 2^128,
        // which only powers of two do.
        let mut ratio = u128::MAX / q as u128;
        if q.is_power_of_two() {
            ratio += 1;
        }
        Self {
            value: q,
            ratio_lo: ratio as u64,
            ratio_hi: (ratio >> 64) as u64,
        }
    }

    #[inline(always)]
    pub fn value(&self) -> u64 {
        self.value
    }

    #[inline(always)]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        // Branch-free: when s < q the wrapped difference is huge and loses.
        let s = a + b;
        s.min(s.wrapping_sub(self.value))
    }

    #[inline(always)]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        let d = a.wrapping_sub(b);
        d.min(d.wrapping_add(self.value))
    }

    #[inline(always)]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.value - a
        }
    }

    /// Barrett reduction of `x < 2^126`.
    #[inline(always)]
    pub fn reduce_u128(&self, x: u128) -> u64 {
        debug_assert!(x >> 126 == 0);
        let x_lo = x as u64 as u128;
        let x_hi = (x >> 64) as u64 as u128;
        let r_lo = self.ratio_lo as u128;
        let r_hi = self.ratio_hi as u128;
        // floor(x * ratio / 2^128), computed exactly from 64-bit limbs.
        let mid = x_hi * r_lo + x_lo * r_hi + ((x_lo * r_lo) >> 64);
        let quotient = x_hi * r_hi + (mid >> 64);
        let rem = x.wrapping_sub(quotient.wrapping_mul(self.value as u128)) as u64;
        // The quotient estimate is short by at most 2.
        let rem = rem.min(rem.wrapping_sub(self.value));
        rem.min(rem.wrapping_sub(self.value))
    }

    #[inline(always)]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce_u128(a as u128 * b as u128)
    }

    /// Reduces any signed 64-bit value into `[0, q)`.
    #[inline]
    pub fn reduce_i64(&self, x: i64) -> u64 {
        x.rem_euclid(self.value as i64) as u64
    }

    /// Reduces any signed 128-bit value into `[0, q)`.
    #[inline]
    pub fn reduce_i128(&self, x: i128) -> u64 {
        x.rem_euclid(self.value as i128) as u64
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.value;
        base %= self.value;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Inverse by Fermat's little theorem; only valid for prime moduli.
    pub fn inv_prime(&self, a: u64) -> u64 {
        self.pow(a, self.value - 2)
    }

    /// Maps a residue to its representative in `[-q/2, q/2)`.
    #[inline(always)]
    pub fn center(&self, a: u64) -> i64 {
        // a >= ceil(q/2) lifts to the negative side.
        if a >= self.value - self.value / 2 {
            a as i64 - self.value as i64
        } else {
            a as i64
        }
    }

    /// Precomputes `floor(w * 2^64 / q)` for Shoup multiplication by `w`.
    #[inline]
    pub fn shoup(&self, w: u64) -> u64 {
        (((w as u128) << 64) / self.value as u128) as u64
    }

    /// `a * w mod q` given `w_shoup = self.shoup(w)`.
    #[inline(always)]
    pub fn mul_shoup(&self, a: u64, w: u64, w_shoup: u64) -> u64 {
        let hi = ((a as u128 * w_shoup as u128) >> 64) as u64;
        let r = a.wrapping_mul(w).wrapping_sub(hi.wrapping_mul(self.value));
        r.min(r.wrapping_sub(self.value))
    }
}

/// Deterministic Miller-Rabin for all 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const SMALL: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in SMALL {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mul = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let pow = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = mul(acc, b);
            }
            b = mul(b, b);
            e >>= 1;
        }
        acc
    };
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for a in SMALL {
        let mut x = pow(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn barrett_matches_division(q in 3u64..(1u64 << 62), a in any::<u64>(), b in any::<u64>()) {
            let m = Modulus::new(q | 1);
            let (a, b) = (a % m.value(), b % m.value());
            let expected = ((a as u128 * b as u128) % m.value() as u128) as u64;
            prop_assert_eq!(m.mul(a, b), expected);
        }

        #[test]
        fn shoup_matches_division(q in 3u64..(1u64 << 62), a in any::<u64>(), w in any::<u64>()) {
            let m = Modulus::new(q | 1);
            let (a, w) = (a % m.value(), w % m.value());
            let expected = ((a as u128 * w as u128) % m.value() as u128) as u64;
            prop_assert_eq!(m.mul_shoup(a, w, m.shoup(w)), expected);
        }
    }

    #[test]
    fn center_boundaries() {
        let m = Modulus::new(17);
        assert_eq!(m.center(16), -1);
        assert_eq!(m.center(8), 8);
        assert_eq!(m.center(9), -8);
        assert_eq!(m.center(0), 0);
    }

    #[test]
    fn primality_against_trial_division() {
        let trial = |n: u64| n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d));
        for n in 0..5000u64 {
            assert_eq!(is_prime(n), trial(n), "n = {n}");
        }
        // Strong pseudoprimes to several small bases.
        assert!(!is_prime(3_215_031_751));
        assert!(!is_prime(3_825_123_056_546_413_051));
        assert!(is_prime((1u64 << 61) - 1));
    }
}
