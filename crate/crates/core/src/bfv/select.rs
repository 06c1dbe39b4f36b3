use super::BfvError;
use crate::ring::{is_prime, MAX_MODULUS_BITS};

/// Ring degrees with a tabulated modulus bound.
pub const SUPPORTED_DEGREES: [usize; 3] = [1024, 2048, 4096];

/// Maximum `log2 q` for ternary secrets from the homomorphic-encryption
/// standard tables, before the 62-bit implementation cap.
pub fn security_bound_bits(n: usize, security_bits: u32) -> Result<u32, BfvError> {
    let row = match security_bits {
        128 => [27, 54, 109],
        192 => [19, 37, 75],
        256 => [14, 29, 58],
        other => return Err(BfvError::UnsupportedSecurity(other)),
    };
    let idx = SUPPORTED_DEGREES
        .iter()
        .position(|&d| d == n)
        .ok_or(BfvError::UnsupportedDegree(n))?;
    Ok(row[idx])
}

/// Largest prime `q ≡ 1 (mod 2n)` below `2^min(bound, 62)`.
pub fn select_q(n: usize, security_bits: u32) -> Result<u64, BfvError> {
    let bits = security_bound_bits(n, security_bits)?.min(MAX_MODULUS_BITS);
    let two_n = 2 * n as u64;
    let limit = 1u64 << bits;
    let mut k = (limit - 2) / two_n;
    while k > 0 {
        let candidate = k * two_n + 1;
        if is_prime(candidate) {
            return Ok(candidate);
        }
        k -= 1;
    }
    Err(BfvError::InvalidParams(format!(
        "no NTT-friendly prime below 2^{bits} for n = {n}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial_division_prime(p: u64) -> bool {
        p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| !p.is_multiple_of(d))
    }

    #[test]
    fn n1024_prime_is_largest_in_range() {
        let q = select_q(1024, 128).unwrap();
        assert!(q < 1 << 27);
        assert_eq!(q % 2048, 1);
        assert!(trial_division_prime(q));
        // No larger candidate in the same congruence class is prime.
        let mut c = q + 2048;
        while c < 1 << 27 {
            assert!(!trial_division_prime(c), "{c} is a larger prime");
            c += 2048;
        }
    }

    #[test]
    fn deterministic_and_monotone() {
        assert_eq!(select_q(1024, 128).unwrap(), select_q(1024, 128).unwrap());
        let q1 = select_q(1024, 128).unwrap();
        let q2 = select_q(2048, 128).unwrap();
        let q4 = select_q(4096, 128).unwrap();
        assert!(q2 > q1);
        assert!(q4 >= q2);
        assert!(q4 < 1 << 62);
        assert!(select_q(1024, 256).unwrap() < q1);
    }

    #[test]
    fn unsupported_inputs() {
        assert!(matches!(select_q(512, 128), Err(BfvError::UnsupportedDegree(512))));
        assert!(matches!(select_q(1024, 100), Err(BfvError::UnsupportedSecurity(100))));
    }
}
