use num_bigint::BigInt;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use spyking_core::ring::{RingParams, RingPoly};

fn random_poly(params: &RingParams, rng: &mut ChaCha20Rng) -> RingPoly {
    let coeffs = (0..params.n()).map(|_| rng.random_range(0..params.q())).collect();
    RingPoly::from_coeffs(params, coeffs).unwrap()
}

fn big_mod(x: BigInt, q: u64) -> u64 {
    let q = BigInt::from(q);
    let r = ((x % &q) + &q) % &q;
    r.try_into().unwrap()
}

fn oracle_add(a: &[u64], b: &[u64], q: u64) -> Vec<u64> {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| big_mod(BigInt::from(x) + BigInt::from(y), q))
        .collect()
}

/// O(n²) convolution over the integers, folding `x^(i+j)` for `i+j >= n`
/// back with a sign flip, reduced only at the end.
fn oracle_negacyclic(a: &[u64], b: &[u64], q: u64) -> Vec<u64> {
    let n = a.len();
    let mut acc = vec![BigInt::from(0); n];
    for i in 0..n {
        let ai = BigInt::from(a[i]);
        for j in 0..n {
            let prod = &ai * BigInt::from(b[j]);
            if i + j < n {
                acc[i + j] += prod;
            } else {
                acc[i + j - n] -= prod;
            }
        }
    }
    acc.into_iter().map(|x| big_mod(x, q)).collect()
}

fn ntt_params() -> RingParams {
    // 27-bit prime, 1 mod 2048.
    let p = RingParams::new(1024, 132_120_577).unwrap();
    assert!(p.ntt().is_some());
    p
}

#[test]
fn add_matches_bigint_oracle() {
    let params = ntt_params();
    let mut rng = ChaCha20Rng::seed_from_u64(100);
    for _ in 0..500 {
        let a = random_poly(&params, &mut rng);
        let b = random_poly(&params, &mut rng);
        let got = a.add(&b).unwrap();
        assert_eq!(got.coeffs(), oracle_add(a.coeffs(), b.coeffs(), params.q()).as_slice());
    }
}

#[test]
fn negacyclic_mul_matches_bigint_oracle() {
    // NTT-friendly modulus, a 62-bit non-NTT modulus, and a small odd one.
    let cases = [
        (ntt_params(), 500),
        (RingParams::new(1024, (1u64 << 62) - 57).unwrap(), 20),
        (RingParams::new(1024, 1_000_001).unwrap(), 20),
    ];
    let mut rng = ChaCha20Rng::seed_from_u64(101);
    for (params, trials) in cases {
        for _ in 0..trials {
            let a = random_poly(&params, &mut rng);
            let b = random_poly(&params, &mut rng);
            let got = a.negacyclic_mul(&b).unwrap();
            let want = oracle_negacyclic(a.coeffs(), b.coeffs(), params.q());
            assert_eq!(got.coeffs(), want.as_slice(), "q = {}", params.q());
        }
    }
}

#[test]
fn ntt_path_is_bit_identical_to_schoolbook() {
    let params = ntt_params();
    let mut rng = ChaCha20Rng::seed_from_u64(102);
    for _ in 0..50 {
        let a = random_poly(&params, &mut rng);
        let b = random_poly(&params, &mut rng);
        assert_eq!(a.negacyclic_mul(&b).unwrap(), a.mul_schoolbook(&b).unwrap());
    }
}

#[test]
fn center_lift_round_trip() {
    let params = ntt_params();
    let mut rng = ChaCha20Rng::seed_from_u64(103);
    let half = (params.q() / 2) as i64;
    for _ in 0..1000 {
        let a = random_poly(&params, &mut rng);
        let lifted = a.center_lift();
        assert!(lifted.iter().all(|&v| v >= -half - 1 && v <= half));
        assert_eq!(RingPoly::from_signed(&params, &lifted).unwrap(), a);
    }
}

#[test]
fn mismatched_rings_are_rejected() {
    let a = RingPoly::zero(&RingParams::new(64, 97).unwrap());
    let b = RingPoly::zero(&RingParams::new(64, 193).unwrap());
    assert!(a.add(&b).is_err());
    assert!(a.negacyclic_mul(&b).is_err());
}

fn small_ring() -> RingParams {
    // 257 = 1 mod 128 exercises the NTT path at n = 64.
    RingParams::new(64, 257).unwrap()
}

fn poly_strategy() -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(0u64..257, 64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn ring_axioms(a in poly_strategy(), b in poly_strategy(), c in poly_strategy()) {
        let p = small_ring();
        let a = RingPoly::from_coeffs(&p, a).unwrap();
        let b = RingPoly::from_coeffs(&p, b).unwrap();
        let c = RingPoly::from_coeffs(&p, c).unwrap();

        prop_assert_eq!(a.add(&b).unwrap(), b.add(&a).unwrap());
        prop_assert_eq!(a.add(&b).unwrap().add(&c).unwrap(), a.add(&b.add(&c).unwrap()).unwrap());
        let ab = a.negacyclic_mul(&b).unwrap();
        prop_assert_eq!(&ab, &b.negacyclic_mul(&a).unwrap());
        prop_assert_eq!(
            ab.negacyclic_mul(&c).unwrap(),
            a.negacyclic_mul(&b.negacyclic_mul(&c).unwrap()).unwrap()
        );
        prop_assert_eq!(
            a.negacyclic_mul(&b.add(&c).unwrap()).unwrap(),
            ab.add(&a.negacyclic_mul(&c).unwrap()).unwrap()
        );
        prop_assert_eq!(&ab, &a.mul_schoolbook(&b).unwrap());
    }

    #[test]
    fn center_lift_inverts_reduce(v in prop::collection::vec(-128i64..=128, 64)) {
        let p = small_ring();
        let poly = RingPoly::from_signed(&p, &v).unwrap();
        prop_assert_eq!(poly.center_lift(), v);
    }
}
