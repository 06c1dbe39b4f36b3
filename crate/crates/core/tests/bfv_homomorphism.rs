use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use spyking_core::bfv::debug::{decrypt_with_noise, noise_budget};
use spyking_core::bfv::{centered_bounds, keygen, BfvError, BfvParams, Ciphertext, KeyPair};

fn setup(n: usize, t: u64, seed: u64) -> (BfvParams, KeyPair, ChaCha20Rng) {
    let params = BfvParams::standard(n, t, 128).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let kp = keygen(&params, &mut rng);
    (params, kp, rng)
}

/// Independent modular oracle: the centered residue of `v mod t`.
fn modular(v: i128, t: u64) -> i64 {
    let t = t as i128;
    let mut r = v % t;
    if r < 0 {
        r += t;
    }
    if 2 * r >= t {
        r -= t;
    }
    r as i64
}

fn random_plain(t: u64, rng: &mut ChaCha20Rng) -> i64 {
    let (lo, hi) = centered_bounds(t);
    rng.random_range(lo..=hi)
}

#[test]
fn worked_examples() {
    let (_, kp, mut rng) = setup(1024, 100, 1);
    let a = kp.public.encrypt(2, &mut rng).unwrap();
    let b = kp.public.encrypt(-18, &mut rng).unwrap();
    assert_eq!(kp.secret.decrypt(&a.add(&b).unwrap()).unwrap(), -16);

    let (_, kp, mut rng) = setup(1024, 200, 2);
    let c = kp.public.encrypt(10, &mut rng).unwrap();
    assert_eq!(kp.secret.decrypt(&c.add_plain(-90).unwrap()).unwrap(), -80);
    let z = kp.public.encrypt(-16, &mut rng).unwrap();
    assert_eq!(kp.secret.decrypt(&z.mul_plain(5).unwrap()).unwrap(), -80);

    // One ciphertext product needs more headroom than the 27-bit modulus at n = 1024 gives.
    let (_, kp, mut rng) = setup(2048, 100, 3);
    let x = kp.public.encrypt(3, &mut rng).unwrap();
    let y = kp.public.encrypt(-6, &mut rng).unwrap();
    let two = kp.public.encrypt(2, &mut rng).unwrap();
    let prod = x.mul_ct(&y).unwrap();
    assert_eq!(kp.secret.decrypt(&prod).unwrap(), -18);
    assert_eq!(kp.secret.decrypt(&two.add(&prod).unwrap()).unwrap(), -16);
}

#[test]
fn identities() {
    let (params, kp, mut rng) = setup(1024, 50, 4);
    let ct = kp.public.encrypt(7, &mut rng).unwrap();
    let zero = kp.public.encrypt(0, &mut rng).unwrap();
    assert_eq!(kp.secret.decrypt(&zero).unwrap(), 0);
    assert_eq!(kp.secret.decrypt(&ct).unwrap(), 7);
    assert_eq!(kp.secret.decrypt(&ct.add(&zero).unwrap()).unwrap(), 7);
    assert_eq!(kp.secret.decrypt(&ct.add_plain(0).unwrap()).unwrap(), 7);
    assert_eq!(kp.secret.decrypt(&ct.mul_plain(1).unwrap()).unwrap(), 7);
    assert_eq!(kp.secret.decrypt(&Ciphertext::zero(&params)).unwrap(), 0);

    let (_, kp, mut rng) = setup(2048, 97, 5);
    let one = kp.public.encrypt(1, &mut rng).unwrap();
    let m = kp.public.encrypt(-33, &mut rng).unwrap();
    assert_eq!(kp.secret.decrypt(&one.mul_ct(&m).unwrap()).unwrap(), -33);
}

#[test]
fn range_errors() {
    let (_, kp, mut rng) = setup(1024, 100, 6);
    assert!(matches!(
        kp.public.encrypt(50, &mut rng),
        Err(BfvError::PlaintextOutOfRange { value: 50, t: 100 })
    ));
    let ct = kp.public.encrypt(-50, &mut rng).unwrap();
    assert!(ct.add_plain(-51).is_err());
    assert!(ct.mul_plain(50).is_err());
}

#[test]
fn round_trip_exhaustive_small_t() {
    for t in [2u64, 3, 10, 50, 97, 100] {
        let (_, kp, mut rng) = setup(1024, t, 10 + t);
        let (lo, hi) = centered_bounds(t);
        for m in lo..=hi {
            let ct = kp.public.encrypt(m, &mut rng).unwrap();
            assert_eq!(kp.secret.decrypt(&ct).unwrap(), m, "t = {t}");
        }
    }
}

#[test]
fn round_trip_sampled() {
    for t in [50u64, 500, 5000] {
        let (_, kp, mut rng) = setup(1024, t, 20 + t);
        for _ in 0..1000 {
            let m = random_plain(t, &mut rng);
            let ct = kp.public.encrypt(m, &mut rng).unwrap();
            let d = decrypt_with_noise(&kp.secret, &ct).unwrap();
            assert!(d.budget_bits > 0.0, "t = {t}: fresh NB {}", d.budget_bits);
            assert_eq!(d.value, m, "t = {t}");
        }
    }
}

#[test]
fn additive_homomorphism() {
    let t = 97;
    let (_, kp, mut rng) = setup(1024, t, 30);
    for _ in 0..1000 {
        let (a, b) = (random_plain(t, &mut rng), random_plain(t, &mut rng));
        let ca = kp.public.encrypt(a, &mut rng).unwrap();
        let cb = kp.public.encrypt(b, &mut rng).unwrap();
        let sum = ca.add(&cb).unwrap();
        assert_eq!(kp.secret.decrypt(&sum).unwrap(), modular(a as i128 + b as i128, t));
        assert_eq!(
            kp.secret.decrypt(&ca.add_plain(b).unwrap()).unwrap(),
            modular(a as i128 + b as i128, t)
        );
        let nb_a = noise_budget(&kp.secret, &ca).unwrap();
        let nb_b = noise_budget(&kp.secret, &cb).unwrap();
        let nb_sum = noise_budget(&kp.secret, &sum).unwrap();
        assert!(nb_sum >= nb_a.min(nb_b) - 1.0, "{nb_sum} vs {nb_a}, {nb_b}");
    }
}

#[test]
fn plain_multiplication_consumes_budget() {
    let t = 97;
    let (_, kp, mut rng) = setup(1024, t, 31);
    for _ in 0..500 {
        let a = random_plain(t, &mut rng);
        let mut m = random_plain(t, &mut rng);
        while m.abs() < 2 {
            m = random_plain(t, &mut rng);
        }
        let ct = kp.public.encrypt(a, &mut rng).unwrap();
        let before = noise_budget(&kp.secret, &ct).unwrap();
        let prod = ct.mul_plain(m).unwrap();
        let after = decrypt_with_noise(&kp.secret, &prod).unwrap();
        assert!(after.budget_bits < before, "{} !< {before}", after.budget_bits);
        assert!(after.budget_bits > 0.0);
        assert_eq!(after.value, modular(a as i128 * m as i128, t));
    }
}

#[test]
fn ciphertext_multiplication() {
    let t = 97;
    let (_, kp, mut rng) = setup(2048, t, 32);
    for _ in 0..200 {
        let (a, b) = (random_plain(t, &mut rng), random_plain(t, &mut rng));
        let ca = kp.public.encrypt(a, &mut rng).unwrap();
        let cb = kp.public.encrypt(b, &mut rng).unwrap();
        let prod = ca.mul_ct(&cb).unwrap();
        assert_eq!(prod.len(), 3);
        let d = decrypt_with_noise(&kp.secret, &prod).unwrap();
        let before = noise_budget(&kp.secret, &ca)
            .unwrap()
            .min(noise_budget(&kp.secret, &cb).unwrap());
        assert!(d.budget_bits > 0.0 && d.budget_bits < before);
        assert_eq!(d.value, modular(a as i128 * b as i128, t));
    }
}

#[test]
fn no_mismatch_while_budget_remains() {
    // Ladder of repeated plain multiplications until the budget is gone.
    let t = 500;
    let (_, kp, mut rng) = setup(1024, t, 33);
    let mut saw_exhaustion = false;
    for _ in 0..50 {
        let mut expected = random_plain(t, &mut rng);
        let mut ct = kp.public.encrypt(expected, &mut rng).unwrap();
        for _ in 0..12 {
            let m = if rng.random_bool(0.5) { 3 } else { -3 };
            ct = ct.mul_plain(m).unwrap();
            expected = modular(expected as i128 * m as i128, t);
            let d = decrypt_with_noise(&kp.secret, &ct).unwrap();
            if d.budget_bits > 0.0 {
                assert_eq!(d.value, expected);
            } else {
                saw_exhaustion = true;
                break;
            }
        }
    }
    assert!(saw_exhaustion);
}
