//! Binary encoding of keys and ciphertexts.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "BFVSER01" | version u8 | kind u8 | n u32 | q u64 | t u64
//! [ciphertext only: mult_depth u32]
//! poly count u32 | per poly: coefficient count u32, then count × u64
//! ```
//!
//! `kind` is 1 for a secret key, 2 for a public key, 3 for a ciphertext.

use std::io::{Read, Write};

use super::{BfvError, BfvParams, Ciphertext, PublicKey, SecretKey};
use crate::ring::RingPoly;

pub const MAGIC: &[u8; 8] = b"BFVSER01";
pub const VERSION: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum ObjectKind {
    SecretKey = 1,
    PublicKey = 2,
    Ciphertext = 3,
}

impl ObjectKind {
    fn from_tag(tag: u8) -> Result<Self, BfvError> {
        match tag {
            1 => Ok(Self::SecretKey),
            2 => Ok(Self::PublicKey),
            3 => Ok(Self::Ciphertext),
            other => Err(BfvError::Format(format!("unknown object kind {other}"))),
        }
    }
}

fn write_header<W: Write>(w: &mut W, kind: ObjectKind, params: &BfvParams) -> Result<(), BfvError> {
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION, kind as u8])?;
    w.write_all(&(params.n() as u32).to_le_bytes())?;
    w.write_all(&params.q().to_le_bytes())?;
    w.write_all(&params.t().to_le_bytes())?;
    Ok(())
}

fn write_polys<W: Write>(w: &mut W, polys: &[&RingPoly]) -> Result<(), BfvError> {
    w.write_all(&(polys.len() as u32).to_le_bytes())?;
    for p in polys {
        w.write_all(&(p.coeffs().len() as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(p.coeffs().len() * 8);
        for c in p.coeffs() {
            buf.extend_from_slice(&c.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N], BfvError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => BfvError::Format("unexpected end of data".into()),
        _ => BfvError::Io(e),
    })?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, BfvError> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, BfvError> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

fn read_header<R: Read>(r: &mut R, expected: ObjectKind) -> Result<BfvParams, BfvError> {
    let magic: [u8; 8] = read_array(r)?;
    if &magic != MAGIC {
        return Err(BfvError::Format("bad magic".into()));
    }
    let [version, kind] = read_array(r)?;
    if version != VERSION {
        return Err(BfvError::Format(format!("unsupported version {version}")));
    }
    let kind = ObjectKind::from_tag(kind)?;
    if kind != expected {
        return Err(BfvError::Format(format!("expected {expected:?}, found {kind:?}")));
    }
    let n = read_u32(r)? as usize;
    let q = read_u64(r)?;
    let t = read_u64(r)?;
    BfvParams::with_modulus(n, q, t)
}

fn read_polys<R: Read>(r: &mut R, params: &BfvParams) -> Result<Vec<RingPoly>, BfvError> {
    let count = read_u32(r)? as usize;
    // A ciphertext never legitimately has more parts than this.
    if count > 64 {
        return Err(BfvError::Format(format!("implausible polynomial count {count}")));
    }
    let mut polys = Vec::with_capacity(count);
    for _ in 0..count {
        let len = read_u32(r)? as usize;
        if len != params.n() {
            return Err(BfvError::Format(format!(
                "polynomial has {len} coefficients, expected {}",
                params.n()
            )));
        }
        let mut raw = vec![0u8; len * 8];
        r.read_exact(&mut raw)
            .map_err(|_| BfvError::Format("unexpected end of data".into()))?;
        let coeffs = raw
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect::<Vec<u64>>();
        if let Some(bad) = coeffs.iter().find(|&&c| c >= params.q()) {
            return Err(BfvError::Format(format!(
                "coefficient {bad} not below q = {}",
                params.q()
            )));
        }
        polys.push(RingPoly::from_coeffs(params.ring(), coeffs)?);
    }
    Ok(polys)
}

fn expect_count(polys: &[RingPoly], n: usize) -> Result<(), BfvError> {
    if polys.len() != n {
        return Err(BfvError::Format(format!(
            "expected {n} polynomials, found {}",
            polys.len()
        )));
    }
    Ok(())
}

pub fn write_secret_key<W: Write>(w: &mut W, sk: &SecretKey) -> Result<(), BfvError> {
    write_header(w, ObjectKind::SecretKey, sk.params())?;
    write_polys(w, &[sk.poly()])
}

pub fn read_secret_key<R: Read>(r: &mut R) -> Result<SecretKey, BfvError> {
    let params = read_header(r, ObjectKind::SecretKey)?;
    let mut polys = read_polys(r, &params)?;
    expect_count(&polys, 1)?;
    Ok(SecretKey::from_poly(params, polys.remove(0)))
}

pub fn write_public_key<W: Write>(w: &mut W, pk: &PublicKey) -> Result<(), BfvError> {
    write_header(w, ObjectKind::PublicKey, pk.params())?;
    let (p0, p1) = pk.polys();
    write_polys(w, &[p0, p1])
}

pub fn read_public_key<R: Read>(r: &mut R) -> Result<PublicKey, BfvError> {
    let params = read_header(r, ObjectKind::PublicKey)?;
    let polys = read_polys(r, &params)?;
    expect_count(&polys, 2)?;
    let [p0, p1]: [RingPoly; 2] = polys.try_into().expect("two polynomials");
    Ok(PublicKey::from_polys(params, p0, p1))
}

pub fn write_ciphertext<W: Write>(w: &mut W, ct: &Ciphertext) -> Result<(), BfvError> {
    write_header(w, ObjectKind::Ciphertext, ct.params())?;
    w.write_all(&ct.mult_depth().to_le_bytes())?;
    let parts: Vec<&RingPoly> = ct.parts().iter().collect();
    write_polys(w, &parts)
}

pub fn read_ciphertext<R: Read>(r: &mut R) -> Result<Ciphertext, BfvError> {
    let params = read_header(r, ObjectKind::Ciphertext)?;
    let depth = read_u32(r)?;
    let polys = read_polys(r, &params)?;
    Ciphertext::try_from_parts(params, polys, depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bfv::keygen;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn round_trips() {
        let p = BfvParams::standard(1024, 100, 128).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let kp = keygen(&p, &mut rng);
        let ct = kp.public.encrypt(-18, &mut rng).unwrap();

        let mut buf = Vec::new();
        write_secret_key(&mut buf, &kp.secret).unwrap();
        let sk = read_secret_key(&mut buf.as_slice()).unwrap();
        assert_eq!(sk.poly(), kp.secret.poly());

        buf.clear();
        write_public_key(&mut buf, &kp.public).unwrap();
        let pk = read_public_key(&mut buf.as_slice()).unwrap();
        assert_eq!(pk.polys(), kp.public.polys());

        buf.clear();
        write_ciphertext(&mut buf, &ct).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        assert_eq!(buf.len(), 8 + 2 + 4 + 8 + 8 + 4 + 4 + 2 * (4 + 1024 * 8));
        let back = read_ciphertext(&mut buf.as_slice()).unwrap();
        assert_eq!(back, ct);
        assert_eq!(sk.decrypt(&back).unwrap(), -18);
    }

    #[test]
    fn rejects_malformed_input() {
        let p = BfvParams::standard(1024, 100, 128).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let kp = keygen(&p, &mut rng);
        let ct = kp.public.encrypt(1, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_ciphertext(&mut buf, &ct).unwrap();

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_ciphertext(&mut bad.as_slice()), Err(BfvError::Format(_))));
        assert!(matches!(
            read_ciphertext(&mut &buf[..buf.len() - 3]),
            Err(BfvError::Format(_))
        ));
        assert!(read_public_key(&mut buf.as_slice()).is_err());

        // A coefficient >= q is not a valid residue.
        let mut big = buf.clone();
        let off = buf.len() - 8;
        big[off..].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(read_ciphertext(&mut big.as_slice()).is_err());
    }
}
