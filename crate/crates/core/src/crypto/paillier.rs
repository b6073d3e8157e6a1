//! Paillier cryptosystem with generator `g = N + 1` and CRT decryption.

use std::fmt;

use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use super::prime::random_prime;
use crate::error::{PemError, Result};

pub type KeyId = u64;

pub const SUPPORTED_KEY_BITS: [u32; 3] = [512, 1024, 2048];

#[derive(Clone, PartialEq, Eq)]
pub struct PublicKey {
    n: BigUint,
    n_squared: BigUint,
    key_id: KeyId,
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PublicKey")
            .field("key_id", &format_args!("{:#018x}", self.key_id))
            .field("bits", &self.n.bits())
            .finish()
    }
}

#[derive(Clone)]
pub struct PrivateKey {
    public: PublicKey,
    p: BigUint,
    q: BigUint,
    p_squared: BigUint,
    q_squared: BigUint,
    p_minus_one: BigUint,
    q_minus_one: BigUint,
    h_p: BigUint,
    h_q: BigUint,
    q_inv_p: BigUint,
}

impl fmt::Debug for PrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PrivateKey")
            .field("key_id", &format_args!("{:#018x}", self.public.key_id))
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Debug)]
pub struct KeyPair {
    pub public: PublicKey,
    pub private: PrivateKey,
    pub key_bits: u32,
}

#[derive(Clone, PartialEq, Eq)]
pub struct Ciphertext {
    value: BigUint,
    key_id: KeyId,
    width: u32,
}

impl fmt::Debug for Ciphertext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ciphertext(key={:#018x}, {} bytes)", self.key_id, self.width)
    }
}

fn key_id_for(n: &BigUint) -> KeyId {
    let digest = Sha256::digest(n.to_bytes_be());
    u64::from_be_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Paillier's L function: (x - 1) / d.
fn l_function(x: &BigUint, d: &BigUint) -> BigUint {
    (x - 1u8) / d
}

fn mod_inverse(a: &BigUint, m: &BigUint) -> Option<BigUint> {
    let a = BigInt::from_biguint(Sign::Plus, a.clone());
    let m = BigInt::from_biguint(Sign::Plus, m.clone());
    let ext = a.extended_gcd(&m);
    if !ext.gcd.is_one() {
        return None;
    }
    ext.x.mod_floor(&m).to_biguint()
}

/// Generates a key pair whose modulus has exactly `bits` bits.
///
/// The prime search is driven by a ChaCha20 stream seeded from `seed`, so the
/// same seed always reproduces the same key.
pub fn keygen(bits: u32, seed: u64) -> Result<KeyPair> {
    if !SUPPORTED_KEY_BITS.contains(&bits) {
        return Err(PemError::Config(format!(
            "unsupported key size {bits}; expected one of {SUPPORTED_KEY_BITS:?}"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let half = u64::from(bits / 2);
    loop {
        let p = random_prime(half, &mut rng);
        let q = random_prime(half, &mut rng);
        if p == q {
            continue;
        }
        let n = &p * &q;
        debug_assert_eq!(n.bits(), u64::from(bits));
        if !n.gcd(&((&p - 1u8) * (&q - 1u8))).is_one() {
            continue;
        }
        return Ok(KeyPair::from_primes(p, q, bits));
    }
}

impl KeyPair {
    fn from_primes(p: BigUint, q: BigUint, key_bits: u32) -> Self {
        let n = &p * &q;
        let public = PublicKey::from_modulus(n);
        let g = &public.n + 1u8;
        let p_squared = &p * &p;
        let q_squared = &q * &q;
        let p_minus_one = &p - 1u8;
        let q_minus_one = &q - 1u8;
        let h_p = mod_inverse(
            &l_function(&g.modpow(&p_minus_one, &p_squared), &p),
            &p,
        )
        .expect("h_p is invertible for distinct primes");
        let h_q = mod_inverse(
            &l_function(&g.modpow(&q_minus_one, &q_squared), &q),
            &q,
        )
        .expect("h_q is invertible for distinct primes");
        let q_inv_p = mod_inverse(&q, &p).expect("distinct primes are coprime");
        let private = PrivateKey {
            public: public.clone(),
            p,
            q,
            p_squared,
            q_squared,
            p_minus_one,
            q_minus_one,
            h_p,
            h_q,
            q_inv_p,
        };
        KeyPair {
            public,
            private,
            key_bits,
        }
    }

    pub fn key_id(&self) -> KeyId {
        self.public.key_id
    }
}

impl PublicKey {
    pub fn from_modulus(n: BigUint) -> Self {
        let n_squared = &n * &n;
        let key_id = key_id_for(&n);
        PublicKey {
            n,
            n_squared,
            key_id,
        }
    }

    pub fn modulus(&self) -> &BigUint {
        &self.n
    }

    pub fn key_id(&self) -> KeyId {
        self.key_id
    }

    /// Serialized ciphertext width in bytes (the byte length of N^2).
    pub fn ciphertext_width(&self) -> u32 {
        self.n_squared.bits().div_ceil(8) as u32
    }

    fn check(&self, c: &Ciphertext) -> Result<()> {
        if c.key_id != self.key_id {
            return Err(PemError::KeyMismatch {
                expected: self.key_id,
                found: c.key_id,
            });
        }
        Ok(())
    }

    fn wrap(&self, value: BigUint) -> Ciphertext {
        Ciphertext {
            value,
            key_id: self.key_id,
            width: self.ciphertext_width(),
        }
    }

    fn random_unit<R: RngCore + ?Sized>(&self, rng: &mut R) -> BigUint {
        loop {
            let r = rng.gen_biguint_range(&BigUint::one(), &self.n);
            if r.gcd(&self.n).is_one() {
                return r;
            }
        }
    }

    pub fn encrypt<R: RngCore + ?Sized>(&self, m: &BigUint, rng: &mut R) -> Result<Ciphertext> {
        if *m >= self.n {
            return Err(PemError::Domain(
                "plaintext must lie in [0, N)".to_string(),
            ));
        }
        let r = self.random_unit(rng);
        // (1 + N)^m = 1 + mN (mod N^2)
        let gm = (m * &self.n + 1u8) % &self.n_squared;
        let rn = r.modpow(&self.n, &self.n_squared);
        Ok(self.wrap(gm * rn % &self.n_squared))
    }

    pub fn encrypt_u64<R: RngCore + ?Sized>(&self, m: u64, rng: &mut R) -> Result<Ciphertext> {
        self.encrypt(&BigUint::from(m), rng)
    }

    /// Homomorphic addition: the product of ciphertexts decrypts to the sum of
    /// plaintexts modulo N.
    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.wrap(&a.value * &b.value % &self.n_squared))
    }

    /// Homomorphic scalar multiplication via exponentiation: decrypts to `c * m mod N`.
    pub fn scalar_mul(&self, a: &Ciphertext, c: &BigInt) -> Result<Ciphertext> {
        self.check(a)?;
        let c = match c.to_biguint() {
            Some(c) => c,
            None => {
                return Err(PemError::Domain(
                    "scalar must be nonnegative; negate through the fixed-point encoding"
                        .to_string(),
                ))
            }
        };
        if c >= self.n {
            return Err(PemError::Domain("scalar must lie in [0, N)".to_string()));
        }
        Ok(self.wrap(a.value.modpow(&c, &self.n_squared)))
    }

    /// Multiplies in a fresh encryption of zero.
    pub fn rerandomize<R: RngCore + ?Sized>(&self, a: &Ciphertext, rng: &mut R) -> Result<Ciphertext> {
        self.check(a)?;
        let rn = self.random_unit(rng).modpow(&self.n, &self.n_squared);
        Ok(self.wrap(&a.value * rn % &self.n_squared))
    }

    /// Length-prefixed big-endian modulus.
    pub fn to_bytes(&self) -> Vec<u8> {
        let body = self.n.to_bytes_be();
        let mut out = Vec::with_capacity(4 + body.len());
        out.extend_from_slice(&(body.len() as u32).to_be_bytes());
        out.extend_from_slice(&body);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (body, rest) = take_prefixed(bytes)?;
        if !rest.is_empty() {
            return Err(PemError::Wire("trailing bytes after public key".into()));
        }
        let n = BigUint::from_bytes_be(body);
        if n.is_zero() {
            return Err(PemError::Wire("zero modulus".into()));
        }
        Ok(PublicKey::from_modulus(n))
    }
}

impl PrivateKey {
    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    pub fn key_id(&self) -> KeyId {
        self.public.key_id
    }

    pub fn decrypt(&self, c: &Ciphertext) -> Result<BigUint> {
        self.public.check(c)?;
        let m_p = l_function(
            &c.value.modpow(&self.p_minus_one, &self.p_squared),
            &self.p,
        ) * &self.h_p
            % &self.p;
        let m_q = l_function(
            &c.value.modpow(&self.q_minus_one, &self.q_squared),
            &self.q,
        ) * &self.h_q
            % &self.q;
        // CRT: m = m_q + q * ((m_p - m_q) * q^-1 mod p)
        let diff = (&m_p + &self.p - (&m_q % &self.p)) % &self.p;
        let h = diff * &self.q_inv_p % &self.p;
        Ok(m_q + h * &self.q)
    }
}

impl Ciphertext {
    pub fn key_id(&self) -> KeyId {
        self.key_id
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    /// Serialized size in bytes.
    pub fn encoded_len(&self) -> usize {
        8 + 4 + self.width as usize
    }

    /// `key_id (u64) | len (u32) | value`, big-endian, value left-padded to the
    /// key's ciphertext width.
    pub fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.key_id.to_be_bytes());
        out.extend_from_slice(&self.width.to_be_bytes());
        let body = self.value.to_bytes_be();
        let pad = (self.width as usize).saturating_sub(body.len());
        out.extend(std::iter::repeat_n(0u8, pad));
        out.extend_from_slice(&body);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.write_to(&mut out);
        out
    }

    /// Parses one ciphertext and returns the unread remainder.
    pub fn read_from(bytes: &[u8]) -> Result<(Self, &[u8])> {
        if bytes.len() < 8 {
            return Err(PemError::Wire("truncated ciphertext header".into()));
        }
        let key_id = u64::from_be_bytes(bytes[..8].try_into().expect("8 bytes"));
        let (body, rest) = take_prefixed(&bytes[8..])?;
        Ok((
            Ciphertext {
                value: BigUint::from_bytes_be(body),
                key_id,
                width: body.len() as u32,
            },
            rest,
        ))
    }
}

fn take_prefixed(bytes: &[u8]) -> Result<(&[u8], &[u8])> {
    if bytes.len() < 4 {
        return Err(PemError::Wire("truncated length prefix".into()));
    }
    let len = u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
    let rest = &bytes[4..];
    if rest.len() < len {
        return Err(PemError::Wire(format!(
            "length prefix {len} exceeds remaining {} bytes",
            rest.len()
        )));
    }
    Ok(rest.split_at(len))
}
