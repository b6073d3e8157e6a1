//! 1-of-2 oblivious transfer from additively homomorphic encryption.
//!
//! The receiver sends `Enc(b)` under its own key. The sender answers with
//! `Enc(x0) * Enc(b)^(x1 - x0)`, which decrypts to `x0 + b (x1 - x0) = x_b`.
//! The sender only ever sees a ciphertext under a key it cannot open.

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::ToPrimitive;
use rand::RngCore;

use super::garble::WireLabel;
use crate::crypto::{Ciphertext, KeyPair, PrivateKey, PublicKey};
use crate::error::{PemError, Result};

fn check_modulus(pk: &PublicKey) -> Result<()> {
    if pk.modulus().bits() <= 129 {
        return Err(PemError::Config(
            "oblivious transfer needs a modulus wider than the 128-bit labels".into(),
        ));
    }
    Ok(())
}

/// Receiver's first message: an encryption of the choice bit.
pub fn ot_query<R: RngCore + ?Sized>(pk: &PublicKey, choice: u8, rng: &mut R) -> Result<Ciphertext> {
    if choice > 1 {
        return Err(PemError::Protocol(format!("choice must be 0 or 1, got {choice}")));
    }
    check_modulus(pk)?;
    pk.encrypt_u64(u64::from(choice), rng)
}

/// Sender's reply under the receiver's public key.
pub fn ot_respond<R: RngCore + ?Sized>(
    receiver_pk: &PublicKey,
    query: &Ciphertext,
    x0: &WireLabel,
    x1: &WireLabel,
    rng: &mut R,
) -> Result<Ciphertext> {
    check_modulus(receiver_pk)?;
    let n = BigInt::from_biguint(Sign::Plus, receiver_pk.modulus().clone());
    let a = BigInt::from(x0.to_u128());
    let b = BigInt::from(x1.to_u128());
    let diff = ((b - &a) % &n + &n) % &n;
    let shifted = receiver_pk.scalar_mul(query, &diff)?;
    let base = receiver_pk.encrypt(&BigUint::from(x0.to_u128()), rng)?;
    receiver_pk.add(&base, &shifted)
}

/// Receiver's output.
pub fn ot_finish(sk: &PrivateKey, response: &Ciphertext) -> Result<WireLabel> {
    let m = sk.decrypt(response)?;
    let v = m
        .to_u128()
        .ok_or_else(|| PemError::Protocol("transferred value exceeds label size".into()))?;
    Ok(WireLabel::from_u128(v))
}

/// Runs both sides in-process; returns the received message and the query the
/// sender saw.
pub fn oblivious_transfer<R: RngCore + ?Sized>(
    receiver: &KeyPair,
    messages: (&WireLabel, &WireLabel),
    choice: u8,
    rng: &mut R,
) -> Result<(WireLabel, Ciphertext)> {
    let query = ot_query(&receiver.public, choice, rng)?;
    let response = ot_respond(&receiver.public, &query, messages.0, messages.1, rng)?;
    Ok((ot_finish(&receiver.private, &response)?, query))
}
