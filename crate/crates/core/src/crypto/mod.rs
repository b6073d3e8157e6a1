//! Additively homomorphic encryption and the fixed-point codec used to carry
//! signed reals through it.

mod fixed;
mod paillier;
mod prime;

pub use fixed::{FixedPointConfig, DEFAULT_SCALE, DEFAULT_VALUE_BITS};
pub use paillier::{keygen, Ciphertext, KeyId, KeyPair, PrivateKey, PublicKey, SUPPORTED_KEY_BITS};
pub use prime::{is_probable_prime, random_prime};
