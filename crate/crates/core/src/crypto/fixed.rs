//! Fixed-point codec between signed reals and the Paillier plaintext group.
//!
//! A real `x` is scaled by `S`, rounded to the nearest integer and reduced
//! modulo `N`. Negative values land in the upper half of `[0, N)`, so sums of
//! encodings decode correctly as long as the true sum stays inside
//! `(-N/2, N/2)`.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{FromPrimitive, ToPrimitive};

use crate::error::{PemError, Result};

pub const DEFAULT_SCALE: u64 = 1_000_000;
pub const DEFAULT_VALUE_BITS: u32 = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FixedPointConfig {
    /// Multiplier applied before rounding.
    pub scale: u64,
    /// Bound on the magnitude of scaled protocol inputs (`|x| * S < 2^value_bits`).
    pub value_bits: u32,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig {
            scale: DEFAULT_SCALE,
            value_bits: DEFAULT_VALUE_BITS,
        }
    }
}

impl FixedPointConfig {
    pub fn new(scale: u64, value_bits: u32) -> Result<Self> {
        if scale == 0 {
            return Err(PemError::Config("fixed-point scale must be positive".into()));
        }
        if value_bits == 0 || value_bits > 62 {
            return Err(PemError::Config(format!(
                "value_bits must be in [1, 62], got {value_bits}"
            )));
        }
        Ok(FixedPointConfig { scale, value_bits })
    }

    /// Threshold separating positive from negative encodings.
    pub fn half_range(modulus: &BigUint) -> BigUint {
        modulus >> 1
    }

    /// `round(x * S)` as a signed integer, without any modulus.
    pub fn to_scaled(&self, x: f64) -> Result<BigInt> {
        if !x.is_finite() {
            return Err(PemError::Encoding(format!("non-finite value {x}")));
        }
        let scaled = (x * self.scale as f64).round();
        BigInt::from_f64(scaled)
            .ok_or_else(|| PemError::Encoding(format!("cannot scale {x}")))
    }

    /// Scaled magnitude as `u64`, enforcing the `value_bits` bound used to size
    /// blinded aggregates.
    pub fn to_bounded_magnitude(&self, x: f64) -> Result<u64> {
        let scaled = self.to_scaled(x)?;
        let magnitude = scaled.magnitude();
        if magnitude.bits() > u64::from(self.value_bits) {
            return Err(PemError::Sizing(format!(
                "|{x}| * {} needs {} bits, limit is {}",
                self.scale,
                magnitude.bits(),
                self.value_bits
            )));
        }
        Ok(magnitude.to_u64().expect("bounded by value_bits <= 62"))
    }

    pub fn encode(&self, x: f64, modulus: &BigUint) -> Result<BigUint> {
        let scaled = self.to_scaled(x)?;
        self.encode_integer(&scaled, modulus)
    }

    pub fn encode_integer(&self, v: &BigInt, modulus: &BigUint) -> Result<BigUint> {
        let half = Self::half_range(modulus);
        if *v.magnitude() >= half {
            return Err(PemError::Encoding(format!(
                "magnitude exceeds half range of a {}-bit modulus",
                modulus.bits()
            )));
        }
        let n = BigInt::from_biguint(Sign::Plus, modulus.clone());
        Ok(v.mod_floor(&n).to_biguint().expect("mod_floor is nonnegative"))
    }

    /// Signed integer represented by a residue (upper half is negative).
    pub fn decode_integer(&self, m: &BigUint, modulus: &BigUint) -> Result<BigInt> {
        if m >= modulus {
            return Err(PemError::Encoding("residue outside [0, N)".into()));
        }
        let half = Self::half_range(modulus);
        if *m < half {
            Ok(BigInt::from_biguint(Sign::Plus, m.clone()))
        } else {
            Ok(-BigInt::from_biguint(Sign::Plus, modulus - m))
        }
    }

    pub fn decode(&self, m: &BigUint, modulus: &BigUint) -> Result<f64> {
        let v = self.decode_integer(m, modulus)?;
        self.unscale(&v)
    }

    pub fn unscale(&self, v: &BigInt) -> Result<f64> {
        let (q, r) = v.div_mod_floor(&BigInt::from(self.scale));
        let whole = q
            .to_f64()
            .ok_or_else(|| PemError::Encoding("value too large for f64".into()))?;
        let frac = r.to_f64().expect("remainder below scale") / self.scale as f64;
        Ok(whole + frac)
    }
}
