//! The PEM protocols as per-agent state machines over the simulated transport.
//!
//! A window runs coalition formation, private market evaluation, private
//! pricing (general markets only) and private distribution, in that order.
//! Each phase is a barrier: no agent starts phase k+1 before phase k drained.

mod agent;
mod distribution;
mod evaluation;
mod message;
mod nonce;
mod pricing;
mod session;

pub use agent::{Ledger, Observation};
pub use message::{Payload, Phase, ProtocolMessage, Recipient, Stage, BROADCAST, HEADER_LEN};
pub use nonce::{sample_blinding_nonce, BlindingNonce};
pub use session::{run_pem_window, PemNetwork, Selections, WindowRun};

use crate::compare::{DEFAULT_COMPARATOR_WIDTH, MAX_WIDTH};
use crate::crypto::FixedPointConfig;
use crate::error::{PemError, Result};

pub const DEFAULT_RATIO_SCALE: u64 = 1_000_000;
pub const DEFAULT_NONCE_BITS: u32 = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProtocolConfig {
    pub fixed: FixedPointConfig,
    /// `K` in the reciprocal exponent `round(K / |sn_j|)`.
    pub ratio_scale: u64,
    pub nonce_bits: u32,
    pub comparator_width: u32,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            fixed: FixedPointConfig::default(),
            ratio_scale: DEFAULT_RATIO_SCALE,
            nonce_bits: DEFAULT_NONCE_BITS,
            comparator_width: DEFAULT_COMPARATOR_WIDTH,
        }
    }
}

/// Largest possible blinded aggregate: `n` magnitudes plus two nonces each.
pub fn blinded_sum_bound(n: usize, value_bits: u32, nonce_bits: u32) -> u128 {
    let n = n as u128;
    n * ((1u128 << value_bits) - 1) + 2 * n * ((1u128 << nonce_bits) - 1)
}

impl ProtocolConfig {
    /// Checks that `n` agents cannot overflow the comparator or the plaintext
    /// space of `key_bits` keys.
    pub fn validate(&self, n: usize, key_bits: u32) -> Result<()> {
        if self.ratio_scale == 0 {
            return Err(PemError::Config("ratio scale K must be positive".into()));
        }
        if self.comparator_width == 0 || self.comparator_width > MAX_WIDTH {
            return Err(PemError::Config(format!(
                "comparator width {} outside [1, {MAX_WIDTH}]",
                self.comparator_width
            )));
        }
        if self.nonce_bits == 0 || self.nonce_bits > 62 {
            return Err(PemError::Config(format!("nonce width {} outside [1, 62]", self.nonce_bits)));
        }
        let bound = blinded_sum_bound(n, self.fixed.value_bits, self.nonce_bits);
        let width = self.comparator_width.min(key_bits.saturating_sub(2));
        if width < 128 && bound >> width != 0 {
            return Err(PemError::Sizing(format!(
                "{n} agents with {}-bit values and {}-bit nonces overflow a {width}-bit comparison; resize nonces",
                self.fixed.value_bits, self.nonce_bits
            )));
        }
        Ok(())
    }
}
