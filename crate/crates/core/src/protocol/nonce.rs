use rand::Rng;

use crate::market::AgentId;

/// Blinding nonce in fixed-point units. Never leaves its owner in plaintext.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlindingNonce {
    pub value: u64,
    pub owner: AgentId,
    /// Evaluation round in which it was drawn.
    pub round: u8,
}

pub fn sample_blinding_nonce<R: Rng + ?Sized>(rng: &mut R, owner: AgentId, round: u8, bits: u32) -> BlindingNonce {
    BlindingNonce {
        value: rng.gen_range(0..1u64 << bits),
        owner,
        round,
    }
}
