//! Simulated network: agent identity and ordering, FIFO transport, seeded
//! selection and bandwidth metering.

mod meter;
mod transport;

pub use meter::{bandwidth_report, BandwidthReport, PhaseTraffic, WindowTraffic, BYTES_PER_MB};
pub use transport::{DeliveryReceipt, SendMode, TranscriptEntry, Transport};

use std::fmt;

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::error::{PemError, Result};
use crate::market::AgentId;

/// A coalition, always sorted by ascending agent id without duplicates.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Coalition(Vec<AgentId>);

impl Coalition {
    pub fn new(mut ids: Vec<AgentId>) -> Self {
        ids.sort();
        ids.dedup();
        Coalition(ids)
    }

    pub fn members(&self) -> &[AgentId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: AgentId) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    pub fn last(&self) -> Option<AgentId> {
        self.0.last().copied()
    }

    pub fn without(&self, id: AgentId) -> Coalition {
        Coalition(self.0.iter().copied().filter(|a| *a != id).collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.0.iter().copied()
    }
}

impl FromIterator<AgentId> for Coalition {
    fn from_iter<I: IntoIterator<Item = AgentId>>(iter: I) -> Self {
        Coalition::new(iter.into_iter().collect())
    }
}

/// Next member in ascending order; `None` means `id` is last and forwards to
/// the phase sink.
pub fn ring_successor(id: AgentId, coalition: &Coalition) -> Result<Option<AgentId>> {
    let pos = coalition
        .0
        .binary_search(&id)
        .map_err(|_| PemError::Routing(id))?;
    Ok(coalition.0.get(pos + 1).copied())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SelectionPurpose {
    /// Seller that decrypts the blinded demand aggregate.
    Hr1,
    /// Buyer that decrypts the blinded supply aggregate.
    Hr2,
    /// Buyer that computes the price.
    Hb,
    /// Decryptor of the distribution ratios.
    Hs,
}

impl fmt::Display for SelectionPurpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionPurpose::Hr1 => "H_r1",
            SelectionPurpose::Hr2 => "H_r2",
            SelectionPurpose::Hb => "H_b",
            SelectionPurpose::Hs => "H_s",
        })
    }
}

pub fn seeded_selection<R: Rng + ?Sized>(
    coalition: &Coalition,
    purpose: SelectionPurpose,
    rng: &mut R,
) -> Result<AgentId> {
    if coalition.is_empty() {
        return Err(PemError::DegenerateMarket(format!("cannot select {purpose} from an empty coalition")));
    }
    Ok(coalition.0[rng.gen_range(0..coalition.len())])
}

/// Derives an independent 64-bit seed from a master seed and a label path.
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(b"pem-seed");
    h.update(master.to_be_bytes());
    for l in labels {
        h.update(l.to_be_bytes());
    }
    u64::from_be_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
}
