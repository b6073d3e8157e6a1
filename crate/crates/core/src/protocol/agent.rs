use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::message::Phase;
use super::nonce::BlindingNonce;
use crate::crypto::{Ciphertext, KeyPair, PublicKey};
use crate::error::{PemError, Result};
use crate::market::{classify_role, net_energy, AgentId, AgentProfile, MarketKind, Role};

/// Something an agent learned in plaintext, either by decryption or from a
/// plaintext message.
#[derive(Clone, Debug, PartialEq)]
pub enum Observation {
    /// A decrypted blinded coalition aggregate.
    BlindedAggregate { phase: Phase, value: u128 },
    /// Wire labels recovered from the oblivious transfers.
    WireLabels { count: usize },
    ComparisonResult(bool),
    MarketKind(MarketKind),
    /// A decrypted pricing aggregate (Σk or Σ(g + 1 + eps*b - b)).
    PricingAggregate { phase: Phase, value: f64 },
    Price(f64),
    /// Decrypted `c * E` for one counterpart during distribution.
    ScaledInverse { from: AgentId, value: f64 },
    Ratios(Vec<(AgentId, f64)>),
    Allocation { seller: AgentId, buyer: AgentId, energy: f64 },
    Payment { buyer: AgentId, seller: AgentId, amount: f64 },
}

/// An agent's record of its own trades in the window.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Ledger {
    /// `(seller, buyer) -> kWh`
    pub energy: BTreeMap<(AgentId, AgentId), f64>,
    /// `(buyer, seller) -> cents`
    pub payments: BTreeMap<(AgentId, AgentId), f64>,
    pub grid_purchase: f64,
    pub grid_sale: f64,
}

pub(crate) struct Agent {
    pub id: AgentId,
    pub keys: Arc<KeyPair>,
    pub profile: AgentProfile,
    pub sn: f64,
    pub role: Role,
    pub rng: ChaCha20Rng,
    pub nonce: Option<BlindingNonce>,
    pub kind: Option<MarketKind>,
    pub price: Option<f64>,
    pub blinded: Option<u128>,
    /// Coalition total ciphertext shared during distribution.
    pub shared_total: Option<Ciphertext>,
    pub ratios: Option<Vec<(AgentId, f64)>>,
    pub ledger: Ledger,
    pub view: Vec<Observation>,
}

impl Agent {
    pub fn new(profile: AgentProfile, keys: Arc<KeyPair>, seed: u64) -> Self {
        let sn = net_energy(&profile);
        Agent {
            id: profile.agent_id,
            keys,
            role: classify_role(sn),
            sn,
            profile,
            rng: ChaCha20Rng::seed_from_u64(seed),
            nonce: None,
            kind: None,
            price: None,
            blinded: None,
            shared_total: None,
            ratios: None,
            ledger: Ledger::default(),
            view: Vec::new(),
        }
    }

    pub fn public(&self) -> &PublicKey {
        &self.keys.public
    }

    pub fn observe(&mut self, o: Observation) {
        self.view.push(o);
    }

    pub fn decrypt(&self, c: &Ciphertext) -> Result<BigUint> {
        self.keys.private.decrypt(c)
    }

    pub fn nonce_value(&self) -> Result<u64> {
        self.nonce
            .map(|n| n.value)
            .ok_or_else(|| PemError::Protocol(format!("{} has no blinding nonce", self.id)))
    }

    pub fn price(&self) -> Result<f64> {
        self.price
            .ok_or_else(|| PemError::Protocol(format!("{} has no price", self.id)))
    }
}

pub(crate) fn to_u128(m: &BigUint) -> Result<u128> {
    m.to_u128()
        .ok_or_else(|| PemError::Sizing("aggregate exceeds 128 bits".into()))
}
