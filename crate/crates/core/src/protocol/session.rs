use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::agent::{Agent, Observation};
use super::message::{Payload, Phase, ProtocolMessage, Recipient};
use super::ProtocolConfig;
use crate::crypto::{keygen, Ciphertext, KeyPair, PublicKey};
use crate::error::{PemError, Result};
use crate::market::{AgentId, AgentProfile, MarketKind, MarketOutcome, Role, WindowParams};
use crate::runtime::{
    derive_seed, ring_successor, seeded_selection, Coalition, SelectionPurpose, SendMode, TranscriptEntry,
    Transport, WindowTraffic,
};

const KEY_LABEL: u64 = 0x6b6579;
const DRIVER_LABEL: u64 = u64::MAX;

/// Agents selected for the special roles of one window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Selections {
    pub h_r1: Option<AgentId>,
    pub h_r2: Option<AgentId>,
    pub h_b: Option<AgentId>,
    pub h_s: Option<AgentId>,
}

#[derive(Clone, Debug)]
pub struct WindowRun {
    pub outcome: MarketOutcome,
    pub traffic: WindowTraffic,
    pub selections: Selections,
    pub sellers: Coalition,
    pub buyers: Coalition,
    pub views: BTreeMap<AgentId, Vec<Observation>>,
    /// Empty unless the network records transcripts.
    pub transcript: Vec<TranscriptEntry>,
}

/// Key material and transport for a fixed agent population. Every agent holds
/// its own key pair and every public key.
pub struct PemNetwork {
    config: ProtocolConfig,
    key_bits: u32,
    keys: BTreeMap<AgentId, Arc<KeyPair>>,
    directory: BTreeMap<AgentId, PublicKey>,
    transport: Transport,
}

impl PemNetwork {
    pub fn setup(
        agents: &[AgentId],
        key_bits: u32,
        master_seed: u64,
        config: ProtocolConfig,
        record_transcripts: bool,
    ) -> Result<Self> {
        config.validate(agents.len(), key_bits)?;
        let transport = Transport::new(agents.iter().copied(), record_transcripts)?;
        let mut keys = BTreeMap::new();
        for id in agents {
            let kp = keygen(key_bits, derive_seed(master_seed, &[KEY_LABEL, u64::from(id.0)]))?;
            keys.insert(*id, Arc::new(kp));
        }
        let directory = keys.iter().map(|(id, kp)| (*id, kp.public.clone())).collect();
        Ok(PemNetwork {
            config,
            key_bits,
            keys,
            directory,
            transport,
        })
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }

    pub fn key_bits(&self) -> u32 {
        self.key_bits
    }

    pub fn agents(&self) -> Vec<AgentId> {
        self.keys.keys().copied().collect()
    }

    pub fn public_key(&self, id: AgentId) -> Option<&PublicKey> {
        self.directory.get(&id)
    }

    /// Runs one trading window. Agents without a profile sit the window out.
    pub fn run_window(&self, profiles: &[AgentProfile], w: &WindowParams, seed: u64) -> Result<WindowRun> {
        w.validate()?;
        let mut agents = BTreeMap::new();
        for p in profiles {
            p.validate()?;
            let keys = self.keys.get(&p.agent_id).ok_or(PemError::Routing(p.agent_id))?;
            let agent = Agent::new(p.clone(), keys.clone(), derive_seed(seed, &[u64::from(p.agent_id.0)]));
            if agents.insert(p.agent_id, agent).is_some() {
                return Err(PemError::Integrity(format!("duplicate profile for {}", p.agent_id)));
            }
        }
        self.transport.begin_window(w.t)?;
        let mut ctx = Ctx {
            t: w.t,
            params: *w,
            cfg: self.config,
            transport: &self.transport,
            directory: &self.directory,
            driver: ChaCha20Rng::seed_from_u64(derive_seed(seed, &[DRIVER_LABEL])),
            sellers: agents.values().filter(|a| a.role == Role::Seller).map(|a| a.id).collect(),
            buyers: agents.values().filter(|a| a.role == Role::Buyer).map(|a| a.id).collect(),
            agents,
            selections: Selections::default(),
        };
        let outcome = match ctx.execute() {
            Ok(o) => o,
            Err(e) => {
                self.transport.abort_window();
                self.transport.take_transcript();
                return Err(e);
            }
        };
        let traffic = self.transport.end_window()?;
        Ok(WindowRun {
            outcome,
            traffic,
            selections: ctx.selections,
            views: ctx.agents.iter_mut().map(|(id, a)| (*id, std::mem::take(&mut a.view))).collect(),
            sellers: ctx.sellers,
            buyers: ctx.buyers,
            transcript: self.transport.take_transcript(),
        })
    }
}

/// Executes a single window on `network`.
pub fn run_pem_window(
    network: &PemNetwork,
    profiles: &[AgentProfile],
    w: &WindowParams,
    rng_seed: u64,
) -> Result<MarketOutcome> {
    Ok(network.run_window(profiles, w, rng_seed)?.outcome)
}

/// Where the last member of a ring sends the aggregate.
pub(crate) enum Sink<'a> {
    Agent(AgentId),
    Broadcast(&'a Coalition),
}

pub(crate) struct Ctx<'n> {
    pub t: u32,
    pub params: WindowParams,
    pub cfg: ProtocolConfig,
    pub transport: &'n Transport,
    pub directory: &'n BTreeMap<AgentId, PublicKey>,
    pub driver: ChaCha20Rng,
    pub agents: BTreeMap<AgentId, Agent>,
    pub sellers: Coalition,
    pub buyers: Coalition,
    pub selections: Selections,
}

impl<'n> Ctx<'n> {
    pub fn agent(&mut self, id: AgentId) -> Result<&mut Agent> {
        self.agents.get_mut(&id).ok_or(PemError::Routing(id))
    }

    pub fn key_of(&self, id: AgentId) -> Result<&'n PublicKey> {
        self.directory.get(&id).ok_or(PemError::Routing(id))
    }

    pub fn select(&mut self, coalition: &Coalition, purpose: SelectionPurpose) -> Result<AgentId> {
        seeded_selection(coalition, purpose, &mut self.driver)
    }

    pub fn send(&self, phase: Phase, from: AgentId, to: AgentId, payload: Payload) -> Result<()> {
        let msg = ProtocolMessage::new(self.t, phase, from, Recipient::Agent(to), payload);
        self.transport.send(&msg, SendMode::Unicast)?;
        Ok(())
    }

    pub fn broadcast(&self, phase: Phase, from: AgentId, to: &Coalition, payload: Payload) -> Result<()> {
        if to.without(from).is_empty() {
            return Ok(());
        }
        let msg = ProtocolMessage::new(self.t, phase, from, Recipient::Broadcast, payload);
        self.transport.send(&msg, SendMode::Broadcast(to.members()))?;
        Ok(())
    }

    pub fn recv(&self, phase: Phase, at: AgentId, from: AgentId) -> Result<Payload> {
        Ok(self.transport.recv_from(at, from, phase)?.payload)
    }

    pub fn recv_ciphertext(&self, phase: Phase, at: AgentId, from: AgentId) -> Result<Ciphertext> {
        match self.recv(phase, at, from)? {
            Payload::Ciphertext(c) => Ok(c),
            other => Err(unexpected(phase, &other)),
        }
    }

    /// Ring aggregation under `key`: members of `segments` (in order, each
    /// ascending) add their encrypted contribution and forward; the last member
    /// sends to `sink`. Returns the last member and the final ciphertext.
    pub fn ring_aggregate<F>(
        &mut self,
        phase: Phase,
        segments: &[&Coalition],
        key: &PublicKey,
        sink: Sink<'_>,
        contribution: F,
    ) -> Result<(AgentId, Ciphertext)>
    where
        F: Fn(&Agent, &BigUint) -> Result<BigUint>,
    {
        let chain: Vec<(AgentId, usize)> = segments
            .iter()
            .enumerate()
            .flat_map(|(s, c)| c.iter().map(move |id| (id, s)))
            .collect();
        let mut prev: Option<AgentId> = None;
        let mut acc = None;
        for &(id, seg) in &chain {
            let incoming = match prev {
                Some(p) => Some(self.recv_ciphertext(phase, id, p)?),
                None => None,
            };
            let agent = self.agents.get_mut(&id).ok_or(PemError::Routing(id))?;
            let m = contribution(agent, key.modulus())?;
            let own = key.encrypt(&m, &mut agent.rng)?;
            let sum = match incoming {
                Some(c) => key.add(&c, &own)?,
                None => own,
            };
            let next = match ring_successor(id, segments[seg])? {
                Some(n) => Some(n),
                None => segments[seg + 1..].iter().find_map(|c| c.members().first().copied()),
            };
            match next {
                Some(n) => self.send(phase, id, n, Payload::Ciphertext(sum.clone()))?,
                None => match &sink {
                    Sink::Agent(to) => self.send(phase, id, *to, Payload::Ciphertext(sum.clone()))?,
                    Sink::Broadcast(c) => self.broadcast(phase, id, c, Payload::Ciphertext(sum.clone()))?,
                },
            }
            prev = Some(id);
            acc = Some(sum);
        }
        match (prev, acc) {
            (Some(last), Some(c)) => Ok((last, c)),
            _ => Err(PemError::DegenerateMarket(format!("empty ring in {phase}"))),
        }
    }

    fn execute(&mut self) -> Result<MarketOutcome> {
        let w = self.params;
        if self.sellers.is_empty() {
            let mut out = MarketOutcome::empty(self.t, MarketKind::GridOnly, w.grid_retail);
            for id in self.buyers.clone().iter() {
                let a = self.agent(id)?;
                a.ledger.grid_purchase = -a.sn;
                out.grid_purchases.insert(id, -a.sn);
            }
            return Ok(out);
        }
        if self.buyers.is_empty() {
            let mut out = MarketOutcome::empty(self.t, MarketKind::GridOnly, w.grid_buyback);
            for id in self.sellers.clone().iter() {
                let a = self.agent(id)?;
                a.ledger.grid_sale = a.sn;
                out.grid_sales.insert(id, a.sn);
            }
            return Ok(out);
        }

        let kind = self.private_market_evaluation()?;
        let price = match kind {
            MarketKind::General => self.private_pricing()?,
            _ => {
                for id in self.sellers.iter().chain(self.buyers.iter()).collect::<Vec<_>>() {
                    self.agent(id)?.price = Some(w.price_floor);
                }
                w.price_floor
            }
        };
        self.private_distribution(kind)?;

        let mut out = MarketOutcome::empty(self.t, kind, price);
        for id in self.buyers.iter() {
            let a = &self.agents[&id];
            out.allocations.extend(a.ledger.energy.iter().map(|(k, v)| (*k, *v)));
            out.payments.extend(a.ledger.payments.iter().map(|(k, v)| (*k, *v)));
            if kind == MarketKind::General {
                out.grid_purchases.insert(id, a.ledger.grid_purchase);
            }
        }
        if kind == MarketKind::Extreme {
            for id in self.sellers.iter() {
                out.grid_sales.insert(id, self.agents[&id].ledger.grid_sale);
            }
        }
        Ok(out)
    }
}

pub(crate) fn unexpected(phase: Phase, p: &Payload) -> PemError {
    PemError::Protocol(format!("unexpected {} payload in {phase}", p.name()))
}
