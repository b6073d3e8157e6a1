//! `ProtocolMessage` and its wire format.
//!
//! Header (13 bytes, big-endian): window u32, phase u8, sender u16,
//! recipient u16 (`0xFFFF` = coalition broadcast), payload length u32.
//! The payload starts with a one-byte tag.

use std::fmt;

use crate::compare::{GarbledCircuit, GarblerReply, WireLabel, LABEL_BYTES};
use crate::crypto::Ciphertext;
use crate::error::{PemError, Result};
use crate::market::{AgentId, MarketKind};
use crate::wire::Reader;

pub const HEADER_LEN: usize = 13;
pub const BROADCAST: u16 = 0xFFFF;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Phase {
    EvalRound1 = 0,
    EvalRound2 = 1,
    Compare = 2,
    PricingK = 3,
    PricingDenom = 4,
    PriceBroadcast = 5,
    DistAggregate = 6,
    DistRatio = 7,
    DistRatioBroadcast = 8,
    EnergyRoute = 9,
    Payment = 10,
}

/// Which of the three sub-protocols a phase belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Evaluation,
    Pricing,
    Distribution,
}

impl Phase {
    pub const ALL: [Phase; 11] = [
        Phase::EvalRound1,
        Phase::EvalRound2,
        Phase::Compare,
        Phase::PricingK,
        Phase::PricingDenom,
        Phase::PriceBroadcast,
        Phase::DistAggregate,
        Phase::DistRatio,
        Phase::DistRatioBroadcast,
        Phase::EnergyRoute,
        Phase::Payment,
    ];

    pub fn from_u8(v: u8) -> Result<Phase> {
        Phase::ALL
            .get(v as usize)
            .copied()
            .ok_or_else(|| PemError::Wire(format!("unknown phase {v}")))
    }

    pub fn stage(&self) -> Stage {
        match self {
            Phase::EvalRound1 | Phase::EvalRound2 | Phase::Compare => Stage::Evaluation,
            Phase::PricingK | Phase::PricingDenom | Phase::PriceBroadcast => Stage::Pricing,
            _ => Stage::Distribution,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Phase::EvalRound1 => "eval-round1",
            Phase::EvalRound2 => "eval-round2",
            Phase::Compare => "compare",
            Phase::PricingK => "pricing-k",
            Phase::PricingDenom => "pricing-denom",
            Phase::PriceBroadcast => "price-broadcast",
            Phase::DistAggregate => "dist-aggregate",
            Phase::DistRatio => "dist-ratio",
            Phase::DistRatioBroadcast => "dist-ratio-broadcast",
            Phase::EnergyRoute => "energy-route",
            Phase::Payment => "payment",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Recipient {
    Agent(AgentId),
    Broadcast,
}

impl Recipient {
    fn to_wire(self) -> u16 {
        match self {
            Recipient::Agent(id) => id.0,
            Recipient::Broadcast => BROADCAST,
        }
    }

    fn from_wire(v: u16) -> Self {
        if v == BROADCAST {
            Recipient::Broadcast
        } else {
            Recipient::Agent(AgentId(v))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Ciphertext(Ciphertext),
    /// Ciphertext raised to a scaled reciprocal, with the public scale factor.
    ScaledCiphertext { ciphertext: Ciphertext, scale: u64 },
    OtQueries(Vec<Ciphertext>),
    GarblerReply(GarblerReply),
    ComparisonResult(bool),
    MarketKind(MarketKind),
    /// Fixed-point price (value * scale).
    Price { fixed: i64, scale: u64 },
    Ratios(Vec<(AgentId, f64)>),
    Allocation { seller: AgentId, buyer: AgentId, energy: f64 },
    Payment { buyer: AgentId, seller: AgentId, amount: f64 },
}

mod tag {
    pub const CIPHERTEXT: u8 = 1;
    pub const SCALED: u8 = 2;
    pub const OT_QUERIES: u8 = 3;
    pub const GARBLER_REPLY: u8 = 4;
    pub const RESULT: u8 = 5;
    pub const KIND: u8 = 6;
    pub const PRICE: u8 = 7;
    pub const RATIOS: u8 = 8;
    pub const ALLOCATION: u8 = 9;
    pub const PAYMENT: u8 = 10;
}

fn kind_code(k: MarketKind) -> u8 {
    match k {
        MarketKind::General => 0,
        MarketKind::Extreme => 1,
        MarketKind::GridOnly => 2,
    }
}

fn write_ciphertexts(out: &mut Vec<u8>, cs: &[Ciphertext]) {
    out.extend_from_slice(&(cs.len() as u32).to_be_bytes());
    for c in cs {
        c.write_to(out);
    }
}

fn read_ciphertexts(cur: &mut Reader<'_>) -> Result<Vec<Ciphertext>> {
    let count = cur.u32()? as usize;
    let mut out = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let (c, rest) = Ciphertext::read_from(cur.remaining())?;
        cur.set(rest);
        out.push(c);
    }
    Ok(out)
}

impl Payload {
    pub fn name(&self) -> &'static str {
        match self {
            Payload::Ciphertext(_) => "ciphertext",
            Payload::ScaledCiphertext { .. } => "scaled-ciphertext",
            Payload::OtQueries(_) => "ot-queries",
            Payload::GarblerReply(_) => "garbler-reply",
            Payload::ComparisonResult(_) => "comparison-result",
            Payload::MarketKind(_) => "market-kind",
            Payload::Price { .. } => "price",
            Payload::Ratios(_) => "ratios",
            Payload::Allocation { .. } => "allocation",
            Payload::Payment { .. } => "payment",
        }
    }

    /// Every ciphertext carried by the payload.
    pub fn ciphertexts(&self) -> Vec<&Ciphertext> {
        match self {
            Payload::Ciphertext(c) => vec![c],
            Payload::ScaledCiphertext { ciphertext, .. } => vec![ciphertext],
            Payload::OtQueries(cs) => cs.iter().collect(),
            Payload::GarblerReply(r) => r.ot_responses.iter().collect(),
            _ => Vec::new(),
        }
    }

    pub fn write_to(&self, out: &mut Vec<u8>) {
        match self {
            Payload::Ciphertext(c) => {
                out.push(tag::CIPHERTEXT);
                c.write_to(out);
            }
            Payload::ScaledCiphertext { ciphertext, scale } => {
                out.push(tag::SCALED);
                ciphertext.write_to(out);
                out.extend_from_slice(&scale.to_be_bytes());
            }
            Payload::OtQueries(cs) => {
                out.push(tag::OT_QUERIES);
                write_ciphertexts(out, cs);
            }
            Payload::GarblerReply(r) => {
                out.push(tag::GARBLER_REPLY);
                r.circuit.write_to(out);
                out.extend_from_slice(&(r.garbler_labels.len() as u32).to_be_bytes());
                for l in &r.garbler_labels {
                    out.extend_from_slice(&l.0);
                }
                write_ciphertexts(out, &r.ot_responses);
            }
            Payload::ComparisonResult(b) => {
                out.push(tag::RESULT);
                out.push(u8::from(*b));
            }
            Payload::MarketKind(k) => {
                out.push(tag::KIND);
                out.push(kind_code(*k));
            }
            Payload::Price { fixed, scale } => {
                out.push(tag::PRICE);
                out.extend_from_slice(&fixed.to_be_bytes());
                out.extend_from_slice(&scale.to_be_bytes());
            }
            Payload::Ratios(rs) => {
                out.push(tag::RATIOS);
                out.extend_from_slice(&(rs.len() as u32).to_be_bytes());
                for (id, r) in rs {
                    out.extend_from_slice(&id.0.to_be_bytes());
                    out.extend_from_slice(&r.to_bits().to_be_bytes());
                }
            }
            Payload::Allocation {
                seller,
                buyer,
                energy,
            } => {
                out.push(tag::ALLOCATION);
                out.extend_from_slice(&seller.0.to_be_bytes());
                out.extend_from_slice(&buyer.0.to_be_bytes());
                out.extend_from_slice(&energy.to_bits().to_be_bytes());
            }
            Payload::Payment {
                buyer,
                seller,
                amount,
            } => {
                out.push(tag::PAYMENT);
                out.extend_from_slice(&buyer.0.to_be_bytes());
                out.extend_from_slice(&seller.0.to_be_bytes());
                out.extend_from_slice(&amount.to_bits().to_be_bytes());
            }
        }
    }

    pub fn read_from(bytes: &[u8]) -> Result<Payload> {
        let mut cur = Reader::new(bytes);
        let payload = match cur.u8()? {
            tag::CIPHERTEXT => {
                let (c, rest) = Ciphertext::read_from(cur.remaining())?;
                cur.set(rest);
                Payload::Ciphertext(c)
            }
            tag::SCALED => {
                let (ciphertext, rest) = Ciphertext::read_from(cur.remaining())?;
                cur.set(rest);
                Payload::ScaledCiphertext {
                    ciphertext,
                    scale: cur.u64()?,
                }
            }
            tag::OT_QUERIES => Payload::OtQueries(read_ciphertexts(&mut cur)?),
            tag::GARBLER_REPLY => {
                let (circuit, rest) = GarbledCircuit::read_from(cur.remaining())?;
                cur.set(rest);
                let count = cur.u32()? as usize;
                let mut garbler_labels = Vec::with_capacity(count.min(128));
                for _ in 0..count {
                    garbler_labels.push(WireLabel(cur.array::<LABEL_BYTES>()?));
                }
                let ot_responses = read_ciphertexts(&mut cur)?;
                Payload::GarblerReply(GarblerReply {
                    circuit,
                    garbler_labels,
                    ot_responses,
                })
            }
            tag::RESULT => Payload::ComparisonResult(match cur.u8()? {
                0 => false,
                1 => true,
                v => return Err(PemError::Wire(format!("bad comparison bit {v}"))),
            }),
            tag::KIND => Payload::MarketKind(match cur.u8()? {
                0 => MarketKind::General,
                1 => MarketKind::Extreme,
                2 => MarketKind::GridOnly,
                v => return Err(PemError::Wire(format!("bad market kind {v}"))),
            }),
            tag::PRICE => Payload::Price {
                fixed: cur.i64()?,
                scale: cur.u64()?,
            },
            tag::RATIOS => {
                let count = cur.u32()? as usize;
                let mut rs = Vec::with_capacity(count.min(4096));
                for _ in 0..count {
                    let id = AgentId(cur.u16()?);
                    rs.push((id, cur.f64()?));
                }
                Payload::Ratios(rs)
            }
            tag::ALLOCATION => Payload::Allocation {
                seller: AgentId(cur.u16()?),
                buyer: AgentId(cur.u16()?),
                energy: cur.f64()?,
            },
            tag::PAYMENT => Payload::Payment {
                buyer: AgentId(cur.u16()?),
                seller: AgentId(cur.u16()?),
                amount: cur.f64()?,
            },
            t => return Err(PemError::Wire(format!("unknown payload tag {t}"))),
        };
        if !cur.is_empty() {
            return Err(PemError::Wire("trailing payload bytes".into()));
        }
        Ok(payload)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolMessage {
    pub window: u32,
    pub phase: Phase,
    pub sender: AgentId,
    pub recipient: Recipient,
    pub payload: Payload,
}

impl ProtocolMessage {
    pub fn new(window: u32, phase: Phase, sender: AgentId, recipient: Recipient, payload: Payload) -> Self {
        ProtocolMessage {
            window,
            phase,
            sender,
            recipient,
            payload,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut body = Vec::new();
        self.payload.write_to(&mut body);
        let mut out = Vec::with_capacity(HEADER_LEN + body.len());
        out.extend_from_slice(&self.window.to_be_bytes());
        out.push(self.phase as u8);
        out.extend_from_slice(&self.sender.0.to_be_bytes());
        out.extend_from_slice(&self.recipient.to_wire().to_be_bytes());
        out.extend_from_slice(&(body.len() as u32).to_be_bytes());
        out.extend_from_slice(&body);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cur = Reader::new(bytes);
        let window = cur.u32()?;
        let phase = Phase::from_u8(cur.u8()?)?;
        let sender = AgentId(cur.u16()?);
        let recipient = Recipient::from_wire(cur.u16()?);
        let len = cur.u32()? as usize;
        let body = cur.take(len)?;
        if !cur.is_empty() {
            return Err(PemError::Wire("trailing bytes after payload".into()));
        }
        Ok(ProtocolMessage {
            window,
            phase,
            sender,
            recipient,
            payload: Payload::read_from(body)?,
        })
    }
}
