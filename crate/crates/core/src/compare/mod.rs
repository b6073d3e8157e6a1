//! Two-party secure comparison of blinded aggregates.
//!
//! The garbler holds `b`, the evaluator holds `a`; both learn `[a < b]`.
//! Message flow:
//!
//! 1. evaluator -> garbler: one OT query per input bit (`Enc_{pk_E}(a_i)`)
//! 2. garbler -> evaluator: garbled circuit, garbler input labels, OT replies
//! 3. evaluator -> garbler: the decoded output bit

mod garble;
mod ot;

pub use garble::{
    check_fits, garble_lt_circuit, GarbledCircuit, GarbledComparator, WireLabel, WireLabelPair,
    LABEL_BYTES, MAX_WIDTH,
};
pub use ot::{oblivious_transfer, ot_finish, ot_query, ot_respond};

use rand::RngCore;

use crate::crypto::{Ciphertext, KeyPair, PublicKey};
use crate::error::{PemError, Result};

pub const DEFAULT_COMPARATOR_WIDTH: u32 = 64;

/// Second message of the comparison.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GarblerReply {
    pub circuit: GarbledCircuit,
    pub garbler_labels: Vec<WireLabel>,
    pub ot_responses: Vec<Ciphertext>,
}

pub struct ComparisonGarbler {
    comparator: GarbledComparator,
    value: u128,
}

impl ComparisonGarbler {
    pub fn new<R: RngCore + ?Sized>(value: u128, width: u32, rng: &mut R) -> Result<Self> {
        let comparator = garble_lt_circuit(width, rng)?;
        check_fits(value, width)?;
        Ok(ComparisonGarbler { comparator, value })
    }

    pub fn reply<R: RngCore + ?Sized>(
        &self,
        evaluator_pk: &PublicKey,
        queries: &[Ciphertext],
        rng: &mut R,
    ) -> Result<GarblerReply> {
        let pairs = self.comparator.evaluator_label_pairs();
        if queries.len() != pairs.len() {
            return Err(PemError::Protocol(format!(
                "expected {} OT queries, got {}",
                pairs.len(),
                queries.len()
            )));
        }
        let ot_responses = pairs
            .iter()
            .zip(queries)
            .map(|(pair, q)| ot_respond(evaluator_pk, q, &pair.label0, &pair.label1, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(GarblerReply {
            circuit: self.comparator.circuit().clone(),
            garbler_labels: self.comparator.garbler_input_labels(self.value)?,
            ot_responses,
        })
    }
}

pub struct ComparisonEvaluator {
    value: u128,
    width: u32,
}

impl ComparisonEvaluator {
    pub fn new(value: u128, width: u32) -> Result<Self> {
        if width == 0 || width > MAX_WIDTH {
            return Err(PemError::Config(format!("comparator width {width} outside [1, {MAX_WIDTH}]")));
        }
        check_fits(value, width)?;
        Ok(ComparisonEvaluator { value, width })
    }

    pub fn queries<R: RngCore + ?Sized>(&self, keys: &KeyPair, rng: &mut R) -> Result<Vec<Ciphertext>> {
        (0..self.width)
            .map(|i| ot_query(&keys.public, ((self.value >> i) & 1) as u8, rng))
            .collect()
    }

    /// Recovers the input labels from the OT replies and evaluates the circuit.
    pub fn finish(&self, keys: &KeyPair, reply: &GarblerReply) -> Result<bool> {
        if reply.circuit.width != self.width {
            return Err(PemError::Protocol("comparator width mismatch".into()));
        }
        let labels = reply
            .ot_responses
            .iter()
            .map(|c| ot_finish(&keys.private, c))
            .collect::<Result<Vec<_>>>()?;
        reply.circuit.evaluate(&labels, &reply.garbler_labels)
    }
}

/// In-process run of the full comparison; returns `[a < b]` together with the
/// messages each side received.
pub fn secure_less_than<R: RngCore + ?Sized>(
    a: u128,
    b: u128,
    width: u32,
    evaluator_keys: &KeyPair,
    rng: &mut R,
) -> Result<(bool, ComparisonViews)> {
    let evaluator = ComparisonEvaluator::new(a, width)?;
    let garbler = ComparisonGarbler::new(b, width, rng)?;
    let queries = evaluator.queries(evaluator_keys, rng)?;
    let reply = garbler.reply(&evaluator_keys.public, &queries, rng)?;
    let out = evaluator.finish(evaluator_keys, &reply)?;
    Ok((
        out,
        ComparisonViews {
            garbler_received: queries,
            evaluator_received: reply,
            result: out,
        },
    ))
}

/// What each party saw during one comparison.
#[derive(Clone, Debug)]
pub struct ComparisonViews {
    pub garbler_received: Vec<Ciphertext>,
    pub evaluator_received: GarblerReply,
    pub result: bool,
}
