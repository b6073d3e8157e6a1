//! Private market evaluation: is total supply below total demand?
//!
//! Round 1 blinds the demand total under a random seller's key; round 2
//! blinds the supply total under a random buyer's key. Both totals carry the
//! same nonce sum, so comparing them with the garbled comparator decides
//! `E_s < E_b` without revealing either total.

use num_bigint::BigUint;

use super::agent::{to_u128, Observation};
use super::message::{Payload, Phase};
use super::nonce::sample_blinding_nonce;
use super::session::{unexpected, Ctx, Sink};
use crate::compare::{ComparisonEvaluator, ComparisonGarbler};
use crate::error::Result;
use crate::market::{AgentId, MarketKind, Role};
use crate::runtime::{Coalition, SelectionPurpose};

impl Ctx<'_> {
    pub(crate) fn private_market_evaluation(&mut self) -> Result<MarketKind> {
        let sellers = self.sellers.clone();
        let buyers = self.buyers.clone();
        let h_r1 = self.select(&sellers, SelectionPurpose::Hr1)?;
        let h_r2 = self.select(&buyers, SelectionPurpose::Hr2)?;
        self.selections.h_r1 = Some(h_r1);
        self.selections.h_r2 = Some(h_r2);

        let bits = self.cfg.nonce_bits;
        for id in sellers.iter().chain(buyers.iter()) {
            let a = self.agent(id)?;
            a.nonce = Some(sample_blinding_nonce(&mut a.rng, id, 1, bits));
        }

        self.blinded_round(Phase::EvalRound1, h_r1, &buyers, &sellers, Role::Buyer)?;
        self.blinded_round(Phase::EvalRound2, h_r2, &sellers, &buyers, Role::Seller)?;
        let r_b = self.agents[&h_r1].blinded.unwrap_or_default();
        let r_s = self.agents[&h_r2].blinded.unwrap_or_default();

        // H_r2 evaluates on R_s, H_r1 garbles on R_b; output [R_s < R_b].
        let width = self.cfg.comparator_width;
        let evaluator = ComparisonEvaluator::new(r_s, width)?;
        let queries = {
            let a = self.agent(h_r2)?;
            let keys = a.keys.clone();
            evaluator.queries(&keys, &mut a.rng)?
        };
        self.send(Phase::Compare, h_r2, h_r1, Payload::OtQueries(queries))?;

        let queries = match self.recv(Phase::Compare, h_r1, h_r2)? {
            Payload::OtQueries(q) => q,
            other => return Err(unexpected(Phase::Compare, &other)),
        };
        let evaluator_pk = self.key_of(h_r2)?;
        let reply = {
            let a = self.agent(h_r1)?;
            let garbler = ComparisonGarbler::new(r_b, width, &mut a.rng)?;
            garbler.reply(evaluator_pk, &queries, &mut a.rng)?
        };
        self.send(Phase::Compare, h_r1, h_r2, Payload::GarblerReply(reply))?;

        let reply = match self.recv(Phase::Compare, h_r2, h_r1)? {
            Payload::GarblerReply(r) => r,
            other => return Err(unexpected(Phase::Compare, &other)),
        };
        let general = {
            let a = self.agent(h_r2)?;
            let out = evaluator.finish(&a.keys, &reply)?;
            a.observe(Observation::WireLabels {
                count: reply.ot_responses.len(),
            });
            a.observe(Observation::ComparisonResult(out));
            out
        };
        self.send(Phase::Compare, h_r2, h_r1, Payload::ComparisonResult(general))?;
        match self.recv(Phase::Compare, h_r1, h_r2)? {
            Payload::ComparisonResult(b) => self.agent(h_r1)?.observe(Observation::ComparisonResult(b)),
            other => return Err(unexpected(Phase::Compare, &other)),
        }

        let kind = if general {
            MarketKind::General
        } else {
            MarketKind::Extreme
        };
        self.announce_kind(h_r2, &buyers, kind)?;
        self.announce_kind(h_r1, &sellers, kind)?;
        Ok(kind)
    }

    /// Each selected agent tells its own coalition the market kind.
    fn announce_kind(&mut self, from: AgentId, coalition: &Coalition, kind: MarketKind) -> Result<()> {
        self.agent(from)?.kind = Some(kind);
        self.agent(from)?.observe(Observation::MarketKind(kind));
        self.broadcast(Phase::Compare, from, coalition, Payload::MarketKind(kind))?;
        for id in coalition.without(from).iter() {
            match self.recv(Phase::Compare, id, from)? {
                Payload::MarketKind(k) => {
                    let a = self.agent(id)?;
                    a.kind = Some(k);
                    a.observe(Observation::MarketKind(k));
                }
                other => return Err(unexpected(Phase::Compare, &other)),
            }
        }
        Ok(())
    }

    /// One blinding round. The `valued` coalition contributes `|sn| + r`, the
    /// other coalition (minus the decryptor) contributes `r`; the decryptor
    /// adds its own nonce after decryption.
    fn blinded_round(
        &mut self,
        phase: Phase,
        decryptor: AgentId,
        valued: &Coalition,
        others: &Coalition,
        valued_role: Role,
    ) -> Result<()> {
        let key = self.key_of(decryptor)?;
        let rest = others.without(decryptor);
        let fixed = self.cfg.fixed;
        let (last, _) = self.ring_aggregate(phase, &[valued, &rest], key, Sink::Agent(decryptor), |a, _| {
            let r = a.nonce_value()?;
            if a.role == valued_role {
                let mag = fixed.to_bounded_magnitude(a.sn.abs())?;
                Ok(BigUint::from(mag) + BigUint::from(r))
            } else {
                Ok(BigUint::from(r))
            }
        })?;
        let c = self.recv_ciphertext(phase, decryptor, last)?;
        let a = self.agent(decryptor)?;
        let blinded = to_u128(&a.decrypt(&c)?)? + u128::from(a.nonce_value()?);
        a.blinded = Some(blinded);
        a.observe(Observation::BlindedAggregate { phase, value: blinded });
        Ok(())
    }
}
