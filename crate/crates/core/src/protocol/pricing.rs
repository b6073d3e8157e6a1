//! Private pricing: a random buyer learns only Σk and Σ(g + 1 + eps*b - b)
//! over the seller coalition and broadcasts the clamped price.

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use super::agent::Observation;
use super::message::{Payload, Phase};
use super::session::{unexpected, Ctx, Sink};
use crate::error::{PemError, Result};
use crate::market::{clamp_price, price_from_aggregates, AgentId, AgentProfile};
use crate::runtime::{Coalition, SelectionPurpose};

impl Ctx<'_> {
    pub(crate) fn private_pricing(&mut self) -> Result<f64> {
        let sellers = self.sellers.clone();
        let buyers = self.buyers.clone();
        let h_b = self.select(&buyers, SelectionPurpose::Hb)?;
        self.selections.h_b = Some(h_b);

        let sum_k = self.seller_aggregate(Phase::PricingK, h_b, &sellers, |p| p.preference)?;
        let sum_d = self.seller_aggregate(Phase::PricingDenom, h_b, &sellers, AgentProfile::price_denominator_term)?;

        let scale = self.cfg.fixed.scale;
        let p_hat = price_from_aggregates(sum_k, sum_d, self.params.grid_retail)?;
        let fixed = (clamp_price(p_hat, &self.params) * scale as f64)
            .round()
            .to_i64()
            .ok_or_else(|| PemError::Precision("price does not fit the fixed-point range".into()))?;
        let price = fixed as f64 / scale as f64;
        {
            let a = self.agent(h_b)?;
            a.price = Some(price);
            a.observe(Observation::Price(price));
        }

        let everyone: Coalition = sellers.iter().chain(buyers.iter()).collect();
        self.broadcast(Phase::PriceBroadcast, h_b, &everyone, Payload::Price { fixed, scale })?;
        for id in everyone.without(h_b).iter() {
            match self.recv(Phase::PriceBroadcast, id, h_b)? {
                Payload::Price { fixed, scale } => {
                    let p = fixed as f64 / scale as f64;
                    let a = self.agent(id)?;
                    a.price = Some(p);
                    a.observe(Observation::Price(p));
                }
                other => return Err(unexpected(Phase::PriceBroadcast, &other)),
            }
        }
        Ok(price)
    }

    /// Ring-aggregates one fixed-point seller quantity to `h_b`, which decrypts.
    fn seller_aggregate(
        &mut self,
        phase: Phase,
        h_b: AgentId,
        sellers: &Coalition,
        term: fn(&AgentProfile) -> f64,
    ) -> Result<f64> {
        let key = self.key_of(h_b)?;
        let fixed = self.cfg.fixed;
        let (last, _) = self.ring_aggregate(phase, &[sellers], key, Sink::Agent(h_b), |a, n: &BigUint| {
            fixed.encode(term(&a.profile), n)
        })?;
        let c = self.recv_ciphertext(phase, h_b, last)?;
        let a = self.agent(h_b)?;
        let value = fixed.decode(&a.decrypt(&c)?, a.public().modulus())?;
        a.observe(Observation::PricingAggregate { phase, value });
        Ok(value)
    }
}
