//! Private distribution.
//!
//! The short side of the market ring-aggregates `Enc(E)` under a random
//! decryptor's key on the long side and shares it within its own coalition.
//! Each member `j` raises it to `c_j = round(K / |sn_j|)` and sends it to the
//! decryptor, who recovers `c_j * E ≈ K * E / |sn_j|` and so the ratio
//! `|sn_j| / E` without learning `E` or any `|sn_j|` on its own. The ratios
//! are then shared within the long side, which routes energy pro rata.
//!
//! General market: buyers are the ratio side, a seller decrypts, sellers
//! route `e_ij = ratio_j * sn_i` to buyers, buyers pay `p * e_ij`.
//! Extreme market: roles swap; buyers request `e_ij = ratio_i * |sn_j|` from
//! each seller and pay `p_l * e_ij`.

use num_bigint::{BigInt, BigUint};
use num_traits::ToPrimitive;

use super::agent::Observation;
use super::message::{Payload, Phase};
use super::session::{unexpected, Ctx, Sink};
use crate::error::{PemError, Result};
use crate::market::{AgentId, MarketKind};
use crate::runtime::{Coalition, SelectionPurpose};

/// `round_half_up(K / x)` where `x = mag / scale` is a fixed-point magnitude.
pub(crate) fn reciprocal_exponent(ratio_scale: u64, scale: u64, mag: u64) -> Result<u64> {
    if mag == 0 {
        return Err(PemError::Precision("zero net energy has no reciprocal".into()));
    }
    let num = u128::from(ratio_scale) * u128::from(scale);
    let mag = u128::from(mag);
    let c = num / mag + u128::from(2 * (num % mag) >= mag);
    if c == 0 {
        return Err(PemError::Precision(format!(
            "net energy {} too large for ratio scale {ratio_scale}",
            mag as f64 / scale as f64
        )));
    }
    c.to_u64().ok_or_else(|| {
        PemError::Precision(format!(
            "net energy {} too small: reciprocal exponent exceeds 64 bits",
            mag as f64 / scale as f64
        ))
    })
}

impl Ctx<'_> {
    pub(crate) fn private_distribution(&mut self, kind: MarketKind) -> Result<()> {
        let sellers = self.sellers.clone();
        let buyers = self.buyers.clone();
        match kind {
            MarketKind::General => {
                let h_s = self.select(&sellers, SelectionPurpose::Hs)?;
                self.selections.h_s = Some(h_s);
                self.share_ratios(h_s, &buyers, &sellers)?;
                self.route_general(&sellers, &buyers)
            }
            MarketKind::Extreme => {
                let h_s = self.select(&buyers, SelectionPurpose::Hs)?;
                self.selections.h_s = Some(h_s);
                self.share_ratios(h_s, &sellers, &buyers)?;
                self.route_extreme(&sellers, &buyers)
            }
            MarketKind::GridOnly => Err(PemError::DegenerateMarket("no distribution in a grid-only window".into())),
        }
    }

    /// Leaves normalized `|sn_j| / E` ratios for every member of `ratio_side`
    /// in the state of every member of `long_side`.
    fn share_ratios(&mut self, h_s: AgentId, ratio_side: &Coalition, long_side: &Coalition) -> Result<()> {
        let key = self.key_of(h_s)?;
        let fixed = self.cfg.fixed;
        let k = self.cfg.ratio_scale;

        let (last, total) = self.ring_aggregate(
            Phase::DistAggregate,
            &[ratio_side],
            key,
            Sink::Broadcast(ratio_side),
            |a, _| Ok(BigUint::from(fixed.to_bounded_magnitude(a.sn.abs())?)),
        )?;
        self.agent(last)?.shared_total = Some(total);
        for id in ratio_side.without(last).iter() {
            let c = self.recv_ciphertext(Phase::DistAggregate, id, last)?;
            self.agent(id)?.shared_total = Some(c);
        }

        for id in ratio_side.iter() {
            let a = self.agent(id)?;
            let total = a
                .shared_total
                .take()
                .ok_or_else(|| PemError::Protocol(format!("{id} never received the coalition total")))?;
            let c = reciprocal_exponent(k, fixed.scale, fixed.to_bounded_magnitude(a.sn.abs())?)?;
            let scaled = key.scalar_mul(&total, &BigInt::from(c))?;
            let scaled = key.rerandomize(&scaled, &mut a.rng)?;
            self.send(
                Phase::DistRatio,
                id,
                h_s,
                Payload::ScaledCiphertext {
                    ciphertext: scaled,
                    scale: k,
                },
            )?;
        }

        let mut ratios = Vec::with_capacity(ratio_side.len());
        for id in ratio_side.iter() {
            let (c, k) = match self.recv(Phase::DistRatio, h_s, id)? {
                Payload::ScaledCiphertext { ciphertext, scale } => (ciphertext, scale),
                other => return Err(unexpected(Phase::DistRatio, &other)),
            };
            let a = self.agent(h_s)?;
            let value = fixed.decode(&a.decrypt(&c)?, a.public().modulus())?;
            a.observe(Observation::ScaledInverse { from: id, value });
            if !(value > 0.0) {
                return Err(PemError::Precision(format!("non-positive scaled inverse from {id}")));
            }
            ratios.push((id, k as f64 / value));
        }
        let sum: f64 = ratios.iter().map(|(_, r)| r).sum();
        for r in &mut ratios {
            r.1 /= sum;
        }
        {
            let a = self.agent(h_s)?;
            a.observe(Observation::Ratios(ratios.clone()));
            a.ratios = Some(ratios.clone());
        }
        self.broadcast(Phase::DistRatioBroadcast, h_s, long_side, Payload::Ratios(ratios))?;
        for id in long_side.without(h_s).iter() {
            match self.recv(Phase::DistRatioBroadcast, id, h_s)? {
                Payload::Ratios(r) => {
                    let a = self.agent(id)?;
                    a.observe(Observation::Ratios(r.clone()));
                    a.ratios = Some(r);
                }
                other => return Err(unexpected(Phase::DistRatioBroadcast, &other)),
            }
        }
        Ok(())
    }

    fn ratios_of(&self, id: AgentId) -> Result<Vec<(AgentId, f64)>> {
        self.agents[&id]
            .ratios
            .clone()
            .ok_or_else(|| PemError::Protocol(format!("{id} has no ratios")))
    }

    fn route_general(&mut self, sellers: &Coalition, buyers: &Coalition) -> Result<()> {
        for i in sellers.iter() {
            let ratios = self.ratios_of(i)?;
            for (j, r) in ratios {
                let a = self.agent(i)?;
                let e = r * a.sn;
                a.ledger.energy.insert((i, j), e);
                self.send(
                    Phase::EnergyRoute,
                    i,
                    j,
                    Payload::Allocation {
                        seller: i,
                        buyer: j,
                        energy: e,
                    },
                )?;
            }
        }
        for j in buyers.iter() {
            for i in sellers.iter() {
                let e = match self.recv(Phase::EnergyRoute, j, i)? {
                    Payload::Allocation { seller, buyer, energy } if seller == i && buyer == j => energy,
                    other => return Err(unexpected(Phase::EnergyRoute, &other)),
                };
                let a = self.agent(j)?;
                let m = a.price()? * e;
                a.observe(Observation::Allocation {
                    seller: i,
                    buyer: j,
                    energy: e,
                });
                a.ledger.energy.insert((i, j), e);
                a.ledger.payments.insert((j, i), m);
                self.send(
                    Phase::Payment,
                    j,
                    i,
                    Payload::Payment {
                        buyer: j,
                        seller: i,
                        amount: m,
                    },
                )?;
            }
            let a = self.agent(j)?;
            let bought: f64 = a.ledger.energy.values().sum();
            a.ledger.grid_purchase = (-a.sn - bought).max(0.0);
        }
        for i in sellers.iter() {
            for j in buyers.iter() {
                self.receive_payment(i, j)?;
            }
        }
        Ok(())
    }

    fn route_extreme(&mut self, sellers: &Coalition, buyers: &Coalition) -> Result<()> {
        for j in buyers.iter() {
            let ratios = self.ratios_of(j)?;
            for (i, r) in ratios {
                let a = self.agent(j)?;
                let e = r * -a.sn;
                let m = a.price()? * e;
                a.ledger.energy.insert((i, j), e);
                a.ledger.payments.insert((j, i), m);
                self.send(
                    Phase::EnergyRoute,
                    j,
                    i,
                    Payload::Allocation {
                        seller: i,
                        buyer: j,
                        energy: e,
                    },
                )?;
                self.send(
                    Phase::Payment,
                    j,
                    i,
                    Payload::Payment {
                        buyer: j,
                        seller: i,
                        amount: m,
                    },
                )?;
            }
        }
        for i in sellers.iter() {
            for j in buyers.iter() {
                let e = match self.recv(Phase::EnergyRoute, i, j)? {
                    Payload::Allocation { seller, buyer, energy } if seller == i && buyer == j => energy,
                    other => return Err(unexpected(Phase::EnergyRoute, &other)),
                };
                let a = self.agent(i)?;
                a.observe(Observation::Allocation {
                    seller: i,
                    buyer: j,
                    energy: e,
                });
                a.ledger.energy.insert((i, j), e);
                self.receive_payment(i, j)?;
            }
            let a = self.agent(i)?;
            let sold: f64 = a.ledger.energy.values().sum();
            a.ledger.grid_sale = (a.sn - sold).max(0.0);
        }
        Ok(())
    }

    fn receive_payment(&mut self, seller: AgentId, buyer: AgentId) -> Result<()> {
        match self.recv(Phase::Payment, seller, buyer)? {
            Payload::Payment {
                buyer: b,
                seller: s,
                amount,
            } if b == buyer && s == seller => {
                let a = self.agent(seller)?;
                a.observe(Observation::Payment { buyer, seller, amount });
                a.ledger.payments.insert((buyer, seller), amount);
                Ok(())
            }
            other => Err(unexpected(Phase::Payment, &other)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reciprocal_exponent_examples() {
        // |sn| = 2 kWh, K = 10^6 -> 500_000
        assert_eq!(reciprocal_exponent(1_000_000, 1_000_000, 2_000_000).unwrap(), 500_000);
        // 3 kWh -> 333_333.33 -> 333_333; 1.5 kWh -> 666_666.67 -> 666_667
        assert_eq!(reciprocal_exponent(1_000_000, 1_000_000, 3_000_000).unwrap(), 333_333);
        assert_eq!(reciprocal_exponent(1_000_000, 1_000_000, 1_500_000).unwrap(), 666_667);
        // exact half rounds up: K / 4e6 units = 0.25 -> K = 2: 2 / 4 = 0.5 -> 1
        assert_eq!(reciprocal_exponent(2, 1_000_000, 4_000_000).unwrap(), 1);
        assert!(matches!(reciprocal_exponent(1, 1, 0), Err(PemError::Precision(_))));
        assert!(matches!(reciprocal_exponent(u64::MAX, u64::MAX, 1), Err(PemError::Precision(_))));
        assert!(matches!(reciprocal_exponent(1, 1_000_000, 3_000_000), Err(PemError::Precision(_))));
    }
}
