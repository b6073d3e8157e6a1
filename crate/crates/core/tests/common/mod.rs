#![allow(dead_code)]

use std::collections::BTreeSet;

use pem_core::market::{market_totals, net_energy, AgentId, AgentProfile, MarketKind, MarketOutcome};
use pem_core::protocol::{Observation, Payload, PemNetwork, Phase, ProtocolConfig, Stage, WindowRun};

pub fn network(n: u16, key_bits: u32, record: bool) -> PemNetwork {
    let ids: Vec<AgentId> = (1..=n).map(AgentId).collect();
    PemNetwork::setup(&ids, key_bits, 2024, ProtocolConfig::default(), record).expect("network setup")
}

/// Σ_j e_ij = sn_i for sellers (general) or Σ_i e_ij = |sn_j| for buyers
/// (extreme), and every shared ratio vector sums to 1.
pub fn check_conservation(run: &WindowRun, profiles: &[AgentProfile], tol: f64) -> Result<(), String> {
    let o = &run.outcome;
    let snap = market_totals(profiles);
    match o.kind {
        MarketKind::General => {
            for s in &snap.sellers {
                let d = (o.sold_by(s.agent_id) - net_energy(s)).abs();
                if d > tol {
                    return Err(format!("window {}: seller {} off by {d:e}", o.t, s.agent_id));
                }
            }
        }
        MarketKind::Extreme => {
            for b in &snap.buyers {
                let d = (o.bought_by(b.agent_id) + net_energy(b)).abs();
                if d > tol {
                    return Err(format!("window {}: buyer {} off by {d:e}", o.t, b.agent_id));
                }
            }
        }
        MarketKind::GridOnly => {}
    }
    for (id, view) in &run.views {
        for obs in view {
            if let Observation::Ratios(r) = obs {
                let sum: f64 = r.iter().map(|(_, v)| v).sum();
                if (sum - 1.0).abs() > tol {
                    return Err(format!("window {}: ratios at {id} sum to {sum}", o.t));
                }
            }
        }
    }
    Ok(())
}

pub fn max_ratio_error(run: &WindowRun, profiles: &[AgentProfile]) -> f64 {
    let snap = market_totals(profiles);
    let (side, total) = match run.outcome.kind {
        MarketKind::General => (&snap.buyers, snap.demand),
        _ => (&snap.sellers, snap.supply),
    };
    let mut worst: f64 = 0.0;
    for view in run.views.values() {
        for obs in view {
            if let Observation::Ratios(r) = obs {
                for (id, v) in r {
                    let a = side.iter().find(|p| p.agent_id == *id).expect("ratio for a coalition member");
                    worst = worst.max((v - net_energy(a).abs() / total).abs());
                }
            }
        }
    }
    worst
}

fn holds_key(net: &PemNetwork, id: AgentId, key_id: u64) -> bool {
    net.public_key(id).map(|k| k.key_id()) == Some(key_id)
}

/// Replays the transcript and checks who can read what.
pub fn check_information_flow(net: &PemNetwork, run: &WindowRun, profiles: &[AgentProfile]) -> Result<(), String> {
    let sel = run.selections;
    let t = run.outcome.t;
    let selected: BTreeSet<AgentId> = [sel.h_r1, sel.h_r2, sel.h_b, sel.h_s].into_iter().flatten().collect();
    let decryptor = |phase: Phase| match phase {
        Phase::EvalRound1 => sel.h_r1,
        Phase::EvalRound2 | Phase::Compare => sel.h_r2,
        Phase::PricingK | Phase::PricingDenom => sel.h_b,
        Phase::DistRatio => sel.h_s,
        _ => None,
    };

    for entry in &run.transcript {
        let m = entry.message().map_err(|e| e.to_string())?;
        for c in m.payload.ciphertexts() {
            if holds_key(net, entry.to, c.key_id()) && decryptor(m.phase) != Some(entry.to) {
                return Err(format!("window {t}: {} can open a {} ciphertext", entry.to, m.phase));
            }
        }
        if !selected.contains(&entry.to) {
            let plaintext_ok = matches!(
                m.payload,
                Payload::Ciphertext(_)
                    | Payload::MarketKind(_)
                    | Payload::Price { .. }
                    | Payload::Ratios(_)
                    | Payload::Allocation { .. }
                    | Payload::Payment { .. }
            );
            if !plaintext_ok {
                return Err(format!("window {t}: unselected {} received {}", entry.to, m.payload.name()));
            }
        }
    }

    // only the two round decryptors see blinded aggregates
    for (id, view) in &run.views {
        for obs in view {
            if let Observation::BlindedAggregate { phase, .. } = obs {
                let expected = if *phase == Phase::EvalRound1 { sel.h_r1 } else { sel.h_r2 };
                if Some(*id) != expected {
                    return Err(format!("window {t}: {id} decrypted a blinded aggregate in {phase}"));
                }
            }
            let stage_restricted = matches!(
                obs,
                Observation::PricingAggregate { .. } | Observation::ScaledInverse { .. } | Observation::WireLabels { .. }
            );
            if stage_restricted && !selected.contains(id) {
                return Err(format!("window {t}: unselected {id} observed {obs:?}"));
            }
        }
    }

    let snap = market_totals(profiles);
    if let Some(h_b) = sel.h_b {
        let pricing: Vec<&Observation> = run.views[&h_b]
            .iter()
            .filter(|o| matches!(o, Observation::PricingAggregate { .. }))
            .collect();
        let sum_k: f64 = snap.sellers.iter().map(|a| a.preference).sum();
        let sum_d: f64 = snap.sellers.iter().map(|a| a.price_denominator_term()).sum();
        let ok = pricing.len() == 2
            && matches!(pricing[0], Observation::PricingAggregate { phase: Phase::PricingK, value } if (value - sum_k).abs() < 1e-6)
            && matches!(pricing[1], Observation::PricingAggregate { phase: Phase::PricingDenom, value } if (value - sum_d).abs() < 1e-6);
        if !ok {
            return Err(format!("window {t}: H_b view is {pricing:?}, expected Σk = {sum_k}, Σd = {sum_d}"));
        }
        let received: Vec<_> = run
            .transcript
            .iter()
            .filter(|e| e.to == h_b)
            .filter_map(|e| e.message().ok())
            .filter(|m| m.phase.stage() == Stage::Pricing)
            .collect();
        if received.len() != 2 {
            return Err(format!("window {t}: H_b received {} pricing messages", received.len()));
        }
    }

    // distribution: the long side sees exactly the ratio vector before routing
    if let (Some(h_s), MarketKind::General | MarketKind::Extreme) = (sel.h_s, run.outcome.kind) {
        let (long_side, ratio_side) = match run.outcome.kind {
            MarketKind::General => (&run.sellers, &run.buyers),
            _ => (&run.buyers, &run.sellers),
        };
        for id in long_side.iter() {
            let learned: Vec<&Observation> = run.views[&id]
                .iter()
                .filter(|o| matches!(o, Observation::Ratios(_) | Observation::ScaledInverse { .. }))
                .collect();
            let ratios = learned.iter().filter(|o| matches!(o, Observation::Ratios(_))).count();
            let inverses = learned.len() - ratios;
            let expected_inverses = if id == h_s { ratio_side.len() } else { 0 };
            if ratios != 1 || inverses != expected_inverses {
                return Err(format!("window {t}: {id} distribution view {learned:?}"));
            }
            if let Some(Observation::Ratios(r)) = learned.iter().find(|o| matches!(o, Observation::Ratios(_))) {
                let ids: Vec<AgentId> = r.iter().map(|(i, _)| *i).collect();
                if ids != ratio_side.members() {
                    return Err(format!("window {t}: ratio vector covers {ids:?}"));
                }
            }
        }
        for id in ratio_side.iter() {
            if run.views[&id].iter().any(|o| matches!(o, Observation::Ratios(_) | Observation::ScaledInverse { .. })) {
                return Err(format!("window {t}: ratio-side agent {id} learned ratios"));
            }
        }
    }
    Ok(())
}

pub fn outcome_summary(o: &MarketOutcome) -> String {
    format!("t={} kind={} price={:.6}", o.t, o.kind, o.price)
}
