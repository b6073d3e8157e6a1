use std::collections::{BTreeMap, BTreeSet};

use crate::error::{PemError, Result};
use crate::market::{
    allocate_pair, candidate_price, clamp_price, market_totals, net_energy, payment_for, AgentId, AgentProfile,
    MarketKind, MarketOutcome, WindowParams,
};

fn validate_inputs(profiles: &[AgentProfile], w: &WindowParams) -> Result<()> {
    w.validate()?;
    let mut ids = BTreeSet::new();
    for p in profiles {
        p.validate()?;
        if !ids.insert(p.agent_id) {
            return Err(PemError::Integrity(format!("duplicate profile for {}", p.agent_id)));
        }
    }
    Ok(())
}

/// Plaintext reference for one window, with the same contract as the secure
/// pipeline.
pub fn oracle_run_window(profiles: &[AgentProfile], w: &WindowParams) -> Result<MarketOutcome> {
    validate_inputs(profiles, w)?;
    let snap = market_totals(profiles);
    if snap.sellers.is_empty() {
        let mut out = MarketOutcome::empty(w.t, MarketKind::GridOnly, w.grid_retail);
        for b in &snap.buyers {
            out.grid_purchases.insert(b.agent_id, -net_energy(b));
        }
        return Ok(out);
    }
    if snap.buyers.is_empty() {
        let mut out = MarketOutcome::empty(w.t, MarketKind::GridOnly, w.grid_buyback);
        for s in &snap.sellers {
            out.grid_sales.insert(s.agent_id, net_energy(s));
        }
        return Ok(out);
    }
    let kind = snap.kind();
    let price = match kind {
        MarketKind::General => clamp_price(candidate_price(&snap.sellers, w.grid_retail)?, w),
        _ => w.price_floor,
    };
    let mut out = MarketOutcome::empty(w.t, kind, price);
    for s in &snap.sellers {
        for b in &snap.buyers {
            let e = allocate_pair(net_energy(s), -net_energy(b), snap.supply, snap.demand, kind)?;
            out.allocations.insert((s.agent_id, b.agent_id), e);
            out.payments.insert((b.agent_id, s.agent_id), payment_for(e, price));
        }
    }
    match kind {
        MarketKind::General => {
            for b in &snap.buyers {
                let got = out.bought_by(b.agent_id);
                out.grid_purchases.insert(b.agent_id, (-net_energy(b) - got).max(0.0));
            }
        }
        _ => {
            for s in &snap.sellers {
                let sold = out.sold_by(s.agent_id);
                out.grid_sales.insert(s.agent_id, (net_energy(s) - sold).max(0.0));
            }
        }
    }
    Ok(out)
}

/// Everyone trades with the grid: buyers pay `ps_g`, sellers earn `pb_g`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BaselineOutcome {
    pub buyer_costs: BTreeMap<AgentId, f64>,
    pub seller_revenues: BTreeMap<AgentId, f64>,
    /// Total kWh bought from plus sold to the grid.
    pub grid_kwh: f64,
}

impl BaselineOutcome {
    pub fn coalition_cost(&self) -> f64 {
        self.buyer_costs.values().sum()
    }
}

pub fn grid_only_baseline(profiles: &[AgentProfile], w: &WindowParams) -> Result<BaselineOutcome> {
    validate_inputs(profiles, w)?;
    let snap = market_totals(profiles);
    let mut out = BaselineOutcome::default();
    for b in &snap.buyers {
        out.buyer_costs.insert(b.agent_id, w.grid_retail * -net_energy(b));
    }
    for s in &snap.sellers {
        out.seller_revenues.insert(s.agent_id, w.grid_buyback * net_energy(s));
    }
    out.grid_kwh = snap.supply + snap.demand;
    Ok(out)
}

/// Largest differences between two outcomes of the same window.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OutcomeDeviation {
    pub kind_matches: bool,
    pub price: f64,
    pub energy: f64,
    pub payment: f64,
    pub grid: f64,
}

impl OutcomeDeviation {
    pub fn within(&self, price_tol: f64, energy_tol: f64, payment_tol: f64) -> bool {
        self.kind_matches
            && self.price <= price_tol
            && self.energy <= energy_tol
            && self.payment <= payment_tol
            && self.grid <= energy_tol
    }

    pub fn max(self, other: OutcomeDeviation) -> OutcomeDeviation {
        OutcomeDeviation {
            kind_matches: self.kind_matches && other.kind_matches,
            price: self.price.max(other.price),
            energy: self.energy.max(other.energy),
            payment: self.payment.max(other.payment),
            grid: self.grid.max(other.grid),
        }
    }
}

fn max_map_diff<K: Ord + Copy>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> f64 {
    let keys: BTreeSet<K> = a.keys().chain(b.keys()).copied().collect();
    keys.iter()
        .map(|k| (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max)
}

pub fn compare_outcomes(a: &MarketOutcome, b: &MarketOutcome) -> OutcomeDeviation {
    OutcomeDeviation {
        kind_matches: a.kind == b.kind,
        price: (a.price - b.price).abs(),
        energy: max_map_diff(&a.allocations, &b.allocations),
        payment: max_map_diff(&a.payments, &b.payments),
        grid: max_map_diff(&a.grid_purchases, &b.grid_purchases).max(max_map_diff(&a.grid_sales, &b.grid_sales)),
    }
}

/// A buyer's true cost when it reports `factor` times its real deficit. It pays
/// for whatever it is allocated, buys any shortfall at `ps_g` and resells any
/// excess at `pb_g`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InflationReport {
    pub buyer: AgentId,
    pub factor: f64,
    pub honest_cost: f64,
    pub inflated_cost: f64,
}

impl InflationReport {
    /// Positive when over-reporting pays off.
    pub fn gain(&self) -> f64 {
        self.honest_cost - self.inflated_cost
    }
}

fn true_cost(o: &MarketOutcome, buyer: AgentId, need: f64, w: &WindowParams) -> f64 {
    let got = o.bought_by(buyer);
    o.paid_by(buyer) + w.grid_retail * (need - got).max(0.0) - w.grid_buyback * (got - need).max(0.0)
}

/// Unilateral demand inflation by one buyer, everyone else honest.
pub fn demand_inflation(profiles: &[AgentProfile], w: &WindowParams, buyer: AgentId, factor: f64) -> Result<InflationReport> {
    if !(factor >= 1.0) {
        return Err(PemError::Domain(format!("inflation factor {factor} below 1")));
    }
    let honest = profiles
        .iter()
        .find(|p| p.agent_id == buyer)
        .ok_or(PemError::Routing(buyer))?;
    let need = -net_energy(honest);
    if need <= 0.0 {
        return Err(PemError::Domain(format!("{buyer} is not a buyer")));
    }
    let mut lied = profiles.to_vec();
    for p in lied.iter_mut().filter(|p| p.agent_id == buyer) {
        p.load += (factor - 1.0) * need;
    }
    Ok(InflationReport {
        buyer,
        factor,
        honest_cost: true_cost(&oracle_run_window(profiles, w)?, buyer, need, w),
        inflated_cost: true_cost(&oracle_run_window(&lied, w)?, buyer, need, w),
    })
}
