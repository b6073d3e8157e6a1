//! Plaintext market model: net energy, coalitions, seller utility, buyer cost,
//! the Stackelberg price and pro-rata allocation.
//!
//! Seller best response comes from the first-order condition
//! `k / (1 + l + eps*b) = p`, i.e. `l* = k/p - 1 - eps*b`. Substituting it into
//! the buyer coalition cost `Γ(p) = p*E_s + ps_g*(E_b - E_s)` gives
//! `Γ'(p) = Σ d_i - ps_g Σ k_i / p^2` with `d_i = g_i + 1 + eps_i*b_i - b_i`,
//! whose root is the candidate price `sqrt(ps_g Σk / Σd)`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{PemError, Result};

/// Net energies within this distance of zero are treated as off-market; float
/// noise from `g - l - b` must not create phantom coalition members.
pub const NET_ENERGY_EPSILON: f64 = 1e-9;

/// Supply and demand closer than this are treated as equal (extreme market).
pub const MARKET_BALANCE_EPSILON: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId(pub u16);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "H{}", self.0)
    }
}

/// One agent's private inputs for a single trading window.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentProfile {
    pub agent_id: AgentId,
    /// Local generation, kWh.
    pub generation: f64,
    /// Demand load, kWh.
    pub load: f64,
    /// Battery charge (+) or discharge (-), kWh.
    pub battery: f64,
    pub capacity: f64,
    /// Load preference `k > 0`.
    pub preference: f64,
    /// Battery loss coefficient in (0, 1).
    pub loss_coeff: f64,
}

impl AgentProfile {
    pub fn new(agent_id: u16, generation: f64, load: f64, battery: f64) -> Self {
        AgentProfile {
            agent_id: AgentId(agent_id),
            generation,
            load,
            battery,
            capacity: battery.abs(),
            preference: 20.0,
            loss_coeff: 0.9,
        }
    }

    pub fn with_preference(mut self, k: f64) -> Self {
        self.preference = k;
        self
    }

    pub fn with_loss_coeff(mut self, eps: f64) -> Self {
        self.loss_coeff = eps;
        self
    }

    pub fn with_capacity(mut self, cap: f64) -> Self {
        self.capacity = cap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let id = self.agent_id;
        let finite = [
            self.generation,
            self.load,
            self.battery,
            self.capacity,
            self.preference,
            self.loss_coeff,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(PemError::Domain(format!("{id}: non-finite profile value")));
        }
        if self.generation < 0.0 || self.load < 0.0 || self.capacity < 0.0 {
            return Err(PemError::Domain(format!(
                "{id}: generation, load and capacity must be nonnegative"
            )));
        }
        if self.preference <= 0.0 {
            return Err(PemError::Domain(format!("{id}: preference k must be positive")));
        }
        if !(self.loss_coeff > 0.0 && self.loss_coeff < 1.0) {
            return Err(PemError::Domain(format!("{id}: loss coefficient must lie in (0, 1)")));
        }
        if self.battery.abs() > self.capacity + 1e-12 {
            return Err(PemError::Domain(format!(
                "{id}: |battery| {} exceeds capacity {}",
                self.battery.abs(),
                self.capacity
            )));
        }
        if self.log_argument(self.load) <= 0.0 {
            return Err(PemError::Domain(format!("{id}: 1 + l + eps*b must be positive")));
        }
        Ok(())
    }

    fn log_argument(&self, load: f64) -> f64 {
        1.0 + load + self.loss_coeff * self.battery
    }

    /// The per-seller term `g + 1 + eps*b - b` aggregated for the price denominator.
    pub fn price_denominator_term(&self) -> f64 {
        self.generation + 1.0 + self.loss_coeff * self.battery - self.battery
    }
}

/// Window-level public parameters (cents/kWh).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowParams {
    pub t: u32,
    pub price_floor: f64,
    pub price_cap: f64,
    pub grid_retail: f64,
    pub grid_buyback: f64,
}

impl WindowParams {
    pub fn new(t: u32, price_floor: f64, price_cap: f64, grid_retail: f64, grid_buyback: f64) -> Result<Self> {
        let w = WindowParams {
            t,
            price_floor,
            price_cap,
            grid_retail,
            grid_buyback,
        };
        w.validate()?;
        Ok(w)
    }

    /// The evaluation setting: retail 120, buy-back 80, range [90, 110].
    pub fn standard(t: u32) -> Self {
        WindowParams {
            t,
            price_floor: 90.0,
            price_cap: 110.0,
            grid_retail: 120.0,
            grid_buyback: 80.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = self.grid_buyback < self.price_floor
            && self.price_floor <= self.price_cap
            && self.price_cap < self.grid_retail;
        if !ordered || self.grid_buyback < 0.0 {
            return Err(PemError::Config(format!(
                "price ordering pb_g < p_l <= p_h < ps_g violated: {} / {} / {} / {}",
                self.grid_buyback, self.price_floor, self.price_cap, self.grid_retail
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Seller,
    Buyer,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MarketKind {
    General,
    Extreme,
    GridOnly,
}

impl MarketKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MarketKind::General => "general",
            MarketKind::Extreme => "extreme",
            MarketKind::GridOnly => "grid-only",
        }
    }

    /// General iff supply is strictly below demand.
    pub fn from_totals(supply: f64, demand: f64) -> MarketKind {
        if supply < demand - MARKET_BALANCE_EPSILON {
            MarketKind::General
        } else {
            MarketKind::Extreme
        }
    }
}

impl fmt::Display for MarketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MarketKind {
    type Err = PemError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "general" => Ok(MarketKind::General),
            "extreme" => Ok(MarketKind::Extreme),
            "grid-only" => Ok(MarketKind::GridOnly),
            other => Err(PemError::Domain(format!("unknown market kind {other:?}"))),
        }
    }
}

pub fn net_energy(a: &AgentProfile) -> f64 {
    a.generation - a.load - a.battery
}

pub fn classify_role(sn: f64) -> Role {
    if sn > NET_ENERGY_EPSILON {
        Role::Seller
    } else if sn < -NET_ENERGY_EPSILON {
        Role::Buyer
    } else {
        Role::Off
    }
}

/// Agent population split into coalitions, each sorted by agent id.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketSnapshot {
    pub sellers: Vec<AgentProfile>,
    pub buyers: Vec<AgentProfile>,
    pub off_market: Vec<AgentProfile>,
    /// Total supply E_s (kWh).
    pub supply: f64,
    /// Total demand E_b (kWh).
    pub demand: f64,
}

impl MarketSnapshot {
    pub fn kind(&self) -> MarketKind {
        if self.sellers.is_empty() || self.buyers.is_empty() {
            MarketKind::GridOnly
        } else {
            MarketKind::from_totals(self.supply, self.demand)
        }
    }

    pub fn net(&self, id: AgentId) -> Option<f64> {
        self.sellers
            .iter()
            .chain(&self.buyers)
            .chain(&self.off_market)
            .find(|a| a.agent_id == id)
            .map(net_energy)
    }
}

pub fn market_totals(profiles: &[AgentProfile]) -> MarketSnapshot {
    let mut sorted: Vec<&AgentProfile> = profiles.iter().collect();
    sorted.sort_by_key(|a| a.agent_id);
    let mut snap = MarketSnapshot {
        sellers: Vec::new(),
        buyers: Vec::new(),
        off_market: Vec::new(),
        supply: 0.0,
        demand: 0.0,
    };
    for a in sorted {
        let sn = net_energy(a);
        match classify_role(sn) {
            Role::Seller => {
                snap.supply += sn;
                snap.sellers.push(a.clone());
            }
            Role::Buyer => {
                snap.demand += -sn;
                snap.buyers.push(a.clone());
            }
            Role::Off => snap.off_market.push(a.clone()),
        }
    }
    snap
}

/// Seller utility `k ln(1 + l + eps*b) + p (g - l - b)`.
pub fn seller_utility(a: &AgentProfile, p: f64) -> Result<f64> {
    seller_utility_at_load(a, a.load, p)
}

/// Seller utility evaluated with `load` substituted for the profile's own load.
pub fn seller_utility_at_load(a: &AgentProfile, load: f64, p: f64) -> Result<f64> {
    if p <= 0.0 {
        return Err(PemError::Domain("price must be positive".into()));
    }
    let arg = a.log_argument(load);
    if arg <= 0.0 {
        return Err(PemError::Domain(format!(
            "{}: log argument 1 + l + eps*b = {arg} is not positive",
            a.agent_id
        )));
    }
    Ok(a.preference * arg.ln() + p * (a.generation - load - a.battery))
}

/// Buyer cost `p x + ps_g (l + b - g - x)` for a market purchase of `x` kWh.
pub fn buyer_cost(a: &AgentProfile, p: f64, x: f64, grid_retail: f64) -> Result<f64> {
    let deficit = a.load + a.battery - a.generation;
    if !(x > 0.0 && x <= deficit + 1e-12) {
        return Err(PemError::Domain(format!(
            "{}: market purchase {x} outside (0, {deficit}]",
            a.agent_id
        )));
    }
    Ok(p * x + grid_retail * (deficit - x))
}

/// Buyer coalition cost `p E_s + ps_g (E_b - E_s)`.
pub fn coalition_cost(snapshot: &MarketSnapshot, p: f64, grid_retail: f64) -> f64 {
    coalition_cost_from_totals(snapshot.supply, snapshot.demand, p, grid_retail)
}

pub fn coalition_cost_from_totals(supply: f64, demand: f64, p: f64, grid_retail: f64) -> f64 {
    p * supply + grid_retail * (demand - supply)
}

/// Unclamped first-order solution `k/p - 1 - eps*b`.
pub fn stationary_load(a: &AgentProfile, p: f64) -> f64 {
    a.preference / p - 1.0 - a.loss_coeff * a.battery
}

/// Best-response load, clamped at zero.
pub fn optimal_load(a: &AgentProfile, p: f64) -> Result<f64> {
    if p <= 0.0 {
        return Err(PemError::Domain("price must be positive".into()));
    }
    Ok(stationary_load(a, p).max(0.0))
}

/// Γ(p) with every seller playing the stationary best response, so that
/// `E_s(p) = Σ d_i - Σ k_i / p`.
pub fn coalition_cost_with_responses(sellers: &[AgentProfile], demand: f64, p: f64, grid_retail: f64) -> f64 {
    let supply: f64 = sellers
        .iter()
        .map(|a| a.generation - stationary_load(a, p) - a.battery)
        .sum();
    coalition_cost_from_totals(supply, demand, p, grid_retail)
}

/// `sqrt(ps_g Σk / Σd)` from the two coalition aggregates.
pub fn price_from_aggregates(sum_preference: f64, sum_denominator: f64, grid_retail: f64) -> Result<f64> {
    if !(sum_denominator > 0.0) {
        return Err(PemError::DegenerateMarket(format!(
            "price denominator {sum_denominator} is not positive"
        )));
    }
    if !(sum_preference > 0.0) {
        return Err(PemError::DegenerateMarket(format!(
            "preference sum {sum_preference} is not positive"
        )));
    }
    Ok((grid_retail * sum_preference / sum_denominator).sqrt())
}

pub fn candidate_price(sellers: &[AgentProfile], grid_retail: f64) -> Result<f64> {
    if sellers.is_empty() {
        return Err(PemError::DegenerateMarket("empty seller coalition".into()));
    }
    let sum_k: f64 = sellers.iter().map(|a| a.preference).sum();
    let sum_d: f64 = sellers.iter().map(AgentProfile::price_denominator_term).sum();
    price_from_aggregates(sum_k, sum_d, grid_retail)
}

pub fn clamp_price(p_hat: f64, w: &WindowParams) -> f64 {
    if p_hat < w.price_floor {
        w.price_floor
    } else if p_hat > w.price_cap {
        w.price_cap
    } else {
        p_hat
    }
}

/// Pairwise energy `e_ij`: the seller's supply split by demand share (general)
/// or the buyer's demand split by supply share (extreme).
pub fn allocate_pair(seller_supply: f64, buyer_demand: f64, supply: f64, demand: f64, kind: MarketKind) -> Result<f64> {
    match kind {
        MarketKind::General => {
            if demand <= 0.0 {
                return Err(PemError::DegenerateMarket("zero market demand".into()));
            }
            Ok(seller_supply * buyer_demand / demand)
        }
        MarketKind::Extreme => {
            if supply <= 0.0 {
                return Err(PemError::DegenerateMarket("zero market supply".into()));
            }
            Ok(buyer_demand * seller_supply / supply)
        }
        MarketKind::GridOnly => Err(PemError::DegenerateMarket(
            "no peer allocation in a grid-only window".into(),
        )),
    }
}

pub fn payment_for(energy: f64, p: f64) -> f64 {
    p * energy
}

/// Per-window market result. Keys are `(seller, buyer)` for allocations and
/// `(buyer, seller)` for payments.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketOutcome {
    pub t: u32,
    pub kind: MarketKind,
    pub price: f64,
    pub allocations: BTreeMap<(AgentId, AgentId), f64>,
    pub payments: BTreeMap<(AgentId, AgentId), f64>,
    pub grid_purchases: BTreeMap<AgentId, f64>,
    pub grid_sales: BTreeMap<AgentId, f64>,
}

impl MarketOutcome {
    pub fn empty(t: u32, kind: MarketKind, price: f64) -> Self {
        MarketOutcome {
            t,
            kind,
            price,
            allocations: BTreeMap::new(),
            payments: BTreeMap::new(),
            grid_purchases: BTreeMap::new(),
            grid_sales: BTreeMap::new(),
        }
    }

    pub fn sold_by(&self, seller: AgentId) -> f64 {
        self.allocations
            .iter()
            .filter(|((s, _), _)| *s == seller)
            .map(|(_, e)| e)
            .sum()
    }

    pub fn bought_by(&self, buyer: AgentId) -> f64 {
        self.allocations
            .iter()
            .filter(|((_, b), _)| *b == buyer)
            .map(|(_, e)| e)
            .sum()
    }

    pub fn paid_by(&self, buyer: AgentId) -> f64 {
        self.payments
            .iter()
            .filter(|((b, _), _)| *b == buyer)
            .map(|(_, m)| m)
            .sum()
    }

    pub fn received_by(&self, seller: AgentId) -> f64 {
        self.payments
            .iter()
            .filter(|((_, s), _)| *s == seller)
            .map(|(_, m)| m)
            .sum()
    }

    pub fn grid_interaction(&self) -> f64 {
        self.grid_purchases.values().sum::<f64>() + self.grid_sales.values().sum::<f64>()
    }

    /// Buyer coalition cost: market payments plus residual grid purchases.
    pub fn buyer_coalition_cost(&self, w: &WindowParams) -> f64 {
        self.payments.values().sum::<f64>() + w.grid_retail * self.grid_purchases.values().sum::<f64>()
    }

    /// Checks conservation, payment consistency and the price range.
    pub fn check_invariants(&self, snapshot: &MarketSnapshot, w: &WindowParams, tol: f64) -> Result<()> {
        let violation = |msg: String| Err(PemError::Integrity(format!("window {}: {msg}", self.t)));
        if self.kind != MarketKind::GridOnly
            && (self.price < w.price_floor - tol || self.price > w.price_cap + tol)
        {
            return violation(format!("price {} outside [{}, {}]", self.price, w.price_floor, w.price_cap));
        }
        for ((s, b), e) in &self.allocations {
            if *e < -tol {
                return violation(format!("negative allocation {s}->{b}"));
            }
            let m = self.payments.get(&(*b, *s)).copied().unwrap_or(0.0);
            if (m - self.price * e).abs() > tol * self.price.max(1.0) {
                return violation(format!("payment {b}->{s} = {m} != p*e = {}", self.price * e));
            }
        }
        match self.kind {
            MarketKind::General => {
                for a in &snapshot.sellers {
                    let sn = net_energy(a);
                    let sold = self.sold_by(a.agent_id);
                    if (sold - sn).abs() > tol {
                        return violation(format!("seller {} sold {sold}, supply {sn}", a.agent_id));
                    }
                }
                for a in &snapshot.buyers {
                    let need = -net_energy(a);
                    let got = self.bought_by(a.agent_id)
                        + self.grid_purchases.get(&a.agent_id).copied().unwrap_or(0.0);
                    if (got - need).abs() > tol {
                        return violation(format!("buyer {} covered {got} of {need}", a.agent_id));
                    }
                }
            }
            MarketKind::Extreme => {
                for a in &snapshot.buyers {
                    let need = -net_energy(a);
                    let got = self.bought_by(a.agent_id);
                    if (got - need).abs() > tol {
                        return violation(format!("buyer {} bought {got}, demand {need}", a.agent_id));
                    }
                }
                for a in &snapshot.sellers {
                    let sn = net_energy(a);
                    let out = self.sold_by(a.agent_id)
                        + self.grid_sales.get(&a.agent_id).copied().unwrap_or(0.0);
                    if (out - sn).abs() > tol {
                        return violation(format!("seller {} disposed {out} of {sn}", a.agent_id));
                    }
                }
            }
            MarketKind::GridOnly => {
                if !self.allocations.is_empty() {
                    return violation("grid-only window has peer allocations".into());
                }
            }
        }
        Ok(())
    }
}
