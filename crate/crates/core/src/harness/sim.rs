use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use super::config::{Mode, SimulationConfig};
use super::oracle::{compare_outcomes, grid_only_baseline, oracle_run_window, OutcomeDeviation};
use super::synth::{generate_synthetic_traces, SolarDay};
use super::trace::{by_window, load_traces, TraceRecord};
use crate::error::{PemError, Result};
use crate::market::{
    market_totals, net_energy, seller_utility, AgentId, AgentProfile, MarketKind, MarketOutcome, Role, WindowParams,
};
use crate::protocol::PemNetwork;
use crate::runtime::derive_seed;

/// Tolerances for the secure/oracle comparison in `both` mode.
pub const PRICE_TOLERANCE: f64 = 1e-6;
pub const ENERGY_TOLERANCE: f64 = 1e-5;
pub const PAYMENT_TOLERANCE: f64 = 1e-3;
/// Tolerance for conservation and rationality checks.
pub const INVARIANT_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct AgentMetrics {
    pub id: AgentId,
    pub role: Role,
    pub net: f64,
    /// Seller utility `k ln(1 + l + eps*b) + p*sn` at the clearing price.
    pub model_utility: Option<f64>,
    /// Sellers: market receipts plus grid sales. Buyers: payments plus grid
    /// purchases. Zero for off-market agents.
    pub realized: f64,
}

impl AgentMetrics {
    /// Realized cents per kWh traded (revenue for sellers, cost for buyers).
    pub fn per_kwh(&self) -> Option<f64> {
        (self.role != Role::Off).then(|| self.realized / self.net.abs())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowMetrics {
    pub t: u32,
    pub outcome: Option<MarketOutcome>,
    pub coalition_cost: f64,
    pub baseline_cost: f64,
    pub grid_kwh_pem: f64,
    pub grid_kwh_baseline: f64,
    pub bandwidth_bytes: u64,
    pub runtime_ms: f64,
    pub agents: Vec<AgentMetrics>,
    pub deviation: Option<OutcomeDeviation>,
    pub error: Option<String>,
}

impl WindowMetrics {
    pub fn kind(&self) -> Option<MarketKind> {
        self.outcome.as_ref().map(|o| o.kind)
    }

    pub fn price(&self) -> f64 {
        self.outcome.as_ref().map_or(f64::NAN, |o| o.price)
    }

    /// `1 - PEM cost / baseline cost`, or `None` without demand.
    pub fn cost_reduction(&self) -> Option<f64> {
        (self.baseline_cost > 0.0).then(|| 1.0 - self.coalition_cost / self.baseline_cost)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub mode: Mode,
    pub key_bits: u32,
    pub windows: Vec<WindowMetrics>,
    pub violations: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub windows: usize,
    pub completed: usize,
    pub mean_price: f64,
    pub mean_coalition_cost: f64,
    pub mean_baseline_cost: f64,
    /// `100 * (1 - Σ PEM cost / Σ baseline cost)`.
    pub cost_reduction_pct: f64,
    pub mean_grid_kwh_pem: f64,
    pub mean_grid_kwh_baseline: f64,
    pub mean_bandwidth_mb: f64,
    pub mean_runtime_ms: f64,
    pub max_price_deviation: f64,
    pub max_energy_deviation: f64,
    pub max_payment_deviation: f64,
}

impl MetricsReport {
    pub fn summary(&self) -> Summary {
        let done: Vec<&WindowMetrics> = self.windows.iter().filter(|w| w.outcome.is_some()).collect();
        let n = done.len().max(1) as f64;
        let mean = |f: &dyn Fn(&WindowMetrics) -> f64| done.iter().map(|w| f(w)).sum::<f64>() / n;
        let pem: f64 = done.iter().map(|w| w.coalition_cost).sum();
        let base: f64 = done.iter().map(|w| w.baseline_cost).sum();
        let dev = done
            .iter()
            .filter_map(|w| w.deviation)
            .fold(OutcomeDeviation { kind_matches: true, ..Default::default() }, OutcomeDeviation::max);
        Summary {
            windows: self.windows.len(),
            completed: done.len(),
            mean_price: mean(&|w| w.price()),
            mean_coalition_cost: mean(&|w| w.coalition_cost),
            mean_baseline_cost: mean(&|w| w.baseline_cost),
            cost_reduction_pct: if base > 0.0 { 100.0 * (1.0 - pem / base) } else { 0.0 },
            mean_grid_kwh_pem: mean(&|w| w.grid_kwh_pem),
            mean_grid_kwh_baseline: mean(&|w| w.grid_kwh_baseline),
            mean_bandwidth_mb: mean(&|w| w.bandwidth_bytes as f64) / crate::runtime::BYTES_PER_MB,
            mean_runtime_ms: mean(&|w| w.runtime_ms),
            max_price_deviation: dev.price,
            max_energy_deviation: dev.energy,
            max_payment_deviation: dev.payment,
        }
    }

    /// 0 when every window completed without invariant violations, else 1.
    pub fn exit_code(&self) -> i32 {
        if self.violations.is_empty() && self.windows.iter().all(|w| w.error.is_none()) {
            0
        } else {
            1
        }
    }
}

/// Per-window profiles in ascending agent order.
pub fn window_profiles(cfg: &SimulationConfig, traces: &[TraceRecord]) -> Result<BTreeMap<u32, Vec<AgentProfile>>> {
    let ids: BTreeSet<AgentId> = traces.iter().map(|r| r.agent_id).collect();
    let index: BTreeMap<AgentId, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    Ok(by_window(traces)
        .into_iter()
        .map(|(t, recs)| {
            let ps = recs
                .iter()
                .map(|r| cfg.profile(index[&r.agent_id], r.agent_id, r.generation, r.load, r.battery))
                .collect();
            (t, ps)
        })
        .collect())
}

/// Loads the configured traces or generates the synthetic day, and checks
/// that they agree with the configured population and horizon.
pub fn simulation_traces(cfg: &SimulationConfig) -> Result<Vec<TraceRecord>> {
    let traces = match &cfg.traces {
        Some(p) => load_traces(p)?,
        None => generate_synthetic_traces(cfg.seed, cfg.agents, cfg.windows, &SolarDay::default()),
    };
    let agents: BTreeSet<AgentId> = traces.iter().map(|r| r.agent_id).collect();
    let windows: BTreeSet<u32> = traces.iter().map(|r| r.t).collect();
    if agents.len() != cfg.agents as usize {
        return Err(PemError::Config(format!(
            "config has {} agents, traces have {}",
            cfg.agents,
            agents.len()
        )));
    }
    if windows.len() != cfg.windows as usize {
        return Err(PemError::Config(format!(
            "config has {} windows, traces have {}",
            cfg.windows,
            windows.len()
        )));
    }
    Ok(traces)
}

pub fn run_simulation(cfg: &SimulationConfig) -> Result<MetricsReport> {
    cfg.validate()?;
    let traces = simulation_traces(cfg)?;
    run_simulation_on(cfg, &traces)
}

pub fn run_simulation_on(cfg: &SimulationConfig, traces: &[TraceRecord]) -> Result<MetricsReport> {
    cfg.validate()?;
    let windows = window_profiles(cfg, traces)?;
    let network = match cfg.mode {
        Mode::Oracle => None,
        _ => {
            let ids: Vec<AgentId> = traces.iter().map(|r| r.agent_id).collect::<BTreeSet<_>>().into_iter().collect();
            Some(PemNetwork::setup(&ids, cfg.key_bits, cfg.seed, cfg.protocol()?, false)?)
        }
    };
    let mut report = MetricsReport {
        mode: cfg.mode,
        key_bits: cfg.key_bits,
        windows: Vec::with_capacity(windows.len()),
        violations: Vec::new(),
    };
    for (t, profiles) in &windows {
        let w = cfg.window_params(*t);
        let m = run_window(cfg.mode, network.as_ref(), profiles, &w, derive_seed(cfg.seed, &[u64::from(*t)]));
        report.violations.extend(check_window(&m, profiles, &w));
        report.windows.push(m);
    }
    Ok(report)
}

fn run_window(
    mode: Mode,
    network: Option<&PemNetwork>,
    profiles: &[AgentProfile],
    w: &WindowParams,
    seed: u64,
) -> WindowMetrics {
    let mut m = WindowMetrics {
        t: w.t,
        outcome: None,
        coalition_cost: f64::NAN,
        baseline_cost: f64::NAN,
        grid_kwh_pem: f64::NAN,
        grid_kwh_baseline: f64::NAN,
        bandwidth_bytes: 0,
        runtime_ms: 0.0,
        agents: Vec::new(),
        deviation: None,
        error: None,
    };
    let started = Instant::now();
    let result = (|| -> Result<(MarketOutcome, u64, Option<OutcomeDeviation>)> {
        match (mode, network) {
            (Mode::Oracle, _) => Ok((oracle_run_window(profiles, w)?, 0, None)),
            (_, Some(net)) => {
                let run = net.run_window(profiles, w, seed)?;
                let dev = if mode == Mode::Both {
                    Some(compare_outcomes(&run.outcome, &oracle_run_window(profiles, w)?))
                } else {
                    None
                };
                Ok((run.outcome, run.traffic.bytes_sent, dev))
            }
            (_, None) => Err(PemError::Config("secure mode without a network".into())),
        }
    })();
    m.runtime_ms = started.elapsed().as_secs_f64() * 1e3;
    let (outcome, bytes, dev) = match result {
        Ok(r) => r,
        Err(e) => {
            m.error = Some(e.to_string());
            return m;
        }
    };
    let baseline = match grid_only_baseline(profiles, w) {
        Ok(b) => b,
        Err(e) => {
            m.error = Some(e.to_string());
            return m;
        }
    };
    m.bandwidth_bytes = bytes;
    m.deviation = dev;
    m.coalition_cost = outcome.buyer_coalition_cost(w);
    m.baseline_cost = baseline.coalition_cost();
    m.grid_kwh_pem = outcome.grid_interaction();
    m.grid_kwh_baseline = baseline.grid_kwh;
    m.agents = agent_metrics(profiles, &outcome, w);
    m.outcome = Some(outcome);
    m
}

fn agent_metrics(profiles: &[AgentProfile], o: &MarketOutcome, w: &WindowParams) -> Vec<AgentMetrics> {
    let mut out: Vec<AgentMetrics> = profiles
        .iter()
        .map(|p| {
            let sn = net_energy(p);
            let role = crate::market::classify_role(sn);
            let id = p.agent_id;
            let realized = match role {
                Role::Seller => o.received_by(id) + w.grid_buyback * o.grid_sales.get(&id).copied().unwrap_or(0.0),
                Role::Buyer => o.paid_by(id) + w.grid_retail * o.grid_purchases.get(&id).copied().unwrap_or(0.0),
                Role::Off => 0.0,
            };
            AgentMetrics {
                id,
                role,
                net: sn,
                model_utility: (role == Role::Seller)
                    .then(|| seller_utility(p, o.price).ok())
                    .flatten(),
                realized,
            }
        })
        .collect();
    out.sort_by_key(|a| a.id);
    out
}

/// Invariant checks for one window; returns human-readable violations.
pub fn check_window(m: &WindowMetrics, profiles: &[AgentProfile], w: &WindowParams) -> Vec<String> {
    let mut v = Vec::new();
    if let Some(e) = &m.error {
        v.push(format!("window {}: aborted: {e}", m.t));
        return v;
    }
    let Some(o) = &m.outcome else { return v };
    let tol = INVARIANT_TOLERANCE;
    if let Err(e) = o.check_invariants(&market_totals(profiles), w, tol) {
        v.push(e.to_string());
    }
    if m.grid_kwh_pem > m.grid_kwh_baseline + tol {
        v.push(format!("window {}: grid interaction {} above baseline {}", m.t, m.grid_kwh_pem, m.grid_kwh_baseline));
    }
    if m.coalition_cost > m.baseline_cost + tol {
        v.push(format!("window {}: coalition cost {} above baseline {}", m.t, m.coalition_cost, m.baseline_cost));
    }
    for a in &m.agents {
        match (a.role, a.per_kwh()) {
            (Role::Seller, Some(r)) if r < w.grid_buyback - tol => {
                v.push(format!("window {}: seller {} earns {r} per kWh", m.t, a.id))
            }
            (Role::Buyer, Some(c)) if c > w.grid_retail + tol => {
                v.push(format!("window {}: buyer {} pays {c} per kWh", m.t, a.id))
            }
            _ => {}
        }
    }
    if let Some(d) = m.deviation {
        if !d.within(PRICE_TOLERANCE, ENERGY_TOLERANCE, PAYMENT_TOLERANCE) {
            v.push(format!("window {}: secure and oracle outcomes differ: {d:?}", m.t));
        }
    }
    v
}
