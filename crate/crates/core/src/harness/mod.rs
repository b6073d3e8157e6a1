//! Traces, the plaintext oracle, the grid-only baseline and the simulation
//! pipeline with its metrics files.

mod config;
mod metrics;
mod oracle;
mod sim;
mod synth;
mod trace;

pub use config::{Mode, PerAgent, SimulationConfig};
pub use metrics::{emit_metrics, METRICS_HEADER};
pub use oracle::{
    compare_outcomes, demand_inflation, grid_only_baseline, oracle_run_window, BaselineOutcome, InflationReport,
    OutcomeDeviation,
};
pub use sim::{
    check_window, run_simulation, run_simulation_on, simulation_traces, window_profiles, AgentMetrics,
    MetricsReport, Summary, WindowMetrics, ENERGY_TOLERANCE, INVARIANT_TOLERANCE, PAYMENT_TOLERANCE,
    PRICE_TOLERANCE,
};
pub use synth::{generate_synthetic_traces, quantize, random_market, solar_profile, MarketShape, SolarDay};
pub use trace::{by_window, load_traces, read_traces, write_traces, TraceRecord, TRACE_HEADER};
