//! Seeded synthetic inputs: a solar-day trace generator with the trace CSV
//! schema, and random single-window markets for equivalence suites.
//!
//! All values are quantized to 1e-6 kWh so that they are exact in the
//! default fixed-point codec.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::trace::TraceRecord;
use crate::market::{AgentId, AgentProfile};

pub fn quantize(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Shape of the synthetic day.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolarDay {
    /// Mean generation per window at solar noon, kWh.
    pub peak_generation: f64,
    /// Mean load per window, kWh.
    pub base_load: f64,
    /// Relative spread of per-agent panel sizes (0 = identical panels).
    pub panel_spread: f64,
    /// Relative per-window noise on generation and load.
    pub jitter: f64,
}

impl Default for SolarDay {
    fn default() -> Self {
        SolarDay {
            peak_generation: 2.0,
            base_load: 1.0,
            panel_spread: 0.6,
            jitter: 0.3,
        }
    }
}

/// `sin^2` bell over windows `1..=m`, zero at both ends.
pub fn solar_profile(t: u32, m: u32) -> f64 {
    if m < 2 {
        return 0.0;
    }
    let x = std::f64::consts::PI * f64::from(t - 1) / f64::from(m - 1);
    if t == 1 || t == m {
        0.0
    } else {
        x.sin().powi(2)
    }
}

/// Agents `1..=n` over windows `1..=m`, battery 0.
pub fn generate_synthetic_traces(seed: u64, n: u16, m: u32, shape: &SolarDay) -> Vec<TraceRecord> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let panels: Vec<f64> = (0..n)
        .map(|_| 1.0 + shape.panel_spread * rng.gen_range(-1.0..=1.0))
        .collect();
    let appetite: Vec<f64> = (0..n).map(|_| rng.gen_range(0.6..=1.4)).collect();
    let mut out = Vec::with_capacity(n as usize * m as usize);
    for t in 1..=m {
        let sun = solar_profile(t, m);
        for i in 0..n {
            let noise_g = 1.0 + shape.jitter * rng.gen_range(-1.0..=1.0);
            let noise_l = 1.0 + shape.jitter * rng.gen_range(-1.0..=1.0);
            let generation = quantize((shape.peak_generation * panels[i as usize] * sun * noise_g).max(0.0));
            let load = quantize((shape.base_load * appetite[i as usize] * noise_l).max(1e-3));
            out.push(TraceRecord {
                t,
                agent_id: AgentId(i + 1),
                generation,
                load,
                battery: 0.0,
            });
        }
    }
    out
}

/// Coalition sizes for [`random_market`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MarketShape {
    pub sellers: usize,
    pub buyers: usize,
    pub off_market: usize,
}

/// A random single-window market with ids `1..`. Sellers draw `k` from
/// [20, 400] so both clamped and interior prices occur. Batteries are
/// multiples of 1e-5 kWh, which keeps `g + 1 + eps*b - b` exact at 1e-6.
pub fn random_market(seed: u64, shape: MarketShape) -> Vec<AgentProfile> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut id = 1u16;
    let battery = |rng: &mut ChaCha20Rng| (rng.gen_range(-50_000i64..=50_000) as f64) / 1e5;
    for _ in 0..shape.sellers {
        let g = quantize(rng.gen_range(1.0..6.0));
        let b = battery(&mut rng);
        let surplus = quantize(rng.gen_range(0.05..0.8) * g);
        let l = quantize((g - b - surplus).max(0.0));
        let k = rng.gen_range(20..=400) as f64;
        out.push(AgentProfile::new(id, g, l, b).with_preference(k));
        id += 1;
    }
    for _ in 0..shape.buyers {
        let g = quantize(rng.gen_range(0.0..2.0));
        let b = battery(&mut rng);
        let deficit = quantize(rng.gen_range(0.1..4.0));
        let l = quantize((g - b + deficit).max(0.0));
        out.push(AgentProfile::new(id, g, l, b));
        id += 1;
    }
    for _ in 0..shape.off_market {
        let g = quantize(rng.gen_range(0.0..3.0));
        out.push(AgentProfile::new(id, g, g, 0.0));
        id += 1;
    }
    out
}
