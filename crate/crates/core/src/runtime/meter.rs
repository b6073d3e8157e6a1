use std::collections::BTreeMap;

use crate::market::AgentId;
use crate::protocol::{Phase, Stage};

pub const BYTES_PER_MB: f64 = 1_000_000.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PhaseTraffic {
    /// Deliveries (a broadcast to k agents counts k).
    pub messages: u64,
    pub bytes: u64,
}

/// Serialized traffic of one window.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WindowTraffic {
    pub t: u32,
    pub bytes_sent: u64,
    pub bytes_received: u64,
    pub per_phase: BTreeMap<Phase, PhaseTraffic>,
    /// `(sent, received)` per agent.
    pub per_agent: BTreeMap<AgentId, (u64, u64)>,
}

impl WindowTraffic {
    pub(crate) fn new(t: u32) -> Self {
        WindowTraffic {
            t,
            ..Default::default()
        }
    }

    pub(crate) fn record_send(&mut self, sender: AgentId, phase: Phase, bytes: u64, fanout: u64) {
        self.bytes_sent += bytes * fanout;
        self.per_agent.entry(sender).or_default().0 += bytes * fanout;
        let p = self.per_phase.entry(phase).or_default();
        p.messages += fanout;
        p.bytes += bytes * fanout;
    }

    pub(crate) fn record_receive(&mut self, to: AgentId, bytes: u64) {
        self.bytes_received += bytes;
        self.per_agent.entry(to).or_default().1 += bytes;
    }

    pub fn in_flight(&self) -> u64 {
        self.bytes_sent - self.bytes_received
    }

    pub fn messages(&self) -> u64 {
        self.per_phase.values().map(|p| p.messages).sum()
    }

    pub fn stage_messages(&self, stage: Stage) -> u64 {
        self.per_phase
            .iter()
            .filter(|(ph, _)| ph.stage() == stage)
            .map(|(_, p)| p.messages)
            .sum()
    }

    pub fn phase_bytes(&self, phases: &[Phase]) -> u64 {
        phases
            .iter()
            .filter_map(|ph| self.per_phase.get(ph))
            .map(|p| p.bytes)
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BandwidthReport {
    pub windows: usize,
    pub total_bytes: u64,
    pub mean_mb_per_window: f64,
    /// Mean bytes per window for each phase.
    pub mean_bytes_by_phase: BTreeMap<Phase, f64>,
}

impl BandwidthReport {
    /// Mean MB per window restricted to `phases`.
    pub fn mean_mb_in(&self, phases: &[Phase]) -> f64 {
        phases
            .iter()
            .filter_map(|p| self.mean_bytes_by_phase.get(p))
            .sum::<f64>()
            / BYTES_PER_MB
    }
}

/// Average serialized bytes per window over `windows`.
pub fn bandwidth_report(windows: &[WindowTraffic]) -> BandwidthReport {
    let total_bytes: u64 = windows.iter().map(|w| w.bytes_sent).sum();
    let n = windows.len().max(1) as f64;
    let mut by_phase: BTreeMap<Phase, f64> = BTreeMap::new();
    for w in windows {
        for (ph, t) in &w.per_phase {
            *by_phase.entry(*ph).or_default() += t.bytes as f64;
        }
    }
    for v in by_phase.values_mut() {
        *v /= n;
    }
    BandwidthReport {
        windows: windows.len(),
        total_bytes,
        mean_mb_per_window: total_bytes as f64 / n / BYTES_PER_MB,
        mean_bytes_by_phase: by_phase,
    }
}
