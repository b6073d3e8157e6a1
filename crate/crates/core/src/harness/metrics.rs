use std::fs::File;
use std::path::{Path, PathBuf};

use super::sim::MetricsReport;
use crate::error::{PemError, Result};

pub const METRICS_HEADER: [&str; 9] = [
    "t",
    "kind",
    "price",
    "coalition_cost",
    "baseline_cost",
    "grid_kwh_pem",
    "grid_kwh_baseline",
    "bandwidth_bytes",
    "runtime_ms",
];

fn create(path: &Path) -> Result<csv::Writer<File>> {
    let f = File::create(path).map_err(|e| PemError::Io(format!("{}: {e}", path.display())))?;
    Ok(csv::Writer::from_writer(f))
}

/// Writes `metrics.csv`, `summary.csv`, `prices.csv` and `outcomes.csv` into
/// `dir` and returns their paths.
pub fn emit_metrics(report: &MetricsReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| PemError::Io(format!("{}: {e}", dir.display())))?;
    let paths: Vec<PathBuf> = ["metrics.csv", "summary.csv", "prices.csv", "outcomes.csv"]
        .iter()
        .map(|f| dir.join(f))
        .collect();

    let mut w = create(&paths[0])?;
    w.write_record(METRICS_HEADER)?;
    for m in &report.windows {
        w.write_record(&[
            m.t.to_string(),
            m.kind().map_or("error".into(), |k| k.to_string()),
            m.price().to_string(),
            m.coalition_cost.to_string(),
            m.baseline_cost.to_string(),
            m.grid_kwh_pem.to_string(),
            m.grid_kwh_baseline.to_string(),
            m.bandwidth_bytes.to_string(),
            format!("{:.3}", m.runtime_ms),
        ])?;
    }
    w.flush()?;

    let s = report.summary();
    let mut w = create(&paths[1])?;
    w.write_record(["metric", "value"])?;
    for (k, v) in [
        ("mode", report.mode.to_string()),
        ("key_bits", report.key_bits.to_string()),
        ("windows", s.windows.to_string()),
        ("completed_windows", s.completed.to_string()),
        ("mean_price", s.mean_price.to_string()),
        ("mean_coalition_cost", s.mean_coalition_cost.to_string()),
        ("mean_baseline_cost", s.mean_baseline_cost.to_string()),
        ("cost_reduction_pct", s.cost_reduction_pct.to_string()),
        ("mean_grid_kwh_pem", s.mean_grid_kwh_pem.to_string()),
        ("mean_grid_kwh_baseline", s.mean_grid_kwh_baseline.to_string()),
        ("mean_bandwidth_mb", s.mean_bandwidth_mb.to_string()),
        ("mean_runtime_ms", s.mean_runtime_ms.to_string()),
        ("max_price_deviation", s.max_price_deviation.to_string()),
        ("max_energy_deviation", s.max_energy_deviation.to_string()),
        ("max_payment_deviation", s.max_payment_deviation.to_string()),
        ("violations", report.violations.len().to_string()),
    ] {
        w.write_record([k, v.as_str()])?;
    }
    w.flush()?;

    let mut w = create(&paths[2])?;
    w.write_record(["t", "kind", "price"])?;
    for m in &report.windows {
        w.write_record(&[
            m.t.to_string(),
            m.kind().map_or("error".into(), |k| k.to_string()),
            m.price().to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = create(&paths[3])?;
    w.write_record(["t", "seller", "buyer", "energy_kwh", "payment_cents"])?;
    for o in report.windows.iter().filter_map(|m| m.outcome.as_ref()) {
        for ((s, b), e) in &o.allocations {
            let pay = o.payments.get(&(*b, *s)).copied().unwrap_or(0.0);
            w.write_record(&[o.t.to_string(), s.0.to_string(), b.0.to_string(), e.to_string(), pay.to_string()])?;
        }
    }
    w.flush()?;
    Ok(paths)
}
