use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use pem_core::harness::{
    compare_outcomes, demand_inflation, emit_metrics, generate_synthetic_traces, oracle_run_window, random_market, run_simulation,
    write_traces, MarketShape, Mode, OutcomeDeviation, SimulationConfig, SolarDay, ENERGY_TOLERANCE,
    PAYMENT_TOLERANCE, PRICE_TOLERANCE,
};
use pem_core::market::{market_totals, AgentId, WindowParams};
use pem_core::protocol::{PemNetwork, ProtocolConfig, Stage};
use pem_core::runtime::{bandwidth_report, derive_seed};
use pem_core::PemError;

#[derive(Parser)]
#[command(name = "pem", version, about = "Private energy market simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write metrics files.
    Run(RunArgs),
    /// Write synthetic solar-day traces as CSV.
    GenTraces(GenArgs),
    /// Compare the secure pipeline with the plaintext oracle on random windows.
    Verify(VerifyArgs),
    /// Runtime and bandwidth sweep over population and key sizes.
    Bench(BenchArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// secure, oracle or both.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    agents: Option<u16>,
    #[arg(long)]
    windows: Option<u32>,
    #[arg(long)]
    key_bits: Option<u32>,
    #[arg(long)]
    traces: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra `key=value` overrides, same keys as the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 10)]
    agents: u16,
    #[arg(long, default_value_t = 720)]
    windows: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = SolarDay::default().peak_generation)]
    peak_generation: f64,
    #[arg(long, default_value_t = SolarDay::default().base_load)]
    base_load: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 50)]
    windows: u32,
    #[arg(long, default_value_t = 10)]
    agents: u16,
    #[arg(long, default_value_t = 512)]
    key_bits: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [10u16, 20, 40])]
    agents: Vec<u16>,
    #[arg(long, value_delimiter = ',', default_values_t = [512u32])]
    key_bits: Vec<u32>,
    #[arg(long, default_value_t = 3)]
    windows: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<PemError>() {
        Some(PemError::Config(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::GenTraces(a) => gen_traces(a).map(|_| 0),
        Command::Verify(a) => verify(a),
        Command::Bench(a) => bench(a).map(|_| 0),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn build_config(a: &RunArgs) -> Result<SimulationConfig, PemError> {
    let mut cfg = match &a.config {
        Some(p) => SimulationConfig::load(p)?,
        None => SimulationConfig::default(),
    };
    let mut set = |k: &str, v: Option<String>| v.map_or(Ok(()), |v| cfg.set(k, &v));
    set("seed", a.seed.map(|v| v.to_string()))?;
    set("mode", a.mode.clone())?;
    set("agents", a.agents.map(|v| v.to_string()))?;
    set("windows", a.windows.map(|v| v.to_string()))?;
    set("key_bits", a.key_bits.map(|v| v.to_string()))?;
    set("traces", a.traces.as_ref().map(|p| p.display().to_string()))?;
    set("output_dir", a.out.as_ref().map(|p| p.display().to_string()))?;
    for kv in &a.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| PemError::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(a: RunArgs) -> anyhow::Result<u8> {
    let cfg = build_config(&a)?;
    let report = run_simulation(&cfg)?;
    let files = emit_metrics(&report, &cfg.output_dir)?;
    let s = report.summary();
    println!(
        "{} windows ({} completed), mode {}, {}-bit keys",
        s.windows, s.completed, report.mode, report.key_bits
    );
    println!("mean price            {:.4} cents/kWh", s.mean_price);
    println!("cost reduction        {:.2}%", s.cost_reduction_pct);
    println!("grid kWh per window   {:.4} (baseline {:.4})", s.mean_grid_kwh_pem, s.mean_grid_kwh_baseline);
    println!("bandwidth per window  {:.4} MB", s.mean_bandwidth_mb);
    println!("runtime per window    {:.1} ms", s.mean_runtime_ms);
    if report.mode == Mode::Both {
        println!(
            "max deviation         price {:.3e}, energy {:.3e}, payment {:.3e}",
            s.max_price_deviation, s.max_energy_deviation, s.max_payment_deviation
        );
    }
    for v in &report.violations {
        eprintln!("violation: {v}");
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(report.exit_code() as u8)
}

fn gen_traces(a: GenArgs) -> anyhow::Result<()> {
    let shape = SolarDay {
        peak_generation: a.peak_generation,
        base_load: a.base_load,
        ..SolarDay::default()
    };
    let recs = generate_synthetic_traces(a.seed, a.agents, a.windows, &shape);
    let f = std::fs::File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_traces(&recs, f)?;
    println!("wrote {} records to {}", recs.len(), a.out.display());
    Ok(())
}

fn verify(a: VerifyArgs) -> anyhow::Result<u8> {
    if a.agents < 2 {
        return Err(PemError::Config("need at least 2 agents".into()).into());
    }
    let ids: Vec<AgentId> = (1..=a.agents).map(AgentId).collect();
    let net = PemNetwork::setup(&ids, a.key_bits, a.seed, ProtocolConfig::default(), false)?;
    let mut worst = OutcomeDeviation {
        kind_matches: true,
        ..Default::default()
    };
    let mut inflation = Vec::new();
    let started = Instant::now();
    for i in 0..a.windows {
        let seed = derive_seed(a.seed, &[u64::from(i)]);
        let sellers = 1 + (seed % u64::from(a.agents - 1)) as usize;
        let shape = MarketShape {
            sellers,
            buyers: a.agents as usize - sellers,
            off_market: 0,
        };
        let ps = random_market(seed, shape);
        let w = WindowParams::standard(i + 1);
        let secure = net.run_window(&ps, &w, seed)?.outcome;
        let d = compare_outcomes(&secure, &oracle_run_window(&ps, &w)?);
        println!(
            "window {:>3}: {:<8} price {:>10.6}  dev price {:.1e} energy {:.1e} payment {:.1e}",
            i + 1,
            secure.kind.as_str(),
            secure.price,
            d.price,
            d.energy,
            d.payment
        );
        worst = worst.max(d);
        if let Some(b) = market_totals(&ps).buyers.first() {
            inflation.push(demand_inflation(&ps, &w, b.agent_id, 1.1)?.gain());
        }
    }
    let ok = worst.within(PRICE_TOLERANCE, ENERGY_TOLERANCE, PAYMENT_TOLERANCE);
    println!(
        "{} windows in {:.1} s; max deviation price {:.3e}, energy {:.3e}, payment {:.3e}; kinds {}: {}",
        a.windows,
        started.elapsed().as_secs_f64(),
        worst.price,
        worst.energy,
        worst.payment,
        if worst.kind_matches { "identical" } else { "differ" },
        if ok { "PASS" } else { "FAIL" }
    );
    if !inflation.is_empty() {
        let gains = inflation.iter().filter(|g| **g > 1e-9).count();
        println!(
            "demand inflation by 10%: mean gain {:.4} cents, profitable in {gains} of {} windows",
            inflation.iter().sum::<f64>() / inflation.len() as f64,
            inflation.len()
        );
    }
    Ok(if ok { 0 } else { 1 })
}

fn bench(a: BenchArgs) -> anyhow::Result<()> {
    println!("agents,key_bits,keygen_s,ms_per_window,mb_per_window,eval_msgs,pricing_msgs,distribution_msgs");
    for &bits in &a.key_bits {
        for &n in &a.agents {
            let ids: Vec<AgentId> = (1..=n).map(AgentId).collect();
            let t0 = Instant::now();
            let net = PemNetwork::setup(&ids, bits, a.seed, ProtocolConfig::default(), false)?;
            let keygen_s = t0.elapsed().as_secs_f64();
            let mut traffic = Vec::new();
            let t1 = Instant::now();
            for i in 0..a.windows {
                let seed = derive_seed(a.seed, &[u64::from(n), u64::from(i)]);
                let ps = random_market(
                    seed,
                    MarketShape {
                        sellers: n as usize / 2,
                        buyers: n as usize - n as usize / 2,
                        off_market: 0,
                    },
                );
                traffic.push(net.run_window(&ps, &WindowParams::standard(i + 1), seed)?.traffic);
            }
            let ms = t1.elapsed().as_secs_f64() * 1e3 / f64::from(a.windows.max(1));
            let report = bandwidth_report(&traffic);
            let per = |s: Stage| traffic.iter().map(|t| t.stage_messages(s)).sum::<u64>() / u64::from(a.windows.max(1));
            println!(
                "{n},{bits},{keygen_s:.2},{ms:.1},{:.4},{},{},{}",
                report.mean_mb_per_window,
                per(Stage::Evaluation),
                per(Stage::Pricing),
                per(Stage::Distribution)
            );
        }
    }
    Ok(())
}
