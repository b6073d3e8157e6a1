//! Simulation configuration: a flat `key = value` file.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::crypto::{FixedPointConfig, SUPPORTED_KEY_BITS};
use crate::error::{PemError, Result};
use crate::market::{AgentId, AgentProfile, WindowParams};
use crate::protocol::ProtocolConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Secure,
    Oracle,
    Both,
}

impl FromStr for Mode {
    type Err = PemError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "secure" => Ok(Mode::Secure),
            "oracle" => Ok(Mode::Oracle),
            "both" => Ok(Mode::Both),
            other => Err(PemError::Config(format!("mode must be secure, oracle or both, got {other:?}"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Secure => "secure",
            Mode::Oracle => "oracle",
            Mode::Both => "both",
        })
    }
}

/// A value that is either shared by every agent or listed per agent (in
/// ascending agent order).
#[derive(Clone, Debug, PartialEq)]
pub enum PerAgent {
    Uniform(f64),
    List(Vec<f64>),
}

impl PerAgent {
    pub fn get(&self, index: usize) -> f64 {
        match self {
            PerAgent::Uniform(v) => *v,
            PerAgent::List(vs) => vs[index],
        }
    }

    fn parse(key: &str, s: &str) -> Result<Self> {
        let vals = s
            .split(',')
            .map(|x| parse_num::<f64>(key, x.trim()))
            .collect::<Result<Vec<_>>>()?;
        Ok(if vals.len() == 1 {
            PerAgent::Uniform(vals[0])
        } else {
            PerAgent::List(vals)
        })
    }

    fn len_ok(&self, n: usize) -> bool {
        match self {
            PerAgent::Uniform(_) => true,
            PerAgent::List(v) => v.len() == n,
        }
    }

    fn all(&self, f: impl Fn(f64) -> bool) -> bool {
        match self {
            PerAgent::Uniform(v) => f(*v),
            PerAgent::List(vs) => vs.iter().all(|v| f(*v)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationConfig {
    pub agents: u16,
    pub windows: u32,
    pub key_bits: u32,
    pub price_floor: f64,
    pub price_cap: f64,
    pub grid_retail: f64,
    pub grid_buyback: f64,
    pub preference: PerAgent,
    pub loss_coeff: PerAgent,
    /// Battery capacities; `None` means each window's |battery|.
    pub capacity: Option<PerAgent>,
    pub fixed_scale: u64,
    pub ratio_scale: u64,
    pub seed: u64,
    pub mode: Mode,
    /// Trace CSV; synthetic solar-day traces when absent.
    pub traces: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            agents: 10,
            windows: 20,
            key_bits: 512,
            price_floor: 90.0,
            price_cap: 110.0,
            grid_retail: 120.0,
            grid_buyback: 80.0,
            preference: PerAgent::Uniform(20.0),
            loss_coeff: PerAgent::Uniform(0.9),
            capacity: None,
            fixed_scale: 1_000_000,
            ratio_scale: 1_000_000,
            seed: 1,
            mode: Mode::Secure,
            traces: None,
            output_dir: PathBuf::from("pem-out"),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| PemError::Config(format!("{key}: cannot parse {s:?}")))
}

impl SimulationConfig {
    pub const KEYS: [&'static str; 16] = [
        "agents",
        "windows",
        "key_bits",
        "price_floor",
        "price_cap",
        "grid_retail",
        "grid_buyback",
        "preference",
        "loss_coeff",
        "capacity",
        "fixed_scale",
        "ratio_scale",
        "seed",
        "mode",
        "traces",
        "output_dir",
    ];

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "agents" => self.agents = parse_num(key, v)?,
            "windows" => self.windows = parse_num(key, v)?,
            "key_bits" => self.key_bits = parse_num(key, v)?,
            "price_floor" => self.price_floor = parse_num(key, v)?,
            "price_cap" => self.price_cap = parse_num(key, v)?,
            "grid_retail" => self.grid_retail = parse_num(key, v)?,
            "grid_buyback" => self.grid_buyback = parse_num(key, v)?,
            "preference" => self.preference = PerAgent::parse(key, v)?,
            "loss_coeff" => self.loss_coeff = PerAgent::parse(key, v)?,
            "capacity" => self.capacity = Some(PerAgent::parse(key, v)?),
            "fixed_scale" => self.fixed_scale = parse_num(key, v)?,
            "ratio_scale" => self.ratio_scale = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "mode" => self.mode = v.parse()?,
            "traces" => self.traces = Some(PathBuf::from(v)),
            "output_dir" => self.output_dir = PathBuf::from(v),
            other => return Err(PemError::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SimulationConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| PemError::Config(format!("line {}: expected key = value", i + 1)))?;
            cfg.set(k.trim(), v)
                .map_err(|e| PemError::Config(format!("line {}: {e}", i + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| PemError::Config(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse(&text)
    }

    pub fn window_params(&self, t: u32) -> WindowParams {
        WindowParams {
            t,
            price_floor: self.price_floor,
            price_cap: self.price_cap,
            grid_retail: self.grid_retail,
            grid_buyback: self.grid_buyback,
        }
    }

    pub fn protocol(&self) -> Result<ProtocolConfig> {
        Ok(ProtocolConfig {
            fixed: FixedPointConfig::new(self.fixed_scale, crate::crypto::DEFAULT_VALUE_BITS)?,
            ratio_scale: self.ratio_scale,
            ..ProtocolConfig::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(PemError::Config(m));
        if self.agents < 2 {
            return err(format!("need at least 2 agents, got {}", self.agents));
        }
        if self.windows < 1 {
            return err("need at least 1 window".into());
        }
        if !SUPPORTED_KEY_BITS.contains(&self.key_bits) {
            return err(format!("key_bits must be one of {SUPPORTED_KEY_BITS:?}"));
        }
        self.window_params(1).validate()?;
        let n = self.agents as usize;
        for (name, v) in [("preference", &self.preference), ("loss_coeff", &self.loss_coeff)] {
            if !v.len_ok(n) {
                return err(format!("{name}: expected 1 or {n} values"));
            }
        }
        if !self.preference.all(|k| k > 0.0 && k.is_finite()) {
            return err("preference k must be positive".into());
        }
        if !self.loss_coeff.all(|e| e > 0.0 && e < 1.0) {
            return err("loss_coeff must lie in (0, 1)".into());
        }
        if let Some(c) = &self.capacity {
            if !c.len_ok(n) || !c.all(|v| v >= 0.0 && v.is_finite()) {
                return err(format!("capacity: expected 1 or {n} nonnegative values"));
            }
        }
        if self.ratio_scale == 0 {
            return err("ratio_scale must be positive".into());
        }
        self.protocol()?.validate(n, self.key_bits)?;
        Ok(())
    }

    /// Builds the profile of the `index`-th agent (ascending id order).
    pub fn profile(&self, index: usize, id: AgentId, generation: f64, load: f64, battery: f64) -> AgentProfile {
        let p = AgentProfile::new(id.0, generation, load, battery)
            .with_preference(self.preference.get(index))
            .with_loss_coeff(self.loss_coeff.get(index));
        match &self.capacity {
            Some(c) => p.with_capacity(c.get(index)),
            None => p,
        }
    }
}
