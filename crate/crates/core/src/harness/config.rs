//! Experiment configuration, read from TOML.
//!
//! ```toml
//! precoders = ["frg_flat_zf", "conv_zf_spc"]
//!
//! [system]
//! n_tx = [32]
//! n_ue = [8]
//!
//! [budget]
//! p_tx = 160.0
//! delta_p_db = [0.0, 1.0, 2.0, inf]
//!
//! [channel]
//! trials = 200
//! snr_db = 10.0
//! ```
//!
//! Every table except `[system]` and `[channel]` may be omitted.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::SystemDims;
use crate::constraints::PowerBudget;
use crate::error::{FlatPrecError, Result};
use crate::power::{actual_ub_papc, PaModel};
use crate::wmmse::WmmseOptions;
use crate::zf::frg::FrgOptions;
use crate::zf::sdr::SdrOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecoderKind {
    FlatWmmse,
    FrgFlatZf,
    SdrFlatZf,
    ConvWmmse,
    ConvZfSpc,
}

impl PrecoderKind {
    pub const ALL: [PrecoderKind; 5] = [
        Self::FlatWmmse,
        Self::FrgFlatZf,
        Self::SdrFlatZf,
        Self::ConvWmmse,
        Self::ConvZfSpc,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Self::FlatWmmse => "flat_wmmse",
            Self::FrgFlatZf => "frg_flat_zf",
            Self::SdrFlatZf => "sdr_flat_zf",
            Self::ConvWmmse => "conv_wmmse",
            Self::ConvZfSpc => "conv_zf_spc",
        }
    }

    /// Conventional baselines ignore the flatness sweep.
    pub fn is_conventional(&self) -> bool {
        matches!(self, Self::ConvWmmse | Self::ConvZfSpc)
    }
}

impl fmt::Display for PrecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl std::str::FromStr for PrecoderKind {
    type Err = FlatPrecError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.id() == s)
            .ok_or_else(|| FlatPrecError::Parse(format!("unknown precoder {s:?}")))
    }
}

fn one() -> Vec<usize> {
    vec![1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSweep {
    pub n_tx: Vec<usize>,
    pub n_ue: Vec<usize>,
    #[serde(default = "one")]
    pub n_rx: Vec<usize>,
    #[serde(default = "one")]
    pub n_layers: Vec<usize>,
}

impl SystemSweep {
    /// Cartesian product in `(N, K, M, L)` order.
    pub fn dims(&self) -> Vec<SystemDims> {
        let mut out = Vec::new();
        for &n in &self.n_tx {
            for &k in &self.n_ue {
                for &m in &self.n_rx {
                    for &l in &self.n_layers {
                        out.push(SystemDims {
                            n_tx: n,
                            n_ue: k,
                            n_rx: m,
                            n_layers: l,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitBounds {
    pub p_ub: f64,
    pub p_lb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetSpec {
    pub p_tx: f64,
    /// Flatness targets. `inf` is the slot of the conventional baselines;
    /// flat precoders only run at finite entries.
    pub delta_p_db: Vec<f64>,
    /// Absolute per-antenna bounds in watts, run in addition to the sweep.
    pub explicit: Vec<ExplicitBounds>,
}

impl Default for BudgetSpec {
    fn default() -> Self {
        Self {
            p_tx: 160.0,
            delta_p_db: vec![0.0, 1.0, 2.0, f64::INFINITY],
            explicit: Vec::new(),
        }
    }
}

/// One budget a flat precoder is run against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BudgetPoint {
    Flatness(f64),
    Explicit(ExplicitBounds),
}

impl BudgetPoint {
    pub fn budget(&self, p_tx: f64, n_tx: usize) -> PowerBudget {
        match *self {
            Self::Flatness(dp) => PowerBudget::from_flatness(p_tx, n_tx, dp),
            Self::Explicit(e) => PowerBudget::new(p_tx, e.p_ub, e.p_lb),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    Rayleigh,
    Multipath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    #[serde(default = "ChannelSpec::default_generator")]
    pub generator: Generator,
    /// Plane waves per UE for the multipath generator.
    #[serde(default = "ChannelSpec::default_paths")]
    pub n_paths: usize,
    /// Transmit SNR `P_TX·E|h_ij|²/σ²` in dB.
    #[serde(default = "ChannelSpec::default_snr")]
    pub snr_db: f64,
    /// Per-UE large-scale gains in dB on top of `snr_db`.
    #[serde(default)]
    pub ue_gains_db: Option<Vec<f64>>,
    #[serde(default = "ChannelSpec::default_bandwidth")]
    pub bandwidth_hz: f64,
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
}

impl ChannelSpec {
    fn default_generator() -> Generator {
        Generator::Rayleigh
    }
    fn default_paths() -> usize {
        8
    }
    fn default_snr() -> f64 {
        10.0
    }
    fn default_bandwidth() -> f64 {
        400e6
    }

    /// Channel entry variance giving the configured transmit SNR at `p_tx`
    /// with unit noise power. Rates only depend on the ratio, so channels are
    /// always generated against `σ² = 1`.
    pub fn snr_scale(&self, p_tx: f64) -> f64 {
        10f64.powf(self.snr_db / 10.0) / p_tx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightMode {
    #[default]
    Equal,
    /// Inverse-average-rate weights updated over `frames` channel draws.
    Longterm { frames: usize },
}

impl WeightMode {
    pub fn frames(&self) -> usize {
        match self {
            Self::Equal => 1,
            Self::Longterm { frames } => *frames,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub wmmse: WmmseOptions,
    pub frg: FrgOptions,
    pub sdr: SdrOptions,
    /// Relative tolerance of the independent feasibility recheck.
    pub recheck_rel_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            wmmse: WmmseOptions::default(),
            frg: FrgOptions::default(),
            sdr: SdrOptions::default(),
            recheck_rel_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub precoders: Vec<PrecoderKind>,
    pub system: SystemSweep,
    #[serde(default)]
    pub budget: BudgetSpec,
    #[serde(default)]
    pub pa: PaModel,
    pub channel: ChannelSpec,
    #[serde(default)]
    pub solvers: SolverOptions,
    #[serde(default)]
    pub weights: WeightMode,
    /// Run trials on the rayon pool.
    #[serde(default = "yes")]
    pub parallel: bool,
}

fn yes() -> bool {
    true
}

fn field_err(field: &str, msg: impl fmt::Display) -> FlatPrecError {
    FlatPrecError::Config(format!("field `{field}`: {msg}"))
}

impl ExperimentConfig {
    /// Parses and validates. Syntax errors carry the TOML line and column.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| FlatPrecError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            FlatPrecError::Config(m) => FlatPrecError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| FlatPrecError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.precoders.is_empty() {
            return Err(field_err("precoders", "list is empty"));
        }
        let s = &self.system;
        for (name, v) in [
            ("system.n_tx", &s.n_tx),
            ("system.n_ue", &s.n_ue),
            ("system.n_rx", &s.n_rx),
            ("system.n_layers", &s.n_layers),
        ] {
            if v.is_empty() {
                return Err(field_err(name, "sweep is empty"));
            }
            if v.contains(&0) {
                return Err(field_err(name, "entries must be positive"));
            }
        }
        for d in s.dims() {
            d.validate().map_err(|e| field_err("system", e))?;
            if d.n_layers > d.n_rx {
                return Err(field_err(
                    "system.n_layers",
                    format!("L = {} exceeds M = {}", d.n_layers, d.n_rx),
                ));
            }
            if d.total_layers() > d.n_tx {
                return Err(field_err(
                    "system",
                    format!("K·L = {} exceeds N = {} (zero forcing impossible)", d.total_layers(), d.n_tx),
                ));
            }
        }
        let b = &self.budget;
        if !(b.p_tx > 0.0 && b.p_tx.is_finite()) {
            return Err(field_err("budget.p_tx", "must be positive and finite"));
        }
        if b.delta_p_db.is_empty() && b.explicit.is_empty() {
            return Err(field_err("budget", "need delta_p_db entries or explicit bounds"));
        }
        if let Some(x) = b.delta_p_db.iter().find(|x| !(**x >= 0.0)) {
            return Err(field_err("budget.delta_p_db", format!("{x} is negative or NaN")));
        }
        let has_flat = self.precoders.iter().any(|p| !p.is_conventional());
        if has_flat && self.budget_points().is_empty() {
            return Err(field_err(
                "budget.delta_p_db",
                "flat precoders need at least one finite entry or explicit bounds",
            ));
        }
        for (i, e) in b.explicit.iter().enumerate() {
            for d in s.dims() {
                PowerBudget::new(b.p_tx, e.p_ub, e.p_lb)
                    .validate(d.n_tx)
                    .map_err(|err| field_err(&format!("budget.explicit[{i}]"), err))?;
            }
        }
        self.pa.validate().map_err(|e| field_err("pa", e))?;
        let c = &self.channel;
        if c.trials == 0 {
            return Err(field_err("channel.trials", "must be at least 1"));
        }
        if !c.snr_db.is_finite() {
            return Err(field_err("channel.snr_db", "must be finite"));
        }
        if !(c.bandwidth_hz > 0.0 && c.bandwidth_hz.is_finite()) {
            return Err(field_err("channel.bandwidth_hz", "must be positive"));
        }
        if c.generator == Generator::Multipath && c.n_paths == 0 {
            return Err(field_err("channel.n_paths", "must be at least 1"));
        }
        if let Some(g) = &c.ue_gains_db {
            if let Some(bad) = s.n_ue.iter().find(|&&k| k != g.len()) {
                return Err(field_err(
                    "channel.ue_gains_db",
                    format!("{} gains but K = {bad}", g.len()),
                ));
            }
            if g.iter().any(|x| !x.is_finite()) {
                return Err(field_err("channel.ue_gains_db", "gains must be finite"));
            }
        }
        if let WeightMode::Longterm { frames } = self.weights {
            if frames == 0 {
                return Err(field_err("weights.frames", "must be at least 1"));
            }
        }
        if !(self.solvers.recheck_rel_tol >= 0.0) {
            return Err(field_err("solvers.recheck_rel_tol", "must be non-negative"));
        }
        Ok(())
    }

    /// Budgets the flat precoders are run against, sweep first.
    pub fn budget_points(&self) -> Vec<BudgetPoint> {
        self.budget
            .delta_p_db
            .iter()
            .filter(|x| x.is_finite())
            .map(|&x| BudgetPoint::Flatness(x))
            .chain(self.budget.explicit.iter().map(|&e| BudgetPoint::Explicit(e)))
            .collect()
    }

    /// Budget of the conventional baselines: sum power plus the largest
    /// per-antenna power the PA allows.
    pub fn conventional_budget(&self) -> PowerBudget {
        PowerBudget {
            delta_p_db: Some(f64::INFINITY),
            ..PowerBudget::new(self.budget.p_tx, actual_ub_papc(&self.pa), 0.0)
        }
    }

    /// Seed of trial `t`.
    pub fn trial_seed(&self, t: usize) -> u64 {
        self.channel.base_seed.wrapping_add(t as u64)
    }
}
