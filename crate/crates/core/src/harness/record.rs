//! Per-trial records and their CSV layout.
//!
//! `records.csv` columns, in order:
//!
//! | column | meaning |
//! |---|---|
//! | `trial`, `frame`, `seed` | trial index, frame within the trial, channel seed |
//! | `n_tx`, `n_ue`, `n_rx`, `n_layers` | system dimensions |
//! | `precoder` | precoder id |
//! | `delta_p_db` | flatness target (`inf` for conventional, empty for explicit bounds) |
//! | `p_tx`, `p_ub`, `p_lb` | budget in watts |
//! | `status` | `ok`, `no_feasible_point` or `failed: <reason>` |
//! | `wsr_nats` | weighted sum rate, nats/s/Hz |
//! | `sum_rate_bps` | unweighted sum rate in bit/s |
//! | `iterations`, `converged` | solver self-report |
//! | `spc_ok`, `ub_ok`, `lb_ok`, `feasible` | independent recheck of the powers |
//! | `sum_excess_w`, `max_ub_excess_w`, `max_lb_deficit_w` | recheck margins |
//! | `p_sat_db`, `p_pa_w`, `p_total_w`, `energy_eff_bit_per_j` | PA accounting at the trial's own saturation power (empty if above the PA limit) |
//! | `ue_rates_bits_per_hz`, `weights`, `antenna_powers_w` | `;`-separated lists |
//!
//! Solve times are kept out of this file so reruns are byte-identical; they
//! go to `timings.csv`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::config::PrecoderKind;
use crate::channel::SystemDims;
use crate::constraints::{FeasibilityCheck, PowerBudget};
use crate::error::{FlatPrecError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum TrialStatus {
    Ok,
    /// The ZF solver could not meet the lower bound; the record holds its best iterate.
    NoFeasiblePoint,
    Failed(String),
}

impl TrialStatus {
    fn to_field(&self) -> String {
        match self {
            Self::Ok => "ok".into(),
            Self::NoFeasiblePoint => "no_feasible_point".into(),
            Self::Failed(m) => format!("failed: {m}"),
        }
    }

    fn from_field(s: &str) -> Result<Self> {
        match s {
            "ok" => Ok(Self::Ok),
            "no_feasible_point" => Ok(Self::NoFeasiblePoint),
            _ => s
                .strip_prefix("failed: ")
                .map(|m| Self::Failed(m.to_string()))
                .ok_or_else(|| FlatPrecError::Parse(format!("unknown status {s:?}"))),
        }
    }
}

/// PA figures of one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFigures {
    pub p_sat_db: f64,
    pub p_pa_w: f64,
    pub p_total_w: f64,
    pub energy_eff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub frame: usize,
    pub seed: u64,
    pub dims: SystemDims,
    pub precoder: PrecoderKind,
    pub budget: PowerBudget,
    pub status: TrialStatus,
    pub wsr_nats: f64,
    pub sum_rate_bps: f64,
    pub ue_rates_bits: Vec<f64>,
    pub weights: Vec<f64>,
    pub powers: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub feasibility: FeasibilityCheck,
    pub power: Option<PowerFigures>,
    /// Solver wall-clock time; not written to `records.csv`.
    pub solve_time_s: Option<f64>,
}

impl TrialRecord {
    /// Feasible after recheck, or an explicitly flagged infeasibility.
    pub fn accounted_for(&self) -> bool {
        match self.status {
            TrialStatus::Ok => self.feasibility.all(),
            TrialStatus::NoFeasiblePoint => true,
            TrialStatus::Failed(_) => false,
        }
    }

    pub fn has_precoder(&self) -> bool {
        !matches!(self.status, TrialStatus::Failed(_))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RecordRow {
    trial: usize,
    frame: usize,
    seed: u64,
    n_tx: usize,
    n_ue: usize,
    n_rx: usize,
    n_layers: usize,
    precoder: String,
    delta_p_db: Option<f64>,
    p_tx: f64,
    p_ub: f64,
    p_lb: f64,
    status: String,
    wsr_nats: f64,
    sum_rate_bps: f64,
    iterations: usize,
    converged: bool,
    spc_ok: bool,
    ub_ok: bool,
    lb_ok: bool,
    feasible: bool,
    sum_excess_w: f64,
    max_ub_excess_w: f64,
    max_lb_deficit_w: f64,
    p_sat_db: Option<f64>,
    p_pa_w: Option<f64>,
    p_total_w: Option<f64>,
    energy_eff_bit_per_j: Option<f64>,
    ue_rates_bits_per_hz: String,
    weights: String,
    antenna_powers_w: String,
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn split(s: &str) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|x| x.parse::<f64>().map_err(|e| FlatPrecError::Parse(format!("{x:?}: {e}"))))
        .collect()
}

impl From<&TrialRecord> for RecordRow {
    fn from(r: &TrialRecord) -> Self {
        let f = &r.feasibility;
        Self {
            trial: r.trial,
            frame: r.frame,
            seed: r.seed,
            n_tx: r.dims.n_tx,
            n_ue: r.dims.n_ue,
            n_rx: r.dims.n_rx,
            n_layers: r.dims.n_layers,
            precoder: r.precoder.id().into(),
            delta_p_db: r.budget.delta_p_db,
            p_tx: r.budget.p_tx,
            p_ub: r.budget.p_ub,
            p_lb: r.budget.p_lb,
            status: r.status.to_field(),
            wsr_nats: r.wsr_nats,
            sum_rate_bps: r.sum_rate_bps,
            iterations: r.iterations,
            converged: r.converged,
            spc_ok: f.spc,
            ub_ok: f.ub,
            lb_ok: f.lb,
            feasible: f.all(),
            sum_excess_w: f.sum_excess,
            max_ub_excess_w: f.max_ub_excess,
            max_lb_deficit_w: f.max_lb_deficit,
            p_sat_db: r.power.map(|p| p.p_sat_db),
            p_pa_w: r.power.map(|p| p.p_pa_w),
            p_total_w: r.power.map(|p| p.p_total_w),
            energy_eff_bit_per_j: r.power.map(|p| p.energy_eff),
            ue_rates_bits_per_hz: join(&r.ue_rates_bits),
            weights: join(&r.weights),
            antenna_powers_w: join(&r.powers),
        }
    }
}

impl TryFrom<RecordRow> for TrialRecord {
    type Error = FlatPrecError;

    fn try_from(r: RecordRow) -> Result<Self> {
        let power = match (r.p_sat_db, r.p_pa_w, r.p_total_w, r.energy_eff_bit_per_j) {
            (Some(p_sat_db), Some(p_pa_w), Some(p_total_w), Some(energy_eff)) => Some(PowerFigures {
                p_sat_db,
                p_pa_w,
                p_total_w,
                energy_eff,
            }),
            _ => None,
        };
        Ok(Self {
            trial: r.trial,
            frame: r.frame,
            seed: r.seed,
            dims: SystemDims::new(r.n_tx, r.n_ue, r.n_rx, r.n_layers)?,
            precoder: r.precoder.parse()?,
            budget: PowerBudget {
                p_tx: r.p_tx,
                p_ub: r.p_ub,
                p_lb: r.p_lb,
                delta_p_db: r.delta_p_db,
            },
            status: TrialStatus::from_field(&r.status)?,
            wsr_nats: r.wsr_nats,
            sum_rate_bps: r.sum_rate_bps,
            ue_rates_bits: split(&r.ue_rates_bits_per_hz)?,
            weights: split(&r.weights)?,
            powers: split(&r.antenna_powers_w)?,
            iterations: r.iterations,
            converged: r.converged,
            feasibility: FeasibilityCheck {
                spc: r.spc_ok,
                ub: r.ub_ok,
                lb: r.lb_ok,
                sum_excess: r.sum_excess_w,
                max_ub_excess: r.max_ub_excess_w,
                max_lb_deficit: r.max_lb_deficit_w,
            },
            power,
            solve_time_s: None,
        })
    }
}

pub fn write_records<W: Write>(out: W, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(RecordRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<TrialRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    rd.deserialize::<RecordRow>()
        .map(|row| TrialRecord::try_from(row?))
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct TimingRow {
    trial: usize,
    frame: usize,
    n_tx: usize,
    n_ue: usize,
    n_rx: usize,
    n_layers: usize,
    precoder: String,
    delta_p_db: Option<f64>,
    p_ub: f64,
    p_lb: f64,
    iterations: usize,
    solve_time_s: f64,
}

/// Writes `timings.csv`, one row per record in the same order.
pub fn write_timings<W: Write>(out: W, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(TimingRow {
            trial: r.trial,
            frame: r.frame,
            n_tx: r.dims.n_tx,
            n_ue: r.dims.n_ue,
            n_rx: r.dims.n_rx,
            n_layers: r.dims.n_layers,
            precoder: r.precoder.id().into(),
            delta_p_db: r.budget.delta_p_db,
            p_ub: r.budget.p_ub,
            p_lb: r.budget.p_lb,
            iterations: r.iterations,
            solve_time_s: r.solve_time_s.unwrap_or(f64::NAN),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Fills `solve_time_s` from a `timings.csv` written alongside the records.
pub fn attach_timings<R: Read>(records: &mut [TrialRecord], input: R) -> Result<()> {
    let mut rd = csv::Reader::from_reader(input);
    let rows = rd.deserialize::<TimingRow>().collect::<std::result::Result<Vec<_>, _>>()?;
    if rows.len() != records.len() {
        return Err(FlatPrecError::Parse(format!(
            "{} timing rows for {} records",
            rows.len(),
            records.len()
        )));
    }
    for (rec, t) in records.iter_mut().zip(rows) {
        if t.trial != rec.trial || t.frame != rec.frame || t.precoder != rec.precoder.id() {
            return Err(FlatPrecError::Parse(format!(
                "timing row for trial {} does not match record order",
                t.trial
            )));
        }
        rec.solve_time_s = t.solve_time_s.is_finite().then_some(t.solve_time_s);
    }
    Ok(())
}
