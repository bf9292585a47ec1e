//! Aggregation of trial records into per-method tables and empirical CDFs.

use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use super::config::PrecoderKind;
use super::record::TrialRecord;
use crate::channel::SystemDims;
use crate::constraints::PowerBudget;
use crate::error::{FlatPrecError, Result};
use crate::power::{lin_to_db, power_report_from_powers, PaModel};

/// Records sharing dimensions, precoder and budget.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupKey {
    pub dims: SystemDims,
    pub precoder: PrecoderKind,
    pub budget: PowerBudget,
}

impl GroupKey {
    fn of(r: &TrialRecord) -> Self {
        Self {
            dims: r.dims,
            precoder: r.precoder,
            budget: r.budget,
        }
    }

    fn matches(&self, r: &TrialRecord) -> bool {
        self.dims == r.dims
            && self.precoder == r.precoder
            && self.budget.p_tx.to_bits() == r.budget.p_tx.to_bits()
            && self.budget.p_ub.to_bits() == r.budget.p_ub.to_bits()
            && self.budget.p_lb.to_bits() == r.budget.p_lb.to_bits()
    }

    /// Human-readable method name, e.g. `frg_flat_zf (dp=1 dB)`.
    pub fn label(&self) -> String {
        match self.budget.delta_p_db {
            Some(dp) if dp.is_finite() => format!("{} (dp={dp} dB)", self.precoder),
            Some(_) => self.precoder.to_string(),
            None => format!("{} (ub={} W, lb={} W)", self.precoder, self.budget.p_ub, self.budget.p_lb),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: String,
    pub precoder: String,
    pub n_tx: usize,
    pub n_ue: usize,
    pub n_rx: usize,
    pub n_layers: usize,
    pub delta_p_db: Option<f64>,
    pub p_ub: f64,
    pub p_lb: f64,
    pub records: usize,
    pub feasible: usize,
    pub flagged_infeasible: usize,
    pub failed: usize,
    pub mean_sum_rate_gbps: f64,
    pub mean_wsr_nats: f64,
    /// PA saturation power the method needs over all its trials.
    pub p_sat_db: f64,
    /// Mean PA consumption at `p_sat_db`.
    pub mean_p_pa_w: f64,
    /// Mean of `P_PA + N·P_AE`.
    pub mean_p_total_w: f64,
    /// Mean sum rate over mean total power.
    pub energy_eff_mbit_per_j: f64,
    pub mean_iterations: f64,
    /// Left out of `summary.csv` so it stays reproducible; see [`Summary::write_timings`].
    #[serde(skip)]
    pub mean_solve_time_s: Option<f64>,
}

/// Empirical CDF as sorted `(value, cumulative fraction)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Cdf {
    pub key: GroupKey,
    pub points: Vec<(f64, f64)>,
}

impl Cdf {
    pub fn from_samples(key: GroupKey, mut samples: Vec<f64>) -> Self {
        samples.sort_by(f64::total_cmp);
        let n = samples.len() as f64;
        let points = samples
            .into_iter()
            .enumerate()
            .map(|(i, v)| (v, (i + 1) as f64 / n))
            .collect();
        Self { key, points }
    }

    /// Smallest sample with cumulative fraction at least `q`.
    pub fn quantile(&self, q: f64) -> Option<f64> {
        self.points.iter().find(|p| p.1 >= q).map(|p| p.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub power_cdfs: Vec<Cdf>,
    pub rate_cdfs: Vec<Cdf>,
}

/// Saturation power needed for a peak per-antenna power, without the carrier cap.
fn sat_for_peak(powers: &[f64], pa: &PaModel) -> Option<f64> {
    let peak = powers.iter().cloned().fold(0.0, f64::max);
    (peak > 0.0).then(|| lin_to_db(peak) + pa.il_db + pa.p_backoff_db)
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Groups records by method, in order of first appearance.
///
/// The PA of a method is sized once for all its trials, at the largest
/// saturation power any trial needs, and every trial's consumption is
/// evaluated at that level. Records without a precoder are counted but
/// excluded from the means; flagged-infeasible records are included.
pub fn summarize(records: &[TrialRecord], pa: &PaModel) -> Result<Summary> {
    if records.is_empty() {
        return Err(FlatPrecError::InvalidInput("no records to summarize".into()));
    }
    let mut keys: Vec<GroupKey> = Vec::new();
    for r in records {
        if !keys.iter().any(|k| k.matches(r)) {
            keys.push(GroupKey::of(r));
        }
    }
    let mut rows = Vec::with_capacity(keys.len());
    let mut power_cdfs = Vec::with_capacity(keys.len());
    let mut rate_cdfs = Vec::with_capacity(keys.len());
    for key in keys {
        let group: Vec<&TrialRecord> = records.iter().filter(|r| key.matches(r)).collect();
        let usable: Vec<&TrialRecord> = group.iter().copied().filter(|r| r.has_precoder()).collect();
        let p_sat_db = usable
            .iter()
            .filter_map(|r| sat_for_peak(&r.powers, pa))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut p_pa = Vec::with_capacity(usable.len());
        let mut p_total = Vec::with_capacity(usable.len());
        for r in &usable {
            if p_sat_db.is_finite() {
                let rep = power_report_from_powers(&r.powers, pa, p_sat_db, r.sum_rate_bps)?;
                p_pa.push(rep.p_pa);
                p_total.push(rep.p_total);
            }
        }
        let mean_rate = mean(usable.iter().map(|r| r.sum_rate_bps));
        let mean_total = mean(p_total.iter().copied());
        let times: Option<Vec<f64>> = usable.iter().map(|r| r.solve_time_s).collect();
        rows.push(SummaryRow {
            method: key.label(),
            precoder: key.precoder.id().into(),
            n_tx: key.dims.n_tx,
            n_ue: key.dims.n_ue,
            n_rx: key.dims.n_rx,
            n_layers: key.dims.n_layers,
            delta_p_db: key.budget.delta_p_db,
            p_ub: key.budget.p_ub,
            p_lb: key.budget.p_lb,
            records: group.len(),
            feasible: group.iter().filter(|r| r.has_precoder() && r.feasibility.all()).count(),
            flagged_infeasible: group
                .iter()
                .filter(|r| r.status == super::record::TrialStatus::NoFeasiblePoint)
                .count(),
            failed: group.len() - usable.len(),
            mean_sum_rate_gbps: mean_rate / 1e9,
            mean_wsr_nats: mean(usable.iter().map(|r| r.wsr_nats)),
            p_sat_db,
            mean_p_pa_w: mean(p_pa.iter().copied()),
            mean_p_total_w: mean_total,
            energy_eff_mbit_per_j: mean_rate / mean_total / 1e6,
            mean_iterations: mean(usable.iter().map(|r| r.iterations as f64)),
            mean_solve_time_s: times.filter(|t| !t.is_empty()).map(|t| mean(t.into_iter())),
        });
        power_cdfs.push(Cdf::from_samples(
            key.clone(),
            usable.iter().flat_map(|r| r.powers.iter().copied()).collect(),
        ));
        rate_cdfs.push(Cdf::from_samples(
            key,
            usable.iter().flat_map(|r| r.ue_rates_bits.iter().copied()).collect(),
        ));
    }
    Ok(Summary {
        rows,
        power_cdfs,
        rate_cdfs,
    })
}

#[derive(Serialize)]
struct CdfRow<'a> {
    precoder: &'a str,
    n_tx: usize,
    n_ue: usize,
    n_rx: usize,
    n_layers: usize,
    delta_p_db: Option<f64>,
    p_ub: f64,
    p_lb: f64,
    value: f64,
    cum_frac: f64,
}

impl Summary {
    pub fn write_rows<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Mean solve time and iterations per method.
    pub fn write_timings<W: Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row<'a> {
            method: &'a str,
            n_tx: usize,
            n_ue: usize,
            n_rx: usize,
            n_layers: usize,
            mean_iterations: f64,
            mean_solve_time_s: Option<f64>,
        }
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(Row {
                method: &r.method,
                n_tx: r.n_tx,
                n_ue: r.n_ue,
                n_rx: r.n_rx,
                n_layers: r.n_layers,
                mean_iterations: r.mean_iterations,
                mean_solve_time_s: r.mean_solve_time_s,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes CDFs with one `(value, cum_frac)` pair per line.
    pub fn write_cdfs<W: Write>(cdfs: &[Cdf], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for c in cdfs {
            for &(value, cum_frac) in &c.points {
                w.serialize(CdfRow {
                    precoder: c.key.precoder.id(),
                    n_tx: c.key.dims.n_tx,
                    n_ue: c.key.dims.n_ue,
                    n_rx: c.key.dims.n_rx,
                    n_layers: c.key.dims.n_layers,
                    delta_p_db: c.key.budget.delta_p_db,
                    p_ub: c.key.budget.p_ub,
                    p_lb: c.key.budget.p_lb,
                    value,
                    cum_frac,
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Plain-text table, one line per method.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<44} {:>7} {:>10} {:>9} {:>9} {:>10} {:>12} {:>6}",
            "method", "trials", "rate Gb/s", "Psat dBW", "P_PA W", "EE Mb/J", "time s", "infeas"
        );
        for r in &self.rows {
            let time = r
                .mean_solve_time_s
                .map(|t| format!("{t:.3e}"))
                .unwrap_or_else(|| "-".into());
            let _ = writeln!(
                s,
                "{:<44} {:>7} {:>10.3} {:>9.2} {:>9.1} {:>10.2} {:>12} {:>6}",
                format!("{} [N={} K={}]", r.method, r.n_tx, r.n_ue),
                r.records,
                r.mean_sum_rate_gbps,
                r.p_sat_db,
                r.mean_p_pa_w,
                r.energy_eff_mbit_per_j,
                time,
                r.flagged_infeasible + r.failed
            );
        }
        s
    }
}
