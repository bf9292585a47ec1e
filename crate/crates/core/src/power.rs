//! PA efficiency, saturation-power accounting and energy efficiency.

use serde::{Deserialize, Serialize};

use crate::constraints::PowerBudget;
use crate::error::{FlatPrecError, Result};
use crate::precoder::Precoder;

/// Doherty PA model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PaModel {
    pub eta_max: f64,
    pub p_backoff_db: f64,
    pub il_db: f64,
    /// Per-element circuit power in watts.
    pub p_ae: f64,
    pub f_c_ghz: f64,
}

impl Default for PaModel {
    fn default() -> Self {
        Self {
            eta_max: 0.5,
            p_backoff_db: 7.0,
            il_db: 2.0,
            p_ae: 4.25,
            f_c_ghz: 7.0,
        }
    }
}

impl PaModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta_max > 0.0 && self.eta_max <= 1.0) {
            return Err(FlatPrecError::InvalidInput(format!("eta_max = {} outside (0, 1]", self.eta_max)));
        }
        if !self.p_backoff_db.is_finite() || !self.il_db.is_finite() {
            return Err(FlatPrecError::InvalidInput("dB parameters must be finite".into()));
        }
        if !(self.p_ae >= 0.0) {
            return Err(FlatPrecError::InvalidInput("P_AE must be non-negative".into()));
        }
        if !(self.f_c_ghz > 0.0) || !self.f_c_ghz.is_finite() {
            return Err(FlatPrecError::InvalidInput("carrier frequency must be positive".into()));
        }
        Ok(())
    }

    /// Insertion loss as a linear factor.
    pub fn il_linear(&self) -> f64 {
        db_to_lin(self.il_db)
    }
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Largest PA saturation power available at carrier `f_c` (GHz), in dBW.
pub fn max_sat_power_db(f_c_ghz: f64) -> f64 {
    38.0 - 16.0 * f_c_ghz.log10()
}

/// Doherty efficiency `η = η_max·10^(−(P_sat − P_out − 6)⁺/20)`.
pub fn pa_efficiency(p_out_db: f64, p_sat_db: f64, model: &PaModel) -> Result<f64> {
    if p_out_db > p_sat_db + 1e-9 {
        return Err(FlatPrecError::SaturationExceeded { p_out_db, p_sat_db });
    }
    let gap = (p_sat_db - p_out_db - 6.0).max(0.0);
    Ok(model.eta_max * 10f64.powf(-gap / 20.0))
}

/// Saturation power a method needs: peak PA output plus the backoff, in dBW.
/// Fails if it exceeds what the carrier allows.
pub fn required_sat_db(p_tx_per_antenna: &[f64], model: &PaModel) -> Result<f64> {
    let peak = p_tx_per_antenna.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Err(FlatPrecError::InvalidInput("no antenna radiates power".into()));
    }
    let p_sat = lin_to_db(peak) + model.il_db + model.p_backoff_db;
    let p_sat_max = max_sat_power_db(model.f_c_ghz);
    if p_sat > p_sat_max + 1e-9 {
        return Err(FlatPrecError::SaturationExceeded {
            p_out_db: p_sat,
            p_sat_db: p_sat_max,
        });
    }
    Ok(p_sat)
}

/// Largest radiated power per antenna the carrier allows, in watts.
pub fn actual_ub_papc(model: &PaModel) -> f64 {
    db_to_lin(max_sat_power_db(model.f_c_ghz) - model.p_backoff_db - model.il_db)
}

/// Per-antenna bounds for a flatness target `Δp_dB` (`+∞` gives SPC only).
pub fn papc_bounds_from_delta(p_tx: f64, n: usize, delta_p_db: f64) -> PowerBudget {
    PowerBudget::from_flatness(p_tx, n, delta_p_db)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerReport {
    pub p_tx_per_antenna: Vec<f64>,
    pub p_out_db: Vec<f64>,
    pub eta: Vec<f64>,
    pub p_sat_db: f64,
    /// PA consumption `ε_IL Σ P_n/η_n`.
    pub p_pa: f64,
    /// `P_PA + N·P_AE`.
    pub p_total: f64,
    /// Bits per joule, `rate / p_total`.
    pub energy_eff: f64,
    pub sat_headroom_db: f64,
}

impl PowerReport {
    pub const CSV_HEADER: &'static str = "p_sat_db,p_pa_w,p_total_w,energy_eff_bit_per_j,sat_headroom_db";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.6},{:.6},{:.6},{:.6e},{:.6}",
            self.p_sat_db, self.p_pa, self.p_total, self.energy_eff, self.sat_headroom_db
        )
    }
}

/// Power accounting for the rows of `d`, operated at saturation power `p_sat_db`.
pub fn power_report(d: &Precoder, model: &PaModel, p_sat_db: f64, rate_bits_per_sec: f64) -> Result<PowerReport> {
    power_report_from_powers(&d.row_powers(), model, p_sat_db, rate_bits_per_sec)
}

pub fn power_report_from_powers(
    powers: &[f64],
    model: &PaModel,
    p_sat_db: f64,
    rate_bits_per_sec: f64,
) -> Result<PowerReport> {
    model.validate()?;
    let il = model.il_linear();
    let mut p_out_db = Vec::with_capacity(powers.len());
    let mut eta = Vec::with_capacity(powers.len());
    let mut p_pa = 0.0;
    for &p in powers {
        let out_db = if p > 0.0 { lin_to_db(p) + model.il_db } else { f64::NEG_INFINITY };
        let e = pa_efficiency(out_db, p_sat_db, model)?;
        if p > 0.0 {
            p_pa += il * p / e;
        }
        p_out_db.push(out_db);
        eta.push(e);
    }
    let p_total = p_pa + powers.len() as f64 * model.p_ae;
    Ok(PowerReport {
        p_tx_per_antenna: powers.to_vec(),
        p_out_db,
        eta,
        p_sat_db,
        p_pa,
        p_total,
        energy_eff: rate_bits_per_sec / p_total,
        sat_headroom_db: max_sat_power_db(model.f_c_ghz) - p_sat_db,
    })
}
