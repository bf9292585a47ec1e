//! Long-term rate weights.
//!
//! A simple inverse-average-rate rule: `α_k ∝ 1/R̄_k`, normalized so the
//! weights sum to `K`. It is plumbing for multi-frame runs and does not
//! implement a particular proportional-fair scheduler.

use crate::error::{FlatPrecError, Result};

/// Floor on the average rate (nats) so a starved UE gets a large but finite weight.
pub const RATE_FLOOR: f64 = 1e-3;

/// Weights for `k` UEs from past per-UE rates (`history[frame][ue]`).
/// An empty history gives equal weights.
pub fn longterm_weights(history: &[Vec<f64>], k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(FlatPrecError::InvalidInput("need at least one UE".into()));
    }
    if history.is_empty() {
        return Ok(vec![1.0; k]);
    }
    if let Some(bad) = history.iter().find(|h| h.len() != k) {
        return Err(FlatPrecError::DimensionMismatch(format!(
            "rate history row has {} entries, expected {k}",
            bad.len()
        )));
    }
    if history.iter().flatten().any(|r| !(*r >= 0.0) || !r.is_finite()) {
        return Err(FlatPrecError::InvalidInput("rates must be finite and non-negative".into()));
    }
    let frames = history.len() as f64;
    let inv: Vec<f64> = (0..k)
        .map(|u| {
            let avg = history.iter().map(|h| h[u]).sum::<f64>() / frames;
            1.0 / avg.max(RATE_FLOOR)
        })
        .collect();
    let total: f64 = inv.iter().sum();
    Ok(inv.iter().map(|w| w * k as f64 / total).collect())
}
