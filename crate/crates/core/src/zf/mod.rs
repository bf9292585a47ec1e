//! Zero-forcing precoders under per-antenna power bounds.

pub mod frg;
pub mod sdr;

use crate::channel::EffectiveChannel;
use crate::linalg::CMat;

/// Per-layer rates `log(1 + SINR_ℓ)` (nats) on the effective channel, with
/// any residual inter-layer leakage counted as interference.
pub fn layer_rates(eff: &EffectiveChannel, d: &CMat) -> Vec<f64> {
    let g = &eff.h_tilde * d;
    (0..g.nrows())
        .map(|l| {
            let signal = g[(l, l)].norm_sqr();
            let leak: f64 = (0..g.ncols()).filter(|&j| j != l).map(|j| g[(l, j)].norm_sqr()).sum();
            (1.0 + signal / (leak + eff.noise_var)).ln()
        })
        .collect()
}

/// Weighted sum of [`layer_rates`].
pub fn layer_wsr(eff: &EffectiveChannel, d: &CMat) -> f64 {
    layer_rates(eff, d)
        .iter()
        .zip(&eff.layer_weights)
        .map(|(r, a)| r * a)
        .sum()
}

/// Interference leakage `Σ_{j≠ℓ} |h̃_jᴴ d̃_ℓ|²` of each layer.
pub fn leakage(eff: &EffectiveChannel, d: &CMat) -> Vec<f64> {
    let g = &eff.h_tilde * d;
    (0..g.ncols())
        .map(|l| (0..g.nrows()).filter(|&j| j != l).map(|j| g[(j, l)].norm_sqr()).sum())
        .collect()
}
