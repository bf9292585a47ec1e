//! Flat WMMSE precoding.
//!
//! Weighted sum-rate maximization under the sum, upper per-antenna and lower
//! per-antenna power constraints, solved by block coordinate descent on the
//! equivalent weighted-MSE problem. The blocks are the receive filters `U_k`,
//! the MSE weights `W_k`, and the individual rows `d_nᴴ` of the precoder. Each
//! row subproblem is a scalar-constrained quadratic with a closed-form
//! solution, so starting from a feasible precoder every row update keeps all
//! three constraints satisfied and the weighted sum rate never decreases.

use serde::Serialize;

use crate::channel::{ChannelSet, EffectiveChannel};
use crate::constraints::{feasible_precoder, max_violation, PowerBudget};
use crate::error::{FlatPrecError, Result};
use crate::linalg::{cr, hermitian_part, inverse, logdet_hpd, CMat, CVec};
use crate::precoder::Precoder;

/// Per-UE rates (nats per channel use) and their weighted sum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub per_ue: Vec<f64>,
    pub wsr: f64,
}

impl RateReport {
    /// Weighted sum rate in bit/s for the given bandwidth.
    pub fn wsr_bits_per_sec(&self, bandwidth_hz: f64) -> f64 {
        self.wsr / std::f64::consts::LN_2 * bandwidth_hz
    }

    /// Unweighted sum of the per-UE rates.
    pub fn sum_rate(&self) -> f64 {
        self.per_ue.iter().sum()
    }
}

fn check_shapes(ch: &ChannelSet, d: &Precoder) -> Result<()> {
    if d.n_tx() != ch.n_tx() || d.n_ue() != ch.n_ue() {
        return Err(FlatPrecError::DimensionMismatch(format!(
            "precoder is {}×{} ({} layers) but channel has N = {}, K = {}",
            d.n_tx(),
            d.d.ncols(),
            d.n_layers,
            ch.n_tx(),
            ch.n_ue()
        )));
    }
    Ok(())
}

/// Received covariance `Σ_j H_k D_j D_jᴴ H_kᴴ + σ²I` and the useful part `H_k D_k`.
fn ue_terms(ch: &ChannelSet, d: &Precoder, k: usize) -> (CMat, CMat) {
    let hd = &ch.per_ue[k] * &d.d;
    let m = ch.n_rx();
    let total = &hd * hd.adjoint() + CMat::identity(m, m) * cr(ch.noise_var);
    let useful = hd.columns(k * d.n_layers, d.n_layers).into_owned();
    (total, useful)
}

/// Achievable rates `R_k = log|I + H_kD_kD_kᴴH_kᴴ C_k⁻¹|` with Gaussian signalling.
pub fn rate(ch: &ChannelSet, d: &Precoder) -> Result<RateReport> {
    check_shapes(ch, d)?;
    let mut per_ue = Vec::with_capacity(ch.n_ue());
    for k in 0..ch.n_ue() {
        let (total, useful) = ue_terms(ch, d, k);
        let interference = &total - &useful * useful.adjoint();
        // log|C + S| − log|C| equals the log-det form above and keeps both
        // matrices Hermitian positive definite.
        let r = logdet_hpd(&total)? - logdet_hpd(&interference)?;
        per_ue.push(r.max(0.0));
    }
    let wsr = per_ue.iter().zip(&ch.weights).map(|(r, a)| r * a).sum();
    Ok(RateReport { per_ue, wsr })
}

/// MSE matrix `E_k` for receive filter `u_k`.
pub fn mse_matrix(ch: &ChannelSet, d: &Precoder, k: usize, u_k: &CMat) -> Result<CMat> {
    check_shapes(ch, d)?;
    let (total, useful) = ue_terms(ch, d, k);
    let interference = &total - &useful * useful.adjoint();
    let l = d.n_layers;
    let err = CMat::identity(l, l) - u_k.adjoint() * &useful;
    Ok(&err * err.adjoint() + u_k.adjoint() * interference * u_k)
}

/// MMSE receive filters `U_k = (Σ_j H_kD_jD_jᴴH_kᴴ + σ²I)⁻¹ H_kD_k`.
pub fn update_u(ch: &ChannelSet, d: &Precoder) -> Result<Vec<CMat>> {
    check_shapes(ch, d)?;
    (0..ch.n_ue())
        .map(|k| {
            let (total, useful) = ue_terms(ch, d, k);
            let ch_inv = crate::linalg::hpd_inverse(&total)?;
            Ok(ch_inv * useful)
        })
        .collect()
}

/// MSE weights `W_k = (I − U_kᴴH_kD_k)⁻¹`.
///
/// Only guaranteed invertible when `u` comes from [`update_u`] for the same `d`.
pub fn update_w(ch: &ChannelSet, d: &Precoder, u: &[CMat]) -> Result<Vec<CMat>> {
    check_shapes(ch, d)?;
    let l = d.n_layers;
    u.iter()
        .enumerate()
        .map(|(k, u_k)| {
            let useful = &ch.per_ue[k] * d.block(k);
            let m = CMat::identity(l, l) - u_k.adjoint() * useful;
            let w = inverse(&m).map_err(|_| {
                FlatPrecError::NumericalBreakdown(format!("I − UᴴHD singular for UE {k}"))
            })?;
            Ok(hermitian_part(&w))
        })
        .collect()
}

/// Receive filters, MSE weights and the block-diagonal matrices
/// `A = blkdiag(α_k U_k W_k U_kᴴ)` (`KM × KM`) and `B = blkdiag(α_k W_k U_kᴴ)` (`KL × KM`).
#[derive(Debug, Clone)]
pub struct WmmseState {
    pub u: Vec<CMat>,
    pub w: Vec<CMat>,
    pub a_mat: CMat,
    pub b_mat: CMat,
}

impl WmmseState {
    pub fn new(ch: &ChannelSet, u: Vec<CMat>, w: Vec<CMat>) -> Self {
        let m = ch.n_rx();
        let l = w[0].nrows();
        let k_ue = ch.n_ue();
        let mut a_mat = CMat::zeros(k_ue * m, k_ue * m);
        let mut b_mat = CMat::zeros(k_ue * l, k_ue * m);
        for k in 0..k_ue {
            let alpha = cr(ch.weights[k]);
            let wu = &w[k] * u[k].adjoint() * alpha;
            let uwu = hermitian_part(&(&u[k] * &wu));
            a_mat.view_mut((k * m, k * m), (m, m)).copy_from(&uwu);
            b_mat.view_mut((k * l, k * m), (l, m)).copy_from(&wu);
        }
        Self { u, w, a_mat, b_mat }
    }

    /// Closed-form `U` then `W` for the current precoder.
    pub fn at(ch: &ChannelSet, d: &Precoder) -> Result<Self> {
        let u = update_u(ch, d)?;
        let w = update_w(ch, d, &u)?;
        Ok(Self::new(ch, u, w))
    }
}

/// `d_n` as a column vector: the conjugate of row `n` of `D`.
pub fn row_vector(d: &CMat, n: usize) -> CVec {
    d.row(n).adjoint()
}

/// Coefficients `(a_n, b_n)` of the row-`n` subproblem
/// `min a_n‖d_n‖² + 2Re(b_nᴴd_n)`.
///
/// `h` is the stacked channel (`KM × N`) and `c_mat` the running
/// `C = Σ_ℓ d_ℓ h_ℓᴴ = (HD)ᴴ` for the current rows of `d`.
pub fn row_subproblem_coeffs(
    h: &CMat,
    c_mat: &CMat,
    d: &CMat,
    state: &WmmseState,
    n: usize,
) -> (f64, CVec) {
    let h_n = h.column(n);
    let ah = &state.a_mat * h_n;
    let a_c = (h_n.adjoint() * &ah)[(0, 0)];
    let d_n = row_vector(d, n);
    let b = -(&state.b_mat * h_n) + c_mat * &ah - d_n * a_c;
    (a_c.re, b)
}

/// Closed-form row update: `d_n = −b_n · max(min(1/a_n, √P_ub_n/‖b_n‖), √P_lb/‖b_n‖)`
/// with `P_ub_n = min(p_res, P_ub)`.
///
/// When `b_n = 0` the objective only penalizes the norm, so the row takes the
/// smallest admissible power: the previous direction scaled to `√P_lb`, or
/// zero when there is no lower bound.
pub fn update_row(a_n: f64, b_n: &CVec, p_res: f64, budget: &PowerBudget, prev: &CVec) -> CVec {
    let ub_n = p_res.min(budget.p_ub).max(0.0);
    let b_norm = b_n.norm();
    if b_norm == 0.0 {
        if budget.p_lb == 0.0 {
            return CVec::zeros(b_n.len());
        }
        let prev_norm = prev.norm();
        if prev_norm > 0.0 {
            return prev * cr(budget.p_lb.sqrt() / prev_norm);
        }
        let mut e = CVec::zeros(b_n.len());
        e[0] = cr(budget.p_lb.sqrt());
        return e;
    }
    let inv_a = if a_n > 0.0 { 1.0 / a_n } else { f64::INFINITY };
    let scale = inv_a.min(ub_n.sqrt() / b_norm).max(budget.p_lb.sqrt() / b_norm);
    b_n * cr(-scale)
}

#[derive(Debug, Clone, Copy, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WmmseOptions {
    /// Stop once an outer iteration improves the WSR by at most this much (nats).
    pub eps: f64,
    pub i_max: usize,
    pub dykstra_iters: usize,
    pub dykstra_tol: f64,
    /// Offer the sum-power-only D update (made feasible) as a candidate before
    /// each row sweep. Without it the sweep can freeze the power allocation
    /// whenever the sum constraint is active.
    pub spc_candidate: bool,
}

impl Default for WmmseOptions {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            i_max: 200,
            dykstra_iters: 200,
            dykstra_tol: 1e-10,
            spc_candidate: true,
        }
    }
}

/// Precoder-dependent part of the weighted MSE for fixed `U`, `W`:
/// `Tr(Dᴴ HᴴAH D) − 2 Re Tr(BH D)`.
pub fn mse_surrogate(h: &CMat, state: &WmmseState, d: &CMat) -> f64 {
    let hd = h * d;
    let quad = crate::linalg::inner(&hd, &(&state.a_mat * &hd));
    let lin = (&state.b_mat * &hd).trace().re;
    quad - 2.0 * lin
}

/// Minimizer of [`mse_surrogate`] under the sum power constraint alone,
/// `D = (HᴴAH + μI)⁻¹HᴴBᴴ` with `μ ≥ 0` from bisection.
pub fn spc_block_update(h: &CMat, state: &WmmseState, p_tx: f64) -> CMat {
    let s = crate::linalg::hermitian_part(&(h.adjoint() * &state.a_mat * h));
    let t_adj = h.adjoint() * state.b_mat.adjoint();
    let (vals, vecs) = crate::linalg::herm_eig_desc(&s);
    let proj = vecs.adjoint() * &t_adj;
    let weights: Vec<f64> = (0..proj.nrows())
        .map(|i| proj.row(i).iter().map(|z| z.norm_sqr()).sum())
        .collect();
    let lam_max = vals.first().copied().unwrap_or(0.0).max(0.0);
    let power = |mu: f64| -> f64 {
        vals.iter()
            .zip(&weights)
            .map(|(&l, &w)| w / (l.max(0.0) + mu).powi(2))
            .sum()
    };
    let mu_floor = 1e-12 * lam_max.max(f64::MIN_POSITIVE);
    let mu = if power(mu_floor) <= p_tx {
        mu_floor
    } else {
        let mut hi = (weights.iter().sum::<f64>() / p_tx).sqrt().max(mu_floor);
        while power(hi) > p_tx {
            hi *= 2.0;
        }
        let mut lo = mu_floor;
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if power(mid) > p_tx {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi / lo - 1.0 < 1e-14 {
                break;
            }
        }
        hi
    };
    let scaled = CMat::from_fn(proj.nrows(), proj.ncols(), |i, j| {
        proj[(i, j)] / cr(vals[i].max(0.0) + mu)
    });
    vecs * scaled
}

/// One row of the iteration trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WmmseTraceRow {
    pub iteration: usize,
    pub wsr: f64,
    pub max_violation: f64,
}

#[derive(Debug, Clone)]
pub struct WmmseOutput {
    pub precoder: Precoder,
    pub rates: RateReport,
    /// Entry 0 is the initial precoder; entry `i` follows outer iteration `i`.
    pub trace: Vec<WmmseTraceRow>,
    pub iterations: usize,
    pub converged: bool,
}

impl WmmseOutput {
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iteration,wsr,max_violation\n");
        for r in &self.trace {
            s.push_str(&format!("{},{:e},{:e}\n", r.iteration, r.wsr, r.max_violation));
        }
        s
    }
}

/// Makes `d_init` feasible with [`feasible_precoder`] and the Dykstra settings in `opts`.
pub fn make_feasible(d_init: &Precoder, budget: &PowerBudget, opts: &WmmseOptions) -> Result<Precoder> {
    feasible_precoder(d_init, budget, opts.dykstra_iters, opts.dykstra_tol)
}

/// Matched-filter start `H̃ᴴ` (eigen combiners), made feasible for `budget`.
pub fn default_init(ch: &ChannelSet, n_layers: usize, budget: &PowerBudget, opts: &WmmseOptions) -> Result<Precoder> {
    let eff = EffectiveChannel::eigen(ch, n_layers)?;
    let d = Precoder::new(eff.h_tilde.adjoint(), n_layers)?;
    make_feasible(&d, budget, opts)
}

/// Flat WMMSE: block coordinate descent over `U`, `W` and the rows of `D`.
///
/// `init` is made feasible if it is not already (a feasible `init` is used as is).
/// Without `init`, `n_layers` layers per UE are started from the matched filter.
pub fn flat_wmmse(
    ch: &ChannelSet,
    budget: &PowerBudget,
    n_layers: usize,
    init: Option<&Precoder>,
    opts: &WmmseOptions,
) -> Result<WmmseOutput> {
    ch.validate()?;
    budget.validate(ch.n_tx())?;
    let mut d = match init {
        Some(d0) => {
            check_shapes(ch, d0)?;
            make_feasible(d0, budget, opts)?
        }
        None => default_init(ch, n_layers, budget, opts)?,
    };
    let h = ch.stacked();
    let n_tx = ch.n_tx();

    let mut current = rate(ch, &d)?;
    let mut trace = vec![WmmseTraceRow {
        iteration: 0,
        wsr: current.wsr,
        max_violation: max_violation(&d.row_powers(), budget),
    }];
    let mut converged = false;
    let mut i = 1;
    loop {
        let previous_wsr = current.wsr;
        let state = WmmseState::at(ch, &d)?;
        if opts.spc_candidate {
            let cand = Precoder::new(spc_block_update(&h, &state, budget.p_tx), d.n_layers)?;
            if let Ok(cand) = make_feasible(&cand, budget, opts) {
                if mse_surrogate(&h, &state, &cand.d) < mse_surrogate(&h, &state, &d.d) {
                    d = cand;
                }
            }
        }
        let mut c_mat = (&h * &d.d).adjoint();
        let mut powers = d.row_powers();
        let mut total: f64 = powers.iter().sum();
        for n in 0..n_tx {
            let (a_n, b_n) = row_subproblem_coeffs(&h, &c_mat, &d.d, &state, n);
            let old = row_vector(&d.d, n);
            let p_res = budget.p_tx - (total - powers[n]);
            let new = update_row(a_n, &b_n, p_res, budget, &old);
            c_mat += (&new - &old) * h.column(n).adjoint();
            d.d.set_row(n, &new.adjoint());
            let p_new = new.norm_squared();
            total += p_new - powers[n];
            powers[n] = p_new;
        }
        current = rate(ch, &d)?;
        trace.push(WmmseTraceRow {
            iteration: i,
            wsr: current.wsr,
            max_violation: max_violation(&d.row_powers(), budget),
        });
        i += 1;
        if current.wsr - previous_wsr <= opts.eps {
            converged = true;
            break;
        }
        if i > opts.i_max {
            break;
        }
    }
    Ok(WmmseOutput {
        precoder: d,
        rates: current,
        trace,
        iterations: i - 1,
        converged,
    })
}
