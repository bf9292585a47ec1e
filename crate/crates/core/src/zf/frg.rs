//! Fixed-relative-gain flat zero-forcing.
//!
//! The received gain of layer `ℓ` is fixed to `β g_ℓ` for a given profile
//! `g`, which turns the ZF design into `max β` subject to `Ȟ D = β I`
//! (`Ȟ = G⁻¹H̃`) and the power budget. The solver minimizes the Lagrange dual
//! by block updates of `Z`, `(λ, θ)` and `μ`, and after each round scales the
//! dual-optimal precoder down by `ν ≤ 1` to recover a primal point that meets
//! the sum and upper per-antenna bounds.

use serde::Serialize;

use crate::channel::EffectiveChannel;
use crate::constraints::PowerBudget;
use crate::error::{FlatPrecError, Result};
use crate::linalg::{cr, fro_norm_sq, hpd_inverse, real_trace, row_norms_sq, CMat};
use crate::precoder::Precoder;

/// Smallest admissible value of `μ + λ_n − θ_n` before inversion.
const CONCAVITY_FLOOR: f64 = 1e-12;

/// Relative gain profile. `tau` and `water_level` are only known when the
/// profile comes from [`wf_zf_spc`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainProfile {
    pub g: Vec<f64>,
    pub gains_raw: Vec<f64>,
    pub tau: Vec<f64>,
    pub water_level: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DualState {
    pub z: CMat,
    pub lambda: Vec<f64>,
    pub theta: Vec<f64>,
    pub mu: f64,
    pub v: CMat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrgTraceRow {
    pub iteration: usize,
    pub mu: f64,
    pub beta_dual: f64,
    pub nu: f64,
    pub max_violation: f64,
    pub zf_residual_rel: f64,
    pub dual_value: f64,
}

#[derive(Debug, Clone)]
pub struct ZfSolution {
    pub d: Precoder,
    /// Achieved common gain `ν β*`.
    pub beta: f64,
    /// Common gain `β*` of the last dual-optimal precoder.
    pub beta_dual: f64,
    pub nu: f64,
    /// `‖ȞD − βI‖_F` for the returned precoder.
    pub zf_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<FrgTraceRow>,
}

impl ZfSolution {
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iteration,mu,beta_dual,nu,max_violation,zf_residual_rel,dual_value\n");
        for r in &self.trace {
            s.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                r.iteration, r.mu, r.beta_dual, r.nu, r.max_violation, r.zf_residual_rel, r.dual_value
            ));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrgOptions {
    /// LB tightening `ε_lb` in watts; `None` means `0.02·P_TX/N`.
    pub eps_lb: Option<f64>,
    /// Tolerance on `|ν − 1|`.
    pub eps: f64,
    pub i_max: usize,
    /// Relative slack on the true lower bound, both for stopping and for
    /// deciding whether the final point is feasible.
    pub lb_rel_tol: f64,
}

impl Default for FrgOptions {
    fn default() -> Self {
        Self {
            eps_lb: None,
            eps: 1e-4,
            i_max: 500,
            lb_rel_tol: 1e-7,
        }
    }
}

fn check_rank(h: &CMat) -> Result<()> {
    if h.nrows() > h.ncols() {
        return Err(FlatPrecError::RankDeficient(format!(
            "{} layers exceed {} transmit antennas",
            h.nrows(),
            h.ncols()
        )));
    }
    Ok(())
}

/// `τ_ℓ = [(H̃H̃ᴴ)⁻¹]_ℓℓ` and the inverse Gram matrix.
fn inverse_gram(h: &CMat) -> Result<(CMat, Vec<f64>)> {
    check_rank(h)?;
    let gram_inv = hpd_inverse(&(h * h.adjoint()))
        .map_err(|_| FlatPrecError::RankDeficient("effective channel is not full row rank".into()))?;
    let tau: Vec<f64> = gram_inv.diagonal().iter().map(|z| z.re).collect();
    if tau.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
        return Err(FlatPrecError::RankDeficient("effective channel is not full row rank".into()));
    }
    Ok((gram_inv, tau))
}

/// Water level `ψ` solving `Σ σ²(ψα_ℓ − τ_ℓ)⁺ = P_TX` by a sorted breakpoint search.
pub fn water_level(alpha: &[f64], tau: &[f64], noise_var: f64, p_tx: f64) -> Result<f64> {
    let mut order: Vec<usize> = (0..tau.len()).filter(|&l| alpha[l] > 0.0).collect();
    if order.is_empty() {
        return Err(FlatPrecError::InvalidInput("all layer weights are zero".into()));
    }
    order.sort_by(|&a, &b| (tau[a] / alpha[a]).total_cmp(&(tau[b] / alpha[b])));
    let target = p_tx / noise_var;
    let (mut sum_tau, mut sum_alpha) = (0.0, 0.0);
    let mut psi = f64::NAN;
    for (m, &l) in order.iter().enumerate() {
        sum_tau += tau[l];
        sum_alpha += alpha[l];
        psi = (target + sum_tau) / sum_alpha;
        match order.get(m + 1) {
            Some(&next) if psi > tau[next] / alpha[next] => continue,
            _ => break,
        }
    }
    Ok(psi)
}

/// Maps layer gains `γ_ℓ` to the relative profile `g_ℓ = √γ_ℓ / Σ√γ_j`.
/// Zero gains are lifted to `1e-6·max g` and the profile renormalized.
pub fn gain_profile(gamma: &[f64]) -> Result<GainProfile> {
    if gamma.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(FlatPrecError::InvalidInput("layer gains must be finite and non-negative".into()));
    }
    let roots: Vec<f64> = gamma.iter().map(|x| x.sqrt()).collect();
    let total: f64 = roots.iter().sum();
    if total == 0.0 {
        return Err(FlatPrecError::InvalidInput("all layer gains are zero".into()));
    }
    let mut g: Vec<f64> = roots.iter().map(|r| r / total).collect();
    let floor = 1e-6 * g.iter().cloned().fold(0.0, f64::max);
    for x in g.iter_mut() {
        if *x < floor {
            *x = floor;
        }
    }
    let s: f64 = g.iter().sum();
    g.iter_mut().for_each(|x| *x /= s);
    Ok(GainProfile {
        g,
        gains_raw: gamma.to_vec(),
        tau: Vec::new(),
        water_level: None,
    })
}

/// ZF with water-filling under the sum power constraint only:
/// `D = H̃ᴴ(H̃H̃ᴴ)⁻¹√Γ`, `γ_ℓ = σ²(ψα̃_ℓ/τ_ℓ − 1)⁺`.
pub fn wf_zf_spc(eff: &EffectiveChannel, p_tx: f64) -> Result<(Precoder, GainProfile)> {
    if !(p_tx > 0.0) {
        return Err(FlatPrecError::InvalidInput("P_TX must be positive".into()));
    }
    let h = &eff.h_tilde;
    let (gram_inv, tau) = inverse_gram(h)?;
    let psi = water_level(&eff.layer_weights, &tau, eff.noise_var, p_tx)?;
    let gamma: Vec<f64> = tau
        .iter()
        .zip(&eff.layer_weights)
        .map(|(&t, &a)| eff.noise_var * (psi * a / t - 1.0).max(0.0))
        .collect();
    let mut d = h.adjoint() * gram_inv;
    for (l, g) in gamma.iter().enumerate() {
        let s = cr(g.sqrt());
        d.column_mut(l).iter_mut().for_each(|z| *z *= s);
    }
    let mut profile = gain_profile(&gamma)?;
    profile.tau = tau;
    profile.water_level = Some(psi);
    Ok((Precoder::new(d, eff.n_layers)?, profile))
}

/// `Ȟ = G⁻¹H̃`.
pub fn normalized_channel(h_tilde: &CMat, profile: &GainProfile) -> Result<CMat> {
    if profile.g.len() != h_tilde.nrows() {
        return Err(FlatPrecError::DimensionMismatch(format!(
            "profile has {} entries for {} layers",
            profile.g.len(),
            h_tilde.nrows()
        )));
    }
    let mut h = h_tilde.clone();
    for (l, &g) in profile.g.iter().enumerate() {
        if !(g > 0.0) {
            return Err(FlatPrecError::InvalidInput(format!("gain of layer {l} is not positive")));
        }
        h.row_mut(l).iter_mut().for_each(|z| *z /= g);
    }
    Ok(h)
}

/// Diagonal `μ + λ_n − θ_n`, floored at [`CONCAVITY_FLOOR`].
pub fn curvature(mu: f64, lambda: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
    lambda
        .iter()
        .zip(theta)
        .enumerate()
        .map(|(n, (&l, &t))| {
            let c = mu + l - t;
            if c < 0.0 {
                Err(FlatPrecError::InvalidDualPoint { antenna: n, value: c })
            } else {
                Ok(c.max(CONCAVITY_FLOOR))
            }
        })
        .collect()
}

fn scale_rows(m: &CMat, s: &[f64]) -> CMat {
    let mut out = m.clone();
    for (n, &x) in s.iter().enumerate() {
        out.row_mut(n).iter_mut().for_each(|z| *z *= x);
    }
    out
}

/// Dual-optimal precoder `D* = (μI + Λ − Θ)⁻¹ ȞᴴZ`.
pub fn dual_precoder(h_check: &CMat, s: &DualState, n_layers: usize) -> Result<Precoder> {
    let c = curvature(s.mu, &s.lambda, &s.theta)?;
    let inv: Vec<f64> = c.iter().map(|x| 1.0 / x).collect();
    Precoder::new(scale_rows(&(h_check.adjoint() * &s.z), &inv), n_layers)
}

/// `Z = M⁻¹ / (2 Tr M⁻¹)` with `M = Ȟ(μI + Λ − Θ)⁻¹Ȟᴴ`. Also returns `β* = 1/(2 Tr M⁻¹)`.
pub fn update_z(h_check: &CMat, mu: f64, lambda: &[f64], theta: &[f64]) -> Result<(CMat, f64)> {
    let c = curvature(mu, lambda, theta)?;
    let inv: Vec<f64> = c.iter().map(|x| 1.0 / x).collect();
    let scaled = scale_rows(&h_check.adjoint(), &inv);
    let m = h_check * scaled;
    let m_inv = hpd_inverse(&m)
        .map_err(|_| FlatPrecError::RankDeficient("normalized channel is not full row rank".into()))?;
    let tr = real_trace(&m_inv);
    Ok((m_inv * cr(0.5 / tr), 0.5 / tr))
}

/// `λ_n = (‖v_n‖/√P_ub − μ)⁺` and `θ_n = (μ − ‖v_n‖/√P_lb)⁺`.
pub fn update_multipliers(v_norms: &[f64], mu: f64, b: &PowerBudget) -> (Vec<f64>, Vec<f64>) {
    let sqrt_ub = b.p_ub.sqrt();
    let sqrt_lb = b.p_lb.sqrt();
    let lambda = v_norms.iter().map(|&v| (v / sqrt_ub - mu).max(0.0)).collect();
    let theta = v_norms
        .iter()
        .map(|&v| if b.p_lb > 0.0 { (mu - v / sqrt_lb).max(0.0) } else { 0.0 })
        .collect();
    (lambda, theta)
}

/// Power implied by `μ`: `Σ_n max(min(‖v_n‖²/μ², P_ub), P_lb)`.
pub fn mu_power(v_norms: &[f64], mu: f64, b: &PowerBudget) -> f64 {
    v_norms
        .iter()
        .map(|&v| {
            let p = if mu > 0.0 { (v / mu).powi(2) } else if v > 0.0 { f64::INFINITY } else { 0.0 };
            p.min(b.p_ub).max(b.p_lb)
        })
        .sum()
}

/// Root of `mu_power(μ) = P_TX` by bisection on `log μ`.
pub fn solve_mu(v_norms: &[f64], b: &PowerBudget) -> Result<f64> {
    let n = v_norms.len() as f64;
    if n * b.p_lb > b.p_tx * (1.0 + 1e-12) {
        return Err(FlatPrecError::InfeasibleBudget(format!(
            "N·P_lb = {:e} exceeds P_TX = {:e}",
            n * b.p_lb,
            b.p_tx
        )));
    }
    if n * b.p_ub <= b.p_tx {
        return Ok(0.0);
    }
    let v_max = v_norms.iter().cloned().fold(0.0, f64::max);
    if v_max == 0.0 {
        return Err(FlatPrecError::NumericalBreakdown("all dual rows are zero".into()));
    }
    let v_fro = v_norms.iter().map(|v| v * v).sum::<f64>().sqrt();
    // Above μ_hi the power cannot exceed P_TX.
    let slack = b.p_tx - n * b.p_lb;
    let mut hi = if slack > 1e-12 * b.p_tx { v_fro / slack.sqrt() } else { f64::INFINITY };
    if b.p_lb > 0.0 {
        hi = hi.min(v_max / b.p_lb.sqrt());
    }
    if slack <= 1e-12 * b.p_tx {
        // Every row sits at the lower bound.
        return Ok(hi);
    }
    let mut lo = hi;
    let mut guard = 0;
    while mu_power(v_norms, lo, b) < b.p_tx {
        lo *= 0.5;
        guard += 1;
        if guard > 4000 {
            return Err(FlatPrecError::NumericalBreakdown("no lower bracket for μ".into()));
        }
    }
    let tol = 1e-10 * b.p_tx;
    for _ in 0..400 {
        let mid = (lo * hi).sqrt();
        let f = mu_power(v_norms, mid, b);
        if (f - b.p_tx).abs() <= tol * 1e-3 || hi / lo - 1.0 < 1e-15 {
            return Ok(mid);
        }
        if f > b.p_tx {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Flatness indicator `ρ = KL(N−1)²ξ²/δ²` for `δ = min_ℓ|Ȟ_ℓ1|` and
/// `ξ = max_{ℓ, n>1}|Ȟ_ℓn|`. A ZF precoder with `P_lb/P_ub > ρ` cannot exist.
pub fn zf_flatness_bound(h_check: &CMat) -> f64 {
    let kl = h_check.nrows() as f64;
    let n = h_check.ncols();
    let delta = (0..h_check.nrows()).map(|l| h_check[(l, 0)].norm()).fold(f64::INFINITY, f64::min);
    let mut xi: f64 = 0.0;
    for l in 0..h_check.nrows() {
        for j in 1..n {
            xi = xi.max(h_check[(l, j)].norm());
        }
    }
    if delta == 0.0 {
        return f64::INFINITY;
    }
    kl * ((n - 1) as f64).powi(2) * xi * xi / (delta * delta)
}

/// Largest `ν ≤ 1` such that `νD` meets the sum and upper per-antenna bounds.
pub fn primal_scaling(powers: &[f64], b: &PowerBudget) -> f64 {
    let total: f64 = powers.iter().sum();
    let peak = powers.iter().cloned().fold(0.0, f64::max);
    let mut nu: f64 = 1.0;
    if total > 0.0 {
        nu = nu.min((b.p_tx / total).sqrt());
    }
    if peak > 0.0 {
        nu = nu.min((b.p_ub / peak).sqrt());
    }
    nu
}

/// Lagrange dual value at `(Z, λ, θ, μ)`: `Σ‖v_n‖²/c_n + μP_TX + Σλ_nP_ub − Σθ_nP_lb`.
pub fn dual_value(v_norms: &[f64], mu: f64, lambda: &[f64], theta: &[f64], b: &PowerBudget) -> Result<f64> {
    let c = curvature(mu, lambda, theta)?;
    let mut val = mu * b.p_tx;
    for n in 0..v_norms.len() {
        val += v_norms[n] * v_norms[n] / c[n];
        if lambda[n] > 0.0 {
            val += lambda[n] * b.p_ub;
        }
        if theta[n] > 0.0 {
            val -= theta[n] * b.p_lb;
        }
    }
    Ok(val)
}

fn zf_residual(h_check: &CMat, d: &CMat, beta: f64) -> f64 {
    let kl = h_check.nrows();
    fro_norm_sq(&(h_check * d - CMat::identity(kl, kl) * cr(beta))).sqrt()
}

/// Default LB tightening, capped so the tightened bound stays within the
/// upper bound and the average power. Without a lower bound there is nothing
/// to protect and the bound stays at zero.
pub fn tightened_lower_bound(b: &PowerBudget, n: usize, eps_lb: Option<f64>) -> f64 {
    if !b.has_lower_bound() {
        return b.p_lb;
    }
    let eps = eps_lb.unwrap_or(0.02 * b.p_tx / n as f64);
    (b.p_lb + eps).min(b.p_ub).min(b.p_tx / n as f64).max(b.p_lb)
}

/// FRG-Flat ZF: maximizes `β` with `ȞD = βI` under the budget.
///
/// Stops once `|ν − 1| ≤ eps` and the true lower bound holds, or after
/// `i_max` rounds. A final point violating the lower bound is returned inside
/// [`FlatPrecError::NoFeasiblePoint`].
pub fn frg_flat_zf(eff: &EffectiveChannel, profile: &GainProfile, b: &PowerBudget, opts: &FrgOptions) -> Result<ZfSolution> {
    let n = eff.n_tx();
    b.validate(n)?;
    check_rank(&eff.h_tilde)?;
    let h_check = normalized_channel(&eff.h_tilde, profile)?;
    let tight = PowerBudget {
        p_lb: tightened_lower_bound(b, n, opts.eps_lb),
        ..b.clone()
    };
    let lb_floor = b.p_lb * (1.0 - opts.lb_rel_tol);

    let (gram_inv, _) = inverse_gram(&h_check)?;
    let mut z = &gram_inv * cr(0.5 / real_trace(&gram_inv));
    let mut trace = Vec::new();
    let mut best: Option<(ZfSolution, f64)> = None;
    let mut last: Option<ZfSolution> = None;
    let mut converged = false;
    let mut i = 1;
    while i <= opts.i_max {
        let v = h_check.adjoint() * &z;
        let v_norms: Vec<f64> = row_norms_sq(&v).into_iter().map(f64::sqrt).collect();
        let mu = solve_mu(&v_norms, &tight)?;
        let (lambda, theta) = update_multipliers(&v_norms, mu, &tight);
        let (z_new, beta_dual) = update_z(&h_check, mu, &lambda, &theta)?;
        z = z_new;
        let state = DualState {
            z: z.clone(),
            lambda,
            theta,
            mu,
            v: h_check.adjoint() * &z,
        };
        let d_star = dual_precoder(&h_check, &state, eff.n_layers)?;
        let powers = d_star.row_powers();
        let nu = primal_scaling(&powers, b);
        let d = Precoder::new(&d_star.d * cr(nu), eff.n_layers)?;
        let beta = nu * beta_dual;
        let scaled: Vec<f64> = powers.iter().map(|p| p * nu * nu).collect();
        let lb_deficit = scaled.iter().map(|&p| (b.p_lb - p).max(0.0)).fold(0.0, f64::max);
        let new_norms: Vec<f64> = row_norms_sq(&state.v).into_iter().map(f64::sqrt).collect();
        let dual = dual_value(&new_norms, mu, &state.lambda, &state.theta, &tight)?;
        let residual = zf_residual(&h_check, &d.d, beta);
        trace.push(FrgTraceRow {
            iteration: i,
            mu,
            beta_dual,
            nu,
            max_violation: crate::constraints::max_violation(&scaled, b),
            zf_residual_rel: zf_residual(&h_check, &d_star.d, beta_dual) / beta_dual,
            dual_value: dual,
        });
        let sol = ZfSolution {
            d,
            beta,
            beta_dual,
            nu,
            zf_residual: residual,
            iterations: i,
            converged: false,
            trace: Vec::new(),
        };
        let lb_ok = scaled.iter().all(|&p| p >= lb_floor);
        if !lb_ok && best.as_ref().map_or(true, |(_, def)| lb_deficit < *def) {
            best = Some((sol.clone(), lb_deficit));
        }
        last = Some(sol);
        if (nu - 1.0).abs() <= opts.eps && lb_ok {
            converged = true;
            break;
        }
        i += 1;
    }
    let mut sol = last.ok_or_else(|| FlatPrecError::InvalidInput("i_max must be at least 1".into()))?;
    sol.converged = converged;
    sol.trace = trace;
    let powers = sol.d.row_powers();
    if powers.iter().any(|&p| p < lb_floor) {
        // Report the point closest to lower-bound feasibility.
        let (mut worst, deficit) = best.unwrap_or_else(|| (sol.clone(), 0.0));
        worst.trace = sol.trace;
        worst.iterations = sol.iterations;
        return Err(FlatPrecError::NoFeasiblePoint {
            max_lb_violation: deficit,
            rho: zf_flatness_bound(&h_check),
            best: Box::new(worst),
        });
    }
    Ok(sol)
}

/// Builds the water-filling profile and runs [`frg_flat_zf`] with it.
pub fn frg_flat_zf_wf(eff: &EffectiveChannel, b: &PowerBudget, opts: &FrgOptions) -> Result<ZfSolution> {
    let (_, profile) = wf_zf_spc(eff, b.p_tx)?;
    frg_flat_zf(eff, &profile, b, opts)
}
