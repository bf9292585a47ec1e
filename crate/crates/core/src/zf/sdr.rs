//! Semidefinite relaxation of flat zero-forcing.
//!
//! Each layer gets a covariance `Q_ℓ ⪰ 0` instead of a beamformer. The ZF
//! constraints `h̃_jᴴQ_ℓh̃_j = 0 (j ≠ ℓ)` are built into the parametrization
//! `Q_ℓ = B_ℓX_ℓB_ℓᴴ`, where `B_ℓ` is an orthonormal basis of the complement
//! of `span{h̃_j : j ≠ ℓ}`. The remaining convex program
//!
//! `max Σ α_ℓ log(1 + q_ℓᴴX_ℓq_ℓ/σ²)` s.t. `X_ℓ ⪰ 0`, `Σ_ℓ diag(B_ℓX_ℓB_ℓᴴ) ∈ 𝒫`
//!
//! is solved by ADMM with the splitting `X = Y` (PSD cone) and `𝒜(X) = p`
//! (box plus sum). The `X` update has a closed form up to a `KL`-dimensional
//! strongly convex problem solved by Newton's method.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::channel::EffectiveChannel;
use crate::constraints::{feasible_precoder, project_box_sum, PowerBudget};
use crate::error::{FlatPrecError, Result};
use crate::linalg::{
    cr, fix_column_phases, fro_norm_sq, hermitian_part, herm_eig_desc, project_psd, real_trace,
    row_space_complement, CMat, CVec,
};
use crate::precoder::Precoder;
use crate::zf::{frg::wf_zf_spc, layer_wsr, leakage};

/// Per-layer transmit covariances `Q_ℓ` (`N × N`).
#[derive(Debug, Clone)]
pub struct CovarianceSet {
    pub q: Vec<CMat>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SdrResiduals {
    /// `Σ_n p_n − P_TX`, positive when violated.
    pub sum_excess: f64,
    pub max_ub_excess: f64,
    pub max_lb_deficit: f64,
    /// `max |h̃_jᴴQ_ℓh̃_j| / (Tr(Q_ℓ)‖h̃_j‖²)` over `j ≠ ℓ`.
    pub max_zf_rel: f64,
    /// Most negative eigenvalue relative to `‖Q_ℓ‖_F`.
    pub min_eig_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdrDiagnostics {
    /// Relaxed objective `Σ α_ℓ log(1 + h̃_ℓᴴQ_ℓh̃_ℓ/σ²)` in nats.
    pub objective: f64,
    pub rank_ratio: Vec<f64>,
    pub constraint_residuals: SdrResiduals,
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

#[derive(Debug, Clone, Copy, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdrOptions {
    pub i_max: usize,
    /// Relative tolerance on the ADMM primal and dual residuals.
    pub tol: f64,
    /// Initial ADMM penalty.
    pub rho: f64,
}

impl Default for SdrOptions {
    fn default() -> Self {
        Self {
            i_max: 5000,
            tol: 1e-7,
            rho: 1.0,
        }
    }
}

/// Layer-wise linear operator `𝒜(X) = Σ_ℓ diag(B_ℓX_ℓB_ℓᴴ)` and helpers.
struct Lifted {
    bases: Vec<CMat>,
    /// `(I + 𝒜𝒜*)⁻¹`
    k_reg: DMatrix<f64>,
}

impl Lifted {
    fn new(h: &CMat) -> Result<Self> {
        let kl = h.nrows();
        let n = h.ncols();
        let mut bases = Vec::with_capacity(kl);
        for l in 0..kl {
            let others = h.clone().remove_row(l);
            bases.push(row_space_complement(&others)?);
        }
        let mut gram = DMatrix::<f64>::zeros(n, n);
        for b in &bases {
            let p = b * b.adjoint();
            for i in 0..n {
                for j in 0..n {
                    gram[(i, j)] += p[(i, j)].norm_sqr();
                }
            }
        }
        let reg = gram + DMatrix::<f64>::identity(n, n);
        let k_reg = reg
            .cholesky()
            .ok_or_else(|| FlatPrecError::NumericalBreakdown("I + 𝒜𝒜* not positive definite".into()))?
            .inverse();
        Ok(Self { bases, k_reg })
    }

    fn apply(&self, x: &[CMat]) -> DVector<f64> {
        let n = self.bases[0].nrows();
        let mut out = DVector::zeros(n);
        for (b, x_l) in self.bases.iter().zip(x) {
            let bx = b * x_l;
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..b.ncols() {
                    acc += (bx[(i, j)] * b[(i, j)].conj()).re;
                }
                out[i] += acc;
            }
        }
        out
    }

    fn adjoint(&self, y: &DVector<f64>) -> Vec<CMat> {
        self.bases
            .iter()
            .map(|b| {
                let mut scaled = b.clone();
                for i in 0..b.nrows() {
                    scaled.row_mut(i).iter_mut().for_each(|z| *z *= cr(y[i]));
                }
                b.adjoint() * scaled
            })
            .collect()
    }

    /// `T(X) = (I + 𝒜*𝒜)⁻¹X = X − 𝒜*((I + 𝒜𝒜*)⁻¹𝒜X)`.
    fn t_apply(&self, x: &[CMat]) -> Vec<CMat> {
        let corr = self.adjoint(&(&self.k_reg * self.apply(x)));
        x.iter().zip(corr).map(|(a, c)| a - c).collect()
    }
}

fn blocks_sub(a: &[CMat], b: &[CMat]) -> Vec<CMat> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn blocks_norm_sq(a: &[CMat]) -> f64 {
    a.iter().map(fro_norm_sq).sum()
}

/// Minimizes `−Σ α_ℓ log(1+u_ℓ) + ρ/2 (u − s⁰)ᵀG⁻¹(u − s⁰)` by damped Newton.
fn solve_gains(alpha: &[f64], s0: &[f64], g_inv: &DMatrix<f64>, rho: f64) -> Vec<f64> {
    let m = alpha.len();
    let s0v = DVector::from_column_slice(s0);
    let phi = |u: &DVector<f64>| -> f64 {
        let d = u - &s0v;
        let quad = 0.5 * rho * d.dot(&(g_inv * &d));
        quad - (0..m).map(|l| if alpha[l] > 0.0 { alpha[l] * (1.0 + u[l]).ln() } else { 0.0 }).sum::<f64>()
    };
    let mut u = DVector::from_iterator(m, s0.iter().map(|&x| x.max(0.0)));
    for _ in 0..100 {
        let d = &u - &s0v;
        let mut grad = g_inv * &d * rho;
        let mut hess = g_inv * rho;
        for l in 0..m {
            grad[l] -= alpha[l] / (1.0 + u[l]);
            hess[(l, l)] += alpha[l] / (1.0 + u[l]).powi(2);
        }
        let step = match hess.clone().cholesky() {
            Some(c) => c.solve(&grad),
            None => grad.clone(),
        };
        let decrement = grad.dot(&step);
        if decrement < 1e-22 {
            break;
        }
        let f0 = phi(&u);
        let mut t = 1.0;
        loop {
            let cand = &u - &step * t;
            if cand.iter().all(|&x| x > -1.0) && phi(&cand) <= f0 - 0.25 * t * decrement {
                u = cand;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return u.iter().cloned().collect();
            }
        }
    }
    u.iter().cloned().collect()
}

/// Solves the relaxed flat-ZF program for `eff` under budget `b`.
pub fn solve_sdr(eff: &EffectiveChannel, b: &PowerBudget, opts: &SdrOptions) -> Result<(CovarianceSet, SdrDiagnostics)> {
    let h = &eff.h_tilde;
    let (kl, n) = (h.nrows(), h.ncols());
    if kl > n {
        return Err(FlatPrecError::RankDeficient(format!("{kl} layers exceed {n} antennas")));
    }
    b.validate(n)?;
    let lifted = Lifted::new(h)?;
    // Work with powers in units of P_TX and noise-normalized gains.
    let nb = PowerBudget::new(1.0, b.p_ub / b.p_tx, b.p_lb / b.p_tx);
    let gain = (b.p_tx / eff.noise_var).sqrt();
    let q: Vec<CVec> = lifted
        .bases
        .iter()
        .enumerate()
        .map(|(l, bl)| bl.adjoint() * h.row(l).adjoint() * cr(gain))
        .collect();
    let alpha = &eff.layer_weights;
    let e_blocks: Vec<CMat> = q.iter().map(|v| v * v.adjoint()).collect();
    let a_vecs: Vec<DVector<f64>> = (0..kl)
        .map(|l| {
            let bq = &lifted.bases[l] * &q[l];
            DVector::from_iterator(n, bq.iter().map(|z| z.norm_sqr()))
        })
        .collect();
    let mut g = DMatrix::<f64>::zeros(kl, kl);
    for l in 0..kl {
        for j in 0..kl {
            g[(l, j)] = -a_vecs[l].dot(&(&lifted.k_reg * &a_vecs[j]));
        }
        g[(l, l)] += q[l].norm_squared().powi(2);
    }
    let g_inv = g
        .clone()
        .cholesky()
        .ok_or_else(|| FlatPrecError::NumericalBreakdown("gain Gram matrix not positive definite".into()))?
        .inverse();

    // Warm start from water-filled ZF, which is rank one and sum-feasible.
    let (wf, _) = wf_zf_spc(eff, b.p_tx)?;
    let mut x: Vec<CMat> = (0..kl)
        .map(|l| {
            let v = lifted.bases[l].adjoint() * wf.d.column(l) * cr(1.0 / b.p_tx.sqrt());
            &v * v.adjoint()
        })
        .collect();
    let mut y = x.clone();
    let mut ax = lifted.apply(&x);
    let mut p = DVector::from_vec(project_box_sum(ax.as_slice(), &nb));
    let r_dim = lifted.bases[0].ncols();
    let mut u: Vec<CMat> = vec![CMat::zeros(r_dim, r_dim); kl];
    let mut w = DVector::<f64>::zeros(n);
    let mut rho = opts.rho;
    let (mut r_prim, mut r_dual) = (f64::INFINITY, f64::INFINITY);
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=opts.i_max {
        iterations = it;
        let pw = &p - &w;
        let back = lifted.adjoint(&pw);
        let r: Vec<CMat> = (0..kl).map(|l| &y[l] - &u[l] + &back[l]).collect();
        let tr = lifted.t_apply(&r);
        let s0: Vec<f64> = (0..kl).map(|l| (q[l].adjoint() * &tr[l] * &q[l])[(0, 0)].re).collect();
        let s = solve_gains(alpha, &s0, &g_inv, rho);
        let m: Vec<CMat> = (0..kl)
            .map(|l| &e_blocks[l] * cr(alpha[l] / (1.0 + s[l]) / rho))
            .collect();
        let tm = lifted.t_apply(&m);
        x = (0..kl).map(|l| hermitian_part(&(&tr[l] + &tm[l]))).collect();
        ax = lifted.apply(&x);

        let y_old = std::mem::take(&mut y);
        y = (0..kl).map(|l| project_psd(&(&x[l] + &u[l]))).collect();
        let p_old = p.clone();
        let target = &ax + &w;
        p = DVector::from_vec(project_box_sum(target.as_slice(), &nb));

        for l in 0..kl {
            u[l] += &x[l] - &y[l];
        }
        w += &ax - &p;

        r_prim = (blocks_norm_sq(&blocks_sub(&x, &y)) + (&ax - &p).norm_squared()).sqrt();
        let dp = &p - &p_old;
        let dy = blocks_sub(&y, &y_old);
        let back_dp = lifted.adjoint(&dp);
        r_dual = rho * blocks_norm_sq(&blocks_sub(&dy, &back_dp.iter().map(|m| -m).collect::<Vec<_>>())).sqrt();

        let scale_p = (blocks_norm_sq(&x).sqrt() + ax.norm()).max(blocks_norm_sq(&y).sqrt() + p.norm());
        let back_w = lifted.adjoint(&w);
        let dual_var: Vec<CMat> = (0..kl).map(|l| &u[l] + &back_w[l]).collect();
        let scale_d = rho * blocks_norm_sq(&dual_var).sqrt();
        if r_prim <= opts.tol * scale_p.max(1e-12) && r_dual <= opts.tol * scale_d.max(1e-12) {
            converged = true;
            break;
        }
        if it % 10 == 0 {
            if r_prim > 10.0 * r_dual {
                rho *= 2.0;
                u.iter_mut().for_each(|m| *m *= cr(0.5));
                w *= 0.5;
            } else if r_dual > 10.0 * r_prim {
                rho *= 0.5;
                u.iter_mut().for_each(|m| *m *= cr(2.0));
                w *= 2.0;
            }
        }
    }

    // Polish with a diagonal congruence Q ← SQS that puts the antenna powers
    // exactly on their projection onto 𝒫. It keeps every Q_ℓ PSD, and since
    // S = I + O(residual) the ZF leakage it introduces is second order.
    let mut covs: Vec<CMat> = (0..kl)
        .map(|l| hermitian_part(&(&lifted.bases[l] * &y[l] * lifted.bases[l].adjoint())))
        .collect();
    let diag: Vec<f64> = (0..n).map(|i| covs.iter().map(|m| m[(i, i)].re).sum()).collect();
    let goal = project_box_sum(&diag, &nb);
    let scale: Vec<f64> = diag
        .iter()
        .zip(&goal)
        .map(|(&d, &g)| if d > 0.0 { (g / d).sqrt() } else { 1.0 })
        .collect();
    for m in covs.iter_mut() {
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] *= cr(scale[i] * scale[j] * b.p_tx);
            }
        }
    }
    let objective = (0..kl)
        .map(|l| {
            let h_l = h.row(l).adjoint();
            let s = (h_l.adjoint() * &covs[l] * &h_l)[(0, 0)].re / eff.noise_var;
            alpha[l] * (1.0 + s.max(0.0)).ln()
        })
        .sum();
    let set = CovarianceSet { q: covs };
    let diagnostics = SdrDiagnostics {
        objective,
        rank_ratio: rank_ratios(&set),
        constraint_residuals: residuals(eff, &set, b),
        iterations,
        converged,
        primal_residual: r_prim,
        dual_residual: r_dual,
    };
    Ok((set, diagnostics))
}

/// `λ_max(Q_ℓ)/Tr(Q_ℓ)` per layer.
pub fn rank_ratios(q: &CovarianceSet) -> Vec<f64> {
    q.q.iter()
        .map(|m| {
            let (vals, _) = herm_eig_desc(m);
            let tr = real_trace(m);
            if tr > 0.0 {
                (vals[0] / tr).min(1.0)
            } else {
                0.0
            }
        })
        .collect()
}

/// Independent recheck of the power, ZF and PSD conditions.
pub fn residuals(eff: &EffectiveChannel, q: &CovarianceSet, b: &PowerBudget) -> SdrResiduals {
    let n = eff.n_tx();
    let mut powers = vec![0.0; n];
    let mut max_zf_rel: f64 = 0.0;
    let mut min_eig_rel: f64 = 0.0;
    for (l, m) in q.q.iter().enumerate() {
        for (i, pw) in powers.iter_mut().enumerate() {
            *pw += m[(i, i)].re;
        }
        let tr = real_trace(m).max(f64::MIN_POSITIVE);
        for j in 0..eff.h_tilde.nrows() {
            if j == l {
                continue;
            }
            let hj = eff.h_tilde.row(j).adjoint();
            let leak = (hj.adjoint() * m * &hj)[(0, 0)].norm();
            max_zf_rel = max_zf_rel.max(leak / (tr * hj.norm_squared()));
        }
        let (vals, _) = herm_eig_desc(m);
        let fro = fro_norm_sq(m).sqrt().max(f64::MIN_POSITIVE);
        min_eig_rel = min_eig_rel.min(vals[vals.len() - 1] / fro);
    }
    let sum: f64 = powers.iter().sum();
    SdrResiduals {
        sum_excess: (sum - b.p_tx).max(0.0),
        max_ub_excess: powers.iter().map(|p| (p - b.p_ub).max(0.0)).fold(0.0, f64::max),
        max_lb_deficit: powers.iter().map(|p| (b.p_lb - p).max(0.0)).fold(0.0, f64::max),
        max_zf_rel,
        min_eig_rel,
    }
}

/// Principal-eigenvector beamformers `d̃_ℓ = √λ_max u_max`, with each
/// eigenvector rotated so its largest entry is real and positive.
pub fn extract_rank_one(q: &CovarianceSet, n_layers: usize) -> Result<Precoder> {
    let kl = q.q.len();
    if kl == 0 {
        return Err(FlatPrecError::InvalidInput("empty covariance set".into()));
    }
    let n = q.q[0].nrows();
    let mut d = CMat::zeros(n, kl);
    for (l, m) in q.q.iter().enumerate() {
        let (vals, vecs) = herm_eig_desc(m);
        let mut v = vecs.columns(0, 1).into_owned();
        fix_column_phases(&mut v);
        d.set_column(l, &(v.column(0) * cr(vals[0].max(0.0).sqrt())));
    }
    Precoder::new(d, n_layers)
}

/// Restores all three power constraints by row scaling; ZF leakage that the
/// scaling introduces is reported per layer, not removed.
pub fn repair_feasibility(eff: &EffectiveChannel, d: &Precoder, b: &PowerBudget) -> Result<(Precoder, Vec<f64>)> {
    let fixed = feasible_precoder(d, b, 200, 1e-10)?;
    let leak = leakage(eff, &fixed.d);
    Ok((fixed, leak))
}

#[derive(Debug, Clone)]
pub struct SdrOutput {
    pub precoder: Precoder,
    pub covariances: CovarianceSet,
    pub diagnostics: SdrDiagnostics,
    pub leakage: Vec<f64>,
    /// Weighted sum rate of the repaired precoder on the effective channel.
    pub wsr: f64,
}

/// Relaxation, rank-one extraction and feasibility repair in sequence.
pub fn sdr_flat_zf(eff: &EffectiveChannel, b: &PowerBudget, opts: &SdrOptions) -> Result<SdrOutput> {
    let (covariances, diagnostics) = solve_sdr(eff, b, opts)?;
    let raw = extract_rank_one(&covariances, eff.n_layers)?;
    let (precoder, leakage) = repair_feasibility(eff, &raw, b)?;
    let wsr = layer_wsr(eff, &precoder.d);
    Ok(SdrOutput {
        precoder,
        covariances,
        diagnostics,
        leakage,
        wsr,
    })
}

/// A relaxed problem instance as stored in the export format.
#[derive(Debug, Clone, PartialEq)]
pub struct SdrProblem {
    pub h_tilde: CMat,
    pub layer_weights: Vec<f64>,
    pub noise_var: f64,
    pub budget: PowerBudget,
    pub n_layers: usize,
}

impl SdrProblem {
    pub fn from_effective(eff: &EffectiveChannel, budget: &PowerBudget) -> Self {
        Self {
            h_tilde: eff.h_tilde.clone(),
            layer_weights: eff.layer_weights.clone(),
            noise_var: eff.noise_var,
            budget: budget.clone(),
            n_layers: eff.n_layers,
        }
    }

    /// Effective channel with identity combiners (`M = L`).
    pub fn to_effective(&self) -> EffectiveChannel {
        let l = self.n_layers;
        EffectiveChannel {
            h_tilde: self.h_tilde.clone(),
            combiners: vec![CMat::identity(l, l); self.h_tilde.nrows() / l],
            layer_weights: self.layer_weights.clone(),
            noise_var: self.noise_var,
            n_layers: l,
        }
    }

    /// Text export:
    ///
    /// ```text
    /// flatprec-sdr,v1
    /// n_tx,total_layers,n_layers,noise_var,p_tx,p_ub,p_lb
    /// weights,α_1,…,α_KL
    /// re,im,re,im,…        (one line per layer: the row h̃_ℓᴴ, N complex entries)
    /// ```
    ///
    /// Numbers use Rust's shortest round-trip formatting; `inf` marks an absent upper bound.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let (kl, n) = (self.h_tilde.nrows(), self.h_tilde.ncols());
        writeln!(out, "flatprec-sdr,v1")?;
        writeln!(
            out,
            "{n},{kl},{},{:e},{:e},{:e},{:e}",
            self.n_layers, self.noise_var, self.budget.p_tx, self.budget.p_ub, self.budget.p_lb
        )?;
        let w: Vec<String> = self.layer_weights.iter().map(|a| format!("{a:e}")).collect();
        writeln!(out, "weights,{}", w.join(","))?;
        for l in 0..kl {
            let row: Vec<String> = (0..n)
                .flat_map(|j| {
                    let z = self.h_tilde[(l, j)];
                    [format!("{:e}", z.re), format!("{:e}", z.im)]
                })
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let mut next = |what: &str| -> Result<String> {
            lines
                .next()
                .ok_or_else(|| FlatPrecError::Parse(format!("missing {what} line")))?
                .map_err(FlatPrecError::from)
        };
        if next("header")?.trim() != "flatprec-sdr,v1" {
            return Err(FlatPrecError::Parse("not a flatprec-sdr,v1 file".into()));
        }
        let num = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|e| FlatPrecError::Parse(format!("bad number {s:?}: {e}")))
        };
        let dims_line = next("dimensions")?;
        let dims: Vec<&str> = dims_line.split(',').collect();
        if dims.len() != 7 {
            return Err(FlatPrecError::Parse("dimension line needs 7 fields".into()));
        }
        let int = |s: &str| -> Result<usize> {
            s.trim().parse::<usize>().map_err(|e| FlatPrecError::Parse(format!("bad integer {s:?}: {e}")))
        };
        let (n, kl, n_layers) = (int(dims[0])?, int(dims[1])?, int(dims[2])?);
        let noise_var = num(dims[3])?;
        let budget = PowerBudget::new(num(dims[4])?, num(dims[5])?, num(dims[6])?);
        let weights_line = next("weights")?;
        let mut parts = weights_line.split(',');
        if parts.next().map(str::trim) != Some("weights") {
            return Err(FlatPrecError::Parse("expected weights line".into()));
        }
        let layer_weights = parts.map(num).collect::<Result<Vec<f64>>>()?;
        if layer_weights.len() != kl {
            return Err(FlatPrecError::Parse(format!("{} weights for {kl} layers", layer_weights.len())));
        }
        let mut h_tilde = CMat::zeros(kl, n);
        for l in 0..kl {
            let line = next("channel")?;
            let vals = line.split(',').map(num).collect::<Result<Vec<f64>>>()?;
            if vals.len() != 2 * n {
                return Err(FlatPrecError::Parse(format!("layer {l}: expected {} numbers", 2 * n)));
            }
            for j in 0..n {
                h_tilde[(l, j)] = crate::linalg::c(vals[2 * j], vals[2 * j + 1]);
            }
        }
        if n_layers == 0 || kl % n_layers != 0 {
            return Err(FlatPrecError::Parse("layer count not a multiple of layers per UE".into()));
        }
        Ok(Self {
            h_tilde,
            layer_weights,
            noise_var,
            budget,
            n_layers,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{gen_rayleigh, SystemDims};
    use crate::linalg::c;

    fn eff(seed: u64, n: usize, k: usize, noise: f64) -> EffectiveChannel {
        let ch = gen_rayleigh(SystemDims::new(n, k, 1, 1).unwrap(), 1.0, seed)
            .unwrap()
            .with_noise_var(noise)
            .unwrap();
        EffectiveChannel::eigen(&ch, 1).unwrap()
    }

    #[test]
    fn single_user_is_mrt() {
        let e = eff(3, 2, 1, 0.5);
        let b = PowerBudget::spc_only(2.0);
        let (q, diag) = solve_sdr(&e, &b, &SdrOptions::default()).unwrap();
        let h = e.h_tilde.row(0).adjoint();
        let expected = (1.0 + 2.0 * h.norm_squared() / 0.5).ln();
        assert!((diag.objective - expected).abs() < 1e-6 * expected);
        let mrt = &h * h.adjoint() * cr(2.0 / h.norm_squared());
        assert!(fro_norm_sq(&(&q.q[0] - mrt)).sqrt() < 1e-5);
    }

    #[test]
    fn spc_matches_water_filling() {
        let e = eff(8, 8, 2, 0.3);
        let b = PowerBudget::spc_only(3.0);
        let (_, diag) = solve_sdr(&e, &b, &SdrOptions::default()).unwrap();
        let (wf, _) = wf_zf_spc(&e, 3.0).unwrap();
        let oracle = layer_wsr(&e, &wf.d);
        assert!((diag.objective - oracle).abs() <= 1e-3 * oracle, "{} vs {oracle}", diag.objective);
    }

    #[test]
    fn flat_solution_is_feasible_and_zero_forcing() {
        let e = eff(4, 16, 4, 0.2);
        let b = PowerBudget::from_flatness(16.0, 16, 1.0);
        let (q, diag) = solve_sdr(&e, &b, &SdrOptions::default()).unwrap();
        let r = diag.constraint_residuals;
        assert!(r.sum_excess <= 1e-8 * 16.0);
        assert!(r.max_ub_excess <= 1e-8 * 16.0 && r.max_lb_deficit <= 1e-8 * 16.0);
        assert!(r.max_zf_rel <= 1e-8);
        assert!(r.min_eig_rel >= -1e-8);
        assert!(diag.rank_ratio.iter().all(|&x| x > 0.0 && x <= 1.0));
        assert_eq!(q.q.len(), 4);
    }

    #[test]
    fn rank_one_extraction() {
        let v = CVec::from_vec(vec![c(0.0, 1.0), c(0.5, 0.5), cr(0.2)]);
        let set = CovarianceSet { q: vec![&v * v.adjoint()] };
        let d = extract_rank_one(&set, 1).unwrap();
        let col = d.d.column(0).into_owned();
        assert!(fro_norm_sq(&(&col * col.adjoint() - &set.q[0])).sqrt() < 1e-10);

        let diag = CMat::from_diagonal(&CVec::from_vec(vec![cr(2.0), cr(1.0), cr(0.0)]));
        let d = extract_rank_one(&CovarianceSet { q: vec![diag] }, 1).unwrap();
        assert!((d.d[(0, 0)] - cr(2f64.sqrt())).norm() < 1e-12);
        assert!(d.d[(1, 0)].norm() < 1e-12 && d.d[(2, 0)].norm() < 1e-12);
    }

    #[test]
    fn extraction_is_best_rank_one() {
        let a = CMat::from_fn(4, 4, |i, j| c((i * 7 + j * 3) as f64 % 5.0 - 2.0, (i + j * j) as f64 % 3.0 - 1.0));
        let q = &a * a.adjoint();
        let (vals, _) = herm_eig_desc(&q);
        let d = extract_rank_one(&CovarianceSet { q: vec![q.clone()] }, 1).unwrap();
        let col = d.d.column(0).into_owned();
        let err = fro_norm_sq(&(&q - &col * col.adjoint()));
        let oracle: f64 = vals[1..].iter().map(|x| x * x).sum();
        assert!((err - oracle).abs() < 1e-9 * oracle.max(1.0));
    }

    #[test]
    fn repair_restores_budget() {
        let e = eff(6, 8, 2, 1.0);
        let (wf, _) = wf_zf_spc(&e, 4.0).unwrap();
        let b = PowerBudget::spc_only(4.0);
        let (same, leak) = repair_feasibility(&e, &wf, &b).unwrap();
        assert!(fro_norm_sq(&(&same.d - &wf.d)) < 1e-20);
        assert!(leak.iter().all(|&x| x < 1e-20));

        let big = Precoder::new(&wf.d * cr(3.0), 1).unwrap();
        let (fixed, leak) = repair_feasibility(&e, &big, &b).unwrap();
        assert!(fixed.total_power() <= 4.0 * (1.0 + 1e-12));
        assert_eq!(leak, leakage(&e, &fixed.d));

        let flat = PowerBudget::from_flatness(4.0, 8, 0.0);
        let (fixed, _) = repair_feasibility(&e, &big, &flat).unwrap();
        assert!(fixed.row_powers().iter().all(|&p| (p - 0.5).abs() < 1e-12));
    }

    #[test]
    fn export_roundtrip() {
        let e = eff(9, 6, 3, 0.7);
        let prob = SdrProblem::from_effective(&e, &PowerBudget::from_flatness(5.0, 6, f64::INFINITY));
        let mut buf = Vec::new();
        prob.write(&mut buf).unwrap();
        let back = SdrProblem::read(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.h_tilde, prob.h_tilde);
        assert_eq!(back.budget.p_ub, f64::INFINITY);
        assert_eq!(back.layer_weights, prob.layer_weights);
        assert!(SdrProblem::read(std::io::Cursor::new(b"nope\n".to_vec())).is_err());
    }
}
