//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! (with indented detail lines for multi-part criteria) and exits non-zero if
//! any criterion fails.

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use flatprec::channel::{gen_rayleigh, ChannelSet, EffectiveChannel, SystemDims};
use flatprec::constraints::{FeasibilityCheck, PowerBudget};
use flatprec::harness::{run_experiment, summarize, ExperimentConfig, PrecoderKind, TrialRecord};
use flatprec::linalg::{c, cr, CMat};
use flatprec::power::{max_sat_power_db, power_report_from_powers, required_sat_db, PaModel};
use flatprec::precoder::Precoder;
use flatprec::wmmse::{flat_wmmse, mse_matrix, rate, update_u, update_w, WmmseOptions};
use flatprec::zf::frg::{frg_flat_zf, frg_flat_zf_wf, gain_profile, FrgOptions};
use flatprec::zf::layer_wsr;
use flatprec::zf::sdr::{solve_sdr, SdrOptions};
use flatprec::FlatPrecError;

// Pinned tolerances.
const TOL_SAT_MAX_DB: f64 = 0.005;
const TOL_SAT_DB: f64 = 0.01;
const TOL_P_PA_W: f64 = 1.0;
const TOL_EE_MBIT: f64 = 0.05;
const TOL_MSE_IDENTITY: f64 = 1e-9;
const TOL_MONOTONE: f64 = 1e-9;
const TOL_RECHECK_WMMSE: f64 = 1e-8;
const TOL_WF: f64 = 1e-6;
const TOL_ZF_RESIDUAL: f64 = 1e-8;
const TOL_NU: f64 = 1e-4;
const MIN_NU_FRACTION: f64 = 0.95;
const TOL_FLATNESS: f64 = 1e-6;
const TOL_SDR_BOUND: f64 = 1e-4;
const MIN_RANK_RATIO: f64 = 0.999;
const MIN_RANK_FRACTION: f64 = 0.90;
const MIN_WMMSE_RATIO: f64 = 0.85;
const MIN_ZF_RATIO: f64 = 0.90;
const MONOTONE_SIGMAS: f64 = 2.0;
const MAX_LINEAR_FACTOR: f64 = 1.5;
const MIN_SDR_SPEEDUP: f64 = 100.0;

struct Report {
    id: &'static str,
    title: &'static str,
    details: Vec<(bool, String)>,
}

impl Report {
    fn new(id: &'static str, title: &'static str) -> Self {
        Self {
            id,
            title,
            details: Vec::new(),
        }
    }

    fn check(&mut self, pass: bool, msg: String) {
        self.details.push((pass, msg));
    }

    fn passed(&self) -> bool {
        self.details.iter().all(|d| d.0)
    }
}

fn mark(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * cr(std::f64::consts::FRAC_1_SQRT_2)
}

fn random_mat(rng: &mut ChaCha8Rng, r: usize, cols: usize) -> CMat {
    CMat::from_fn(r, cols, |_, _| gaussian(rng))
}

fn logdet(m: &CMat) -> f64 {
    m.clone().determinant().norm().ln()
}

fn chol_logdet(m: &CMat) -> f64 {
    let l = m.clone().cholesky().unwrap().unpack();
    2.0 * l.diagonal().iter().map(|z| z.re.ln()).sum::<f64>()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn c01() -> Report {
    let mut r = Report::new("C1", "PA model golden values");
    let pa = PaModel::default();
    let sat_max = max_sat_power_db(7.0);
    r.check(
        (sat_max - 24.47).abs() <= TOL_SAT_MAX_DB,
        format!("max saturation at 7 GHz = {sat_max:.4} dBW (target 24.47 ± {TOL_SAT_MAX_DB})"),
    );
    for (dp, target) in [(0.0, 15.99), (1.0, 16.99), (2.0, 17.99)] {
        let b = PowerBudget::from_flatness(160.0, 32, dp);
        // Worst case inside the interval: one antenna at the upper bound.
        let mut p = vec![b.p_lb; 32];
        p[0] = b.p_ub;
        let sat = required_sat_db(&p, &pa).unwrap();
        r.check(
            (sat - target).abs() <= TOL_SAT_DB,
            format!("required saturation, dp = {dp} dB: {sat:.4} dBW (target {target} ± {TOL_SAT_DB})"),
        );
    }
    let flat = vec![5.0; 32];
    let sat = required_sat_db(&flat, &pa).unwrap();
    let rep = power_report_from_powers(&flat, &pa, sat, 18.27e9).unwrap();
    r.check(
        (rep.p_pa - 569.0).abs() <= TOL_P_PA_W,
        format!("flat P_PA = {:.2} W (target 569 ± {TOL_P_PA_W})", rep.p_pa),
    );
    let ee = rep.energy_eff / 1e6;
    r.check(
        (ee - 25.91).abs() <= TOL_EE_MBIT,
        format!("flat EE at 18.27 Gbit/s = {ee:.3} Mbit/J (target 25.91 ± {TOL_EE_MBIT})"),
    );
    r
}

fn c02() -> Report {
    let mut r = Report::new("C2", "MSE identity suite, 200 instances");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_identity, mut worst_rate) = (0.0f64, 0.0f64);
    let mut count = 0;
    while count < 200 {
        let m = rng.random_range(1..=4);
        let l = rng.random_range(1..=m);
        let k = rng.random_range(1..=4);
        let n = rng.random_range(k * m..=k * m + 8);
        let dims = SystemDims::new(n, k, m, l).unwrap();
        let noise = 10f64.powf(rng.random_range(-2.0..1.0));
        let ch = gen_rayleigh(dims, 1.0, rng.random()).unwrap().with_noise_var(noise).unwrap();
        let d = Precoder::new(random_mat(&mut rng, n, k * l) * cr(rng.random_range(0.1..3.0)), l).unwrap();
        let u = update_u(&ch, &d).unwrap();
        let w = update_w(&ch, &d, &u).unwrap();
        let rates = rate(&ch, &d).unwrap();
        for ue in 0..k {
            // Oracle: B = H_k D_k, N = interference plus noise, computed here.
            let hd = &ch.per_ue[ue] * &d.d;
            let b = hd.columns(ue * l, l).into_owned();
            let mut nmat = CMat::identity(m, m) * cr(noise);
            for j in 0..k {
                if j != ue {
                    let bj = hd.columns(j * l, l);
                    nmat += &bj * bj.adjoint();
                }
            }
            // log|I + BBᴴN⁻¹| = log|I + BᴴN⁻¹B|, both factors via Cholesky.
            let chol = nmat.cholesky().unwrap();
            let inner = CMat::identity(l, l) + b.adjoint() * chol.solve(&b);
            let lhs = chol_logdet(&inner);
            let e = mse_matrix(&ch, &d, ue, &u[ue]).unwrap();
            let rhs = logdet(&w[ue]) - (&w[ue] * &e).trace().re + l as f64;
            worst_identity = worst_identity.max((lhs - rhs).abs() / lhs.abs().max(1.0));
            worst_rate = worst_rate.max((lhs - rates.per_ue[ue]).abs() / lhs.abs().max(1.0));
        }
        count += 1;
    }
    r.check(
        worst_identity <= TOL_MSE_IDENTITY,
        format!("worst |LHS - RHS| / max(1, |LHS|) = {worst_identity:.2e} (tol {TOL_MSE_IDENTITY:e})"),
    );
    r.check(
        worst_rate <= TOL_MSE_IDENTITY,
        format!("worst rate vs log-det oracle = {worst_rate:.2e}"),
    );
    r
}

fn c03() -> Report {
    let mut r = Report::new("C3", "flat WMMSE monotonicity and feasibility, 100 instances");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let opts = WmmseOptions::default();
    let (mut worst_drop, mut infeasible, mut errors) = (0.0f64, 0, 0);
    for _ in 0..100 {
        let n = [8, 16, 32][rng.random_range(0..3)];
        let k = rng.random_range(4..=8);
        let m = if n >= 2 * k { rng.random_range(1..=2) } else { 1 };
        let l = rng.random_range(1..=m);
        let dp = [0.0, 1.0, 2.0, 3.0, f64::INFINITY][rng.random_range(0..5)];
        let ch = gen_rayleigh(SystemDims::new(n, k, m, l).unwrap(), 10.0 / 160.0, rng.random()).unwrap();
        let b = PowerBudget::from_flatness(160.0, n, dp);
        let out = match flat_wmmse(&ch, &b, l, None, &opts) {
            Ok(o) => o,
            Err(_) => {
                errors += 1;
                continue;
            }
        };
        for w in out.trace.windows(2) {
            let drop = (w[0].wsr - w[1].wsr) / w[0].wsr.abs().max(1e-300);
            worst_drop = worst_drop.max(drop);
        }
        if !FeasibilityCheck::of(&out.precoder.row_powers(), &b, TOL_RECHECK_WMMSE).all() {
            infeasible += 1;
        }
    }
    r.check(
        worst_drop <= TOL_MONOTONE,
        format!("largest relative WSR decrease between iterations = {worst_drop:.2e} (tol {TOL_MONOTONE:e})"),
    );
    r.check(infeasible == 0, format!("{infeasible} final precoders fail the 1e-8 recheck"));
    r.check(errors == 0, format!("{errors} solver errors"));
    r
}

/// Water-filling rate by bisection on the water level, independent of the library.
fn wf_oracle(h: &CMat, alpha: &[f64], noise: f64, p_tx: f64) -> f64 {
    let gram_inv = (h * h.adjoint()).try_inverse().unwrap();
    let tau: Vec<f64> = (0..h.nrows()).map(|l| gram_inv[(l, l)].re).collect();
    let used = |psi: f64| -> f64 {
        tau.iter()
            .zip(alpha)
            .map(|(t, a)| noise * (psi * a - t).max(0.0))
            .sum()
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while used(hi) < p_tx {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if used(mid) < p_tx {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let psi = 0.5 * (lo + hi);
    tau.iter().zip(alpha).map(|(t, a)| a * (psi * a / t).max(1.0).ln()).sum()
}

fn c04() -> Report {
    let mut r = Report::new("C4", "FRG under sum power only equals water-filling ZF, 100 instances");
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut errors = 0;
    for _ in 0..100 {
        let k = rng.random_range(1..=8);
        let n = rng.random_range(k..=k + 24);
        let dims = SystemDims::new(n, k, 1, 1).unwrap();
        let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..2.0)).collect();
        let noise = rng.random_range(0.1..2.0);
        let ch = gen_rayleigh(dims, 1.0, rng.random())
            .unwrap()
            .with_noise_var(noise)
            .unwrap()
            .with_weights(weights)
            .unwrap();
        let eff = EffectiveChannel::eigen(&ch, 1).unwrap();
        let p_tx = rng.random_range(1.0..100.0);
        match frg_flat_zf_wf(&eff, &PowerBudget::spc_only(p_tx), &FrgOptions::default()) {
            Ok(s) => {
                let got = layer_wsr(&eff, &s.d.d);
                let want = wf_oracle(&eff.h_tilde, &eff.layer_weights, noise, p_tx);
                worst = worst.max(rel(got, want));
            }
            Err(_) => errors += 1,
        }
    }
    r.check(worst <= TOL_WF, format!("worst relative WSR gap = {worst:.2e} (tol {TOL_WF:e})"));
    r.check(errors == 0, format!("{errors} solver errors"));
    r
}

fn adversarial(n: usize, xi: f64) -> EffectiveChannel {
    let mut h = CMat::zeros(2, n);
    h[(0, 0)] = cr(1.0);
    h[(1, 0)] = cr(1.0);
    h[(0, 1)] = cr(xi);
    h[(1, 2)] = cr(xi);
    for j in 3..n {
        h[(0, j)] = cr(xi * 0.5);
        h[(1, j)] = c(0.0, xi * 0.5);
    }
    EffectiveChannel {
        h_tilde: h,
        combiners: vec![CMat::identity(1, 1); 2],
        layer_weights: vec![1.0; 2],
        noise_var: 1.0,
        n_layers: 1,
    }
}

fn c05() -> Report {
    let mut r = Report::new("C5", "FRG duality, zero forcing and infeasibility report");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_res, mut total, mut close) = (0.0f64, 0, 0);
    for &(n, kl) in &[(16, 2), (16, 4), (32, 4), (32, 8), (64, 8), (64, 16)] {
        for dp in [0.0, 1.0, 2.0] {
            for _ in 0..6 {
                let ch = gen_rayleigh(SystemDims::new(n, kl, 1, 1).unwrap(), 10.0 / 160.0, rng.random()).unwrap();
                let eff = EffectiveChannel::eigen(&ch, 1).unwrap();
                let b = PowerBudget::from_flatness(160.0, n, dp);
                total += 1;
                let sol = match frg_flat_zf_wf(&eff, &b, &FrgOptions::default()) {
                    Ok(s) => s,
                    Err(FlatPrecError::NoFeasiblePoint { best, .. }) => *best,
                    Err(e) => panic!("FRG failed: {e}"),
                };
                for row in &sol.trace {
                    worst_res = worst_res.max(row.zf_residual_rel);
                }
                if (1.0 - sol.nu).abs() <= TOL_NU && sol.converged {
                    close += 1;
                }
            }
        }
    }
    r.check(
        worst_res <= TOL_ZF_RESIDUAL,
        format!("worst per-iteration ZF residual = {worst_res:.2e} (tol {TOL_ZF_RESIDUAL:e})"),
    );
    let frac = close as f64 / total as f64;
    r.check(
        frac >= MIN_NU_FRACTION,
        format!("|1 - nu| <= {TOL_NU:e} on {close}/{total} = {:.1}% (need {:.0}%)", 100.0 * frac, 100.0 * MIN_NU_FRACTION),
    );
    for dp in [0.0, 1.0] {
        let eff = adversarial(16, 1e-3);
        let b = PowerBudget::from_flatness(16.0, 16, dp);
        let opts = FrgOptions {
            i_max: 100,
            ..Default::default()
        };
        let res = frg_flat_zf(&eff, &gain_profile(&[1.0, 1.0]).unwrap(), &b, &opts);
        let ok = matches!(&res, Err(FlatPrecError::NoFeasiblePoint { rho, .. }) if *rho < b.p_lb / b.p_ub);
        let what = match &res {
            Err(FlatPrecError::NoFeasiblePoint { rho, max_lb_violation, .. }) => {
                format!("NoFeasiblePoint, rho = {rho:.2e} < {:.3}, lb short by {max_lb_violation:.2e} W", b.p_lb / b.p_ub)
            }
            Ok(_) => "returned a solution".into(),
            Err(e) => format!("other error: {e}"),
        };
        r.check(ok, format!("adversarial channel, dp = {dp} dB: {what}"));
    }
    r
}

fn flatness_cfg(precoders: &str, n: usize, k: usize, trials: usize) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(&format!(
        r#"
precoders = [{precoders}]
[system]
n_tx = [{n}]
n_ue = [{k}]
[budget]
delta_p_db = [0.0, 1.0, 2.0]
[channel]
snr_db = 10.0
trials = {trials}
base_seed = 600
"#
    ))
    .unwrap()
}

fn c06() -> Report {
    let mut r = Report::new("C6", "flatness control for all flat solvers");
    let runs = [
        flatness_cfg("\"flat_wmmse\", \"frg_flat_zf\", \"sdr_flat_zf\"", 12, 3, 8),
        flatness_cfg("\"flat_wmmse\", \"frg_flat_zf\"", 32, 8, 20),
    ];
    for cfg in runs {
        let recs = run_experiment(&cfg).unwrap();
        for kind in [PrecoderKind::FlatWmmse, PrecoderKind::FrgFlatZf, PrecoderKind::SdrFlatZf] {
            let mine: Vec<&TrialRecord> = recs.iter().filter(|x| x.precoder == kind).collect();
            if mine.is_empty() {
                continue;
            }
            let bad = mine
                .iter()
                .filter(|x| {
                    // Recomputed bounds, not the record's own flags.
                    let dp = x.budget.delta_p_db.unwrap();
                    let b = PowerBudget::from_flatness(160.0, x.dims.n_tx, dp);
                    !x.has_precoder() || !FeasibilityCheck::of(&x.powers, &b, TOL_FLATNESS).all()
                })
                .count();
            r.check(
                bad == 0,
                format!("{kind} N={} K={}: {bad}/{} trials outside bounds", cfg.system.n_tx[0], cfg.system.n_ue[0], mine.len()),
            );
        }
    }
    r
}

fn c07() -> Report {
    let mut r = Report::new("C7", "relaxed SDR bounds FRG, 50 instances");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let opts = SdrOptions::default();
    let (mut worst, mut rank_ok, mut compared, mut no_frg) = (f64::NEG_INFINITY, 0, 0, 0);
    for _ in 0..50 {
        let kl = rng.random_range(2..=4);
        let n = rng.random_range(2 * kl..=16);
        let dp = [0.0, 1.0, 2.0][rng.random_range(0..3)];
        let ch = gen_rayleigh(SystemDims::new(n, kl, 1, 1).unwrap(), 10.0 / 40.0, rng.random()).unwrap();
        let eff = EffectiveChannel::eigen(&ch, 1).unwrap();
        let b = PowerBudget::from_flatness(40.0, n, dp);
        let (q, diag) = solve_sdr(&eff, &b, &opts).unwrap();
        let _ = q;
        if diag.rank_ratio.iter().all(|&x| x >= MIN_RANK_RATIO) {
            rank_ok += 1;
        }
        match frg_flat_zf_wf(&eff, &b, &FrgOptions::default()) {
            Ok(s) => {
                let frg = layer_wsr(&eff, &s.d.d);
                worst = worst.max((frg - diag.objective) / frg.abs());
                compared += 1;
            }
            Err(_) => no_frg += 1,
        }
    }
    r.check(
        worst <= TOL_SDR_BOUND,
        format!("max (FRG - relaxed) / FRG = {worst:.2e} over {compared} instances (tol {TOL_SDR_BOUND:e}; {no_frg} without an FRG point)"),
    );
    let frac = rank_ok as f64 / 50.0;
    r.check(
        frac >= MIN_RANK_FRACTION,
        format!("rank ratio >= {MIN_RANK_RATIO} on {rank_ok}/50 (need {:.0}%)", 100.0 * MIN_RANK_FRACTION),
    );
    r
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, var.sqrt())
}

fn c08() -> Report {
    let mut r = Report::new("C8", "flat versus conventional trends at N=32, K=8, 200 trials");
    let cfg = ExperimentConfig::from_toml_str(
        r#"
precoders = ["flat_wmmse", "conv_wmmse", "frg_flat_zf", "conv_zf_spc"]
[system]
n_tx = [32]
n_ue = [8]
[budget]
delta_p_db = [0.0, 1.0, 2.0, inf]
[channel]
snr_db = 10.0
trials = 200
base_seed = 800
"#,
    )
    .unwrap();
    let recs = run_experiment(&cfg).unwrap();
    let summary = summarize(&recs, &cfg.pa).unwrap();
    let row = |p: PrecoderKind, dp: f64| {
        summary
            .rows
            .iter()
            .find(|x| x.precoder == p.id() && x.delta_p_db == Some(dp))
            .unwrap()
            .clone()
    };
    let inf = f64::INFINITY;
    for (flat, conv, min_ratio) in [
        (PrecoderKind::FlatWmmse, PrecoderKind::ConvWmmse, MIN_WMMSE_RATIO),
        (PrecoderKind::FrgFlatZf, PrecoderKind::ConvZfSpc, MIN_ZF_RATIO),
    ] {
        let (f0, cv) = (row(flat, 0.0), row(conv, inf));
        let ratio = f0.mean_sum_rate_gbps / cv.mean_sum_rate_gbps;
        r.check(ratio >= min_ratio, format!("{flat} (dp=0) / {conv} sum rate = {ratio:.4} (need >= {min_ratio})"));
        r.check(
            f0.energy_eff_mbit_per_j > cv.energy_eff_mbit_per_j,
            format!(
                "EE {flat} (dp=0) = {:.2} vs {conv} = {:.2} Mbit/J (x{:.2})",
                f0.energy_eff_mbit_per_j,
                cv.energy_eff_mbit_per_j,
                f0.energy_eff_mbit_per_j / cv.energy_eff_mbit_per_j
            ),
        );
        // Paired per-trial differences along dp = 0, 1, 2, then the conventional baseline.
        let series: Vec<Vec<f64>> = [(flat, 0.0), (flat, 1.0), (flat, 2.0), (conv, inf)]
            .iter()
            .map(|&(p, dp)| {
                recs.iter()
                    .filter(|x| x.precoder == p && x.budget.delta_p_db == Some(dp))
                    .map(|x| x.wsr_nats)
                    .collect()
            })
            .collect();
        let mut steps = Vec::new();
        let mut ok = true;
        for w in series.windows(2) {
            let diff: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| b - a).collect();
            let (m, sd) = mean_sd(&diff);
            let se = sd / (diff.len() as f64).sqrt();
            ok &= m >= -MONOTONE_SIGMAS * se;
            steps.push(format!("{m:+.4}±{se:.4}"));
        }
        r.check(ok, format!("{flat} paired WSR steps over dp 0->1->2->inf: {}", steps.join(", ")));
    }
    r
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn frg_instance(n: usize, kl: usize, seed: u64) -> (EffectiveChannel, PowerBudget) {
    let ch: ChannelSet = gen_rayleigh(SystemDims::new(n, kl, 1, 1).unwrap(), 10.0 / 160.0, seed).unwrap();
    (EffectiveChannel::eigen(&ch, 1).unwrap(), PowerBudget::from_flatness(160.0, n, 0.0))
}

fn c09() -> Report {
    let mut r = Report::new("C9", "FRG scaling and speed against SDR");
    let ns = [64usize, 128, 256, 512];
    let mut per_iter = Vec::new();
    for &n in &ns {
        let mut samples = Vec::new();
        for seed in 0..7 {
            let (eff, b) = frg_instance(n, 8, 900 + seed);
            let t = Instant::now();
            let s = frg_flat_zf_wf(&eff, &b, &FrgOptions::default()).unwrap();
            samples.push(t.elapsed().as_secs_f64() / s.iterations.max(1) as f64);
        }
        per_iter.push(median(samples));
    }
    // Growth relative to N = 64, divided by the linear prediction.
    let factors: Vec<f64> = ns
        .iter()
        .zip(&per_iter)
        .map(|(&n, &t)| (t / per_iter[0]) / (n as f64 / ns[0] as f64))
        .collect();
    let worst = factors.iter().cloned().fold(0.0, f64::max);
    r.check(
        worst <= MAX_LINEAR_FACTOR,
        format!(
            "per-iteration time {:?} s; growth over linear {:?} (max {MAX_LINEAR_FACTOR})",
            per_iter.iter().map(|t| format!("{t:.2e}")).collect::<Vec<_>>(),
            factors.iter().map(|f| format!("{f:.2}")).collect::<Vec<_>>()
        ),
    );

    let (eff, b) = frg_instance(32, 8, 990);
    let mut frg_times = Vec::new();
    for _ in 0..5 {
        let t = Instant::now();
        frg_flat_zf_wf(&eff, &b, &FrgOptions::default()).unwrap();
        frg_times.push(t.elapsed().as_secs_f64());
    }
    let frg = median(frg_times);
    let t = Instant::now();
    let (_, diag) = solve_sdr(&eff, &b, &SdrOptions::default()).unwrap();
    let sdr = t.elapsed().as_secs_f64();
    r.check(
        frg * MIN_SDR_SPEEDUP <= sdr,
        format!(
            "N=32, KL=8: FRG {frg:.2e} s, SDR {sdr:.2e} s ({} iterations), ratio {:.0} (need >= {MIN_SDR_SPEEDUP})",
            diag.iterations,
            sdr / frg
        ),
    );
    r
}

fn c10() -> Report {
    let mut r = Report::new("C10", "determinism of the record CSV");
    let cfg = ExperimentConfig::from_toml_str(
        r#"
precoders = ["flat_wmmse", "frg_flat_zf", "sdr_flat_zf", "conv_wmmse", "conv_zf_spc"]
[system]
n_tx = [10]
n_ue = [2, 3]
[channel]
trials = 3
base_seed = 1000
"#,
    )
    .unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let recs = run_experiment(&cfg).unwrap();
        flatprec::harness::write_run(d.path(), &cfg, &recs).unwrap();
    }
    for f in ["records.csv", "summary.csv", "cdf_power.csv", "cdf_rate.csv", "manifest.json"] {
        let a = std::fs::read(dirs[0].path().join(f)).unwrap();
        let b = std::fs::read(dirs[1].path().join(f)).unwrap();
        r.check(a == b && !a.is_empty(), format!("{f}: {} bytes, identical = {}", a.len(), a == b));
    }
    r
}

fn main() {
    let criteria: [fn() -> Report; 10] = [c01, c02, c03, c04, c05, c06, c07, c08, c09, c10];
    let mut failed = Vec::new();
    for f in criteria {
        let t = Instant::now();
        let rep = f();
        let secs = t.elapsed().as_secs_f64();
        for (pass, msg) in &rep.details {
            println!("    [{}] {msg}", mark(*pass));
        }
        println!("{} {}: {} ({secs:.1} s)", mark(rep.passed()), rep.id, rep.title);
        if !rep.passed() {
            failed.push(rep.id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed {}", failed.join(", "));
        std::process::exit(1);
    }
}
