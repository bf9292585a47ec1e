//! Seeded Monte-Carlo runner.

use std::time::Instant;

use rayon::prelude::*;

use super::config::{BudgetPoint, ExperimentConfig, Generator, PrecoderKind};
use super::longterm::longterm_weights;
use super::record::{PowerFigures, TrialRecord, TrialStatus};
use crate::channel::{gen_multipath, gen_rayleigh, ChannelSet, EffectiveChannel, SystemDims};
use crate::constraints::{FeasibilityCheck, PowerBudget};
use crate::error::{FlatPrecError, Result};
use crate::linalg::cr;
use crate::power::{power_report_from_powers, required_sat_db};
use crate::precoder::Precoder;
use crate::wmmse::{flat_wmmse, rate};
use crate::zf::frg::frg_flat_zf_wf;
use crate::zf::sdr::{sdr_flat_zf, SdrProblem};

/// Channel seed of frame `f` within a trial seeded with `seed`. Frame 0 uses
/// the trial seed itself.
pub fn frame_seed(seed: u64, frame: usize) -> u64 {
    seed.wrapping_add((frame as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// The channel a trial sees, with unit noise power and equal weights.
pub fn trial_channel(cfg: &ExperimentConfig, dims: SystemDims, seed: u64) -> Result<ChannelSet> {
    let c = &cfg.channel;
    let scale = c.snr_scale(cfg.budget.p_tx);
    let mut ch = match c.generator {
        Generator::Rayleigh => gen_rayleigh(dims, scale, seed)?,
        Generator::Multipath => gen_multipath(dims, scale, c.n_paths, seed)?,
    };
    if let Some(gains) = &c.ue_gains_db {
        for (h, g) in ch.per_ue.iter_mut().zip(gains) {
            *h *= cr(10f64.powf(g / 20.0));
        }
    }
    Ok(ch)
}

/// A solver outcome before the independent recheck.
pub struct Solved {
    pub precoder: Option<Precoder>,
    pub status: TrialStatus,
    pub iterations: usize,
    pub converged: bool,
    pub solve_time_s: f64,
}

/// Runs one precoder on one channel. Only the solver call is timed.
pub fn solve(kind: PrecoderKind, ch: &ChannelSet, n_layers: usize, budget: &PowerBudget, cfg: &ExperimentConfig) -> Solved {
    let opts = &cfg.solvers;
    let failed = |e: FlatPrecError, t: f64| Solved {
        precoder: None,
        status: TrialStatus::Failed(e.to_string()),
        iterations: 0,
        converged: false,
        solve_time_s: t,
    };
    match kind {
        PrecoderKind::FlatWmmse | PrecoderKind::ConvWmmse => {
            let t0 = Instant::now();
            let out = flat_wmmse(ch, budget, n_layers, None, &opts.wmmse);
            let t = t0.elapsed().as_secs_f64();
            match out {
                Ok(o) => Solved {
                    precoder: Some(o.precoder),
                    status: TrialStatus::Ok,
                    iterations: o.iterations,
                    converged: o.converged,
                    solve_time_s: t,
                },
                Err(e) => failed(e, t),
            }
        }
        PrecoderKind::FrgFlatZf | PrecoderKind::ConvZfSpc | PrecoderKind::SdrFlatZf => {
            let eff = match EffectiveChannel::eigen(ch, n_layers) {
                Ok(e) => e,
                Err(e) => return failed(e, 0.0),
            };
            let t0 = Instant::now();
            if kind == PrecoderKind::SdrFlatZf {
                let out = sdr_flat_zf(&eff, budget, &opts.sdr);
                let t = t0.elapsed().as_secs_f64();
                return match out {
                    Ok(o) => Solved {
                        precoder: Some(o.precoder),
                        status: TrialStatus::Ok,
                        iterations: o.diagnostics.iterations,
                        converged: o.diagnostics.converged,
                        solve_time_s: t,
                    },
                    Err(e) => failed(e, t),
                };
            }
            let out = frg_flat_zf_wf(&eff, budget, &opts.frg);
            let t = t0.elapsed().as_secs_f64();
            match out {
                Ok(s) => Solved {
                    iterations: s.iterations,
                    converged: s.converged,
                    precoder: Some(s.d),
                    status: TrialStatus::Ok,
                    solve_time_s: t,
                },
                Err(FlatPrecError::NoFeasiblePoint { best, .. }) => Solved {
                    iterations: best.iterations,
                    converged: false,
                    precoder: Some(best.d),
                    status: TrialStatus::NoFeasiblePoint,
                    solve_time_s: t,
                },
                Err(e) => failed(e, t),
            }
        }
    }
}

/// Rates, recheck and PA figures for a solved trial.
#[allow(clippy::too_many_arguments)]
fn make_record(
    cfg: &ExperimentConfig,
    ch: &ChannelSet,
    dims: SystemDims,
    trial: usize,
    frame: usize,
    seed: u64,
    kind: PrecoderKind,
    budget: &PowerBudget,
    solved: Solved,
) -> TrialRecord {
    let tol = cfg.solvers.recheck_rel_tol;
    let mut rec = TrialRecord {
        trial,
        frame,
        seed,
        dims,
        precoder: kind,
        budget: *budget,
        status: solved.status,
        wsr_nats: 0.0,
        sum_rate_bps: 0.0,
        ue_rates_bits: vec![0.0; dims.n_ue],
        weights: ch.weights.clone(),
        powers: vec![0.0; dims.n_tx],
        iterations: solved.iterations,
        converged: solved.converged,
        feasibility: FeasibilityCheck::of(&vec![0.0; dims.n_tx], budget, tol),
        power: None,
        solve_time_s: Some(solved.solve_time_s),
    };
    let Some(d) = solved.precoder else {
        // No precoder: every recheck flag is false.
        rec.feasibility.spc = false;
        rec.feasibility.ub = false;
        rec.feasibility.lb = false;
        return rec;
    };
    match rate(ch, &d) {
        Ok(r) => {
            rec.wsr_nats = r.wsr;
            rec.ue_rates_bits = r.per_ue.iter().map(|x| x / std::f64::consts::LN_2).collect();
            rec.sum_rate_bps = rec.ue_rates_bits.iter().sum::<f64>() * cfg.channel.bandwidth_hz;
        }
        Err(e) => {
            rec.status = TrialStatus::Failed(format!("rate evaluation: {e}"));
        }
    }
    rec.powers = d.row_powers();
    rec.feasibility = FeasibilityCheck::of(&rec.powers, budget, tol);
    if let Ok(sat) = required_sat_db(&rec.powers, &cfg.pa) {
        if let Ok(rep) = power_report_from_powers(&rec.powers, &cfg.pa, sat, rec.sum_rate_bps) {
            rec.power = Some(PowerFigures {
                p_sat_db: rep.p_sat_db,
                p_pa_w: rep.p_pa,
                p_total_w: rep.p_total,
                energy_eff: rep.energy_eff,
            });
        }
    }
    rec
}

/// `(precoder, budget)` pairs run on every channel, in config order.
pub fn jobs(cfg: &ExperimentConfig, n_tx: usize) -> Vec<(PrecoderKind, PowerBudget)> {
    let mut out = Vec::new();
    for &kind in &cfg.precoders {
        if kind.is_conventional() {
            out.push((kind, cfg.conventional_budget()));
        } else {
            for p in cfg.budget_points() {
                out.push((kind, p.budget(cfg.budget.p_tx, n_tx)));
            }
        }
    }
    out
}

fn run_unit(cfg: &ExperimentConfig, dims: SystemDims, trial: usize) -> Result<Vec<TrialRecord>> {
    let seed = cfg.trial_seed(trial);
    let frames = cfg.weights.frames();
    let channels = (0..frames)
        .map(|f| trial_channel(cfg, dims, frame_seed(seed, f)))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for (kind, budget) in jobs(cfg, dims.n_tx) {
        let mut history: Vec<Vec<f64>> = Vec::new();
        for (f, base) in channels.iter().enumerate() {
            let weights = longterm_weights(&history, dims.n_ue)?;
            let ch = base.clone().with_weights(weights)?;
            let solved = solve(kind, &ch, dims.n_layers, &budget, cfg);
            let rec = make_record(cfg, &ch, dims, trial, f, frame_seed(seed, f), kind, &budget, solved);
            history.push(rec.ue_rates_bits.iter().map(|b| b * std::f64::consts::LN_2).collect());
            out.push(rec);
        }
    }
    Ok(out)
}

/// Runs every `(dims, trial)` pair. Output order is dims, trial, precoder,
/// budget, frame, independent of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let units: Vec<(SystemDims, usize)> = cfg
        .system
        .dims()
        .into_iter()
        .flat_map(|d| (0..cfg.channel.trials).map(move |t| (d, t)))
        .collect();
    let chunks: Vec<Result<Vec<TrialRecord>>> = if cfg.parallel {
        units.par_iter().map(|&(d, t)| run_unit(cfg, d, t)).collect()
    } else {
        units.iter().map(|&(d, t)| run_unit(cfg, d, t)).collect()
    };
    let mut out = Vec::new();
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

/// The relaxed SDR problem a trial would solve, for offline solvers.
pub fn sdr_problem_for_trial(cfg: &ExperimentConfig, dims: SystemDims, trial: usize, point: BudgetPoint) -> Result<SdrProblem> {
    cfg.validate()?;
    let ch = trial_channel(cfg, dims, cfg.trial_seed(trial))?;
    let eff = EffectiveChannel::eigen(&ch, dims.n_layers)?;
    let budget = point.budget(cfg.budget.p_tx, dims.n_tx);
    budget.validate(dims.n_tx)?;
    Ok(SdrProblem::from_effective(&eff, &budget))
}
