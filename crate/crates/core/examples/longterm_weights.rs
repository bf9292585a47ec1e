//! Two UEs with a 10 dB gap in channel gain. Equal weights let the strong UE
//! take most of the rate; inverse-average-rate weights pull the two closer.

use flatprec::harness::{longterm_weights, run_experiment, ExperimentConfig};

const CONFIG: &str = r#"
precoders = ["flat_wmmse"]
[system]
n_tx = [4]
n_ue = [2]
[budget]
delta_p_db = [1.0]
[channel]
snr_db = 0.0
ue_gains_db = [0.0, -10.0]
trials = 1
[weights]
mode = "longterm"
frames = 30
"#;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn gap(records: &[flatprec::harness::TrialRecord]) -> f64 {
    let r0 = records.iter().map(|r| r.ue_rates_bits[0]).collect();
    let r1 = records.iter().map(|r| r.ue_rates_bits[1]).collect();
    median(r0) - median(r1)
}

fn main() -> flatprec::Result<()> {
    println!("weights for averages (3.0, 1.0): {:?}", longterm_weights(&[vec![3.0, 1.0]], 2)?);

    let cfg = ExperimentConfig::from_toml_str(CONFIG)?;
    let adaptive = run_experiment(&cfg)?;
    // Same channel draws with the weights pinned to 1.
    let mut equal = Vec::new();
    for f in 0..30 {
        let seed = flatprec::harness::run::frame_seed(cfg.trial_seed(0), f);
        let ch = flatprec::harness::run::trial_channel(&cfg, cfg.system.dims()[0], seed)?;
        let b = cfg.budget_points()[0].budget(cfg.budget.p_tx, 4);
        let out = flatprec::wmmse::flat_wmmse(&ch, &b, 1, None, &cfg.solvers.wmmse)?;
        equal.push(out.rates.per_ue.iter().map(|r| r / std::f64::consts::LN_2).collect::<Vec<_>>());
    }
    let eq_gap = median(equal.iter().map(|r| r[0]).collect()) - median(equal.iter().map(|r| r[1]).collect());
    println!("median rate gap, equal weights:     {eq_gap:.3} bit/s/Hz");
    println!("median rate gap, long-term weights: {:.3} bit/s/Hz", gap(&adaptive));
    println!("final weights: {:?}", adaptive.last().map(|r| &r.weights));
    Ok(())
}
