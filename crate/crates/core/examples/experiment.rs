//! Build a config in code, run it, and print the per-method table and a
//! few CDF quantiles. `flatprec run configs/n32_k8.toml --out DIR` does the
//! same from the command line and also writes the CSV and manifest files.

use flatprec::harness::{run_experiment, summarize, ExperimentConfig};

const CONFIG: &str = r#"
precoders = ["frg_flat_zf", "conv_zf_spc", "flat_wmmse", "conv_wmmse"]

[system]
n_tx = [32]
n_ue = [8]

[budget]
delta_p_db = [0.0, 1.0, 2.0, inf]

[channel]
snr_db = 10.0
trials = 10
base_seed = 100
"#;

fn main() -> flatprec::Result<()> {
    let cfg = ExperimentConfig::from_toml_str(CONFIG)?;
    let records = run_experiment(&cfg)?;
    let bad = records.iter().filter(|r| !r.accounted_for()).count();
    println!("{} records, {bad} not accounted for", records.len());

    let summary = summarize(&records, &cfg.pa)?;
    print!("{}", summary.table());

    println!("\nper-antenna power, 5% / 50% / 95% quantiles (W):");
    for cdf in &summary.power_cdfs {
        let q = |x| cdf.quantile(x).unwrap_or(f64::NAN);
        println!("  {:<28} {:7.3} {:7.3} {:7.3}", cdf.key.label(), q(0.05), q(0.5), q(0.95));
    }
    Ok(())
}
