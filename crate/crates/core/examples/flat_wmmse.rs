//! Flat WMMSE over a sweep of flatness targets, with its iteration trace.

use flatprec::channel::{gen_rayleigh, SystemDims};
use flatprec::constraints::PowerBudget;
use flatprec::wmmse::{flat_wmmse, WmmseOptions};

fn main() -> flatprec::Result<()> {
    let dims = SystemDims::new(16, 4, 2, 2)?;
    let ch = gen_rayleigh(dims, 10.0 / 160.0, 3)?;
    let opts = WmmseOptions::default();
    let mut last = None;
    for dp in [0.0, 1.0, 2.0, 3.0, f64::INFINITY] {
        let b = PowerBudget::from_flatness(160.0, dims.n_tx, dp);
        let out = flat_wmmse(&ch, &b, dims.n_layers, None, &opts)?;
        let p = out.precoder.row_powers();
        println!(
            "dp={dp:>4} dB  WSR {:.4} nats  iters {:>3}  antenna power {:.2}..{:.2} W",
            out.rates.wsr,
            out.iterations,
            p.iter().cloned().fold(f64::INFINITY, f64::min),
            p.iter().cloned().fold(0.0, f64::max)
        );
        last = Some(out);
    }
    // The trace is CSV: iteration, WSR, worst row-power violation.
    let trace = last.unwrap().trace_csv();
    for line in trace.lines().take(5) {
        println!("  {line}");
    }
    Ok(())
}
