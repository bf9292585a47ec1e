//! Relaxed flat ZF as an upper bound on FRG, rank-one extraction, and the
//! text export of the relaxed problem for external SDP solvers.

use flatprec::channel::{gen_rayleigh, EffectiveChannel, SystemDims};
use flatprec::constraints::PowerBudget;
use flatprec::zf::frg::{frg_flat_zf_wf, FrgOptions};
use flatprec::zf::layer_wsr;
use flatprec::zf::sdr::{sdr_flat_zf, SdrOptions, SdrProblem};

fn main() -> flatprec::Result<()> {
    let dims = SystemDims::new(12, 3, 1, 1)?;
    let ch = gen_rayleigh(dims, 10.0 / 40.0, 5)?;
    let eff = EffectiveChannel::eigen(&ch, 1)?;
    let b = PowerBudget::from_flatness(40.0, dims.n_tx, 1.0);

    let frg = frg_flat_zf_wf(&eff, &b, &FrgOptions::default())?;
    let t = std::time::Instant::now();
    let sdr = sdr_flat_zf(&eff, &b, &SdrOptions::default())?;
    let dt = t.elapsed();
    let diag = &sdr.diagnostics;
    println!("FRG WSR            {:.6}", layer_wsr(&eff, &frg.d.d));
    println!("relaxed objective  {:.6}  (upper bound)", diag.objective);
    println!("extracted WSR      {:.6}", sdr.wsr);
    println!("rank ratios        {:?}", diag.rank_ratio.iter().map(|r| format!("{r:.6}")).collect::<Vec<_>>());
    println!("ADMM iterations    {} (converged {}) in {dt:.2?}", diag.iterations, diag.converged);
    println!("max leakage        {:.2e}", sdr.leakage.iter().cloned().fold(0.0, f64::max));

    let problem = SdrProblem::from_effective(&eff, &b);
    let mut text = Vec::new();
    problem.write(&mut text)?;
    let back = SdrProblem::read(text.as_slice())?;
    assert_eq!(back.h_tilde.shape(), problem.h_tilde.shape());
    println!("export: {} bytes, header {:?}", text.len(), String::from_utf8_lossy(&text).lines().next().unwrap_or(""));
    Ok(())
}
