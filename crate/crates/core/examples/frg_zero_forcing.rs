//! Fixed-relative-gain flat ZF: water-filling profile, dual iterations, and
//! the report it gives when no ZF precoder can meet the lower bound.

use flatprec::channel::{gen_rayleigh, EffectiveChannel, SystemDims};
use flatprec::constraints::PowerBudget;
use flatprec::linalg::{c, cr, CMat};
use flatprec::zf::frg::{frg_flat_zf_wf, gain_profile, frg_flat_zf, wf_zf_spc, FrgOptions};
use flatprec::zf::{layer_wsr, leakage};
use flatprec::FlatPrecError;

fn main() -> flatprec::Result<()> {
    let dims = SystemDims::new(32, 8, 1, 1)?;
    let ch = gen_rayleigh(dims, 10.0 / 160.0, 11)?;
    let eff = EffectiveChannel::eigen(&ch, 1)?;

    let (wf, profile) = wf_zf_spc(&eff, 160.0)?;
    println!("water-filling ZF: WSR {:.4} nats, water level {:?}", layer_wsr(&eff, &wf.d), profile.water_level);

    for dp in [0.0, 1.0, 2.0] {
        let b = PowerBudget::from_flatness(160.0, 32, dp);
        let s = frg_flat_zf_wf(&eff, &b, &FrgOptions::default())?;
        let worst_leak = leakage(&eff, &s.d.d).into_iter().fold(0.0, f64::max);
        println!(
            "dp={dp} dB  WSR {:.4}  beta {:.4e}  |1-nu| {:.1e}  iters {:>3}  leakage {worst_leak:.1e}",
            layer_wsr(&eff, &s.d.d),
            s.beta,
            (1.0 - s.nu).abs(),
            s.iterations
        );
    }

    // Two UEs that both see antenna 0 strongly and the rest only weakly:
    // every ZF precoder must load antenna 0 or starve the others.
    let (n, xi) = (16, 1e-3);
    let mut h = CMat::zeros(2, n);
    h[(0, 0)] = cr(1.0);
    h[(1, 0)] = cr(1.0);
    h[(0, 1)] = cr(xi);
    h[(1, 2)] = cr(xi);
    for j in 3..n {
        h[(0, j)] = cr(xi * 0.5);
        h[(1, j)] = c(0.0, xi * 0.5);
    }
    let eff = EffectiveChannel {
        h_tilde: h,
        combiners: vec![CMat::identity(1, 1); 2],
        layer_weights: vec![1.0; 2],
        noise_var: 1.0,
        n_layers: 1,
    };
    let b = PowerBudget::from_flatness(16.0, n, 0.0);
    let opts = FrgOptions { i_max: 100, ..Default::default() };
    match frg_flat_zf(&eff, &gain_profile(&[1.0, 1.0])?, &b, &opts) {
        Err(FlatPrecError::NoFeasiblePoint { max_lb_violation, rho, best }) => println!(
            "adversarial channel: no feasible point (lb short by {max_lb_violation:.3e} W, rho {rho:.3e}); best iterate beta {:.3e}",
            best.beta
        ),
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}
