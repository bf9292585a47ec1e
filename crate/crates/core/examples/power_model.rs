//! PA saturation, efficiency and energy efficiency for flat and uneven
//! per-antenna power profiles.

use flatprec::power::{actual_ub_papc, max_sat_power_db, power_report_from_powers, required_sat_db, PaModel};

fn main() -> flatprec::Result<()> {
    let pa = PaModel::default();
    println!("max saturation at {} GHz: {:.4} dBW", pa.f_c_ghz, max_sat_power_db(pa.f_c_ghz));
    println!("largest per-antenna radiated power: {:.2} W", actual_ub_papc(&pa));

    let rate = 18.27e9;
    let flat = vec![5.0; 32];
    // Same total, but a 2 dB spread between antennas.
    let uneven: Vec<f64> = (0..32).map(|i| if i % 2 == 0 { 6.13 } else { 3.87 }).collect();
    for (name, p) in [("flat", &flat), ("uneven", &uneven)] {
        let sat = required_sat_db(p, &pa)?;
        let r = power_report_from_powers(p, &pa, sat, rate)?;
        println!(
            "{name:>7}: P_sat {:.2} dBW  P_PA {:.1} W  total {:.1} W  EE {:.2} Mbit/J",
            r.p_sat_db,
            r.p_pa,
            r.p_total,
            r.energy_eff / 1e6
        );
    }
    Ok(())
}
