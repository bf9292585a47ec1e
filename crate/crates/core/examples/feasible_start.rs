//! Turn an arbitrary precoder into one that meets the sum and per-antenna
//! bounds, by alternating projections on the row powers and rescaling rows.

use flatprec::constraints::{feasible_precoder, max_violation, FeasibilityCheck, PowerBudget};
use flatprec::linalg::c;
use flatprec::linalg::CMat;
use flatprec::precoder::Precoder;

fn main() -> flatprec::Result<()> {
    let n = 8;
    // Power piled on the first two antennas, one antenna silent.
    let d = CMat::from_fn(n, 2, |i, j| match i {
        0 | 1 => c(4.0, j as f64),
        5 => c(0.0, 0.0),
        _ => c(0.3, -0.1 * i as f64),
    });
    let d = Precoder::new(d, 1)?;
    for dp in [0.0, 1.0, 3.0] {
        let b = PowerBudget::from_flatness(16.0, n, dp);
        let fixed = feasible_precoder(&d, &b, 200, 1e-10)?;
        let p = fixed.row_powers();
        println!(
            "dp={dp} dB  before: violation {:.3}  after: {:.1e}  powers [{:.3}..{:.3}]  recheck {}",
            max_violation(&d.row_powers(), &b),
            max_violation(&p, &b),
            p.iter().cloned().fold(f64::INFINITY, f64::min),
            p.iter().cloned().fold(0.0, f64::max),
            FeasibilityCheck::of(&p, &b, 1e-9).all()
        );
    }
    Ok(())
}
