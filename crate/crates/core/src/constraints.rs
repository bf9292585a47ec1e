//! Power budgets, projections onto the sum/per-antenna power sets, and
//! construction of feasible starting precoders.
//!
//! A budget bounds the total radiated power by `P_TX` and each antenna's power to
//! `[P_lb, P_ub]`. The flatness parameter `Δp` generates the pair
//! `P_ub = Δp·P_TX/N`, `P_lb = P_TX/(Δp·N)`; `Δp = +∞` leaves only the sum
//! constraint.

use serde::{Deserialize, Serialize};

use crate::error::{FlatPrecError, Result};
use crate::linalg::cr;
use crate::precoder::Precoder;

/// Relative slack allowed when checking `N·P_lb ≤ P_TX` (rounding of `P_TX/N·N`).
const BUDGET_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    pub p_tx: f64,
    pub p_ub: f64,
    pub p_lb: f64,
    /// Flatness in dB when the bounds came from [`PowerBudget::from_flatness`].
    pub delta_p_db: Option<f64>,
}

impl PowerBudget {
    /// Explicit bounds.
    pub fn new(p_tx: f64, p_ub: f64, p_lb: f64) -> Self {
        Self {
            p_tx,
            p_ub,
            p_lb,
            delta_p_db: None,
        }
    }

    /// Sum-power constraint only.
    pub fn spc_only(p_tx: f64) -> Self {
        Self::new(p_tx, f64::INFINITY, 0.0)
    }

    /// Bounds from a flatness interval `Δp` (dB) around `P_TX/N`.
    pub fn from_flatness(p_tx: f64, n_tx: usize, delta_p_db: f64) -> Self {
        let avg = p_tx / n_tx as f64;
        let (p_ub, p_lb) = if delta_p_db == f64::INFINITY {
            (f64::INFINITY, 0.0)
        } else if delta_p_db == 0.0 {
            (avg, avg)
        } else {
            let dp = 10f64.powf(delta_p_db / 10.0);
            (dp * avg, avg / dp)
        };
        Self {
            p_tx,
            p_ub,
            p_lb,
            delta_p_db: Some(delta_p_db),
        }
    }

    /// Checks `N·P_lb ≤ P_TX` and `P_lb ≤ P_ub`.
    pub fn validate(&self, n_tx: usize) -> Result<()> {
        if !(self.p_tx > 0.0 && self.p_tx.is_finite()) {
            return Err(FlatPrecError::InvalidInput(format!("P_TX must be positive, got {}", self.p_tx)));
        }
        if !(self.p_lb >= 0.0) || self.p_ub.is_nan() {
            return Err(FlatPrecError::InvalidInput(format!(
                "invalid per-antenna bounds [{}, {}]",
                self.p_lb, self.p_ub
            )));
        }
        if self.p_lb > self.p_ub * (1.0 + BUDGET_SLACK) {
            return Err(FlatPrecError::InfeasibleBudget(format!(
                "P_lb = {} exceeds P_ub = {}",
                self.p_lb, self.p_ub
            )));
        }
        if n_tx as f64 * self.p_lb > self.p_tx * (1.0 + BUDGET_SLACK) {
            return Err(FlatPrecError::InfeasibleBudget(format!(
                "N·P_lb = {} exceeds P_TX = {}",
                n_tx as f64 * self.p_lb,
                self.p_tx
            )));
        }
        Ok(())
    }

    pub fn has_lower_bound(&self) -> bool {
        self.p_lb > 0.0
    }
}

/// Clips each power into `[P_lb, P_ub]`.
pub fn project_papc(p: &[f64], b: &PowerBudget) -> Vec<f64> {
    p.iter().map(|&x| x.min(b.p_ub).max(b.p_lb)).collect()
}

/// Euclidean projection onto `{1ᵀp ≤ P_TX}`: a uniform downward shift.
/// Entries may become negative for extreme inputs.
pub fn project_spc(p: &[f64], p_tx: f64) -> Vec<f64> {
    let n = p.len() as f64;
    let excess = ((p.iter().sum::<f64>() - p_tx) / n).max(0.0);
    p.iter().map(|&x| x - excess).collect()
}

/// Exact Euclidean projection onto the intersection of the box and the sum
/// constraint: `clamp(p − t, P_lb, P_ub)` with the smallest `t ≥ 0` meeting the
/// sum, found by bisection.
pub fn project_box_sum(p: &[f64], b: &PowerBudget) -> Vec<f64> {
    let clipped = project_papc(p, b);
    if clipped.iter().sum::<f64>() <= b.p_tx {
        return clipped;
    }
    let sum_at = |t: f64| -> f64 { p.iter().map(|&x| (x - t).min(b.p_ub).max(b.p_lb)).sum() };
    let mut lo = 0.0;
    let mut hi = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - b.p_lb;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sum_at(mid) > b.p_tx {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    p.iter().map(|&x| (x - hi).min(b.p_ub).max(b.p_lb)).collect()
}

/// Largest violation of the box and sum constraints (0 when feasible).
pub fn max_violation(p: &[f64], b: &PowerBudget) -> f64 {
    let sum = p.iter().sum::<f64>();
    p.iter()
        .map(|&x| (x - b.p_ub).max(b.p_lb - x).max(0.0))
        .fold((sum - b.p_tx).max(0.0), f64::max)
}

/// Finalizes a power vector to exact feasibility: clip to the box, and if the
/// sum is still too large, mix with the all-`P_lb` vector so the sum equals `P_TX`.
pub fn finalize_power(p: &[f64], b: &PowerBudget) -> Vec<f64> {
    let clipped = project_papc(p, b);
    let sum: f64 = clipped.iter().sum();
    if sum <= b.p_tx {
        return clipped;
    }
    let n = p.len() as f64;
    let floor_total = n * b.p_lb;
    let denom = sum - floor_total;
    if denom <= f64::EPSILON * sum {
        // Every entry already sits at the lower bound.
        return vec![b.p_lb; p.len()];
    }
    let c1 = (b.p_tx - floor_total) / denom;
    let c2 = (sum - b.p_tx) / denom;
    clipped.iter().map(|&x| c1 * x + c2 * b.p_lb).collect()
}

/// Feasible power vector close to `p_init`.
///
/// Runs Dykstra's alternating projections between the per-antenna box and the
/// sum half-space, stopping once both projections agree within `tol`, or
/// after `max_iters`. [`finalize_power`] then
/// makes the result exactly feasible.
pub fn feasible_power(p_init: &[f64], b: &PowerBudget, max_iters: usize, tol: f64) -> Result<Vec<f64>> {
    b.validate(p_init.len())?;
    let n = p_init.len();
    let mut x = p_init.to_vec();
    let mut inc_box = vec![0.0; n];
    let mut inc_sum = vec![0.0; n];
    if max_violation(&x, b) == 0.0 {
        return Ok(x);
    }
    for _ in 0..max_iters {
        let shifted: Vec<f64> = x.iter().zip(&inc_box).map(|(a, q)| a + q).collect();
        let y = project_papc(&shifted, b);
        for i in 0..n {
            inc_box[i] = shifted[i] - y[i];
        }
        let shifted: Vec<f64> = y.iter().zip(&inc_sum).map(|(a, q)| a + q).collect();
        x = project_spc(&shifted, b.p_tx);
        for i in 0..n {
            inc_sum[i] = shifted[i] - x[i];
        }
        // The two projections agree only near the limit point; `x` alone can
        // stall while the correction terms are still moving.
        let gap = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if gap <= tol && max_violation(&x, b) <= tol {
            break;
        }
    }
    Ok(finalize_power(&x, b))
}

/// Scales row `n` of `d_init` by `sqrt(p_target[n] / ‖row n‖²)`.
///
/// A zero row with a positive target cannot be scaled; callers should seed such
/// rows with any unit-norm vector first.
pub fn rescale_rows(d_init: &Precoder, p_target: &[f64]) -> Result<Precoder> {
    if p_target.len() != d_init.n_tx() {
        return Err(FlatPrecError::DimensionMismatch(format!(
            "{} target powers for {} rows",
            p_target.len(),
            d_init.n_tx()
        )));
    }
    let current = d_init.row_powers();
    let mut d = d_init.clone();
    for (n, (&cur, &target)) in current.iter().zip(p_target).enumerate() {
        if target < 0.0 || !target.is_finite() {
            return Err(FlatPrecError::InvalidInput(format!("bad target power {target} at row {n}")));
        }
        if cur == 0.0 {
            if target > 0.0 {
                return Err(FlatPrecError::ZeroRow { row: n });
            }
            continue;
        }
        let s = (target / cur).sqrt();
        d.d.row_mut(n).iter_mut().for_each(|z| *z *= cr(s));
    }
    Ok(d)
}

/// Moves the row powers of `d_init` to a feasible vector with
/// [`feasible_power`] and rescales the rows to match. Zero rows that need
/// power are seeded with a flat unit-norm row.
pub fn feasible_precoder(d_init: &Precoder, b: &PowerBudget, max_iters: usize, tol: f64) -> Result<Precoder> {
    let p = feasible_power(&d_init.row_powers(), b, max_iters, tol)?;
    let mut d = d_init.clone();
    let seed = cr(1.0 / (d.d.ncols() as f64).sqrt());
    for (n, &target) in p.iter().enumerate() {
        if target > 0.0 && d.d.row(n).iter().all(|z| z.norm_sqr() == 0.0) {
            d.d.row_mut(n).fill(seed);
        }
    }
    rescale_rows(&d, &p)
}

/// Outcome of an independent feasibility recheck on per-antenna powers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityCheck {
    pub spc: bool,
    pub ub: bool,
    pub lb: bool,
    pub sum_excess: f64,
    pub max_ub_excess: f64,
    pub max_lb_deficit: f64,
}

impl FeasibilityCheck {
    /// `rel_tol` is relative to `P_TX` for the sum and to the bound for per-antenna checks.
    pub fn of(p: &[f64], b: &PowerBudget, rel_tol: f64) -> Self {
        let sum_excess = p.iter().sum::<f64>() - b.p_tx;
        let max_ub_excess = p.iter().map(|x| x - b.p_ub).fold(f64::NEG_INFINITY, f64::max);
        let max_lb_deficit = p.iter().map(|x| b.p_lb - x).fold(f64::NEG_INFINITY, f64::max);
        Self {
            spc: sum_excess <= rel_tol * b.p_tx,
            ub: max_ub_excess <= rel_tol * b.p_ub,
            lb: max_lb_deficit <= rel_tol * b.p_lb,
            sum_excess,
            max_ub_excess,
            max_lb_deficit,
        }
    }

    pub fn all(&self) -> bool {
        self.spc && self.ub && self.lb
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, CMat};
    use proptest::prelude::*;

    #[test]
    fn papc_clip() {
        let b = PowerBudget::new(100.0, 2.5, 1.5);
        assert_eq!(project_papc(&[1.0, 2.0, 3.0], &b), vec![1.5, 2.0, 2.5]);
        assert_eq!(project_papc(&[1.6, 2.4], &b), vec![1.6, 2.4]);
        let flat = PowerBudget::new(100.0, 3.0, 3.0);
        assert_eq!(project_papc(&[0.0, 9.0], &flat), vec![3.0, 3.0]);
    }

    #[test]
    fn spc_shift() {
        assert_eq!(project_spc(&[1.0, 1.0], 4.0), vec![1.0, 1.0]);
        assert_eq!(project_spc(&[2.0, 2.0, 2.0, 2.0], 4.0), vec![1.0, 1.0, 1.0, 1.0]);
        assert_eq!(project_spc(&[3.0, 1.0], 2.0), vec![2.0, 0.0]);
    }

    #[test]
    fn feasible_input_untouched() {
        let b = PowerBudget::from_flatness(8.0, 4, 3.0);
        let p = vec![2.0, 1.5, 2.5, 1.9];
        assert_eq!(feasible_power(&p, &b, 200, 1e-10).unwrap(), p);
    }

    #[test]
    fn unique_feasible_point() {
        let b = PowerBudget::new(2.0, 1.0, 1.0);
        let p = feasible_power(&[3.0, 0.1], &b, 200, 1e-10).unwrap();
        assert_eq!(p, vec![1.0, 1.0]);
    }

    #[test]
    fn infeasible_budget_rejected() {
        let b = PowerBudget::new(2.0, 5.0, 1.0);
        assert!(matches!(
            feasible_power(&[1.0, 1.0, 1.0], &b, 10, 1e-10),
            Err(FlatPrecError::InfeasibleBudget(_))
        ));
        let inverted = PowerBudget::new(10.0, 1.0, 2.0);
        assert!(inverted.validate(2).is_err());
    }

    #[test]
    fn finalize_hits_sum_exactly() {
        let b = PowerBudget::new(10.0, 4.0, 1.0);
        let p = finalize_power(&[4.0, 4.0, 3.5, 0.2], &b);
        let sum: f64 = p.iter().sum();
        assert!((sum - 10.0).abs() <= 1e-12 * 10.0);
        assert!(p.iter().all(|&x| (1.0..=4.0).contains(&x)));
    }

    #[test]
    fn rescale_rows_hits_targets() {
        let d = Precoder::new(
            CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 1.0), c(0.5, 0.5), c(-1.0, 0.2)]),
            1,
        )
        .unwrap();
        assert_eq!(rescale_rows(&d, &d.row_powers()).unwrap().d, d.d);
        let out = rescale_rows(&d, &[8.0, 0.3]).unwrap();
        let pw = out.row_powers();
        assert!((pw[0] - 8.0).abs() < 1e-12 && (pw[1] - 0.3).abs() < 1e-12);
        // Single row scaled to four times its power is doubled.
        let single = Precoder::new(CMat::from_row_slice(1, 2, &[c(1.0, 2.0), c(0.0, -1.0)]), 1).unwrap();
        let quad = rescale_rows(&single, &[4.0 * single.total_power()]).unwrap();
        assert!((quad.d.clone() - single.d.clone() * cr(2.0)).norm() < 1e-12);
    }

    #[test]
    fn rescale_zero_row_errors() {
        let d = Precoder::new(CMat::zeros(2, 1), 1).unwrap();
        assert!(matches!(rescale_rows(&d, &[1.0, 0.0]), Err(FlatPrecError::ZeroRow { row: 0 })));
    }

    #[test]
    fn flatness_bounds() {
        let b = PowerBudget::from_flatness(160.0, 32, 0.0);
        assert_eq!((b.p_ub, b.p_lb), (5.0, 5.0));
        let b = PowerBudget::from_flatness(160.0, 32, 3.0);
        assert!((b.p_ub - 9.976).abs() < 1e-3 && (b.p_lb - 2.506).abs() < 1e-3);
        let b = PowerBudget::from_flatness(160.0, 32, f64::INFINITY);
        assert_eq!((b.p_ub, b.p_lb), (f64::INFINITY, 0.0));
    }

    fn budget_strategy() -> impl Strategy<Value = (PowerBudget, Vec<f64>)> {
        (2usize..24, 0.1f64..500.0, prop_oneof![Just(0.0), 0.05f64..6.0, Just(f64::INFINITY)]).prop_flat_map(
            |(n, p_tx, dp)| {
                let b = PowerBudget::from_flatness(p_tx, n, dp);
                (Just(b), proptest::collection::vec(0.0f64..(4.0 * p_tx / n as f64), n))
            },
        )
    }

    proptest! {
        #[test]
        fn feasible_power_output_is_feasible((b, p) in budget_strategy()) {
            let tol = 1e-10;
            let out = feasible_power(&p, &b, 200, tol).unwrap();
            let sum: f64 = out.iter().sum();
            prop_assert!(sum <= b.p_tx * (1.0 + 1e-12) + tol);
            for &x in &out {
                prop_assert!(x >= b.p_lb - tol && x <= b.p_ub + tol);
            }
        }

        #[test]
        fn projections_are_idempotent((b, p) in budget_strategy()) {
            let once = project_papc(&p, &b);
            prop_assert_eq!(project_papc(&once, &b), once);
            let s = project_spc(&p, b.p_tx);
            let ss = project_spc(&s, b.p_tx);
            for (x, y) in s.iter().zip(&ss) {
                prop_assert!((x - y).abs() <= 1e-12 * b.p_tx);
            }
        }

        #[test]
        fn dykstra_matches_exact_projection((b, p) in budget_strategy()) {
            // Exact shift-and-clip projection is an independent route to the same point.
            let exact = project_box_sum(&p, &b);
            let dyk = feasible_power(&p, &b, 20_000, 1e-13).unwrap();
            let scale = b.p_tx / p.len() as f64;
            for (x, y) in exact.iter().zip(&dyk) {
                prop_assert!((x - y).abs() <= 1e-6 * scale, "{x} vs {y}");
            }
        }
    }
}
