use crate::error::{FlatPrecError, Result};
use crate::linalg::{row_norms_sq, CMat};

/// Linear precoder `D = [D_1, …, D_K]` of shape `N × KL`.
///
/// Row `n` carries the signal of antenna `n`; its squared norm is the average
/// radiated power of that antenna. Columns `kL..(k+1)L` form the block of UE `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    pub d: CMat,
    pub n_layers: usize,
}

impl Precoder {
    pub fn new(d: CMat, n_layers: usize) -> Result<Self> {
        if n_layers == 0 || d.ncols() % n_layers != 0 {
            return Err(FlatPrecError::DimensionMismatch(format!(
                "precoder has {} columns, not a multiple of {} layers",
                d.ncols(),
                n_layers
            )));
        }
        if d.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(FlatPrecError::InvalidInput("precoder has non-finite entries".into()));
        }
        Ok(Self { d, n_layers })
    }

    pub fn zeros(n_tx: usize, n_ue: usize, n_layers: usize) -> Self {
        Self {
            d: CMat::zeros(n_tx, n_ue * n_layers),
            n_layers,
        }
    }

    pub fn n_tx(&self) -> usize {
        self.d.nrows()
    }

    pub fn n_ue(&self) -> usize {
        self.d.ncols() / self.n_layers
    }

    /// Block `D_k` (`N × L`).
    pub fn block(&self, k: usize) -> CMat {
        self.d
            .columns(k * self.n_layers, self.n_layers)
            .into_owned()
    }

    /// Per-antenna powers `diag(D Dᴴ)`.
    pub fn row_powers(&self) -> Vec<f64> {
        row_norms_sq(&self.d)
    }

    pub fn total_power(&self) -> f64 {
        self.row_powers().iter().sum()
    }
}
