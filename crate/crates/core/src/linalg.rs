//! Small complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{FlatPrecError, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    Complex64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    Complex64::new(re, 0.0)
}

/// `(M + Mᴴ) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * cr(0.5)
}

pub fn fro_norm_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Squared Euclidean norms of the rows of `m`.
pub fn row_norms_sq(m: &CMat) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|z| z.norm_sqr()).sum())
        .collect()
}

/// Inverse of a Hermitian positive-definite matrix via Cholesky.
pub fn hpd_inverse(m: &CMat) -> Result<CMat> {
    hermitian_part(m)
        .cholesky()
        .map(|ch| ch.inverse())
        .ok_or_else(|| FlatPrecError::NumericalBreakdown("matrix is not positive definite".into()))
}

/// `log|M|` for Hermitian positive-definite `M` (natural log).
pub fn logdet_hpd(m: &CMat) -> Result<f64> {
    let ch = hermitian_part(m)
        .cholesky()
        .ok_or_else(|| FlatPrecError::NumericalBreakdown("matrix is not positive definite".into()))?;
    Ok(ch.l_dirty().diagonal().iter().map(|d| 2.0 * d.re.ln()).sum())
}

/// General (non-Hermitian) inverse through LU.
pub fn inverse(m: &CMat) -> Result<CMat> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| FlatPrecError::NumericalBreakdown("singular matrix".into()))
}

/// Hermitian eigendecomposition with eigenvalues sorted in descending order.
/// Column `i` of the returned matrix pairs with eigenvalue `i`.
pub fn herm_eig_desc(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = hermitian_part(m).symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(m.nrows(), n);
    for (j, &i) in idx.iter().enumerate() {
        vecs.set_column(j, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Rotate each column so its largest-magnitude entry is real and positive.
pub fn fix_column_phases(m: &mut CMat) {
    for mut col in m.column_iter_mut() {
        let mut best = cr(0.0);
        for z in col.iter() {
            if z.norm() > best.norm() {
                best = *z;
            }
        }
        if best.norm() > 0.0 {
            let rot = best.conj() / best.norm();
            for z in col.iter_mut() {
                *z *= rot;
            }
        }
    }
}

/// Euclidean projection of a Hermitian matrix onto the PSD cone.
pub fn project_psd(m: &CMat) -> CMat {
    let eig = hermitian_part(m).symmetric_eigen();
    let mut out = CMat::zeros(m.nrows(), m.ncols());
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > 0.0 {
            let v = eig.eigenvectors.column(i);
            out += v * v.adjoint() * cr(lam);
        }
    }
    out
}

/// Orthonormal basis of the orthogonal complement of the row space of `rows`
/// (an `r × n` matrix of full row rank). Returned as an `n × (n - r)` matrix.
pub fn row_space_complement(rows: &CMat) -> Result<CMat> {
    let n = rows.ncols();
    let r = rows.nrows();
    if r == 0 {
        return Ok(CMat::identity(n, n));
    }
    // P = I - Rᴴ (R Rᴴ)⁻¹ R projects onto the complement; its eigenvectors with
    // unit eigenvalue span it.
    let gram = rows * rows.adjoint();
    let gram_inv = hpd_inverse(&gram)
        .map_err(|_| FlatPrecError::RankDeficient("rows are linearly dependent".into()))?;
    let proj = CMat::identity(n, n) - rows.adjoint() * gram_inv * rows;
    let (vals, vecs) = herm_eig_desc(&proj);
    let dim = n - r;
    if dim > 0 && vals[dim - 1] < 0.5 {
        return Err(FlatPrecError::RankDeficient(
            "null-space dimension lower than expected".into(),
        ));
    }
    Ok(vecs.columns(0, dim).into_owned())
}

pub fn real_trace(m: &CMat) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Real inner product `Re Tr(Aᴴ B)`.
pub fn inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize) -> CMat {
        CMat::from_fn(n, n, |i, j| c((i * 3 + j) as f64 % 5.0 - 2.0, (i + 2 * j) as f64 % 3.0 - 1.0))
    }

    #[test]
    fn logdet_matches_eigenvalues() {
        let a = sample(4);
        let m = &a * a.adjoint() + CMat::identity(4, 4);
        let (vals, _) = herm_eig_desc(&m);
        let expected: f64 = vals.iter().map(|v| v.ln()).sum();
        assert!((logdet_hpd(&m).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn psd_projection_is_idempotent() {
        let a = hermitian_part(&sample(5));
        let p = project_psd(&a);
        let pp = project_psd(&p);
        assert!(fro_norm_sq(&(p - pp)) < 1e-20);
    }

    #[test]
    fn phase_convention() {
        let mut m = CMat::from_column_slice(2, 1, &[c(0.0, 1.0), c(0.1, 0.0)]);
        fix_column_phases(&mut m);
        assert!((m[(0, 0)] - cr(1.0)).norm() < 1e-15);
    }

    #[test]
    fn complement_is_orthogonal() {
        let rows = CMat::from_fn(2, 5, |i, j| c((i + j) as f64, (i * j * j) as f64 - 1.0));
        let b = row_space_complement(&rows).unwrap();
        assert_eq!(b.ncols(), 3);
        assert!(fro_norm_sq(&(&rows * &b)) < 1e-20);
        assert!(fro_norm_sq(&(b.adjoint() * &b - CMat::identity(3, 3))) < 1e-20);
    }
}
