//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Replace `a` with `(a + aᵀ) / 2`.
pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

pub fn symmetrized(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = a.clone();
    symmetrize(&mut out);
    out
}

/// Smallest and largest eigenvalue of the symmetric part of `a`.
pub fn eigen_extremes(a: &DMatrix<f64>) -> (f64, f64) {
    let eig = symmetrized(a).symmetric_eigen();
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

pub fn lambda_min(a: &DMatrix<f64>) -> f64 {
    eigen_extremes(a).0
}

pub fn lambda_max(a: &DMatrix<f64>) -> f64 {
    eigen_extremes(a).1
}

/// Inverse of a symmetric positive-definite matrix through its Cholesky factor.
pub fn spd_inverse(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let chol = symmetrized(a)
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))?;
    let mut inv = chol.inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

/// Check symmetry (relative tolerance 1e-12) and positive semi-definiteness
/// (eigenvalues >= -1e-10).
pub fn check_symmetric_psd(field: &str, a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::field(
            field,
            format!("expected a square matrix, got {}x{}", a.nrows(), a.ncols()),
        ));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::field(field, "non-finite entry"));
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let asym = (a - a.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::field(
            field,
            format!("not symmetric (max asymmetry {asym:e})"),
        ));
    }
    let lo = lambda_min(a);
    if lo < -1e-10 {
        return Err(Error::field(
            field,
            format!("not positive semi-definite (min eigenvalue {lo:e})"),
        ));
    }
    Ok(())
}

/// A factor `L` with `L Lᵀ = a` for a symmetric PSD matrix, used to draw
/// correlated Gaussian vectors. Falls back to the eigen square root when the
/// Cholesky factorization fails (singular but PSD input).
pub fn psd_factor(a: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = symmetrized(a);
    if let Some(chol) = sym.clone().cholesky() {
        return chol.l();
    }
    let eig = sym.symmetric_eigen();
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals)
}

/// Returns `Some(c)` when `a == c * I` exactly.
pub fn as_scaled_identity(a: &DMatrix<f64>) -> Option<f64> {
    if !a.is_square() || a.nrows() == 0 {
        return None;
    }
    let c = a[(0, 0)];
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let expect = if i == j { c } else { 0.0 };
            if a[(i, j)] != expect {
                return None;
            }
        }
    }
    Some(c)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out = a * x` for a dense column-major `a`.
#[inline]
pub fn matvec_into(a: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    let m = a.nrows();
    debug_assert_eq!(a.ncols(), x.len());
    debug_assert_eq!(out.len(), m);
    out.fill(0.0);
    let data = a.as_slice();
    for (c, &xc) in x.iter().enumerate() {
        if xc == 0.0 {
            continue;
        }
        let col = &data[c * m..(c + 1) * m];
        for (o, &v) in out.iter_mut().zip(col) {
            *o += v * xc;
        }
    }
}

pub fn to_rows(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..a.nrows())
        .map(|i| a.row(i).iter().copied().collect())
        .collect()
}

pub fn from_rows(field: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(Error::field(
            field,
            format!("row {i} has {} entries, expected {ncols}", r.len()),
        ));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn trace(a: &DMatrix<f64>) -> f64 {
    a.diagonal().sum()
}

pub fn vector_from(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psd_check_rejects_asymmetric_and_indefinite() {
        let ok = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!(check_symmetric_psd("Q", &ok).is_ok());
        let asym = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.9, 2.0]);
        assert!(check_symmetric_psd("Q", &asym).is_err());
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let err = check_symmetric_psd("Sigma_x", &indef).unwrap_err();
        assert!(err.to_string().contains("Sigma_x"));
    }

    #[test]
    fn factor_reproduces_singular_psd() {
        let v = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        let a = &v * v.transpose();
        let l = psd_factor(&a);
        assert!((&l * l.transpose() - &a).amax() < 1e-12);
    }

    #[test]
    fn matvec_matches_nalgebra() {
        let a = DMatrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64 - 5.0);
        let x = [0.5, -1.0, 2.0, 0.0];
        let mut out = [0.0; 3];
        matvec_into(&a, &x, &mut out);
        let expect = &a * DVector::from_column_slice(&x);
        for i in 0..3 {
            assert_eq!(out[i], expect[i]);
        }
    }
}
