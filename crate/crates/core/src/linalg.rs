//! Small dense linear algebra helpers on top of nalgebra.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Condition estimates above this are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// 2-norm condition number from the singular values.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `a x = b`, rejecting matrices whose condition estimate exceeds [`MAX_CONDITION`].
pub fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let condition = condition_number(a);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularJacobian { condition });
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or(Error::SingularJacobian { condition })
}

pub fn solve_vec(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let x = solve(a, &DMatrix::from_column_slice(b.len(), 1, b.as_slice()))?;
    Ok(x.column(0).into_owned())
}

pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex<f64>> {
    a.clone().complex_eigenvalues().iter().cloned().collect()
}

/// Unit vector spanning the (numerical) null space of `a`: the right singular
/// vector of the smallest singular value.
pub fn null_vector(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    let svd = a.clone().svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::EigenFailure("svd did not return V".into()))?;
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::EigenFailure("empty matrix".into()))?;
    Ok(v_t.row(idx).transpose().into_owned())
}

/// Left eigenvector of `a` for the real eigenvalue `lambda`, normalized to unit
/// length with the first nonzero component positive.
pub fn left_eigenvector(a: &DMatrix<f64>, lambda: f64) -> Result<DVector<f64>> {
    let n = a.nrows();
    let shifted = a.transpose() - DMatrix::identity(n, n) * lambda;
    let mut w = null_vector(&shifted)?;
    let norm = w.norm();
    if norm == 0.0 {
        return Err(Error::EigenFailure("zero eigenvector".into()));
    }
    w /= norm;
    if let Some(first) = w.iter().find(|v| v.abs() > 1e-12) {
        if *first < 0.0 {
            w = -w;
        }
    }
    Ok(w)
}

pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}
