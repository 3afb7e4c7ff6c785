//! Small dense helpers for the k×k systems that show up everywhere (k is the
//! regressor count, usually 1 to a handful).

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Default reciprocal-condition-number tolerance for k×k solves.
pub const DEFAULT_RCOND: f64 = 1e-12;

/// Eigenvalues in `(-PSD_TOLERANCE, 0)` are treated as rounding noise.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Ratio of the smallest to the largest eigenvalue of a symmetric matrix,
/// or 0 when the largest is not positive.
pub fn rcond_symmetric(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 1 {
        return if a[(0, 0)] > 0.0 { 1.0 } else { 0.0 };
    }
    let eig = SymmetricEigen::new(a.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if max <= 0.0 || !max.is_finite() {
        0.0
    } else {
        (min / max).max(0.0)
    }
}

/// Rejects a centered cross-product matrix that is near singular.
///
/// Besides the eigenvalue ratio, each diagonal entry is compared against
/// `scale`, the matching raw (uncentered) sum of squares, so a column that
/// demeaning annihilated up to rounding is caught even when k = 1.
pub fn check_design(a: &DMatrix<f64>, scale: &[f64], tolerance: f64) -> Result<()> {
    for (j, &s) in scale.iter().enumerate() {
        let d = a[(j, j)];
        if !(d > tolerance * s) || d <= 0.0 {
            let rcond = if s > 0.0 { (d / s).max(0.0) } else { 0.0 };
            return Err(Error::SingularDesign { rcond, tolerance });
        }
    }
    let rcond = rcond_symmetric(a);
    if !(rcond >= tolerance) {
        return Err(Error::SingularDesign { rcond, tolerance });
    }
    Ok(())
}

/// Solves `a x = b` for symmetric positive-definite `a` via Cholesky.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() == 1 {
        return Ok(DVector::from_element(1, b[0] / a[(0, 0)]));
    }
    let chol = a.clone().cholesky().ok_or(Error::SingularDesign {
        rcond: rcond_symmetric(a),
        tolerance: DEFAULT_RCOND,
    })?;
    Ok(chol.solve(b))
}

/// Inverse of a symmetric positive-definite matrix, rejected below `tolerance`.
pub fn spd_inverse(a: &DMatrix<f64>, tolerance: f64) -> Result<DMatrix<f64>> {
    let rcond = rcond_symmetric(a);
    if !(rcond >= tolerance) {
        return Err(Error::SingularDesign { rcond, tolerance });
    }
    if a.nrows() == 1 {
        return Ok(DMatrix::from_element(1, 1, 1.0 / a[(0, 0)]));
    }
    let chol = a.clone().cholesky().ok_or(Error::SingularDesign { rcond, tolerance })?;
    Ok(symmetrize(&chol.inverse()))
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Clamps rounding-level negative eigenvalues to zero; anything below
/// `-PSD_TOLERANCE` (relative to the largest eigenvalue magnitude, with an
/// absolute floor of 1) is an error.
pub fn psd_repair(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let a = symmetrize(a);
    let eig = SymmetricEigen::new(a.clone());
    let scale = eig.eigenvalues.amax().max(1.0);
    let min = eig.eigenvalues.min();
    if min >= 0.0 {
        return Ok(a);
    }
    if min < -PSD_TOLERANCE * scale {
        return Err(Error::NegativeVariance { value: min });
    }
    let clamped = eig.eigenvalues.map(|v| v.max(0.0));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    Ok(symmetrize(&rebuilt))
}
