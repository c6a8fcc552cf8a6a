//! Thin wrappers over faer's self-adjoint eigensolvers.

use faer::{Mat, Side};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Eigenvalues (ascending) and eigenvectors (columns) of a Hermitian matrix.
/// Only the lower triangle is read.
pub fn eigh(mat: &Mat<C64>) -> Result<(Vec<f64>, Mat<C64>)> {
    let evd = mat
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("hermitian eigendecomposition failed: {e:?}")))?;
    let vals = evd.S().column_vector().iter().map(|v| v.re).collect();
    Ok((vals, evd.U().to_owned()))
}

/// Real symmetric variant of [`eigh`].
pub fn eigh_real(mat: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = mat
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigendecomposition failed: {e:?}")))?;
    let vals = evd.S().column_vector().iter().copied().collect();
    Ok((vals, evd.U().to_owned()))
}

pub fn eigvalsh(mat: &Mat<C64>) -> Result<Vec<f64>> {
    mat.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("hermitian eigenvalues failed: {e:?}")))
}

/// `(A + A^dagger) / 2`.
pub fn hermitian_part(mat: &Mat<C64>) -> Mat<C64> {
    let n = mat.nrows();
    Mat::from_fn(n, n, |i, j| (mat[(i, j)] + mat[(j, i)].conj()) * 0.5)
}

/// Square root of a positive semidefinite matrix; eigenvalues below `floor`
/// are treated as zero.
pub fn sqrt_psd(mat: &Mat<C64>, floor: f64) -> Result<Mat<C64>> {
    let (vals, vecs) = eigh(mat)?;
    let n = mat.nrows();
    let roots: Vec<f64> = vals.iter().map(|&v| if v > floor { v.sqrt() } else { 0.0 }).collect();
    let scaled = Mat::from_fn(n, n, |i, k| vecs[(i, k)] * roots[k]);
    Ok(&scaled * vecs.adjoint())
}
