//! Thin wrappers over the dense eigensolvers plus the handful of vector
//! kernels the iterative solvers need.

use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Eigenvalues (ascending) and orthonormal eigenvectors of a real symmetric
/// matrix. Only the lower triangle is read.
pub fn eigh(a: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::LinAlg(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let values = (0..a.nrows()).map(|i| s[i]).collect();
    Ok((values, evd.U().to_owned()))
}

/// [`eigh`] after checking that the full matrix is symmetric to working
/// precision.
pub fn eigh_symmetric(a: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    if a.nrows() != a.ncols() {
        return Err(Error::Construction(format!("matrix is {}x{}", a.nrows(), a.ncols())));
    }
    let scale = (0..a.ncols())
        .flat_map(|j| (0..a.nrows()).map(move |i| (i, j)))
        .fold(0.0f64, |m, (i, j)| m.max(a[(i, j)].abs()));
    let asym = max_asymmetry(a);
    if asym > 1e-12 * (1.0 + scale) {
        return Err(Error::Construction(format!("matrix is not symmetric (max |A - A^T| = {asym:e})")));
    }
    eigh(a)
}

pub fn eigvalsh(a: &Mat<f64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::LinAlg(format!("{e:?}")))
}

/// Eigen-decomposition of a complex Hermitian matrix.
pub fn eigh_complex(a: &Mat<C64>) -> Result<(Vec<f64>, Mat<C64>)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::LinAlg(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let values = (0..a.nrows()).map(|i| s[i].re).collect();
    Ok((values, evd.U().to_owned()))
}

pub fn eigvalsh_complex(a: &Mat<C64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::LinAlg(format!("{e:?}")))
}

pub fn max_asymmetry(a: &Mat<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in j + 1..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `<a|b>` with the first argument conjugated.
#[inline]
pub fn cdot(a: &[C64], b: &[C64]) -> C64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    C64::new(re, im)
}

#[inline]
pub fn cnorm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[inline]
pub fn caxpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn to_complex(x: &[f64]) -> Vec<C64> {
    x.iter().map(|&v| C64::new(v, 0.0)).collect()
}

/// Column `j` of a column-major matrix as a slice.
pub fn col(m: &Mat<f64>, j: usize) -> &[f64] {
    m.col(j).try_as_col_major().expect("contiguous column").as_slice()
}

pub fn col_c(m: &Mat<C64>, j: usize) -> &[C64] {
    m.col(j).try_as_col_major().expect("contiguous column").as_slice()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_of_small_symmetric_matrix() {
        let a = Mat::from_fn(3, 3, |i, j| if i == j { 2.0 } else if i.abs_diff(j) == 1 { -1.0 } else { 0.0 });
        let (w, v) = eigh(&a).unwrap();
        let expected = [2.0 - 2f64.sqrt(), 2.0, 2.0 + 2f64.sqrt()];
        for (x, y) in w.iter().zip(expected) {
            assert!((x - y).abs() < 1e-14);
        }
        let c = col(&v, 0);
        assert!((norm(c) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hermitian_eigenvalues_are_real() {
        let a = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => C64::new(1.0, 0.0),
            (1, 1) => C64::new(1.0, 0.0),
            (0, 1) => C64::new(0.0, -0.5),
            _ => C64::new(0.0, 0.5),
        });
        let w = eigvalsh_complex(&a).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-14 && (w[1] - 1.5).abs() < 1e-14);
    }
}
