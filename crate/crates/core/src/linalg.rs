//! Small dense helpers on complex matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fock::C64;

/// Largest entry modulus.
pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `max |m - m^†|`.
pub fn hermiticity_deviation(m: &DMatrix<C64>) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and
/// the matching eigenvectors as columns.
pub fn hermitian_eigen(m: &DMatrix<C64>, tol: f64) -> Result<(DVector<f64>, DMatrix<C64>)> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!("{}x{} matrix", m.nrows(), m.ncols())));
    }
    let dev = hermiticity_deviation(m);
    if dev > tol {
        return Err(Error::NotHermitian(dev));
    }
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}
