//! Bridge between `ndarray` storage and `faer` decompositions.

use faer::{Mat, Side};
use ndarray::Array2;
use num_complex::Complex64 as C64;

pub(crate) fn to_faer(a: &Array2<C64>) -> Mat<C64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Eigenvalues of a Hermitian matrix, ascending. Reads the lower triangle.
pub(crate) fn hermitian_eigenvalues(a: &Array2<C64>) -> Vec<f64> {
    to_faer(a)
        .self_adjoint_eigenvalues(Side::Lower)
        .expect("self-adjoint eigensolver failed")
}
