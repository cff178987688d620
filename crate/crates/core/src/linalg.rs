//! Dense eigen-solvers and spectral functions used by the kernels and the oracles.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest absolute entry of `m - m^†`.
pub fn hermitian_defect(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigh(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending.
pub fn symmetric_eigh(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// `V f(Λ) V^†` for a Hermitian `m`.
pub fn hermitian_function<F>(m: &DMatrix<Complex64>, f: F) -> DMatrix<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    let (values, vectors) = hermitian_eigh(m);
    let n = m.nrows();
    let mut scaled = vectors.clone();
    for (c, &lambda) in values.iter().enumerate() {
        let w = f(lambda);
        for r in 0..n {
            scaled[(r, c)] *= w;
        }
    }
    scaled * vectors.adjoint()
}

/// Pseudoinverse solve `x = m^+ rhs` for real symmetric `m`.
///
/// Eigenvalues with magnitude below `rel_tol * max|λ|` are treated as null.
pub fn pinv_symmetric_solve(m: &DMatrix<f64>, rhs: &DVector<f64>, rel_tol: f64) -> Result<DVector<f64>> {
    if m.iter().chain(rhs.iter()).any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite entry in linear system"));
    }
    let (values, vectors) = symmetric_eigh(m);
    let scale = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut x = DVector::zeros(m.nrows());
    if scale == 0.0 {
        return Ok(x);
    }
    let cutoff = rel_tol * scale;
    for (k, &lambda) in values.iter().enumerate() {
        if lambda.abs() <= cutoff {
            continue;
        }
        let u = vectors.column(k);
        let coeff = u.dot(rhs) / lambda;
        x.axpy(coeff, &u, 1.0);
    }
    Ok(x)
}
