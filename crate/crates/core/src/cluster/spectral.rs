//! Normalized Laplacian and its spectral embedding.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub const EIGEN_TOLERANCE: f64 = 1e-10;
const EIGEN_MAX_ITER: usize = 10_000;

/// `I - D^-1/2 A D^-1/2` with `D` the row sums of `a`, symmetrized.
/// Isolated vertices (zero degree) get a zero row and column in the
/// normalized affinity.
pub fn normalized_laplacian(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let inv_sqrt: Vec<f64> = a
        .row_iter()
        .map(|r| {
            let d: f64 = r.iter().sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let l = DMatrix::from_fn(n, n, |i, j| {
        let norm = inv_sqrt[i] * a[(i, j)] * inv_sqrt[j];
        if i == j {
            1.0 - norm
        } else {
            -norm
        }
    });
    (&l + l.transpose()) * 0.5
}

/// Eigenpairs sorted by ascending eigenvalue.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Columns follow `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
}

pub fn spectrum(l: &DMatrix<f64>) -> Result<Spectrum> {
    let n = l.nrows();
    let eig =
        SymmetricEigen::try_new(l.clone(), EIGEN_TOLERANCE, EIGEN_MAX_ITER).ok_or(Error::EigenNonConvergence {
            n,
            tolerance: EIGEN_TOLERANCE,
        })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Rows of the first `k` eigenvectors, each scaled to unit length (zero
/// rows stay zero).
pub fn embedding(spec: &Spectrum, k: usize) -> Vec<Vec<f64>> {
    let n = spec.eigenvectors.nrows();
    (0..n)
        .map(|r| {
            let row: Vec<f64> = (0..k).map(|c| spec.eigenvectors[(r, c)]).collect();
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.into_iter().map(|x| x / norm).collect()
            } else {
                row
            }
        })
        .collect()
}
