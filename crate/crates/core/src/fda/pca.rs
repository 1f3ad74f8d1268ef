//! Functional principal component analysis of smoothed cohort curves.
//!
//! The covariance operator is diagonalized through the subject-space Gram
//! matrix (the "snapshot" route): for n subjects on an m-point grid the
//! eigenproblem is n x n instead of m x m, and the grid eigenfunctions are
//! recovered by projecting the centered curves onto the Gram eigenvectors.
//! Inner products on the grid carry the discrete 1/m weight, so
//! eigenfunctions satisfy `(1/m) sum_t phi(t)^2 = 1`.

use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use super::basis::{smoothed_mean, FdaError, SplineBasis, SplineFit};
use crate::linalg::{dot, stable_sum, symmetric_eigen};

/// Functional PCA of a cohort of smoothed curves.
#[derive(Debug, Clone)]
pub struct PcaDecomposition {
    /// Smoothed population mean on the grid.
    pub mean_function: Vec<f64>,
    /// Unit-norm eigenfunctions on the grid (1/m inner product), descending
    /// eigenvalue order, sign fixed so that `sum_t phi(t) (t - m/2) >= 0`.
    pub eigenfunctions: Vec<Vec<f64>>,
    /// Variances along each component, descending.
    pub eigenvalues: Vec<f64>,
    /// `loadings[i][j]`: inner product of centered subject `i` with
    /// eigenfunction `j`. Zero mean across subjects by construction.
    pub loadings: Vec<Vec<f64>>,
    /// `eigenvalue[j] / total variance`; the denominator counts all
    /// components, not only the retained ones.
    pub explained_fraction: Vec<f64>,
}

/// Functional PCA of the centered smoothed curves.
///
/// Needs `n >= 3` subjects and `n_components <= n - 1` (centering removes
/// one dimension). Fails if the cohort carries no variance at all.
pub fn fpca(
    fits: &[SplineFit],
    basis: &SplineBasis,
    n_components: usize,
) -> Result<PcaDecomposition, FdaError> {
    let n = fits.len();
    if n < 3 {
        return Err(FdaError::TooFewSubjects { n });
    }
    if n_components > n - 1 {
        return Err(FdaError::TooManyComponents {
            requested: n_components,
            max: n - 1,
        });
    }
    let m = basis.grid_len;
    let mean_function = smoothed_mean(fits, basis)?;

    let mut centered: Vec<Vec<f64>> = Vec::with_capacity(n);
    for fit in fits {
        let mut row = basis.evaluate(&fit.coefficients);
        for (v, &mu) in row.iter_mut().zip(mean_function.iter()) {
            *v -= mu;
        }
        centered.push(row);
    }

    // Subject-space Gram matrix with the 1/m grid weight and the 1/(n-1)
    // sample scaling folded in, so its eigenvalues are the component
    // variances and its trace is the total variance.
    let scale = 1.0 / (m as f64 * (n - 1) as f64);
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let g = dot(&centered[i], &centered[j]) * scale;
            gram[i * n + j] = g;
            gram[j * n + i] = g;
        }
    }
    let diag: Vec<f64> = (0..n).map(|i| gram[i * n + i]).collect();
    let total_variance = stable_sum(&diag);
    if total_variance <= 0.0 {
        return Err(FdaError::ZeroCovariance);
    }

    let eig = symmetric_eigen(&gram, n);
    let lead = eig.eigenvalues[0].max(0.0);

    let mut eigenfunctions = Vec::with_capacity(n_components);
    let mut eigenvalues = Vec::with_capacity(n_components);
    for j in 0..n_components {
        let lambda = eig.eigenvalues[j].max(0.0);
        eigenvalues.push(lambda);
        let mut phi = vec![0.0; m];
        if lambda > 1e-14 * lead {
            let u = &eig.vectors[j];
            for (i, row) in centered.iter().enumerate() {
                let ui = u[i];
                for (p, &v) in phi.iter_mut().zip(row.iter()) {
                    *p += ui * v;
                }
            }
            let norm = ((n - 1) as f64 * lambda).sqrt();
            for p in phi.iter_mut() {
                *p /= norm;
            }
            // Sign convention: positive correlation with (t - m/2).
            let half = m as f64 / 2.0;
            let mut s = 0.0;
            for (t, &p) in phi.iter().enumerate() {
                s += p * ((t + 1) as f64 - half);
            }
            if s < 0.0 {
                for p in phi.iter_mut() {
                    *p = -*p;
                }
            }
        }
        eigenfunctions.push(phi);
    }

    let inv_m = 1.0 / m as f64;
    let loadings: Vec<Vec<f64>> = centered
        .iter()
        .map(|row| {
            eigenfunctions
                .iter()
                .map(|phi| dot(row, phi) * inv_m)
                .collect()
        })
        .collect();

    let explained_fraction = eigenvalues.iter().map(|&l| l / total_variance).collect();

    Ok(PcaDecomposition {
        mean_function,
        eigenfunctions,
        eigenvalues,
        loadings,
        explained_fraction,
    })
}

/// Rebuild subject `i` from its first `r` components:
/// mean + sum of loading * eigenfunction.
pub fn reconstruct(
    decomposition: &PcaDecomposition,
    subject: usize,
    r: usize,
) -> Result<Vec<f64>, FdaError> {
    if subject >= decomposition.loadings.len() {
        return Err(FdaError::SubjectOutOfRange {
            subject,
            n: decomposition.loadings.len(),
        });
    }
    if r > decomposition.eigenfunctions.len() {
        return Err(FdaError::TooManyComponents {
            requested: r,
            max: decomposition.eigenfunctions.len(),
        });
    }
    let mut out = decomposition.mean_function.clone();
    for j in 0..r {
        let c = decomposition.loadings[subject][j];
        for (o, &p) in out.iter_mut().zip(decomposition.eigenfunctions[j].iter()) {
            *o += c * p;
        }
    }
    Ok(out)
}
