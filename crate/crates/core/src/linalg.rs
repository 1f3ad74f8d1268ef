//! Small dense and banded linear algebra kernels shared by the smoothing,
//! PCA and local regression modules.
//!
//! Everything here is plain `f64` over `alloc` vectors. The two factorizations
//! (banded Givens QR, cyclic Jacobi) are deterministic: identical inputs give
//! bitwise identical outputs.

use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Compensated (Neumaier) summation. Used where downstream assertions hold
/// identities to ~1e-12 and a plain left fold would already spend that budget.
pub fn stable_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Mean via compensated summation.
pub fn stable_mean(values: &[f64]) -> f64 {
    stable_sum(values) / values.len() as f64
}

/// Dot product of two equal-length slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

// ---------------------------------------------------------------------------
// Banded least squares via Givens QR
// ---------------------------------------------------------------------------

/// A row-banded design matrix: row `t` has `width` contiguous nonzero entries
/// starting at column `first_col[t]`. `first_col` must be nondecreasing.
pub struct BandedDesign {
    pub n_rows: usize,
    pub n_cols: usize,
    pub width: usize,
    pub first_col: Vec<usize>,
    /// Row-major nonzero blocks, `n_rows * width` entries.
    pub values: Vec<f64>,
}

impl BandedDesign {
    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.width..(t + 1) * self.width]
    }

    /// Multiply the design by a coefficient vector.
    pub fn apply(&self, coef: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows];
        for t in 0..self.n_rows {
            let j0 = self.first_col[t];
            let row = self.row(t);
            let mut acc = 0.0;
            for (d, &v) in row.iter().enumerate() {
                acc += v * coef[j0 + d];
            }
            out[t] = acc;
        }
        out
    }
}

/// QR factorization of a [`BandedDesign`] by Givens rotations, retaining the
/// rotation sequence so many right-hand sides can be solved against one
/// factorization. The triangular factor keeps the band width of the design.
#[derive(Debug)]
pub struct BandedQr {
    n_cols: usize,
    width: usize,
    n_rows: usize,
    first_col: Vec<usize>,
    /// `n_cols * width`; row `i` holds R[i][i..i+width].
    r: Vec<f64>,
    /// `n_rows * width` rotations in application order: (c, s) pairs; the
    /// column each acts on is implied by the row's `first_col` offset.
    rot: Vec<(f64, f64)>,
}

/// Error for a rank-deficient banded system.
#[derive(Debug, Clone, PartialEq)]
pub struct RankDeficient {
    pub column: usize,
}

impl BandedQr {
    /// Factor the design. Fails when some column carries no information
    /// (zero pivot in R), which a well-posed smoothing grid never produces.
    pub fn new(design: &BandedDesign) -> Result<BandedQr, RankDeficient> {
        debug_assert!(design.first_col.windows(2).all(|p| p[0] <= p[1]));
        let w = design.width;
        let k = design.n_cols;
        let mut r: Vec<f64> = vec![0.0; k * w];
        let mut rot: Vec<(f64, f64)> = vec![(1.0, 0.0); design.n_rows * w];
        let mut work: Vec<f64> = vec![0.0; w];

        for t in 0..design.n_rows {
            work.copy_from_slice(design.row(t));
            let j0 = design.first_col[t];
            for d in 0..w {
                let col = j0 + d;
                let b = work[d];
                let a = r[col * w];
                let (c, s) = if b == 0.0 {
                    (1.0, 0.0)
                } else {
                    let h = a.hypot(b);
                    (a / h, b / h)
                };
                rot[t * w + d] = (c, s);
                if s != 0.0 {
                    // Mix the R row and the working row over their shared span.
                    // With rows arriving in nondecreasing first_col order, R row
                    // `col` has no entries beyond the working row's span yet, so
                    // the rotation cannot create fill-in.
                    for e in d..w {
                        let rc = col * w + (e - d);
                        let rv = r[rc];
                        let wv = work[e];
                        r[rc] = c * rv + s * wv;
                        work[e] = -s * rv + c * wv;
                    }
                    for e in (w - d)..w {
                        debug_assert_eq!(r[col * w + e], 0.0);
                    }
                }
            }
        }
        for col in 0..k {
            if r[col * w] == 0.0 {
                return Err(RankDeficient { column: col });
            }
        }
        Ok(BandedQr {
            n_cols: k,
            width: w,
            n_rows: design.n_rows,
            first_col: design.first_col.clone(),
            r,
            rot,
        })
    }

    /// Solve `min ||A x - y||` for one right-hand side. Returns the
    /// coefficient vector and the residual sum of squares.
    pub fn solve(&self, y: &[f64]) -> (Vec<f64>, f64) {
        debug_assert_eq!(y.len(), self.n_rows);
        let w = self.width;
        let mut qty = vec![0.0; self.n_cols];
        let mut rss = 0.0;
        for t in 0..self.n_rows {
            let j0 = self.first_col[t];
            let mut v = y[t];
            for d in 0..w {
                let (c, s) = self.rot[t * w + d];
                if s != 0.0 {
                    let q = qty[j0 + d];
                    qty[j0 + d] = c * q + s * v;
                    v = -s * q + c * v;
                }
            }
            rss += v * v;
        }
        let x = self.back_substitute(&qty);
        (x, rss)
    }

    fn back_substitute(&self, qty: &[f64]) -> Vec<f64> {
        let w = self.width;
        let k = self.n_cols;
        let mut x = vec![0.0; k];
        for i in (0..k).rev() {
            let mut acc = qty[i];
            for d in 1..w {
                if i + d < k {
                    acc -= self.r[i * w + d] * x[i + d];
                }
            }
            x[i] = acc / self.r[i * w];
        }
        x
    }
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition (cyclic Jacobi)
// ---------------------------------------------------------------------------

/// Eigendecomposition of a symmetric matrix, eigenvalues descending.
pub struct SymmetricEigen {
    pub eigenvalues: Vec<f64>,
    /// Column-major eigenvectors: `vectors[j]` is the eigenvector of
    /// `eigenvalues[j]`.
    pub vectors: Vec<Vec<f64>>,
}

/// Cyclic Jacobi on a dense symmetric matrix given row-major. Converges to
/// off-diagonal mass below ~1e-15 of the Frobenius norm; plenty for the
/// 1e-10 orthogonality budgets downstream.
pub fn symmetric_eigen(matrix: &[f64], n: usize) -> SymmetricEigen {
    debug_assert_eq!(matrix.len(), n * n);
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let fro: f64 = matrix.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-15 * fro.max(f64::MIN_POSITIVE);
    let max_sweeps = 64;

    for _ in 0..max_sweeps {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[p * n + q].abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for i in 0..n {
                    let aip = a[i * n + p];
                    let aiq = a[i * n + q];
                    a[i * n + p] = c * aip - s * aiq;
                    a[i * n + q] = s * aip + c * aiq;
                }
                for i in 0..n {
                    let api = a[p * n + i];
                    let aqi = a[q * n + i];
                    a[p * n + i] = c * api - s * aqi;
                    a[q * n + i] = s * api + c * aqi;
                }
                for i in 0..n {
                    let vip = v[i * n + p];
                    let viq = v[i * n + q];
                    v[i * n + p] = c * vip - s * viq;
                    v[i * n + q] = s * vip + c * viq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[j * n + j]
            .partial_cmp(&a[i * n + i])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let eigenvalues = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&j| (0..n).map(|i| v[i * n + j]).collect())
        .collect();
    SymmetricEigen {
        eigenvalues,
        vectors,
    }
}

// ---------------------------------------------------------------------------
// Tiny dense solves for the local quadratic fits
// ---------------------------------------------------------------------------

/// QR solve of a thin 3-column least squares problem given by rows.
/// Rows are consumed in order; returns the coefficient triple.
pub fn solve_3col_qr(rows: impl Iterator<Item = ([f64; 3], f64)>) -> [f64; 3] {
    // R is 3x3 upper triangular, qty the rotated right-hand side.
    let mut r = [[0.0f64; 3]; 3];
    let mut qty = [0.0f64; 3];
    for (row, y) in rows {
        let mut work = row;
        let mut v = y;
        for d in 0..3 {
            let b = work[d];
            if b == 0.0 {
                continue;
            }
            let a = r[d][d];
            let h = a.hypot(b);
            let (c, s) = (a / h, b / h);
            for e in d..3 {
                let rv = r[d][e];
                let wv = work[e];
                r[d][e] = c * rv + s * wv;
                work[e] = -s * rv + c * wv;
            }
            let q = qty[d];
            qty[d] = c * q + s * v;
            v = -s * q + c * v;
        }
    }
    let mut x = [0.0f64; 3];
    for i in (0..3).rev() {
        let mut acc = qty[i];
        for d in (i + 1)..3 {
            acc -= r[i][d] * x[d];
        }
        x[i] = if r[i][i] != 0.0 { acc / r[i][i] } else { 0.0 };
    }
    x
}

/// Solve a symmetric positive definite 3x3 system by Gaussian elimination
/// with partial pivoting. Used for the sandwich variance of local fits.
pub fn solve_3x3(a: &[[f64; 3]; 3], b: &[f64; 3]) -> [f64; 3] {
    let mut m = [[0.0f64; 4]; 3];
    for i in 0..3 {
        m[i][..3].copy_from_slice(&a[i]);
        m[i][3] = b[i];
    }
    for col in 0..3 {
        let mut piv = col;
        for r in (col + 1)..3 {
            if m[r][col].abs() > m[piv][col].abs() {
                piv = r;
            }
        }
        m.swap(col, piv);
        let d = m[col][col];
        for r in (col + 1)..3 {
            let f = m[r][col] / d;
            for c in col..4 {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = [0.0f64; 3];
    for i in (0..3).rev() {
        let mut acc = m[i][3];
        for d in (i + 1)..3 {
            acc -= m[i][d] * x[d];
        }
        x[i] = acc / m[i][i];
    }
    x
}

/// Centered moving average with window `2*half + 1`, shrunk at the edges.
pub(crate) fn moving_average(x: &[f64], half: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    let mut acc = 0.0;
    let mut lo = 0usize;
    let mut hi = 0usize; // exclusive
    for i in 0..n {
        let want_lo = i.saturating_sub(half);
        let want_hi = (i + half + 1).min(n);
        while hi < want_hi {
            acc += x[hi];
            hi += 1;
        }
        while lo < want_lo {
            acc -= x[lo];
            lo += 1;
        }
        out[i] = acc / (hi - lo) as f64;
    }
    out
}
