//! Cubic B-spline basis on the beat grid and least squares projection of
//! amplitude series onto its span.
//!
//! The basis is built from equally spaced breakpoints on `[1, m]` with
//! clamped (repeated) boundary knots. A series of length `m` is smoothed by
//! solving the banded least squares problem with the Givens QR factorization
//! from [`crate::linalg`]; normal equations are never formed.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{BandedDesign, BandedQr};

/// Identifies the basis a [`SplineFit`] was produced against, so that fits
/// from different bases cannot be mixed downstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisId {
    pub grid_len: usize,
    pub n_breakpoints: usize,
    pub degree: usize,
}

/// B-spline basis over the evaluation grid `1..=m` (beat positions).
pub struct SplineBasis {
    /// Polynomial degree of each piece (cubic by default).
    pub degree: usize,
    /// Full knot vector with `degree + 1` repeated boundary knots per side.
    pub knots: Vec<f64>,
    /// Number of basis functions: `n_breakpoints + degree - 1`.
    pub n_basis: usize,
    /// Number of grid points.
    pub grid_len: usize,
    n_breakpoints: usize,
    design: BandedDesign,
    qr: BandedQr,
}

/// Result of projecting one series onto the basis span.
#[derive(Debug, Clone)]
pub struct SplineFit {
    pub coefficients: Vec<f64>,
    /// Residual sum of squares of the projection.
    pub rss: f64,
    pub basis_id: BasisId,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FdaError {
    /// Too few breakpoints for the requested degree.
    TooFewBreakpoints { n_breakpoints: usize, degree: usize },
    /// The grid must be strictly longer than the basis dimension.
    GridTooShort { grid_len: usize, n_basis: usize },
    /// A series of the wrong length was passed to `smooth`.
    LengthMismatch { expected: usize, got: usize },
    /// Series values must be finite.
    NonFiniteValue { index: usize },
    /// The design lost rank (cannot occur with the default grid; guards misuse).
    RankDeficient { column: usize },
    /// A fit was produced against a different basis.
    BasisMismatch,
    /// Operations on collections of fits need at least one element.
    Empty,
    /// PCA needs at least three subjects.
    TooFewSubjects { n: usize },
    /// Centering removes one dimension; at most n - 1 components exist.
    TooManyComponents { requested: usize, max: usize },
    /// The cohort carries no variance; there is nothing to decompose.
    ZeroCovariance,
    /// Reconstruction asked for a subject outside the cohort.
    SubjectOutOfRange { subject: usize, n: usize },
}

impl core::fmt::Display for FdaError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            FdaError::TooFewBreakpoints { n_breakpoints, degree } => write!(
                f,
                "need at least degree + 2 = {} breakpoints, got {}",
                degree + 2,
                n_breakpoints
            ),
            FdaError::GridTooShort { grid_len, n_basis } => write!(
                f,
                "grid length {grid_len} does not exceed basis dimension {n_basis}"
            ),
            FdaError::LengthMismatch { expected, got } => {
                write!(f, "series length {got} does not match grid length {expected}")
            }
            FdaError::NonFiniteValue { index } => {
                write!(f, "non-finite value at position {index}")
            }
            FdaError::RankDeficient { column } => {
                write!(f, "design matrix is rank deficient at column {column}")
            }
            FdaError::BasisMismatch => write!(f, "spline fit belongs to a different basis"),
            FdaError::Empty => write!(f, "empty fit collection"),
            FdaError::TooFewSubjects { n } => {
                write!(f, "principal component analysis needs at least 3 subjects, got {n}")
            }
            FdaError::TooManyComponents { requested, max } => {
                write!(f, "requested {requested} components but at most {max} exist")
            }
            FdaError::ZeroCovariance => {
                write!(f, "cohort covariance is identically zero")
            }
            FdaError::SubjectOutOfRange { subject, n } => {
                write!(f, "subject index {subject} out of range for cohort of {n}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for FdaError {}

impl FdaError {
    pub fn describe(&self) -> String {
        format!("{self}")
    }
}

/// Build a degree-`degree` B-spline basis from `n_breakpoints` equally
/// spaced breakpoints on `[1, m]`, with the design matrix evaluated at the
/// integer beat grid `1..=m` and its QR factorization precomputed.
pub fn build_basis(m: usize, n_breakpoints: usize, degree: usize) -> Result<SplineBasis, FdaError> {
    if n_breakpoints < degree + 2 {
        return Err(FdaError::TooFewBreakpoints { n_breakpoints, degree });
    }
    let n_basis = n_breakpoints + degree - 1;
    if m <= n_basis {
        return Err(FdaError::GridTooShort { grid_len: m, n_basis });
    }

    let lo = 1.0;
    let hi = m as f64;
    let step = (hi - lo) / (n_breakpoints - 1) as f64;
    let mut knots = Vec::with_capacity(n_breakpoints + 2 * degree);
    for _ in 0..degree {
        knots.push(lo);
    }
    for i in 0..n_breakpoints {
        // Pin the endpoints exactly; interior knots are equally spaced.
        let k = if i == n_breakpoints - 1 { hi } else { lo + step * i as f64 };
        knots.push(k);
    }
    for _ in 0..degree {
        knots.push(hi);
    }

    let width = degree + 1;
    let mut first_col = vec![0usize; m];
    let mut values = vec![0.0; m * width];
    let mut work_left = vec![0.0; width];
    let mut work_right = vec![0.0; width];
    for t in 0..m {
        let x = (t + 1) as f64;
        let span = find_span(&knots, degree, n_basis, x);
        basis_functions(
            &knots,
            degree,
            span,
            x,
            &mut values[t * width..(t + 1) * width],
            &mut work_left,
            &mut work_right,
        );
        first_col[t] = span - degree;
    }

    let design = BandedDesign {
        n_rows: m,
        n_cols: n_basis,
        width,
        first_col,
        values,
    };
    let qr = BandedQr::new(&design)
        .map_err(|e| FdaError::RankDeficient { column: e.column })?;

    Ok(SplineBasis {
        degree,
        knots,
        n_basis,
        grid_len: m,
        n_breakpoints,
        design,
        qr,
    })
}

impl SplineBasis {
    pub fn id(&self) -> BasisId {
        BasisId {
            grid_len: self.grid_len,
            n_breakpoints: self.n_breakpoints,
            degree: self.degree,
        }
    }

    /// The nonzero basis values at grid row `t` (0-based) and the index of
    /// the first basis function they belong to.
    pub fn design_row(&self, t: usize) -> (usize, &[f64]) {
        (self.design.first_col[t], self.design.row(t))
    }

    /// Evaluate the spline with the given coefficients over the whole grid.
    pub fn evaluate(&self, coefficients: &[f64]) -> Vec<f64> {
        self.design.apply(coefficients)
    }
}

/// Knot span index such that `knots[span] <= x < knots[span + 1]`, with the
/// right boundary clamped into the last nonempty span.
fn find_span(knots: &[f64], degree: usize, n_basis: usize, x: f64) -> usize {
    let hi_idx = n_basis; // knots[n_basis] is the right boundary
    if x >= knots[hi_idx] {
        return hi_idx - 1;
    }
    let mut lo = degree;
    let mut hi = hi_idx;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if x < knots[mid] {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// The `degree + 1` nonzero B-spline basis values at `x` in `span`
/// (Cox-de Boor recursion in its numerically stable triangular form).
fn basis_functions(
    knots: &[f64],
    degree: usize,
    span: usize,
    x: f64,
    out: &mut [f64],
    left: &mut [f64],
    right: &mut [f64],
) {
    out[0] = 1.0;
    for j in 1..=degree {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let tmp = out[r] / (right[r + 1] + left[j - r]);
            out[r] = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        out[j] = saved;
    }
}

/// Project one series onto the basis span by banded least squares.
pub fn smooth(series: &[f64], basis: &SplineBasis) -> Result<SplineFit, FdaError> {
    if series.len() != basis.grid_len {
        return Err(FdaError::LengthMismatch {
            expected: basis.grid_len,
            got: series.len(),
        });
    }
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(FdaError::NonFiniteValue { index: i });
    }
    let (coefficients, rss) = basis.qr.solve(series);
    Ok(SplineFit {
        coefficients,
        rss,
        basis_id: basis.id(),
    })
}

/// Mean smoothed curve of a cohort of fits, evaluated on the grid. Equal to
/// the spline built from averaged coefficients, which is how it is computed.
pub fn smoothed_mean(fits: &[SplineFit], basis: &SplineBasis) -> Result<Vec<f64>, FdaError> {
    if fits.is_empty() {
        return Err(FdaError::Empty);
    }
    let id = basis.id();
    if fits.iter().any(|f| f.basis_id != id) {
        return Err(FdaError::BasisMismatch);
    }
    let k = basis.n_basis;
    let mut mean_coef = vec![0.0; k];
    for fit in fits {
        for (acc, &c) in mean_coef.iter_mut().zip(fit.coefficients.iter()) {
            *acc += c;
        }
    }
    let inv = 1.0 / fits.len() as f64;
    for c in mean_coef.iter_mut() {
        *c *= inv;
    }
    Ok(basis.evaluate(&mean_coef))
}
