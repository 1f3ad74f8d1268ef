//! Inference on the normalized cohort: pointwise confidence bands for the
//! population mean (is it distinguishable from a flat line?), local
//! quadratic fits whose first-order coefficients estimate the derivative,
//! and certification of extrema as significant zero crossings of that
//! derivative flanked by significantly signed slopes.
//!
//! All bands are pointwise in the normal approximation; simultaneous bands
//! are out of scope.

use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::linalg::{solve_3col_qr, solve_3x3};

// ---------------------------------------------------------------------------
// Normal quantile
// ---------------------------------------------------------------------------

/// Inverse standard normal CDF (Wichura's PPND16 rational approximations,
/// accurate to ~1e-15 over the full open interval).
///
/// # Panics
/// Unless 0 < p < 1.
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile needs a probability strictly inside (0, 1)");
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        // Central region: rational in r = 0.180625 - q^2.
        let r = 0.180625 - q * q;
        const A: [f64; 8] = [
            3.3871328727963666080e0,
            1.3314166789178437745e2,
            1.9715909503065514427e3,
            1.3731693765509461125e4,
            4.5921953931549871457e4,
            6.7265770927008700853e4,
            3.3430575583588128105e4,
            2.5090809287301226727e3,
        ];
        const B: [f64; 8] = [
            1.0,
            4.2313330701600911252e1,
            6.8718700749205790830e2,
            5.3941960214247511077e3,
            2.1213794301586595867e4,
            3.9307895800092710610e4,
            2.8729085735721942674e4,
            5.2264952788528545610e3,
        ];
        return q * horner(&A, r) / horner(&B, r);
    }
    // Tails: rational in r = sqrt(-ln(min(p, 1-p))).
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        const C: [f64; 8] = [
            1.42343711074968357734e0,
            4.63033784615654529590e0,
            5.76949722146069140550e0,
            3.64784832476320460504e0,
            1.27045825245236838258e0,
            2.41780725177450611770e-1,
            2.27238449892691845833e-2,
            7.74545014278341407640e-4,
        ];
        const D: [f64; 8] = [
            1.0,
            2.05319162663775882187e0,
            1.67638483018380384940e0,
            6.89767334985100004550e-1,
            1.48103976427480074590e-1,
            1.51986665636164571966e-2,
            5.47593808499534494600e-4,
            1.05075007164441684324e-9,
        ];
        horner(&C, r) / horner(&D, r)
    } else {
        let r = r - 5.0;
        const E: [f64; 8] = [
            6.65790464350110377720e0,
            5.46378491116411436990e0,
            1.78482653991729133580e0,
            2.96560571828504891230e-1,
            2.65321895265761230930e-2,
            1.24266094738807843860e-3,
            2.71155556874348757815e-5,
            2.01033439929228813265e-7,
        ];
        const F: [f64; 8] = [
            1.0,
            5.99832206555887937690e-1,
            1.36929880922735805310e-1,
            1.48753612908506148525e-2,
            7.86869131145613259100e-4,
            1.84631831751005468180e-5,
            1.42151175831644588870e-7,
            2.04426310338993978564e-15,
        ];
        horner(&E, r) / horner(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

fn horner(coef: &[f64; 8], x: f64) -> f64 {
    let mut acc = coef[7];
    for k in (0..7).rev() {
        acc = acc * x + coef[k];
    }
    acc
}

// ---------------------------------------------------------------------------
// Mean band and constancy test
// ---------------------------------------------------------------------------

/// Unbiased pointwise sample variance of cohort rows around a given mean.
#[derive(Debug, Clone)]
pub struct VarianceEstimate {
    pub sigma2: Vec<f64>,
}

/// A pointwise band `center ± z * scale(t)`.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ConfidenceBand {
    /// 1-based beat positions the band is evaluated on.
    pub positions: Vec<usize>,
    pub center: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub alpha: f64,
    /// The standard normal quantile z_{1-alpha/2} used for the half-width.
    pub z: f64,
}

/// sigma^2(t) = sum_i (S_i(t) - mean(t))^2 / (n - 1), per column.
///
/// # Panics
/// With fewer than 2 rows or mismatched lengths.
pub fn pointwise_variance(rows: &[Vec<f64>], mean: &[f64]) -> VarianceEstimate {
    let n = rows.len();
    assert!(n >= 2, "variance needs at least 2 subjects");
    let m = mean.len();
    let mut sigma2 = vec![0.0f64; m];
    for row in rows {
        assert_eq!(row.len(), m, "row length does not match the mean");
        for t in 0..m {
            let d = row[t] - mean[t];
            sigma2[t] += d * d;
        }
    }
    let denom = (n - 1) as f64;
    for v in sigma2.iter_mut() {
        *v /= denom;
    }
    VarianceEstimate { sigma2 }
}

/// Pointwise band `center(t) ± z_{1-alpha/2} * sigma(t) / sqrt(n)`.
///
/// # Panics
/// Unless n >= 2, 0 < alpha < 1, and lengths agree.
pub fn confidence_band(
    positions: &[usize],
    center: &[f64],
    variance: &VarianceEstimate,
    n: usize,
    alpha: f64,
) -> ConfidenceBand {
    assert!(n >= 2, "band needs at least 2 subjects");
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must be in (0, 1)");
    assert_eq!(positions.len(), center.len());
    assert_eq!(center.len(), variance.sigma2.len());
    let z = normal_quantile(1.0 - alpha / 2.0);
    let scale = 1.0 / (n as f64).sqrt();
    let mut lower = Vec::with_capacity(center.len());
    let mut upper = Vec::with_capacity(center.len());
    for (c, s2) in center.iter().zip(&variance.sigma2) {
        let half = z * s2.max(0.0).sqrt() * scale;
        lower.push(c - half);
        upper.push(c + half);
    }
    ConfidenceBand {
        positions: positions.to_vec(),
        center: center.to_vec(),
        lower,
        upper,
        alpha,
        z,
    }
}

/// A closed run of beat positions, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Interval {
    pub lo: usize,
    pub hi: usize,
}

/// Maximal intervals where the band excludes the reference level (the whole
/// band sits above it, or the whole band below). An empty result means the
/// data cannot be told apart from the constant.
pub fn test_constancy(band: &ConfidenceBand, reference: f64) -> Vec<Interval> {
    let mut intervals = Vec::new();
    let mut start: Option<usize> = None;
    for i in 0..band.positions.len() {
        let excluded = band.lower[i] > reference || band.upper[i] < reference;
        match (excluded, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                intervals.push(Interval { lo: band.positions[s], hi: band.positions[i - 1] });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        intervals.push(Interval {
            lo: band.positions[s],
            hi: band.positions[band.positions.len() - 1],
        });
    }
    intervals
}

// ---------------------------------------------------------------------------
// Local polynomial machinery
// ---------------------------------------------------------------------------

/// Kernel shape for the local fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    #[default]
    Gaussian,
}

impl Kernel {
    pub fn evaluate(&self, u: f64) -> f64 {
        match self {
            Kernel::Gaussian => (-0.5 * u * u).exp(),
        }
    }
}

/// Where and how the local quadratic fits run.
#[derive(Debug, Clone)]
pub struct SizerConfig {
    /// 1-based beat positions of the fit centers, nondecreasing.
    pub grid: Vec<usize>,
    /// Kernel bandwidth in beats.
    pub h: f64,
    pub kernel: Kernel,
}

impl SizerConfig {
    /// Every `stride`-th beat of 1..=m, bandwidth h, Gaussian kernel.
    pub fn with_stride(m: usize, stride: usize, h: f64) -> SizerConfig {
        SizerConfig {
            grid: (1..=m).step_by(stride.max(1)).collect(),
            h,
            kernel: Kernel::Gaussian,
        }
    }
}

/// One local quadratic fit. Coefficients are in beat units: beta1 estimates
/// the derivative of the underlying curve at `position`, beta2 half its
/// curvature.
#[derive(Debug, Clone)]
pub struct LocalFit {
    /// 1-based beat the fit is centered on.
    pub position: usize,
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub se0: f64,
    pub se1: f64,
    /// Effective sample size 1 / sum(w^2) of the normalized kernel weights.
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InferenceError {
    EmptyGrid,
    GridOutOfRange { position: usize, m: usize },
    /// h so small the kernel effectively sees fewer than 5 points.
    BandwidthTooSmall { position: usize, ess: f64 },
}

impl core::fmt::Display for InferenceError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            InferenceError::EmptyGrid => write!(f, "the fit grid is empty"),
            InferenceError::GridOutOfRange { position, m } => {
                write!(f, "grid position {position} outside the series 1..={m}")
            }
            InferenceError::BandwidthTooSmall { position, ess } => write!(
                f,
                "effective sample size {ess:.2} at beat {position} is below 5; increase the bandwidth"
            ),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for InferenceError {}

/// Kernel weights centered at beat `t_j` over the domain 1..=m, normalized
/// to sum to exactly 1.
pub fn kernel_weights(t_j: usize, h: f64, m: usize, kernel: Kernel) -> Vec<f64> {
    assert!(h > 0.0, "bandwidth must be positive");
    let mut w: Vec<f64> = (1..=m)
        .map(|t| kernel.evaluate((t as f64 - t_j as f64) / h))
        .collect();
    let total: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= total;
    }
    w
}

/// Weighted local quadratic fit at every grid point.
///
/// Internally the abscissa is standardized to u = (t - t_j)/h, the weighted
/// least-squares problem is solved by orthogonal (QR) reduction of
/// sqrt(w)-scaled rows, and coefficients are mapped back by powers of h.
/// Standard errors use the sandwich form
/// `sigma_loc^2 * [(X'WX)^-1 (X'W^2X) (X'WX)^-1]` with the local residual
/// variance `sum(w e^2) / (sum w - nu)`, `nu = tr((X'WX)^-1 (X'W^2X))`.
pub fn local_poly_fit(series: &[f64], cfg: &SizerConfig) -> Result<Vec<LocalFit>, InferenceError> {
    let m = series.len();
    if cfg.grid.is_empty() {
        return Err(InferenceError::EmptyGrid);
    }
    if let Some(&p) = cfg.grid.iter().find(|&&p| p < 1 || p > m) {
        return Err(InferenceError::GridOutOfRange { position: p, m });
    }
    let h = cfg.h;
    assert!(h > 0.0, "bandwidth must be positive");

    let mut fits = Vec::with_capacity(cfg.grid.len());
    for &t_j in &cfg.grid {
        let w = kernel_weights(t_j, h, m, cfg.kernel);
        let sum_w2: f64 = w.iter().map(|v| v * v).sum();
        let ess = 1.0 / sum_w2;
        if ess < 5.0 {
            return Err(InferenceError::BandwidthTooSmall { position: t_j, ess });
        }

        let u_at = |t: usize| (t as f64 + 1.0 - t_j as f64) / h; // t is 0-based here
        let coef = solve_3col_qr(series.iter().enumerate().map(|(t, &y)| {
            let u = u_at(t);
            let sw = w[t].sqrt();
            ([sw, sw * u, sw * u * u], sw * y)
        }));

        // Weighted moments for the sandwich covariance, in u coordinates.
        let mut s = [0.0f64; 5]; // sum w u^k
        let mut q = [0.0f64; 5]; // sum w^2 u^k
        let mut rss_w = 0.0f64;
        for (t, &y) in series.iter().enumerate() {
            let u = u_at(t);
            let mut uk = 1.0;
            for k in 0..5 {
                s[k] += w[t] * uk;
                q[k] += w[t] * w[t] * uk;
                uk *= u;
            }
            let e = y - (coef[0] + u * (coef[1] + u * coef[2]));
            rss_w += w[t] * e * e;
        }
        let a = [[s[0], s[1], s[2]], [s[1], s[2], s[3]], [s[2], s[3], s[4]]];
        let b = [[q[0], q[1], q[2]], [q[1], q[2], q[3]], [q[2], q[3], q[4]]];
        let g0 = solve_3x3(&a, &[1.0, 0.0, 0.0]);
        let g1 = solve_3x3(&a, &[0.0, 1.0, 0.0]);
        let g2 = solve_3x3(&a, &[0.0, 0.0, 1.0]);
        let quad = |g: &[f64; 3]| -> f64 {
            let mut acc = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    acc += g[i] * b[i][j] * g[j];
                }
            }
            acc
        };
        let col_dot = |g: &[f64; 3], k: usize| g[0] * b[0][k] + g[1] * b[1][k] + g[2] * b[2][k];
        let nu = col_dot(&g0, 0) + col_dot(&g1, 1) + col_dot(&g2, 2);
        let denom = s[0] - nu;
        if !(denom > 1e-9) {
            return Err(InferenceError::BandwidthTooSmall { position: t_j, ess });
        }
        let sigma2_loc = (rss_w / denom).max(0.0);
        let se0 = (sigma2_loc * quad(&g0).max(0.0)).sqrt();
        let se1 = (sigma2_loc * quad(&g1).max(0.0)).sqrt() / h;

        fits.push(LocalFit {
            position: t_j,
            beta0: coef[0],
            beta1: coef[1] / h,
            beta2: coef[2] / (h * h),
            se0,
            se1,
            ess,
        });
    }
    Ok(fits)
}

/// Pointwise band on the derivative estimates: beta1 ± z_{1-alpha/2} se1.
pub fn derivative_band(fits: &[LocalFit], alpha: f64) -> ConfidenceBand {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must be in (0, 1)");
    let z = normal_quantile(1.0 - alpha / 2.0);
    let positions: Vec<usize> = fits.iter().map(|f| f.position).collect();
    let center: Vec<f64> = fits.iter().map(|f| f.beta1).collect();
    let lower: Vec<f64> = fits.iter().map(|f| f.beta1 - z * f.se1).collect();
    let upper: Vec<f64> = fits.iter().map(|f| f.beta1 + z * f.se1).collect();
    ConfidenceBand { positions, center, lower, upper, alpha, z }
}

// ---------------------------------------------------------------------------
// Feature certification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ExtremumKind {
    Min,
    Max,
}

/// A certified extremum: a zero crossing of the estimated derivative with
/// significantly signed slopes on both flanks.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Extremum {
    /// Crossing location rounded to the nearest beat.
    pub beat: usize,
    pub kind: ExtremumKind,
    /// Sub-grid crossing location of the beta1 point estimate.
    pub crossing_beat: f64,
    /// Nearest maximal interval left of the crossing where the derivative
    /// band excludes zero with the pre-crossing sign.
    pub left_interval: Interval,
    /// Same on the right with the post-crossing sign.
    pub right_interval: Interval,
}

/// Everything the analysis has to say about the mean curve.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FeatureReport {
    /// Where the mean band excludes the reference level.
    pub significant_intervals: Vec<Interval>,
    pub extrema: Vec<Extremum>,
}

/// Certify extrema: every zero crossing of the derivative point estimate
/// that has, within 3h beats on each side, at least one grid point where
/// the derivative band excludes zero with the matching sign (negative
/// before and positive after for a minimum; mirrored for a maximum).
/// Also carries the mean band's departures from the reference level 1.
pub fn find_significant_extrema(
    level_band: &ConfidenceBand,
    deriv_band: &ConfidenceBand,
    h: f64,
) -> FeatureReport {
    let significant_intervals = test_constancy(level_band, 1.0);
    let k = deriv_band.positions.len();

    // Per grid point: +1 if significantly positive, -1 if negative, 0 null.
    let sig: Vec<i8> = (0..k)
        .map(|i| {
            if deriv_band.lower[i] > 0.0 {
                1
            } else if deriv_band.upper[i] < 0.0 {
                -1
            } else {
                0
            }
        })
        .collect();

    // Maximal single-sign significant runs.
    let mut runs: Vec<(i8, usize, usize)> = Vec::new(); // (sign, start idx, end idx)
    for i in 0..k {
        match runs.last_mut() {
            Some((s, _, end)) if *s == sig[i] && *end + 1 == i && sig[i] != 0 => *end = i,
            _ if sig[i] != 0 => runs.push((sig[i], i, i)),
            _ => {}
        }
    }
    let run_containing = |idx: usize| -> Option<Interval> {
        runs.iter()
            .find(|(_, s, e)| (*s..=*e).contains(&idx))
            .map(|(_, s, e)| Interval {
                lo: deriv_band.positions[*s],
                hi: deriv_band.positions[*e],
            })
    };

    // Zero crossings of the point estimate; exact zeros are skipped over so
    // a crossing is always interpolated between two nonzero values.
    let mut extrema = Vec::new();
    let beta = &deriv_band.center;
    let mut prev: Option<usize> = None;
    for i in 0..k {
        if beta[i] == 0.0 {
            continue;
        }
        if let Some(p) = prev {
            if beta[p] * beta[i] < 0.0 {
                let t0 = deriv_band.positions[p] as f64;
                let t1 = deriv_band.positions[i] as f64;
                let crossing = t0 + (t1 - t0) * beta[p] / (beta[p] - beta[i]);
                let (left_sign, kind) = if beta[p] < 0.0 {
                    (-1, ExtremumKind::Min)
                } else {
                    (1, ExtremumKind::Max)
                };
                // Nearest significant grid point of the right sign on each
                // side, within the 3h certification horizon.
                let left = (0..=p).rev().find(|&j| {
                    sig[j] == left_sign
                        && crossing - (deriv_band.positions[j] as f64) <= 3.0 * h
                });
                let right = (i..k).find(|&j| {
                    sig[j] == -left_sign
                        && (deriv_band.positions[j] as f64) - crossing <= 3.0 * h
                });
                if let (Some(l), Some(r)) = (left, right) {
                    extrema.push(Extremum {
                        beat: crossing.round() as usize,
                        kind,
                        crossing_beat: crossing,
                        left_interval: run_containing(l).expect("significant point is in a run"),
                        right_interval: run_containing(r).expect("significant point is in a run"),
                    });
                }
            }
        }
        prev = Some(i);
    }

    FeatureReport { significant_intervals, extrema }
}
