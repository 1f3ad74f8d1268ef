//! Cohort assembly: align each subject's amplitude series on the acme of
//! its RR series (the beat of fastest heart rate), cut a fixed window of m
//! beats centered there, and normalize every window by its temporal mean so
//! subjects become comparable.
//!
//! Registration is pure slicing — no interpolation, no padding. Subjects
//! whose acme sits too close to a record edge are excluded, never padded.

use alloc::string::String;
use alloc::vec::Vec;

use crate::ingest::BeatSeries;
use crate::linalg::{moving_average, stable_mean};

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// One subject's beat-indexed amplitude series (RR, R or T channel).
#[derive(Debug, Clone)]
pub struct AmplitudeSeries {
    pub subject_id: String,
    pub values: Vec<f64>,
}

impl AmplitudeSeries {
    /// Check the series against configured length bounds, finiteness and
    /// strict positivity (amplitudes and intervals are positive physical
    /// quantities; zeros signal extraction failures).
    pub fn validate(&self, min_len: usize, max_len: usize) -> Result<(), CohortError> {
        let len = self.values.len();
        if len < min_len || len > max_len {
            return Err(CohortError::LengthOutOfBounds { len, min_len, max_len });
        }
        for (i, &v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(CohortError::NonFiniteValue { index: i });
            }
            if v <= 0.0 {
                return Err(CohortError::NonPositiveValue { index: i });
            }
        }
        Ok(())
    }
}

/// All three channels of one subject, restricted to the same beats: those
/// flagged valid by extraction (in particular, each has a defined RR).
#[derive(Debug, Clone)]
pub struct SubjectChannels {
    pub rr: AmplitudeSeries,
    pub r: AmplitudeSeries,
    pub t: AmplitudeSeries,
}

/// Restrict a beat series to its valid beats and split it into aligned RR,
/// R and T series. Beat k of each channel refers to the same heartbeat.
pub fn channels_from_beats(series: &BeatSeries) -> SubjectChannels {
    let mut rr = Vec::new();
    let mut r = Vec::new();
    let mut t = Vec::new();
    for beat in series.beats.iter().filter(|b| b.valid) {
        // `valid` implies every measurement is present.
        rr.push(beat.rr_ms.unwrap());
        r.push(beat.r_amplitude_mv.unwrap());
        t.push(beat.t_amplitude_mv.unwrap());
    }
    let id = &series.subject_id;
    SubjectChannels {
        rr: AmplitudeSeries { subject_id: id.clone(), values: rr },
        r: AmplitudeSeries { subject_id: id.clone(), values: r },
        t: AmplitudeSeries { subject_id: id.clone(), values: t },
    }
}

/// Windows of m beats, one per subject, acme at position m/2.
#[derive(Debug, Clone)]
pub struct RegisteredCohort {
    /// n rows, each of length m.
    pub matrix: Vec<Vec<f64>>,
    pub subject_ids: Vec<String>,
    /// 1-based position of the acme within each row: always m/2.
    pub acme_index: usize,
    pub m: usize,
}

/// Registered cohort with every row divided by its temporal mean.
#[derive(Debug, Clone)]
pub struct NormalizedCohort {
    pub matrix: Vec<Vec<f64>>,
    pub subject_ids: Vec<String>,
    /// Per-subject temporal means the rows were divided by.
    pub d: Vec<f64>,
    pub acme_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CohortError {
    LengthOutOfBounds { len: usize, min_len: usize, max_len: usize },
    NonFiniteValue { index: usize },
    NonPositiveValue { index: usize },
    /// The window length must split evenly around the acme.
    WindowNotEven { m: usize },
    /// Not enough beats on one side of the acme to cut the window.
    AcmeTooCloseToEdge { acme: usize, m: usize, len: usize },
    /// A window's temporal mean was zero or negative.
    NonPositiveMean,
}

impl core::fmt::Display for CohortError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CohortError::LengthOutOfBounds { len, min_len, max_len } => {
                write!(f, "series has {len} beats, need between {min_len} and {max_len}")
            }
            CohortError::NonFiniteValue { index } => {
                write!(f, "non-finite value at beat {index}")
            }
            CohortError::NonPositiveValue { index } => {
                write!(f, "non-positive value at beat {index}")
            }
            CohortError::WindowNotEven { m } => {
                write!(f, "window length {m} must be even to center the acme at m/2")
            }
            CohortError::AcmeTooCloseToEdge { acme, m, len } => write!(
                f,
                "acme at beat {acme} is too close to a record edge for an m = {m} window (need {} beats before and {} after, series has {len})",
                m / 2 - 1,
                m / 2
            ),
            CohortError::NonPositiveMean => {
                write!(f, "temporal mean is not positive; amplitudes look corrupt")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CohortError {}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// 1-based index of the global minimum; the earliest index wins ties.
/// Registration anchors on this beat of the (cleaned) RR series.
///
/// # Panics
/// On an empty series.
pub fn find_acme(values: &[f64]) -> usize {
    assert!(!values.is_empty(), "cannot locate the acme of an empty series");
    let mut best = 0usize;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best + 1
}

/// `find_acme` after a centered moving average of odd width
/// `smooth_window`; width 0 or 1 means no smoothing. The smoothing exists
/// for noisy RR series where the raw argmin can jitter by a few beats.
pub fn find_acme_smoothed(values: &[f64], smooth_window: usize) -> usize {
    if smooth_window <= 1 {
        return find_acme(values);
    }
    let smoothed = moving_average(values, smooth_window / 2);
    find_acme(&smoothed)
}

/// Cut the m-beat window `[acme - m/2 + 1, acme + m/2]` (1-based, inclusive)
/// so the acme lands at position m/2: with m = 1200, at position 600.
/// Values are copied untouched.
pub fn register(values: &[f64], acme: usize, m: usize) -> Result<Vec<f64>, CohortError> {
    if m < 2 || m % 2 != 0 {
        return Err(CohortError::WindowNotEven { m });
    }
    let half = m / 2;
    let len = values.len();
    if acme < half || acme + half > len {
        return Err(CohortError::AcmeTooCloseToEdge { acme, m, len });
    }
    Ok(values[acme - half..acme + half].to_vec())
}

/// Divide a window by its temporal mean D, returning the normalized series
/// and D. Errors when D is not strictly positive.
pub fn normalize(window: &[f64]) -> Result<(Vec<f64>, f64), CohortError> {
    let d = stable_mean(window);
    if !(d > 0.0) || !d.is_finite() {
        return Err(CohortError::NonPositiveMean);
    }
    Ok((window.iter().map(|&v| v / d).collect(), d))
}

/// Column means of the normalized cohort: the raw (unsmoothed) population
/// mean curve.
///
/// # Panics
/// With fewer than 2 subjects.
pub fn population_mean_raw(cohort: &NormalizedCohort) -> Vec<f64> {
    let n = cohort.matrix.len();
    assert!(n >= 2, "population mean needs at least 2 subjects");
    let m = cohort.matrix[0].len();
    let mut mean = Vec::with_capacity(m);
    let mut column = Vec::with_capacity(n);
    for t in 0..m {
        column.clear();
        column.extend(cohort.matrix.iter().map(|row| row[t]));
        mean.push(stable_mean(&column));
    }
    mean
}

/// Register one channel for many subjects. Subjects whose window does not
/// fit are excluded and reported alongside the cohort, not padded.
pub fn build_cohort(
    items: &[(AmplitudeSeries, usize)],
    m: usize,
) -> (RegisteredCohort, Vec<(String, CohortError)>) {
    let mut matrix = Vec::new();
    let mut ids = Vec::new();
    let mut excluded = Vec::new();
    for (series, acme) in items {
        match register(&series.values, *acme, m) {
            Ok(row) => {
                matrix.push(row);
                ids.push(series.subject_id.clone());
            }
            Err(e) => excluded.push((series.subject_id.clone(), e)),
        }
    }
    (
        RegisteredCohort { matrix, subject_ids: ids, acme_index: m / 2, m },
        excluded,
    )
}

/// Normalize every row of a registered cohort. The first failing subject
/// aborts with its identity.
pub fn normalize_cohort(cohort: &RegisteredCohort) -> Result<NormalizedCohort, (String, CohortError)> {
    let mut matrix = Vec::with_capacity(cohort.matrix.len());
    let mut d = Vec::with_capacity(cohort.matrix.len());
    for (row, id) in cohort.matrix.iter().zip(&cohort.subject_ids) {
        let (normalized, di) = normalize(row).map_err(|e| (id.clone(), e))?;
        matrix.push(normalized);
        d.push(di);
    }
    Ok(NormalizedCohort {
        matrix,
        subject_ids: cohort.subject_ids.clone(),
        d,
        acme_index: cohort.acme_index,
    })
}
