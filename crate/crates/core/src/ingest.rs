//! Raw ECG to per-subject beat series: R-peak detection by a
//! derivative-threshold rule, QRS support location, R and T amplitude
//! measurement against a local baseline, and median-based cleaning of the
//! interbeat (RR) series.
//!
//! All operations are pure functions of their inputs, so per-subject
//! extraction can run in parallel without shared state.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::linalg::moving_average;

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// A single-lead voltage stream.
#[derive(Debug, Clone)]
pub struct EcgRecord {
    /// Samples in millivolts.
    pub samples_mv: Vec<f64>,
    /// Samples per second.
    pub fs: f64,
    /// Quantization step in millivolts (2.441 uV hardware steps by default).
    pub resolution_mv: f64,
    /// Lead label, e.g. "V5".
    pub lead: String,
}

/// One detected beat and its measurements. The measurement `Option`s are
/// `None` exactly when the corresponding step failed (window out of record,
/// first beat without a preceding interval); `valid` is true iff every
/// field is present.
#[derive(Debug, Clone)]
pub struct Beat {
    pub r_peak: usize,
    pub qrs_onset: Option<usize>,
    pub qrs_offset: Option<usize>,
    /// Max minus min over the QRS support, mV.
    pub r_amplitude_mv: Option<f64>,
    /// T apex over the onset/offset baseline, mV.
    pub t_amplitude_mv: Option<f64>,
    /// Cleaned interval from the previous beat, ms.
    pub rr_ms: Option<f64>,
    pub valid: bool,
}

/// Ordered beats of one recording.
#[derive(Debug, Clone)]
pub struct BeatSeries {
    pub subject_id: String,
    pub beats: Vec<Beat>,
    /// Fraction of beats with any failed measurement.
    pub invalid_fraction: f64,
}

/// Detector tuning. Defaults follow common practice for exercise
/// recordings; the normal RR range spans resting values down to half of
/// them at peak effort.
#[derive(Debug, Clone)]
pub struct DetectorConfig {
    /// Threshold = this factor times a running median of the integrated
    /// squared derivative.
    pub derivative_threshold_factor: f64,
    /// Minimum separation between detections, ms.
    pub refractory_ms: f64,
    /// Half-width of the QRS search and bound cap, ms.
    pub qrs_search_halfwidth_ms: f64,
    /// (low, high) plausible RR interval bounds, ms.
    pub rr_normal_range: (f64, f64),
    /// Block length, in beats, for median replacement of implausible RR
    /// values.
    pub clean_block: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            derivative_threshold_factor: 6.0,
            refractory_ms: 200.0,
            qrs_search_halfwidth_ms: 80.0,
            rr_normal_range: (300.0, 2000.0),
            clean_block: 30,
        }
    }
}

// Fixed internals of the detector, independent of `DetectorConfig`.
/// Width of the moving average applied to the squared derivative.
const INTEGRATION_MS: f64 = 150.0;
/// Window of the running median that sets the adaptive threshold.
const MEDIAN_WINDOW_MS: f64 = 2000.0;
/// Stride at which the running median is evaluated (interpolated between).
const MEDIAN_STRIDE_MS: f64 = 100.0;
/// Floor on the threshold as a fraction of the strongest integrated
/// response anywhere in the record; keeps broad low-slope waves between
/// beats from crossing in quiet stretches.
const THRESHOLD_FLOOR_FRACTION: f64 = 0.15;
/// Moving-average width for the QRS bound walk; bridges the derivative
/// zero at the apex.
const BOUND_SMOOTH_MS: f64 = 20.0;
/// QRS bounds stop where the smoothed squared derivative decays below this
/// fraction of its local maximum.
const BOUND_DECAY_FRACTION: f64 = 0.05;
/// T-wave search window as fractions of the preceding RR interval.
const T_WINDOW_FRACTIONS: (f64, f64) = (0.15, 0.50);
/// Invalid-beat fraction beyond which a recording is considered unusable.
const MAX_INVALID_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub enum IngestError {
    /// Below the 2 s minimum needed for the adaptive threshold.
    RecordTooShort { seconds: f64 },
    /// Empty samples, non-finite values, or a non-positive sampling rate.
    BadRecord { reason: &'static str },
    /// The QRS search window would leave the record.
    PeakNearBoundary { r_peak: usize },
    /// The T search window runs past the end of the record.
    WindowPastEnd { end: usize, len: usize },
    /// The RR series to clean is empty.
    EmptyRr,
    /// Every value in one cleaning block is outside the plausible range.
    BlockOutOfRange { block_index: usize },
    /// Detection produced no beats.
    NoBeatsDetected,
    /// Too many beats failed measurement for the series to be trusted.
    TooManyInvalid { invalid: usize, total: usize },
}

impl core::fmt::Display for IngestError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            IngestError::RecordTooShort { seconds } => {
                write!(f, "record lasts {seconds:.3} s, need at least 2 s")
            }
            IngestError::BadRecord { reason } => write!(f, "unusable record: {reason}"),
            IngestError::PeakNearBoundary { r_peak } => {
                write!(f, "R peak at sample {r_peak} is too close to a record boundary")
            }
            IngestError::WindowPastEnd { end, len } => {
                write!(f, "measurement window ends at sample {end}, record has {len}")
            }
            IngestError::EmptyRr => write!(f, "no RR intervals to clean"),
            IngestError::BlockOutOfRange { block_index } => write!(
                f,
                "every RR value in block {block_index} is outside the plausible range"
            ),
            IngestError::NoBeatsDetected => write!(f, "no beats detected"),
            IngestError::TooManyInvalid { invalid, total } => {
                write!(f, "{invalid} of {total} beats failed measurement")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for IngestError {}

// ---------------------------------------------------------------------------
// Detection
// ---------------------------------------------------------------------------

fn validate(record: &EcgRecord) -> Result<(), IngestError> {
    if !(record.fs > 0.0) || !record.fs.is_finite() {
        return Err(IngestError::BadRecord { reason: "sampling rate must be positive" });
    }
    if record.samples_mv.is_empty() {
        return Err(IngestError::BadRecord { reason: "no samples" });
    }
    if record.samples_mv.iter().any(|v| !v.is_finite()) {
        return Err(IngestError::BadRecord { reason: "non-finite sample" });
    }
    let seconds = record.samples_mv.len() as f64 / record.fs;
    if seconds < 2.0 {
        return Err(IngestError::RecordTooShort { seconds });
    }
    Ok(())
}

fn ms_to_samples(ms: f64, fs: f64) -> usize {
    (ms / 1000.0 * fs).round() as usize
}

/// Median by partial selection; `values` is scrambled in place.
fn median_mut(values: &mut [f64]) -> f64 {
    let n = values.len();
    debug_assert!(n > 0);
    let mid = n / 2;
    let (_, &mut upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        upper
    } else {
        let lower = values[..mid]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Index of the largest sample within `halfwidth` of `center` (clamped to
/// the record); earliest index wins ties.
fn local_argmax(samples: &[f64], center: usize, halfwidth: usize) -> usize {
    let lo = center.saturating_sub(halfwidth);
    let hi = (center + halfwidth).min(samples.len() - 1);
    let mut best = lo;
    for i in lo..=hi {
        if samples[i] > samples[best] {
            best = i;
        }
    }
    best
}

/// Detect R peaks: square the first difference, average it over 150 ms,
/// and mark excursions above an adaptive threshold (a factor times the
/// running 2 s median of that integrated signal, floored at a fraction of
/// its global maximum). Each excursion yields one candidate, snapped to
/// the local maximum of the raw signal; candidates closer than the
/// refractory period are merged in favor of the taller one.
///
/// Returns an empty list when nothing crosses the threshold (flat input).
pub fn detect_r_peaks(record: &EcgRecord, cfg: &DetectorConfig) -> Result<Vec<usize>, IngestError> {
    validate(record)?;
    let x = &record.samples_mv;
    let n = x.len();
    let fs = record.fs;

    // Integrated squared slope.
    let mut sq = vec![0.0f64; n];
    for i in 0..n - 1 {
        let d = x[i + 1] - x[i];
        sq[i] = d * d;
    }
    let integ = moving_average(&sq, ms_to_samples(INTEGRATION_MS, fs) / 2);

    let global_max = integ.iter().copied().fold(0.0f64, f64::max);
    if global_max <= 0.0 {
        return Ok(Vec::new());
    }
    let floor = THRESHOLD_FLOOR_FRACTION * global_max;

    // Running median, evaluated on a coarse grid and interpolated.
    let stride = ms_to_samples(MEDIAN_STRIDE_MS, fs).max(1);
    let half_win = ms_to_samples(MEDIAN_WINDOW_MS / 2.0, fs).max(1);
    let n_eval = (n - 1) / stride + 1;
    let mut medians = Vec::with_capacity(n_eval);
    let mut scratch = Vec::new();
    for k in 0..n_eval {
        let c = k * stride;
        let lo = c.saturating_sub(half_win);
        let hi = (c + half_win + 1).min(n);
        scratch.clear();
        scratch.extend_from_slice(&integ[lo..hi]);
        medians.push(median_mut(&mut scratch));
    }
    let threshold_at = |i: usize| -> f64 {
        let k = i / stride;
        let t = if k + 1 < n_eval {
            let frac = (i - k * stride) as f64 / stride as f64;
            medians[k] * (1.0 - frac) + medians[k + 1] * frac
        } else {
            medians[n_eval - 1]
        };
        (cfg.derivative_threshold_factor * t).max(floor)
    };

    // One candidate per above-threshold excursion: the excursion's
    // strongest integrated sample.
    let mut candidates: Vec<usize> = Vec::new();
    let mut in_region = false;
    let mut region_best = 0usize;
    for i in 0..n {
        if integ[i] > threshold_at(i) {
            if !in_region {
                in_region = true;
                region_best = i;
            } else if integ[i] > integ[region_best] {
                region_best = i;
            }
        } else if in_region {
            in_region = false;
            candidates.push(region_best);
        }
    }
    if in_region {
        candidates.push(region_best);
    }

    // Snap each candidate to the raw local maximum, iterated to a fixed
    // point so the result is a local max of its own window.
    let hw = ms_to_samples(cfg.qrs_search_halfwidth_ms, fs);
    let mut peaks: Vec<usize> = candidates
        .into_iter()
        .map(|c| {
            let mut p = c;
            for _ in 0..10 {
                let q = local_argmax(x, p, hw);
                if q == p {
                    break;
                }
                p = q;
            }
            p
        })
        .collect();
    peaks.sort_unstable();
    peaks.dedup();

    // Refractory merge: among detections closer than the refractory
    // period, keep the taller (earlier on ties); repeat until stable since
    // removals change adjacencies.
    let refractory = ms_to_samples(cfg.refractory_ms, fs);
    loop {
        let mut removed = false;
        let mut kept: Vec<usize> = Vec::with_capacity(peaks.len());
        for &p in &peaks {
            match kept.last() {
                Some(&q) if p - q < refractory => {
                    if x[p] > x[q] {
                        *kept.last_mut().unwrap() = p;
                    }
                    removed = true;
                }
                _ => kept.push(p),
            }
        }
        peaks = kept;
        if !removed {
            break;
        }
    }
    Ok(peaks)
}

// ---------------------------------------------------------------------------
// Per-beat measurement
// ---------------------------------------------------------------------------

/// QRS onset and offset: from the peak of the 20 ms-smoothed squared
/// derivative, walk outward until it decays below 5% of that local
/// maximum, capped at the search half-width. Errors when the search window
/// would leave the record.
pub fn locate_qrs_bounds(
    record: &EcgRecord,
    r_peak: usize,
    cfg: &DetectorConfig,
) -> Result<(usize, usize), IngestError> {
    let n = record.samples_mv.len();
    let hw = ms_to_samples(cfg.qrs_search_halfwidth_ms, record.fs);
    if r_peak < hw || r_peak + hw >= n {
        return Err(IngestError::PeakNearBoundary { r_peak });
    }
    let lo = r_peak - hw;
    let hi = r_peak + hw;
    let x = &record.samples_mv;
    let mut sq = vec![0.0f64; hi - lo + 1];
    for i in lo..=hi {
        let prev = x[i.saturating_sub(1)];
        let next = x[(i + 1).min(n - 1)];
        let d = 0.5 * (next - prev);
        sq[i - lo] = d * d;
    }
    let sm = moving_average(&sq, ms_to_samples(BOUND_SMOOTH_MS / 2.0, record.fs).max(1));
    let mut peak = r_peak - lo;
    for (i, &v) in sm.iter().enumerate() {
        if v > sm[peak] {
            peak = i;
        }
    }
    let cutoff = BOUND_DECAY_FRACTION * sm[peak];
    let mut a = peak;
    while a > 0 && sm[a] >= cutoff {
        a -= 1;
    }
    let mut b = peak;
    while b + 1 < sm.len() && sm[b] >= cutoff {
        b += 1;
    }
    // The smoothed envelope peak sits within the QRS, so the walk brackets
    // the R apex; clamp defensively so onset < r_peak < offset always holds.
    let onset = (lo + a).min(r_peak - 1);
    let offset = (lo + b).max(r_peak + 1);
    Ok((onset, offset))
}

/// Max minus min of the signal over `[onset, offset]`.
///
/// # Panics
/// When the window is empty or leaves the record.
pub fn compute_r_amplitude(record: &EcgRecord, onset: usize, offset: usize) -> f64 {
    assert!(onset < offset && offset < record.samples_mv.len());
    let w = &record.samples_mv[onset..=offset];
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = w.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// Local baseline: mean of the signal at the QRS onset and offset.
///
/// # Panics
/// When either index leaves the record.
pub fn compute_baseline(record: &EcgRecord, onset: usize, offset: usize) -> f64 {
    0.5 * (record.samples_mv[onset] + record.samples_mv[offset])
}

/// T amplitude: maximum of the signal over the window from 15% to 50% of
/// the preceding RR interval after the R peak (inclusive bounds, rounded to
/// the nearest sample), minus the local baseline. Errors when the window
/// runs past the record end.
pub fn compute_t_amplitude(
    record: &EcgRecord,
    r_peak: usize,
    preceding_rr_samples: f64,
    baseline_mv: f64,
) -> Result<f64, IngestError> {
    let n = record.samples_mv.len();
    let lo = (r_peak as f64 + T_WINDOW_FRACTIONS.0 * preceding_rr_samples).round() as usize;
    let hi = (r_peak as f64 + T_WINDOW_FRACTIONS.1 * preceding_rr_samples).round() as usize;
    if hi >= n {
        return Err(IngestError::WindowPastEnd { end: hi, len: n });
    }
    let max = record.samples_mv[lo..=hi]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(max - baseline_mv)
}

// ---------------------------------------------------------------------------
// RR cleaning
// ---------------------------------------------------------------------------

/// Replace implausible RR values by the median of their enclosing block of
/// `clean_block` adjacent beats. Block medians are computed from the
/// original values; a short final block uses its own median. Errors when an
/// entire block is out of range, which marks the recording unusable.
pub fn clean_rr(rr_ms: &[f64], cfg: &DetectorConfig) -> Result<Vec<f64>, IngestError> {
    if rr_ms.is_empty() {
        return Err(IngestError::EmptyRr);
    }
    let (lo, hi) = cfg.rr_normal_range;
    let block = cfg.clean_block.max(1);
    let mut out = Vec::with_capacity(rr_ms.len());
    let mut scratch = Vec::with_capacity(block);
    for (bi, chunk) in rr_ms.chunks(block).enumerate() {
        if chunk.iter().all(|&v| v < lo || v > hi) {
            return Err(IngestError::BlockOutOfRange { block_index: bi });
        }
        scratch.clear();
        scratch.extend_from_slice(chunk);
        let med = median_mut(&mut scratch);
        for &v in chunk {
            out.push(if v < lo || v > hi { med } else { v });
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Full extraction
// ---------------------------------------------------------------------------

/// Run the whole chain on one record: detect peaks, measure every beat,
/// clean the RR series. Beats whose windows fail are kept but flagged
/// invalid (the first beat always is: it has no preceding interval).
/// Errors when nothing is detected or more than 5% of beats are invalid.
pub fn extract_beat_series(
    record: &EcgRecord,
    cfg: &DetectorConfig,
    subject_id: &str,
) -> Result<BeatSeries, IngestError> {
    let peaks = detect_r_peaks(record, cfg)?;
    if peaks.is_empty() {
        return Err(IngestError::NoBeatsDetected);
    }
    let n = peaks.len();
    let to_ms = 1000.0 / record.fs;

    // Measured intervals drive the T windows; the cleaned ones are what the
    // series reports, so an interval doubled by a dropped beat is repaired
    // without distorting that beat's own measurement window.
    let measured: Vec<f64> = (1..n).map(|k| (peaks[k] - peaks[k - 1]) as f64 * to_ms).collect();
    let cleaned = if n >= 2 { clean_rr(&measured, cfg)? } else { Vec::new() };

    let mut beats = Vec::with_capacity(n);
    let mut invalid = 0usize;
    for k in 0..n {
        let r_peak = peaks[k];
        let bounds = locate_qrs_bounds(record, r_peak, cfg).ok();
        let (r_amp, baseline) = match bounds {
            Some((on, off)) => (
                Some(compute_r_amplitude(record, on, off)),
                Some(compute_baseline(record, on, off)),
            ),
            None => (None, None),
        };
        let t_amp = match (k, baseline) {
            (0, _) | (_, None) => None,
            (_, Some(base)) => {
                let rr_samples = measured[k - 1] / to_ms;
                compute_t_amplitude(record, r_peak, rr_samples, base).ok()
            }
        };
        let rr = if k > 0 { Some(cleaned[k - 1]) } else { None };
        let valid = bounds.is_some() && r_amp.is_some() && t_amp.is_some() && rr.is_some();
        if !valid {
            invalid += 1;
        }
        beats.push(Beat {
            r_peak,
            qrs_onset: bounds.map(|b| b.0),
            qrs_offset: bounds.map(|b| b.1),
            r_amplitude_mv: r_amp,
            t_amplitude_mv: t_amp,
            rr_ms: rr,
            valid,
        });
    }
    let invalid_fraction = invalid as f64 / n as f64;
    if invalid_fraction > MAX_INVALID_FRACTION {
        return Err(IngestError::TooManyInvalid { invalid, total: n });
    }
    Ok(BeatSeries {
        subject_id: String::from(subject_id),
        beats,
        invalid_fraction,
    })
}
