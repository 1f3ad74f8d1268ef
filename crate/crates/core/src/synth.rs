//! Deterministic synthetic data: amplitude cohorts drawn from the
//! multiplicative subject model, and sampled single-lead ECG records built
//! from Gaussian wavelets with ground-truth beat annotations.
//!
//! Everything is reproducible: a model seed plus a fixed stream-splitting
//! rule (`splitmix64` over seed and stream index) determines every draw, so
//! identical models generate bitwise identical data on every platform.
//! Waveform realism is a non-goal; the records exist to give the ingest
//! stage a signal whose true beat locations, QRS supports and amplitudes
//! are known exactly.

use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::linalg::moving_average;

use core::f64::consts::PI;

// ---------------------------------------------------------------------------
// Seeded draws
// ---------------------------------------------------------------------------

/// splitmix64 finalizer; mixes a seed and a stream index into an
/// independent-looking substream seed.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Substream `index` of a model seed. Subject `i` of a cohort draws from
/// stream `i`; auxiliary streams (record noise, timing jitter) use indices
/// clear of any plausible subject count.
fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ index.wrapping_mul(0xA076_1D64_78BD_642F)))
}

/// Uniform draw in [0, 1) with 53 random bits.
fn uniform01(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
}

/// Standard normal by Box-Muller; consumes two uniforms per call.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = 1.0 - uniform01(rng); // in (0, 1]
    let u2 = uniform01(rng);
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Student t with 5 degrees of freedom: normal over sqrt(chi^2_5 / 5).
fn student_t5(rng: &mut ChaCha8Rng) -> f64 {
    let z = standard_normal(rng);
    let mut chi2 = 0.0;
    for _ in 0..5 {
        let g = standard_normal(rng);
        chi2 += g * g;
    }
    z / (chi2 / 5.0).sqrt()
}

// ---------------------------------------------------------------------------
// Amplitude cohorts
// ---------------------------------------------------------------------------

/// Mean templates for synthetic amplitude series, defined on beat grid 1..=m.
#[derive(Debug, Clone)]
pub enum MuTemplate {
    /// Flat profile.
    Constant { level: f64 },
    /// Piecewise-linear V: `level` at both edges, `level * depth_ratio` at
    /// the acme beat (1-based).
    VShape {
        level: f64,
        acme: usize,
        depth_ratio: f64,
    },
    /// Raised-cosine excursion on a flat level. Positive `amplitude` is a
    /// bump, negative a dip, both as a fraction of `level`; the excursion
    /// spans `center - half_width ..= center + half_width`.
    Excursion {
        level: f64,
        center: usize,
        half_width: usize,
        amplitude: f64,
    },
}

impl MuTemplate {
    /// Evaluate the template on the beat grid `1..=m`.
    pub fn evaluate(&self, m: usize) -> Vec<f64> {
        match *self {
            MuTemplate::Constant { level } => vec![level; m],
            MuTemplate::VShape {
                level,
                acme,
                depth_ratio,
            } => (1..=m)
                .map(|t| {
                    let frac = if t <= acme {
                        (acme - t) as f64 / (acme - 1).max(1) as f64
                    } else {
                        (t - acme) as f64 / (m - acme).max(1) as f64
                    };
                    level * (depth_ratio + (1.0 - depth_ratio) * frac)
                })
                .collect(),
            MuTemplate::Excursion {
                level,
                center,
                half_width,
                amplitude,
            } => (1..=m)
                .map(|t| {
                    let d = t.abs_diff(center) as f64;
                    let hw = half_width.max(1) as f64;
                    let w = if d <= hw {
                        0.5 * (1.0 + (PI * d / hw).cos())
                    } else {
                        0.0
                    };
                    level * (1.0 + amplitude * w)
                })
                .collect(),
        }
    }
}

/// Noise law for the additive per-beat fluctuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseLaw {
    Gaussian,
    /// Student t, 5 degrees of freedom. `sigma` acts as the scale parameter
    /// of the law, not its standard deviation.
    StudentT5,
}

/// Noise scale, constant or tied to the local mean level.
#[derive(Debug, Clone, Copy)]
pub enum SigmaProfile {
    Constant(f64),
    /// sigma(t) = factor * mu(t).
    ProportionalToMean(f64),
}

/// Generative model for one cohort channel: X_i(t) = U_i (mu(t) + Z_i(t))
/// with lognormal subject scale U_i and seeded noise Z.
#[derive(Debug, Clone)]
pub struct CohortModel {
    /// Series length in beats.
    pub m: usize,
    pub mu: MuTemplate,
    /// Log-scale standard deviation of the lognormal subject factor U_i
    /// (median 1).
    pub u_sigma: f64,
    pub noise: NoiseLaw,
    pub sigma: SigmaProfile,
    pub seed: u64,
}

/// Ground truth accompanying a generated cohort.
#[derive(Debug, Clone)]
pub struct CohortTruth {
    /// The template evaluated on the grid.
    pub mu: Vec<f64>,
    /// Subject scale factors.
    pub u: Vec<f64>,
    /// Number of values that had to be redrawn to stay positive. Zero in
    /// any reasonable regime; nonzero signals sigma is large for the mean.
    pub resamples: usize,
}

#[derive(Debug, Clone)]
pub struct SyntheticCohort {
    /// One row per subject, each of length m.
    pub rows: Vec<Vec<f64>>,
    pub truth: CohortTruth,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SynthError {
    /// m < 2 or n == 0.
    EmptyRequest,
    /// The mean template dips to zero or below somewhere.
    NonPositiveMean { beat: usize },
    /// Negative or non-finite scale parameters.
    BadScale,
    /// A value could not be made positive within the resampling budget.
    NoisePreventsPositivity { subject: usize, beat: usize },
    /// ECG generation: duration too short to hold a single beat.
    DurationTooShort { seconds: f64 },
    /// ECG generation: non-positive sampling rate, resolution or interval.
    BadEcgParameter,
}

impl core::fmt::Display for SynthError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SynthError::EmptyRequest => write!(f, "need at least 2 beats and 1 subject"),
            SynthError::NonPositiveMean { beat } => {
                write!(f, "mean template is not positive at beat {beat}")
            }
            SynthError::BadScale => write!(f, "scale parameters must be finite and nonnegative"),
            SynthError::NoisePreventsPositivity { subject, beat } => write!(
                f,
                "could not draw a positive value for subject {subject} at beat {beat}; sigma is too large for the mean level"
            ),
            SynthError::DurationTooShort { seconds } => {
                write!(f, "duration {seconds} s is too short, need at least 2 s")
            }
            SynthError::BadEcgParameter => {
                write!(f, "sampling rate, resolution and intervals must be positive")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SynthError {}

/// Draw an n-subject cohort from the model. Values that come out
/// nonpositive are redrawn (bounded retries); the count of such redraws is
/// reported in the truth block so callers can warn.
pub fn gen_amplitude_cohort(model: &CohortModel, n: usize) -> Result<SyntheticCohort, SynthError> {
    if model.m < 2 || n == 0 {
        return Err(SynthError::EmptyRequest);
    }
    if !model.u_sigma.is_finite() || model.u_sigma < 0.0 {
        return Err(SynthError::BadScale);
    }
    let mu = model.mu.evaluate(model.m);
    if let Some(b) = mu.iter().position(|&v| !(v > 0.0)) {
        return Err(SynthError::NonPositiveMean { beat: b + 1 });
    }
    let sigma: Vec<f64> = match model.sigma {
        SigmaProfile::Constant(s) => {
            if !s.is_finite() || s < 0.0 {
                return Err(SynthError::BadScale);
            }
            vec![s; model.m]
        }
        SigmaProfile::ProportionalToMean(f) => {
            if !f.is_finite() || f < 0.0 {
                return Err(SynthError::BadScale);
            }
            mu.iter().map(|&v| f * v).collect()
        }
    };

    let mut rows = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    let mut resamples = 0usize;
    for subject in 0..n {
        let mut rng = stream(model.seed, subject as u64);
        let ui = (model.u_sigma * standard_normal(&mut rng)).exp();
        let mut row = vec![0.0; model.m];
        for t in 0..model.m {
            let mut tries = 0;
            let value = loop {
                let eps = match model.noise {
                    NoiseLaw::Gaussian => standard_normal(&mut rng),
                    NoiseLaw::StudentT5 => student_t5(&mut rng),
                };
                let v = ui * (mu[t] + sigma[t] * eps);
                if v > 0.0 {
                    break v;
                }
                resamples += 1;
                tries += 1;
                if tries >= 1000 {
                    return Err(SynthError::NoisePreventsPositivity {
                        subject,
                        beat: t + 1,
                    });
                }
            };
            row[t] = value;
        }
        rows.push(row);
        u.push(ui);
    }
    Ok(SyntheticCohort {
        rows,
        truth: CohortTruth { mu, u, resamples },
    })
}

// ---------------------------------------------------------------------------
// Synthetic ECG records
// ---------------------------------------------------------------------------

/// One Gaussian wavelet of the beat template: a bump of `amplitude_mv`
/// millivolts, `sigma_ms` wide, centered `offset_ms` from the R apex.
#[derive(Debug, Clone, Copy)]
pub struct WaveSpec {
    pub offset_ms: f64,
    pub sigma_ms: f64,
    pub amplitude_mv: f64,
}

/// Beat morphology. P, Q, R and S sit at fixed offsets from the R apex; the
/// repolarization wave is anchored at a fraction of the preceding interbeat
/// interval so it always falls inside the downstream measurement window.
#[derive(Debug, Clone)]
pub struct BeatTemplate {
    pub p: WaveSpec,
    pub q: WaveSpec,
    pub r: WaveSpec,
    pub s: WaveSpec,
    /// T apex position as a fraction of the preceding RR interval.
    pub t_frac_of_rr: f64,
    pub t_sigma_ms: f64,
    pub t_amplitude_mv: f64,
}

impl Default for BeatTemplate {
    fn default() -> Self {
        // Q/R/S widths chosen so the waves decay to nothing a few
        // milliseconds inside the smoothed-derivative support edge: the
        // signal is genuinely flat where the QRS baseline gets sampled, so
        // a reader's support estimate being a sample or two off does not
        // move the baseline.
        BeatTemplate {
            p: WaveSpec { offset_ms: -160.0, sigma_ms: 25.0, amplitude_mv: 0.12 },
            q: WaveSpec { offset_ms: -24.0, sigma_ms: 4.5, amplitude_mv: -0.15 },
            r: WaveSpec { offset_ms: 0.0, sigma_ms: 11.0, amplitude_mv: 2.3 },
            s: WaveSpec { offset_ms: 24.0, sigma_ms: 4.5, amplitude_mv: -0.25 },
            t_frac_of_rr: 0.30,
            t_sigma_ms: 45.0,
            t_amplitude_mv: 0.6,
        }
    }
}

/// Interbeat interval schedule.
#[derive(Debug, Clone)]
pub enum RrProfile {
    Constant { rr_ms: f64 },
    /// Linear descent from `rest_ms` to `acme_ms` at half the record
    /// duration, then symmetric recovery.
    VShape { rest_ms: f64, acme_ms: f64 },
    /// Explicit per-interval values, recycled if the record outlasts them.
    Explicit(Vec<f64>),
}

impl RrProfile {
    fn at(&self, time_s: f64, duration_s: f64, index: usize) -> f64 {
        match self {
            RrProfile::Constant { rr_ms } => *rr_ms,
            RrProfile::VShape { rest_ms, acme_ms } => {
                let tau = (time_s / duration_s).clamp(0.0, 1.0);
                let v = 1.0 - (2.0 * tau - 1.0).abs();
                rest_ms + (acme_ms - rest_ms) * v
            }
            RrProfile::Explicit(values) => values[index % values.len()],
        }
    }
}

/// Per-beat multiplier applied to wave amplitudes.
#[derive(Debug, Clone)]
pub enum AmplitudeProfile {
    Constant(f64),
    /// Raised-cosine excursion against a flat base, centered on a fixed
    /// beat ordinal (0-based, in generation order).
    Excursion {
        base: f64,
        center_beat: usize,
        half_width: usize,
        amplitude: f64,
    },
    /// Same, but centered `offset_beats` after the realized acme (the beat
    /// with the smallest interbeat interval).
    ExcursionAfterAcme {
        base: f64,
        offset_beats: usize,
        half_width: usize,
        amplitude: f64,
    },
}

impl AmplitudeProfile {
    fn value(&self, beat: usize, acme_beat: usize) -> f64 {
        let (base, center, hw, amp) = match *self {
            AmplitudeProfile::Constant(base) => return base,
            AmplitudeProfile::Excursion {
                base,
                center_beat,
                half_width,
                amplitude,
            } => (base, center_beat, half_width, amplitude),
            AmplitudeProfile::ExcursionAfterAcme {
                base,
                offset_beats,
                half_width,
                amplitude,
            } => (base, acme_beat + offset_beats, half_width, amplitude),
        };
        let d = beat.abs_diff(center) as f64;
        let hw = hw.max(1) as f64;
        if d <= hw {
            base * (1.0 + amp * 0.5 * (1.0 + (PI * d / hw).cos()))
        } else {
            base
        }
    }
}

/// Full description of a synthetic record.
#[derive(Debug, Clone)]
pub struct EcgModel {
    /// Sampling rate in samples per second.
    pub fs: f64,
    /// Quantization step in millivolts.
    pub resolution_mv: f64,
    pub template: BeatTemplate,
    pub rr: RrProfile,
    /// Uniform jitter added to each interbeat interval, in milliseconds
    /// (peak to peak).
    pub rr_jitter_ms: f64,
    /// Multiplier on Q, R and S amplitudes, per beat.
    pub r_scale: AmplitudeProfile,
    /// Multiplier on the T amplitude, per beat.
    pub t_scale: AmplitudeProfile,
    /// Peak-to-peak amplitude of uniform measurement noise, in millivolts.
    /// Drawn from [-noise_mv/2, +noise_mv/2], so a measured extremum moves
    /// by at most noise_mv/2 and a max-min spread by at most noise_mv.
    pub noise_mv: f64,
    pub seed: u64,
    /// Beat ordinals (0-based) silently left out of the signal; their
    /// annotations are omitted too, as if the heart skipped them.
    pub deleted_beats: Vec<usize>,
}

impl EcgModel {
    /// A record at 500 samples/s quantized to 2.441 microvolt steps, with
    /// light timing jitter and measurement noise.
    pub fn new(rr: RrProfile, seed: u64) -> EcgModel {
        EcgModel {
            fs: 500.0,
            resolution_mv: 0.002441,
            template: BeatTemplate::default(),
            rr,
            rr_jitter_ms: 10.0,
            r_scale: AmplitudeProfile::Constant(1.0),
            t_scale: AmplitudeProfile::Constant(1.0),
            noise_mv: 0.01,
            seed,
            deleted_beats: Vec::new(),
        }
    }
}

/// Ground truth for one emitted beat. Sample indices refer to the noiseless
/// signal; design amplitudes are measured from it, so quantization and
/// noise are the only sources of disagreement with a perfect reader.
#[derive(Debug, Clone)]
pub struct BeatAnnotation {
    pub r_peak: usize,
    pub qrs_onset: usize,
    pub qrs_offset: usize,
    /// Sample of the repolarization apex; absent for the first beat, whose
    /// preceding interval is undefined.
    pub t_apex: Option<usize>,
    /// Height of the QRS excursion (max minus min over the support), mV.
    pub r_amplitude_mv: f64,
    /// T apex height over the onset/offset baseline, mV; absent for the
    /// first beat.
    pub t_amplitude_mv: Option<f64>,
    /// Interval from the previous emitted beat, ms.
    pub rr_ms: Option<f64>,
}

/// A generated record with its annotations.
#[derive(Debug, Clone)]
pub struct SyntheticEcg {
    /// Quantized samples in millivolts.
    pub samples_mv: Vec<f64>,
    pub fs: f64,
    pub resolution_mv: f64,
    pub annotations: Vec<BeatAnnotation>,
    /// Ordinal (into `annotations`) of the emitted beat with the smallest
    /// realized interval.
    pub acme_beat: usize,
}

/// Generate a record of `duration_s` seconds.
pub fn gen_ecg(model: &EcgModel, duration_s: f64) -> Result<SyntheticEcg, SynthError> {
    if !(duration_s >= 2.0) {
        return Err(SynthError::DurationTooShort { seconds: duration_s });
    }
    if !(model.fs > 0.0) || !(model.resolution_mv > 0.0) || model.noise_mv < 0.0 {
        return Err(SynthError::BadEcgParameter);
    }

    // Beat schedule. Timing jitter uses its own stream so that changing the
    // noise level never moves the beats.
    let mut jitter_rng = stream(model.seed, 0xBEA7);
    let mut beat_times: Vec<f64> = Vec::new();
    let mut beat_rrs: Vec<f64> = Vec::new(); // interval PRECEDING each beat
    let lead_in = 0.5;
    let tail = 0.7;
    let mut t = lead_in;
    let mut index = 0usize;
    while t <= duration_s - tail {
        beat_times.push(t);
        let base = model.rr.at(t, duration_s, index);
        let jitter = (uniform01(&mut jitter_rng) - 0.5) * model.rr_jitter_ms;
        let rr = base + jitter;
        if !(rr > 0.0) {
            return Err(SynthError::BadEcgParameter);
        }
        beat_rrs.push(rr);
        t += rr / 1000.0;
        index += 1;
    }
    if beat_times.is_empty() {
        return Err(SynthError::DurationTooShort { seconds: duration_s });
    }

    // Realized acme over the signal-carrying beats.
    let emitted: Vec<usize> = (0..beat_times.len())
        .filter(|i| !model.deleted_beats.contains(i))
        .collect();
    if emitted.is_empty() {
        return Err(SynthError::DurationTooShort { seconds: duration_s });
    }
    let acme_ordinal_all = {
        let mut best = 0usize;
        for i in 1..beat_times.len() {
            if beat_rrs[i] < beat_rrs[best] {
                best = i;
            }
        }
        best
    };

    let n_samples = (duration_s * model.fs) as usize;
    let mut clean = vec![0.0f64; n_samples];
    let dt_ms = 1000.0 / model.fs;

    // Additive wavelet support cut at 5 sigma; beyond that the contribution
    // is below a millionth of the wave height.
    let add_wave = |signal: &mut Vec<f64>, center_ms: f64, sigma_ms: f64, amp: f64| {
        let lo = ((center_ms - 5.0 * sigma_ms) / dt_ms).floor().max(0.0) as usize;
        let hi = (((center_ms + 5.0 * sigma_ms) / dt_ms).ceil() as usize).min(n_samples - 1);
        for i in lo..=hi {
            let d = (i as f64 * dt_ms - center_ms) / sigma_ms;
            signal[i] += amp * (-0.5 * d * d).exp();
        }
    };

    for (k, &bt) in beat_times.iter().enumerate() {
        if model.deleted_beats.contains(&k) {
            continue;
        }
        let center_ms = bt * 1000.0;
        let rs = model.r_scale.value(k, acme_ordinal_all);
        let ts = model.t_scale.value(k, acme_ordinal_all);
        let tpl = &model.template;
        add_wave(&mut clean, center_ms + tpl.p.offset_ms, tpl.p.sigma_ms, tpl.p.amplitude_mv);
        for w in [&tpl.q, &tpl.r, &tpl.s] {
            add_wave(&mut clean, center_ms + w.offset_ms, w.sigma_ms, w.amplitude_mv * rs);
        }
        // T anchored to the preceding interval; the first beat borrows its
        // own following interval so the wave exists even if unmeasured.
        let rr_prev = if k > 0 { beat_rrs[k] } else { beat_rrs[0] };
        let t_center = center_ms + tpl.t_frac_of_rr * rr_prev;
        add_wave(&mut clean, t_center, tpl.t_sigma_ms, tpl.t_amplitude_mv * ts);
    }

    // Annotations from the clean signal.
    let qrs_half_ms = 120.0;
    let mut annotations = Vec::with_capacity(emitted.len());
    let mut prev_time: Option<f64> = None;
    for &k in &emitted {
        let center = beat_times[k] * 1000.0;
        let c_idx = (center / dt_ms).round() as usize;
        let search = (qrs_half_ms / dt_ms).round() as usize;
        let lo = c_idx.saturating_sub(search / 4);
        let hi = (c_idx + search / 4).min(n_samples - 1);
        let mut r_peak = lo;
        for i in lo..=hi {
            if clean[i] > clean[r_peak] {
                r_peak = i;
            }
        }
        let (onset, offset) = clean_qrs_support(&clean, r_peak, search, model.fs);
        let mut r_min = clean[onset];
        let mut r_max = clean[onset];
        for i in onset..=offset {
            r_min = r_min.min(clean[i]);
            r_max = r_max.max(clean[i]);
        }
        let baseline = 0.5 * (clean[onset] + clean[offset]);
        let rr_ms = prev_time.map(|p| (beat_times[k] - p) * 1000.0);
        let (t_apex, t_amplitude) = match rr_ms {
            None => (None, None),
            Some(rr) => {
                let w_lo = (r_peak as f64 + 0.15 * rr / dt_ms).round() as usize;
                let w_hi = ((r_peak as f64 + 0.50 * rr / dt_ms).round() as usize)
                    .min(n_samples - 1);
                let mut apex = w_lo;
                for i in w_lo..=w_hi {
                    if clean[i] > clean[apex] {
                        apex = i;
                    }
                }
                (Some(apex), Some(clean[apex] - baseline))
            }
        };
        annotations.push(BeatAnnotation {
            r_peak,
            qrs_onset: onset,
            qrs_offset: offset,
            t_apex,
            r_amplitude_mv: r_max - r_min,
            t_amplitude_mv: t_amplitude,
            rr_ms,
        });
        prev_time = Some(beat_times[k]);
    }

    // Acme ordinal among EMITTED beats, judged on emitted intervals.
    let mut acme_beat = 0usize;
    for (i, ann) in annotations.iter().enumerate() {
        if let (Some(rr), Some(best)) = (ann.rr_ms, annotations[acme_beat].rr_ms) {
            if rr < best {
                acme_beat = i;
            }
        } else if ann.rr_ms.is_some() && annotations[acme_beat].rr_ms.is_none() {
            acme_beat = i;
        }
    }

    // Noise and quantization.
    let mut noise_rng = stream(model.seed, 0xEC60);
    let mut samples = clean;
    if model.noise_mv > 0.0 {
        for v in samples.iter_mut() {
            *v += (uniform01(&mut noise_rng) - 0.5) * model.noise_mv;
        }
    }
    let res = model.resolution_mv;
    for v in samples.iter_mut() {
        *v = (*v / res).round() * res;
    }

    Ok(SyntheticEcg {
        samples_mv: samples,
        fs: model.fs,
        resolution_mv: res,
        annotations,
        acme_beat,
    })
}

/// True QRS support on the clean signal: walk outward from the peak of the
/// smoothed squared derivative until it decays below 5% of its local
/// maximum, capped at `search` samples. Independent of the ingest stage,
/// which applies the same definition to the noisy, quantized record.
fn clean_qrs_support(clean: &[f64], r_peak: usize, search: usize, fs: f64) -> (usize, usize) {
    let n = clean.len();
    let lo = r_peak.saturating_sub(search);
    let hi = (r_peak + search).min(n - 1);
    let mut sq = vec![0.0f64; hi - lo + 1];
    for i in lo..=hi {
        let prev = clean[i.saturating_sub(1)];
        let next = clean[(i + 1).min(n - 1)];
        let d = 0.5 * (next - prev);
        sq[i - lo] = d * d;
    }
    // 20 ms moving average bridges the derivative zero at the apex.
    let half = ((0.010 * fs).round() as usize).max(1);
    let sm = moving_average(&sq, half);
    let center = r_peak - lo;
    let mut peak = center;
    for (i, &v) in sm.iter().enumerate() {
        if v > sm[peak] {
            peak = i;
        }
    }
    let cutoff = 0.05 * sm[peak];
    let mut a = peak;
    while a > 0 && sm[a] >= cutoff {
        a -= 1;
    }
    let mut b = peak;
    while b + 1 < sm.len() && sm[b] >= cutoff {
        b += 1;
    }
    (lo + a, lo + b)
}
