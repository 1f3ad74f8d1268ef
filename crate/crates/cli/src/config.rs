//! Pipeline configuration: a flat `key = value` file with CLI `--set`
//! overrides. Every value is validated against the preconditions of the
//! stage it feeds, and any violation names the offending key.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ecgtrend_core::ingest::DetectorConfig;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config key `{key}`: {reason}")]
    BadValue { key: String, reason: String },
    #[error("unknown config key `{key}`")]
    UnknownKey { key: String },
    #[error("config line {line}: expected `key = value`, got `{text}`")]
    BadLine { line: usize, text: String },
    #[error("cannot read config file {path}: {source}")]
    Unreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// What `simulate` writes: per-beat measurement tables, or raw ECG records
/// that must go through `ingest` first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    Beats,
    Ecg,
}

/// Noise law for the per-beat amplitude fluctuations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseLawKind {
    Gaussian,
    StudentT5,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Registered window length in beats.
    pub m: usize,
    /// 1-based position of the acme inside the window; must be m/2.
    pub acme_position: usize,
    /// Spline breakpoints over the window (basis size = breakpoints + 2).
    pub n_breakpoints: usize,
    /// Local-fit kernel bandwidth in beats.
    pub sizer_h: f64,
    /// Local-fit grid stride in beats.
    pub sizer_stride: usize,
    /// Two-sided band level.
    pub alpha: f64,
    /// Block length for median replacement of implausible RR values.
    pub clean_block: usize,
    pub rr_low_ms: f64,
    pub rr_high_ms: f64,
    /// Detector threshold as a multiple of the running median response.
    pub detector_factor: f64,
    pub refractory_ms: f64,
    pub qrs_halfwidth_ms: f64,
    /// Moving-average width (beats) applied to RR before locating the
    /// acme; 0 or 1 means none.
    pub acme_smooth_window: usize,
    /// Accepted per-subject series lengths, in beats.
    pub series_min_len: usize,
    pub series_max_len: usize,
    /// ADC quantization step, mV.
    pub resolution_mv: f64,
    pub seed: u64,

    // Generator settings.
    pub synth_kind: SynthKind,
    pub synth_subjects: usize,
    /// Beats per subject when writing measurement tables.
    pub synth_beats: usize,
    /// Record length when writing raw ECG.
    pub synth_duration_s: f64,
    pub synth_fs: f64,
    pub synth_rr_rest_ms: f64,
    pub synth_rr_acme_ms: f64,
    pub synth_rr_jitter_ms: f64,
    /// RR measurement noise as a fraction of the local mean.
    pub synth_rr_sigma: f64,
    /// Log-scale spread of the per-subject amplitude factor.
    pub synth_u_sigma: f64,
    /// Amplitude noise as a fraction of the local mean.
    pub synth_sigma: f64,
    pub synth_noise_law: NoiseLawKind,
    /// Peak-to-peak ECG measurement noise, mV.
    pub synth_noise_mv: f64,
    pub synth_r_level_mv: f64,
    pub synth_t_level_mv: f64,
    /// Relative depth of the R-channel excursion after the acme.
    pub synth_dip_amplitude: f64,
    pub synth_dip_offset_beats: usize,
    /// Relative height of the T-channel excursion after the acme.
    pub synth_bump_amplitude: f64,
    pub synth_bump_offset_beats: usize,
    pub synth_excursion_half_width: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            m: 1200,
            acme_position: 600,
            n_breakpoints: 135,
            sizer_h: 20.0,
            sizer_stride: 5,
            alpha: 0.05,
            clean_block: 30,
            rr_low_ms: 300.0,
            rr_high_ms: 2000.0,
            detector_factor: 6.0,
            refractory_ms: 200.0,
            qrs_halfwidth_ms: 80.0,
            acme_smooth_window: 51,
            series_min_len: 1500,
            series_max_len: 3000,
            resolution_mv: 0.002441,
            seed: 42,
            synth_kind: SynthKind::Beats,
            synth_subjects: 16,
            synth_beats: 2000,
            synth_duration_s: 960.0,
            synth_fs: 500.0,
            synth_rr_rest_ms: 800.0,
            synth_rr_acme_ms: 400.0,
            synth_rr_jitter_ms: 10.0,
            synth_rr_sigma: 0.005,
            synth_u_sigma: 0.2,
            synth_sigma: 0.05,
            synth_noise_law: NoiseLawKind::Gaussian,
            synth_noise_mv: 0.01,
            synth_r_level_mv: 1.9,
            synth_t_level_mv: 0.55,
            synth_dip_amplitude: -0.05,
            synth_dip_offset_beats: 60,
            synth_bump_amplitude: 0.08,
            synth_bump_offset_beats: 80,
            synth_excursion_half_width: 75,
        }
    }
}

impl PipelineConfig {
    /// Defaults, then the optional file, then `--set` overrides, then
    /// validation of the combined result.
    pub fn load(
        file: Option<&Path>,
        overrides: &[String],
        seed_flag: Option<u64>,
    ) -> Result<PipelineConfig, ConfigError> {
        let mut cfg = PipelineConfig::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Unreadable {
                path: path.display().to_string(),
                source,
            })?;
            for (idx, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::BadLine {
                    line: idx + 1,
                    text: raw.trim().to_string(),
                })?;
                cfg.set(key.trim(), value.trim())?;
            }
        }
        for item in overrides {
            let (key, value) = item.split_once('=').ok_or_else(|| ConfigError::BadLine {
                line: 0,
                text: item.clone(),
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        if let Some(seed) = seed_flag {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
            value.parse().map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                reason: format!("cannot parse `{value}`"),
            })
        }
        match key {
            "m" => self.m = parse(key, value)?,
            "acme_position" => self.acme_position = parse(key, value)?,
            "n_breakpoints" => self.n_breakpoints = parse(key, value)?,
            "sizer_h" => self.sizer_h = parse(key, value)?,
            "sizer_stride" => self.sizer_stride = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "clean_block" => self.clean_block = parse(key, value)?,
            "rr_low_ms" => self.rr_low_ms = parse(key, value)?,
            "rr_high_ms" => self.rr_high_ms = parse(key, value)?,
            "detector_factor" => self.detector_factor = parse(key, value)?,
            "refractory_ms" => self.refractory_ms = parse(key, value)?,
            "qrs_halfwidth_ms" => self.qrs_halfwidth_ms = parse(key, value)?,
            "acme_smooth_window" => self.acme_smooth_window = parse(key, value)?,
            "series_min_len" => self.series_min_len = parse(key, value)?,
            "series_max_len" => self.series_max_len = parse(key, value)?,
            "resolution_mv" => self.resolution_mv = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "synth_kind" => {
                self.synth_kind = match value {
                    "beats" => SynthKind::Beats,
                    "ecg" => SynthKind::Ecg,
                    other => {
                        return Err(ConfigError::BadValue {
                            key: key.to_string(),
                            reason: format!("must be `beats` or `ecg`, got `{other}`"),
                        })
                    }
                }
            }
            "synth_subjects" => self.synth_subjects = parse(key, value)?,
            "synth_beats" => self.synth_beats = parse(key, value)?,
            "synth_duration_s" => self.synth_duration_s = parse(key, value)?,
            "synth_fs" => self.synth_fs = parse(key, value)?,
            "synth_rr_rest_ms" => self.synth_rr_rest_ms = parse(key, value)?,
            "synth_rr_acme_ms" => self.synth_rr_acme_ms = parse(key, value)?,
            "synth_rr_jitter_ms" => self.synth_rr_jitter_ms = parse(key, value)?,
            "synth_rr_sigma" => self.synth_rr_sigma = parse(key, value)?,
            "synth_u_sigma" => self.synth_u_sigma = parse(key, value)?,
            "synth_sigma" => self.synth_sigma = parse(key, value)?,
            "synth_noise_law" => {
                self.synth_noise_law = match value {
                    "gaussian" => NoiseLawKind::Gaussian,
                    "student_t5" => NoiseLawKind::StudentT5,
                    other => {
                        return Err(ConfigError::BadValue {
                            key: key.to_string(),
                            reason: format!("must be `gaussian` or `student_t5`, got `{other}`"),
                        })
                    }
                }
            }
            "synth_noise_mv" => self.synth_noise_mv = parse(key, value)?,
            "synth_r_level_mv" => self.synth_r_level_mv = parse(key, value)?,
            "synth_t_level_mv" => self.synth_t_level_mv = parse(key, value)?,
            "synth_dip_amplitude" => self.synth_dip_amplitude = parse(key, value)?,
            "synth_dip_offset_beats" => self.synth_dip_offset_beats = parse(key, value)?,
            "synth_bump_amplitude" => self.synth_bump_amplitude = parse(key, value)?,
            "synth_bump_offset_beats" => self.synth_bump_offset_beats = parse(key, value)?,
            "synth_excursion_half_width" => self.synth_excursion_half_width = parse(key, value)?,
            _ => return Err(ConfigError::UnknownKey { key: key.to_string() }),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, reason: String| {
            Err(ConfigError::BadValue { key: key.to_string(), reason })
        };
        if self.m < 2 || self.m % 2 != 0 {
            return bad("m", format!("must be even and >= 2, got {}", self.m));
        }
        if self.acme_position != self.m / 2 {
            return bad(
                "acme_position",
                format!("must be m/2 = {}, got {}", self.m / 2, self.acme_position),
            );
        }
        if self.n_breakpoints < 2 {
            return bad("n_breakpoints", format!("must be >= 2, got {}", self.n_breakpoints));
        }
        // Cubic basis size is breakpoints + 2; the grid must be strictly longer.
        if self.n_breakpoints + 2 >= self.m {
            return bad(
                "n_breakpoints",
                format!(
                    "basis size {} must be smaller than the window m = {}",
                    self.n_breakpoints + 2,
                    self.m
                ),
            );
        }
        if !(self.sizer_h > 0.0) {
            return bad("sizer_h", format!("must be positive, got {}", self.sizer_h));
        }
        if self.sizer_stride == 0 {
            return bad("sizer_stride", "must be >= 1, got 0".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha", format!("must be inside (0, 1), got {}", self.alpha));
        }
        if self.clean_block == 0 {
            return bad("clean_block", "must be >= 1, got 0".into());
        }
        if !(self.rr_low_ms > 0.0 && self.rr_low_ms < self.rr_high_ms) {
            return bad(
                "rr_low_ms",
                format!(
                    "need 0 < rr_low_ms < rr_high_ms, got {} and {}",
                    self.rr_low_ms, self.rr_high_ms
                ),
            );
        }
        if !(self.detector_factor > 0.0) {
            return bad("detector_factor", format!("must be positive, got {}", self.detector_factor));
        }
        if !(self.refractory_ms >= 0.0) {
            return bad("refractory_ms", format!("must be >= 0, got {}", self.refractory_ms));
        }
        if !(self.qrs_halfwidth_ms > 0.0) {
            return bad("qrs_halfwidth_ms", format!("must be positive, got {}", self.qrs_halfwidth_ms));
        }
        if self.series_min_len < self.m {
            return bad(
                "series_min_len",
                format!("must be >= m = {} so the window fits, got {}", self.m, self.series_min_len),
            );
        }
        if self.series_max_len < self.series_min_len {
            return bad(
                "series_max_len",
                format!(
                    "must be >= series_min_len = {}, got {}",
                    self.series_min_len, self.series_max_len
                ),
            );
        }
        if !(self.resolution_mv > 0.0) {
            return bad("resolution_mv", format!("must be positive, got {}", self.resolution_mv));
        }
        if self.synth_subjects == 0 {
            return bad("synth_subjects", "must be >= 1, got 0".into());
        }
        if self.synth_beats < 2 {
            return bad("synth_beats", format!("must be >= 2, got {}", self.synth_beats));
        }
        if !(self.synth_duration_s > 1.0) {
            return bad("synth_duration_s", format!("must exceed 1 second, got {}", self.synth_duration_s));
        }
        if !(self.synth_fs > 0.0) {
            return bad("synth_fs", format!("must be positive, got {}", self.synth_fs));
        }
        for (key, v) in [
            ("synth_rr_rest_ms", self.synth_rr_rest_ms),
            ("synth_rr_acme_ms", self.synth_rr_acme_ms),
            ("synth_r_level_mv", self.synth_r_level_mv),
            ("synth_t_level_mv", self.synth_t_level_mv),
        ] {
            if !(v > 0.0) {
                return bad(key, format!("must be positive, got {v}"));
            }
        }
        for (key, v) in [
            ("synth_rr_jitter_ms", self.synth_rr_jitter_ms),
            ("synth_rr_sigma", self.synth_rr_sigma),
            ("synth_u_sigma", self.synth_u_sigma),
            ("synth_sigma", self.synth_sigma),
            ("synth_noise_mv", self.synth_noise_mv),
        ] {
            if !(v >= 0.0) {
                return bad(key, format!("must be >= 0, got {v}"));
            }
        }
        for (key, v) in [
            ("synth_dip_amplitude", self.synth_dip_amplitude),
            ("synth_bump_amplitude", self.synth_bump_amplitude),
        ] {
            if !(v > -1.0) {
                return bad(key, format!("must exceed -1 so the mean stays positive, got {v}"));
            }
        }
        if self.synth_excursion_half_width == 0 {
            return bad("synth_excursion_half_width", "must be >= 1, got 0".into());
        }
        Ok(())
    }

    /// The detector settings this configuration implies.
    pub fn detector(&self) -> DetectorConfig {
        DetectorConfig {
            derivative_threshold_factor: self.detector_factor,
            refractory_ms: self.refractory_ms,
            qrs_search_halfwidth_ms: self.qrs_halfwidth_ms,
            rr_normal_range: (self.rr_low_ms, self.rr_high_ms),
            clean_block: self.clean_block,
        }
    }

    /// Full key/value snapshot in file syntax; embedding it in the manifest
    /// makes every run reproducible from its outputs.
    pub fn snapshot(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            map.insert(k.to_string(), v);
        };
        put("m", self.m.to_string());
        put("acme_position", self.acme_position.to_string());
        put("n_breakpoints", self.n_breakpoints.to_string());
        put("sizer_h", self.sizer_h.to_string());
        put("sizer_stride", self.sizer_stride.to_string());
        put("alpha", self.alpha.to_string());
        put("clean_block", self.clean_block.to_string());
        put("rr_low_ms", self.rr_low_ms.to_string());
        put("rr_high_ms", self.rr_high_ms.to_string());
        put("detector_factor", self.detector_factor.to_string());
        put("refractory_ms", self.refractory_ms.to_string());
        put("qrs_halfwidth_ms", self.qrs_halfwidth_ms.to_string());
        put("acme_smooth_window", self.acme_smooth_window.to_string());
        put("series_min_len", self.series_min_len.to_string());
        put("series_max_len", self.series_max_len.to_string());
        put("resolution_mv", self.resolution_mv.to_string());
        put("seed", self.seed.to_string());
        put(
            "synth_kind",
            match self.synth_kind {
                SynthKind::Beats => "beats".into(),
                SynthKind::Ecg => "ecg".into(),
            },
        );
        put("synth_subjects", self.synth_subjects.to_string());
        put("synth_beats", self.synth_beats.to_string());
        put("synth_duration_s", self.synth_duration_s.to_string());
        put("synth_fs", self.synth_fs.to_string());
        put("synth_rr_rest_ms", self.synth_rr_rest_ms.to_string());
        put("synth_rr_acme_ms", self.synth_rr_acme_ms.to_string());
        put("synth_rr_jitter_ms", self.synth_rr_jitter_ms.to_string());
        put("synth_rr_sigma", self.synth_rr_sigma.to_string());
        put("synth_u_sigma", self.synth_u_sigma.to_string());
        put("synth_sigma", self.synth_sigma.to_string());
        put(
            "synth_noise_law",
            match self.synth_noise_law {
                NoiseLawKind::Gaussian => "gaussian".into(),
                NoiseLawKind::StudentT5 => "student_t5".into(),
            },
        );
        put("synth_noise_mv", self.synth_noise_mv.to_string());
        put("synth_r_level_mv", self.synth_r_level_mv.to_string());
        put("synth_t_level_mv", self.synth_t_level_mv.to_string());
        put("synth_dip_amplitude", self.synth_dip_amplitude.to_string());
        put("synth_dip_offset_beats", self.synth_dip_offset_beats.to_string());
        put("synth_bump_amplitude", self.synth_bump_amplitude.to_string());
        put("synth_bump_offset_beats", self.synth_bump_offset_beats.to_string());
        put("synth_excursion_half_width", self.synth_excursion_half_width.to_string());
        map
    }

    /// Render the snapshot back into file syntax.
    pub fn to_file_syntax(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.snapshot() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
