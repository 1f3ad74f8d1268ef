//! On-disk formats: raw ECG CSV, per-beat measurement CSV, cohort and band
//! tables, and the feature JSON. All writers go through an atomic
//! temp-then-rename so a crashed run never leaves a half-written artifact.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use ecgtrend_core::cohort::{AmplitudeSeries, NormalizedCohort, SubjectChannels};
use ecgtrend_core::fda::PcaDecomposition;
use ecgtrend_core::inference::{ConfidenceBand, FeatureReport};
use ecgtrend_core::ingest::{BeatSeries, EcgRecord};
use thiserror::Error;

/// Maximum relative deviation of any sampling interval from the first one.
const UNIFORMITY_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, line {line}: {reason}")]
    Malformed {
        path: PathBuf,
        /// 1-based file line (the header is line 1).
        line: usize,
        reason: String,
    },
    #[error("{path}: {reason}")]
    Invalid { path: PathBuf, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FileError + '_ {
    move |source| FileError::Io { path: path.to_path_buf(), source }
}

/// Write through a temporary file in the same directory, then rename over
/// the target, so readers only ever observe complete files.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), FileError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))?;
    Ok(())
}

/// SHA-256 of a file's bytes, lowercase hex.
pub fn file_digest(path: &Path) -> Result<String, FileError> {
    use sha2::{Digest, Sha256};
    let mut file = fs::File::open(path).map_err(io_err(path))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 65536];
    loop {
        let n = file.read(&mut buf).map_err(io_err(path))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        let _ = write!(hex, "{byte:02x}");
    }
    Ok(hex)
}

// ---------------------------------------------------------------------------
// Raw ECG CSV: `t_s,mv` or `t_s,quanta`
// ---------------------------------------------------------------------------

/// One sample per row. Timestamps get 9 decimals so the uniformity check
/// holds at any realistic rate.
pub fn write_ecg_csv(path: &Path, samples_mv: &[f64], fs: f64) -> Result<(), FileError> {
    let mut out = String::with_capacity(samples_mv.len() * 24 + 16);
    out.push_str("t_s,mv\n");
    for (i, v) in samples_mv.iter().enumerate() {
        let _ = writeln!(out, "{:.9},{}", i as f64 / fs, v);
    }
    atomic_write(path, out.as_bytes())
}

/// Parse a raw ECG CSV. The sampling rate is inferred from the first two
/// timestamps and every subsequent interval must match it to 1 ppm. Values
/// in the `quanta` column are integers scaled by `resolution_mv`.
pub fn read_ecg_csv(path: &Path, resolution_mv: f64) -> Result<EcgRecord, FileError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let bad = |line: usize, reason: String| FileError::Malformed {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| bad(1, "empty file".into()))?;
    let quanta = match header.trim() {
        "t_s,mv" => false,
        "t_s,quanta" => true,
        other => {
            return Err(bad(
                1,
                format!("header must be `t_s,mv` or `t_s,quanta`, got `{other}`"),
            ))
        }
    };

    let mut times: Vec<f64> = Vec::new();
    let mut samples: Vec<f64> = Vec::new();
    for (idx, row) in lines {
        let line_no = idx + 1;
        let row = row.trim();
        if row.is_empty() {
            continue;
        }
        let (t_field, v_field) = row
            .split_once(',')
            .ok_or_else(|| bad(line_no, "expected two comma-separated fields".into()))?;
        let t: f64 = t_field
            .trim()
            .parse()
            .map_err(|_| bad(line_no, format!("bad timestamp `{t_field}`")))?;
        let v = if quanta {
            let q: i64 = v_field
                .trim()
                .parse()
                .map_err(|_| bad(line_no, format!("bad quanta value `{v_field}`")))?;
            q as f64 * resolution_mv
        } else {
            v_field
                .trim()
                .parse()
                .map_err(|_| bad(line_no, format!("bad millivolt value `{v_field}`")))?
        };
        if !v.is_finite() {
            return Err(bad(line_no, "non-finite sample value".into()));
        }
        if let Some(&prev) = times.last() {
            if t <= prev {
                return Err(bad(line_no, format!("timestamp {t} not increasing")));
            }
        }
        times.push(t);
        samples.push(v);
    }
    if times.len() < 3 {
        return Err(FileError::Invalid {
            path: path.to_path_buf(),
            reason: format!("needs at least 3 samples, found {}", times.len()),
        });
    }
    let dt = times[1] - times[0];
    for i in 2..times.len() {
        let step = times[i] - times[i - 1];
        if (step - dt).abs() > UNIFORMITY_TOL * dt {
            // Data rows start on line 2.
            return Err(bad(
                i + 2,
                format!("non-uniform sampling: interval {step:.9} vs {dt:.9}"),
            ));
        }
    }
    let lead = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "unknown".into());
    Ok(EcgRecord {
        samples_mv: samples,
        fs: 1.0 / dt,
        resolution_mv,
        lead,
    })
}

// ---------------------------------------------------------------------------
// Beat measurement CSV: `beat,rr_ms,r_mv,t_mv,valid`
// ---------------------------------------------------------------------------

pub fn write_beats_csv(path: &Path, table: &BeatTable) -> Result<(), FileError> {
    let mut out = String::with_capacity(table.rows.len() * 32 + 32);
    out.push_str("beat,rr_ms,r_mv,t_mv,valid\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            row.beat,
            opt(row.rr_ms),
            opt(row.r_mv),
            opt(row.t_mv),
            row.valid
        );
    }
    atomic_write(path, out.as_bytes())
}

/// Beat table as stored on disk; only measurements survive the round trip,
/// not sample positions.
#[derive(Debug, Clone)]
pub struct BeatRow {
    pub beat: usize,
    pub rr_ms: Option<f64>,
    pub r_mv: Option<f64>,
    pub t_mv: Option<f64>,
    pub valid: bool,
}

#[derive(Debug, Clone)]
pub struct BeatTable {
    pub subject_id: String,
    pub rows: Vec<BeatRow>,
}

impl From<&BeatSeries> for BeatTable {
    fn from(series: &BeatSeries) -> BeatTable {
        BeatTable {
            subject_id: series.subject_id.clone(),
            rows: series
                .beats
                .iter()
                .enumerate()
                .map(|(i, b)| BeatRow {
                    beat: i + 1,
                    rr_ms: b.rr_ms,
                    r_mv: b.r_amplitude_mv,
                    t_mv: b.t_amplitude_mv,
                    valid: b.valid,
                })
                .collect(),
        }
    }
}

impl BeatTable {
    /// Fraction of rows flagged invalid.
    pub fn invalid_fraction(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().filter(|r| !r.valid).count() as f64 / self.rows.len() as f64
    }

    /// Aligned per-channel series of the valid beats, in beat order.
    pub fn channels(&self) -> SubjectChannels {
        let mut rr = Vec::new();
        let mut r = Vec::new();
        let mut t = Vec::new();
        for row in &self.rows {
            if row.valid {
                // Checked at parse time: a valid row carries all three.
                rr.push(row.rr_ms.unwrap());
                r.push(row.r_mv.unwrap());
                t.push(row.t_mv.unwrap());
            }
        }
        let series = |values: Vec<f64>| AmplitudeSeries {
            subject_id: self.subject_id.clone(),
            values,
        };
        SubjectChannels {
            rr: series(rr),
            r: series(r),
            t: series(t),
        }
    }
}

pub fn read_beats_csv(path: &Path) -> Result<BeatTable, FileError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let bad = |line: usize, reason: String| FileError::Malformed {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| bad(1, "empty file".into()))?;
    if header.trim() != "beat,rr_ms,r_mv,t_mv,valid" {
        return Err(bad(
            1,
            format!("header must be `beat,rr_ms,r_mv,t_mv,valid`, got `{}`", header.trim()),
        ));
    }
    let mut rows: Vec<BeatRow> = Vec::new();
    for (idx, row) in lines {
        let line_no = idx + 1;
        let row = row.trim();
        if row.is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 5 {
            return Err(bad(line_no, format!("expected 5 fields, got {}", fields.len())));
        }
        let beat: usize = fields[0]
            .trim()
            .parse()
            .map_err(|_| bad(line_no, format!("bad beat index `{}`", fields[0])))?;
        if beat != rows.len() + 1 {
            return Err(bad(
                line_no,
                format!("beat index {beat} out of sequence (expected {})", rows.len() + 1),
            ));
        }
        let opt_field = |field: &str, name: &str| -> Result<Option<f64>, FileError> {
            let field = field.trim();
            if field.is_empty() {
                return Ok(None);
            }
            let v: f64 = field
                .parse()
                .map_err(|_| bad(line_no, format!("bad {name} value `{field}`")))?;
            if !v.is_finite() {
                return Err(bad(line_no, format!("non-finite {name} value")));
            }
            Ok(Some(v))
        };
        let rr_ms = opt_field(fields[1], "rr_ms")?;
        let r_mv = opt_field(fields[2], "r_mv")?;
        let t_mv = opt_field(fields[3], "t_mv")?;
        let valid: bool = fields[4]
            .trim()
            .parse()
            .map_err(|_| bad(line_no, format!("bad valid flag `{}`", fields[4])))?;
        if valid && (rr_ms.is_none() || r_mv.is_none() || t_mv.is_none()) {
            return Err(bad(line_no, "row marked valid but has missing values".into()));
        }
        rows.push(BeatRow { beat, rr_ms, r_mv, t_mv, valid });
    }
    if rows.is_empty() {
        return Err(FileError::Invalid {
            path: path.to_path_buf(),
            reason: "no beat rows".into(),
        });
    }
    let subject_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "unknown".into());
    Ok(BeatTable { subject_id, rows })
}

// ---------------------------------------------------------------------------
// Analysis outputs
// ---------------------------------------------------------------------------

/// Normalized cohort matrix: `beat` column plus one column per subject.
pub fn write_cohort_csv(path: &Path, cohort: &NormalizedCohort) -> Result<(), FileError> {
    let m = cohort.matrix.first().map(|r| r.len()).unwrap_or(0);
    let mut out = String::new();
    out.push_str("beat");
    for id in &cohort.subject_ids {
        let _ = write!(out, ",{id}");
    }
    out.push('\n');
    for t in 0..m {
        let _ = write!(out, "{}", t + 1);
        for row in &cohort.matrix {
            let _ = write!(out, ",{}", row[t]);
        }
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Band table: `t,center,lower,upper`.
pub fn write_band_csv(path: &Path, band: &ConfidenceBand) -> Result<(), FileError> {
    let mut out = String::with_capacity(band.positions.len() * 40 + 24);
    out.push_str("t,center,lower,upper\n");
    for i in 0..band.positions.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            band.positions[i], band.center[i], band.lower[i], band.upper[i]
        );
    }
    atomic_write(path, out.as_bytes())
}

/// Band table reader (used by the report renderer).
pub fn read_band_csv(path: &Path) -> Result<ConfidenceBand, FileError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let bad = |line: usize, reason: String| FileError::Malformed {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| bad(1, "empty file".into()))?;
    if header.trim() != "t,center,lower,upper" {
        return Err(bad(1, format!("header must be `t,center,lower,upper`, got `{}`", header.trim())));
    }
    let mut band = ConfidenceBand {
        positions: Vec::new(),
        center: Vec::new(),
        lower: Vec::new(),
        upper: Vec::new(),
        alpha: f64::NAN,
        z: f64::NAN,
    };
    for (idx, row) in lines {
        let line_no = idx + 1;
        let row = row.trim();
        if row.is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 4 {
            return Err(bad(line_no, format!("expected 4 fields, got {}", fields.len())));
        }
        let parse = |s: &str| -> Result<f64, FileError> {
            s.trim()
                .parse()
                .map_err(|_| bad(line_no, format!("bad number `{s}`")))
        };
        band.positions.push(
            fields[0]
                .trim()
                .parse()
                .map_err(|_| bad(line_no, format!("bad position `{}`", fields[0])))?,
        );
        band.center.push(parse(fields[1])?);
        band.lower.push(parse(fields[2])?);
        band.upper.push(parse(fields[3])?);
    }
    if band.positions.is_empty() {
        return Err(FileError::Invalid { path: path.to_path_buf(), reason: "no band rows".into() });
    }
    Ok(band)
}

/// Component summary, per-subject loadings, and eigenfunctions on the grid.
pub fn write_pca_csvs(
    dir: &Path,
    channel: &str,
    pca: &PcaDecomposition,
    subject_ids: &[String],
) -> Result<Vec<PathBuf>, FileError> {
    let k = pca.eigenvalues.len();

    let summary = dir.join(format!("{channel}_pca.csv"));
    let mut out = String::from("component,eigenvalue,explained_fraction\n");
    for j in 0..k {
        let _ = writeln!(out, "{},{},{}", j + 1, pca.eigenvalues[j], pca.explained_fraction[j]);
    }
    atomic_write(&summary, out.as_bytes())?;

    let loadings = dir.join(format!("{channel}_pca_loadings.csv"));
    let mut out = String::from("subject");
    for j in 0..k {
        let _ = write!(out, ",pc{}", j + 1);
    }
    out.push('\n');
    for (i, id) in subject_ids.iter().enumerate() {
        let _ = write!(out, "{id}");
        for j in 0..k {
            let _ = write!(out, ",{}", pca.loadings[i][j]);
        }
        out.push('\n');
    }
    atomic_write(&loadings, out.as_bytes())?;

    let functions = dir.join(format!("{channel}_pca_eigenfunctions.csv"));
    let mut out = String::from("beat");
    for j in 0..k {
        let _ = write!(out, ",pc{}", j + 1);
    }
    out.push('\n');
    let m = pca.mean_function.len();
    for t in 0..m {
        let _ = write!(out, "{}", t + 1);
        for f in &pca.eigenfunctions {
            let _ = write!(out, ",{}", f[t]);
        }
        out.push('\n');
    }
    atomic_write(&functions, out.as_bytes())?;

    Ok(vec![summary, loadings, functions])
}

pub fn write_feature_json(path: &Path, report: &FeatureReport) -> Result<(), FileError> {
    let mut bytes = serde_json::to_vec_pretty(report).expect("feature report serializes");
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

pub fn read_feature_json(path: &Path) -> Result<FeatureReport, FileError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| FileError::Invalid {
        path: path.to_path_buf(),
        reason: format!("bad feature JSON: {e}"),
    })
}
