//! The four batch commands: generate data, extract beats, run the cohort
//! analysis, and render a finished analysis.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use ecgtrend_core::cohort::{
    build_cohort, find_acme_smoothed, normalize_cohort, AmplitudeSeries, NormalizedCohort,
};
use ecgtrend_core::fda::{build_basis, fpca, smooth, smoothed_mean, FdaError, SplineBasis, SplineFit};
use ecgtrend_core::inference::{
    confidence_band, derivative_band, find_significant_extrema, local_poly_fit,
    pointwise_variance, FeatureReport, SizerConfig,
};
use ecgtrend_core::ingest::extract_beat_series;
use ecgtrend_core::synth::{
    gen_amplitude_cohort, gen_ecg, AmplitudeProfile, BeatTemplate, CohortModel, EcgModel,
    MuTemplate, NoiseLaw, RrProfile, SigmaProfile,
};

use crate::config::{NoiseLawKind, PipelineConfig, SynthKind};
use crate::error::CliError;
use crate::formats::{
    self, read_band_csv, read_beats_csv, read_ecg_csv, read_feature_json, write_band_csv,
    write_beats_csv, write_cohort_csv, write_ecg_csv, write_feature_json, write_pca_csvs,
    BeatRow, BeatTable,
};
use crate::manifest::RunManifest;
use crate::plot::band_svg;

/// Distinct seeds for the three generated channels of one run.
const RR_CHANNEL_SALT: u64 = 0x5252_9E37_79B9_7F4A;
const R_CHANNEL_SALT: u64 = 0x5200_C2B2_AE3D_27D4;
const T_CHANNEL_SALT: u64 = 0x5400_1656_67B1_85E5;

fn noise_law(kind: NoiseLawKind) -> NoiseLaw {
    match kind {
        NoiseLawKind::Gaussian => NoiseLaw::Gaussian,
        NoiseLawKind::StudentT5 => NoiseLaw::StudentT5,
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Input(format!("cannot create output directory {}: {e}", dir.display())))
}

/// Expand positional inputs: directories contribute their `*.csv` files in
/// name order, plain paths contribute themselves.
fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)
                .map_err(|e| CliError::Input(format!("cannot read directory {}: {e}", input.display())))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
                .collect();
            found.sort();
            files.extend(found);
        } else if input.is_file() {
            files.push(input.clone());
        } else {
            return Err(CliError::Input(format!("input {} does not exist", input.display())));
        }
    }
    if files.is_empty() {
        return Err(CliError::Input("no inputs: nothing matched the given paths".into()));
    }
    Ok(files)
}

fn subject_file_id(index: usize) -> String {
    format!("s{:02}", index + 1)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

pub fn cmd_simulate(cfg: &PipelineConfig, out_dir: &Path) -> Result<(), CliError> {
    ensure_dir(out_dir)?;
    let mut manifest = RunManifest::new("simulate", cfg);
    match cfg.synth_kind {
        SynthKind::Beats => simulate_beats(cfg, out_dir, &mut manifest)?,
        SynthKind::Ecg => simulate_ecg(cfg, out_dir, &mut manifest)?,
    }
    manifest.write(out_dir)?;
    Ok(())
}

/// Per-beat measurement tables: an RR channel carrying the effort profile
/// (V shape with the acme mid-series) and R/T amplitude channels with
/// their post-acme excursions. The subject scale factor is left off the RR
/// channel: the pipeline only takes the acme landmark from it, and
/// normalization removes any such factor from the amplitude channels.
fn simulate_beats(
    cfg: &PipelineConfig,
    out_dir: &Path,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    let beats = cfg.synth_beats;
    let acme_beat = beats / 2;
    let law = noise_law(cfg.synth_noise_law);
    let n = cfg.synth_subjects;

    let rr = gen_amplitude_cohort(
        &CohortModel {
            m: beats,
            mu: MuTemplate::VShape {
                level: cfg.synth_rr_rest_ms,
                acme: acme_beat,
                depth_ratio: cfg.synth_rr_acme_ms / cfg.synth_rr_rest_ms,
            },
            u_sigma: 0.0,
            noise: law,
            sigma: SigmaProfile::ProportionalToMean(cfg.synth_rr_sigma),
            seed: cfg.seed ^ RR_CHANNEL_SALT,
        },
        n,
    )?;
    let r = gen_amplitude_cohort(
        &CohortModel {
            m: beats,
            mu: MuTemplate::Excursion {
                level: cfg.synth_r_level_mv,
                center: acme_beat + cfg.synth_dip_offset_beats,
                half_width: cfg.synth_excursion_half_width,
                amplitude: cfg.synth_dip_amplitude,
            },
            u_sigma: cfg.synth_u_sigma,
            noise: law,
            sigma: SigmaProfile::ProportionalToMean(cfg.synth_sigma),
            seed: cfg.seed ^ R_CHANNEL_SALT,
        },
        n,
    )?;
    let t = gen_amplitude_cohort(
        &CohortModel {
            m: beats,
            mu: MuTemplate::Excursion {
                level: cfg.synth_t_level_mv,
                center: acme_beat + cfg.synth_bump_offset_beats,
                half_width: cfg.synth_excursion_half_width,
                amplitude: cfg.synth_bump_amplitude,
            },
            u_sigma: cfg.synth_u_sigma,
            noise: law,
            sigma: SigmaProfile::ProportionalToMean(cfg.synth_sigma),
            seed: cfg.seed ^ T_CHANNEL_SALT,
        },
        n,
    )?;

    for i in 0..n {
        let id = subject_file_id(i);
        let rows: Vec<BeatRow> = (0..beats)
            .map(|b| BeatRow {
                beat: b + 1,
                rr_ms: Some(rr.rows[i][b]),
                r_mv: Some(r.rows[i][b]),
                t_mv: Some(t.rows[i][b]),
                valid: true,
            })
            .collect();
        let table = BeatTable { subject_id: id.clone(), rows };
        let path = out_dir.join(format!("{id}_beats.csv"));
        write_beats_csv(&path, &table)?;
        manifest.record_subject(&id, "generated", format!("{beats} beats"));
        manifest.record_output(&path);
    }
    Ok(())
}

/// Raw ECG records with the same effort profile, one file per subject.
fn simulate_ecg(
    cfg: &PipelineConfig,
    out_dir: &Path,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    let n = cfg.synth_subjects;
    let records: Vec<_> = (0..n)
        .into_par_iter()
        .map(|i| {
            let model = EcgModel {
                fs: cfg.synth_fs,
                resolution_mv: cfg.resolution_mv,
                template: BeatTemplate::default(),
                rr: RrProfile::VShape {
                    rest_ms: cfg.synth_rr_rest_ms,
                    acme_ms: cfg.synth_rr_acme_ms,
                },
                rr_jitter_ms: cfg.synth_rr_jitter_ms,
                r_scale: AmplitudeProfile::ExcursionAfterAcme {
                    base: 1.0,
                    offset_beats: cfg.synth_dip_offset_beats,
                    half_width: cfg.synth_excursion_half_width,
                    amplitude: cfg.synth_dip_amplitude,
                },
                t_scale: AmplitudeProfile::ExcursionAfterAcme {
                    base: 1.0,
                    offset_beats: cfg.synth_bump_offset_beats,
                    half_width: cfg.synth_excursion_half_width,
                    amplitude: cfg.synth_bump_amplitude,
                },
                noise_mv: cfg.synth_noise_mv,
                seed: cfg.seed.wrapping_add(i as u64),
                deleted_beats: Vec::new(),
            };
            gen_ecg(&model, cfg.synth_duration_s)
        })
        .collect();

    for (i, record) in records.into_iter().enumerate() {
        let record = record?;
        let id = subject_file_id(i);
        let path = out_dir.join(format!("{id}.csv"));
        write_ecg_csv(&path, &record.samples_mv, record.fs)?;
        manifest.record_subject(
            &id,
            "generated",
            format!("{} samples, {} beats", record.samples_mv.len(), record.annotations.len()),
        );
        manifest.record_output(&path);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

pub fn cmd_ingest(inputs: &[PathBuf], cfg: &PipelineConfig, out_dir: &Path) -> Result<(), CliError> {
    let files = expand_inputs(inputs)?;
    ensure_dir(out_dir)?;
    let mut manifest = RunManifest::new("ingest", cfg);
    for file in &files {
        manifest.record_input(file)?;
    }

    let detector = cfg.detector();
    let results: Vec<_> = files
        .par_iter()
        .map(|file| {
            let stem = file
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "unknown".into());
            let outcome = read_ecg_csv(file, cfg.resolution_mv)
                .map_err(|e| e.to_string())
                .and_then(|record| {
                    extract_beat_series(&record, &detector, &stem).map_err(|e| e.to_string())
                });
            (stem, outcome)
        })
        .collect();

    let mut successes = 0usize;
    for (stem, outcome) in results {
        match outcome {
            Ok(series) => {
                let path = out_dir.join(format!("{stem}_beats.csv"));
                write_beats_csv(&path, &BeatTable::from(&series))?;
                manifest.record_subject(
                    &stem,
                    "included",
                    format!(
                        "{} beats, invalid fraction {:.4}",
                        series.beats.len(),
                        series.invalid_fraction
                    ),
                );
                manifest.record_output(&path);
                successes += 1;
            }
            Err(reason) => {
                eprintln!("ecgtrend: {stem}: {reason}");
                manifest.record_subject(&stem, "failed", reason);
            }
        }
    }
    manifest.write(out_dir)?;
    if successes == 0 {
        return Err(CliError::Input(format!("all {} input files failed", files.len())));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

struct SubjectOutcome {
    id: String,
    acme: Option<usize>,
    d_r: Option<f64>,
    d_t: Option<f64>,
    status: &'static str,
    detail: String,
}

pub fn cmd_analyze(inputs: &[PathBuf], cfg: &PipelineConfig, out_dir: &Path) -> Result<(), CliError> {
    let files = expand_inputs(inputs)?;
    ensure_dir(out_dir)?;
    let mut manifest = RunManifest::new("analyze", cfg);
    for file in &files {
        manifest.record_input(file)?;
    }

    // Per subject: channels, validation, acme landmark.
    let mut r_items: Vec<(AmplitudeSeries, usize)> = Vec::new();
    let mut t_items: Vec<(AmplitudeSeries, usize)> = Vec::new();
    let mut outcomes: Vec<SubjectOutcome> = Vec::new();
    for file in &files {
        let table = read_beats_csv(file)?;
        let id = table.subject_id.clone();
        let channels = table.channels();
        let checks = [
            channels.rr.validate(cfg.series_min_len, cfg.series_max_len),
            channels.r.validate(cfg.series_min_len, cfg.series_max_len),
            channels.t.validate(cfg.series_min_len, cfg.series_max_len),
        ];
        if let Some(err) = checks.into_iter().find_map(Result::err) {
            outcomes.push(SubjectOutcome {
                id: id.clone(),
                acme: None,
                d_r: None,
                d_t: None,
                status: "excluded",
                detail: err.to_string(),
            });
            continue;
        }
        let acme = find_acme_smoothed(&channels.rr.values, cfg.acme_smooth_window);
        r_items.push((channels.r, acme));
        t_items.push((channels.t, acme));
        outcomes.push(SubjectOutcome {
            id,
            acme: Some(acme),
            d_r: None,
            d_t: None,
            status: "included",
            detail: String::new(),
        });
    }

    // Registration; both channels share length and acme, so exclusions agree.
    let (r_reg, r_excluded) = build_cohort(&r_items, cfg.m);
    let (t_reg, _) = build_cohort(&t_items, cfg.m);
    for (id, err) in &r_excluded {
        if let Some(o) = outcomes.iter_mut().find(|o| &o.id == id) {
            o.status = "excluded";
            o.detail = err.to_string();
            o.acme = None;
        }
    }

    let n = r_reg.subject_ids.len();
    if n < 2 {
        for o in &outcomes {
            manifest.record_subject(&o.id, o.status, o.detail.clone());
        }
        manifest.write(out_dir)?;
        return Err(CliError::Stats(format!(
            "{n} subject(s) survived validation and registration; the analysis needs at least 2"
        )));
    }

    let r_cohort = normalize_cohort(&r_reg).map_err(|(id, e)| CliError::Stats(format!("{id}: {e}")))?;
    let t_cohort = normalize_cohort(&t_reg).map_err(|(id, e)| CliError::Stats(format!("{id}: {e}")))?;
    // The channels are aligned per subject, so registration must have kept
    // the same set; the metadata rows below rely on it.
    assert_eq!(
        r_cohort.subject_ids, t_cohort.subject_ids,
        "channel cohorts diverged"
    );
    for (i, id) in r_cohort.subject_ids.iter().enumerate() {
        if let Some(o) = outcomes.iter_mut().find(|o| &o.id == id) {
            o.d_r = Some(r_cohort.d[i]);
            o.d_t = Some(t_cohort.d[i]);
        }
    }

    let basis = build_basis(cfg.m, cfg.n_breakpoints, 3).map_err(fda_to_cli)?;
    let mut outputs = analyze_channel(&r_cohort, "r", cfg, &basis, out_dir)?;
    outputs.extend(analyze_channel(&t_cohort, "t", cfg, &basis, out_dir)?);

    // Sidecar: landmarks, normalization denominators, exclusions.
    let mut meta = String::from("subject,acme,d_r,d_t,status,detail\n");
    for o in &outcomes {
        let opt_u = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        let opt_f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(
            meta,
            "{},{},{},{},{},{}",
            o.id,
            opt_u(o.acme),
            opt_f(o.d_r),
            opt_f(o.d_t),
            o.status,
            o.detail
        );
        manifest.record_subject(&o.id, o.status, o.detail.clone());
    }
    let meta_path = out_dir.join("cohort_metadata.txt");
    formats::atomic_write(&meta_path, meta.as_bytes())?;
    outputs.push(meta_path);

    for path in &outputs {
        manifest.record_output(path);
    }
    manifest.write(out_dir)?;
    Ok(())
}

fn fda_to_cli(e: FdaError) -> CliError {
    CliError::Parameter(e.to_string())
}

/// One channel through the smoothing, band, derivative-significance, and
/// PCA stages; returns the files written.
fn analyze_channel(
    cohort: &NormalizedCohort,
    channel: &str,
    cfg: &PipelineConfig,
    basis: &SplineBasis,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let n = cohort.matrix.len();
    let m = cfg.m;

    let fits: Vec<SplineFit> = cohort
        .matrix
        .iter()
        .map(|row| smooth(row, basis))
        .collect::<Result<_, _>>()
        .map_err(fda_to_cli)?;
    let smoothed_rows: Vec<Vec<f64>> = fits.iter().map(|f| basis.evaluate(&f.coefficients)).collect();
    let mean = smoothed_mean(&fits, basis).map_err(fda_to_cli)?;
    let variance = pointwise_variance(&smoothed_rows, &mean);
    let positions: Vec<usize> = (1..=m).collect();
    let band = confidence_band(&positions, &mean, &variance, n, cfg.alpha);

    let raw_mean = ecgtrend_core::cohort::population_mean_raw(cohort);
    let sizer = SizerConfig::with_stride(m, cfg.sizer_stride, cfg.sizer_h);
    let local_fits = local_poly_fit(&raw_mean, &sizer)
        .map_err(|e| CliError::Parameter(format!("{channel} channel: {e}")))?;
    let dband = derivative_band(&local_fits, cfg.alpha);
    let report: FeatureReport = find_significant_extrema(&band, &dband, cfg.sizer_h);

    let mut outputs = Vec::new();
    let cohort_path = out_dir.join(format!("{channel}_cohort.csv"));
    write_cohort_csv(&cohort_path, cohort)?;
    outputs.push(cohort_path);
    let band_path = out_dir.join(format!("{channel}_band.csv"));
    write_band_csv(&band_path, &band)?;
    outputs.push(band_path);
    let dband_path = out_dir.join(format!("{channel}_derivative_band.csv"));
    write_band_csv(&dband_path, &dband)?;
    outputs.push(dband_path);
    let features_path = out_dir.join(format!("{channel}_features.json"));
    write_feature_json(&features_path, &report)?;
    outputs.push(features_path);

    // PCA needs three subjects and some variance; a cohort that lacks
    // either still gets bands and features, just no decomposition.
    if n >= 3 {
        let n_components = 4.min(n - 1);
        match fpca(&fits, basis, n_components) {
            Ok(pca) => {
                outputs.extend(write_pca_csvs(out_dir, channel, &pca, &cohort.subject_ids)?);
            }
            Err(FdaError::ZeroCovariance) => {
                eprintln!("ecgtrend: {channel} channel carries no variance; skipping PCA");
            }
            Err(e) => return Err(fda_to_cli(e)),
        }
    }
    Ok(outputs)
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

pub fn cmd_report(
    analysis_dir: &Path,
    cfg: &PipelineConfig,
    out_dir: &Path,
    svg: bool,
) -> Result<(), CliError> {
    if !analysis_dir.is_dir() {
        return Err(CliError::Input(format!(
            "analysis directory {} does not exist",
            analysis_dir.display()
        )));
    }
    ensure_dir(out_dir)?;
    let mut manifest = RunManifest::new("report", cfg);
    let mut text = String::new();
    let mut outputs: Vec<PathBuf> = Vec::new();
    let mut found_any = false;

    for channel in ["r", "t"] {
        let features_path = analysis_dir.join(format!("{channel}_features.json"));
        if !features_path.is_file() {
            continue;
        }
        found_any = true;
        manifest.record_input(&features_path)?;
        let report = read_feature_json(&features_path)?;
        let _ = writeln!(text, "channel {}", channel.to_uppercase());

        if report.significant_intervals.is_empty() {
            let _ = writeln!(text, "  mean band: no departure from the constant level 1");
        } else {
            for iv in &report.significant_intervals {
                let _ = writeln!(text, "  mean band departs from 1 over beats {}..={}", iv.lo, iv.hi);
            }
        }
        if report.extrema.is_empty() {
            let _ = writeln!(text, "  no certified extrema");
        } else {
            for e in &report.extrema {
                let kind = match e.kind {
                    ecgtrend_core::inference::ExtremumKind::Min => "minimum",
                    ecgtrend_core::inference::ExtremumKind::Max => "maximum",
                };
                let _ = writeln!(
                    text,
                    "  certified {kind} at beat {} (crossing {:.1}; slopes significant over {}..={} and {}..={})",
                    e.beat,
                    e.crossing_beat,
                    e.left_interval.lo,
                    e.left_interval.hi,
                    e.right_interval.lo,
                    e.right_interval.hi
                );
            }
        }

        let pca_path = analysis_dir.join(format!("{channel}_pca.csv"));
        if pca_path.is_file() {
            manifest.record_input(&pca_path)?;
            let body = fs::read_to_string(&pca_path)
                .map_err(|e| CliError::Input(format!("{}: {e}", pca_path.display())))?;
            for line in body.lines().skip(1) {
                let fields: Vec<&str> = line.split(',').collect();
                if fields.len() == 3 {
                    if let (Ok(ev), Ok(fr)) = (fields[1].parse::<f64>(), fields[2].parse::<f64>()) {
                        let _ = writeln!(
                            text,
                            "  component {}: eigenvalue {:.6}, explains {:.1}% of variance",
                            fields[0],
                            ev,
                            100.0 * fr
                        );
                    }
                }
            }
        }

        if svg {
            for (suffix, reference) in [("band", 1.0), ("derivative_band", 0.0)] {
                let csv_path = analysis_dir.join(format!("{channel}_{suffix}.csv"));
                if !csv_path.is_file() {
                    continue;
                }
                manifest.record_input(&csv_path)?;
                let band = read_band_csv(&csv_path)?;
                let title = match suffix {
                    "band" => format!(
                        "{} amplitude: mean with {:.0}% band",
                        channel.to_uppercase(),
                        100.0 * (1.0 - cfg.alpha)
                    ),
                    _ => format!("{} amplitude: derivative band", channel.to_uppercase()),
                };
                let svg_path = out_dir.join(format!("{channel}_{suffix}.svg"));
                formats::atomic_write(&svg_path, band_svg(&band, &title, reference).as_bytes())?;
                outputs.push(svg_path);
            }
        }
    }

    if !found_any {
        return Err(CliError::Input(format!(
            "no feature files (r_features.json / t_features.json) in {}",
            analysis_dir.display()
        )));
    }

    let report_path = out_dir.join("report.txt");
    formats::atomic_write(&report_path, text.as_bytes())?;
    outputs.push(report_path);
    print!("{text}");

    for path in &outputs {
        manifest.record_output(path);
    }
    manifest.write(out_dir)?;
    Ok(())
}
