//! Randomized invariant checks across the library: things that must hold
//! for any input, not just the worked examples in the unit tests.

use proptest::prelude::*;

use ecgtrend_core::cohort::{find_acme, normalize, register};
use ecgtrend_core::fda::{build_basis, smooth};
use ecgtrend_core::inference::{
    kernel_weights, local_poly_fit, normal_quantile, test_constancy, ConfidenceBand, Interval,
    Kernel, SizerConfig,
};
use ecgtrend_core::ingest::{clean_rr, detect_r_peaks, DetectorConfig, EcgRecord};
use ecgtrend_core::synth::{gen_ecg, EcgModel, RrProfile};

proptest! {
    /// Normalization divides by the temporal mean, so any positive rescale
    /// of the input leaves the normalized series unchanged.
    #[test]
    fn normalize_is_scale_invariant(
        values in prop::collection::vec(0.1f64..10.0, 2..50),
        c in 0.01f64..100.0,
    ) {
        let (y, d) = normalize(&values).unwrap();
        let scaled: Vec<f64> = values.iter().map(|v| v * c).collect();
        let (y2, d2) = normalize(&scaled).unwrap();
        prop_assert!((d2 / d - c).abs() < 1e-10 * c);
        for (a, b) in y.iter().zip(&y2) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    /// The normalized series has temporal mean 1 by construction.
    #[test]
    fn normalize_yields_unit_mean(values in prop::collection::vec(0.1f64..10.0, 2..50)) {
        let (y, _) = normalize(&values).unwrap();
        let mean: f64 = y.iter().sum::<f64>() / y.len() as f64;
        prop_assert!((mean - 1.0).abs() < 1e-12);
    }

    /// Registration is a pure window copy: length m, the acme sample at
    /// 1-based position m/2, every sample bit-identical to its source.
    #[test]
    fn register_centers_the_acme(
        values in prop::collection::vec(0.1f64..10.0, 40..120),
        m_half in 1usize..=20,
        acme_offset in 0usize..100,
    ) {
        let len = values.len();
        prop_assume!(len >= 2 * m_half);
        let acme = m_half + acme_offset % (len - 2 * m_half + 1);
        let out = register(&values, acme, 2 * m_half).unwrap();
        prop_assert_eq!(out.len(), 2 * m_half);
        prop_assert_eq!(out[m_half - 1], values[acme - 1]);
        for (k, v) in out.iter().enumerate() {
            prop_assert_eq!(*v, values[acme - m_half + k]);
        }
    }

    /// The acme is the earliest global minimum, reported 1-based.
    #[test]
    fn acme_is_the_earliest_minimum(values in prop::collection::vec(0.1f64..10.0, 1..200)) {
        let a = find_acme(&values);
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(values[a - 1], min);
        prop_assert!(values[..a - 1].iter().all(|&v| v > min));
    }

    /// Cleaning never touches in-range values, and a clean output whose
    /// values are all in range is a fixed point.
    #[test]
    fn rr_cleaning_preserves_in_range_values(
        base in prop::collection::vec(350.0f64..1900.0, 30..120),
        outlier_at in prop::collection::vec(0usize..120, 0..6),
    ) {
        let cfg = DetectorConfig::default();
        let mut values = base;
        for &i in &outlier_at {
            if i < values.len() {
                values[i] = 2500.0;
            }
        }
        let cleaned = clean_rr(&values, &cfg).unwrap();
        prop_assert_eq!(cleaned.len(), values.len());
        let (lo, hi) = cfg.rr_normal_range;
        // Independent median oracle: sort and take the midpoint pair.
        let median_of = |chunk: &[f64]| -> f64 {
            let mut s = chunk.to_vec();
            s.sort_by(f64::total_cmp);
            let mid = s.len() / 2;
            if s.len() % 2 == 1 { s[mid] } else { 0.5 * (s[mid - 1] + s[mid]) }
        };
        for (bi, chunk) in values.chunks(cfg.clean_block).enumerate() {
            let med = median_of(chunk);
            for (j, orig) in chunk.iter().enumerate() {
                let out = cleaned[bi * cfg.clean_block + j];
                if (lo..=hi).contains(orig) {
                    prop_assert_eq!(*orig, out);
                } else {
                    prop_assert_eq!(out, med);
                }
            }
        }
        if cleaned.iter().all(|v| (lo..=hi).contains(v)) {
            let again = clean_rr(&cleaned, &cfg).unwrap();
            prop_assert_eq!(again, cleaned);
        }
    }

    /// Kernel weights are a probability vector over the whole domain.
    #[test]
    fn kernel_weights_are_a_probability_vector(
        m in 2usize..400,
        t_pos in 0usize..400,
        h in 0.3f64..200.0,
    ) {
        let t_j = 1 + t_pos % m;
        let w = kernel_weights(t_j, h, m, Kernel::Gaussian);
        prop_assert_eq!(w.len(), m);
        prop_assert!(w.iter().all(|&v| v >= 0.0));
        let sum: f64 = w.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    /// The normal quantile is strictly increasing and antisymmetric.
    #[test]
    fn quantile_is_monotone_and_antisymmetric(
        p1 in 0.001f64..0.999,
        p2 in 0.001f64..0.999,
    ) {
        prop_assume!(p1 != p2);
        let (lo, hi) = if p1 < p2 { (p1, p2) } else { (p2, p1) };
        prop_assert!(normal_quantile(lo) < normal_quantile(hi));
        prop_assert!((normal_quantile(p1) + normal_quantile(1.0 - p1)).abs() < 1e-10);
    }

    /// Least-squares smoothing is linear in the data.
    #[test]
    fn smoothing_is_linear(
        y1 in prop::collection::vec(-5.0f64..5.0, 60),
        y2 in prop::collection::vec(-5.0f64..5.0, 60),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let basis = build_basis(60, 10, 3).unwrap();
        let f1 = smooth(&y1, &basis).unwrap();
        let f2 = smooth(&y2, &basis).unwrap();
        let combo: Vec<f64> = y1.iter().zip(&y2).map(|(u, v)| a * u + b * v).collect();
        let fc = smooth(&combo, &basis).unwrap();
        for ((c1, c2), cc) in f1.coefficients.iter().zip(&f2.coefficients).zip(&fc.coefficients) {
            prop_assert!((a * c1 + b * c2 - cc).abs() < 1e-8);
        }
    }

    /// Adding a constant shifts beta0 and leaves the derivative estimates,
    /// their standard errors, and the curvature untouched.
    #[test]
    fn local_fits_are_shift_equivariant(
        series in prop::collection::vec(0.5f64..2.0, 80),
        c in -5.0f64..5.0,
    ) {
        let cfg = SizerConfig::with_stride(80, 10, 10.0);
        let base = local_poly_fit(&series, &cfg).unwrap();
        let shifted: Vec<f64> = series.iter().map(|v| v + c).collect();
        let moved = local_poly_fit(&shifted, &cfg).unwrap();
        for (x, y) in base.iter().zip(&moved) {
            prop_assert!((y.beta0 - (x.beta0 + c)).abs() < 1e-9);
            prop_assert!((y.beta1 - x.beta1).abs() < 1e-9);
            prop_assert!((y.beta2 - x.beta2).abs() < 1e-9);
            prop_assert!((y.se1 - x.se1).abs() < 1e-9);
        }
    }

    /// The constancy test partitions the grid exactly: a position lies in
    /// some reported interval if and only if the band excludes the
    /// reference there, intervals are ordered, and gaps are real.
    #[test]
    fn constancy_intervals_match_pointwise_exclusion(
        centers in prop::collection::vec(0.0f64..2.0, 3..60),
        halves in prop::collection::vec(0.0f64..0.5, 3..60),
    ) {
        let m = centers.len().min(halves.len());
        let positions: Vec<usize> = (1..=m).collect();
        let center: Vec<f64> = centers[..m].to_vec();
        let lower: Vec<f64> = center.iter().zip(&halves[..m]).map(|(c, h)| c - h).collect();
        let upper: Vec<f64> = center.iter().zip(&halves[..m]).map(|(c, h)| c + h).collect();
        let band = ConfidenceBand {
            positions,
            center,
            lower: lower.clone(),
            upper: upper.clone(),
            alpha: 0.05,
            z: 1.96,
        };
        let intervals = test_constancy(&band, 1.0);
        let inside = |p: usize, iv: &Interval| iv.lo <= p && p <= iv.hi;
        for p in 1..=m {
            let excluded = lower[p - 1] > 1.0 || upper[p - 1] < 1.0;
            let member = intervals.iter().any(|iv| inside(p, iv));
            prop_assert_eq!(excluded, member, "mismatch at position {}", p);
        }
        for pair in intervals.windows(2) {
            prop_assert!(pair[0].hi + 2 <= pair[1].lo, "intervals touch: {:?}", pair);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Structural guarantees of the peak detector on any synthetic record:
    /// strictly increasing positions, refractory spacing, and every peak a
    /// local maximum of the raw signal over the snap window.
    #[test]
    fn detector_output_is_sane(seed in any::<u64>(), rr_ms in 600.0f64..1000.0) {
        let model = EcgModel::new(RrProfile::Constant { rr_ms }, seed);
        let ecg = gen_ecg(&model, 20.0).unwrap();
        let record = EcgRecord {
            samples_mv: ecg.samples_mv.clone(),
            fs: ecg.fs,
            resolution_mv: ecg.resolution_mv,
            lead: "II".into(),
        };
        let cfg = DetectorConfig::default();
        let peaks = detect_r_peaks(&record, &cfg).unwrap();
        prop_assert!(!peaks.is_empty());

        let refractory = (cfg.refractory_ms / 1000.0 * record.fs).round() as usize;
        for pair in peaks.windows(2) {
            prop_assert!(pair[0] < pair[1]);
            prop_assert!(pair[1] - pair[0] >= refractory);
        }
        let w = (cfg.qrs_search_halfwidth_ms / 1000.0 * record.fs).round() as usize;
        for &p in &peaks {
            let lo = p.saturating_sub(w);
            let hi = (p + w).min(record.samples_mv.len() - 1);
            let top = record.samples_mv[lo..=hi]
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(record.samples_mv[p] >= top);
        }
    }
}
