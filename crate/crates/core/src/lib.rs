#![cfg_attr(not(feature = "std"), no_std)]
//! Trend extraction for beat-indexed exercise ECG amplitude series.
//!
//! The crate takes raw single-lead ECG samples to statistically certified
//! amplitude trends in five stages:
//!
//! * [`ingest`] — R peak detection, QRS delimitation, per-beat R/T amplitude
//!   and RR interval measurement, RR outlier cleaning.
//! * [`cohort`] — alignment of subjects at their heart-rate acme and
//!   normalization to unit temporal mean.
//! * [`fda`] — cubic B-spline smoothing and functional principal component
//!   analysis of the registered cohort.
//! * [`inference`] — pointwise confidence bands for the population mean,
//!   kernel-weighted local quadratic fits of the raw mean, derivative bands
//!   and certified extremum extraction.
//! * [`synth`] — deterministic synthetic cohorts and ECG records with ground
//!   truth annotations, used as test oracles and by the companion CLI.
//!
//! All computation is pure and allocation-based; the crate builds without
//! `std` (disable default features) with math routed through `libm`.

extern crate alloc;

pub mod cohort;
pub mod fda;
pub mod inference;
pub mod ingest;
pub mod linalg;
pub mod synth;
