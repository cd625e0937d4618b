//! Cross-wavelet ECG beat analysis.
//!
//! This crate turns raw single-lead ECG into a two-feature description of
//! each heart beat and a hierarchical normal/infarction-variant call:
//!
//! 1. [`ingest`] reads PhysioNet-style WFDB records (format 16) or plain
//!    CSV signals into an [`ingest::EcgRecord`].
//! 2. [`preprocess`] denoises the signal with a dyadic wavelet filter bank,
//!    locates R peaks, cuts 1:2 beat windows around them and resamples each
//!    beat to a fixed 1000-sample grid.
//! 3. [`xwavelet`] computes Morlet continuous wavelet transforms, the cross
//!    wavelet spectrum of a beat against a reference template, and the
//!    smoothed wavelet coherence of the pair.
//! 4. [`features`] reduces the coherence and cross-spectrum matrices to the
//!    scalar pair `(pa, pb)` over a QT-centred scale/time window.
//! 5. [`classify`] applies a two-threshold coarse rule (normal vs abnormal)
//!    and a k-NN refinement that splits abnormal beats into two infarction
//!    variants.
//! 6. [`metrics`] scores predictions with accuracy / sensitivity /
//!    specificity, reporting undefined ratios explicitly.
//! 7. [`pipeline`] wires the above together and provides deterministic
//!    synthetic fixtures for testing and calibration.
//!
//! All floating point work is `f64`. Every random element is seeded
//! explicitly; identical inputs produce identical outputs, byte for byte,
//! including across thread counts.

mod error;
pub mod fsutil;
pub mod classify;
pub mod features;
pub mod ingest;
pub mod metrics;
pub mod pipeline;
pub mod preprocess;
pub mod xwavelet;

pub use error::{Error, Result};
