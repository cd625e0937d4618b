//! End-to-end orchestration: a raw record is denoised, cut into beats,
//! normalized, and each beat is cross-examined against a fixed normal
//! template to produce the two classification features.
//!
//! The expensive per-template work (its transform, its smoothed power, the
//! smoothing kernels themselves) is done once in [`BeatAnalyzer`] and
//! shared across all beats of a run.

mod synth;

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::features::{extract_features, AnalysisWindow, FeatureVector};
use crate::fsutil;
use crate::ingest::EcgRecord;
use crate::preprocess::{
    denoise, detect_r_peaks, read_beat_csv, resample_to_1000, segment_beats, write_beat_csv,
    NormalizedBeat,
};
use crate::xwavelet::{
    coherence_against, cwt_morlet, smoothed_scaled_power, xwt, CwtMatrix, ScaleGrid, Smoother,
    WcohMatrix, WcsMatrix,
};

pub use synth::{
    generate_synthetic_beat, generate_synthetic_record, preset_spec, synthetic_template,
    SyntheticBeatSpec, SyntheticRecordSpec, NORMAL_QRS_MV,
};

/// The normal reference beat every subject beat is compared against, with
/// a human-readable note on where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateBeat {
    pub beat: NormalizedBeat,
    pub provenance: String,
}

impl TemplateBeat {
    pub fn new(beat: NormalizedBeat, provenance: impl Into<String>) -> Result<Self> {
        let provenance = provenance.into();
        if provenance.trim().is_empty() {
            return Err(Error::InvalidParameter {
                msg: "template provenance must not be empty".into(),
            });
        }
        Ok(TemplateBeat { beat, provenance })
    }
}

fn provenance_path(template_path: &Path) -> PathBuf {
    let mut name = template_path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".prov");
    template_path.with_file_name(name)
}

/// Writes the template as the ordinary 1000-line beat CSV plus a `.prov`
/// sidecar holding the provenance text.
pub fn write_template(path: &Path, template: &TemplateBeat) -> Result<()> {
    write_beat_csv(path, &template.beat)?;
    let mut text = template.provenance.clone();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    fsutil::write_atomic(&provenance_path(path), text.as_bytes())
}

pub fn read_template(path: &Path) -> Result<TemplateBeat> {
    let beat = read_beat_csv(path)?;
    let provenance = fsutil::read_to_string(&provenance_path(path))?;
    TemplateBeat::new(beat, provenance.trim_end_matches('\n'))
}

/// Per-template state reused across beats: the template's transform and
/// smoothed scaled power, and the smoothing kernels for the grid.
pub struct BeatAnalyzer {
    grid: ScaleGrid,
    window: AnalysisWindow,
    smoother: Smoother,
    template_cwt: CwtMatrix,
    template_power: Vec<f64>,
}

impl BeatAnalyzer {
    pub fn new(template: &TemplateBeat, grid: ScaleGrid, window: AnalysisWindow) -> Result<Self> {
        // Fail at construction when the feature band misses the grid, not
        // on the thousandth beat.
        grid.band_rows(window.s1 as f64, window.s2 as f64)?;
        let n_times = template.beat.samples.len();
        if window.t2 >= n_times {
            return Err(Error::WindowOutOfBounds {
                msg: format!(
                    "time window {}..{} on {} samples",
                    window.t1, window.t2, n_times
                ),
            });
        }
        let smoother = Smoother::new(&grid, n_times);
        let template_cwt = cwt_morlet(&template.beat.samples, &grid)?;
        let template_power = smoothed_scaled_power(&template_cwt, Some(&smoother));
        Ok(BeatAnalyzer {
            grid,
            window,
            smoother,
            template_cwt,
            template_power,
        })
    }

    pub fn grid(&self) -> &ScaleGrid {
        &self.grid
    }

    pub fn window(&self) -> &AnalysisWindow {
        &self.window
    }

    /// Cross-examines one beat against the template: cross spectrum with
    /// the template as the first series, coherence, then the windowed
    /// feature sums.
    pub fn analyze(&self, beat: &NormalizedBeat) -> Result<(WcsMatrix, WcohMatrix, FeatureVector)> {
        let beat_cwt = cwt_morlet(&beat.samples, &self.grid)?;
        let wcs = xwt(&self.template_cwt, &beat_cwt)?;
        let wcoh = coherence_against(
            &self.template_cwt,
            &self.template_power,
            &beat_cwt,
            Some(&self.smoother),
            true,
        );
        let fv = extract_features(&wcs, &wcoh, &self.window, &beat.beat_id())?;
        Ok((wcs, wcoh, fv))
    }
}

/// One-shot form of [`BeatAnalyzer::analyze`] on the default scale grid.
pub fn analyze_beat(
    beat: &NormalizedBeat,
    template: &TemplateBeat,
    window: &AnalysisWindow,
) -> Result<(WcsMatrix, WcohMatrix, FeatureVector)> {
    BeatAnalyzer::new(template, ScaleGrid::default_512(), *window)?.analyze(beat)
}

/// Full record pass with a prepared analyzer: denoise the chosen lead,
/// find R peaks, cut and normalize beats, analyze each. Feature vectors
/// come back in R-peak order. A record with fewer than two detected peaks
/// yields an empty list (with a warning), since beat boundaries need at
/// least one RR interval.
pub fn analyze_record_with(
    analyzer: &BeatAnalyzer,
    record: &EcgRecord,
    lead: &str,
) -> Result<Vec<FeatureVector>> {
    let raw = record.select_lead(lead)?;
    let clean = denoise(raw, record.sampling_rate)?;
    let peaks = detect_r_peaks(&clean, record.sampling_rate);
    if peaks.len() < 2 {
        log::warn!(
            "record {}: found {} R peak(s), need at least 2; no beats emitted",
            record.record_id,
            peaks.len()
        );
        return Ok(Vec::new());
    }
    let mut features = Vec::new();
    for segment in segment_beats(&clean, &peaks) {
        let beat = resample_to_1000(&segment, &record.record_id, lead)?;
        let (_, _, fv) = analyzer.analyze(&beat)?;
        features.push(fv);
    }
    Ok(features)
}

/// Record pass on the default grid. See [`analyze_record_with`].
pub fn analyze_record(
    record: &EcgRecord,
    lead: &str,
    template: &TemplateBeat,
    window: &AnalysisWindow,
) -> Result<Vec<FeatureVector>> {
    let analyzer = BeatAnalyzer::new(template, ScaleGrid::default_512(), *window)?;
    analyze_record_with(&analyzer, record, lead)
}
