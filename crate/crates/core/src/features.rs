//! Scalar features for classification.
//!
//! A beat is compared to the template through two matrices (cross spectrum
//! and coherence); everything the classifiers see is two numbers summed
//! from a fixed region of those matrices: the coherence mass `pa` and the
//! co-spectrum mass `pb`, taken over the QT window in time and a band of
//! scales that covers the QRS-to-T morphology.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil;
use crate::xwavelet::{WcohMatrix, WcsMatrix};

/// Inclusive time and scale bounds the features are summed over.
///
/// Times index the normalized 1000-sample beat; scales are values on the
/// transform's grid (with the default integer grid, scale 75 is row 75
/// counting from 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalysisWindow {
    pub t1: usize,
    pub t2: usize,
    pub s1: usize,
    pub s2: usize,
}

/// Offsets of the QT zone around the R peak: 80 samples to the left, 400
/// to the right.
pub const QT_LEFT: usize = 80;
pub const QT_RIGHT: usize = 400;

/// Default scale band the features integrate over.
pub const BAND_LO: usize = 75;
pub const BAND_HI: usize = 300;

impl AnalysisWindow {
    pub fn new(t1: usize, t2: usize, s1: usize, s2: usize) -> Result<Self> {
        if t1 >= t2 || t2 > 999 {
            return Err(Error::WindowOutOfBounds {
                msg: format!("need 0 <= t1 < t2 <= 999, got {t1}..{t2}"),
            });
        }
        if s1 == 0 || s1 >= s2 || s2 > 512 {
            return Err(Error::WindowOutOfBounds {
                msg: format!("need 1 <= s1 < s2 <= 512, got {s1}..{s2}"),
            });
        }
        Ok(AnalysisWindow { t1, t2, s1, s2 })
    }

    /// The QT window around the fixed normalized R index with the default
    /// scale band: times 253..=733, scales 75..=300.
    pub fn default_qt() -> Self {
        let (t1, t2) = qt_window(crate::preprocess::NORMALIZED_R_INDEX)
            .expect("the fixed R index admits the QT offsets");
        AnalysisWindow::new(t1, t2, BAND_LO, BAND_HI).expect("static bounds")
    }
}

/// QT zone bounds for a beat whose R peak sits at `r_index` on the
/// 1000-sample grid. Errors when the offsets leave the beat.
pub fn qt_window(r_index: usize) -> Result<(usize, usize)> {
    if r_index < QT_LEFT || r_index + QT_RIGHT > 999 {
        return Err(Error::WindowOutOfBounds {
            msg: format!(
                "QT zone around R at {r_index} spans {}..{}, outside 0..=999",
                r_index as i64 - QT_LEFT as i64,
                r_index + QT_RIGHT
            ),
        });
    }
    Ok((r_index - QT_LEFT, r_index + QT_RIGHT))
}

/// The two scalars the classifiers consume, tagged with the beat they came
/// from. `pa` sums coherence values (each in [0, 1]) over the window; `pb`
/// sums the real part of the cross spectrum (the co-spectrum), which is
/// signed: in-phase morphology pushes it up, anti-phase pulls it down.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub pa: f64,
    pub pb: f64,
    pub beat_id: String,
}

/// Per-scale co-spectrum sums over `t1..=t2`, one entry per grid row. This
/// is the curve used to choose the scale band: bands where normal and
/// infarcted beats separate show up as sign or magnitude differences.
pub fn sum_wcs_per_scale(wcs: &WcsMatrix, t1: usize, t2: usize) -> Result<Vec<f64>> {
    if t1 > t2 || t2 >= wcs.n_times() {
        return Err(Error::WindowOutOfBounds {
            msg: format!("time window {t1}..{t2} on {} samples", wcs.n_times()),
        });
    }
    Ok((0..wcs.n_scales())
        .map(|r| wcs.row(r)[t1..=t2].iter().map(|v| v.re).sum())
        .collect())
}

/// Sums both matrices over the window: `pa` from the coherence, `pb` from
/// the co-spectrum. Rows are resolved from the scale values in `window`
/// against the matrix grid; both bounds are inclusive.
pub fn extract_features(
    wcs: &WcsMatrix,
    wcoh: &WcohMatrix,
    window: &AnalysisWindow,
    beat_id: &str,
) -> Result<FeatureVector> {
    if wcs.n_times() != wcoh.n_times() || wcs.grid().values() != wcoh.grid().values() {
        return Err(Error::DimensionMismatch {
            left: format!("{} x {} cross spectrum", wcs.n_scales(), wcs.n_times()),
            right: format!("{} x {} coherence", wcoh.n_scales(), wcoh.n_times()),
        });
    }
    if window.t2 >= wcs.n_times() {
        return Err(Error::WindowOutOfBounds {
            msg: format!(
                "time window {}..{} on {} samples",
                window.t1,
                window.t2,
                wcs.n_times()
            ),
        });
    }
    let (row_lo, row_hi) = wcs.grid().band_rows(window.s1 as f64, window.s2 as f64)?;

    let mut pa = 0.0;
    let mut pb = 0.0;
    for row in row_lo..=row_hi {
        for v in &wcoh.row(row)[window.t1..=window.t2] {
            pa += v;
        }
        for v in &wcs.row(row)[window.t1..=window.t2] {
            pb += v.re;
        }
    }
    Ok(FeatureVector {
        pa,
        pb,
        beat_id: beat_id.to_string(),
    })
}

/// One line of the feature table: the vector plus its provenance and, when
/// known, its class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub beat_id: String,
    pub record_id: String,
    pub lead: String,
    pub pa: f64,
    pub pb: f64,
    /// Ground-truth class name, empty-serialized when unknown.
    pub label: Option<String>,
    /// Predicted class name, present only in classifier output.
    pub predicted: Option<String>,
}

const FEATURE_HEADER: &str = "beat_id,record_id,lead,pa,pb,label";

fn check_field(name: &str, value: &str) -> Result<()> {
    if value.contains(',') || value.contains('\n') {
        return Err(Error::InvalidParameter {
            msg: format!("{name} {value:?} may not contain commas or newlines"),
        });
    }
    Ok(())
}

/// Writes the feature table. A `predicted` column is appended exactly when
/// any row carries a prediction, so extraction output and classifier output
/// stay distinguishable by header alone.
pub fn write_feature_csv(path: &Path, rows: &[FeatureRow]) -> Result<()> {
    let with_predictions = rows.iter().any(|r| r.predicted.is_some());
    let mut text = String::from(FEATURE_HEADER);
    if with_predictions {
        text.push_str(",predicted");
    }
    text.push('\n');
    for row in rows {
        check_field("beat id", &row.beat_id)?;
        check_field("record id", &row.record_id)?;
        check_field("lead", &row.lead)?;
        let label = row.label.as_deref().unwrap_or("");
        check_field("label", label)?;
        text.push_str(&format!(
            "{},{},{},{},{},{}",
            row.beat_id, row.record_id, row.lead, row.pa, row.pb, label
        ));
        if with_predictions {
            let predicted = row.predicted.as_deref().unwrap_or("");
            check_field("prediction", predicted)?;
            text.push(',');
            text.push_str(predicted);
        }
        text.push('\n');
    }
    fsutil::write_atomic(path, text.as_bytes())
}

pub fn read_feature_csv(path: &Path) -> Result<Vec<FeatureRow>> {
    let text = fsutil::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty feature table"))?;
    let with_predictions = match header {
        h if h == FEATURE_HEADER => false,
        h if h == format!("{FEATURE_HEADER},predicted") => true,
        other => {
            return Err(Error::parse(
                path,
                1,
                format!("unrecognized feature table header {other:?}"),
            ))
        }
    };
    let n_fields = if with_predictions { 7 } else { 6 };

    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n_fields {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected {n_fields} fields, found {}", fields.len()),
            ));
        }
        let pa: f64 = fields[3]
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("bad pa value {:?}", fields[3])))?;
        let pb: f64 = fields[4]
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("bad pb value {:?}", fields[4])))?;
        if !pa.is_finite() || !pb.is_finite() {
            return Err(Error::parse(path, line_no, "non-finite feature value"));
        }
        let optional = |s: &str| (!s.is_empty()).then(|| s.to_string());
        rows.push(FeatureRow {
            beat_id: fields[0].to_string(),
            record_id: fields[1].to_string(),
            lead: fields[2].to_string(),
            pa,
            pb,
            label: optional(fields[5]),
            predicted: if with_predictions {
                optional(fields[6])
            } else {
                None
            },
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use num_complex::Complex64;
    use proptest::prelude::*;

    use super::*;
    use crate::xwavelet::ScaleGrid;

    fn ones_coherence(n_scales: u32, n_times: usize) -> WcohMatrix {
        let grid = ScaleGrid::linear(1, n_scales).unwrap();
        WcohMatrix::from_values(grid, n_times, vec![1.0; n_scales as usize * n_times]).unwrap()
    }

    fn constant_wcs(n_scales: u32, n_times: usize, v: Complex64) -> WcsMatrix {
        let grid = ScaleGrid::linear(1, n_scales).unwrap();
        WcsMatrix::from_values(grid, n_times, vec![v; n_scales as usize * n_times]).unwrap()
    }

    #[test]
    fn qt_window_around_the_normalized_r_index() {
        assert_eq!(qt_window(333).unwrap(), (253, 733));
        assert!(matches!(qt_window(79), Err(Error::WindowOutOfBounds { .. })));
        assert!(matches!(qt_window(600), Err(Error::WindowOutOfBounds { .. })));
        assert_eq!(qt_window(80).unwrap(), (0, 480));
        assert_eq!(qt_window(599).unwrap(), (519, 999));
    }

    #[test]
    fn default_window_matches_the_standard_offsets() {
        let w = AnalysisWindow::default_qt();
        assert_eq!((w.t1, w.t2, w.s1, w.s2), (253, 733, 75, 300));
    }

    #[test]
    fn window_bounds_are_validated() {
        assert!(AnalysisWindow::new(10, 10, 1, 2).is_err());
        assert!(AnalysisWindow::new(10, 1000, 1, 2).is_err());
        assert!(AnalysisWindow::new(0, 999, 0, 2).is_err());
        assert!(AnalysisWindow::new(0, 999, 5, 5).is_err());
        assert!(AnalysisWindow::new(0, 999, 5, 513).is_err());
    }

    #[test]
    fn per_scale_sums_follow_the_real_part() {
        let zero = constant_wcs(4, 10, Complex64::new(0.0, 0.0));
        assert_eq!(sum_wcs_per_scale(&zero, 0, 9).unwrap(), vec![0.0; 4]);

        let ones = constant_wcs(4, 1000, Complex64::new(1.0, 0.0));
        let sums = sum_wcs_per_scale(&ones, 253, 733).unwrap();
        assert_eq!(sums, vec![481.0; 4]);

        let imag = constant_wcs(2, 8, Complex64::new(0.0, 1.0));
        assert_eq!(sum_wcs_per_scale(&imag, 0, 7).unwrap(), vec![0.0; 2]);

        assert!(sum_wcs_per_scale(&imag, 0, 8).is_err());
    }

    #[test]
    fn saturated_coherence_gives_the_full_window_mass() {
        let wcoh = ones_coherence(512, 1000);
        let wcs = constant_wcs(512, 1000, Complex64::new(0.0, 0.0));
        let fv = extract_features(&wcs, &wcoh, &AnalysisWindow::default_qt(), "b").unwrap();
        assert_eq!(fv.pa, 108_706.0); // 226 scales x 481 samples
        assert_eq!(fv.pb, 0.0);
        assert_eq!(fv.beat_id, "b");
    }

    #[test]
    fn mismatched_matrices_and_windows_are_rejected() {
        let wcoh = ones_coherence(8, 100);
        let wcs = constant_wcs(8, 101, Complex64::new(0.0, 0.0));
        let window = AnalysisWindow::new(0, 50, 2, 6).unwrap();
        assert!(matches!(
            extract_features(&wcs, &wcoh, &window, "b"),
            Err(Error::DimensionMismatch { .. })
        ));

        let wcs = constant_wcs(8, 100, Complex64::new(0.0, 0.0));
        let far = AnalysisWindow::new(0, 150, 2, 6).unwrap();
        assert!(matches!(
            extract_features(&wcs, &wcoh, &far, "b"),
            Err(Error::WindowOutOfBounds { .. })
        ));

        let off_grid = AnalysisWindow::new(0, 50, 100, 200).unwrap();
        assert!(extract_features(&wcs, &wcoh, &off_grid, "b").is_err());
    }

    /// Uniform dyadic rationals: sums of any subset are exact in f64, so
    /// additivity can be asserted as equality rather than approximately.
    fn quantized(seed: u64, len: usize, nonneg: bool) -> Vec<f64> {
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
        (0..len)
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                let k = ((state >> 40) & 0xFFFFF) as i64 - if nonneg { 0 } else { 1 << 19 };
                k as f64 / 1024.0
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn features_are_additive_over_disjoint_time_windows(
            seed in 0u64..10_000, split in 1usize..98
        ) {
            let n_scales = 6u32;
            let n = 100;
            let grid = ScaleGrid::linear(1, n_scales).unwrap();
            let coh: Vec<f64> = quantized(seed, n_scales as usize * n, true)
                .iter().map(|v| v / 1024.0).collect();
            let wcoh = WcohMatrix::from_values(grid.clone(), n, coh).unwrap();
            let wcs_vals: Vec<Complex64> = quantized(seed ^ 0xABCD, 2 * n_scales as usize * n, false)
                .chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
            let wcs = WcsMatrix::from_values(grid, n, wcs_vals).unwrap();

            let whole = AnalysisWindow::new(0, n - 1, 2, 5).unwrap();
            let left = AnalysisWindow::new(0, split, 2, 5).unwrap();
            let right = AnalysisWindow::new(split + 1, n - 1, 2, 5).unwrap();

            let f_whole = extract_features(&wcs, &wcoh, &whole, "b").unwrap();
            let f_left = extract_features(&wcs, &wcoh, &left, "b").unwrap();
            let f_right = extract_features(&wcs, &wcoh, &right, "b").unwrap();

            prop_assert_eq!(f_whole.pa, f_left.pa + f_right.pa);
            prop_assert_eq!(f_whole.pb, f_left.pb + f_right.pb);
            prop_assert!(f_whole.pa >= 0.0);
            prop_assert!(f_whole.pa <= (4 * n) as f64);
        }

        #[test]
        fn co_spectrum_mass_is_symmetric_under_argument_swap(seed in 0u64..10_000) {
            use crate::xwavelet::{cwt_morlet, xwt};
            let grid = ScaleGrid::linear(1, 8).unwrap();
            let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
            let mut next = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            };
            let x: Vec<f64> = (0..64).map(|_| next()).collect();
            let y: Vec<f64> = (0..64).map(|_| next()).collect();
            let wx = cwt_morlet(&x, &grid).unwrap();
            let wy = cwt_morlet(&y, &grid).unwrap();
            let window = AnalysisWindow::new(5, 60, 2, 7).unwrap();
            let coh = ones_coherence(8, 64);
            let xy = extract_features(&xwt(&wx, &wy).unwrap(), &coh, &window, "b").unwrap();
            let yx = extract_features(&xwt(&wy, &wx).unwrap(), &coh, &window, "b").unwrap();
            prop_assert!((xy.pb - yx.pb).abs() <= 1e-9 * xy.pb.abs().max(1.0));
        }
    }

    #[test]
    fn feature_table_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        let rows = vec![
            FeatureRow {
                beat_id: "rec1:500".into(),
                record_id: "rec1".into(),
                lead: "iii".into(),
                pa: 101_325.5,
                pb: -42.25,
                label: Some("Normal".into()),
                predicted: None,
            },
            FeatureRow {
                beat_id: "rec1:1333".into(),
                record_id: "rec1".into(),
                lead: "iii".into(),
                pa: 88_000.0,
                pb: 17.0,
                label: None,
                predicted: None,
            },
        ];
        write_feature_csv(&path, &rows).unwrap();
        assert_eq!(read_feature_csv(&path).unwrap(), rows);

        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("beat_id,record_id,lead,pa,pb,label\n"));
        assert!(text.lines().nth(2).unwrap().ends_with(','));
    }

    #[test]
    fn labeled_table_round_trips_with_predictions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labeled.csv");
        let rows = vec![FeatureRow {
            beat_id: "r:1".into(),
            record_id: "r".into(),
            lead: "iii".into(),
            pa: 1.0,
            pb: 2.0,
            label: Some("IMI_Type1".into()),
            predicted: Some("IMI_Type2".into()),
        }];
        write_feature_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("beat_id,record_id,lead,pa,pb,label,predicted\n"));
        assert_eq!(read_feature_csv(&path).unwrap(), rows);
    }

    #[test]
    fn fields_with_separators_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        let row = FeatureRow {
            beat_id: "a,b".into(),
            record_id: "r".into(),
            lead: "iii".into(),
            pa: 0.0,
            pb: 0.0,
            label: None,
            predicted: None,
        };
        assert!(write_feature_csv(&path, &[row]).is_err());
    }
}
