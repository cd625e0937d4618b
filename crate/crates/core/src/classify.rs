//! Two-stage beat classification.
//!
//! Stage one is a pair of scalar thresholds deciding normal against
//! infarcted: a beat is abnormal only when both features fall below their
//! thresholds. Stage two refines abnormal beats into the two infarct types
//! with a small k-nearest-neighbor vote in standardized feature space.
//! Models are plain data, fitted once and immutable afterwards.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::fsutil;

/// Final beat classes. Type 1 covers infarcts expressed through ST and
/// QRS changes without a pathological Q wave; Type 2 covers Q-wave
/// infarcts with T inversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassLabel {
    Normal,
    ImiType1,
    ImiType2,
}

/// First-stage outcome. Abnormal beats go on to the type refinement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoarseClass {
    Normal,
    Abnormal,
}

impl ClassLabel {
    pub fn coarse(self) -> CoarseClass {
        match self {
            ClassLabel::Normal => CoarseClass::Normal,
            ClassLabel::ImiType1 | ClassLabel::ImiType2 => CoarseClass::Abnormal,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Normal => "Normal",
            ClassLabel::ImiType1 => "IMI_Type1",
            ClassLabel::ImiType2 => "IMI_Type2",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Normal" => Ok(ClassLabel::Normal),
            "IMI_Type1" => Ok(ClassLabel::ImiType1),
            "IMI_Type2" => Ok(ClassLabel::ImiType2),
            other => Err(Error::InvalidParameter {
                msg: format!(
                    "unknown class label {other:?}, expected Normal, IMI_Type1 or IMI_Type2"
                ),
            }),
        }
    }
}

/// Stage-one decision boundaries, one per feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdModel {
    pub th_pa: f64,
    pub th_pb: f64,
}

fn check_feature_finite(fv: &FeatureVector) -> Result<()> {
    if !fv.pa.is_finite() {
        return Err(Error::NonFinite { what: "pa" });
    }
    if !fv.pb.is_finite() {
        return Err(Error::NonFinite { what: "pb" });
    }
    Ok(())
}

/// Picks the threshold maximizing Youden's index (sensitivity plus
/// specificity minus one) of the rule "value below threshold means
/// abnormal". Candidates are midpoints between consecutive distinct sorted
/// values. Ties go to the candidate sitting in the widest gap, then to the
/// smaller threshold, so the result is deterministic.
fn fit_one_threshold(values: &[f64], abnormal: &[bool]) -> f64 {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    let n_abn = abnormal.iter().filter(|&&a| a).count();
    let n_norm = values.len() - n_abn;

    // abn_below tracks how many abnormal values sit strictly below the
    // candidate while sweeping the sorted order.
    let mut abn_below = 0usize;
    let mut seen = 0usize;
    let mut best: Option<(f64, f64, f64)> = None; // (youden, margin, th)
    for (pos, &idx) in order.iter().enumerate() {
        if pos > 0 {
            let prev = values[order[pos - 1]];
            let cur = values[idx];
            if cur > prev {
                let th = (prev + cur) / 2.0;
                let norm_below = seen - abn_below;
                let se = abn_below as f64 / n_abn as f64;
                let sp = (n_norm - norm_below) as f64 / n_norm as f64;
                let youden = se + sp - 1.0;
                let margin = (cur - prev) / 2.0;
                let better = match best {
                    None => true,
                    Some((j, m, t)) => {
                        youden > j || (youden == j && (margin > m || (margin == m && th < t)))
                    }
                };
                if better {
                    best = Some((youden, margin, th));
                }
            }
        }
        seen += 1;
        if abnormal[idx] {
            abn_below += 1;
        }
    }
    match best {
        Some((_, _, th)) => th,
        // Every value equal: no gap to place a boundary in, so the common
        // value itself stands as the (useless but deterministic) threshold.
        None => values[order[0]],
    }
}

/// Fits both stage-one thresholds independently from coarse-labeled
/// training features.
pub fn fit_thresholds(
    features: &[FeatureVector],
    coarse: &[CoarseClass],
) -> Result<ThresholdModel> {
    if features.len() != coarse.len() {
        return Err(Error::DimensionMismatch {
            left: format!("{} feature vectors", features.len()),
            right: format!("{} labels", coarse.len()),
        });
    }
    if features.is_empty() {
        return Err(Error::SingleClass {
            msg: "threshold fitting needs labeled features, got none".into(),
        });
    }
    for fv in features {
        check_feature_finite(fv)?;
    }
    let abnormal: Vec<bool> = coarse.iter().map(|&c| c == CoarseClass::Abnormal).collect();
    let n_abn = abnormal.iter().filter(|&&a| a).count();
    if n_abn == 0 || n_abn == features.len() {
        return Err(Error::SingleClass {
            msg: format!(
                "threshold fitting needs both classes, got {n_abn} abnormal of {}",
                features.len()
            ),
        });
    }
    let pa: Vec<f64> = features.iter().map(|f| f.pa).collect();
    let pb: Vec<f64> = features.iter().map(|f| f.pb).collect();
    Ok(ThresholdModel {
        th_pa: fit_one_threshold(&pa, &abnormal),
        th_pb: fit_one_threshold(&pb, &abnormal),
    })
}

/// Stage one: abnormal exactly when both features fall strictly below
/// their thresholds.
pub fn classify_coarse(fv: &FeatureVector, model: &ThresholdModel) -> Result<CoarseClass> {
    check_feature_finite(fv)?;
    if fv.pa < model.th_pa && fv.pb < model.th_pb {
        Ok(CoarseClass::Abnormal)
    } else {
        Ok(CoarseClass::Normal)
    }
}

/// Stage-two model: the training points kept raw alongside the
/// standardization computed from them, so the file form stays readable and
/// prediction reproduces exactly after a round trip.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    points: Vec<(f64, f64, ClassLabel)>,
    k: usize,
    mean_pa: f64,
    mean_pb: f64,
    std_pa: f64,
    std_pb: f64,
}

impl KnnModel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn standardize(&self, pa: f64, pb: f64) -> (f64, f64) {
        (
            (pa - self.mean_pa) / self.std_pa,
            (pb - self.mean_pb) / self.std_pb,
        )
    }

    fn validate(self) -> Result<Self> {
        if self.k == 0 || self.k % 2 == 0 {
            return Err(Error::InvalidParameter {
                msg: format!("k must be a positive odd integer, got {}", self.k),
            });
        }
        if self.k > self.points.len() {
            return Err(Error::InvalidParameter {
                msg: format!(
                    "k = {} exceeds the {} training points",
                    self.k,
                    self.points.len()
                ),
            });
        }
        let mut seen_t1 = false;
        let mut seen_t2 = false;
        for &(pa, pb, label) in &self.points {
            if !pa.is_finite() || !pb.is_finite() {
                return Err(Error::NonFinite {
                    what: "training feature",
                });
            }
            match label {
                ClassLabel::ImiType1 => seen_t1 = true,
                ClassLabel::ImiType2 => seen_t2 = true,
                ClassLabel::Normal => {
                    return Err(Error::InvalidParameter {
                        msg: "type refinement trains on infarct beats only, found Normal".into(),
                    })
                }
            }
        }
        if !(seen_t1 && seen_t2) {
            return Err(Error::SingleClass {
                msg: "type refinement needs both infarct types in training".into(),
            });
        }
        if !(self.std_pa > 0.0) || !self.std_pa.is_finite() {
            return Err(Error::ZeroVariance { feature: "pa" });
        }
        if !(self.std_pb > 0.0) || !self.std_pb.is_finite() {
            return Err(Error::ZeroVariance { feature: "pb" });
        }
        if !self.mean_pa.is_finite() || !self.mean_pb.is_finite() {
            return Err(Error::NonFinite {
                what: "standardization mean",
            });
        }
        Ok(self)
    }
}

fn mean_and_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Fits the type refinement: stores the training set and its per-feature
/// z-score parameters. The two features live on very different magnitudes,
/// so distances are always taken in standardized space.
pub fn knn_fit(features: &[FeatureVector], labels: &[ClassLabel], k: usize) -> Result<KnnModel> {
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            left: format!("{} feature vectors", features.len()),
            right: format!("{} labels", labels.len()),
        });
    }
    for fv in features {
        check_feature_finite(fv)?;
    }
    let points: Vec<(f64, f64, ClassLabel)> = features
        .iter()
        .zip(labels)
        .map(|(f, &l)| (f.pa, f.pb, l))
        .collect();
    if points.is_empty() {
        return Err(Error::SingleClass {
            msg: "type refinement needs training points, got none".into(),
        });
    }
    let (mean_pa, std_pa) = mean_and_std(points.iter().map(|p| p.0));
    let (mean_pb, std_pb) = mean_and_std(points.iter().map(|p| p.1));
    KnnModel {
        points,
        k,
        mean_pa,
        mean_pb,
        std_pa,
        std_pb,
    }
    .validate()
}

/// Stage two: majority vote among the k standardized-Euclidean nearest
/// training points. Distance ties resolve to the lower training index, and
/// odd k over two classes keeps the vote itself tie-free.
pub fn knn_predict(model: &KnnModel, fv: &FeatureVector) -> Result<ClassLabel> {
    check_feature_finite(fv)?;
    let (qa, qb) = model.standardize(fv.pa, fv.pb);
    let mut ranked: Vec<(f64, usize)> = model
        .points
        .iter()
        .enumerate()
        .map(|(idx, &(pa, pb, _))| {
            let (za, zb) = model.standardize(pa, pb);
            let (dx, dy) = (za - qa, zb - qb);
            (dx * dx + dy * dy, idx)
        })
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let votes_t1 = ranked[..model.k]
        .iter()
        .filter(|&&(_, idx)| model.points[idx].2 == ClassLabel::ImiType1)
        .count();
    Ok(if 2 * votes_t1 > model.k {
        ClassLabel::ImiType1
    } else {
        ClassLabel::ImiType2
    })
}

/// Both stages composed: coarse-normal beats never reach the vote.
pub fn classify_hierarchical(
    fv: &FeatureVector,
    thresholds: &ThresholdModel,
    knn: &KnnModel,
) -> Result<ClassLabel> {
    match classify_coarse(fv, thresholds)? {
        CoarseClass::Normal => Ok(ClassLabel::Normal),
        CoarseClass::Abnormal => knn_predict(knn, fv),
    }
}

const MODEL_MAGIC: &str = "xwtecg-model-v1";

/// Writes both models as one versioned text file: the magic line, the
/// thresholds as key = value lines, then the training points as a CSV
/// block whose header line records k and the standardization parameters.
pub fn write_model(path: &Path, thresholds: &ThresholdModel, knn: &KnnModel) -> Result<()> {
    let mut text = format!(
        "{MODEL_MAGIC}\nth_pa = {}\nth_pb = {}\npoints: k={} mean_pa={} mean_pb={} std_pa={} std_pb={}\n",
        thresholds.th_pa, thresholds.th_pb, knn.k, knn.mean_pa, knn.mean_pb, knn.std_pa, knn.std_pb
    );
    for &(pa, pb, label) in &knn.points {
        text.push_str(&format!("{pa},{pb},{label}\n"));
    }
    fsutil::write_atomic(path, text.as_bytes())
}

fn parse_model_float(path: &Path, line_no: usize, text: &str) -> Result<f64> {
    let v: f64 = text
        .parse()
        .map_err(|_| Error::parse(path, line_no, format!("bad numeric value {text:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(path, line_no, "non-finite model value"));
    }
    Ok(v)
}

pub fn read_model(path: &Path) -> Result<(ThresholdModel, KnnModel)> {
    let text = fsutil::read_to_string(path)?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    match lines.next() {
        Some((_, line)) if line == MODEL_MAGIC => {}
        Some((no, line)) => {
            return Err(Error::parse(
                path,
                no,
                format!("expected magic token {MODEL_MAGIC:?}, found {line:?}"),
            ))
        }
        None => return Err(Error::parse(path, 1, "empty model file")),
    }

    let mut take_key = |key: &str| -> Result<f64> {
        let (no, line) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 0, format!("missing {key} line")))?;
        let value = line
            .strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(" = "))
            .ok_or_else(|| Error::parse(path, no, format!("expected \"{key} = <value>\"")))?;
        parse_model_float(path, no, value)
    };
    let th_pa = take_key("th_pa")?;
    let th_pb = take_key("th_pb")?;

    let (header_no, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 0, "missing points header"))?;
    let rest = header
        .strip_prefix("points: ")
        .ok_or_else(|| Error::parse(path, header_no, "expected \"points: ...\" header"))?;
    let mut k = None;
    let mut params = [None; 4];
    for part in rest.split(' ') {
        let (key, value) = part.split_once('=').ok_or_else(|| {
            Error::parse(path, header_no, format!("bad header field {part:?}"))
        })?;
        match key {
            "k" => {
                k = Some(value.parse::<usize>().map_err(|_| {
                    Error::parse(path, header_no, format!("bad k value {value:?}"))
                })?)
            }
            "mean_pa" => params[0] = Some(parse_model_float(path, header_no, value)?),
            "mean_pb" => params[1] = Some(parse_model_float(path, header_no, value)?),
            "std_pa" => params[2] = Some(parse_model_float(path, header_no, value)?),
            "std_pb" => params[3] = Some(parse_model_float(path, header_no, value)?),
            other => {
                return Err(Error::parse(
                    path,
                    header_no,
                    format!("unknown header field {other:?}"),
                ))
            }
        }
    }
    let missing = || Error::parse(path, header_no, "incomplete points header");
    let k = k.ok_or_else(missing)?;
    let [mean_pa, mean_pb, std_pa, std_pb] = params.map(|p| p.ok_or_else(missing));

    let mut points = Vec::new();
    for (no, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                path,
                no,
                format!("expected pa,pb,label, found {} fields", fields.len()),
            ));
        }
        let pa = parse_model_float(path, no, fields[0])?;
        let pb = parse_model_float(path, no, fields[1])?;
        let label: ClassLabel = fields[2]
            .parse()
            .map_err(|_| Error::parse(path, no, format!("bad label {:?}", fields[2])))?;
        points.push((pa, pb, label));
    }

    let knn = KnnModel {
        points,
        k,
        mean_pa: mean_pa?,
        mean_pb: mean_pb?,
        std_pa: std_pa?,
        std_pb: std_pb?,
    }
    .validate()?;
    if !th_pa.is_finite() || !th_pb.is_finite() {
        return Err(Error::NonFinite { what: "threshold" });
    }
    Ok((ThresholdModel { th_pa, th_pb }, knn))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn fv(pa: f64, pb: f64) -> FeatureVector {
        FeatureVector {
            pa,
            pb,
            beat_id: String::new(),
        }
    }

    fn fvs(points: &[(f64, f64)]) -> Vec<FeatureVector> {
        points.iter().map(|&(a, b)| fv(a, b)).collect()
    }

    #[test]
    fn labels_round_trip_through_their_names() {
        for label in [ClassLabel::Normal, ClassLabel::ImiType1, ClassLabel::ImiType2] {
            assert_eq!(label.to_string().parse::<ClassLabel>().unwrap(), label);
        }
        assert!("imi_type1".parse::<ClassLabel>().is_err());
        assert_eq!(ClassLabel::Normal.coarse(), CoarseClass::Normal);
        assert_eq!(ClassLabel::ImiType1.coarse(), CoarseClass::Abnormal);
        assert_eq!(ClassLabel::ImiType2.coarse(), CoarseClass::Abnormal);
    }

    #[test]
    fn separable_thresholds_land_in_the_widest_gap() {
        let features = fvs(&[(10.0, 20.0), (12.0, 24.0), (2.0, 4.0), (3.0, 6.0)]);
        let coarse = [
            CoarseClass::Normal,
            CoarseClass::Normal,
            CoarseClass::Abnormal,
            CoarseClass::Abnormal,
        ];
        let model = fit_thresholds(&features, &coarse).unwrap();
        assert_eq!(model.th_pa, 6.5);
        assert_eq!(model.th_pb, 13.0);
    }

    #[test]
    fn threshold_fitting_rejects_degenerate_inputs() {
        let features = fvs(&[(1.0, 1.0), (2.0, 2.0)]);
        assert!(matches!(
            fit_thresholds(&features, &[CoarseClass::Normal; 2]),
            Err(Error::SingleClass { .. })
        ));
        assert!(matches!(
            fit_thresholds(&[], &[]),
            Err(Error::SingleClass { .. })
        ));
        assert!(matches!(
            fit_thresholds(&features, &[CoarseClass::Normal]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn all_equal_values_still_give_a_deterministic_threshold() {
        let features = fvs(&[(5.0, 1.0), (5.0, 2.0)]);
        let coarse = [CoarseClass::Normal, CoarseClass::Abnormal];
        let model = fit_thresholds(&features, &coarse).unwrap();
        assert_eq!(model.th_pa, 5.0);
        assert_eq!(model.th_pb, 1.5);
    }

    /// Exhaustive reference: every midpoint between consecutive distinct
    /// sorted values is scored by direct counting, with the same tie rules.
    fn oracle_threshold(values: &[f64], abnormal: &[bool]) -> f64 {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        let n_abn = abnormal.iter().filter(|&&a| a).count() as f64;
        let n_norm = (values.len() - n_abn as usize) as f64;
        let mut best: Option<(f64, f64, f64)> = None;
        for w in sorted.windows(2) {
            let th = (w[0] + w[1]) / 2.0;
            let mut tp = 0.0;
            let mut tn = 0.0;
            for (&v, &a) in values.iter().zip(abnormal) {
                if a && v < th {
                    tp += 1.0;
                }
                if !a && v >= th {
                    tn += 1.0;
                }
            }
            let youden = tp / n_abn + tn / n_norm - 1.0;
            let margin = values
                .iter()
                .map(|&v| (v - th).abs())
                .fold(f64::INFINITY, f64::min);
            let candidate = (youden, margin, th);
            best = Some(match best {
                None => candidate,
                Some(b) => {
                    if (candidate.0, candidate.1, -candidate.2) > (b.0, b.1, -b.2) {
                        candidate
                    } else {
                        b
                    }
                }
            });
        }
        best.map(|(_, _, th)| th).unwrap_or(sorted[0])
    }

    #[test]
    fn coarse_rule_uses_strict_comparisons_and_both_features() {
        let model = ThresholdModel {
            th_pa: 6.5,
            th_pb: 13.0,
        };
        assert_eq!(
            classify_coarse(&fv(6.5, 4.0), &model).unwrap(),
            CoarseClass::Normal
        );
        assert_eq!(
            classify_coarse(&fv(2.0, 4.0), &model).unwrap(),
            CoarseClass::Abnormal
        );
        assert_eq!(
            classify_coarse(&fv(2.0, 20.0), &model).unwrap(),
            CoarseClass::Normal
        );
        assert!(matches!(
            classify_coarse(&fv(f64::NAN, 0.0), &model),
            Err(Error::NonFinite { what: "pa" })
        ));
    }

    #[test]
    fn knn_fit_validates_k_labels_and_variance() {
        let features = fvs(&[(0.0, 0.0), (0.0, 1.0), (5.0, 5.0), (5.0, 6.0), (5.0, 7.0)]);
        let labels = [
            ClassLabel::ImiType1,
            ClassLabel::ImiType1,
            ClassLabel::ImiType2,
            ClassLabel::ImiType2,
            ClassLabel::ImiType2,
        ];
        assert!(knn_fit(&features, &labels, 3).is_ok());
        assert!(knn_fit(&features, &labels, 5).is_ok());
        assert!(matches!(
            knn_fit(&features, &labels, 4),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            knn_fit(&features, &labels, 7),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            knn_fit(&features[..2], &labels[..2], 3),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            knn_fit(&features[..2], &labels[..2], 1),
            Err(Error::SingleClass { .. })
        ));

        let flat_pa = fvs(&[(1.0, 0.0), (1.0, 5.0)]);
        let two = [ClassLabel::ImiType1, ClassLabel::ImiType2];
        assert!(matches!(
            knn_fit(&flat_pa, &two, 1),
            Err(Error::ZeroVariance { feature: "pa" })
        ));
        let flat_pb = fvs(&[(0.0, 2.0), (5.0, 2.0)]);
        assert!(matches!(
            knn_fit(&flat_pb, &two, 1),
            Err(Error::ZeroVariance { feature: "pb" })
        ));

        let with_normal = [ClassLabel::ImiType1, ClassLabel::Normal];
        assert!(matches!(
            knn_fit(&fvs(&[(0.0, 0.0), (5.0, 5.0)]), &with_normal, 1),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn vote_among_three_nearest_picks_the_surrounding_type() {
        let features = fvs(&[(0.0, 0.0), (0.0, 1.0), (5.0, 5.0), (5.0, 6.0), (5.0, 7.0)]);
        let labels = [
            ClassLabel::ImiType1,
            ClassLabel::ImiType1,
            ClassLabel::ImiType2,
            ClassLabel::ImiType2,
            ClassLabel::ImiType2,
        ];
        let model = knn_fit(&features, &labels, 3).unwrap();
        assert_eq!(
            knn_predict(&model, &fv(4.5, 5.5)).unwrap(),
            ClassLabel::ImiType2
        );
    }

    #[test]
    fn a_training_point_queried_with_k_1_returns_its_own_label() {
        let features = fvs(&[(0.0, 0.0), (0.0, 1.0), (5.0, 5.0)]);
        let labels = [ClassLabel::ImiType1, ClassLabel::ImiType1, ClassLabel::ImiType2];
        let model = knn_fit(&features, &labels, 1).unwrap();
        assert_eq!(
            knn_predict(&model, &fv(5.0, 5.0)).unwrap(),
            ClassLabel::ImiType2
        );
        assert_eq!(
            knn_predict(&model, &fv(0.0, 1.0)).unwrap(),
            ClassLabel::ImiType1
        );
    }

    #[test]
    fn equidistant_neighbors_resolve_to_the_lower_index() {
        let features = fvs(&[(0.0, 0.0), (2.0, 2.0)]);
        let labels = [ClassLabel::ImiType1, ClassLabel::ImiType2];
        let model = knn_fit(&features, &labels, 1).unwrap();
        assert_eq!(
            knn_predict(&model, &fv(1.0, 1.0)).unwrap(),
            ClassLabel::ImiType1
        );
    }

    #[test]
    fn hierarchy_consults_the_vote_only_for_abnormal_beats() {
        let thresholds = ThresholdModel {
            th_pa: 10.0,
            th_pb: 10.0,
        };
        let knn = knn_fit(
            &fvs(&[(0.0, 0.0), (1.0, 1.0)]),
            &[ClassLabel::ImiType1, ClassLabel::ImiType2],
            1,
        )
        .unwrap();
        // Close to the Type1 training point, yet coarse-normal by pa.
        let normal_side = fv(50.0, 0.0);
        assert_eq!(
            classify_hierarchical(&normal_side, &thresholds, &knn).unwrap(),
            ClassLabel::Normal
        );
        let abnormal_side = fv(0.1, 0.1);
        let first = classify_hierarchical(&abnormal_side, &thresholds, &knn).unwrap();
        assert_eq!(first, ClassLabel::ImiType1);
        assert_eq!(
            classify_hierarchical(&abnormal_side, &thresholds, &knn).unwrap(),
            first
        );
    }

    #[test]
    fn model_file_round_trips_exactly() {
        let features = fvs(&[
            (101_325.125, -42.0625),
            (90_001.5, 13.75),
            (88_000.25, -7.125),
        ]);
        let labels = [ClassLabel::ImiType1, ClassLabel::ImiType2, ClassLabel::ImiType1];
        let knn = knn_fit(&features, &labels, 3).unwrap();
        let thresholds = ThresholdModel {
            th_pa: 95_000.75,
            th_pb: 3.5,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        write_model(&path, &thresholds, &knn).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("xwtecg-model-v1\n"));

        let (th_back, knn_back) = read_model(&path).unwrap();
        assert_eq!(th_back, thresholds);
        assert_eq!(knn_back, knn);
    }

    #[test]
    fn model_reader_rejects_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let write = |name: &str, content: &str| {
            let p = dir.path().join(name);
            std::fs::write(&p, content).unwrap();
            p
        };
        let bad_magic = write("a.txt", "some-other-format\nth_pa = 1\n");
        assert!(matches!(read_model(&bad_magic), Err(Error::Parse { .. })));

        let truncated = write("b.txt", "xwtecg-model-v1\nth_pa = 1\n");
        assert!(matches!(read_model(&truncated), Err(Error::Parse { .. })));

        let bad_label = write(
            "c.txt",
            "xwtecg-model-v1\nth_pa = 1\nth_pb = 2\n\
             points: k=1 mean_pa=0 mean_pb=0 std_pa=1 std_pb=1\n1,2,Borderline\n",
        );
        assert!(matches!(read_model(&bad_label), Err(Error::Parse { .. })));

        let nan_value = write(
            "d.txt",
            "xwtecg-model-v1\nth_pa = NaN\nth_pb = 2\n\
             points: k=1 mean_pa=0 mean_pb=0 std_pa=1 std_pb=1\n1,2,IMI_Type1\n",
        );
        assert!(matches!(read_model(&nan_value), Err(Error::Parse { .. })));

        // A syntactically clean file whose content breaks the model
        // invariants (only one class present) must also be refused.
        let one_class = write(
            "e.txt",
            "xwtecg-model-v1\nth_pa = 1\nth_pb = 2\n\
             points: k=1 mean_pa=0 mean_pb=0 std_pa=1 std_pb=1\n1,2,IMI_Type1\n",
        );
        assert!(matches!(read_model(&one_class), Err(Error::SingleClass { .. })));
    }

    /// Dyadic values (eighths) keep every midpoint, gap and margin exact,
    /// so the fitted threshold can be compared bitwise with the reference.
    fn dyadic(seed: u64, len: usize) -> Vec<f64> {
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
        (0..len)
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                ((state >> 48) as i64 - 32_768) as f64 / 8.0
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn fitted_thresholds_match_the_exhaustive_reference(
            seed in 0u64..100_000, n in 4usize..24
        ) {
            let pa = dyadic(seed, n);
            let pb = dyadic(seed ^ 0x5555, n);
            let mut abnormal: Vec<bool> = (0..n).map(|i| (seed >> (i % 48)) & 1 == 1).collect();
            abnormal[0] = true;
            abnormal[1] = false;
            let features: Vec<FeatureVector> =
                pa.iter().zip(&pb).map(|(&a, &b)| fv(a, b)).collect();
            let coarse: Vec<CoarseClass> = abnormal
                .iter()
                .map(|&a| if a { CoarseClass::Abnormal } else { CoarseClass::Normal })
                .collect();
            let model = fit_thresholds(&features, &coarse).unwrap();
            prop_assert_eq!(model.th_pa, oracle_threshold(&pa, &abnormal));
            prop_assert_eq!(model.th_pb, oracle_threshold(&pb, &abnormal));
        }

        #[test]
        fn raising_a_feature_never_turns_normal_into_abnormal(
            pa in -100.0f64..100.0, pb in -100.0f64..100.0,
            th_pa in -50.0f64..50.0, th_pb in -50.0f64..50.0,
            bump in 0.0f64..200.0
        ) {
            let model = ThresholdModel { th_pa, th_pb };
            let base = classify_coarse(&fv(pa, pb), &model).unwrap();
            if base == CoarseClass::Normal {
                prop_assert_eq!(
                    classify_coarse(&fv(pa + bump, pb), &model).unwrap(),
                    CoarseClass::Normal
                );
                prop_assert_eq!(
                    classify_coarse(&fv(pa, pb + bump), &model).unwrap(),
                    CoarseClass::Normal
                );
            }
        }

        #[test]
        fn predictions_survive_positive_affine_feature_rescaling(
            seed in 0u64..100_000,
            scale_a in prop::sample::select(vec![0.25f64, 0.5, 2.0, 8.0]),
            scale_b in prop::sample::select(vec![0.5f64, 4.0, 16.0]),
            shift_a in -64.0f64..64.0, shift_b in -64.0f64..64.0
        ) {
            let n = 9;
            let pa = dyadic(seed, n);
            let pb = dyadic(seed ^ 0xAAAA, n);
            let labels: Vec<ClassLabel> = (0..n)
                .map(|i| if i % 2 == 0 { ClassLabel::ImiType1 } else { ClassLabel::ImiType2 })
                .collect();
            let raw: Vec<FeatureVector> = pa.iter().zip(&pb).map(|(&a, &b)| fv(a, b)).collect();
            let mapped: Vec<FeatureVector> = raw
                .iter()
                .map(|f| fv(scale_a * f.pa + shift_a, scale_b * f.pb + shift_b))
                .collect();
            let model_raw = knn_fit(&raw, &labels, 3).unwrap();
            let model_mapped = knn_fit(&mapped, &labels, 3).unwrap();
            let queries = dyadic(seed ^ 0xF0F0, 12);
            for q in queries.chunks_exact(2) {
                let plain = knn_predict(&model_raw, &fv(q[0], q[1])).unwrap();
                let moved = knn_predict(
                    &model_mapped,
                    &fv(scale_a * q[0] + shift_a, scale_b * q[1] + shift_b),
                )
                .unwrap();
                prop_assert_eq!(plain, moved);
            }
        }

        #[test]
        fn full_size_vote_returns_the_global_majority(
            seed in 0u64..100_000, n_t1 in 1usize..5, n_t2 in 1usize..5
        ) {
            prop_assume!((n_t1 + n_t2) % 2 == 1);
            let n = n_t1 + n_t2;
            let pa = dyadic(seed, n);
            let pb = dyadic(seed ^ 0x1234, n);
            prop_assume!(pa.iter().any(|&v| v != pa[0]));
            prop_assume!(pb.iter().any(|&v| v != pb[0]));
            let labels: Vec<ClassLabel> = (0..n)
                .map(|i| if i < n_t1 { ClassLabel::ImiType1 } else { ClassLabel::ImiType2 })
                .collect();
            let features: Vec<FeatureVector> =
                pa.iter().zip(&pb).map(|(&a, &b)| fv(a, b)).collect();
            let model = knn_fit(&features, &labels, n).unwrap();
            let majority = if n_t1 > n_t2 { ClassLabel::ImiType1 } else { ClassLabel::ImiType2 };
            for q in dyadic(seed ^ 0x9999, 10).chunks_exact(2) {
                prop_assert_eq!(knn_predict(&model, &fv(q[0], q[1])).unwrap(), majority);
            }
        }
    }

    /// Reference prediction by repeated linear extraction of the closest
    /// remaining point, standardizing from scratch.
    fn oracle_knn(
        points: &[(f64, f64, ClassLabel)],
        k: usize,
        query: (f64, f64),
    ) -> ClassLabel {
        let n = points.len() as f64;
        let mean = |f: &dyn Fn(&(f64, f64, ClassLabel)) -> f64| {
            points.iter().map(f).sum::<f64>() / n
        };
        let ma = mean(&|p| p.0);
        let mb = mean(&|p| p.1);
        let sa = (points.iter().map(|p| (p.0 - ma) * (p.0 - ma)).sum::<f64>() / n).sqrt();
        let sb = (points.iter().map(|p| (p.1 - mb) * (p.1 - mb)).sum::<f64>() / n).sqrt();
        let q = ((query.0 - ma) / sa, (query.1 - mb) / sb);
        let dists: Vec<f64> = points
            .iter()
            .map(|p| {
                let dx = (p.0 - ma) / sa - q.0;
                let dy = (p.1 - mb) / sb - q.1;
                dx * dx + dy * dy
            })
            .collect();
        let mut taken = vec![false; points.len()];
        let mut votes_t1 = 0usize;
        for _ in 0..k {
            let mut pick = None;
            for i in 0..points.len() {
                if taken[i] {
                    continue;
                }
                pick = match pick {
                    None => Some(i),
                    Some(j) if dists[i] < dists[j] => Some(i),
                    keep => keep,
                };
            }
            let i = pick.expect("k <= N");
            taken[i] = true;
            if points[i].2 == ClassLabel::ImiType1 {
                votes_t1 += 1;
            }
        }
        if 2 * votes_t1 > k {
            ClassLabel::ImiType1
        } else {
            ClassLabel::ImiType2
        }
    }

    #[test]
    fn predictions_match_the_linear_scan_reference() {
        let mut state = 0x1357_9BDF_u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 40) as i64 - (1 << 23)) as f64 / 256.0
        };
        let points: Vec<(f64, f64, ClassLabel)> = (0..50)
            .map(|i| {
                let label = if i % 3 == 0 {
                    ClassLabel::ImiType1
                } else {
                    ClassLabel::ImiType2
                };
                (next(), next(), label)
            })
            .collect();
        let features: Vec<FeatureVector> = points.iter().map(|p| fv(p.0, p.1)).collect();
        let labels: Vec<ClassLabel> = points.iter().map(|p| p.2).collect();
        for k in [1, 3, 7] {
            let model = knn_fit(&features, &labels, k).unwrap();
            for _ in 0..100 {
                let query = (next(), next());
                assert_eq!(
                    knn_predict(&model, &fv(query.0, query.1)).unwrap(),
                    oracle_knn(&points, k, query),
                    "k = {k}, query {query:?}"
                );
            }
        }
    }
}
