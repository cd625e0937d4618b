//! Evaluation arithmetic: 2x2 confusion tallies and the three indices
//! reported on them (accuracy, sensitivity, specificity), all carried at
//! full precision and rounded only for presentation.

use crate::error::{Error, Result};

/// The standard tally against one designated positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub true_neg: u64,
    pub false_pos: u64,
    pub false_neg: u64,
}

impl ConfusionCounts {
    /// Total number of classified items.
    pub fn total(&self) -> u64 {
        self.true_pos + self.true_neg + self.false_pos + self.false_neg
    }

    /// Total number of misclassified items.
    pub fn errors(&self) -> u64 {
        self.false_pos + self.false_neg
    }
}

/// Tallies predictions against ground truth, counting `positive` as the
/// positive class and everything else as negative.
pub fn confusion<T: PartialEq>(
    predicted: &[T],
    truth: &[T],
    positive: &T,
) -> Result<ConfusionCounts> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            left: format!("{} predictions", predicted.len()),
            right: format!("{} truth labels", truth.len()),
        });
    }
    if predicted.is_empty() {
        return Err(Error::InvalidParameter {
            msg: "confusion tally needs at least one item".into(),
        });
    }
    let mut c = ConfusionCounts::default();
    for (p, t) in predicted.iter().zip(truth) {
        match (p == positive, t == positive) {
            (true, true) => c.true_pos += 1,
            (false, false) => c.true_neg += 1,
            (true, false) => c.false_pos += 1,
            (false, true) => c.false_neg += 1,
        }
    }
    Ok(c)
}

/// Fraction of items classified correctly, as a percentage. Undefined on
/// an empty tally.
pub fn accuracy(c: &ConfusionCounts) -> Option<f64> {
    let total = c.total();
    (total > 0).then(|| (total - c.errors()) as f64 / total as f64 * 100.0)
}

/// Fraction of actual positives detected, as a percentage. Undefined when
/// there are no positives.
pub fn sensitivity(c: &ConfusionCounts) -> Option<f64> {
    let positives = c.true_pos + c.false_neg;
    (positives > 0).then(|| c.true_pos as f64 / positives as f64 * 100.0)
}

/// Fraction of actual negatives passed through, as a percentage. Undefined
/// when there are no negatives.
pub fn specificity(c: &ConfusionCounts) -> Option<f64> {
    let negatives = c.true_neg + c.false_pos;
    (negatives > 0).then(|| c.true_neg as f64 / negatives as f64 * 100.0)
}

/// One evaluated split: the raw counts plus the three indices, each absent
/// where its denominator vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub counts: ConfusionCounts,
    pub accuracy_pct: Option<f64>,
    pub sensitivity_pct: Option<f64>,
    pub specificity_pct: Option<f64>,
}

impl MetricsReport {
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        MetricsReport {
            counts,
            accuracy_pct: accuracy(&counts),
            sensitivity_pct: sensitivity(&counts),
            specificity_pct: specificity(&counts),
        }
    }

    pub const CSV_HEADER: &'static str =
        "name,tp,tn,fp,fn,accuracy_pct,sensitivity_pct,specificity_pct";

    pub fn csv_row(&self, name: &str) -> String {
        format!(
            "{name},{},{},{},{},{},{},{}",
            self.counts.true_pos,
            self.counts.true_neg,
            self.counts.false_pos,
            self.counts.false_neg,
            format_pct(self.accuracy_pct),
            format_pct(self.sensitivity_pct),
            format_pct(self.specificity_pct),
        )
    }

    /// Multi-line form for standard output.
    pub fn table(&self, name: &str) -> String {
        let c = &self.counts;
        format!(
            "{name}: tp={} tn={} fp={} fn={} (total {}, errors {})\n\
             \x20 accuracy     {}\n\
             \x20 sensitivity  {}\n\
             \x20 specificity  {}\n",
            c.true_pos,
            c.true_neg,
            c.false_pos,
            c.false_neg,
            c.total(),
            c.errors(),
            format_pct(self.accuracy_pct),
            format_pct(self.sensitivity_pct),
            format_pct(self.specificity_pct),
        )
    }
}

/// Two-decimal presentation with ties rounded to even, or "NA" for an
/// undefined value.
pub fn format_pct(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{:.2}", (v * 100.0).round_ties_even() / 100.0),
        None => "NA".into(),
    }
}
