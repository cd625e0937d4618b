//! Record ingestion: WFDB records and plain CSV signals.
//!
//! Both readers produce an [`EcgRecord`] holding per-lead sample vectors in
//! millivolts. Nothing downstream cares where the samples came from.

use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

mod wfdb;

pub use wfdb::{read_wfdb_record, WfdbHeader, WfdbSignalSpec};

/// Upper bound on plausible ECG sampling rates, in Hz. Anything above this
/// is treated as a corrupt header rather than a real recording.
pub const MAX_SAMPLING_RATE_HZ: f64 = 10_000.0;

/// One named lead and its samples in millivolts.
#[derive(Debug, Clone)]
pub struct LeadSignal {
    pub name: String,
    pub samples: Vec<f64>,
}

/// A multi-lead ECG recording at a single sampling rate.
#[derive(Debug, Clone)]
pub struct EcgRecord {
    pub record_id: String,
    pub sampling_rate: f64,
    pub leads: Vec<LeadSignal>,
    /// Free-text diagnosis pulled from header comments, when present.
    pub diagnosis_label: Option<String>,
}

impl EcgRecord {
    /// Validates and assembles a record. All leads must carry the same
    /// number of samples (at least 2), lead names must be unique ignoring
    /// case, and the sampling rate must be positive and plausible.
    pub fn new(
        record_id: impl Into<String>,
        sampling_rate: f64,
        leads: Vec<LeadSignal>,
        diagnosis_label: Option<String>,
    ) -> Result<Self> {
        let record_id = record_id.into();
        if record_id.is_empty() {
            return Err(Error::InvalidRecord {
                msg: "record id is empty".into(),
            });
        }
        if !(sampling_rate > 0.0) || sampling_rate > MAX_SAMPLING_RATE_HZ {
            return Err(Error::InvalidRecord {
                msg: format!("sampling rate {sampling_rate} Hz is out of range"),
            });
        }
        if leads.is_empty() {
            return Err(Error::InvalidRecord {
                msg: "record has no leads".into(),
            });
        }
        let len = leads[0].samples.len();
        if len < 2 {
            return Err(Error::InvalidRecord {
                msg: format!("leads must hold at least 2 samples, got {len}"),
            });
        }
        for lead in &leads {
            if lead.name.trim().is_empty() {
                return Err(Error::InvalidRecord {
                    msg: "lead with empty name".into(),
                });
            }
            if lead.samples.len() != len {
                return Err(Error::InvalidRecord {
                    msg: format!(
                        "lead {:?} has {} samples, expected {}",
                        lead.name,
                        lead.samples.len(),
                        len
                    ),
                });
            }
        }
        for (i, a) in leads.iter().enumerate() {
            for b in &leads[i + 1..] {
                if a.name.trim().eq_ignore_ascii_case(b.name.trim()) {
                    return Err(Error::InvalidRecord {
                        msg: format!("duplicate lead name {:?}", a.name),
                    });
                }
            }
        }
        Ok(EcgRecord {
            record_id,
            sampling_rate,
            leads,
            diagnosis_label,
        })
    }

    /// Returns one lead's samples unchanged. Matching ignores case and
    /// surrounding whitespace; a miss lists what is available.
    pub fn select_lead(&self, name: &str) -> Result<&[f64]> {
        let wanted = name.trim();
        for lead in &self.leads {
            if lead.name.trim().eq_ignore_ascii_case(wanted) {
                return Ok(&lead.samples);
            }
        }
        let mut available = String::new();
        for (i, lead) in self.leads.iter().enumerate() {
            if i > 0 {
                available.push_str(", ");
            }
            let _ = write!(available, "{:?}", lead.name);
        }
        Err(Error::UnknownLead {
            requested: name.to_string(),
            available,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.leads[0].samples.len()
    }
}

/// Reads a single-lead signal from a CSV file: one millivolt value per
/// line, decimal point, LF or CRLF endings, with an optional `mv` header
/// line. The lead is named `csv` and the record id is the file stem.
pub fn read_csv_signal(path: &Path, sampling_rate: f64) -> Result<EcgRecord> {
    let text = crate::fsutil::read_to_string(path)?;
    let mut samples = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if idx == 0 && line.eq_ignore_ascii_case("mv") {
            continue;
        }
        match line.parse::<f64>() {
            Ok(v) => samples.push(v),
            Err(_) => {
                return Err(Error::parse(
                    path,
                    idx + 1,
                    format!("expected a decimal sample value, got {line:?}"),
                ));
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::parse(path, 1, "no samples in file"));
    }
    let record_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".to_string());
    EcgRecord::new(
        record_id,
        sampling_rate,
        vec![LeadSignal {
            name: "csv".into(),
            samples,
        }],
        None,
    )
}

/// Writes samples as a CSV signal file (one value per line, no header).
/// Values are printed in the shortest form that parses back to the same
/// `f64`, so a write/read round trip is exact. The write is atomic.
pub fn write_csv_signal(path: &Path, samples: &[f64]) -> Result<()> {
    let mut out = String::with_capacity(samples.len() * 8);
    for v in samples {
        let _ = writeln!(out, "{v}");
    }
    crate::fsutil::write_atomic(path, out.as_bytes())
}
