//! WFDB header (`.hea`) and signal (`.dat`) reading.
//!
//! Supports the subset used by PhysioNet ECG archives: single-segment
//! records, one `.dat` file per record, format 16 samples (16-bit two's
//! complement, little endian, channel-interleaved frames). Everything else
//! is rejected with a specific error rather than guessed at.

use std::path::Path;

use crate::ingest::{EcgRecord, LeadSignal, MAX_SAMPLING_RATE_HZ};
use crate::{Error, Result};

/// ADC gain assumed when a header omits the gain field, in ADU per mV.
pub const DEFAULT_GAIN_ADU_PER_MV: f64 = 200.0;

/// Parsed `.hea` file. Field semantics follow the WFDB header layout;
/// optional fields keep their "not present" state so the reader can apply
/// defaults (and warn) in one place.
#[derive(Debug, Clone)]
pub struct WfdbHeader {
    pub record_name: String,
    pub n_signals: usize,
    pub sampling_rate: f64,
    /// Samples per signal declared by the header; 0 means unspecified.
    pub n_samples: u64,
    pub signals: Vec<WfdbSignalSpec>,
    /// Comment lines (leading `#` stripped), in file order.
    pub comments: Vec<String>,
}

/// One signal specification line from a `.hea` file.
#[derive(Debug, Clone)]
pub struct WfdbSignalSpec {
    pub file_name: String,
    /// Raw format token, e.g. `16` or `212`. Only `16` can be read.
    pub format: String,
    /// ADC gain in ADU per physical unit; `None` when the header omits it.
    pub gain: Option<f64>,
    /// ADC value corresponding to 0 physical units. Defaults to 0.
    pub baseline: i32,
    pub units: Option<String>,
    /// Declared 16-bit checksum, when present. Verified with a warning
    /// only; a mismatch never blocks reading.
    pub checksum: Option<i64>,
    pub lead_name: String,
}

/// Splits a gain token of the form `gain(baseline)/units`, where both the
/// parenthesised baseline and the units suffix are optional.
fn parse_gain_token(token: &str) -> Option<(f64, Option<i32>, Option<String>)> {
    let (head, units) = match token.split_once('/') {
        Some((h, u)) => (h, Some(u.to_string())),
        None => (token, None),
    };
    let (gain_str, baseline) = match head.split_once('(') {
        Some((g, rest)) => {
            let inner = rest.strip_suffix(')')?;
            (g, Some(inner.parse::<i32>().ok()?))
        }
        None => (head, None),
    };
    let gain = gain_str.parse::<f64>().ok()?;
    Some((gain, baseline, units))
}

/// Parses `.hea` text. `path` is used only for error messages.
pub fn parse_wfdb_header(text: &str, path: &Path) -> Result<WfdbHeader> {
    let mut comments = Vec::new();
    // (1-based line number, content) for non-comment, non-empty lines.
    let mut lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            comments.push(rest.trim().to_string());
            continue;
        }
        lines.push((idx + 1, line));
    }

    let (first_no, first) = *lines.first().ok_or_else(|| {
        Error::parse(path, 1, "header has no record line")
    })?;
    let tokens: Vec<&str> = first.split_whitespace().collect();
    if tokens.len() < 4 {
        return Err(Error::parse(
            path,
            first_no,
            format!("record line needs `name n_signals fs n_samples`, got {first:?}"),
        ));
    }
    let record_name = tokens[0].to_string();
    if record_name.contains('/') {
        return Err(Error::parse(
            path,
            first_no,
            "multi-segment records are not supported",
        ));
    }
    let n_signals: usize = tokens[1]
        .parse()
        .map_err(|_| Error::parse(path, first_no, format!("bad signal count {:?}", tokens[1])))?;
    if n_signals == 0 {
        return Err(Error::parse(path, first_no, "record declares 0 signals"));
    }
    // The rate token may carry a counter frequency suffix: `fs/counter`.
    let fs_token = tokens[2].split('/').next().unwrap_or(tokens[2]);
    let sampling_rate: f64 = fs_token
        .parse()
        .map_err(|_| Error::parse(path, first_no, format!("bad sampling rate {:?}", tokens[2])))?;
    if !(sampling_rate > 0.0) || sampling_rate > MAX_SAMPLING_RATE_HZ {
        return Err(Error::parse(
            path,
            first_no,
            format!("sampling rate {sampling_rate} Hz is out of range"),
        ));
    }
    let n_samples: u64 = tokens[3]
        .parse()
        .map_err(|_| Error::parse(path, first_no, format!("bad sample count {:?}", tokens[3])))?;

    if lines.len() < 1 + n_signals {
        return Err(Error::parse(
            path,
            first_no,
            format!(
                "header declares {n_signals} signals but has only {} signal lines",
                lines.len() - 1
            ),
        ));
    }

    let mut signals = Vec::with_capacity(n_signals);
    for (sig_idx, &(line_no, line)) in lines[1..=n_signals].iter().enumerate() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 2 {
            return Err(Error::parse(
                path,
                line_no,
                format!("signal line needs at least `file format`, got {line:?}"),
            ));
        }
        let file_name = toks[0].to_string();
        let format = toks[1].to_string();

        let mut gain = None;
        let mut baseline = None;
        let mut units = None;
        let mut next = 2;
        if let Some(tok) = toks.get(2) {
            match parse_gain_token(tok) {
                Some((g, b, u)) => {
                    gain = Some(g);
                    baseline = b;
                    units = u;
                    next = 3;
                }
                None => {
                    return Err(Error::parse(
                        path,
                        line_no,
                        format!("bad gain field {tok:?}"),
                    ));
                }
            }
        }

        // Positional numeric fields follow: adc_res, adc_zero, init_value,
        // checksum, block_size. The first non-numeric token starts the
        // description, which doubles as the lead name.
        let mut numeric = Vec::new();
        while next < toks.len() && numeric.len() < 5 {
            match toks[next].parse::<i64>() {
                Ok(v) => {
                    numeric.push(v);
                    next += 1;
                }
                Err(_) => break,
            }
        }
        let checksum = numeric.get(3).copied();
        // Baseline defaults to 0 when the gain field does not carry one.
        let baseline = baseline.unwrap_or(0);
        let lead_name = if next < toks.len() {
            toks[next..].join(" ")
        } else {
            format!("sig{sig_idx}")
        };

        signals.push(WfdbSignalSpec {
            file_name,
            format,
            gain,
            baseline,
            units,
            checksum,
            lead_name,
        });
    }

    Ok(WfdbHeader {
        record_name,
        n_signals,
        sampling_rate,
        n_samples,
        signals,
        comments,
    })
}

/// Pulls a diagnosis text out of header comments, e.g. the
/// `Reason for admission:` line PhysioNet headers carry.
fn diagnosis_from_comments(comments: &[String]) -> Option<String> {
    for c in comments {
        let lower = c.to_ascii_lowercase();
        if let Some(pos) = lower.find("reason for admission:") {
            let after = &c[pos + "reason for admission:".len()..];
            let text = after.trim();
            if !text.is_empty() {
                return Some(text.to_string());
            }
        }
    }
    None
}

/// Reads a WFDB record given the path of its `.hea` file. The `.dat` file
/// is resolved relative to the header's directory. Samples are converted
/// to millivolts as `(adu - baseline) / gain`.
pub fn read_wfdb_record(hea_path: &Path) -> Result<EcgRecord> {
    let text = crate::fsutil::read_to_string(hea_path)?;
    let header = parse_wfdb_header(&text, hea_path)?;

    for sig in &header.signals {
        if sig.format != "16" {
            return Err(Error::UnsupportedFormat {
                format: sig.format.clone(),
            });
        }
        if sig.gain == Some(0.0) {
            return Err(Error::ZeroGain {
                lead: sig.lead_name.clone(),
            });
        }
    }
    let dat_name = &header.signals[0].file_name;
    if header.signals.iter().any(|s| &s.file_name != dat_name) {
        return Err(Error::InvalidRecord {
            msg: "signals spread across multiple .dat files are not supported".into(),
        });
    }

    let dat_path = match hea_path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => dir.join(dat_name),
        _ => Path::new(dat_name).to_path_buf(),
    };
    let bytes = crate::fsutil::read_bytes(&dat_path)?;

    let n_sig = header.n_signals;
    let frame_bytes = n_sig as u64 * 2;
    let n_samples = if header.n_samples > 0 {
        let expected = header.n_samples * frame_bytes;
        if bytes.len() as u64 != expected {
            return Err(Error::SampleSizeMismatch {
                path: dat_path,
                expected,
                actual: bytes.len() as u64,
            });
        }
        header.n_samples as usize
    } else {
        if bytes.is_empty() || bytes.len() as u64 % frame_bytes != 0 {
            return Err(Error::SampleSizeMismatch {
                path: dat_path,
                expected: frame_bytes,
                actual: bytes.len() as u64,
            });
        }
        (bytes.len() as u64 / frame_bytes) as usize
    };

    let mut leads = Vec::with_capacity(n_sig);
    for (s, sig) in header.signals.iter().enumerate() {
        let gain = match sig.gain {
            Some(g) => g,
            None => {
                log::warn!(
                    "{}: signal {:?} has no gain; assuming {} ADU/mV",
                    hea_path.display(),
                    sig.lead_name,
                    DEFAULT_GAIN_ADU_PER_MV
                );
                DEFAULT_GAIN_ADU_PER_MV
            }
        };
        let baseline = sig.baseline as f64;
        let mut samples = Vec::with_capacity(n_samples);
        let mut adu_sum: i64 = 0;
        for t in 0..n_samples {
            let off = (t * n_sig + s) * 2;
            let adu = i16::from_le_bytes([bytes[off], bytes[off + 1]]);
            adu_sum = adu_sum.wrapping_add(adu as i64);
            samples.push((adu as f64 - baseline) / gain);
        }
        if let Some(declared) = sig.checksum {
            if (adu_sum & 0xFFFF) != (declared & 0xFFFF) {
                log::warn!(
                    "{}: checksum mismatch on lead {:?} (declared {}, computed {})",
                    dat_path.display(),
                    sig.lead_name,
                    declared,
                    adu_sum & 0xFFFF
                );
            }
        }
        leads.push(LeadSignal {
            name: sig.lead_name.clone(),
            samples,
        });
    }

    EcgRecord::new(
        header.record_name.clone(),
        header.sampling_rate,
        leads,
        diagnosis_from_comments(&header.comments),
    )
}
