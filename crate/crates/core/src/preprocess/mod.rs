//! Signal conditioning and beat extraction.
//!
//! The chain is: [`denoise`] the raw lead, [`detect_r_peaks`] on the clean
//! signal, [`segment_beats`] into 1:2 windows around each R peak, and
//! [`resample_to_1000`] each window onto the fixed analysis grid.

use std::collections::VecDeque;
use std::path::Path;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::{Error, Result};

mod dwt;

/// Length of every normalized beat.
pub const NORMALIZED_BEAT_LEN: usize = 1000;

/// Sample index of the R landmark inside a normalized beat. The 1:2 window
/// places the R peak a third of the way in; on a 1000-sample grid that
/// rounds to 333.
pub const NORMALIZED_R_INDEX: usize = 333;

/// Decomposition depth of the denoising filter bank.
const DENOISE_LEVELS: usize = 8;

/// Minimum input length [`denoise`] accepts: one filter-bank block.
pub const MIN_DENOISE_LEN: usize = 1 << DENOISE_LEVELS;

/// Mains interference frequency removed by the denoiser, in Hz.
const POWERLINE_HZ: f64 = 50.0;

/// A beat window cut from the full-rate signal: one third before the R
/// peak, two thirds after.
#[derive(Debug, Clone)]
pub struct BeatSegment {
    pub samples: Vec<f64>,
    /// Offset of the R peak inside `samples`; always a third of the length.
    pub r_offset: usize,
    /// R peak position in the source signal, in samples.
    pub source_r_index: usize,
}

/// A beat on the fixed 1000-sample grid with the R landmark at index 333.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedBeat {
    pub samples: Vec<f64>,
    pub r_index: usize,
    pub source_record: String,
    pub source_lead: String,
    /// R peak position in the source signal, in samples.
    pub source_r_index: usize,
}

impl NormalizedBeat {
    pub fn new(
        samples: Vec<f64>,
        source_record: impl Into<String>,
        source_lead: impl Into<String>,
        source_r_index: usize,
    ) -> Result<Self> {
        if samples.len() != NORMALIZED_BEAT_LEN {
            return Err(Error::InvalidParameter {
                msg: format!(
                    "normalized beat must hold {NORMALIZED_BEAT_LEN} samples, got {}",
                    samples.len()
                ),
            });
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "normalized beat",
            });
        }
        Ok(NormalizedBeat {
            samples,
            r_index: NORMALIZED_R_INDEX,
            source_record: source_record.into(),
            source_lead: source_lead.into(),
            source_r_index,
        })
    }

    /// Stable identifier: `record_id:source_r_index`.
    pub fn beat_id(&self) -> String {
        format!("{}:{}", self.source_record, self.source_r_index)
    }
}

/// Removes high-frequency noise, baseline wander and mains interference
/// from an ECG lead.
///
/// The signal is split by an 8-level dyadic wavelet filter bank; the two
/// finest detail bands (high-frequency noise) and the final approximation
/// (baseline wander) are zeroed before reconstruction. Mains interference
/// sits in a band the filter bank keeps, so a zero-phase 50 Hz notch runs
/// on the reconstruction whenever the sampling rate allows one.
///
/// The whole operation is linear and preserves the input length.
pub fn denoise(signal: &[f64], sampling_rate: f64) -> Result<Vec<f64>> {
    if !(sampling_rate > 0.0) {
        return Err(Error::InvalidParameter {
            msg: format!("sampling rate must be positive, got {sampling_rate}"),
        });
    }
    if signal.len() < MIN_DENOISE_LEN {
        return Err(Error::TooShort {
            what: "denoise input",
            min: MIN_DENOISE_LEN,
            got: signal.len(),
        });
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "denoise input",
        });
    }

    let extended = dwt::extend_symmetric(signal, DENOISE_LEVELS);
    let mut dec = dwt::decompose(&extended, DENOISE_LEVELS);
    dec.details[0].fill(0.0);
    dec.details[1].fill(0.0);
    dec.approx.fill(0.0);
    let mut clean = dwt::reconstruct(&dec);
    clean.truncate(signal.len());

    // A 50 Hz tone lives well inside the retained bands, so the bank alone
    // cannot take it out. Skip the notch only when 50 Hz is too close to
    // Nyquist for a stable filter.
    if sampling_rate > 3.0 * POWERLINE_HZ {
        notch_zero_phase(&mut clean, sampling_rate, POWERLINE_HZ, 25.0);
    }
    Ok(clean)
}

/// Biquad notch coefficients (normalized so a0 = 1), RBJ cookbook form.
fn notch_coefficients(sampling_rate: f64, f0: f64, q: f64) -> ([f64; 3], [f64; 2]) {
    let w0 = 2.0 * std::f64::consts::PI * f0 / sampling_rate;
    let alpha = w0.sin() / (2.0 * q);
    let a0 = 1.0 + alpha;
    let b = [1.0 / a0, -2.0 * w0.cos() / a0, 1.0 / a0];
    let a = [-2.0 * w0.cos() / a0, (1.0 - alpha) / a0];
    (b, a)
}

fn biquad_forward(x: &mut [f64], b: [f64; 3], a: [f64; 2]) {
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    for v in x.iter_mut() {
        let x0 = *v;
        let y0 = b[0] * x0 + b[1] * x1 + b[2] * x2 - a[0] * y1 - a[1] * y2;
        x2 = x1;
        x1 = x0;
        y2 = y1;
        y1 = y0;
        *v = y0;
    }
}

/// Forward-backward notch filtering with odd reflection padding at both
/// ends, so the pass is zero-phase and (being a fixed linear map of the
/// padded signal) linear in the input.
fn notch_zero_phase(signal: &mut [f64], sampling_rate: f64, f0: f64, q: f64) {
    let n = signal.len();
    let pad = ((2.0 * sampling_rate) as usize).clamp(2, n - 1);
    let (b, a) = notch_coefficients(sampling_rate, f0, q);

    let mut ext = Vec::with_capacity(n + 2 * pad);
    for j in (1..=pad).rev() {
        ext.push(2.0 * signal[0] - signal[j]);
    }
    ext.extend_from_slice(signal);
    for j in (1..=pad).rev() {
        ext.push(2.0 * signal[n - 1] - signal[n - 1 - j]);
    }

    biquad_forward(&mut ext, b, a);
    ext.reverse();
    biquad_forward(&mut ext, b, a);
    ext.reverse();

    signal.copy_from_slice(&ext[pad..pad + n]);
}

/// Detail levels whose band overlaps QRS energy at this sampling rate.
/// Level j spans fs/2^(j+1) .. fs/2^j Hz; at 1000 Hz this picks d3-d5.
fn qrs_detail_levels(sampling_rate: f64) -> Vec<usize> {
    let mut levels: Vec<usize> = (1..=8)
        .filter(|&j| {
            let lo = sampling_rate / (1u64 << (j + 1)) as f64;
            let hi = sampling_rate / (1u64 << j) as f64;
            lo < 125.0 && hi > 16.0
        })
        .collect();
    if levels.is_empty() {
        levels.push(1);
    }
    levels
}

/// Locates R peaks.
///
/// The detection envelope is the summed squared reconstruction of the
/// QRS-band detail levels, computed shift-invariantly (see
/// [`dwt::stationary_detail`]): with the decimated transform the envelope
/// height of identical complexes swings severalfold with their sampling
/// phase, enough to push some below threshold. A sample is a candidate
/// where the envelope has a local maximum above 0.3x its rolling maximum
/// over a centred 2 s window. Candidates are accepted strongest-first under
/// a 200 ms refractory rule, then snapped to the largest absolute signal
/// value within +-25 ms (pass the denoised signal in for that refinement to
/// be meaningful).
///
/// Degenerate input (too short for one second, non-finite, or flat) yields
/// an empty list rather than an error.
pub fn detect_r_peaks(signal: &[f64], sampling_rate: f64) -> Vec<usize> {
    let n = signal.len();
    if !(sampling_rate > 0.0) || (n as f64) < sampling_rate || n < 4 {
        return Vec::new();
    }
    if signal.iter().any(|v| !v.is_finite()) {
        log::warn!("detect_r_peaks: non-finite samples, returning no peaks");
        return Vec::new();
    }

    let levels = qrs_detail_levels(sampling_rate);
    let depth = *levels.last().expect("levels is never empty");
    let extended = dwt::extend_symmetric(signal, depth);
    let mut envelope = vec![0.0; n];
    for &level in &levels {
        let band = dwt::stationary_detail(&extended, level);
        for (e, v) in envelope.iter_mut().zip(&band) {
            *e += v * v;
        }
    }

    // A flat or near-flat signal leaves only cancellation noise in the
    // detail bands (the filters' zero-sum identities hold to ~1e-15 of the
    // signal magnitude, so the squared envelope noise sits near 1e-30 of
    // its square). Requiring candidates to clear a floor far above that
    // noise, yet far below any physical QRS burst, keeps them out. The
    // floor also has an absolute leg: detail content below a microvolt is
    // silence on a millivolt-calibrated lead, which matters when the input
    // is itself residue of an earlier stage (a denoised constant, say).
    let max_abs = signal.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let env_floor = (1e-9 * max_abs).powi(2).max(1e-12);

    let half_window = sampling_rate.round() as usize; // 2 s total
    let rolling = rolling_max(&envelope, half_window);
    let refractory = (0.2 * sampling_rate).round() as usize;
    let refine = (0.025 * sampling_rate).round() as usize;

    // local maxima above threshold, plateaus collapsed to their left edge
    let mut candidates: Vec<(f64, usize)> = Vec::new();
    for i in 1..n - 1 {
        if envelope[i] > envelope[i - 1]
            && envelope[i] >= envelope[i + 1]
            && envelope[i] > 0.3 * rolling[i]
            && envelope[i] > env_floor
        {
            candidates.push((envelope[i], i));
        }
    }
    // strongest first; ties resolved toward the earlier sample
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut refined: Vec<(f64, usize)> = Vec::new();
    for &(score, idx) in &candidates {
        let lo = idx.saturating_sub(refine);
        let hi = (idx + refine).min(n - 1);
        let mut best = idx;
        for j in lo..=hi {
            if signal[j].abs() > signal[best].abs() {
                best = j;
            }
        }
        refined.push((score, best));
    }

    let mut accepted: Vec<usize> = Vec::new();
    for &(_, idx) in &refined {
        if accepted
            .iter()
            .all(|&a| a.abs_diff(idx) >= refractory.max(1))
        {
            accepted.push(idx);
        }
    }
    accepted.sort_unstable();
    accepted.dedup();
    accepted
}

/// Maximum of `x` over a centred window of half-width `half` (clipped at
/// the ends), computed with a monotonic deque in O(n).
fn rolling_max(x: &[f64], half: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    let mut deque: VecDeque<usize> = VecDeque::new();
    let mut right = 0;
    for i in 0..n {
        let hi = (i + half).min(n - 1);
        while right <= hi {
            while let Some(&back) = deque.back() {
                if x[back] <= x[right] {
                    deque.pop_back();
                } else {
                    break;
                }
            }
            deque.push_back(right);
            right += 1;
        }
        while let Some(&front) = deque.front() {
            if front + half < i {
                deque.pop_front();
            } else {
                break;
            }
        }
        out[i] = x[*deque.front().expect("window never empty")];
    }
    out
}

/// Cuts a 1:2 window around each R peak: with x = round(RR/3), the window
/// is [r - x, r + 2x), where RR is the median of the R peak's adjacent
/// intervals. Windows that would cross either edge of the signal are
/// dropped. Fewer than two peaks yield no beats (no interval to measure).
pub fn segment_beats(signal: &[f64], r_peaks: &[usize]) -> Vec<BeatSegment> {
    if r_peaks.len() < 2 {
        return Vec::new();
    }
    let n = signal.len();
    let mut beats = Vec::new();
    for (i, &r) in r_peaks.iter().enumerate() {
        let prev = (i > 0).then(|| (r - r_peaks[i - 1]) as f64);
        let next = (i + 1 < r_peaks.len()).then(|| (r_peaks[i + 1] - r) as f64);
        let rr = match (prev, next) {
            (Some(p), Some(q)) => 0.5 * (p + q),
            (Some(p), None) => p,
            (None, Some(q)) => q,
            (None, None) => unreachable!("at least two peaks"),
        };
        let x = (rr / 3.0).round() as usize;
        if x == 0 || r < x || r + 2 * x > n {
            continue;
        }
        beats.push(BeatSegment {
            samples: signal[r - x..r + 2 * x].to_vec(),
            r_offset: x,
            source_r_index: r,
        });
    }
    beats
}

/// Resamples a beat window onto the fixed 1000-sample grid by Fourier
/// interpolation: forward FFT, symmetric spectrum zero-padding or
/// truncation to 1000 bins (splitting or folding the Nyquist bin when one
/// is present), inverse FFT, amplitudes rescaled by 1000/original length.
/// A band-limited input is reproduced exactly on the denser grid; a
/// 1000-sample input round-trips unchanged.
pub fn resample_to_1000(
    segment: &BeatSegment,
    source_record: &str,
    source_lead: &str,
) -> Result<NormalizedBeat> {
    let n = segment.samples.len();
    if n < 4 {
        return Err(Error::TooShort {
            what: "beat window",
            min: 4,
            got: n,
        });
    }
    if segment.samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "beat window",
        });
    }

    const M: usize = NORMALIZED_BEAT_LEN;
    let mut planner = FftPlanner::<f64>::new();
    let mut spectrum: Vec<Complex64> = segment
        .samples
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    planner.plan_fft_forward(n).process(&mut spectrum);

    let p = n.min(M);
    let nyq = p / 2 + 1;
    let mut out_spectrum = vec![Complex64::new(0.0, 0.0); M];
    out_spectrum[..nyq].copy_from_slice(&spectrum[..nyq]);
    for k in 1..(p - nyq + 1) {
        out_spectrum[M - k] = spectrum[n - k];
    }
    if p % 2 == 0 && p < M.max(n) {
        if M > n {
            // shared Nyquist bin is split evenly between +-f_nyq
            let half = 0.5 * out_spectrum[n / 2];
            out_spectrum[n / 2] = half;
            out_spectrum[M - n / 2] = half;
        } else {
            // truncation folds the conjugate partner into the new Nyquist
            out_spectrum[M / 2] = spectrum[M / 2] + spectrum[n - M / 2];
        }
    }

    planner.plan_fft_inverse(M).process(&mut out_spectrum);
    let scale = 1.0 / n as f64;
    let samples: Vec<f64> = out_spectrum.iter().map(|c| c.re * scale).collect();
    NormalizedBeat::new(samples, source_record, source_lead, segment.source_r_index)
}

/// Writes a normalized beat as a 1000-line CSV of millivolt values.
pub fn write_beat_csv(path: &Path, beat: &NormalizedBeat) -> Result<()> {
    crate::ingest::write_csv_signal(path, &beat.samples)
}

/// Reads a normalized beat from a 1000-line CSV (the format
/// [`write_beat_csv`] produces). Source identifiers are taken from the
/// file name since the CSV carries none.
pub fn read_beat_csv(path: &Path) -> Result<NormalizedBeat> {
    let record = crate::ingest::read_csv_signal(path, 1000.0)?;
    let samples = record.leads.into_iter().next().expect("one lead").samples;
    if samples.len() != NORMALIZED_BEAT_LEN {
        return Err(Error::InvalidParameter {
            msg: format!(
                "{}: a normalized beat holds {NORMALIZED_BEAT_LEN} samples, found {}",
                path.display(),
                samples.len()
            ),
        });
    }
    NormalizedBeat::new(samples, record.record_id, "csv", NORMALIZED_R_INDEX)
}
