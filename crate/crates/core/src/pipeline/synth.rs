//! Seeded synthetic ECG fixtures.
//!
//! Beats are assembled from Gaussian bumps on the normalized 1000-sample
//! grid: a P wave, the QRS complex at the fixed R index, and a T wave,
//! with the pathological knobs (ST offset, Q depth, T polarity, QRS
//! amplitude) exposed per class. Records string normal beats along a
//! seeded RR sequence at a chosen sampling rate. Everything is a pure
//! function of its spec, so the same seed always reproduces the same
//! samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::classify::ClassLabel;
use crate::error::{Error, Result};
use crate::ingest::{EcgRecord, LeadSignal};
use crate::pipeline::TemplateBeat;
use crate::preprocess::{NormalizedBeat, NORMALIZED_BEAT_LEN, NORMALIZED_R_INDEX};

/// QRS amplitude of a healthy beat; "attenuated" means strictly below this.
pub const NORMAL_QRS_MV: f64 = 1.0;

// Wave geometry on the normalized grid (samples). The P and T centers sit
// 140 before and 250 after the R index, inside the 253..=733 QT window.
const P_CENTER: f64 = 193.0;
const P_SIGMA: f64 = 25.0;
const P_AMP_MV: f64 = 0.15;
const Q_CENTER: f64 = 305.0;
const Q_SIGMA: f64 = 10.0;
const R_CENTER: f64 = NORMALIZED_R_INDEX as f64;
const R_SIGMA: f64 = 9.0;
const T_CENTER: f64 = 583.0;
const T_SIGMA: f64 = 45.0;
const T_AMP_MV: f64 = 0.35;

// The ST offset ramps up over 360..390, holds flat through 490, and
// returns to baseline by 500, so the mean over samples 400..=480 equals
// the configured elevation exactly.
const ST_RISE_FROM: f64 = 360.0;
const ST_FLAT_FROM: f64 = 390.0;
const ST_FLAT_TO: f64 = 490.0;
const ST_FALL_TO: f64 = 500.0;

/// Everything that determines a synthetic beat. Parameters must be
/// consistent with the class: a normal beat carries no pathology, type 1
/// needs ST elevation with an attenuated QRS, type 2 needs a Q wave with
/// an inverted T.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticBeatSpec {
    pub class: ClassLabel,
    pub st_elevation_mv: f64,
    pub q_depth_mv: f64,
    pub t_inverted: bool,
    pub qrs_amplitude_mv: f64,
    pub noise_rms_mv: f64,
    pub random_seed: u64,
}

impl SyntheticBeatSpec {
    /// A clean healthy beat. The seed only matters once noise is added.
    pub fn normal(random_seed: u64) -> Self {
        SyntheticBeatSpec {
            class: ClassLabel::Normal,
            st_elevation_mv: 0.0,
            q_depth_mv: 0.0,
            t_inverted: false,
            qrs_amplitude_mv: NORMAL_QRS_MV,
            noise_rms_mv: 0.0,
            random_seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = self.st_elevation_mv.is_finite()
            && self.q_depth_mv.is_finite()
            && self.qrs_amplitude_mv.is_finite()
            && self.noise_rms_mv.is_finite();
        if !finite {
            return Err(Error::NonFinite {
                what: "beat spec parameter",
            });
        }
        if self.st_elevation_mv < 0.0
            || self.q_depth_mv < 0.0
            || self.noise_rms_mv < 0.0
            || self.qrs_amplitude_mv <= 0.0
        {
            return Err(Error::InvalidParameter {
                msg: "beat spec amplitudes must be nonnegative and QRS positive".into(),
            });
        }
        let inconsistent = |msg: &str| {
            Err(Error::InconsistentSpec {
                class: self.class.to_string(),
                msg: msg.into(),
            })
        };
        match self.class {
            ClassLabel::Normal => {
                if self.st_elevation_mv != 0.0 {
                    return inconsistent("a normal beat has no ST elevation");
                }
                if self.q_depth_mv != 0.0 {
                    return inconsistent("a normal beat has no pathological Q wave");
                }
                if self.t_inverted {
                    return inconsistent("a normal beat has an upright T wave");
                }
            }
            ClassLabel::ImiType1 => {
                if self.st_elevation_mv <= 0.0 {
                    return inconsistent("type 1 requires ST elevation");
                }
                if self.qrs_amplitude_mv >= NORMAL_QRS_MV {
                    return inconsistent("type 1 requires an attenuated QRS");
                }
            }
            ClassLabel::ImiType2 => {
                if self.q_depth_mv <= 0.0 {
                    return inconsistent("type 2 requires a deep Q wave");
                }
                if !self.t_inverted {
                    return inconsistent("type 2 requires an inverted T wave");
                }
            }
        }
        Ok(())
    }
}

fn gauss(t: f64, center: f64, sigma: f64) -> f64 {
    let z = (t - center) / sigma;
    (-0.5 * z * z).exp()
}

fn st_ramp(t: f64) -> f64 {
    if t < ST_RISE_FROM || t > ST_FALL_TO {
        0.0
    } else if t < ST_FLAT_FROM {
        (t - ST_RISE_FROM) / (ST_FLAT_FROM - ST_RISE_FROM)
    } else if t <= ST_FLAT_TO {
        1.0
    } else {
        (ST_FALL_TO - t) / (ST_FALL_TO - ST_FLAT_TO)
    }
}

/// Builds the 1000-sample beat described by `spec`. The record id is
/// derived from the seed so cohort members produce distinct beat ids.
pub fn generate_synthetic_beat(spec: &SyntheticBeatSpec) -> Result<NormalizedBeat> {
    spec.validate()?;
    let t_amp = if spec.t_inverted { -T_AMP_MV } else { T_AMP_MV };
    let mut samples: Vec<f64> = (0..NORMALIZED_BEAT_LEN)
        .map(|i| {
            let t = i as f64;
            P_AMP_MV * gauss(t, P_CENTER, P_SIGMA)
                + spec.qrs_amplitude_mv * gauss(t, R_CENTER, R_SIGMA)
                - spec.q_depth_mv * gauss(t, Q_CENTER, Q_SIGMA)
                + t_amp * gauss(t, T_CENTER, T_SIGMA)
                + spec.st_elevation_mv * st_ramp(t)
        })
        .collect();
    if spec.noise_rms_mv > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.random_seed);
        let dist = Normal::new(0.0, spec.noise_rms_mv).expect("validated rms");
        for v in &mut samples {
            *v += dist.sample(&mut rng);
        }
    }
    NormalizedBeat::new(
        samples,
        format!("synth-{}", spec.random_seed),
        "iii",
        NORMALIZED_R_INDEX,
    )
}

fn mix_seed(a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over the combined words, for decorrelated
    // per-member seeds.
    let mut z = a
        .wrapping_mul(0x9E3779B97F4A7C15)
        .wrapping_add(b)
        .wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// A cohort member: class-typical parameters jittered per variant, with
/// the given noise floor. Same (class, variant, noise) always yields the
/// same spec.
pub fn preset_spec(class: ClassLabel, variant: u64, noise_rms_mv: f64) -> SyntheticBeatSpec {
    let tag = match class {
        ClassLabel::Normal => 1,
        ClassLabel::ImiType1 => 2,
        ClassLabel::ImiType2 => 3,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(tag, variant));
    let mut spec = SyntheticBeatSpec::normal(mix_seed(variant, tag));
    spec.class = class;
    spec.noise_rms_mv = noise_rms_mv;
    match class {
        ClassLabel::Normal => {
            spec.qrs_amplitude_mv = rng.gen_range(0.95..=1.10);
        }
        ClassLabel::ImiType1 => {
            spec.st_elevation_mv = rng.gen_range(0.20..=0.40);
            spec.qrs_amplitude_mv = rng.gen_range(0.55..=0.80);
        }
        ClassLabel::ImiType2 => {
            spec.q_depth_mv = rng.gen_range(0.25..=0.45);
            spec.t_inverted = true;
            spec.qrs_amplitude_mv = rng.gen_range(0.95..=1.10);
        }
    }
    spec
}

/// The reference template the repository ships: a clean healthy beat.
pub fn synthetic_template() -> TemplateBeat {
    let beat = generate_synthetic_beat(&SyntheticBeatSpec::normal(0)).expect("fixed valid spec");
    TemplateBeat::new(beat, "synthetic normal beat, seed 0, no noise")
        .expect("nonempty provenance")
}

/// A multi-beat single-lead recording of healthy beats with seeded RR
/// variation, for exercising detection and segmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRecordSpec {
    pub record_id: String,
    pub n_beats: usize,
    pub sampling_rate: f64,
    pub noise_rms_mv: f64,
    pub random_seed: u64,
}

// Record-level wave geometry in milliseconds relative to each R peak.
const REC_P_OFFSET_MS: f64 = -140.0;
const REC_T_OFFSET_MS: f64 = 250.0;
const RR_MIN_MS: f64 = 700.0;
const RR_MAX_MS: f64 = 950.0;
// Quiet margins around the first and last beat. The tail must cover the
// widest possible 2x segmentation reach (two thirds of the largest RR).
const LEAD_IN_MS: f64 = 350.0;
const TAIL_MS: f64 = 700.0;

fn add_gauss(signal: &mut [f64], center: f64, sigma: f64, amp: f64) {
    // 8 sigma reach: beyond it the bump is below 1e-13 of its amplitude,
    // far under the detector's envelope floor even on noiseless records.
    let lo = ((center - 8.0 * sigma).floor().max(0.0)) as usize;
    let hi = ((center + 8.0 * sigma).ceil() as usize).min(signal.len().saturating_sub(1));
    for (t, v) in signal[lo..=hi].iter_mut().enumerate() {
        *v += amp * gauss((lo + t) as f64, center, sigma);
    }
}

/// Generates the record and its ground-truth R positions (sample indices,
/// ascending).
pub fn generate_synthetic_record(spec: &SyntheticRecordSpec) -> Result<(EcgRecord, Vec<usize>)> {
    if spec.n_beats == 0 {
        return Err(Error::InvalidParameter {
            msg: "a synthetic record needs at least one beat".into(),
        });
    }
    if !(spec.noise_rms_mv >= 0.0) || !spec.noise_rms_mv.is_finite() {
        return Err(Error::InvalidParameter {
            msg: format!("noise rms {} mV is invalid", spec.noise_rms_mv),
        });
    }
    if !(spec.sampling_rate > 0.0) || !spec.sampling_rate.is_finite() {
        return Err(Error::InvalidRecord {
            msg: format!("sampling rate {} Hz is invalid", spec.sampling_rate),
        });
    }
    let ms = spec.sampling_rate / 1000.0;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.random_seed);
    let mut r_positions = Vec::with_capacity(spec.n_beats);
    let mut pos = LEAD_IN_MS * ms;
    for i in 0..spec.n_beats {
        r_positions.push(pos.round() as usize);
        if i + 1 < spec.n_beats {
            pos += rng.gen_range(RR_MIN_MS..=RR_MAX_MS) * ms;
        }
    }
    let len = pos.round() as usize + (TAIL_MS * ms).round() as usize;

    let mut samples = vec![0.0; len];
    for &r in &r_positions {
        let r = r as f64;
        add_gauss(&mut samples, r + REC_P_OFFSET_MS * ms, P_SIGMA * ms, P_AMP_MV);
        add_gauss(&mut samples, r, R_SIGMA * ms, NORMAL_QRS_MV);
        add_gauss(&mut samples, r + REC_T_OFFSET_MS * ms, T_SIGMA * ms, T_AMP_MV);
    }
    if spec.noise_rms_mv > 0.0 {
        let dist = Normal::new(0.0, spec.noise_rms_mv).expect("validated rms");
        for v in &mut samples {
            *v += dist.sample(&mut rng);
        }
    }

    let record = EcgRecord::new(
        spec.record_id.clone(),
        spec.sampling_rate,
        vec![LeadSignal {
            name: "iii".into(),
            samples,
        }],
        None,
    )?;
    Ok((record, r_positions))
}
