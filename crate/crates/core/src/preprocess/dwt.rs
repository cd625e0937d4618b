//! Dyadic orthogonal wavelet filter bank (Daubechies family, 6 vanishing
//! moments, 12 taps).
//!
//! The transform is periodized. To keep boundary artifacts out of the
//! reconstruction, callers hand in a signal that has been symmetrically
//! extended (see [`extend_symmetric`]): the extended signal is continuous
//! across the circular seam, so only derivative discontinuities remain.
//!
//! Analysis correlates with the filters and subsamples by 2; synthesis is
//! the adjoint. Because the filter rows are orthonormal, the adjoint is the
//! exact inverse and perfect reconstruction holds to rounding error.

/// Daubechies scaling filter with 6 vanishing moments. Sum is sqrt(2),
/// energy 1, even shifts orthonormal; the unit tests pin all three.
const SCALING: [f64; 12] = [
    0.111_540_743_350_080_17,
    0.494_623_890_398_385_4,
    0.751_133_908_021_577_5,
    0.315_250_351_709_243_2,
    -0.226_264_693_965_169_13,
    -0.129_766_867_567_095_63,
    0.097_501_605_587_079_36,
    0.027_522_865_530_016_29,
    -0.031_582_039_318_031_156,
    0.000_553_842_200_993_801_6,
    0.004_777_257_511_010_651,
    -0.001_077_301_084_995_58,
];

const TAPS: usize = SCALING.len();

/// Quadrature mirror of the scaling filter: g[n] = (-1)^n h[L-1-n].
fn wavelet_filter() -> [f64; TAPS] {
    let mut g = [0.0; TAPS];
    for (n, slot) in g.iter_mut().enumerate() {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        *slot = sign * SCALING[TAPS - 1 - n];
    }
    g
}

/// Multi-level decomposition of a signal whose length is divisible by
/// 2^levels. `details[0]` is the finest (highest-frequency) band.
pub(crate) struct Decomposition {
    pub approx: Vec<f64>,
    pub details: Vec<Vec<f64>>,
}

/// One analysis step: correlate with both filters, subsample by 2,
/// periodized. `x.len()` must be even.
fn analyze_step(x: &[f64], g: &[f64; TAPS]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    debug_assert!(n % 2 == 0 && n >= 2);
    let half = n / 2;
    let mut approx = vec![0.0; half];
    let mut detail = vec![0.0; half];
    for k in 0..half {
        let mut a = 0.0;
        let mut d = 0.0;
        let base = 2 * k;
        for t in 0..TAPS {
            let idx = (base + t) % n;
            let v = x[idx];
            a += SCALING[t] * v;
            d += g[t] * v;
        }
        approx[k] = a;
        detail[k] = d;
    }
    (approx, detail)
}

/// One synthesis step, the adjoint of [`analyze_step`].
fn synthesize_step(approx: &[f64], detail: &[f64], g: &[f64; TAPS]) -> Vec<f64> {
    let half = approx.len();
    let n = half * 2;
    let mut x = vec![0.0; n];
    for k in 0..half {
        let a = approx[k];
        let d = detail[k];
        let base = 2 * k;
        for t in 0..TAPS {
            let idx = (base + t) % n;
            x[idx] += SCALING[t] * a + g[t] * d;
        }
    }
    x
}

/// Decomposes `x` (length divisible by 2^levels, at least 2^levels) into
/// `levels` detail bands plus the final approximation.
pub(crate) fn decompose(x: &[f64], levels: usize) -> Decomposition {
    debug_assert!(levels >= 1);
    debug_assert!(
        x.len() % (1 << levels) == 0,
        "length {} not divisible by 2^{levels}",
        x.len()
    );
    let g = wavelet_filter();
    let mut details = Vec::with_capacity(levels);
    let mut current = x.to_vec();
    for _ in 0..levels {
        let (a, d) = analyze_step(&current, &g);
        details.push(d);
        current = a;
    }
    Decomposition {
        approx: current,
        details,
    }
}

/// Inverse of [`decompose`].
pub(crate) fn reconstruct(dec: &Decomposition) -> Vec<f64> {
    let g = wavelet_filter();
    let mut current = dec.approx.clone();
    for d in dec.details.iter().rev() {
        current = synthesize_step(&current, d, &g);
    }
    current
}

/// Reconstructs the contribution of a single detail band (1-based level),
/// i.e. the inverse transform with every other band zeroed. Kept as the
/// decimated reference that [`stationary_detail`] is checked against.
#[cfg(test)]
fn reconstruct_detail(dec: &Decomposition, level: usize) -> Vec<f64> {
    debug_assert!(level >= 1 && level <= dec.details.len());
    let g = wavelet_filter();
    let mut current = vec![0.0; dec.approx.len()];
    for (i, d) in dec.details.iter().enumerate().rev() {
        let band: std::borrow::Cow<[f64]> = if i + 1 == level {
            d.as_slice().into()
        } else {
            vec![0.0; d.len()].into()
        };
        current = synthesize_step(&current, &band, &g);
    }
    current
}

/// One undecimated filter pass with the filter upsampled by `hole`:
/// circular correlation when `forward`, its adjoint otherwise.
fn undecimated_step(x: &[f64], f: &[f64; TAPS], hole: usize, forward: bool) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    for (t, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (i, &c) in f.iter().enumerate() {
            let offset = (i * hole) % n;
            let idx = if forward {
                (t + offset) % n
            } else {
                (t + n - offset) % n
            };
            acc += c * x[idx];
        }
        *slot = acc;
    }
    out
}

/// Shift-invariant single-band reconstruction: the undecimated analysis
/// cascade down to `level`, then the averaged adjoint back up (each
/// adjoint stage carries a factor 1/2, which is what makes the two
/// polyphase branches average instead of sum).
///
/// The result equals the mean over all 2^level circular shifts of the
/// decimated [`reconstruct_detail`], so unlike that function it commutes
/// with delays: a shifted input gives the same band, shifted. Threshold
/// detectors need this form, because with the decimated one the band
/// energy of identical transients varies severalfold with their sampling
/// phase.
pub(crate) fn stationary_detail(x: &[f64], level: usize) -> Vec<f64> {
    debug_assert!(level >= 1);
    let g = wavelet_filter();
    let mut approx = x.to_vec();
    for stage in 1..level {
        approx = undecimated_step(&approx, &SCALING, 1 << (stage - 1), true);
    }
    let hole = 1 << (level - 1);
    let detail = undecimated_step(&approx, &g, hole, true);
    let mut band = undecimated_step(&detail, &g, hole, false);
    for v in &mut band {
        *v *= 0.5;
    }
    for stage in (1..level).rev() {
        band = undecimated_step(&band, &SCALING, 1 << (stage - 1), false);
        for v in &mut band {
            *v *= 0.5;
        }
    }
    band
}

/// Symmetrically extends `x` so the result's length is divisible by
/// 2^levels and the periodic continuation is continuous: the signal is
/// first mirror-padded to half the target length, then followed by its own
/// reversal. The first `x.len()` samples are `x` itself.
pub(crate) fn extend_symmetric(x: &[f64], levels: usize) -> Vec<f64> {
    let n = x.len();
    debug_assert!(n >= 2);
    let half_block = 1usize << (levels - 1);
    let m = n.div_ceil(half_block) * half_block;
    let mut out = Vec::with_capacity(2 * m);
    // triangle-wave index map: 0,1,..,n-1,n-2,..,1,0,1,..
    let period = 2 * n - 2;
    for i in 0..m {
        let p = i % period;
        let idx = if p < n { p } else { period - p };
        out.push(x[idx]);
    }
    for i in (0..m).rev() {
        out.push(out[i]);
    }
    out
}
