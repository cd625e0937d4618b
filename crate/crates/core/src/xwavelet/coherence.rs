use num_complex::Complex64;

use super::{check_same_shape, CwtMatrix, Smoother, WcohMatrix};
use crate::error::Result;

/// Smoothed denominators below this are treated as zero energy: the cell
/// carries no evidence either way, and the coherence there is defined as 0
/// rather than NaN.
const ENERGY_FLOOR: f64 = 1e-300;

/// Squared wavelet coherence of two transforms, clamped to [0, 1].
///
/// Each cell is |S(W_xy / s)|^2 / (S(|W_x|^2 / s) * S(|W_y|^2 / s)), where
/// W_xy is the cross spectrum, S the time-and-scale smoother, and s the
/// row's scale (divided out before smoothing). Without the smoothing the
/// ratio is identically 1; the kernels are what make the value informative.
pub fn wcoh(wx: &CwtMatrix, wy: &CwtMatrix) -> Result<WcohMatrix> {
    let smoother = Smoother::new(wx.grid(), wx.n_times());
    coherence_impl(wx, wy, Some(&smoother), true)
}

/// As [`wcoh`] but without the final clamp, exposing the raw ratios. They
/// may stray outside [0, 1] by no more than rounding noise (about 1e-9 in
/// the worst case); anything larger indicates a defect.
pub fn wcoh_raw(wx: &CwtMatrix, wy: &CwtMatrix) -> Result<WcohMatrix> {
    let smoother = Smoother::new(wx.grid(), wx.n_times());
    coherence_impl(wx, wy, Some(&smoother), false)
}

/// Degenerate variant with the smoothing replaced by the identity, kept for
/// tests: every nonzero cell then comes out at exactly 1, which is the
/// algebraic identity |a b*|^2 = |a|^2 |b|^2 in ratio form.
#[cfg(test)]
pub(crate) fn wcoh_unsmoothed(wx: &CwtMatrix, wy: &CwtMatrix) -> Result<WcohMatrix> {
    coherence_impl(wx, wy, None, true)
}

fn coherence_impl(
    wx: &CwtMatrix,
    wy: &CwtMatrix,
    smoother: Option<&Smoother>,
    clamp: bool,
) -> Result<WcohMatrix> {
    check_same_shape(wx, wy)?;
    let power_x = smoothed_scaled_power(wx, smoother);
    Ok(coherence_against(wx, &power_x, wy, smoother, clamp))
}

/// Smoothed scale-weighted auto-power S(|W|^2 / s) of one transform. Split
/// out so a fixed reference transform's half of the denominator can be
/// computed once and reused across many comparisons.
pub(crate) fn smoothed_scaled_power(w: &CwtMatrix, smoother: Option<&Smoother>) -> Vec<f64> {
    let n = w.n_times();
    let mut power: Vec<f64> = Vec::with_capacity(w.values().len());
    for (r, row) in w.values().chunks(n).enumerate() {
        let inv_s = 1.0 / w.grid().scale(r);
        power.extend(row.iter().map(|v| v.norm_sqr() * inv_s));
    }
    match smoother {
        Some(s) => s.run_real(&power),
        None => power,
    }
}

/// Coherence of `wy` against `wx` whose smoothed auto-power is already
/// known. `power_x` must come from [`smoothed_scaled_power`] on `wx` with
/// the same smoother.
pub(crate) fn coherence_against(
    wx: &CwtMatrix,
    power_x: &[f64],
    wy: &CwtMatrix,
    smoother: Option<&Smoother>,
    clamp: bool,
) -> WcohMatrix {
    let n = wx.n_times();
    let power_y = smoothed_scaled_power(wy, smoother);

    let mut cross: Vec<Complex64> = Vec::with_capacity(wx.values().len());
    for (r, (row_x, row_y)) in wx
        .values()
        .chunks(n)
        .zip(wy.values().chunks(n))
        .enumerate()
    {
        let inv_s = 1.0 / wx.grid().scale(r);
        cross.extend(
            row_x
                .iter()
                .zip(row_y)
                .map(|(a, b)| a * b.conj() * inv_s),
        );
    }
    let cross = match smoother {
        Some(s) => s.run_complex(&cross),
        None => cross,
    };

    let values: Vec<f64> = cross
        .iter()
        .zip(power_x.iter().zip(&power_y))
        .map(|(c, (&px, &py))| {
            let denom = px * py;
            if denom < ENERGY_FLOOR {
                0.0
            } else {
                let r = c.norm_sqr() / denom;
                if clamp {
                    r.clamp(0.0, 1.0)
                } else {
                    r
                }
            }
        })
        .collect();

    WcohMatrix::from_values_raw(wx.grid().clone(), n, values)
}
