use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::{ScaleGrid, WcohMatrix, WcsMatrix};
use crate::error::{Error, Result};

/// Kernels at most this many samples either side of center are convolved
/// directly; wider ones go through the FFT. At typical beat lengths the
/// crossover sits near a half-width of a few dozen samples.
const DIRECT_MAX_HALF: usize = 32;

/// Time-then-scale kernel smoother for coefficient matrices on one grid.
///
/// Each scale row is smoothed along time with a unit-sum Gaussian of
/// standard deviation equal to the scale, truncated at three standard
/// deviations; each column is then smoothed across scales with a unit-sum
/// boxcar covering the rows whose scale lies within 30 percent of the row's
/// own scale (always at least the row itself). Near matrix edges the
/// truncated part of a kernel is renormalized over the samples actually in
/// range, so a constant matrix stays constant everywhere.
///
/// Construction precomputes the per-scale kernels, their frequency-domain
/// forms, and the cross-scale averaging ranges, so one smoother should be
/// reused across matrices that share a grid and signal length.
pub struct Smoother {
    grid: ScaleGrid,
    n_times: usize,
    rows: Vec<RowKernel>,
    bands: Vec<(usize, usize)>,
    conv_len: usize,
    fft: Option<(Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>,
}

struct RowKernel {
    half: usize,
    weights: Vec<f64>,
    /// prefix[i] = sum of weights[..i]; used to renormalize clipped windows.
    prefix: Vec<f64>,
    /// Frequency response over `conv_len` bins, present for FFT-path rows.
    spectrum: Option<Vec<Complex64>>,
}

impl Smoother {
    pub fn new(grid: &ScaleGrid, n_times: usize) -> Smoother {
        Smoother::with_direct_limit(grid, n_times, DIRECT_MAX_HALF)
    }

    /// As [`Smoother::new`] but with an explicit direct/FFT crossover,
    /// letting tests drive both convolution paths over the same kernels.
    pub(crate) fn with_direct_limit(
        grid: &ScaleGrid,
        n_times: usize,
        direct_max_half: usize,
    ) -> Smoother {
        assert!(n_times > 0, "smoother needs at least one time sample");

        let mut rows: Vec<RowKernel> = grid
            .values()
            .iter()
            .map(|&s| {
                // For integer scales 3s is exact; the epsilon keeps the
                // boundary sample included when 3s lands on an integer in
                // inexact arithmetic.
                let half = (3.0 * s + 1e-9).floor() as usize;
                let mut weights: Vec<f64> = (-(half as i64)..=half as i64)
                    .map(|t| {
                        let u = t as f64 / s;
                        (-0.5 * u * u).exp()
                    })
                    .collect();
                let total: f64 = weights.iter().sum();
                for w in &mut weights {
                    *w /= total;
                }
                let mut prefix = Vec::with_capacity(weights.len() + 1);
                let mut acc = 0.0;
                prefix.push(0.0);
                for &w in &weights {
                    acc += w;
                    prefix.push(acc);
                }
                RowKernel {
                    half,
                    weights,
                    prefix,
                    spectrum: None,
                }
            })
            .collect();

        let widest_fft_half = rows
            .iter()
            .map(|k| k.half)
            .filter(|&h| h > direct_max_half)
            .max();
        let conv_len = widest_fft_half
            .map(|h| (n_times + 2 * h).next_power_of_two())
            .unwrap_or(0);
        let fft = widest_fft_half.map(|_| {
            let mut planner = FftPlanner::new();
            (
                planner.plan_fft_forward(conv_len),
                planner.plan_fft_inverse(conv_len),
            )
        });
        if let Some((forward, _)) = &fft {
            for kernel in rows.iter_mut().filter(|k| k.half > direct_max_half) {
                let mut buf = vec![Complex64::new(0.0, 0.0); conv_len];
                for (slot, &w) in buf.iter_mut().zip(&kernel.weights) {
                    *slot = Complex64::new(w, 0.0);
                }
                forward.process(&mut buf);
                kernel.spectrum = Some(buf);
            }
        }

        let bands = grid
            .values()
            .iter()
            .map(|&s| {
                grid.band_rows(0.7 * s, 1.3 * s)
                    .expect("a scale lies inside its own band")
            })
            .collect();

        Smoother {
            grid: grid.clone(),
            n_times,
            rows,
            bands,
            conv_len,
            fft,
        }
    }

    pub fn grid(&self) -> &ScaleGrid {
        &self.grid
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    /// Smooths a complex matrix in time and scale.
    pub fn apply(&self, matrix: &WcsMatrix) -> Result<WcsMatrix> {
        self.check_shape(matrix.grid(), matrix.n_times())?;
        let values = self.run_complex(matrix.values());
        Ok(WcsMatrix::from_values(self.grid.clone(), self.n_times, values)
            .expect("smoothing preserves shape and finiteness"))
    }

    /// Smooths a real matrix in time and scale.
    pub fn apply_real(&self, matrix: &WcohMatrix) -> Result<WcohMatrix> {
        self.check_shape(matrix.grid(), matrix.n_times())?;
        let values = self.run_real(matrix.values());
        Ok(WcohMatrix::from_values_raw(
            self.grid.clone(),
            self.n_times,
            values,
        ))
    }

    fn check_shape(&self, grid: &ScaleGrid, n_times: usize) -> Result<()> {
        if grid.values() != self.grid.values() || n_times != self.n_times {
            return Err(Error::DimensionMismatch {
                left: format!("smoother for {} scales x {}", self.grid.len(), self.n_times),
                right: format!("matrix of {} scales x {}", grid.len(), n_times),
            });
        }
        Ok(())
    }

    /// Real-valued matrices ride the complex path with zero imaginary part,
    /// so identical inputs produce bit-identical results on either route.
    pub(crate) fn run_real(&self, values: &[f64]) -> Vec<f64> {
        let complex: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.run_complex(&complex).iter().map(|v| v.re).collect()
    }

    pub(crate) fn run_complex(&self, values: &[Complex64]) -> Vec<Complex64> {
        let n = self.n_times;
        debug_assert_eq!(values.len(), self.rows.len() * n);

        let time_rows: Vec<Vec<Complex64>> = (0..self.rows.len())
            .into_par_iter()
            .map(|r| self.time_smooth_row(r, &values[r * n..(r + 1) * n]))
            .collect();

        self.scale_smooth(&time_rows)
    }

    fn time_smooth_row(&self, row: usize, input: &[Complex64]) -> Vec<Complex64> {
        let kernel = &self.rows[row];
        let n = self.n_times;
        let h = kernel.half;
        let mut out = vec![Complex64::new(0.0, 0.0); n];

        if let Some(spectrum) = &kernel.spectrum {
            let (forward, inverse) = self.fft.as_ref().expect("spectrum implies plans");
            let mut buf = vec![Complex64::new(0.0, 0.0); self.conv_len];
            for (slot, &v) in buf.iter_mut().zip(input) {
                *slot = v;
            }
            forward.process(&mut buf);
            for (v, &k) in buf.iter_mut().zip(spectrum) {
                *v *= k;
            }
            inverse.process(&mut buf);
            let inv_len = 1.0 / self.conv_len as f64;
            for (t0, slot) in out.iter_mut().enumerate() {
                *slot = buf[t0 + h] * (inv_len / self.window_mass(kernel, t0));
            }
        } else {
            for (t0, slot) in out.iter_mut().enumerate() {
                let lo = t0.saturating_sub(h);
                let hi = (t0 + h).min(n - 1);
                let mut acc = Complex64::new(0.0, 0.0);
                for (tau, &v) in input[lo..=hi].iter().enumerate() {
                    acc += v * kernel.weights[lo + tau + h - t0];
                }
                *slot = acc / self.window_mass(kernel, t0);
            }
        }
        out
    }

    /// Kernel mass falling inside the matrix for an output at `t0`; 1 when
    /// the window is fully interior (up to normalization rounding).
    fn window_mass(&self, kernel: &RowKernel, t0: usize) -> f64 {
        let h = kernel.half;
        let first = h.saturating_sub(t0);
        let last = h + (self.n_times - 1 - t0).min(h);
        kernel.prefix[last + 1] - kernel.prefix[first]
    }

    /// Unit-sum boxcar across scales, evaluated as a sliding sum over the
    /// precomputed (monotone) row ranges.
    fn scale_smooth(&self, rows: &[Vec<Complex64>]) -> Vec<Complex64> {
        let n = self.n_times;
        let mut out = vec![Complex64::new(0.0, 0.0); rows.len() * n];
        let mut acc = vec![Complex64::new(0.0, 0.0); n];
        let mut added = 0usize; // rows [dropped, added) are in acc
        let mut dropped = 0usize;

        for (r, chunk) in out.chunks_mut(n).enumerate() {
            let (lo, hi) = self.bands[r];
            debug_assert!(dropped <= lo && added <= hi + 1);
            while added <= hi {
                for (a, &v) in acc.iter_mut().zip(&rows[added]) {
                    *a += v;
                }
                added += 1;
            }
            while dropped < lo {
                for (a, &v) in acc.iter_mut().zip(&rows[dropped]) {
                    *a -= v;
                }
                dropped += 1;
            }
            let inv_width = 1.0 / (hi - lo + 1) as f64;
            for (slot, &a) in chunk.iter_mut().zip(acc.iter()) {
                *slot = a * inv_width;
            }
        }
        out
    }
}

/// One-shot smoothing of a complex matrix. Building the [`Smoother`] once
/// and reusing it is cheaper when several matrices share a shape.
pub fn smooth(matrix: &WcsMatrix) -> WcsMatrix {
    Smoother::new(matrix.grid(), matrix.n_times())
        .apply(matrix)
        .expect("smoother built from the matrix's own shape")
}

/// One-shot smoothing of a real matrix.
pub fn smooth_real(matrix: &WcohMatrix) -> WcohMatrix {
    Smoother::new(matrix.grid(), matrix.n_times())
        .apply_real(matrix)
        .expect("smoother built from the matrix's own shape")
}
