//! Continuous wavelet machinery.
//!
//! The analysis pipeline needs four things from this module: the Morlet
//! transform of a signal over a grid of scales ([`cwt_morlet`]), the cross
//! spectrum of two transforms ([`xwt`]), a time-and-scale kernel smoother
//! ([`smooth`], [`Smoother`]), and the squared coherence assembled from all
//! three ([`wcoh`]).
//!
//! All matrices are stored row-major with one row per scale, so `values[r *
//! n_times + t]` is the coefficient at scale row `r` and sample `t`. Scale
//! rows follow the grid order (ascending).

mod coherence;
mod cwt;
pub mod export;
mod smooth;


use num_complex::Complex64;

use crate::error::{Error, Result};

pub use coherence::{wcoh, wcoh_raw};
pub(crate) use coherence::{coherence_against, smoothed_scaled_power};
pub use cwt::{cwt_morlet, fourier_factor, OMEGA0};
pub use smooth::{smooth, smooth_real, Smoother};

/// The scales a transform is evaluated at, in sample units.
///
/// The default working grid is the integers 1 through 512, which makes a
/// scale value and its (1-based) row number coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleGrid {
    scales: Vec<f64>,
}

impl ScaleGrid {
    /// Builds a grid from explicit scale values. The values must be finite,
    /// strictly increasing and positive.
    pub fn new(scales: Vec<f64>) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::InvalidGrid {
                msg: "no scales given".into(),
            });
        }
        for pair in scales.windows(2) {
            if !(pair[1] > pair[0]) {
                return Err(Error::InvalidGrid {
                    msg: format!("scales must be strictly increasing, got {} then {}", pair[0], pair[1]),
                });
            }
        }
        if !(scales[0] > 0.0) || scales.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidGrid {
                msg: "scales must be finite and positive".into(),
            });
        }
        Ok(ScaleGrid { scales })
    }

    /// The consecutive integer scales `min..=max`.
    pub fn linear(min: u32, max: u32) -> Result<Self> {
        if min == 0 || max < min {
            return Err(Error::InvalidGrid {
                msg: format!("need 1 <= min <= max, got {min}..{max}"),
            });
        }
        ScaleGrid::new((min..=max).map(f64::from).collect())
    }

    /// The default grid, integer scales 1 through 512.
    pub fn default_512() -> Self {
        ScaleGrid::linear(1, 512).expect("static bounds")
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.scales
    }

    /// Scale value at row `row`. Panics when out of range, like indexing.
    pub fn scale(&self, row: usize) -> f64 {
        self.scales[row]
    }

    /// Inclusive row range covering the scale values in `[lo, hi]`.
    ///
    /// Bounds are taken with a small absolute tolerance so that band edges
    /// computed in floating point (such as 0.7 times an integer scale) do
    /// not drop the boundary row.
    pub fn band_rows(&self, lo: f64, hi: f64) -> Result<(usize, usize)> {
        const EDGE_TOL: f64 = 1e-6;
        if !(lo <= hi) {
            return Err(Error::InvalidGrid {
                msg: format!("empty scale band {lo}..{hi}"),
            });
        }
        let first = self.scales.partition_point(|&s| s < lo - EDGE_TOL);
        let last = self.scales.partition_point(|&s| s <= hi + EDGE_TOL);
        if first >= last {
            return Err(Error::InvalidGrid {
                msg: format!("no grid scales inside {lo}..{hi}"),
            });
        }
        Ok((first, last - 1))
    }
}

fn check_dims(n_rows: usize, n_times: usize, len: usize) -> Result<()> {
    if n_rows * n_times != len {
        return Err(Error::DimensionMismatch {
            left: format!("{n_rows} x {n_times}"),
            right: format!("{len} values"),
        });
    }
    Ok(())
}

/// Wavelet coefficients of one signal: complex, one row per scale.
#[derive(Debug, Clone)]
pub struct CwtMatrix {
    grid: ScaleGrid,
    n_times: usize,
    values: Vec<Complex64>,
}

impl CwtMatrix {
    pub fn from_values(grid: ScaleGrid, n_times: usize, values: Vec<Complex64>) -> Result<Self> {
        check_dims(grid.len(), n_times, values.len())?;
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite {
                what: "wavelet coefficient matrix",
            });
        }
        Ok(CwtMatrix { grid, n_times, values })
    }

    pub fn grid(&self) -> &ScaleGrid {
        &self.grid
    }

    pub fn n_scales(&self) -> usize {
        self.grid.len()
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn at(&self, row: usize, t: usize) -> Complex64 {
        self.values[row * self.n_times + t]
    }

    pub fn row(&self, row: usize) -> &[Complex64] {
        &self.values[row * self.n_times..(row + 1) * self.n_times]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

/// Cross spectrum of two transforms: elementwise product of one with the
/// conjugate of the other. Same layout as [`CwtMatrix`].
#[derive(Debug, Clone)]
pub struct WcsMatrix {
    grid: ScaleGrid,
    n_times: usize,
    values: Vec<Complex64>,
}

impl WcsMatrix {
    pub fn from_values(grid: ScaleGrid, n_times: usize, values: Vec<Complex64>) -> Result<Self> {
        check_dims(grid.len(), n_times, values.len())?;
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite {
                what: "cross spectrum matrix",
            });
        }
        Ok(WcsMatrix { grid, n_times, values })
    }

    pub fn grid(&self) -> &ScaleGrid {
        &self.grid
    }

    pub fn n_scales(&self) -> usize {
        self.grid.len()
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn at(&self, row: usize, t: usize) -> Complex64 {
        self.values[row * self.n_times + t]
    }

    pub fn row(&self, row: usize) -> &[Complex64] {
        &self.values[row * self.n_times..(row + 1) * self.n_times]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

/// Squared wavelet coherence: real, one row per scale, values in [0, 1]
/// after clamping (the raw variant may stray outside by at most 1e-9, see
/// [`wcoh_raw`]).
#[derive(Debug, Clone)]
pub struct WcohMatrix {
    grid: ScaleGrid,
    n_times: usize,
    values: Vec<f64>,
}

impl WcohMatrix {
    /// Tolerance the constructor allows around the [0, 1] range.
    pub const RANGE_TOL: f64 = 1e-9;

    pub fn from_values(grid: ScaleGrid, n_times: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(grid.len(), n_times, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "coherence matrix",
            });
        }
        if let Some(bad) = values
            .iter()
            .find(|&&v| v < -Self::RANGE_TOL || v > 1.0 + Self::RANGE_TOL)
        {
            return Err(Error::InvalidParameter {
                msg: format!("coherence value {bad} outside [0, 1]"),
            });
        }
        Ok(WcohMatrix { grid, n_times, values })
    }

    /// Internal constructor that skips the range check (used for raw,
    /// pre-clamp diagnostics). Dimensions must already agree.
    pub(crate) fn from_values_raw(grid: ScaleGrid, n_times: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len() * n_times, values.len());
        WcohMatrix { grid, n_times, values }
    }

    pub fn grid(&self) -> &ScaleGrid {
        &self.grid
    }

    pub fn n_scales(&self) -> usize {
        self.grid.len()
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn at(&self, row: usize, t: usize) -> f64 {
        self.values[row * self.n_times + t]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.n_times..(row + 1) * self.n_times]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Elementwise cross spectrum `wx * conj(wy)`, without any smoothing.
pub fn xwt(wx: &CwtMatrix, wy: &CwtMatrix) -> Result<WcsMatrix> {
    check_same_shape(wx, wy)?;
    let values = wx
        .values
        .iter()
        .zip(&wy.values)
        .map(|(a, b)| a * b.conj())
        .collect();
    Ok(WcsMatrix {
        grid: wx.grid.clone(),
        n_times: wx.n_times,
        values,
    })
}

pub(crate) fn check_same_shape(wx: &CwtMatrix, wy: &CwtMatrix) -> Result<()> {
    if wx.n_times != wy.n_times || wx.n_scales() != wy.n_scales() {
        return Err(Error::DimensionMismatch {
            left: format!("{} scales x {} samples", wx.n_scales(), wx.n_times()),
            right: format!("{} scales x {} samples", wy.n_scales(), wy.n_times()),
        });
    }
    if wx.grid.values() != wy.grid.values() {
        return Err(Error::DimensionMismatch {
            left: format!("scale grid {}..{}", wx.grid.scale(0), wx.grid.scale(wx.n_scales() - 1)),
            right: format!("scale grid {}..{}", wy.grid.scale(0), wy.grid.scale(wy.n_scales() - 1)),
        });
    }
    Ok(())
}
