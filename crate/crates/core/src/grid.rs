//! Periodic one-dimensional grid and the Fourier-multiplier form of the
//! fractional Laplacian.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{KgError, Result};

/// Largest imaginary residue (relative to the sup norm of the real part)
/// tolerated when an inverse transform is expected to be real.
const REAL_RESIDUE_TOL: f64 = 1e-10;

/// Uniform periodic grid on `[0, L)` with `n` points.
#[derive(Clone, PartialEq)]
pub struct Grid1D {
    length: f64,
    n: usize,
    dx: f64,
    wavenumbers: Vec<f64>,
}

impl fmt::Debug for Grid1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid1D")
            .field("length", &self.length)
            .field("n", &self.n)
            .field("dx", &self.dx)
            .finish()
    }
}

impl Grid1D {
    /// Builds the grid; `n` must be even and at least 4.
    pub fn new(length: f64, n: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(KgError::InvalidGrid(format!(
                "length must be positive, got {length}"
            )));
        }
        if n < 4 {
            return Err(KgError::InvalidGrid(format!("need n >= 4, got {n}")));
        }
        if !n.is_multiple_of(2) {
            return Err(KgError::InvalidGrid(format!("n must be even, got {n}")));
        }
        let scale = 2.0 * PI / length;
        let wavenumbers = (0..n)
            .map(|j| signed_frequency(j, n) as f64 * scale)
            .collect();
        Ok(Self {
            length,
            n,
            dx: length / n as f64,
            wavenumbers,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Position of node `j`, computed as `j * L / n` so that nodes which are
    /// representable decimals (e.g. 40 on a 0.01 grid) come out exact.
    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.length / self.n as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Angular wavenumbers `2 pi k / L` in FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Index of the node sitting exactly at `x`, if any.
    pub fn node_at(&self, x: f64) -> Option<usize> {
        let j = (x / self.length * self.n as f64).round();
        if j < 0.0 || j >= self.n as f64 {
            return None;
        }
        let j = j as usize;
        (self.x(j) == x).then_some(j)
    }

    pub fn contains(&self, x: f64) -> bool {
        (0.0..self.length).contains(&x)
    }

    pub(crate) fn check_len(&self, field: &[f64]) -> Result<()> {
        if field.len() != self.n {
            return Err(KgError::LengthMismatch {
                expected: self.n,
                got: field.len(),
            });
        }
        Ok(())
    }
}

/// Signed integer frequency of FFT bin `j`; the Nyquist bin maps to `-n/2`.
fn signed_frequency(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Complex coefficients aligned with [`Grid1D::wavenumbers`]. Unnormalized
/// forward convention: `c_k = sum_j u_j exp(-i xi_k x_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub coeffs: Vec<Complex64>,
}

/// Planned forward/inverse transforms plus scratch space for one grid size.
/// One instance per run; not shared between threads.
pub struct Fourier {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Fourier {
    pub fn new(grid: &Grid1D) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.len());
        let inverse = planner.plan_fft_inverse(grid.len());
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            n: grid.len(),
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn forward(&mut self, field: &[f64]) -> Spectrum {
        assert_eq!(field.len(), self.n);
        let mut coeffs: Vec<Complex64> = field.iter().map(|&u| Complex64::new(u, 0.0)).collect();
        self.forward_in_place(&mut coeffs);
        Spectrum { coeffs }
    }

    /// Inverse transform; the imaginary part must be round-off.
    pub fn inverse_real(&mut self, spectrum: &Spectrum) -> Result<Vec<f64>> {
        let mut buf = spectrum.coeffs.clone();
        self.inverse_in_place(&mut buf);
        into_real(buf)
    }

    pub(crate) fn forward_in_place(&mut self, buf: &mut [Complex64]) {
        self.forward.process_with_scratch(buf, &mut self.scratch);
    }

    /// Normalized inverse (divides by `n`).
    pub(crate) fn inverse_in_place(&mut self, buf: &mut [Complex64]) {
        self.inverse.process_with_scratch(buf, &mut self.scratch);
        let scale = 1.0 / self.n as f64;
        for c in buf.iter_mut() {
            *c *= scale;
        }
    }
}

fn into_real(buf: Vec<Complex64>) -> Result<Vec<f64>> {
    let re_max = buf.iter().fold(0.0_f64, |m, c| m.max(c.re.abs()));
    let im_max = buf.iter().fold(0.0_f64, |m, c| m.max(c.im.abs()));
    if im_max > REAL_RESIDUE_TOL * re_max.max(1.0) {
        return Err(KgError::InvalidArgument(format!(
            "inverse transform is not real: imaginary residue {im_max:e}"
        )));
    }
    Ok(buf.into_iter().map(|c| c.re).collect())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(KgError::InvalidAlpha(alpha));
    }
    Ok(())
}

/// Symbol `|xi|^power` evaluated on the grid wavenumbers.
pub(crate) fn symbol(grid: &Grid1D, power: f64) -> Vec<f64> {
    grid.wavenumbers()
        .iter()
        .map(|xi| xi.abs().powf(power))
        .collect()
}

/// Applies `(-Delta)^alpha` as the multiplier `|xi|^(2 alpha)`. The Nyquist
/// coefficient is multiplied like every other mode.
pub fn frac_laplacian_apply(field: &[f64], alpha: f64, grid: &Grid1D) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    grid.check_len(field)?;
    let mut fourier = Fourier::new(grid);
    let mut spectrum = fourier.forward(field);
    for (c, s) in spectrum.coeffs.iter_mut().zip(symbol(grid, 2.0 * alpha)) {
        *c *= s;
    }
    fourier.inverse_real(&spectrum)
}

/// `||(-Delta)^(alpha/2) u||_{L2}` via discrete Parseval:
/// `dx * sum_j |w_j|^2 = (dx / n) * sum_k |xi_k|^(2 alpha) |c_k|^2`.
pub fn frac_half_norm(field: &[f64], alpha: f64, grid: &Grid1D) -> Result<f64> {
    check_alpha(alpha)?;
    grid.check_len(field)?;
    let mut fourier = Fourier::new(grid);
    let spectrum = fourier.forward(field);
    Ok(spectral_half_norm(&spectrum, alpha, grid))
}

pub(crate) fn spectral_half_norm(spectrum: &Spectrum, alpha: f64, grid: &Grid1D) -> f64 {
    let sum: f64 = spectrum
        .coeffs
        .iter()
        .zip(grid.wavenumbers())
        .map(|(c, xi)| xi.abs().powf(2.0 * alpha) * c.norm_sqr())
        .sum();
    (sum * grid.dx() / grid.len() as f64).sqrt()
}
