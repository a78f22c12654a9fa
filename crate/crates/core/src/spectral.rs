//! FFT plumbing for the periodic grid: transforms, Fourier multipliers,
//! 2/3-rule dealiasing, and the implicit diffusion solve.
//!
//! Conventions. Forward transforms are normalized by `1/N^dim`, so spectral
//! coefficients coincide with continuum Fourier coefficients for band-limited
//! data. First-derivative multipliers zero the Nyquist mode, which makes the
//! discrete integration by parts `<Df, g> = -<f, Dg>` exact; the Laplacian
//! keeps the full `|k|^2` symbol. Dealiased fields never populate modes at or
//! above the 2/3 cutoff, so the two conventions agree on every field a solver
//! produces.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Per-grid FFT plans and multiplier tables. Shared read-only across threads.
pub struct Spectral {
    dim: usize,
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// 2π·k with the Nyquist entry zeroed; used for first derivatives.
    k_deriv: Vec<f64>,
    /// Signed integer wavenumber including Nyquist; used for |k|².
    k_full: Vec<f64>,
    /// True where |k| <= floor(n/3): the 2/3-rule keep set.
    keep: Vec<bool>,
}

impl Spectral {
    pub fn new(dim: usize, n: usize) -> Self {
        assert!(dim == 1 || dim == 2, "only dim 1 and 2 are supported");
        assert!(n >= 4 && n.is_power_of_two(), "n must be a power of two >= 4");
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let cutoff = (n / 3) as i64;
        let mut k_deriv = vec![0.0; n];
        let mut k_full = vec![0.0; n];
        let mut keep = vec![false; n];
        for j in 0..n {
            let k = if j <= n / 2 { j as i64 } else { j as i64 - n as i64 };
            k_full[j] = k as f64;
            k_deriv[j] = if j == n / 2 { 0.0 } else { 2.0 * PI * k as f64 };
            keep[j] = k.abs() <= cutoff;
        }
        Spectral {
            dim,
            n,
            fwd,
            inv,
            k_deriv,
            k_full,
            keep,
        }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Forward transform, normalized so coefficients are Fourier coefficients.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        assert_eq!(values.len(), self.len());
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, true);
        let scale = 1.0 / self.len() as f64;
        for c in &mut buf {
            *c *= scale;
        }
        buf
    }

    /// Inverse transform; returns the real part.
    pub fn inverse(&self, spec: &[Complex64]) -> Vec<f64> {
        assert_eq!(spec.len(), self.len());
        let mut buf = spec.to_vec();
        self.transform(&mut buf, false);
        buf.into_iter().map(|c| c.re).collect()
    }

    fn transform(&self, buf: &mut [Complex64], forward: bool) {
        let fft = if forward { &self.fwd } else { &self.inv };
        let n = self.n;
        match self.dim {
            1 => fft.process(buf),
            2 => {
                // Rows (y contiguous), then columns (x strided).
                for row in buf.chunks_exact_mut(n) {
                    fft.process(row);
                }
                let mut col = vec![Complex64::default(); n];
                for iy in 0..n {
                    for ix in 0..n {
                        col[ix] = buf[ix * n + iy];
                    }
                    fft.process(&mut col);
                    for ix in 0..n {
                        buf[ix * n + iy] = col[ix];
                    }
                }
            }
            _ => unreachable!(),
        }
    }

    fn axis_index(&self, idx: usize, axis: usize) -> usize {
        match (self.dim, axis) {
            (1, 0) => idx,
            (2, 0) => idx / self.n,
            (2, 1) => idx % self.n,
            _ => panic!("axis {axis} out of range for dim {}", self.dim),
        }
    }

    /// Multiplies by `i·2π·k_axis` in place (Nyquist zeroed).
    pub fn derivative_spec(&self, spec: &mut [Complex64], axis: usize) {
        for (idx, c) in spec.iter_mut().enumerate() {
            let k = self.k_deriv[self.axis_index(idx, axis)];
            *c *= Complex64::new(0.0, k);
        }
    }

    /// Multiplies by `-4π²|k|²` in place.
    pub fn laplacian_spec(&self, spec: &mut [Complex64]) {
        for (idx, c) in spec.iter_mut().enumerate() {
            *c *= -self.k_sq(idx);
        }
    }

    /// `4π²|k|²` at a flat spectral index.
    pub fn k_sq(&self, idx: usize) -> f64 {
        let mut s = 0.0;
        for axis in 0..self.dim {
            let k = self.k_full[self.axis_index(idx, axis)];
            s += k * k;
        }
        4.0 * PI * PI * s
    }

    /// Zeroes every mode outside the 2/3-rule keep set, in place.
    pub fn project_spec(&self, spec: &mut [Complex64]) {
        for (idx, c) in spec.iter_mut().enumerate() {
            let mut keep = true;
            for axis in 0..self.dim {
                keep &= self.keep[self.axis_index(idx, axis)];
            }
            if !keep {
                *c = Complex64::default();
            }
        }
    }

    /// Applies `(I - alpha·Δ)^{-1}` in place: division by `1 + alpha·4π²|k|²`.
    pub fn helmholtz_solve_spec(&self, spec: &mut [Complex64], alpha: f64) {
        assert!(alpha >= 0.0);
        for (idx, c) in spec.iter_mut().enumerate() {
            *c /= 1.0 + alpha * self.k_sq(idx);
        }
    }

    /// Applies the exact heat multiplier `exp(-eps·4π²|k|²·t)` in place.
    pub fn heat_multiplier_spec(&self, spec: &mut [Complex64], eps_t: f64) {
        assert!(eps_t >= 0.0);
        for (idx, c) in spec.iter_mut().enumerate() {
            *c *= (-eps_t * self.k_sq(idx)).exp();
        }
    }

    /// Applies `(I + alpha·Δ)` in place (the explicit half of a trapezoid step).
    pub fn helmholtz_apply_spec(&self, spec: &mut [Complex64], alpha: f64) {
        for (idx, c) in spec.iter_mut().enumerate() {
            *c *= 1.0 - alpha * self.k_sq(idx);
        }
    }

    /// Frequency-domain energy `Σ |c_k|²` (equals `‖f‖₂²` by Parseval).
    pub fn energy(&self, spec: &[Complex64]) -> f64 {
        spec.iter().map(|c| c.norm_sqr()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_1d() {
        let sp = Spectral::new(1, 32);
        let vals: Vec<f64> = (0..32)
            .map(|i| (2.0 * PI * i as f64 / 32.0).sin() + 0.25)
            .collect();
        let spec = sp.forward(&vals);
        let back = sp.inverse(&spec);
        for (a, b) in vals.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn round_trip_2d() {
        let sp = Spectral::new(2, 16);
        let n = 16usize;
        let vals: Vec<f64> = (0..n * n)
            .map(|idx| {
                let (ix, iy) = (idx / n, idx % n);
                (2.0 * PI * ix as f64 / n as f64).cos() * (2.0 * PI * iy as f64 / n as f64).sin()
            })
            .collect();
        let spec = sp.forward(&vals);
        let back = sp.inverse(&spec);
        for (a, b) in vals.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn forward_of_single_mode_hits_one_coefficient() {
        let sp = Spectral::new(1, 64);
        let vals: Vec<f64> = (0..64).map(|i| (2.0 * PI * 3.0 * i as f64 / 64.0).cos()).collect();
        let spec = sp.forward(&vals);
        // cos(2π·3x) = (e^{i2π3x} + e^{-i2π3x})/2 → coefficients 1/2 at k=±3.
        assert!((spec[3].re - 0.5).abs() < 1e-13);
        assert!((spec[61].re - 0.5).abs() < 1e-13);
        let other: f64 = spec
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != 3 && *j != 61)
            .map(|(_, c)| c.norm())
            .sum();
        assert!(other < 1e-12);
    }
}
