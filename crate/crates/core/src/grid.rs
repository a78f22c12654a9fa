//! Periodic spectral discretization of the unit torus in one and two
//! dimensions: grids, scalar fields, trajectories, and every norm the
//! estimate checks consume.
//!
//! The torus has unit side and unit volume; quadrature is the uniform
//! rectangle rule with weight `h^dim`, which is exact for band-limited
//! integrands below the grid bandwidth.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use num_traits::ToPrimitive;
use thiserror::Error;

use crate::exponents::Exponent;
use crate::spectral::Spectral;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("norm exponent must satisfy p >= 1, got {0}")]
    NormExponentBelowOne(String),
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("trajectory times must be strictly increasing (t[{index}] = {t} after {prev})")]
    NonMonotoneTimes { index: usize, t: f64, prev: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),
}

/// Uniform periodic grid on the unit torus. Immutable after construction;
/// share it through the [`GridRef`] alias.
pub struct Grid {
    dim: usize,
    n: usize,
    h: f64,
    spectral: Spectral,
}

pub type GridRef = Arc<Grid>;

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .finish()
    }
}

impl Grid {
    /// New grid with `n` points per axis (power of two) in `dim` ∈ {1, 2}.
    pub fn new(dim: usize, n: usize) -> GridRef {
        Arc::new(Grid {
            dim,
            n,
            h: 1.0 / n as f64,
            spectral: Spectral::new(dim, n),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Total number of grid nodes, `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `h^dim` of the uniform rule.
    pub fn quadrature_weight(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Coordinates of the node at flat index `idx`.
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        match self.dim {
            1 => [idx as f64 * self.h, 0.0],
            2 => [(idx / self.n) as f64 * self.h, (idx % self.n) as f64 * self.h],
            _ => unreachable!(),
        }
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    fn same_as(&self, other: &Grid) -> bool {
        self.dim == other.dim && self.n == other.n
    }
}

/// A real scalar field sampled on a [`Grid`].
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: GridRef,
    values: Vec<f64>,
}

/// A vector field is one scalar component per spatial axis.
pub type VectorField = Vec<ScalarField>;

impl ScalarField {
    pub fn zeros(grid: &GridRef) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &GridRef, c: f64) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f(x)` (dim 1) or `f(x, y)` (dim 2) at the grid nodes.
    pub fn from_fn(grid: &GridRef, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|idx| {
                let c = grid.coords(idx);
                f(c[0], c[1])
            })
            .collect();
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_values(grid: &GridRef, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len());
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &GridRef {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Errors at the first non-finite entry.
    pub fn check_finite(&self) -> Result<(), GridError> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(idx) => Err(GridError::NonFinite(idx)),
            None => Ok(()),
        }
    }

    /// `∫ f dx` by the uniform quadrature rule.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.quadrature_weight()
    }

    /// `∫ f g dx`.
    pub fn inner(&self, other: &ScalarField) -> f64 {
        assert!(self.grid.same_as(&other.grid));
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.quadrature_weight()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Pointwise map into a new field.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &ScalarField) {
        assert!(self.grid.same_as(&other.grid));
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        assert!(self.grid.same_as(&other.grid));
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        ScalarField {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Spectral coefficients of the field.
    pub fn to_spectrum(&self) -> Vec<Complex64> {
        self.grid.spectral().forward(&self.values)
    }

    pub fn from_spectrum(grid: &GridRef, spec: &[Complex64]) -> ScalarField {
        ScalarField {
            grid: grid.clone(),
            values: grid.spectral().inverse(spec),
        }
    }

    /// Exact spectral gradient; one component per axis.
    pub fn gradient(&self) -> VectorField {
        let spec = self.to_spectrum();
        (0..self.grid.dim())
            .map(|axis| {
                let mut s = spec.clone();
                self.grid.spectral().derivative_spec(&mut s, axis);
                ScalarField::from_spectrum(&self.grid, &s)
            })
            .collect()
    }

    /// Spectral derivative along one axis.
    pub fn derivative(&self, axis: usize) -> ScalarField {
        let mut spec = self.to_spectrum();
        self.grid.spectral().derivative_spec(&mut spec, axis);
        ScalarField::from_spectrum(&self.grid, &spec)
    }

    /// Spectral Laplacian (full `|k|²` symbol).
    pub fn laplacian(&self) -> ScalarField {
        let mut spec = self.to_spectrum();
        self.grid.spectral().laplacian_spec(&mut spec);
        ScalarField::from_spectrum(&self.grid, &spec)
    }

    /// Removes every mode outside the 2/3 keep set.
    pub fn dealias(&self) -> ScalarField {
        let mut spec = self.to_spectrum();
        self.grid.spectral().project_spec(&mut spec);
        ScalarField::from_spectrum(&self.grid, &spec)
    }

    /// `L^p` norm for `p ∈ [1, ∞]` against the uniform quadrature rule.
    pub fn lp_norm(&self, p: Exponent) -> Result<f64, GridError> {
        lp_of_slice(&self.values, self.grid.quadrature_weight(), p)
    }

    /// Exact trigonometric interpolation onto a finer grid by spectral
    /// zero-padding. `n_fine` must be a power of two at least the current
    /// resolution; Nyquist content must be absent (dealiased fields qualify).
    pub fn refine(&self, n_fine: usize) -> ScalarField {
        let n = self.grid.points_per_axis();
        assert!(n_fine >= n && n_fine.is_power_of_two());
        if n_fine == n {
            return self.clone();
        }
        let fine = Grid::new(self.grid.dim(), n_fine);
        let spec = self.to_spectrum();
        let mut out = vec![Complex64::default(); fine.len()];
        let wave = |j: usize, m: usize| {
            let j = j as i64;
            let m = m as i64;
            if j <= m / 2 {
                j
            } else {
                j - m
            }
        };
        let place = |k: i64, m: usize| -> usize {
            if k >= 0 {
                k as usize
            } else {
                (m as i64 + k) as usize
            }
        };
        // The coarse Nyquist row (|k| = n/2) is unpaired; drop it. Dealiased
        // fields carry nothing there anyway.
        let keep = |k: i64| (k.unsigned_abs() as usize) < n / 2;
        match self.grid.dim() {
            1 => {
                for (j, c) in spec.iter().enumerate() {
                    let k = wave(j, n);
                    if keep(k) {
                        out[place(k, n_fine)] = *c;
                    }
                }
            }
            _ => {
                for (idx, c) in spec.iter().enumerate() {
                    let (jx, jy) = (idx / n, idx % n);
                    let (kx, ky) = (wave(jx, n), wave(jy, n));
                    if keep(kx) && keep(ky) {
                        out[place(kx, n_fine) * n_fine + place(ky, n_fine)] = *c;
                    }
                }
            }
        }
        ScalarField::from_spectrum(&fine, &out)
    }
}

fn lp_of_slice(values: &[f64], weight: f64, p: Exponent) -> Result<f64, GridError> {
    if p < Exponent::int(1) {
        return Err(GridError::NormExponentBelowOne(p.to_string()));
    }
    match p {
        Exponent::Infinity => Ok(values.iter().fold(0.0f64, |m, v| m.max(v.abs()))),
        Exponent::Finite(r) => {
            let pf = r.to_f64();
            let pf = pf.expect("finite exponent");
            if pf == 1.0 {
                Ok(values.iter().map(|v| v.abs()).sum::<f64>() * weight)
            } else if pf == 2.0 {
                Ok((values.iter().map(|v| v * v).sum::<f64>() * weight).sqrt())
            } else {
                let s: f64 = values.iter().map(|v| v.abs().powf(pf)).sum();
                Ok((s * weight).powf(1.0 / pf))
            }
        }
    }
}

/// Random real field with spectrum supported on `|k|_∞ <= kmax`, built by
/// drawing Hermitian-symmetric coefficients. Deterministic given the rng.
pub fn random_band_limited(
    grid: &GridRef,
    kmax: i64,
    rng: &mut impl rand::Rng,
) -> ScalarField {
    let n = grid.points_per_axis() as i64;
    assert!(kmax >= 1 && kmax < n / 2);
    let len = grid.len();
    let mut spec = vec![Complex64::default(); len];
    let wave = |j: i64| if j <= n / 2 { j } else { j - n };
    for (idx, c) in spec.iter_mut().enumerate() {
        let within = match grid.dim() {
            1 => wave(idx as i64).abs() <= kmax,
            _ => {
                let (ix, iy) = ((idx / n as usize) as i64, (idx % n as usize) as i64);
                wave(ix).abs() <= kmax && wave(iy).abs() <= kmax
            }
        };
        if within {
            *c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
    }
    // Symmetrize: c_{-k} = conj(c_k) makes the field real.
    let flip2 = |idx: usize| {
        let n = n as usize;
        match grid.dim() {
            1 => (n - idx) % n,
            _ => {
                let (ix, iy) = (idx / n, idx % n);
                ((n - ix) % n) * n + (n - iy) % n
            }
        }
    };
    let orig = spec.clone();
    for idx in 0..len {
        let j = flip2(idx);
        spec[idx] = 0.5 * (orig[idx] + orig[j].conj());
    }
    ScalarField::from_spectrum(grid, &spec)
}

/// Spectral divergence of a vector field.
pub fn divergence(v: &[ScalarField]) -> ScalarField {
    let grid = v[0].grid().clone();
    assert_eq!(v.len(), grid.dim());
    let mut acc = vec![Complex64::default(); grid.len()];
    for (axis, comp) in v.iter().enumerate() {
        let mut spec = comp.to_spectrum();
        grid.spectral().derivative_spec(&mut spec, axis);
        for (a, b) in acc.iter_mut().zip(&spec) {
            *a += b;
        }
    }
    ScalarField::from_spectrum(&grid, &acc)
}

/// Dealiased pointwise product `P(f·g)`.
///
/// Callers must hand in fields that are already band-limited to the 2/3 keep
/// set (solver states and sampled drifts are); then the result is free of
/// aliasing and discrete product/integration identities hold to round-off.
pub fn dealiased_product(f: &ScalarField, g: &ScalarField) -> ScalarField {
    assert!(f.grid().same_as(g.grid()));
    let grid = f.grid().clone();
    let values: Vec<f64> = f
        .values()
        .iter()
        .zip(g.values())
        .map(|(a, b)| a * b)
        .collect();
    let mut spec = grid.spectral().forward(&values);
    grid.spectral().project_spec(&mut spec);
    ScalarField::from_spectrum(&grid, &spec)
}

/// A time-indexed sequence of snapshots sharing one grid.
#[derive(Clone, Debug)]
pub struct Trajectory {
    times: Vec<f64>,
    fields: Vec<ScalarField>,
}

impl Trajectory {
    pub fn new() -> Self {
        Trajectory {
            times: Vec::new(),
            fields: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, field: ScalarField) -> Result<(), GridError> {
        if let Some(&prev) = self.times.last() {
            if t <= prev {
                return Err(GridError::NonMonotoneTimes {
                    index: self.times.len(),
                    t,
                    prev,
                });
            }
            if !self.fields[0].grid().same_as(field.grid()) {
                return Err(GridError::GridMismatch);
            }
        }
        self.times.push(t);
        self.fields.push(field);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn field(&self, i: usize) -> &ScalarField {
        &self.fields[i]
    }

    pub fn fields(&self) -> &[ScalarField] {
        &self.fields
    }

    pub fn first(&self) -> &ScalarField {
        &self.fields[0]
    }

    pub fn last(&self) -> &ScalarField {
        self.fields.last().expect("nonempty trajectory")
    }

    pub fn grid(&self) -> &GridRef {
        self.fields[0].grid()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &ScalarField)> {
        self.times.iter().cloned().zip(self.fields.iter())
    }

    /// Index of the snapshot whose time matches `t` within `tol`.
    pub fn index_at(&self, t: f64, tol: f64) -> Option<usize> {
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }

    /// Reverses the time axis about `[0, horizon]`: sample at `t` becomes a
    /// sample at `horizon - t`. Pure bookkeeping.
    pub fn reversed(&self, horizon: f64) -> Trajectory {
        let mut times: Vec<f64> = self.times.iter().map(|t| horizon - t).collect();
        times.reverse();
        let mut fields = self.fields.clone();
        fields.reverse();
        Trajectory { times, fields }
    }

    /// Trapezoid quadrature in time of a per-snapshot scalar.
    pub fn time_integral(&self, series: &[f64]) -> f64 {
        assert_eq!(series.len(), self.times.len());
        trapezoid(&self.times, series)
    }
}

impl Default for Trajectory {
    fn default() -> Self {
        Self::new()
    }
}

/// Trapezoid rule on a possibly nonuniform time mesh.
pub fn trapezoid(times: &[f64], series: &[f64]) -> f64 {
    assert_eq!(times.len(), series.len());
    let mut acc = 0.0;
    for i in 1..times.len() {
        acc += 0.5 * (series[i] + series[i - 1]) * (times[i] - times[i - 1]);
    }
    acc
}

/// Mixed space-time Lebesgue norm `‖f‖_{L^r_t(L^q_x)}`: temporal `L^r`
/// quadrature (trapezoid on the sample instants) of the spatial `L^q` norm,
/// supremum over samples for `r = ∞`.
pub fn mixed_norm(traj: &Trajectory, q: Exponent, r: Exponent) -> Result<f64, GridError> {
    if traj.is_empty() {
        return Err(GridError::EmptyTrajectory);
    }
    if r < Exponent::int(1) {
        return Err(GridError::NormExponentBelowOne(r.to_string()));
    }
    let spatial: Result<Vec<f64>, GridError> =
        traj.fields().iter().map(|f| f.lp_norm(q)).collect();
    let spatial = spatial?;
    match r {
        Exponent::Infinity => Ok(spatial.into_iter().fold(0.0f64, f64::max)),
        Exponent::Finite(rr) => {
            let rf = rr.to_f64().expect("finite exponent");
            let powed: Vec<f64> = spatial.iter().map(|s| s.powf(rf)).collect();
            Ok(trapezoid(traj.times(), &powed).powf(1.0 / rf))
        }
    }
}
