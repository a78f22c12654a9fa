//! Analytic drift fields, Hamiltonians, and the linearized drift between two
//! solutions.
//!
//! Drifts are specifications, not sampled arrays: each one is a sum of
//! band-limited trigonometric polynomials multiplied by simple scalar time
//! laws, with the divergence carried in closed form. That keeps mixed norms
//! and one-sided bounds evaluable without discretization error near singular
//! times, and makes construction bit-reproducible from a seed.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponents::{check_divb_admissible, DivbVerdict, Exponent, ExponentPair};
use crate::grid::{divergence, GridRef, ScalarField, Trajectory, VectorField};

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("exponents (n={n}, q={q}, r={r}) are not admissible: {verdict}")]
    InadmissibleExponents {
        n: u32,
        q: Exponent,
        r: Exponent,
        verdict: DivbVerdict,
    },
    #[error("margin must lie in (0, 1], got {0}")]
    MarginOutOfRange(f64),
    #[error("time {t} outside the common trajectory range")]
    TimeOutOfRange { t: f64 },
    #[error("hamiltonian has no hessian")]
    MissingHessian,
    #[error("one-sided coefficient c1 must be nonnegative, got {0}")]
    NegativeC1(f64),
}

/// Scalar time law multiplying a spatial profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TimeLaw {
    Constant(f64),
    /// `a(t) = scale * t^exponent`.
    Power { scale: f64, exponent: f64 },
}

impl TimeLaw {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeLaw::Constant(c) => c,
            TimeLaw::Power { scale, exponent } => scale * t.powf(exponent),
        }
    }

    /// True when the law blows up as `t -> 0`.
    pub fn singular_at_zero(&self) -> bool {
        matches!(*self, TimeLaw::Power { exponent, scale } if exponent < 0.0 && scale != 0.0)
    }

    /// `∫_a^b |law(t)|^p dt` in closed form.
    pub fn abs_power_integral(&self, p: f64, a: f64, b: f64) -> f64 {
        match *self {
            TimeLaw::Constant(c) => c.abs().powf(p) * (b - a),
            TimeLaw::Power { scale, exponent } => {
                let e = exponent * p;
                let s = scale.abs().powf(p);
                if (e + 1.0).abs() < 1e-14 {
                    s * (b / a).ln()
                } else {
                    s * (b.powf(e + 1.0) - a.powf(e + 1.0)) / (e + 1.0)
                }
            }
        }
    }
}

/// One cosine/sine mode of a real trigonometric polynomial.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub k: [i64; 2],
    pub cos_amp: f64,
    pub sin_amp: f64,
}

/// Real band-limited trigonometric polynomial on the torus.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrigPoly {
    pub terms: Vec<TrigTerm>,
}

impl TrigPoly {
    pub fn zero() -> Self {
        TrigPoly { terms: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        TrigPoly {
            terms: vec![TrigTerm {
                k: [0, 0],
                cos_amp: c,
                sin_amp: 0.0,
            }],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.cos_amp == 0.0 && t.sin_amp == 0.0)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let phase = 2.0 * PI * (t.k[0] as f64 * x + t.k[1] as f64 * y);
                t.cos_amp * phase.cos() + t.sin_amp * phase.sin()
            })
            .sum()
    }

    pub fn sample(&self, grid: &GridRef) -> ScalarField {
        ScalarField::from_fn(grid, |x, y| self.eval(x, y))
    }

    /// Closed-form partial derivative along `axis`.
    pub fn derivative(&self, axis: usize) -> TrigPoly {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let f = 2.0 * PI * t.k[axis] as f64;
                TrigTerm {
                    k: t.k,
                    cos_amp: f * t.sin_amp,
                    sin_amp: -f * t.cos_amp,
                }
            })
            .collect();
        TrigPoly { terms }
    }

    /// Closed-form Laplacian.
    pub fn laplacian(&self) -> TrigPoly {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let ksq = (t.k[0] * t.k[0] + t.k[1] * t.k[1]) as f64;
                let f = -4.0 * PI * PI * ksq;
                TrigTerm {
                    k: t.k,
                    cos_amp: f * t.cos_amp,
                    sin_amp: f * t.sin_amp,
                }
            })
            .collect();
        TrigPoly { terms }
    }

    /// Solves `Δφ = self` termwise; the mean mode must be absent.
    pub fn inverse_laplacian(&self) -> TrigPoly {
        let terms = self
            .terms
            .iter()
            .filter(|t| t.k != [0, 0])
            .map(|t| {
                let ksq = (t.k[0] * t.k[0] + t.k[1] * t.k[1]) as f64;
                let f = -1.0 / (4.0 * PI * PI * ksq);
                TrigTerm {
                    k: t.k,
                    cos_amp: f * t.cos_amp,
                    sin_amp: f * t.sin_amp,
                }
            })
            .collect();
        TrigPoly { terms }
    }

    pub fn scaled(&self, c: f64) -> TrigPoly {
        let terms = self
            .terms
            .iter()
            .map(|t| TrigTerm {
                k: t.k,
                cos_amp: c * t.cos_amp,
                sin_amp: c * t.sin_amp,
            })
            .collect();
        TrigPoly { terms }
    }

    pub fn max_wavenumber(&self) -> i64 {
        self.terms
            .iter()
            .map(|t| t.k[0].abs().max(t.k[1].abs()))
            .max()
            .unwrap_or(0)
    }

    /// Extracts the polynomial from a sampled field's spectrum. Exact when
    /// the field is band-limited below the grid Nyquist mode.
    pub fn from_field(field: &ScalarField) -> TrigPoly {
        let grid = field.grid();
        let n = grid.points_per_axis() as i64;
        let spec = field.to_spectrum();
        let wave = |j: i64| if j <= n / 2 { j } else { j - n };
        let mut terms = Vec::new();
        for (idx, c) in spec.iter().enumerate() {
            if c.norm() < 1e-13 {
                continue;
            }
            let (kx, ky) = match grid.dim() {
                1 => (wave(idx as i64), 0),
                _ => (
                    wave((idx / n as usize) as i64),
                    wave((idx % n as usize) as i64),
                ),
            };
            // Keep one representative of each conjugate pair.
            if kx < 0 || (kx == 0 && ky < 0) {
                continue;
            }
            if kx == 0 && ky == 0 {
                terms.push(TrigTerm {
                    k: [0, 0],
                    cos_amp: c.re,
                    sin_amp: 0.0,
                });
            } else {
                terms.push(TrigTerm {
                    k: [kx, ky],
                    cos_amp: 2.0 * c.re,
                    sin_amp: -2.0 * c.im,
                });
            }
        }
        terms.sort_by_key(|t| (t.k[0], t.k[1]));
        TrigPoly { terms }
    }
}

/// Divergence-class membership recorded on a drift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ClassTag {
    DivergenceFree,
    DivbLrLq { q: Exponent, r: Exponent, margin: f64 },
    OneSidedOneOverT { c1: f64, c2: f64 },
    Bounded,
}

/// One group of vector components sharing a time law, with its divergence in
/// closed form.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DriftGroup {
    pub time_law: TimeLaw,
    pub components: Vec<TrigPoly>,
    pub div: TrigPoly,
}

/// Analytically specified time-dependent vector field on the torus.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DriftSpec {
    pub dim: usize,
    pub label: String,
    pub seed: u64,
    pub groups: Vec<DriftGroup>,
    pub tags: Vec<ClassTag>,
}

impl DriftSpec {
    pub fn zero(dim: usize) -> Self {
        DriftSpec {
            dim,
            label: "zero".into(),
            seed: 0,
            groups: Vec::new(),
            tags: vec![ClassTag::DivergenceFree, ClassTag::Bounded],
        }
    }

    pub fn has_tag(&self, f: impl Fn(&ClassTag) -> bool) -> bool {
        self.tags.iter().any(f)
    }

    /// True when some group's time law blows up at `t = 0`.
    pub fn singular_at_zero(&self) -> bool {
        self.groups.iter().any(|g| g.time_law.singular_at_zero())
    }

    pub fn component_at(&self, axis: usize, x: f64, y: f64, t: f64) -> f64 {
        self.groups
            .iter()
            .map(|g| g.time_law.eval(t) * g.components[axis].eval(x, y))
            .sum()
    }

    pub fn div_at(&self, x: f64, y: f64, t: f64) -> f64 {
        self.groups
            .iter()
            .map(|g| g.time_law.eval(t) * g.div.eval(x, y))
            .sum()
    }

    /// Pre-samples the spatial parts on a grid; per-time evaluation is then a
    /// scalar multiply-accumulate.
    pub fn sampled(&self, grid: &GridRef) -> SampledDrift {
        let groups = self
            .groups
            .iter()
            .map(|g| SampledGroup {
                time_law: g.time_law,
                components: g.components.iter().map(|p| p.sample(grid)).collect(),
                div: g.div.sample(grid),
            })
            .collect();
        SampledDrift {
            dim: self.dim,
            grid: grid.clone(),
            groups,
        }
    }

    /// Validates the recorded class tags by sampling, returning a record for
    /// the run manifest. The protocol samples on a fine grid (N = 128) with
    /// 64 time samples over `[t0, t1]`, log-spaced when the drift is singular
    /// at zero.
    pub fn validate(&self, grid: &GridRef, t0: f64, t1: f64) -> DriftValidation {
        let samples = 64usize;
        let times: Vec<f64> = if self.singular_at_zero() {
            let a = t0.max(1e-8);
            (0..samples)
                .map(|i| a * (t1 / a).powf(i as f64 / (samples - 1) as f64))
                .collect()
        } else {
            (0..samples)
                .map(|i| t0 + (t1 - t0) * i as f64 / (samples - 1) as f64)
                .collect()
        };

        // Spectral divergence of the sampled components vs the closed form.
        let mut div_mismatch = 0.0f64;
        let sampled = self.sampled(grid);
        if !self.groups.is_empty() {
            for &t in times.iter().step_by(16) {
                let v = sampled.velocity(t);
                let spectral_div = divergence(&v);
                let closed = sampled.div(t);
                div_mismatch = div_mismatch.max(spectral_div.sub(&closed).max_abs());
            }
        }

        // One-sided bound [div b]^- <= c1/t + c2 wherever tagged.
        let mut one_sided_slack: Option<f64> = None;
        for tag in &self.tags {
            if let ClassTag::OneSidedOneOverT { c1, c2 } = *tag {
                let mut worst = f64::INFINITY;
                for &t in &times {
                    let d = sampled.div(t);
                    let neg_part_max = d.values().iter().fold(0.0f64, |m, &v| m.max(-v));
                    worst = worst.min(c1 / t + c2 - neg_part_max);
                }
                one_sided_slack = Some(worst);
            }
        }

        // Measured mixed (q,r) norm of the divergence against the closed
        // form on the validation window, for tagged gradient drifts.
        let mut mixed_norm_measured: Option<f64> = None;
        let mut mixed_norm_closed_form: Option<f64> = None;
        for tag in &self.tags {
            if let ClassTag::DivbLrLq { q, r, .. } = *tag {
                let mut traj = Trajectory::new();
                for &t in &times {
                    let _ = traj.push(t, sampled.div(t));
                }
                mixed_norm_measured = crate::grid::mixed_norm(&traj, q, r).ok();
                mixed_norm_closed_form =
                    Some(lrlq_closed_form_mixed_norm(self, grid, q, r, times[0], t1));
            }
        }

        // Divergence-free drifts must have sampled divergence at round-off.
        let mut divfree_max: Option<f64> = None;
        if self.has_tag(|t| matches!(t, ClassTag::DivergenceFree)) {
            let mut m = 0.0f64;
            for &t in times.iter().step_by(16) {
                m = m.max(sampled.div(t).max_abs());
            }
            divfree_max = Some(m);
        }

        DriftValidation {
            label: self.label.clone(),
            seed: self.seed,
            tags: self.tags.clone(),
            div_mismatch,
            one_sided_slack,
            divfree_max_div: divfree_max,
            mixed_norm_measured,
            mixed_norm_closed_form,
        }
    }
}

/// Validation record stored in run manifests.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DriftValidation {
    pub label: String,
    pub seed: u64,
    pub tags: Vec<ClassTag>,
    /// Max |spectral div of sampled components - closed-form div|.
    pub div_mismatch: f64,
    /// min over sampled t of (c1/t + c2 - max_x [div b]^-); nonnegative when
    /// the one-sided bound holds.
    pub one_sided_slack: Option<f64>,
    pub divfree_max_div: Option<f64>,
    /// Mixed (q,r) norm of div b over the validation window, measured by
    /// quadrature and in closed form, for tagged gradient drifts.
    pub mixed_norm_measured: Option<f64>,
    pub mixed_norm_closed_form: Option<f64>,
}

impl DriftValidation {
    pub fn passes(&self) -> bool {
        let mixed_ok = match (self.mixed_norm_measured, self.mixed_norm_closed_form) {
            (Some(m), Some(c)) => (m - c).abs() <= 0.02 * c,
            _ => true,
        };
        self.div_mismatch <= 1e-8
            && self.one_sided_slack.is_none_or(|s| s >= -1e-8)
            && self.divfree_max_div.is_none_or(|d| d <= 1e-10)
            && mixed_ok
    }
}

/// Drift with spatial parts pre-sampled on one grid.
pub struct SampledDrift {
    pub dim: usize,
    pub grid: GridRef,
    groups: Vec<SampledGroup>,
}

struct SampledGroup {
    time_law: TimeLaw,
    components: Vec<ScalarField>,
    div: ScalarField,
}

impl SampledDrift {
    pub fn velocity(&self, t: f64) -> VectorField {
        let mut out: VectorField = (0..self.dim)
            .map(|_| ScalarField::zeros(&self.grid))
            .collect();
        for g in &self.groups {
            let a = g.time_law.eval(t);
            for (o, c) in out.iter_mut().zip(&g.components) {
                o.axpy(a, c);
            }
        }
        out
    }

    pub fn div(&self, t: f64) -> ScalarField {
        let mut out = ScalarField::zeros(&self.grid);
        for g in &self.groups {
            out.axpy(g.time_law.eval(t), &g.div);
        }
        out
    }

    /// `max_x |b(x,t)|` (Euclidean magnitude), for CFL checks.
    pub fn max_speed(&self, t: f64) -> f64 {
        let v = self.velocity(t);
        let mut m = 0.0f64;
        for idx in 0..self.grid.len() {
            let s: f64 = v.iter().map(|c| c.values()[idx] * c.values()[idx]).sum();
            m = m.max(s);
        }
        m.sqrt()
    }

    /// `‖div b(t)‖_q` along arbitrary times.
    pub fn div_norm_series(&self, times: &[f64], q: Exponent) -> Vec<f64> {
        times
            .iter()
            .map(|&t| self.div(t).lp_norm(q).expect("valid q"))
            .collect()
    }
}

fn gaussian_damped_poly(
    dim: usize,
    kmax: i64,
    mollify_scale: f64,
    rng: &mut ChaCha8Rng,
) -> TrigPoly {
    let mut terms = Vec::new();
    for kx in 0..=kmax {
        let ky_range: Vec<i64> = if dim == 2 {
            (-kmax..=kmax).collect()
        } else {
            vec![0]
        };
        for ky in ky_range {
            if kx == 0 && ky <= 0 {
                continue; // zero mean, one representative per conjugate pair
            }
            let ksq = (kx * kx + ky * ky) as f64;
            let damp = (-0.5 * (2.0 * PI * mollify_scale).powi(2) * ksq).exp();
            terms.push(TrigTerm {
                k: [kx, ky],
                cos_amp: damp * rng.random_range(-1.0..1.0),
                sin_amp: damp * rng.random_range(-1.0..1.0),
            });
        }
    }
    TrigPoly { terms }
}

/// Divergence-free control drift: a band-limited stream function in 2D,
/// a constant translation in 1D. `amplitude` bounds `max |b|`.
pub fn make_divfree_drift(grid: &GridRef, seed: u64, amplitude: f64) -> DriftSpec {
    let dim = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if dim == 1 {
        let c = TrigPoly::constant(amplitude);
        return DriftSpec {
            dim,
            label: format!("divfree-1d-const[{seed}]"),
            seed,
            groups: vec![DriftGroup {
                time_law: TimeLaw::Constant(1.0),
                components: vec![c],
                div: TrigPoly::zero(),
            }],
            tags: vec![ClassTag::DivergenceFree, ClassTag::Bounded],
        };
    }
    // b = (∂_y ψ, -∂_x ψ) has identically zero divergence.
    let psi = gaussian_damped_poly(dim, 3, 4.0 / 128.0, &mut rng);
    let bx = psi.derivative(1);
    let by = psi.derivative(0).scaled(-1.0);
    let max_speed = {
        let sx = bx.sample(grid);
        let sy = by.sample(grid);
        (0..grid.len())
            .map(|i| (sx.values()[i].powi(2) + sy.values()[i].powi(2)).sqrt())
            .fold(0.0f64, f64::max)
    };
    let scale = if max_speed > 0.0 { amplitude / max_speed } else { 0.0 };
    DriftSpec {
        dim,
        label: format!("divfree-2d-stream[{seed}]"),
        seed,
        groups: vec![DriftGroup {
            time_law: TimeLaw::Constant(1.0),
            components: vec![bx.scaled(scale), by.scaled(scale)],
            div: TrigPoly::zero(),
        }],
        tags: vec![ClassTag::DivergenceFree, ClassTag::Bounded],
    }
}

/// Gradient drift `b = Dφ`, `φ(x,t) = a(t) ψ(x)` with `a(t) = t^{-(1-margin)/r}`
/// and a band-limited profile ψ normalized so `‖Δψ‖_q = 1`. The divergence
/// `a(t) Δψ` then has mixed norm `(∫ a^r)^{1/r}`, finite for `margin > 0` and
/// approaching the scaling-critical integrability as `margin -> 0`.
/// `margin = 1` degenerates to the autonomous drift `a ≡ 1`.
pub fn make_lrlq_drift(
    grid: &GridRef,
    q: Exponent,
    r: Exponent,
    margin: f64,
    seed: u64,
) -> Result<DriftSpec, FieldError> {
    let dim = grid.dim();
    let pair = ExponentPair::new(dim as u32, q, r);
    let verdict = check_divb_admissible(&pair);
    if !verdict.admissible {
        return Err(FieldError::InadmissibleExponents {
            n: dim as u32,
            q,
            r,
            verdict,
        });
    }
    if !(margin > 0.0 && margin <= 1.0) {
        return Err(FieldError::MarginOutOfRange(margin));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let psi = gaussian_damped_poly(dim, 3, 4.0 / 128.0, &mut rng);
    let lap_q = psi.laplacian().sample(grid).lp_norm(q).expect("valid q");
    let psi = psi.scaled(1.0 / lap_q);

    let exponent = match r {
        Exponent::Infinity => 0.0,
        Exponent::Finite(_) => -(1.0 - margin) / r.as_f64(),
    };
    let time_law = if exponent == 0.0 {
        TimeLaw::Constant(1.0)
    } else {
        TimeLaw::Power {
            scale: 1.0,
            exponent,
        }
    };
    let components: Vec<TrigPoly> = (0..dim).map(|axis| psi.derivative(axis)).collect();
    Ok(DriftSpec {
        dim,
        label: format!("lrlq[q={q},r={r},m={margin},{seed}]"),
        seed,
        groups: vec![DriftGroup {
            time_law,
            components,
            div: psi.laplacian(),
        }],
        tags: vec![ClassTag::DivbLrLq { q, r, margin }],
    })
}

/// Closed-form mixed `(q, r)` norm of the divergence of an `lrlq` drift over
/// `[t0, t1]`, for comparison against the measured value.
pub fn lrlq_closed_form_mixed_norm(
    spec: &DriftSpec,
    grid: &GridRef,
    q: Exponent,
    r: Exponent,
    t0: f64,
    t1: f64,
) -> f64 {
    let g = &spec.groups[0];
    let spatial = g.div.sample(grid).lp_norm(q).expect("valid q");
    match r {
        Exponent::Infinity => {
            let a_max = g.time_law.eval(t0).abs().max(g.time_law.eval(t1).abs());
            spatial * a_max
        }
        Exponent::Finite(_) => {
            let rf = r.as_f64();
            spatial * g.time_law.abs_power_integral(rf, t0, t1).powf(1.0 / rf)
        }
    }
}

/// Smooth periodic bump with max exactly 1 at the origin and a zero at the
/// antipode: `((1 + cos 2πx)/2)^m`, expanded as a degree-`m` polynomial.
fn bump_poly(grid: &GridRef, dim: usize, m: i32) -> TrigPoly {
    let f = ScalarField::from_fn(grid, |x, y| {
        let b = |s: f64| (0.5 * (1.0 + (2.0 * PI * s).cos())).powi(m);
        if dim == 1 {
            b(x)
        } else {
            b(x) * b(y)
        }
    });
    TrigPoly::from_field(&f)
}

fn shift_poly(p: &TrigPoly, dx: f64, dy: f64) -> TrigPoly {
    // cos(φ - s) and sin(φ - s) re-expanded in cos/sin of φ.
    let terms = p
        .terms
        .iter()
        .map(|t| {
            let s = 2.0 * PI * (t.k[0] as f64 * dx + t.k[1] as f64 * dy);
            TrigTerm {
                k: t.k,
                cos_amp: t.cos_amp * s.cos() + t.sin_amp * s.sin(),
                sin_amp: t.sin_amp * s.cos() - t.cos_amp * s.sin(),
            }
        })
        .collect();
    TrigPoly { terms }
}

fn add_polys(a: &TrigPoly, b: &TrigPoly) -> TrigPoly {
    let mut terms = a.terms.clone();
    for t in &b.terms {
        if let Some(existing) = terms.iter_mut().find(|e| e.k == t.k) {
            existing.cos_amp += t.cos_amp;
            existing.sin_amp += t.sin_amp;
        } else {
            terms.push(*t);
        }
    }
    terms.sort_by_key(|t| (t.k[0], t.k[1]));
    TrigPoly { terms }
}

/// Drift whose divergence satisfies the one-sided bound
/// `[div b]^- <= c1/t + c2` with zero slack at the bump maximum, while
/// `[div b]^-` is not integrable in time when `c1 > 0`.
///
/// Construction: a bump χ ∈ [0,1] minus its half-torus shift keeps the
/// divergence mean-free; `div b = -(c1/t + c2)(χ - χ_shift)` and `b` is the
/// gradient field realizing it. A small seeded divergence-free part is added
/// so the drift is not a pure gradient.
pub fn make_one_sided_singular_drift(
    grid: &GridRef,
    c1: f64,
    c2: f64,
    seed: u64,
) -> Result<DriftSpec, FieldError> {
    if c1 < 0.0 {
        return Err(FieldError::NegativeC1(c1));
    }
    let dim = grid.dim();
    if c1 == 0.0 && c2 == 0.0 {
        let mut z = DriftSpec::zero(dim);
        z.label = format!("one-sided-degenerate[{seed}]");
        z.seed = seed;
        return Ok(z);
    }
    let chi = bump_poly(grid, dim, 4);
    let half = if dim == 1 { (0.5, 0.0) } else { (0.5, 0.5) };
    let d = add_polys(&chi, &shift_poly(&chi, half.0, half.1).scaled(-1.0));
    // Δφ = -d, b = Dφ so that div b = -(time law)·d.
    let phi = d.scaled(-1.0).inverse_laplacian();
    let components: Vec<TrigPoly> = (0..dim).map(|axis| phi.derivative(axis)).collect();
    let div = d.scaled(-1.0);

    let mut groups = Vec::new();
    if c1 > 0.0 {
        groups.push(DriftGroup {
            time_law: TimeLaw::Power {
                scale: c1,
                exponent: -1.0,
            },
            components: components.clone(),
            div: div.clone(),
        });
    }
    if c2 != 0.0 {
        groups.push(DriftGroup {
            time_law: TimeLaw::Constant(c2),
            components: components.clone(),
            div: div.clone(),
        });
    }
    // Bounded divergence-free part keeps the drift generic.
    let bounded = make_divfree_drift(grid, seed.wrapping_add(0x9e37), 0.05);
    groups.extend(bounded.groups);

    Ok(DriftSpec {
        dim,
        label: format!("one-sided[c1={c1},c2={c2},{seed}]"),
        seed,
        groups,
        tags: vec![ClassTag::OneSidedOneOverT { c1, c2 }],
    })
}

/// Analytic scalar field of space and time: groups of trig polynomials with
/// scalar time laws. Used for sources and manufactured data.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ScalarSpec {
    pub groups: Vec<(TimeLaw, TrigPoly)>,
}

impl ScalarSpec {
    pub fn zero() -> Self {
        ScalarSpec { groups: Vec::new() }
    }

    pub fn steady(poly: TrigPoly) -> Self {
        ScalarSpec {
            groups: vec![(TimeLaw::Constant(1.0), poly)],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.groups
            .iter()
            .all(|(law, p)| p.is_zero() || matches!(law, TimeLaw::Constant(c) if *c == 0.0))
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        self.groups
            .iter()
            .map(|(law, p)| law.eval(t) * p.eval(x, y))
            .sum()
    }

    pub fn sample(&self, grid: &GridRef, t: f64) -> ScalarField {
        let mut out = ScalarField::zeros(grid);
        for (law, p) in &self.groups {
            out.axpy(law.eval(t), &p.sample(grid));
        }
        out
    }

    /// Pre-samples the spatial parts for cheap per-time evaluation.
    pub fn sampled(&self, grid: &GridRef) -> SampledScalar {
        SampledScalar {
            grid: grid.clone(),
            groups: self
                .groups
                .iter()
                .map(|(law, p)| (*law, p.sample(grid)))
                .collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> ScalarSpec {
        ScalarSpec {
            groups: self
                .groups
                .iter()
                .map(|(law, p)| (*law, p.scaled(c)))
                .collect(),
        }
    }
}

/// ScalarSpec with spatial parts pre-sampled on one grid.
pub struct SampledScalar {
    grid: GridRef,
    groups: Vec<(TimeLaw, ScalarField)>,
}

impl SampledScalar {
    pub fn at(&self, t: f64) -> ScalarField {
        let mut out = ScalarField::zeros(&self.grid);
        for (law, f) in &self.groups {
            out.axpy(law.eval(t), f);
        }
        out
    }
}

/// Hamiltonians with gradient and (optionally) Hessian in the momentum slot.
#[derive(Clone)]
pub enum Hamiltonian {
    /// `H(p) = |p|²/2`.
    Quadratic,
    /// `H(p) = (1 + |p|²)^{γ/2}`, γ > 1.
    PowerGamma { gamma: f64 },
    /// Caller-supplied smooth Hamiltonian.
    CustomSmooth {
        value: Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>,
        gradient: Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>,
        hessian: Option<Arc<dyn Fn([f64; 2]) -> [[f64; 2]; 2] + Send + Sync>>,
    },
}

impl std::fmt::Debug for Hamiltonian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Hamiltonian::Quadratic => write!(f, "Quadratic"),
            Hamiltonian::PowerGamma { gamma } => write!(f, "PowerGamma({gamma})"),
            Hamiltonian::CustomSmooth { .. } => write!(f, "CustomSmooth"),
        }
    }
}

impl Hamiltonian {
    pub fn power(gamma: f64) -> Self {
        assert!(gamma > 1.0, "power Hamiltonian needs gamma > 1");
        Hamiltonian::PowerGamma { gamma }
    }

    pub fn value(&self, p: [f64; 2]) -> f64 {
        let s = p[0] * p[0] + p[1] * p[1];
        match self {
            Hamiltonian::Quadratic => 0.5 * s,
            Hamiltonian::PowerGamma { gamma } => (1.0 + s).powf(gamma / 2.0),
            Hamiltonian::CustomSmooth { value, .. } => value(p),
        }
    }

    pub fn gradient(&self, p: [f64; 2]) -> [f64; 2] {
        let s = p[0] * p[0] + p[1] * p[1];
        match self {
            Hamiltonian::Quadratic => p,
            Hamiltonian::PowerGamma { gamma } => {
                let f = gamma * (1.0 + s).powf(gamma / 2.0 - 1.0);
                [f * p[0], f * p[1]]
            }
            Hamiltonian::CustomSmooth { gradient, .. } => gradient(p),
        }
    }

    pub fn hessian(&self, p: [f64; 2]) -> Result<[[f64; 2]; 2], FieldError> {
        let s = p[0] * p[0] + p[1] * p[1];
        match self {
            Hamiltonian::Quadratic => Ok([[1.0, 0.0], [0.0, 1.0]]),
            Hamiltonian::PowerGamma { gamma } => {
                let a = gamma * (1.0 + s).powf(gamma / 2.0 - 1.0);
                let b = gamma * (gamma - 2.0) * (1.0 + s).powf(gamma / 2.0 - 2.0);
                Ok([
                    [a + b * p[0] * p[0], b * p[0] * p[1]],
                    [b * p[1] * p[0], a + b * p[1] * p[1]],
                ])
            }
            Hamiltonian::CustomSmooth { hessian, .. } => match hessian {
                Some(h) => Ok(h(p)),
                None => Err(FieldError::MissingHessian),
            },
        }
    }

    /// Manifest tag.
    pub fn kind_label(&self) -> String {
        match self {
            Hamiltonian::Quadratic => "quadratic".into(),
            Hamiltonian::PowerGamma { gamma } => format!("power_gamma({gamma})"),
            Hamiltonian::CustomSmooth { .. } => "custom_smooth".into(),
        }
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(nodes: usize) -> Vec<(f64, f64)> {
    let (xs, ws): (&[f64], &[f64]) = match nodes {
        8 => (
            &[
                -0.9602898564975363,
                -0.7966664774136267,
                -0.5255324099163290,
                -0.1834346424956498,
                0.1834346424956498,
                0.5255324099163290,
                0.7966664774136267,
                0.9602898564975363,
            ],
            &[
                0.1012285362903763,
                0.2223810344533745,
                0.3137066458778873,
                0.3626837833783620,
                0.3626837833783620,
                0.3137066458778873,
                0.2223810344533745,
                0.1012285362903763,
            ],
        ),
        16 => (
            &[
                -0.9894009349916499,
                -0.9445750230732326,
                -0.8656312023878318,
                -0.7554044083550030,
                -0.6178762444026438,
                -0.4580167776572274,
                -0.2816035507792589,
                -0.0950125098376374,
                0.0950125098376374,
                0.2816035507792589,
                0.4580167776572274,
                0.6178762444026438,
                0.7554044083550030,
                0.8656312023878318,
                0.9445750230732326,
                0.9894009349916499,
            ],
            &[
                0.0271524594117541,
                0.0622535239386479,
                0.0951585116824928,
                0.1246289712555339,
                0.1495959888165767,
                0.1691565193950025,
                0.1826034150449236,
                0.1894506104550685,
                0.1894506104550685,
                0.1826034150449236,
                0.1691565193950025,
                0.1495959888165767,
                0.1246289712555339,
                0.0951585116824928,
                0.0622535239386479,
                0.0271524594117541,
            ],
        ),
        _ => panic!("gauss_legendre_unit supports 8 or 16 nodes, got {nodes}"),
    };
    xs.iter()
        .zip(ws)
        .map(|(&x, &w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect()
}

/// Drift obtained by linearizing a Hamiltonian between two solutions:
/// `b(x,t) = -∫₀¹ D_pH(θ Du₁ + (1-θ) Du₂) dθ`, evaluated by Gauss-Legendre
/// quadrature in θ (exact for quadratic H, where it collapses to
/// `-(Du₁ + Du₂)/2`).
pub struct LinearizedDrift<'a> {
    pub u1: &'a Trajectory,
    pub u2: &'a Trajectory,
    pub hamiltonian: Hamiltonian,
    pub theta_quadrature: Vec<(f64, f64)>,
}

impl<'a> LinearizedDrift<'a> {
    pub fn new(u1: &'a Trajectory, u2: &'a Trajectory, hamiltonian: Hamiltonian) -> Self {
        LinearizedDrift {
            u1,
            u2,
            hamiltonian,
            theta_quadrature: gauss_legendre_unit(8),
        }
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.theta_quadrature = gauss_legendre_unit(nodes);
        self
    }

    fn snapshots_at(&self, t: f64) -> Result<(usize, usize), FieldError> {
        let tol = 1e-9;
        let i1 = self
            .u1
            .index_at(t, tol)
            .ok_or(FieldError::TimeOutOfRange { t })?;
        let i2 = self
            .u2
            .index_at(t, tol)
            .ok_or(FieldError::TimeOutOfRange { t })?;
        Ok((i1, i2))
    }

    /// `b(·, t)` on the trajectories' grid.
    pub fn eval(&self, t: f64) -> Result<VectorField, FieldError> {
        let (i1, i2) = self.snapshots_at(t)?;
        let g1 = self.u1.field(i1).gradient();
        let g2 = self.u2.field(i2).gradient();
        Ok(linearized_from_gradients(
            &g1,
            &g2,
            &self.hamiltonian,
            &self.theta_quadrature,
        ))
    }

    /// `div b(·, t)` via the Hessian-trace expansion
    /// `-div b = ∫₀¹ Tr(D²_pH(Du_θ) · (θ D²u₁ + (1-θ) D²u₂)) dθ`
    /// (the x-derivative term vanishes for x-independent Hamiltonians).
    pub fn divergence(&self, t: f64) -> Result<ScalarField, FieldError> {
        let (i1, i2) = self.snapshots_at(t)?;
        let u1 = self.u1.field(i1);
        let u2 = self.u2.field(i2);
        let grid = u1.grid().clone();
        let dim = grid.dim();
        let g1 = u1.gradient();
        let g2 = u2.gradient();
        // Packed upper-triangle second derivatives: xx, (xy,) (yy).
        let hess = |u: &ScalarField| -> Vec<ScalarField> {
            let mut out = Vec::new();
            for a in 0..dim {
                for b in a..dim {
                    out.push(u.derivative(a).derivative(b));
                }
            }
            out
        };
        let h1 = hess(u1);
        let h2 = hess(u2);
        let entry = |a: usize, b: usize| -> usize {
            match (dim, a, b) {
                (1, 0, 0) => 0,
                (2, 0, 0) => 0,
                (2, 0, 1) | (2, 1, 0) => 1,
                (2, 1, 1) => 2,
                _ => unreachable!(),
            }
        };
        let len = grid.len();
        let mut vals = vec![0.0; len];
        for idx in 0..len {
            let mut acc = 0.0;
            for &(theta, w) in &self.theta_quadrature {
                let p = [
                    theta * g1[0].values()[idx] + (1.0 - theta) * g2[0].values()[idx],
                    if dim == 2 {
                        theta * g1[1].values()[idx] + (1.0 - theta) * g2[1].values()[idx]
                    } else {
                        0.0
                    },
                ];
                let hm = self.hamiltonian.hessian(p)?;
                let mut tr = 0.0;
                for a in 0..dim {
                    for b in 0..dim {
                        let mix = theta * h1[entry(a, b)].values()[idx]
                            + (1.0 - theta) * h2[entry(a, b)].values()[idx];
                        tr += hm[a][b] * mix;
                    }
                }
                acc += w * tr;
            }
            vals[idx] = -acc;
        }
        Ok(ScalarField::from_values(&grid, vals))
    }
}

/// θ-quadrature of `-D_pH(θ Du₁ + (1-θ) Du₂)` from precomputed gradients.
pub fn linearized_from_gradients(
    g1: &VectorField,
    g2: &VectorField,
    hamiltonian: &Hamiltonian,
    quadrature: &[(f64, f64)],
) -> VectorField {
    let grid = g1[0].grid().clone();
    let dim = grid.dim();
    let len = grid.len();
    let mut out = vec![vec![0.0; len]; dim];
    for idx in 0..len {
        let p1 = [
            g1[0].values()[idx],
            if dim == 2 { g1[1].values()[idx] } else { 0.0 },
        ];
        let p2 = [
            g2[0].values()[idx],
            if dim == 2 { g2[1].values()[idx] } else { 0.0 },
        ];
        let mut acc = [0.0f64; 2];
        for &(theta, w) in quadrature {
            let p = [
                theta * p1[0] + (1.0 - theta) * p2[0],
                theta * p1[1] + (1.0 - theta) * p2[1],
            ];
            let dh = hamiltonian.gradient(p);
            acc[0] += w * dh[0];
            acc[1] += w * dh[1];
        }
        for (a, comp) in out.iter_mut().enumerate() {
            comp[idx] = -acc[a];
        }
    }
    out.into_iter()
        .map(|vals| ScalarField::from_values(&grid, vals))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{mixed_norm, Grid};

    #[test]
    fn trig_poly_derivative_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = gaussian_damped_poly(2, 3, 4.0 / 128.0, &mut rng);
        let eps = 1e-6;
        for &(x, y) in &[(0.13, 0.77), (0.5, 0.25), (0.9, 0.01)] {
            let fd = (p.eval(x + eps, y) - p.eval(x - eps, y)) / (2.0 * eps);
            let an = p.derivative(0).eval(x, y);
            assert!((fd - an).abs() < 1e-5, "{fd} vs {an}");
        }
    }

    #[test]
    fn shift_poly_is_translation() {
        let g = Grid::new(1, 64);
        let chi = bump_poly(&g, 1, 4);
        let shifted = shift_poly(&chi, 0.5, 0.0);
        for &x in &[0.0, 0.1, 0.33, 0.8] {
            assert!((shifted.eval(x, 0.0) - chi.eval(x - 0.5, 0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn divfree_2d_stream_function_div_vanishes() {
        let g = Grid::new(2, 64);
        let d = make_divfree_drift(&g, 11, 1.0);
        let sampled = d.sampled(&g);
        let div = divergence(&sampled.velocity(0.3));
        assert!(div.max_abs() < 1e-10);
        let v = d.validate(&g, 0.0, 1.0);
        assert!(v.passes(), "{v:?}");
    }

    #[test]
    fn divfree_is_seed_reproducible() {
        let g = Grid::new(2, 32);
        let a = make_divfree_drift(&g, 42, 0.7);
        let b = make_divfree_drift(&g, 42, 0.7);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn divfree_1d_constant() {
        let g = Grid::new(1, 64);
        let d = make_divfree_drift(&g, 1, 0.3);
        assert_eq!(d.component_at(0, 0.2, 0.0, 0.5), 0.3);
        assert_eq!(d.div_at(0.4, 0.0, 0.1), 0.0);
    }

    #[test]
    fn lrlq_rejects_inadmissible_exponents() {
        let g = Grid::new(2, 32);
        let err = make_lrlq_drift(&g, Exponent::int(1), Exponent::int(2), 0.5, 3);
        assert!(err.is_err());
    }

    #[test]
    fn lrlq_autonomous_case_mixed_norm_is_separable() {
        // margin = 1 gives a(t) ≡ 1 and mixed norm T^{1/r}·‖Δψ‖_q.
        let g = Grid::new(1, 64);
        let q = Exponent::Infinity;
        let r = Exponent::int(2);
        let d = make_lrlq_drift(&g, q, r, 1.0, 9).unwrap();
        let t1 = 0.5;
        let closed = lrlq_closed_form_mixed_norm(&d, &g, q, r, 0.0, t1);
        let sampled = d.sampled(&g);
        let mut traj = Trajectory::new();
        for i in 0..=100 {
            let t = t1 * i as f64 / 100.0;
            traj.push(t, sampled.div(t)).unwrap();
        }
        let measured = mixed_norm(&traj, q, r).unwrap();
        assert!((measured - closed).abs() < 1e-10 * closed);
        // ‖Δψ‖_q is normalized to 1, so the norm is T^{1/2}.
        assert!((closed - t1.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn lrlq_measured_mixed_norm_matches_closed_form_within_2_percent() {
        // margin = 0.5, q = ∞, r = 2: mild time singularity; trapezoid on a
        // log mesh from σ captures the closed-form power-law integral.
        let g = Grid::new(1, 64);
        let q = Exponent::Infinity;
        let r = Exponent::int(2);
        let d = make_lrlq_drift(&g, q, r, 0.5, 21).unwrap();
        let sampled = d.sampled(&g);
        let (sigma, t1) = (1e-8f64, 0.5f64);
        let m = 4000usize;
        let mut traj = Trajectory::new();
        for i in 0..=m {
            let t = sigma * (t1 / sigma).powf(i as f64 / m as f64);
            traj.push(t, sampled.div(t)).unwrap();
        }
        let measured = mixed_norm(&traj, q, r).unwrap();
        let closed = lrlq_closed_form_mixed_norm(&d, &g, q, r, 0.0, t1);
        assert!(
            (measured - closed).abs() < 0.02 * closed,
            "measured {measured} closed {closed}"
        );
    }

    #[test]
    fn one_sided_bound_holds_with_zero_slack_at_bump_max() {
        let g = Grid::new(1, 128);
        let (c1, c2) = (1.0, 0.5);
        let d = make_one_sided_singular_drift(&g, c1, c2, 7).unwrap();
        let sampled = d.sampled(&g);
        for &t in &[1e-4, 1e-2, 0.3, 1.0] {
            let div = sampled.div(t);
            let neg_max = div.values().iter().fold(0.0f64, |m, &v| m.max(-v));
            let bound = c1 / t + c2;
            assert!(neg_max <= bound + 1e-8);
            // The bump maximum sits on the node x = 0, where slack vanishes.
            assert!(
                (neg_max - bound).abs() <= 1e-7 * bound,
                "t={t}: neg_max={neg_max} bound={bound}"
            );
        }
        let v = d.validate(&g, 1e-4, 1.0);
        assert!(v.passes(), "{v:?}");
    }

    #[test]
    fn one_sided_log_divergence_of_negative_part() {
        // ∫_σ^T max_x [div b]^- dt = c1·log(T/σ) + c2·(T-σ) for the bump
        // construction; the log term dominates as σ -> 0.
        let g = Grid::new(1, 128);
        let d = make_one_sided_singular_drift(&g, 1.0, 0.0, 3).unwrap();
        let sampled = d.sampled(&g);
        let t1 = 1.0;
        for sigma in [1e-2f64, 1e-3, 1e-4] {
            let m = 2000;
            let times: Vec<f64> = (0..=m)
                .map(|i| sigma * (t1 / sigma).powf(i as f64 / m as f64))
                .collect();
            let series: Vec<f64> = times
                .iter()
                .map(|&t| {
                    sampled
                        .div(t)
                        .values()
                        .iter()
                        .fold(0.0f64, |mx, &v| mx.max(-v))
                })
                .collect();
            let integral = crate::grid::trapezoid(&times, &series);
            let expected = (t1 / sigma).ln();
            assert!(
                integral >= 0.9 * expected,
                "sigma={sigma}: {integral} < 0.9·{expected}"
            );
        }
    }

    #[test]
    fn one_sided_degenerate_is_divergence_free() {
        let g = Grid::new(1, 64);
        let d = make_one_sided_singular_drift(&g, 0.0, 0.0, 5).unwrap();
        assert!(d.has_tag(|t| matches!(t, ClassTag::DivergenceFree)));
        assert!(d.groups.is_empty());
    }

    #[test]
    fn hamiltonian_gradient_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for ham in [
            Hamiltonian::Quadratic,
            Hamiltonian::power(1.5),
            Hamiltonian::power(3.0),
        ] {
            for _ in 0..20 {
                let p = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
                let e = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                let eps = 1e-6;
                let fd = (ham.value([p[0] + eps * e[0], p[1] + eps * e[1]])
                    - ham.value([p[0] - eps * e[0], p[1] - eps * e[1]]))
                    / (2.0 * eps);
                let g = ham.gradient(p);
                let dir = g[0] * e[0] + g[1] * e[1];
                assert!((fd - dir).abs() < 1e-6 * (1.0 + dir.abs()), "{ham:?}");
            }
        }
    }

    #[test]
    fn hamiltonian_hessian_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let ham = Hamiltonian::power(2.5);
        for _ in 0..10 {
            let p = [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
            let eps = 1e-5;
            let h = ham.hessian(p).unwrap();
            for a in 0..2 {
                let mut pp = p;
                pp[a] += eps;
                let mut pm = p;
                pm[a] -= eps;
                let fd = [
                    (ham.gradient(pp)[0] - ham.gradient(pm)[0]) / (2.0 * eps),
                    (ham.gradient(pp)[1] - ham.gradient(pm)[1]) / (2.0 * eps),
                ];
                for b in 0..2 {
                    assert!((fd[b] - h[b][a]).abs() < 1e-5 * (1.0 + h[b][a].abs()));
                }
            }
        }
    }

    fn smooth_trajectory(grid: &GridRef, seed: u64, times: &[f64], amp: f64) -> Trajectory {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = crate::grid::random_band_limited(grid, 4, &mut rng);
        let scale = amp / base.max_abs();
        let base = base.map(|v| v * scale);
        let mut traj = Trajectory::new();
        for &t in times {
            let f = base.map(|v| v * (1.0 + 0.3 * t));
            traj.push(t, f).unwrap();
        }
        traj
    }

    #[test]
    fn linearized_drift_quadratic_closed_forms() {
        let g = Grid::new(2, 32);
        let times = [0.0, 0.1, 0.2];
        let u1 = smooth_trajectory(&g, 31, &times, 0.1);
        let u2 = smooth_trajectory(&g, 32, &times, 0.1);

        // Degenerate average: u1 = u2 = u gives b = -Du.
        let ld_same = LinearizedDrift::new(&u1, &u1, Hamiltonian::Quadratic);
        let b = ld_same.eval(0.1).unwrap();
        let grad = u1.field(1).gradient();
        for a in 0..2 {
            assert!(b[a].sub(&grad[a].map(|v| -v)).max_abs() < 1e-12);
        }

        // Linear integrand: b = -(Du1 + Du2)/2 exactly.
        let ld = LinearizedDrift::new(&u1, &u2, Hamiltonian::Quadratic);
        let b = ld.eval(0.1).unwrap();
        let g1 = u1.field(1).gradient();
        let g2 = u2.field(1).gradient();
        for a in 0..2 {
            let expect = {
                let mut e = g1[a].clone();
                e.axpy(1.0, &g2[a]);
                e.map(|v| -0.5 * v)
            };
            assert!(b[a].sub(&expect).max_abs() < 1e-12);
        }

        // div b = -(Δu1 + Δu2)/2 for the identity Hessian.
        let div = ld.divergence(0.1).unwrap();
        let mut expect = u1.field(1).laplacian();
        expect.axpy(1.0, &u2.field(1).laplacian());
        let expect = expect.map(|v| -0.5 * v);
        assert!(div.sub(&expect).max_abs() < 1e-10);
    }

    #[test]
    fn linearized_drift_quadrature_refinement() {
        let g = Grid::new(1, 64);
        let times = [0.0, 0.1];
        let u1 = smooth_trajectory(&g, 41, &times, 0.02);
        let u2 = smooth_trajectory(&g, 42, &times, 0.02);
        let ham = Hamiltonian::power(3.0);
        let b8 = LinearizedDrift::new(&u1, &u2, ham.clone())
            .eval(0.1)
            .unwrap();
        let b16 = LinearizedDrift::new(&u1, &u2, ham)
            .with_nodes(16)
            .eval(0.1)
            .unwrap();
        assert!(b8[0].sub(&b16[0]).max_abs() < 1e-10);
    }

    #[test]
    fn linearized_divergence_cross_check_against_spectral() {
        let g = Grid::new(1, 64);
        let times = [0.0, 0.1];
        let u1 = smooth_trajectory(&g, 51, &times, 0.01);
        let u2 = smooth_trajectory(&g, 52, &times, 0.01);
        let ld = LinearizedDrift::new(&u1, &u2, Hamiltonian::power(1.5));
        let direct = ld.divergence(0.1).unwrap();
        let spectral = divergence(&ld.eval(0.1).unwrap());
        assert!(direct.sub(&spectral).max_abs() < 1e-6);
    }

    #[test]
    fn superquadratic_prefactor_bound_for_gamma_in_1_2() {
        // For γ ∈ (1,2] the Hessian trace against a mix with Δu_i <= K is
        // bounded by γK pointwise: (1+|p|²)^{-(2-γ)/2} <= 1.
        let g = Grid::new(1, 64);
        let times = [0.0, 0.1];
        let u1 = smooth_trajectory(&g, 61, &times, 0.1);
        let u2 = smooth_trajectory(&g, 62, &times, 0.1);
        let gamma = 1.5;
        let ld = LinearizedDrift::new(&u1, &u2, Hamiltonian::power(gamma));
        let neg_div = ld.divergence(0.1).unwrap().map(|v| -v);
        let k = u1
            .field(1)
            .laplacian()
            .max()
            .max(u2.field(1).laplacian().max());
        let bound = gamma * k.max(0.0);
        assert!(neg_div.max() <= bound + 1e-9, "{} > {bound}", neg_div.max());
    }

    #[test]
    fn time_outside_range_is_an_error() {
        let g = Grid::new(1, 32);
        let times = [0.0, 0.1];
        let u1 = smooth_trajectory(&g, 71, &times, 0.1);
        let u2 = smooth_trajectory(&g, 72, &times, 0.1);
        let ld = LinearizedDrift::new(&u1, &u2, Hamiltonian::Quadratic);
        assert!(ld.eval(0.05).is_err());
    }
}
