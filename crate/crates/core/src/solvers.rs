//! IMEX spectral time-steppers for the three PDE families on the torus:
//! conservative Fokker-Planck, nonconservative transport-diffusion, and
//! viscous Hamilton-Jacobi (marched in reversed time).
//!
//! Diffusion is integrated implicitly through the exact spectral solve of
//! `(I - ε dt Δ)^{-1}`, advective and nonlinear terms explicitly, with every
//! pointwise product passed through the 2/3 dealiasing projection. The flux
//! form `div P(bρ)` has exactly zero mean, so the Fokker-Planck steps
//! conserve mass to round-off, and the transport term is the exact discrete
//! adjoint of the flux term — the duality solve below telescopes exactly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{
    gauss_legendre_unit, linearized_from_gradients, Hamiltonian, SampledDrift, SampledScalar,
};
use crate::grid::{
    dealiased_product, divergence, GridError, ScalarField, Trajectory, VectorField,
};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("advective CFL violated at step {step} (t = {t:.3e}): dt = {dt:.3e} > {limit:.3e}")]
    CflViolation { step: usize, t: f64, dt: f64, limit: f64 },
    #[error("non-finite value produced at step {step}")]
    NonFinite { step: usize },
    #[error("geometric time mesh requires t_start > 0")]
    GeometricMeshNeedsPositiveStart,
    #[error("bad time mesh: {0}")]
    BadMesh(String),
    #[error("adjoint pair solve requires a uniform time mesh")]
    UniformMeshRequired,
    #[error("residual needs at least 3 snapshots")]
    TooFewSnapshots,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Which member of the family is being discretized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PDEKind {
    /// `∂_t ρ - εΔρ + div(b ρ) = 0`, forward, conservative.
    FokkerPlanck,
    /// `∂_t z - εΔz - b·Dz = f`, forward, nonconservative.
    TransportDiffusion,
    /// `-∂_t u - εΔu + H(Du) = f` with terminal data, marched in reversed time.
    HamiltonJacobi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Backward-Euler diffusion, forward-Euler advection. First order.
    ImexEuler,
    /// Trapezoid (Crank-Nicolson) diffusion, explicit midpoint advection.
    ImexRk2,
}

/// Step placement over `[t_start, t_end]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TimeMesh {
    Uniform { dt: f64 },
    /// `t_k = t_start · (t_end/t_start)^{k/steps}`; resolves `1/t` drift
    /// singularities with a per-step CFL ratio independent of `k`.
    Geometric { steps: usize },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub mesh: TimeMesh,
    pub scheme: Scheme,
    /// Snapshot stride in steps; endpoints are always recorded.
    pub record_every: usize,
    /// Advective CFL safety factor: require `dt <= cfl_safety · h / max|b|`.
    pub cfl_safety: f64,
    pub enforce_cfl: bool,
}

impl SolverConfig {
    pub fn new(epsilon: f64, t_end: f64, dt: f64) -> Self {
        SolverConfig {
            epsilon,
            t_start: 0.0,
            t_end,
            mesh: TimeMesh::Uniform { dt },
            scheme: Scheme::ImexEuler,
            record_every: 1,
            cfl_safety: 0.5,
            enforce_cfl: true,
        }
    }

    pub fn geometric(epsilon: f64, sigma: f64, t_end: f64, steps: usize) -> Self {
        SolverConfig {
            epsilon,
            t_start: sigma,
            t_end,
            mesh: TimeMesh::Geometric { steps },
            scheme: Scheme::ImexEuler,
            record_every: 1,
            cfl_safety: 0.5,
            enforce_cfl: true,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_record_every(mut self, stride: usize) -> Self {
        self.record_every = stride.max(1);
        self
    }

    /// Step boundary instants, `t_start = t_0 < ... < t_M = t_end`.
    pub fn times(&self) -> Result<Vec<f64>, SolverError> {
        if !(self.t_end > self.t_start) {
            return Err(SolverError::BadMesh(format!(
                "t_end {} must exceed t_start {}",
                self.t_end, self.t_start
            )));
        }
        match self.mesh {
            TimeMesh::Uniform { dt } => {
                if !(dt > 0.0) {
                    return Err(SolverError::BadMesh(format!("dt = {dt}")));
                }
                let span = self.t_end - self.t_start;
                let m = (span / dt).round().max(1.0) as usize;
                let dt = span / m as f64;
                Ok((0..=m).map(|k| self.t_start + k as f64 * dt).collect())
            }
            TimeMesh::Geometric { steps } => {
                if self.t_start <= 0.0 {
                    return Err(SolverError::GeometricMeshNeedsPositiveStart);
                }
                if steps == 0 {
                    return Err(SolverError::BadMesh("geometric mesh with 0 steps".into()));
                }
                let ratio = self.t_end / self.t_start;
                Ok((0..=steps)
                    .map(|k| self.t_start * ratio.powf(k as f64 / steps as f64))
                    .collect())
            }
        }
    }
}

/// A concrete initial/terminal-value problem.
pub enum Problem<'a> {
    FokkerPlanck {
        drift: &'a SampledDrift,
        initial: &'a ScalarField,
    },
    TransportDiffusion {
        drift: &'a SampledDrift,
        initial: &'a ScalarField,
        source: Option<&'a SampledScalar>,
    },
    HamiltonJacobi {
        hamiltonian: &'a Hamiltonian,
        terminal: &'a ScalarField,
        source: Option<&'a SampledScalar>,
    },
}

impl Problem<'_> {
    pub fn kind(&self) -> PDEKind {
        match self {
            Problem::FokkerPlanck { .. } => PDEKind::FokkerPlanck,
            Problem::TransportDiffusion { .. } => PDEKind::TransportDiffusion,
            Problem::HamiltonJacobi { .. } => PDEKind::HamiltonJacobi,
        }
    }
}

/// `div P(bρ)`: the conservative advection term. Zero mean by construction.
fn flux_divergence(b: &VectorField, rho: &ScalarField) -> ScalarField {
    let flux: VectorField = b.iter().map(|comp| dealiased_product(comp, rho)).collect();
    divergence(&flux)
}

/// `P(b·Dz)`: the nonconservative advection term; exact discrete adjoint of
/// the flux form above.
fn advection(b: &VectorField, z: &ScalarField) -> ScalarField {
    let grid = z.grid().clone();
    let mut acc = ScalarField::zeros(&grid);
    for (axis, comp) in b.iter().enumerate() {
        acc.axpy(1.0, &dealiased_product(comp, &z.derivative(axis)));
    }
    acc
}

/// `P(H(Du))` evaluated pointwise on the gradient, plus `max |D_pH(Du)|`.
fn hamiltonian_term(ham: &Hamiltonian, u: &ScalarField) -> (ScalarField, f64) {
    let grid = u.grid().clone();
    let dim = grid.dim();
    let grad = u.gradient();
    let len = grid.len();
    let mut vals = vec![0.0; len];
    let mut max_speed = 0.0f64;
    for idx in 0..len {
        let p = [
            grad[0].values()[idx],
            if dim == 2 { grad[1].values()[idx] } else { 0.0 },
        ];
        vals[idx] = ham.value(p);
        let dh = ham.gradient(p);
        let sp = (dh[0] * dh[0] + dh[1] * dh[1]).sqrt();
        max_speed = max_speed.max(sp);
    }
    (ScalarField::from_values(&grid, vals).dealias(), max_speed)
}

fn implicit_diffuse(f: &ScalarField, alpha: f64) -> ScalarField {
    if alpha == 0.0 {
        return f.clone();
    }
    let grid = f.grid().clone();
    let mut spec = f.to_spectrum();
    grid.spectral().helmholtz_solve_spec(&mut spec, alpha);
    ScalarField::from_spectrum(&grid, &spec)
}

/// Crank-Nicolson combination `(I - αΔ)^{-1} [(I + αΔ) y + r]`.
fn cn_step(y: &ScalarField, r: &ScalarField, alpha: f64) -> ScalarField {
    let grid = y.grid().clone();
    let mut spec = y.to_spectrum();
    let rspec = r.to_spectrum();
    let sp = grid.spectral();
    sp.helmholtz_apply_spec(&mut spec, alpha);
    for (a, b) in spec.iter_mut().zip(&rspec) {
        *a += b;
    }
    sp.helmholtz_solve_spec(&mut spec, alpha);
    ScalarField::from_spectrum(&grid, &spec)
}

struct MarchOutput {
    times: Vec<f64>,
    fields: Vec<ScalarField>,
}

/// Generic IMEX march of `∂_s y = εΔy + N(y, s)` over increasing times.
/// `rhs` evaluates N; `speed` bounds the advective velocity for the CFL gate.
fn march(
    initial: &ScalarField,
    times: &[f64],
    cfg: &SolverConfig,
    mut rhs: impl FnMut(&ScalarField, f64) -> ScalarField,
    mut speed: impl FnMut(&ScalarField, f64) -> f64,
) -> Result<MarchOutput, SolverError> {
    let grid = initial.grid().clone();
    let h = grid.spacing();
    let mut y = initial.dealias();
    let m = times.len() - 1;
    let mut rec_times = vec![times[0]];
    let mut rec_fields = vec![y.clone()];
    for step in 0..m {
        let t = times[step];
        let dt = times[step + 1] - times[step];
        if cfg.enforce_cfl {
            let sp = speed(&y, t);
            if sp > 0.0 {
                let limit = cfg.cfl_safety * h / sp;
                if dt > limit {
                    return Err(SolverError::CflViolation { step, t, dt, limit });
                }
            }
        }
        y = match cfg.scheme {
            Scheme::ImexEuler => {
                let mut z = y.clone();
                z.axpy(dt, &rhs(&y, t));
                implicit_diffuse(&z, cfg.epsilon * dt)
            }
            Scheme::ImexRk2 => {
                let mut half = y.clone();
                half.axpy(0.5 * dt, &rhs(&y, t));
                let half = implicit_diffuse(&half, 0.5 * cfg.epsilon * dt);
                let mut incr = rhs(&half, t + 0.5 * dt);
                incr.scale(dt);
                cn_step(&y, &incr, 0.5 * cfg.epsilon * dt)
            }
        };
        if !y.max_abs().is_finite() {
            return Err(SolverError::NonFinite { step });
        }
        if ((step + 1) % cfg.record_every == 0 || step + 1 == m)
            && *rec_times.last().unwrap() < times[step + 1]
        {
            rec_times.push(times[step + 1]);
            rec_fields.push(y.clone());
        }
    }
    Ok(MarchOutput {
        times: rec_times,
        fields: rec_fields,
    })
}

/// Solves the problem over `cfg`'s window and returns the recorded snapshots
/// with physically increasing times (Hamilton-Jacobi output is re-reversed).
pub fn solve(problem: &Problem<'_>, cfg: &SolverConfig) -> Result<Trajectory, SolverError> {
    let times = cfg.times()?;
    match problem {
        Problem::FokkerPlanck { drift, initial } => {
            let out = march(
                initial,
                &times,
                cfg,
                |rho, t| flux_divergence(&drift.velocity(t), rho).map(|v| -v),
                |_, t| drift.max_speed(t),
            )?;
            build_traj(out.times, out.fields)
        }
        Problem::TransportDiffusion {
            drift,
            initial,
            source,
        } => {
            let out = march(
                initial,
                &times,
                cfg,
                |z, t| {
                    let mut n = advection(&drift.velocity(t), z);
                    if let Some(f) = source {
                        n.axpy(1.0, &f.at(t));
                    }
                    n
                },
                |_, t| drift.max_speed(t),
            )?;
            build_traj(out.times, out.fields)
        }
        Problem::HamiltonJacobi {
            hamiltonian,
            terminal,
            source,
        } => {
            // Reversed time s = T - t: ∂_s u = εΔu - H(Du) + f(T - s).
            let horizon = cfg.t_end;
            let s_times: Vec<f64> = {
                let mut s: Vec<f64> = times.iter().map(|&t| horizon - t).collect();
                s.reverse();
                s
            };
            let out = march(
                terminal,
                &s_times,
                cfg,
                |u, s| {
                    let (h_term, _) = hamiltonian_term(hamiltonian, u);
                    let mut n = h_term.map(|v| -v);
                    if let Some(f) = source {
                        n.axpy(1.0, &f.at(horizon - s));
                    }
                    n
                },
                |u, _| hamiltonian_term(hamiltonian, u).1,
            )?;
            // Re-reverse: sample at s becomes a sample at t = T - s.
            let mut pairs: Vec<(f64, ScalarField)> = out
                .times
                .into_iter()
                .map(|s| horizon - s)
                .zip(out.fields)
                .collect();
            pairs.reverse();
            build_traj(
                pairs.iter().map(|p| p.0).collect(),
                pairs.into_iter().map(|p| p.1).collect(),
            )
        }
    }
}

/// Solves the backward transport-diffusion problem
/// `-∂_t v - εΔv - b·Dv = f` with terminal data `v(T) = v_T` by reversing
/// time internally; the output trajectory is in physical (increasing) time.
pub fn solve_backward_transport(
    drift: &SampledDrift,
    terminal: &ScalarField,
    source: Option<&SampledScalar>,
    cfg: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    let times = cfg.times()?;
    let horizon = cfg.t_end;
    let s_times: Vec<f64> = {
        let mut s: Vec<f64> = times.iter().map(|&t| horizon - t).collect();
        s.reverse();
        s
    };
    let out = march(
        terminal,
        &s_times,
        cfg,
        |z, s| {
            let t = horizon - s;
            let mut n = advection(&drift.velocity(t), z);
            if let Some(f) = source {
                n.axpy(1.0, &f.at(t));
            }
            n
        },
        |_, s| drift.max_speed(horizon - s),
    )?;
    let mut pairs: Vec<(f64, ScalarField)> = out
        .times
        .into_iter()
        .map(|s| horizon - s)
        .zip(out.fields)
        .collect();
    pairs.reverse();
    build_traj(
        pairs.iter().map(|p| p.0).collect(),
        pairs.into_iter().map(|p| p.1).collect(),
    )
}

fn build_traj(times: Vec<f64>, fields: Vec<ScalarField>) -> Result<Trajectory, SolverError> {
    let mut traj = Trajectory::new();
    for (t, f) in times.into_iter().zip(fields) {
        traj.push(t, f)?;
    }
    Ok(traj)
}

/// Output of the duality solve: the two Hamilton-Jacobi solutions, their
/// difference, the dual density, and the pairing bookkeeping.
pub struct AdjointPair {
    pub u1: Trajectory,
    pub u2: Trajectory,
    pub w: Trajectory,
    pub rho: Trajectory,
    /// `P(t) = ∫ w(t) ρ(t) dx` at the recorded times.
    pub pairing: Vec<(f64, f64)>,
    /// Discrete `∫_τ^T ∫ (f₁ - f₂) ρ dx dt`.
    pub source_pairing: f64,
    /// `P(τ) - P(T) - source_pairing`; telescopes to round-off because the
    /// dual step is the exact transpose of the difference step.
    pub duality_residual: f64,
    /// Stable magnitude of the pairing terms:
    /// `‖w(τ)‖₂‖ρ(τ)‖₂ + ‖w(T)‖₂‖ρ(T)‖₂ + |source_pairing|`.
    pub pairing_scale: f64,
    /// `∫ ρ(t) dx` at the recorded times.
    pub mass_series: Vec<f64>,
    /// Max over steps of `|D_pH(Du_i)|` (drift boundedness check).
    pub max_drift_speed: f64,
}

/// Solves the two Hamilton-Jacobi problems, forms `w = u₁ - u₂`, builds the
/// linearized drift, and runs the forward adjoint Fokker-Planck with datum
/// `ρ_τ`, pairing the two along the way.
///
/// Requires a uniform mesh; the steps are Euler-IMEX so the dual update is
/// the exact transpose of the difference update.
pub fn solve_adjoint_pair(
    hamiltonian: &Hamiltonian,
    g1: &ScalarField,
    g2: &ScalarField,
    f1: Option<&SampledScalar>,
    f2: Option<&SampledScalar>,
    rho_tau: &ScalarField,
    cfg: &SolverConfig,
) -> Result<AdjointPair, SolverError> {
    if !matches!(cfg.mesh, TimeMesh::Uniform { .. }) {
        return Err(SolverError::UniformMeshRequired);
    }
    let times = cfg.times()?;
    let m = times.len() - 1;
    let dt = times[1] - times[0];
    let horizon = cfg.t_end;
    let grid = g1.grid().clone();
    let h = grid.spacing();
    let theta_quad = gauss_legendre_unit(8);

    // March both HJ problems in reversed time, keeping every step.
    let mut hist1 = Vec::with_capacity(m + 1);
    let mut hist2 = Vec::with_capacity(m + 1);
    let mut max_drift_speed = 0.0f64;
    {
        let mut u1 = g1.dealias();
        let mut u2 = g2.dealias();
        hist1.push(u1.clone());
        hist2.push(u2.clone());
        for step in 0..m {
            let s = step as f64 * dt;
            let t = horizon - s;
            for (u, f) in [(&mut u1, &f1), (&mut u2, &f2)] {
                let (h_term, sp) = hamiltonian_term(hamiltonian, u);
                max_drift_speed = max_drift_speed.max(sp);
                if cfg.enforce_cfl && sp > 0.0 {
                    let limit = cfg.cfl_safety * h / sp;
                    if dt > limit {
                        return Err(SolverError::CflViolation { step, t, dt, limit });
                    }
                }
                let mut z = u.clone();
                z.axpy(-dt, &h_term);
                if let Some(f) = f {
                    z.axpy(dt, &f.at(t));
                }
                *u = implicit_diffuse(&z, cfg.epsilon * dt);
                if !u.max_abs().is_finite() {
                    return Err(SolverError::NonFinite { step });
                }
            }
            hist1.push(u1.clone());
            hist2.push(u2.clone());
        }
    }

    // Linearized drift at step index j (time t = horizon - j·dt).
    let drift_at = |j: usize| -> VectorField {
        let grad1 = hist1[j].gradient();
        let grad2 = hist2[j].gradient();
        linearized_from_gradients(&grad1, &grad2, hamiltonian, &theta_quad)
    };

    // Adjoint march: ρ at index j lives at t = horizon - j·dt; datum at
    // j = m (t = τ). ρ^j = Sρ^{j+1} - dt·div P(b_j ⊙ P(Sρ^{j+1})): the
    // exact transpose of the w update from index j to j+1.
    let mut rho_hist: Vec<ScalarField> = vec![ScalarField::zeros(&grid); m + 1];
    rho_hist[m] = rho_tau.dealias();
    let mut source_pairing = 0.0f64;
    let f_diff = |t: f64| -> Option<ScalarField> {
        match (&f1, &f2) {
            (None, None) => None,
            _ => {
                let mut d = match &f1 {
                    Some(f) => f.at(t),
                    None => ScalarField::zeros(&grid),
                };
                if let Some(f) = &f2 {
                    d.axpy(-1.0, &f.at(t));
                }
                Some(d)
            }
        }
    };
    for j in (0..m).rev() {
        let phi = implicit_diffuse(&rho_hist[j + 1], cfg.epsilon * dt);
        let b = drift_at(j);
        let mut rho_j = phi.clone();
        rho_j.axpy(-dt, &flux_divergence(&b, &phi));
        if !rho_j.max_abs().is_finite() {
            return Err(SolverError::NonFinite { step: j });
        }
        if let Some(d) = f_diff(horizon - j as f64 * dt) {
            source_pairing += dt * d.inner(&phi);
        }
        rho_hist[j] = rho_j;
    }

    // Assemble recorded trajectories in increasing physical time.
    let mut rec_idx: Vec<usize> = (0..=m)
        .filter(|j| j % cfg.record_every == 0 || *j == m)
        .collect();
    rec_idx.sort_unstable();
    rec_idx.dedup();

    let mut u1_traj = Trajectory::new();
    let mut u2_traj = Trajectory::new();
    let mut w_traj = Trajectory::new();
    let mut rho_traj = Trajectory::new();
    let mut pairing = Vec::new();
    let mut mass_series = Vec::new();
    for &j in rec_idx.iter().rev() {
        let t = horizon - j as f64 * dt;
        let w = hist1[j].sub(&hist2[j]);
        pairing.push((t, w.inner(&rho_hist[j])));
        mass_series.push(rho_hist[j].integral());
        u1_traj.push(t, hist1[j].clone())?;
        u2_traj.push(t, hist2[j].clone())?;
        w_traj.push(t, w)?;
        rho_traj.push(t, rho_hist[j].clone())?;
    }

    let p_tau = hist1[m].sub(&hist2[m]).inner(&rho_hist[m]);
    let p_horizon = hist1[0].sub(&hist2[0]).inner(&rho_hist[0]);
    let duality_residual = p_tau - p_horizon - source_pairing;
    let l2 = |f: &ScalarField| f.lp_norm(crate::exponents::Exponent::int(2)).expect("l2");
    let pairing_scale = l2(&hist1[m].sub(&hist2[m])) * l2(&rho_hist[m])
        + l2(&hist1[0].sub(&hist2[0])) * l2(&rho_hist[0])
        + source_pairing.abs();

    Ok(AdjointPair {
        u1: u1_traj,
        u2: u2_traj,
        w: w_traj,
        rho: rho_traj,
        pairing,
        source_pairing,
        duality_residual,
        mass_series,
        max_drift_speed,
        pairing_scale,
    })
}

/// A-posteriori PDE residual at interior snapshot times, with centered time
/// differences and the solver's own spatial operators. Returns `(t, ‖r‖₂)`.
pub fn residual(
    problem: &Problem<'_>,
    traj: &Trajectory,
    epsilon: f64,
) -> Result<Vec<(f64, f64)>, SolverError> {
    if traj.len() < 3 {
        return Err(SolverError::TooFewSnapshots);
    }
    let mut out = Vec::new();
    for i in 1..traj.len() - 1 {
        let t = traj.times()[i];
        let dt2 = traj.times()[i + 1] - traj.times()[i - 1];
        let mut dydt = traj.field(i + 1).sub(traj.field(i - 1));
        dydt.scale(1.0 / dt2);
        let y = traj.field(i);
        let lap = y.laplacian();
        let r = match problem {
            Problem::FokkerPlanck { drift, .. } => {
                // ∂_t ρ - εΔρ + div P(bρ)
                let mut r = dydt;
                r.axpy(-epsilon, &lap);
                r.axpy(1.0, &flux_divergence(&drift.velocity(t), y));
                r
            }
            Problem::TransportDiffusion { drift, source, .. } => {
                let mut r = dydt;
                r.axpy(-epsilon, &lap);
                r.axpy(-1.0, &advection(&drift.velocity(t), y));
                if let Some(f) = source {
                    r.axpy(-1.0, &f.at(t));
                }
                r
            }
            Problem::HamiltonJacobi {
                hamiltonian,
                source,
                ..
            } => {
                // -∂_t u - εΔu + P H(Du) - f
                let mut r = dydt.map(|v| -v);
                r.axpy(-epsilon, &lap);
                r.axpy(1.0, &hamiltonian_term(hamiltonian, y).0);
                if let Some(f) = source {
                    r.axpy(-1.0, &f.at(t));
                }
                r
            }
        };
        out.push((t, r.lp_norm(crate::exponents::Exponent::int(2))?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::Exponent;
    use crate::fields::{make_divfree_drift, DriftSpec};
    use crate::grid::Grid;
    use std::f64::consts::PI;

    #[test]
    fn heat_kernel_decay_fokker_planck() {
        // b = 0, ε = 1: the k = 1 mode decays as exp(-4π²t).
        let g = Grid::new(1, 64);
        let rho0 = ScalarField::from_fn(&g, |x, _| 1.0 + (2.0 * PI * x).cos());
        let drift = DriftSpec::zero(1).sampled(&g);
        let cfg = SolverConfig::new(1.0, 0.1, 1e-4)
            .with_scheme(Scheme::ImexRk2)
            .with_record_every(100);
        let traj = solve(
            &Problem::FokkerPlanck {
                drift: &drift,
                initial: &rho0,
            },
            &cfg,
        )
        .unwrap();
        let mut worst = 0.0f64;
        for (t, f) in traj.iter() {
            let exact = ScalarField::from_fn(&g, |x, _| {
                1.0 + (-4.0 * PI * PI * t).exp() * (2.0 * PI * x).cos()
            });
            worst = worst.max(f.sub(&exact).lp_norm(Exponent::int(2)).unwrap());
        }
        assert!(worst <= 1e-4, "L2 error {worst}");
    }

    #[test]
    fn mass_conserved_to_round_off() {
        let g = Grid::new(2, 32);
        let spec = make_divfree_drift(&g, 3, 0.4);
        let drift = spec.sampled(&g);
        let rho0 = ScalarField::from_fn(&g, |x, y| {
            1.0 + 0.3 * (2.0 * PI * x).cos() * (2.0 * PI * y).sin()
        });
        let cfg = SolverConfig::new(1.0, 0.05, 5e-4).with_record_every(10);
        let traj = solve(
            &Problem::FokkerPlanck {
                drift: &drift,
                initial: &rho0,
            },
            &cfg,
        )
        .unwrap();
        let m0 = traj.first().integral();
        for (_, f) in traj.iter() {
            assert!((f.integral() - m0).abs() <= 1e-12);
        }
    }

    #[test]
    fn pure_transport_is_isometric_with_rk2() {
        // b constant, ε = 0: exact translation; L² must be conserved to 1e-6
        // over T = 0.5 with the second-order scheme.
        let g = Grid::new(1, 64);
        let spec = make_divfree_drift(&g, 1, 0.3);
        let drift = spec.sampled(&g);
        let z0 =
            ScalarField::from_fn(&g, |x, _| (2.0 * PI * x).sin() + 0.5 * (4.0 * PI * x).cos());
        let cfg = SolverConfig::new(0.0, 0.5, 1e-3)
            .with_scheme(Scheme::ImexRk2)
            .with_record_every(100);
        let traj = solve(
            &Problem::TransportDiffusion {
                drift: &drift,
                initial: &z0,
                source: None,
            },
            &cfg,
        )
        .unwrap();
        let n0 = z0.lp_norm(Exponent::int(2)).unwrap();
        for (_, f) in traj.iter() {
            assert!((f.lp_norm(Exponent::int(2)).unwrap() - n0).abs() < 1e-6);
        }
        // And the final state is the exact translate of the data.
        let t_final = 0.5;
        let exact = ScalarField::from_fn(&g, |x, _| {
            let xs = x + 0.3 * t_final; // ∂_t z = b ∂_x z transports leftward
            (2.0 * PI * xs).sin() + 0.5 * (4.0 * PI * xs).cos()
        });
        assert!(traj.last().sub(&exact).max_abs() < 2e-3);
    }

    #[test]
    fn hamilton_jacobi_reversal_bookkeeping() {
        // Reversing time inside the solver and re-reversing the output is
        // pure bookkeeping: the terminal snapshot equals the projected data.
        let g = Grid::new(1, 32);
        let gdat = ScalarField::from_fn(&g, |x, _| 0.1 * (2.0 * PI * x).cos());
        let cfg = SolverConfig::new(0.1, 0.2, 1e-3).with_record_every(50);
        let traj = solve(
            &Problem::HamiltonJacobi {
                hamiltonian: &Hamiltonian::Quadratic,
                terminal: &gdat,
                source: None,
            },
            &cfg,
        )
        .unwrap();
        assert!(traj.times().last().unwrap() - 0.2 < 1e-12);
        assert!(traj.last().sub(&gdat.dealias()).max_abs() < 1e-12);
        assert!(traj.times()[0].abs() < 1e-12);
    }

    #[test]
    fn cfl_violation_detected() {
        let g = Grid::new(1, 64);
        let spec = make_divfree_drift(&g, 1, 5.0);
        let drift = spec.sampled(&g);
        let z0 = ScalarField::from_fn(&g, |x, _| (2.0 * PI * x).sin());
        let cfg = SolverConfig::new(0.0, 0.5, 0.05);
        let err = solve(
            &Problem::TransportDiffusion {
                drift: &drift,
                initial: &z0,
                source: None,
            },
            &cfg,
        )
        .unwrap_err();
        assert!(matches!(err, SolverError::CflViolation { .. }), "{err}");
    }

    #[test]
    fn geometric_mesh_requires_positive_start() {
        let cfg = SolverConfig {
            epsilon: 1.0,
            t_start: 0.0,
            t_end: 1.0,
            mesh: TimeMesh::Geometric { steps: 10 },
            scheme: Scheme::ImexEuler,
            record_every: 1,
            cfl_safety: 0.5,
            enforce_cfl: true,
        };
        assert!(matches!(
            cfg.times(),
            Err(SolverError::GeometricMeshNeedsPositiveStart)
        ));
    }

    #[test]
    fn residual_small_on_manufactured_heat_trajectory() {
        // Gentle heat kernel (ε = 0.01) injected exactly: only the centered
        // time difference contributes, O(dt²).
        let g = Grid::new(1, 64);
        let eps = 0.01;
        let lam = eps * 4.0 * PI * PI;
        let mut traj = Trajectory::new();
        let dt = 1e-4;
        for i in 0..=100 {
            let t = i as f64 * dt;
            traj.push(
                t,
                ScalarField::from_fn(&g, |x, _| 1.0 + (-lam * t).exp() * (2.0 * PI * x).cos()),
            )
            .unwrap();
        }
        let drift = DriftSpec::zero(1).sampled(&g);
        let series = residual(
            &Problem::FokkerPlanck {
                drift: &drift,
                initial: traj.first(),
            },
            &traj,
            eps,
        )
        .unwrap();
        let max = series.iter().fold(0.0f64, |m, &(_, r)| m.max(r));
        assert!(max <= 1e-6, "residual {max}");
    }

    #[test]
    fn residual_large_on_non_solution() {
        let g = Grid::new(1, 64);
        let mut traj = Trajectory::new();
        for i in 0..=4 {
            let t = i as f64 * 0.01;
            traj.push(
                t,
                ScalarField::from_fn(&g, |x, _| ((7.0 + t) * 2.0 * PI * x).sin()),
            )
            .unwrap();
        }
        let drift = DriftSpec::zero(1).sampled(&g);
        let series = residual(
            &Problem::FokkerPlanck {
                drift: &drift,
                initial: traj.first(),
            },
            &traj,
            1.0,
        )
        .unwrap();
        let max = series.iter().fold(0.0f64, |m, &(_, r)| m.max(r));
        assert!(max > 1.0, "residual {max}");
    }

    #[test]
    fn residual_halves_with_dt_on_solver_output() {
        let g = Grid::new(1, 64);
        let spec = make_divfree_drift(&g, 5, 0.2);
        let drift = spec.sampled(&g);
        let z0 = ScalarField::from_fn(&g, |x, _| (2.0 * PI * x).sin());
        let max_residual = |dt: f64| -> f64 {
            let cfg = SolverConfig::new(0.5, 0.1, dt);
            let traj = solve(
                &Problem::TransportDiffusion {
                    drift: &drift,
                    initial: &z0,
                    source: None,
                },
                &cfg,
            )
            .unwrap();
            residual(
                &Problem::TransportDiffusion {
                    drift: &drift,
                    initial: &z0,
                    source: None,
                },
                &traj,
                0.5,
            )
            .unwrap()
            .iter()
            .fold(0.0f64, |m, &(_, r)| m.max(r))
        };
        let r1 = max_residual(1e-3);
        let r2 = max_residual(5e-4);
        let ratio = r1 / r2;
        assert!(
            (1.8..=2.2).contains(&ratio),
            "first-order residual ratio {ratio} (r1={r1}, r2={r2})"
        );
    }

    #[test]
    fn adjoint_pair_duality_telescopes() {
        let g = Grid::new(1, 64);
        let g1 = ScalarField::from_fn(&g, |x, _| 0.1 * (2.0 * PI * x).cos());
        let g2 = ScalarField::from_fn(&g, |x, _| 0.08 * (2.0 * PI * x).sin());
        let rho_tau = ScalarField::from_fn(&g, |x, _| 1.0 + 0.2 * (2.0 * PI * x).sin());
        let cfg = SolverConfig::new(0.1, 0.25, 5e-4).with_record_every(50);
        let pair = solve_adjoint_pair(
            &Hamiltonian::Quadratic,
            &g1,
            &g2,
            None,
            None,
            &rho_tau,
            &cfg,
        )
        .unwrap();
        let scale = pair
            .pairing
            .iter()
            .fold(1.0f64, |m, &(_, p)| m.max(p.abs()));
        assert!(
            pair.duality_residual.abs() <= 1e-10 * scale,
            "residual {} at scale {scale}",
            pair.duality_residual
        );
        // Probability datum: mass sticks to 1 at round-off.
        for m in &pair.mass_series {
            assert!((m - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn adjoint_pair_identical_data_gives_zero_difference() {
        let g = Grid::new(1, 32);
        let gd = ScalarField::from_fn(&g, |x, _| 0.05 * (2.0 * PI * x).cos());
        let rho_tau = ScalarField::constant(&g, 1.0);
        let cfg = SolverConfig::new(0.05, 0.1, 1e-3);
        let pair = solve_adjoint_pair(
            &Hamiltonian::Quadratic,
            &gd,
            &gd,
            None,
            None,
            &rho_tau,
            &cfg,
        )
        .unwrap();
        for (_, f) in pair.w.iter() {
            assert!(f.max_abs() <= 1e-14);
        }
        for &(_, p) in &pair.pairing {
            assert!(p.abs() <= 1e-14);
        }
    }
}
