//! Pseudospectral laboratory for advection-diffusion PDEs on the periodic torus.
//!
//! The crate bundles everything needed to run desk-scale numerical checks of
//! stability and continuous-dependence inequalities for Fokker-Planck,
//! transport-diffusion and viscous Hamilton-Jacobi equations:
//!
//! - [`exponents`]: exact rational bookkeeping for mixed Lebesgue
//!   admissibility conditions and Gagliardo-Nirenberg interpolation.
//! - [`grid`]: Fourier discretization of the torus, spectral calculus,
//!   spatial and mixed space-time norms.
//! - [`gn`]: numerical estimation of the discrete Gagliardo-Nirenberg
//!   constant used by every energy estimate.
//! - [`fields`]: analytic drift fields with prescribed divergence classes,
//!   Hamiltonians, and the linearized drift between two solutions.
//! - [`solvers`]: IMEX spectral time-steppers for the three PDE families and
//!   the dual (adjoint) solve used by the duality method.
//! - [`verify`]: each inequality turned into an executable check with
//!   explicitly computed constants, reported as [`verify::EstimateReport`]s.
//! - [`io`]: flat binary / CSV serialization for fields and trajectories.

pub mod exponents;
pub mod fields;
pub mod gn;
pub mod grid;
pub mod io;
pub mod solvers;
pub mod spectral;
pub mod verify;
