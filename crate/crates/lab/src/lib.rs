//! Run orchestration, configuration, persistence and reporting for the
//! torus PDE estimate laboratory.
//!
//! The library side exists so the CLI and the acceptance test drive the same
//! code: [`config`] parses experiment files, [`elements`] executes suite
//! elements into run manifests, [`suite`] bundles the acceptance criteria,
//! and [`render`] turns manifests into Markdown and SVG.

pub mod cache;
pub mod config;
pub mod elements;
pub mod render;
pub mod suite;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown suite element {0:?}")]
    UnknownElement(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Solver(#[from] driftlab_core::solvers::SolverError),
    #[error(transparent)]
    Verify(#[from] driftlab_core::verify::VerifyError),
    #[error(transparent)]
    Field(#[from] driftlab_core::fields::FieldError),
    #[error(transparent)]
    Gn(#[from] driftlab_core::gn::GnError),
    #[error(transparent)]
    Grid(#[from] driftlab_core::grid::GridError),
    #[error(transparent)]
    CoreIo(#[from] driftlab_core::io::IoError),
}

/// Exit code taxonomy: 0 all passed, 1 config/runtime error, 2 estimate
/// failure, 3 hypothesis failure.
pub fn exit_code_for(reports: &[driftlab_core::verify::EstimateReport]) -> i32 {
    use driftlab_core::verify::CheckStatus;
    let mut code = 0;
    for r in reports {
        match r.status {
            CheckStatus::Passed => {}
            CheckStatus::EstimateFailed => code = code.max(2),
            CheckStatus::HypothesisFailed if r.expected_hypothesis_failure => {}
            CheckStatus::HypothesisFailed => code = code.max(3),
        }
    }
    code
}
