//! Simulators that generate numerical evidence for the criteria.

mod accel;
mod history;
mod pde;
mod reduced;
mod signs;
mod trajectory;

use thiserror::Error;

use crate::expr::EvalError;
use crate::problem::ProblemError;
use crate::quad::QuadError;

pub use pde::{
    default_initial_data, simulate_pde, simulate_pde_with, CflRecord, PdeForm, PdeOptions, SimulationTrace, TraceScheme,
};
pub use reduced::{simulate_reduced, simulate_reduced_with, Relaxation};
pub use signs::{detect_sign_changes, SignChangeReport, DEFAULT_SIGN_ATOL};
pub use trajectory::{RelaxationInfo, Trajectory};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("non-finite {what} at t = {t}")]
    NonFinite { what: &'static str, t: f64 },
    #[error("deviating argument {s} at t = {t} lies before the window start {start}")]
    DeviationBelowWindow { t: f64, s: f64, start: f64 },
    #[error("solution blew up (|u| > {guard}) at t = {t}")]
    BlowUp { t: f64, guard: f64, partial: Box<SimulationTrace> },
}
