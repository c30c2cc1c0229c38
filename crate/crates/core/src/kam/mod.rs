//! The linearization iteration: parameter schedules checked by arithmetic,
//! and desk-scale runs of the truncate, solve, transform cycle.

mod engine;
mod schedule;

pub use engine::{
    compose_eval, compose_jacobian, kam_run, kam_step, kam_step_degree, verify_solve_bounds, KamFailure, KamRun, KamRunConfig, ShrinkDomain, SolveBoundCheck,
    StepContext, StepOutcome, StepReport, StopReason, TransformChain, KERNEL_TOLERANCE, NEGLIGIBLE_NORM,
};
pub use schedule::{
    build_schedule, compute_c1, min_admissible_q, verify_schedule, KamSchedule, ScheduleReport, ScheduleStatus, StepParams, MAX_SEARCH_Q, MIN_SEARCH_HORIZON,
};

use thiserror::Error;

use crate::homological::SolveError;
use crate::lie::LieError;
use crate::series::{Complex, SeriesError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KamError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("analyticity domain exhausted at step {nu}: rho = {rho}, gamma = {gamma}")]
    DomainExhausted { nu: usize, rho: f64, gamma: f64 },
    #[error("no admissible q up to {max_q}")]
    NotFound { max_q: u32 },
    #[error("kernel term {coefficient} at degree {n} cannot be removed (kernel mass {kernel_mass:e})")]
    NonLinearizable { n: u32, coefficient: Complex, kernel_mass: f64 },
    #[error("perturbation starts at degree {found}, the step needs at least {expected}")]
    Precondition { expected: u32, found: u32 },
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

impl KamError {
    /// `(j, A_{2j})` for a non-removable kernel term.
    pub fn twist_coefficient(&self) -> Option<(u32, Complex)> {
        match self {
            Self::NonLinearizable { n, coefficient, .. } => Some((n / 2, *coefficient)),
            _ => None,
        }
    }
}
