use thiserror::Error;

use crate::partition::OuterState;

/// Errors raised by the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("infeasible partition: k = {k}, J = {cells}, required L = {required:.6} exceeds bound {bound:.6}")]
    InfeasiblePartition {
        k: usize,
        cells: usize,
        required: f64,
        bound: f64,
    },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("reference grids differ: ({k0}, {j0}) vs ({k1}, {j1})")]
    MismatchedGrids {
        k0: usize,
        j0: usize,
        k1: usize,
        j1: usize,
    },

    #[error("degenerate cell [{x_left}, {x_right}]")]
    DegenerateCell { x_left: f64, x_right: f64 },

    #[error("cell too large: {0}")]
    CellTooLarge(CellFailure),

    #[error("cell {index} failed: {source}")]
    Cell {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("no interior maximum along ray: {0}")]
    NoInteriorMax(String),

    #[error("maximum iterations reached ({iterations}): nehari residual {nehari_residual:.3e}, gradient {grad_norm:.3e}")]
    MaxIterations {
        iterations: usize,
        nehari_residual: f64,
        grad_norm: f64,
    },

    #[error("outer optimizer stalled on the Lipschitz bound (margin {margin:.3e})")]
    StalledOnBoundary { margin: f64, state: Box<OuterState> },

    #[error("outer optimizer hit {iterations} iterations without converging")]
    MaxOuterIterations {
        iterations: usize,
        state: Box<OuterState>,
    },

    #[error("outer line search failed at iteration {iteration}")]
    LineSearchFailed {
        iteration: usize,
        state: Box<OuterState>,
    },

    #[error("shooting overflow at x = {x}")]
    Overflow { x: f64 },

    #[error("zero localization violated at index {index}")]
    ViolatedLocalization { index: usize },

    #[error("sign pattern violated on nodal region {region}")]
    ViolatedSignPattern { region: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Why a cell could not host the small local minimizer.
#[derive(Debug, Clone, PartialEq)]
pub enum CellFailure {
    HessianNotPd { iteration: usize, pivot: usize },
    MassConstraintViolated { mass: f64 },
    NewtonStalled { iterations: usize, grad_norm: f64 },
}

impl std::fmt::Display for CellFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CellFailure::HessianNotPd { iteration, pivot } => {
                write!(f, "hessian not positive definite (newton step {iteration}, pivot {pivot})")
            }
            CellFailure::MassConstraintViolated { mass } => {
                write!(f, "local minimizer mass {mass:.4e} >= 1")
            }
            CellFailure::NewtonStalled {
                iterations,
                grad_norm,
            } => write!(f, "newton stalled after {iterations} steps (gradient {grad_norm:.3e})"),
        }
    }
}

impl Error {
    /// True when the failure means the cell must be refined (larger k).
    pub fn is_cell_too_large(&self) -> bool {
        match self {
            Error::CellTooLarge(_) => true,
            Error::Cell { source, .. } => source.is_cell_too_large(),
            _ => false,
        }
    }

    /// Last iterate carried by an outer-optimizer failure, if any.
    pub fn outer_state(&self) -> Option<&OuterState> {
        match self {
            Error::StalledOnBoundary { state, .. }
            | Error::MaxOuterIterations { state, .. }
            | Error::LineSearchFailed { state, .. } => Some(state),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
