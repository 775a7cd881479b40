//! Error types for every layer of the planner.
//!
//! Each module reports through its own enum; [`Error`] gathers them for
//! callers that drive the whole pipeline (search, CLI) and maps each failure
//! onto the process exit-code contract.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("state {state} out of range (n_states = {n_states})")]
    StateOutOfRange { state: usize, n_states: usize },
    #[error("action {action} out of range (n_actions = {n_actions})")]
    ActionOutOfRange { action: usize, n_actions: usize },
    #[error("transition row (state {state}, action {action}) sums to {sum}, expected 1")]
    RowNotStochastic { state: usize, action: usize, sum: f64 },
    #[error("invalid probability {prob} at (state {state}, action {action})")]
    InvalidProbability { state: usize, action: usize, prob: f64 },
    #[error("goal state {state} is not absorbing with zero cost under action {action}")]
    GoalNotAbsorbing { state: usize, action: usize },
    #[error("non-finite cost at (state {state}, action {action})")]
    NonFiniteCost { state: usize, action: usize },
    #[error("discount {name} = {value} must lie strictly between 0 and 1")]
    Discount { name: &'static str, value: f64 },
    #[error("macro action must contain at least one step")]
    EmptyMacro,
    #[error("stride {stride} outside [1, {bound}]")]
    StrideOutOfBounds { stride: usize, bound: usize },
    #[error("stride {stride} needs {count} macro actions, above the cap of {cap}")]
    Capacity { stride: usize, count: u128, cap: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("stride must be at least 1")]
    ZeroStride,
    #[error("stride {stride} exceeds bound {bound}")]
    StrideOutOfBounds { stride: usize, bound: usize },
    #[error("schedule length {len} exceeds maximum {max}")]
    TooLong { len: usize, max: usize },
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("value iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("alpha policy iteration for alpha = {alpha} did not settle after {iterations} iterations (residual {residual:e})")]
    AlphaCycle {
        alpha: f64,
        iterations: usize,
        residual: f64,
        previous: Vec<u32>,
        last: Vec<u32>,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("alpha = {0} must lie strictly between 0 and 1")]
    Alpha(f64),
    #[error("invalid solver options: {0}")]
    Options(String),
    #[error("macro action index {index} out of range ({n_macros} macro actions)")]
    MacroOutOfRange { index: u32, n_macros: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParetoError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("distribution {index} sums to {sum}, expected 1")]
    Distribution { index: usize, sum: f64 },
    #[error("margin must be non-negative, got {0}")]
    Margin(f64),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("inconsistent corners: exec-optimal exec {exec_corner} exceeds checkin-optimal exec {ck_corner}")]
    Corners { exec_corner: f64, ck_corner: f64 },
    #[error("alpha = {0} must lie strictly between 0 and 1")]
    Alpha(f64),
    #[error("non-finite cost point")]
    NonFinite,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid rollout input: {0}")]
    Input(String),
}

/// Crate-level error.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Pareto(#[from] ParetoError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Domain(String),
    #[error("internal: {0}")]
    Internal(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code: 2 configuration, 3 domain, 4 internal or non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Schedule(ScheduleError::Parse { .. }) => 2,
            Error::Io { .. } => 2,
            Error::Env(EnvError::Geometry(_) | EnvError::Parameter(_)) => 2,
            Error::Solver(SolverError::NotConverged { .. } | SolverError::AlphaCycle { .. }) => 4,
            Error::Internal(_) => 4,
            _ => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
