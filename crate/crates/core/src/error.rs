use std::fmt;

use thiserror::Error;

/// A single violated bound on an input field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    pub field: &'static str,
    pub bound: String,
}

impl ValidationError {
    pub fn new(field: &'static str, bound: impl Into<String>) -> Self {
        Self {
            field,
            bound: bound.into(),
        }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} must be {}", self.field, self.bound)
    }
}

fn join(errors: &[ValidationError]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {}", join(.0))]
    Validation(Vec<ValidationError>),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{what} is outside its domain: {detail}")]
    Domain { what: &'static str, detail: String },

    #[error("root finder did not converge after {iterations} iterations")]
    Convergence { iterations: usize },

    #[error("state blew up at t = {t} (|component| > {limit:e})")]
    StepSize { t: f64, limit: f64 },

    #[error("need at least {needed} envelope points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("(ix)^epsilon is undefined at x = 0 for epsilon = {epsilon}")]
    Branch { epsilon: f64 },

    #[error("E - V(x) vanishes on the real axis near x = {x}")]
    Singularity { x: f64 },

    #[error("no phase transition in column epsilon = {epsilon}")]
    NoTransition { epsilon: f64 },
}

impl Error {
    pub fn validation(field: &'static str, bound: impl Into<String>) -> Self {
        Error::Validation(vec![ValidationError::new(field, bound)])
    }

    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Validation(_) | Error::Config(_) | Error::Domain { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
