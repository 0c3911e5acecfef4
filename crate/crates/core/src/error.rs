use thiserror::Error;

use crate::integrate::Trajectory;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("not an unperturbed saddle: ({x}, {y})")]
    NotASaddle { x: f64, y: f64 },

    #[error("step limit of {limit} exceeded at t = {t}")]
    StepLimit {
        limit: usize,
        t: f64,
        partial: Box<Trajectory>,
    },

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error(
        "Newton iteration did not converge (residual {residual:.3e} after {iterations} iterations)"
    )]
    NoConvergence { residual: f64, iterations: usize },

    #[error("fixed point is not hyperbolic (|lambda| = {modulus:.12})")]
    NotHyperbolic { modulus: f64 },

    #[error("no such connection: {0}")]
    NoSuchConnection(String),

    #[error("insufficient arclength: {0}")]
    InsufficientArclength(String),

    #[error("tail truncation unsatisfied: integrand envelope {envelope:.3e} at |tau| = {t_cut}; increase T_cut")]
    TailTruncation { envelope: f64, t_cut: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
