use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid edge ({i}, {j}): {reason}")]
    InvalidEdge { i: usize, j: usize, reason: &'static str },

    #[error("invalid parameter: {0}")]
    BadParameter(String),

    #[error("null spaces are not nested with codimension one (defect {defect:.3e})")]
    CodimensionMismatch { defect: f64 },

    #[error("point lies outside the polyhedron (worst margin {margin:.3e})")]
    Infeasible { margin: f64 },

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("requested step {step} but the trace has {have} steps")]
    StepOutOfRange { step: usize, have: usize },

    #[error("location {0} is not a changepoint of the selected model")]
    LocationNotSelected(usize),

    #[error("empty or degenerate truncation interval [{vlo}, {vup}]")]
    EmptyTruncation { vlo: f64, vup: f64 },

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
