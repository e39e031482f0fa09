use thiserror::Error;

/// Errors raised by the simulation and control library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Euler pitch too close to ±π/2 for an unambiguous conversion.
    #[error("degenerate Euler angles: pitch {pitch} rad is within 1e-6 of ±π/2")]
    DegenerateAngles { pitch: f64 },
    #[error("non-finite numeric input in {0}")]
    NumericInput(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("reference {reference:?} lies outside the flight envelope")]
    Envelope { reference: [f64; 3] },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("innovation covariance is singular (condition number {condition:e})")]
    SingularUpdate { condition: f64 },
    #[error("quadratic program is infeasible")]
    Infeasible,
    #[error("measurement stamp {stamp} precedes filter stamp {filter_stamp}")]
    StaleMeasurement { stamp: f64, filter_stamp: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
