use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} must lie strictly inside (0, 1), got {value}")]
    InvalidProbability { what: &'static str, value: f64 },

    #[error("false-alarm bound alpha must lie strictly inside (0, 1), got {0}")]
    InvalidAlpha(f64),

    #[error("sensor {index} is blind (p = q = {p}); flipping its output cannot make it productive")]
    BlindSensor { index: usize, p: f64 },

    #[error("sensor {index} is counterproductive (p = {p} < q = {q}); normalize the fleet first")]
    CounterproductiveSensor { index: usize, p: f64, q: f64 },

    #[error("a fleet needs at least one sensor")]
    EmptyFleet,

    #[error("outcome enumeration supports at most {max} sensors, got {n}")]
    TooManySensors { n: usize, max: usize },

    #[error("product of odds ratios is 1; the fleet carries no information")]
    BlindFleet,

    #[error("message vector has {got} bits, fleet has {expected} sensors")]
    LengthMismatch { expected: usize, got: usize },

    #[error("q00 must lie strictly inside (0, 1), got {0}")]
    InvalidQ00(f64),

    #[error("q00 = {q00} is infeasible for this alpha: the paired q01 = {q01} falls outside [0, 1]")]
    InfeasibleQ00 { q00: f64, q01: f64 },

    #[error("q00 = {q00} exceeds the optimal range (0, {q_star}]; use a sweep design to explore it")]
    SuboptimalQ00 { q00: f64, q_star: f64 },

    #[error("invalid sensor model: {0}")]
    InvalidModel(String),

    #[error("{what} must be at least 1")]
    ZeroCount { what: &'static str },
}

impl Error {
    /// True for errors that describe a well-formed but numerically unusable
    /// setup (non-productive sensors, blind fleets, infeasible design points),
    /// as opposed to malformed input.
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            Error::BlindSensor { .. }
                | Error::CounterproductiveSensor { .. }
                | Error::BlindFleet
                | Error::InfeasibleQ00 { .. }
                | Error::SuboptimalQ00 { .. }
        )
    }
}
