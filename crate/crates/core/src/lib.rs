//! Multi-stage distributed binary detection with a one-bit-memory fusion
//! center under a false-alarm constraint.
//!
//! * [`detection`]: sensor profiles, fleets, operating points.
//! * [`np`]: single-stage optimal randomized fusion and fused ROC geometry.
//! * [`oracle`]: per-stage exact fusion over sensors plus the memory bit.
//! * [`fast`]: the two-threshold stationary rule and its convergence rate.
//! * [`sim`]: Gaussian sensor model and seeded Monte Carlo.

pub mod detection;
mod error;
pub mod fast;
pub mod np;
pub mod oracle;
pub mod real;
pub mod sim;
pub mod trajectory;

pub use detection::{Alpha, Fleet, Hypothesis, OperatingPoint, SensorProfile};
pub use error::{Error, Result};
pub use fast::{FastFusionParams, InitialThreshold, RateConstants};
pub use np::{OutcomeAtom, OutcomeTable, RandomizedThreshold, RocCurve};
pub use oracle::OracleFusion;
pub use trajectory::{FusionTrajectory, StageRecord};
