use serde::Serialize;

use crate::detection::OperatingPoint;
use crate::np::RandomizedThreshold;

/// One stage of an analytic fusion trajectory. The threshold is `None` for
/// rules whose test depends on the previous random decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageRecord {
    pub stage: usize,
    pub threshold: Option<RandomizedThreshold>,
    pub point: OperatingPoint,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct FusionTrajectory {
    pub stages: Vec<StageRecord>,
    /// Stage at which an early-stopping run detected that the detection
    /// probability had stopped moving.
    pub plateau: Option<usize>,
}

impl FusionTrajectory {
    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn last_point(&self) -> Option<OperatingPoint> {
        self.stages.last().map(|s| s.point)
    }

    pub fn detection(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.point.p0).collect()
    }

    pub fn false_alarm(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.point.q0).collect()
    }
}
