//! Shared domain types: hypotheses, binary sensor profiles, fleets and the
//! false-alarm bound.
//!
//! A binary sensor is fully described by its detection probability `p` and
//! false-alarm probability `q`. Its informativeness is summarized by the odds
//! ratio `R = p/(1-p) * (1-q)/q`; `R > 1` means the sensor is productive,
//! `R = 1` blind.

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Hypothesis {
    /// Event absent.
    H0,
    /// Event present.
    H1,
}

impl Hypothesis {
    pub const BOTH: [Hypothesis; 2] = [Hypothesis::H0, Hypothesis::H1];

    pub fn index(self) -> u8 {
        match self {
            Hypothesis::H0 => 0,
            Hypothesis::H1 => 1,
        }
    }
}

impl Serialize for Hypothesis {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.index())
    }
}

impl<'de> Deserialize<'de> for Hypothesis {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        match u8::deserialize(deserializer)? {
            0 => Ok(Hypothesis::H0),
            1 => Ok(Hypothesis::H1),
            other => Err(serde::de::Error::custom(format!("hypothesis must be 0 or 1, got {other}"))),
        }
    }
}

fn interior(what: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(Error::InvalidProbability { what, value })
    }
}

/// Detection/false-alarm pair of one binary sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile")]
pub struct SensorProfile {
    p: f64,
    q: f64,
}

#[derive(Deserialize)]
struct RawProfile {
    p: f64,
    q: f64,
}

impl TryFrom<RawProfile> for SensorProfile {
    type Error = Error;

    fn try_from(raw: RawProfile) -> Result<Self> {
        SensorProfile::new(raw.p, raw.q)
    }
}

impl SensorProfile {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        Ok(Self { p: interior("detection probability p", p)?, q: interior("false-alarm probability q", q)? })
    }

    /// The stage-1 memory of the oracle rule: a blind virtual sensor.
    pub fn blind() -> Self {
        Self { p: 0.5, q: 0.5 }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn odds_ratio(&self) -> f64 {
        self.p / (1.0 - self.p) * (1.0 - self.q) / self.q
    }

    pub fn is_productive(&self) -> bool {
        self.p > self.q
    }

    /// Flips a counterproductive sensor's output so that `p > q` holds.
    /// Returns the (possibly flipped) profile and whether a flip happened.
    pub fn normalize(&self) -> Result<(SensorProfile, bool)> {
        if self.p > self.q {
            Ok((*self, false))
        } else if self.p < self.q {
            Ok((SensorProfile { p: 1.0 - self.p, q: 1.0 - self.q }, true))
        } else {
            Err(Error::BlindSensor { index: 0, p: self.p })
        }
    }

    /// `[ln((1-p)/(1-q)), ln(p/q)]`: the log-likelihood-ratio contribution of
    /// a 0 and a 1 message from this sensor.
    pub fn log_ratios(&self) -> [f64; 2] {
        [((1.0 - self.p) / (1.0 - self.q)).ln(), (self.p / self.q).ln()]
    }
}

pub fn odds_ratio(sensor: &SensorProfile) -> f64 {
    sensor.odds_ratio()
}

pub fn normalize_sensor(sensor: &SensorProfile) -> Result<(SensorProfile, bool)> {
    sensor.normalize()
}

/// A non-empty set of productive sensors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fleet {
    sensors: Vec<SensorProfile>,
}

/// Products over the fleet that recur in every closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FleetProducts {
    /// `Π p_i`
    pub detect: f64,
    /// `Π q_i`
    pub false_alarm: f64,
    /// `Π (1 - p_i)`
    pub miss: f64,
    /// `Π (1 - q_i)`
    pub correct_reject: f64,
}

impl FleetProducts {
    /// `Π R_i`
    pub fn odds(&self) -> f64 {
        self.detect / self.miss * self.correct_reject / self.false_alarm
    }

    /// Slope of the leftmost fused ROC segment, `Π p_i / Π q_i`.
    pub fn first_slope(&self) -> f64 {
        self.detect / self.false_alarm
    }

    /// Slope of the rightmost fused ROC segment, `Π (1-p_i) / Π (1-q_i)`.
    pub fn last_slope(&self) -> f64 {
        self.miss / self.correct_reject
    }
}

impl Fleet {
    pub fn new(sensors: Vec<SensorProfile>) -> Result<Self> {
        if sensors.is_empty() {
            return Err(Error::EmptyFleet);
        }
        for (index, s) in sensors.iter().enumerate() {
            if s.p == s.q {
                return Err(Error::BlindSensor { index, p: s.p });
            }
            if s.p < s.q {
                return Err(Error::CounterproductiveSensor { index, p: s.p, q: s.q });
            }
        }
        Ok(Self { sensors })
    }

    pub fn homogeneous(sensor: SensorProfile, n: usize) -> Result<Self> {
        Self::new(vec![sensor; n])
    }

    /// Builds a fleet after flipping every counterproductive sensor. The
    /// returned flags record which sensors were flipped.
    pub fn normalized(sensors: Vec<SensorProfile>) -> Result<(Self, Vec<bool>)> {
        let mut flipped = Vec::with_capacity(sensors.len());
        let mut out = Vec::with_capacity(sensors.len());
        for (index, s) in sensors.iter().enumerate() {
            let (s, f) = s.normalize().map_err(|_| Error::BlindSensor { index, p: s.p })?;
            out.push(s);
            flipped.push(f);
        }
        Ok((Self::new(out)?, flipped))
    }

    pub fn sensors(&self) -> &[SensorProfile] {
        &self.sensors
    }

    pub fn len(&self) -> usize {
        self.sensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensors.is_empty()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.sensors.windows(2).all(|w| w[0] == w[1])
    }

    pub fn products(&self) -> FleetProducts {
        let mut out = FleetProducts { detect: 1.0, false_alarm: 1.0, miss: 1.0, correct_reject: 1.0 };
        for s in &self.sensors {
            out.detect *= s.p;
            out.false_alarm *= s.q;
            out.miss *= 1.0 - s.p;
            out.correct_reject *= 1.0 - s.q;
        }
        out
    }

    pub fn odds_product(&self) -> f64 {
        self.sensors.iter().map(SensorProfile::odds_ratio).product()
    }
}

/// A (false-alarm, detection) pair, the coordinates of an ROC point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub q0: f64,
    pub p0: f64,
}

impl OperatingPoint {
    pub fn new(q0: f64, p0: f64) -> Self {
        Self { q0, p0 }
    }
}

/// False-alarm bound, strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidAlpha(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Alpha {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Alpha::new(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn odds_ratio_examples() {
        let blind = SensorProfile::new(0.5, 0.5).unwrap();
        assert_eq!(blind.odds_ratio(), 1.0);

        // 0.74/0.26 * 0.84/0.16 and 0.61/0.39 * 0.61/0.39, evaluated by hand.
        let s1 = SensorProfile::new(0.74, 0.16).unwrap();
        assert!(close(s1.odds_ratio(), 14.942_307_692_307_69, 1e-9));
        let s = SensorProfile::new(0.61, 0.39).unwrap();
        assert!(close(s.odds_ratio(), 2.446_416_831_032_215, 1e-9));
    }

    #[test]
    fn normalize_examples() {
        let s = SensorProfile::new(0.67, 0.33).unwrap();
        assert_eq!(s.normalize().unwrap(), (s, false));

        let (flipped, f) = SensorProfile::new(0.33, 0.67).unwrap().normalize().unwrap();
        assert!(f);
        assert!(close(flipped.p(), 0.67, 1e-15) && close(flipped.q(), 0.33, 1e-15));

        assert!(matches!(SensorProfile::new(0.5, 0.5).unwrap().normalize(), Err(Error::BlindSensor { .. })));
    }

    #[test]
    fn profile_rejects_boundary_values() {
        for (p, q) in [(0.0, 0.3), (1.0, 0.3), (0.7, 0.0), (0.7, 1.0), (f64::NAN, 0.2)] {
            assert!(SensorProfile::new(p, q).is_err(), "({p}, {q}) accepted");
        }
    }

    #[test]
    fn alpha_rejects_boundaries() {
        assert!(Alpha::new(0.0).is_err());
        assert!(Alpha::new(1.0).is_err());
        assert!(Alpha::new(f64::NAN).is_err());
        assert_eq!(Alpha::new(0.39).unwrap().value(), 0.39);
    }

    #[test]
    fn fleet_validation() {
        assert_eq!(Fleet::new(vec![]), Err(Error::EmptyFleet));
        let bad = Fleet::new(vec![SensorProfile::new(0.7, 0.2).unwrap(), SensorProfile::new(0.2, 0.7).unwrap()]);
        assert!(matches!(bad, Err(Error::CounterproductiveSensor { index: 1, .. })));
        let blind = Fleet::new(vec![SensorProfile::new(0.4, 0.4).unwrap()]);
        assert!(matches!(blind, Err(Error::BlindSensor { index: 0, .. })));
        assert!(blind.unwrap_err().is_infeasibility());

        let (fleet, flips) =
            Fleet::normalized(vec![SensorProfile::new(0.7, 0.2).unwrap(), SensorProfile::new(0.2, 0.7).unwrap()])
                .unwrap();
        assert_eq!(flips, vec![false, true]);
        assert!(fleet.sensors().iter().all(SensorProfile::is_productive));
    }

    #[test]
    fn hypothesis_indices() {
        assert_eq!(Hypothesis::H0.index(), 0);
        assert_eq!(Hypothesis::H1.index(), 1);
        assert_eq!(Hypothesis::BOTH.len(), 2);
    }

    proptest! {
        #[test]
        fn normalized_sensor_is_productive(p in 0.001f64..0.999, q in 0.001f64..0.999) {
            prop_assume!(p != q);
            let (s, _) = SensorProfile::new(p, q).unwrap().normalize().unwrap();
            prop_assert!(s.odds_ratio() > 1.0);
        }

        #[test]
        fn complement_inverts_odds(p in 0.001f64..0.999, q in 0.001f64..0.999) {
            let a = SensorProfile::new(p, q).unwrap().odds_ratio();
            let b = SensorProfile::new(1.0 - p, 1.0 - q).unwrap().odds_ratio();
            prop_assert!((a * b - 1.0).abs() <= 1e-12);
        }
    }
}
