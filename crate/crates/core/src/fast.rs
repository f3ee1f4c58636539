//! Two-threshold fusion: a stationary rule that tests only the current
//! sensor messages, with the threshold pair selected by the previous global
//! decision. Parameters are fixed offline; each online decision costs one
//! pass over the message bits.

use rand::Rng;
use serde::Serialize;

use crate::detection::{Alpha, Fleet, FleetProducts, OperatingPoint};
use crate::error::{Error, Result};
use crate::np::{OutcomeTable, RandomizedThreshold, TIE_TOL};
use crate::trajectory::{FusionTrajectory, StageRecord};

/// Which threshold the first stage uses, i.e. the assumed previous decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InitialThreshold {
    T0,
    T1,
}

impl InitialThreshold {
    pub fn bit(self) -> u8 {
        match self {
            InitialThreshold::T0 => 0,
            InitialThreshold::T1 => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FastFusionParams {
    /// Test applied after a 0 decision.
    pub thr0: RandomizedThreshold,
    /// Test applied after a 1 decision.
    pub thr1: RandomizedThreshold,
    pub p00: f64,
    pub q00: f64,
    pub p01: f64,
    pub q01: f64,
    /// Right end of the interval of `q00` values that reach the optimal limit.
    pub q_star: f64,
    pub alpha: f64,
    /// False when built by [`FastFusionParams::sweep_design`] outside `(0, q_star]`.
    pub optimal: bool,
    /// `1 - p01` and `1 - q01`, kept separately because both can be tiny.
    #[serde(skip)]
    complements01: (f64, f64),
    #[serde(skip)]
    logs: Vec<[f64; 2]>,
}

/// `min(prod q, alpha / (1 - alpha) * prod (1 - q))`.
pub fn q_star(prods: &FleetProducts, alpha: f64) -> f64 {
    prods.false_alarm.min(alpha / (1.0 - alpha) * prods.correct_reject)
}

/// The paired level on the constraint line `q01 = 1 + q00 - q00 / alpha`.
pub fn paired_level(q00: f64, alpha: f64) -> f64 {
    1.0 + q00 - q00 / alpha
}

impl FastFusionParams {
    /// Optimal design with `q00 = q_star`.
    pub fn design(fleet: &Fleet, alpha: Alpha) -> Result<Self> {
        let q_star = q_star(&fleet.products(), alpha.value());
        Self::design_with_q00(fleet, alpha, q_star)
    }

    /// Optimal design at a chosen `q00` in `(0, q_star]`: the first test sits
    /// on the leftmost fused ROC segment and the second on the rightmost.
    pub fn design_with_q00(fleet: &Fleet, alpha: Alpha, q00: f64) -> Result<Self> {
        if !(q00 > 0.0 && q00 < 1.0) {
            return Err(Error::InvalidQ00(q00));
        }
        let a = alpha.value();
        let prods = fleet.products();
        let q_star = q_star(&prods, a);
        if q00 > q_star {
            return Err(Error::SuboptimalQ00 { q00, q_star });
        }
        let table = OutcomeTable::for_fleet(fleet)?;
        let atoms = table.atoms();
        let lambda0 = (q00 / prods.false_alarm).min(1.0);
        let reject1 = ((1.0 - a) * q00 / (a * prods.correct_reject)).clamp(0.0, 1.0);
        let lambda1 = 1.0 - reject1;
        let thr0 = RandomizedThreshold { log_t: atoms[atoms.len() - 1].log_lr, lambda: lambda0 };
        let thr1 = RandomizedThreshold { log_t: atoms[0].log_lr, lambda: lambda1 };
        Ok(Self {
            thr0,
            thr1,
            p00: lambda0 * prods.detect,
            q00,
            p01: 1.0 - reject1 * prods.miss,
            q01: paired_level(q00, a),
            q_star,
            alpha: a,
            optimal: true,
            complements01: (reject1 * prods.miss, reject1 * prods.correct_reject),
            logs: log_table(fleet),
        })
    }

    /// General design for any `q00` whose paired level lies in `[0, 1]`. Both
    /// tests are placed with the ordinary N-P solver, so segments other than
    /// the two end ones are allowed.
    pub fn sweep_design(fleet: &Fleet, alpha: Alpha, q00: f64) -> Result<Self> {
        if !(q00 > 0.0 && q00 < 1.0) {
            return Err(Error::InvalidQ00(q00));
        }
        let a = alpha.value();
        let q01 = paired_level(q00, a);
        if !(0.0..=1.0).contains(&q01) {
            return Err(Error::InfeasibleQ00 { q00, q01 });
        }
        let q_star = q_star(&fleet.products(), a);
        let table = OutcomeTable::for_fleet(fleet)?;
        let thr0 = table.solve_level(q00);
        let thr1 = table.solve_level(q01);
        let pt0 = table.operating_point(&thr0);
        let pt1 = table.operating_point(&thr1);
        Ok(Self {
            thr0,
            thr1,
            p00: pt0.p0,
            q00: pt0.q0,
            p01: pt1.p0,
            q01: pt1.q0,
            q_star,
            alpha: a,
            optimal: q00 <= q_star,
            complements01: (1.0 - pt1.p0, 1.0 - pt1.q0),
            logs: log_table(fleet),
        })
    }

    /// Slope of the detection recursion, `p01 - p00`.
    pub fn contraction(&self) -> f64 {
        self.p01 - self.p00
    }

    /// Slope of the false-alarm recursion, `q01 - q00`.
    pub fn false_alarm_contraction(&self) -> f64 {
        self.q01 - self.q00
    }

    pub fn asymptote(&self) -> OperatingPoint {
        let (miss01, reject01) = self.complements01;
        OperatingPoint { q0: self.q00 / (reject01 + self.q00), p0: self.p00 / (miss01 + self.p00) }
    }

    /// Analytic per-stage `(q0, p0)` over `stages` stages.
    pub fn trajectory(&self, stages: usize, init: InitialThreshold) -> FusionTrajectory {
        let (dp, dq) = (self.contraction(), self.false_alarm_contraction());
        let (mut p, mut q) = match init {
            InitialThreshold::T0 => (self.p00, self.q00),
            InitialThreshold::T1 => (self.p01, self.q01),
        };
        let mut out = Vec::with_capacity(stages);
        for k in 1..=stages {
            if k > 1 {
                p = dp * p + self.p00;
                q = dq * q + self.q00;
            }
            out.push(StageRecord { stage: k, threshold: None, point: OperatingPoint { q0: q, p0: p } });
        }
        FusionTrajectory { stages: out, plateau: None }
    }

    /// Closed-form false alarm at stage `k` when the first stage uses `thr0`.
    pub fn transient_false_alarm(&self, k: usize) -> f64 {
        let d = self.false_alarm_contraction();
        self.q00 * (1.0 - d.powi(k as i32)) / (1.0 - d)
    }

    pub fn threshold(&self, prev: u8) -> &RandomizedThreshold {
        if prev == 0 {
            &self.thr0
        } else {
            &self.thr1
        }
    }

    pub fn n_sensors(&self) -> usize {
        self.logs.len()
    }

    /// Online decision given the current messages and the previous decision.
    pub fn decide<R: Rng + ?Sized>(&self, bits: &[u8], prev: u8, rng: &mut R) -> Result<u8> {
        self.decide_counted(bits, prev, rng).map(|(bit, _)| bit)
    }

    /// Same as [`FastFusionParams::decide`], also returning the number of
    /// elementary operations spent: one lookup-and-add per bit, one threshold
    /// selection, at most two comparisons and one draw.
    pub fn decide_counted<R: Rng + ?Sized>(&self, bits: &[u8], prev: u8, rng: &mut R) -> Result<(u8, usize)> {
        if bits.len() != self.logs.len() {
            return Err(Error::LengthMismatch { expected: self.logs.len(), got: bits.len() });
        }
        let mut ops = 0;
        let mut log_lr = 0.0;
        for (&b, l) in bits.iter().zip(&self.logs) {
            log_lr += l[(b != 0) as usize];
            ops += 1;
        }
        let thr = self.threshold(prev);
        ops += 1;
        let d = log_lr - thr.log_t;
        ops += 1;
        let bit = if d > TIE_TOL {
            1
        } else {
            ops += 1;
            if d < -TIE_TOL {
                0
            } else {
                ops += 1;
                (rng.random::<f64>() < thr.lambda) as u8
            }
        };
        Ok((bit, ops))
    }

    /// Values a deployment needs to run the rule without the fleet model.
    pub fn export(&self) -> FastFusionExport {
        FastFusionExport {
            alpha: self.alpha,
            log_t0: self.thr0.log_t,
            t0: self.thr0.threshold(),
            lambda0: self.thr0.lambda,
            log_t1: self.thr1.log_t,
            t1: self.thr1.threshold(),
            lambda1: self.thr1.lambda,
            q00: self.q00,
            p00: self.p00,
            q01: self.q01,
            p01: self.p01,
            q_star: self.q_star,
            sensor_log_ratios: self.logs.clone(),
        }
    }
}

fn log_table(fleet: &Fleet) -> Vec<[f64; 2]> {
    fleet.sensors().iter().map(|s| s.log_ratios()).collect()
}

/// Flat, serializable view of a designed rule. `t0`/`t1` are likelihood-ratio
/// thresholds; `log_t0`/`log_t1` their natural logs. `sensor_log_ratios[i]`
/// holds the log-likelihood contribution of a 0 and a 1 from sensor `i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FastFusionExport {
    pub alpha: f64,
    pub log_t0: f64,
    pub t0: f64,
    pub lambda0: f64,
    pub log_t1: f64,
    pub t1: f64,
    pub lambda1: f64,
    pub q00: f64,
    pub p00: f64,
    pub q01: f64,
    pub p01: f64,
    pub q_star: f64,
    pub sensor_log_ratios: Vec<[f64; 2]>,
}

/// One-bit state machine around [`FastFusionParams`].
#[derive(Debug, Clone)]
pub struct FastFusionCenter {
    params: FastFusionParams,
    prev: u8,
}

impl FastFusionCenter {
    pub fn new(params: FastFusionParams, init: InitialThreshold) -> Self {
        Self { params, prev: init.bit() }
    }

    pub fn previous(&self) -> u8 {
        self.prev
    }

    pub fn step<R: Rng + ?Sized>(&mut self, bits: &[u8], rng: &mut R) -> Result<u8> {
        self.prev = self.params.decide(bits, self.prev, rng)?;
        Ok(self.prev)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RateCase {
    /// `Q4 > 1`: the first test's threshold atom is the top atom alone.
    LeftEnd,
    /// `Q4 <= 1`.
    RightEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateConstants {
    pub q3: f64,
    pub q4: f64,
    /// Asymptotic contraction factor of the detection error.
    pub a: f64,
    /// Offset of the limiting affine recursion `p(k) = a p(k-1) + b`.
    pub b: f64,
    pub case: RateCase,
}

impl RateConstants {
    pub fn limit(&self) -> f64 {
        self.b / (1.0 - self.a)
    }
}

/// Contraction constants shared by both multi-stage rules.
pub fn convergence_rate(fleet: &Fleet, alpha: Alpha) -> RateConstants {
    let a = alpha.value();
    let prods = fleet.products();
    let q3 = (1.0 - a) / (a * prods.odds());
    let q4 = a * prods.correct_reject / ((1.0 - a) * prods.false_alarm);
    if q4 > 1.0 {
        RateConstants { q3, q4, a: 1.0 - (1.0 + q3) * prods.detect, b: prods.detect, case: RateCase::LeftEnd }
    } else {
        RateConstants { q3, q4, a: 1.0 - (1.0 + 1.0 / q3) * prods.miss, b: q4 * prods.detect, case: RateCase::RightEnd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub q00: f64,
    pub p_infinity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    pub skipped: Vec<(f64, Error)>,
}

/// Limit detection probability of the general design across `grid`.
pub fn sweep_q00(fleet: &Fleet, alpha: Alpha, grid: &[f64]) -> SweepReport {
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for &q00 in grid {
        match FastFusionParams::sweep_design(fleet, alpha, q00) {
            Ok(params) => points.push(SweepPoint { q00, p_infinity: params.asymptote().p0 }),
            Err(e) => skipped.push((q00, e)),
        }
    }
    SweepReport { points, skipped }
}
