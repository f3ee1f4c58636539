//! Gaussian sensor model and seeded Monte Carlo execution of the fusion rules.
//!
//! Randomness: trial `t` under hypothesis `h` draws from
//! `ChaCha8Rng::seed_from_u64(seed)` switched to stream `2 t + h`. Sensor bits
//! and the rule's tie-breaking draws come from that one stream, in stage
//! order, sensors first. Counts are summed as integers, so the report does
//! not depend on how trials are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::detection::{Alpha, Fleet, Hypothesis, OperatingPoint, SensorProfile};
use crate::error::{Error, Result};
use crate::fast::{FastFusionParams, InitialThreshold};
use crate::np::{OutcomeTable, RandomizedThreshold};
use crate::oracle::{randomized_compare, OracleFusion, OracleSchedule};
use crate::trajectory::{FusionTrajectory, StageRecord};

/// Standard normal upper tail, `P(Z > x)`.
pub fn normal_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Sensor observing `A + w` under H1 and `w` under H0 with `w ~ N(0, sigma2)`,
/// reporting 1 when the observation exceeds `y_star`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct GaussianSensorModel {
    pub amplitude: f64,
    pub sigma2: f64,
    pub y_star: f64,
}

impl GaussianSensorModel {
    pub fn new(amplitude: f64, sigma2: f64, y_star: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidModel(format!("noise variance must be positive, got {sigma2}")));
        }
        if !amplitude.is_finite() || !y_star.is_finite() {
            return Err(Error::InvalidModel("amplitude and threshold must be finite".into()));
        }
        Ok(Self { amplitude, sigma2, y_star })
    }

    /// Model whose SNR `10 log10(A / sigma2)` equals `snr_db`.
    pub fn from_snr(amplitude: f64, snr_db: f64, y_star: f64) -> Result<Self> {
        if amplitude.is_nan() || amplitude <= 0.0 {
            return Err(Error::InvalidModel(format!("SNR needs a positive amplitude, got {amplitude}")));
        }
        Self::new(amplitude, amplitude / 10f64.powf(snr_db / 10.0), y_star)
    }

    pub fn snr_db(&self) -> Result<f64> {
        if self.amplitude.is_nan() || self.amplitude <= 0.0 {
            return Err(Error::InvalidModel(format!("SNR needs a positive amplitude, got {}", self.amplitude)));
        }
        Ok(10.0 * (self.amplitude / self.sigma2).log10())
    }

    pub fn profile(&self) -> Result<SensorProfile> {
        let sigma = self.sigma2.sqrt();
        SensorProfile::new(normal_tail((self.y_star - self.amplitude) / sigma), normal_tail(self.y_star / sigma))
    }
}

pub fn model_profile(m: &GaussianSensorModel) -> Result<SensorProfile> {
    m.profile()
}

/// A multi-stage fusion rule that can be simulated.
pub trait FusionRule: Sync {
    fn n_sensors(&self) -> usize;

    /// Decision assumed before stage 1.
    fn initial_bit(&self) -> u8;

    fn decide<R: Rng + ?Sized>(&self, stage_idx: usize, bits: &[u8], prev: u8, rng: &mut R) -> Result<u8>;

    fn analytic(&self, stages: usize) -> Result<FusionTrajectory>;
}

impl FusionRule for OracleSchedule {
    fn n_sensors(&self) -> usize {
        self.sensor_count()
    }

    fn initial_bit(&self) -> u8 {
        0
    }

    fn decide<R: Rng + ?Sized>(&self, stage_idx: usize, bits: &[u8], prev: u8, rng: &mut R) -> Result<u8> {
        OracleSchedule::decide(self, stage_idx, bits, prev, rng)
    }

    fn analytic(&self, stages: usize) -> Result<FusionTrajectory> {
        let stages = stages.min(self.stages());
        Ok(FusionTrajectory {
            stages: (0..stages)
                .map(|i| StageRecord { stage: i + 1, threshold: Some(self.rule(i).threshold), point: self.points()[i] })
                .collect(),
            plateau: None,
        })
    }
}

/// The two-threshold rule with a fixed initial threshold.
#[derive(Debug, Clone)]
pub struct FastRule {
    pub params: FastFusionParams,
    pub init: InitialThreshold,
}

impl FusionRule for FastRule {
    fn n_sensors(&self) -> usize {
        self.params.n_sensors()
    }

    fn initial_bit(&self) -> u8 {
        self.init.bit()
    }

    fn decide<R: Rng + ?Sized>(&self, _: usize, bits: &[u8], prev: u8, rng: &mut R) -> Result<u8> {
        self.params.decide(bits, prev, rng)
    }

    fn analytic(&self, stages: usize) -> Result<FusionTrajectory> {
        Ok(self.params.trajectory(stages, self.init))
    }
}

/// Single-stage N-P test repeated at every stage, ignoring the memory bit.
#[derive(Debug, Clone)]
pub struct MemorylessRule {
    threshold: RandomizedThreshold,
    point: OperatingPoint,
    logs: Vec<[f64; 2]>,
}

impl MemorylessRule {
    pub fn new(fleet: &Fleet, alpha: Alpha) -> Result<Self> {
        let table = OutcomeTable::for_fleet(fleet)?;
        let threshold = table.solve_threshold(alpha);
        Ok(Self {
            threshold,
            point: table.operating_point(&threshold),
            logs: fleet.sensors().iter().map(|s| s.log_ratios()).collect(),
        })
    }

    pub fn point(&self) -> OperatingPoint {
        self.point
    }
}

impl FusionRule for MemorylessRule {
    fn n_sensors(&self) -> usize {
        self.logs.len()
    }

    fn initial_bit(&self) -> u8 {
        0
    }

    fn decide<R: Rng + ?Sized>(&self, _: usize, bits: &[u8], _: u8, rng: &mut R) -> Result<u8> {
        if bits.len() != self.logs.len() {
            return Err(Error::LengthMismatch { expected: self.logs.len(), got: bits.len() });
        }
        let log_lr: f64 = bits.iter().zip(&self.logs).map(|(&b, l)| l[(b != 0) as usize]).sum();
        Ok(randomized_compare(log_lr, &self.threshold, rng))
    }

    fn analytic(&self, stages: usize) -> Result<FusionTrajectory> {
        Ok(FusionTrajectory {
            stages: (1..=stages)
                .map(|k| StageRecord { stage: k, threshold: Some(self.threshold), point: self.point })
                .collect(),
            plateau: None,
        })
    }
}

/// Builds the simulated rule for an algorithm name.
#[derive(Debug, Clone)]
pub enum AnyRule {
    Oracle(OracleSchedule),
    Fast(FastRule),
    Memoryless(MemorylessRule),
}

impl AnyRule {
    pub fn oracle(fleet: &Fleet, alpha: Alpha, stages: usize) -> Result<Self> {
        Ok(Self::Oracle(OracleFusion::new(fleet.clone(), alpha)?.schedule(stages)?))
    }

    pub fn fast(fleet: &Fleet, alpha: Alpha, init: InitialThreshold) -> Result<Self> {
        Ok(Self::Fast(FastRule { params: FastFusionParams::design(fleet, alpha)?, init }))
    }

    pub fn memoryless(fleet: &Fleet, alpha: Alpha) -> Result<Self> {
        Ok(Self::Memoryless(MemorylessRule::new(fleet, alpha)?))
    }
}

impl FusionRule for AnyRule {
    fn n_sensors(&self) -> usize {
        match self {
            AnyRule::Oracle(r) => r.n_sensors(),
            AnyRule::Fast(r) => r.n_sensors(),
            AnyRule::Memoryless(r) => r.n_sensors(),
        }
    }

    fn initial_bit(&self) -> u8 {
        match self {
            AnyRule::Oracle(r) => r.initial_bit(),
            AnyRule::Fast(r) => r.initial_bit(),
            AnyRule::Memoryless(r) => r.initial_bit(),
        }
    }

    fn decide<R: Rng + ?Sized>(&self, stage_idx: usize, bits: &[u8], prev: u8, rng: &mut R) -> Result<u8> {
        match self {
            AnyRule::Oracle(r) => FusionRule::decide(r, stage_idx, bits, prev, rng),
            AnyRule::Fast(r) => r.decide(stage_idx, bits, prev, rng),
            AnyRule::Memoryless(r) => r.decide(stage_idx, bits, prev, rng),
        }
    }

    fn analytic(&self, stages: usize) -> Result<FusionTrajectory> {
        match self {
            AnyRule::Oracle(r) => r.analytic(stages),
            AnyRule::Fast(r) => r.analytic(stages),
            AnyRule::Memoryless(r) => r.analytic(stages),
        }
    }
}

/// Random stream of trial `trial` under `hypothesis`.
pub fn trial_rng(seed: u64, hypothesis: Hypothesis, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * trial + hypothesis.index() as u64);
    rng
}

fn run_with<F: FusionRule + ?Sized, R: Rng>(
    rule: &F,
    fleet: &Fleet,
    hypothesis: Hypothesis,
    stages: usize,
    rng: &mut R,
    mut on_bit: impl FnMut(usize, u8),
) -> Result<()> {
    let probs: Vec<f64> = fleet
        .sensors()
        .iter()
        .map(|s| match hypothesis {
            Hypothesis::H0 => s.q(),
            Hypothesis::H1 => s.p(),
        })
        .collect();
    let mut bits = vec![0u8; probs.len()];
    let mut prev = rule.initial_bit();
    for k in 0..stages {
        for (b, &pr) in bits.iter_mut().zip(&probs) {
            *b = (rng.random::<f64>() < pr) as u8;
        }
        prev = rule.decide(k, &bits, prev, rng)?;
        on_bit(k, prev);
    }
    Ok(())
}

/// Global decisions of one run: trial 0 of `seed` under `hypothesis`.
pub fn simulate_run<F: FusionRule + ?Sized>(
    rule: &F,
    fleet: &Fleet,
    hypothesis: Hypothesis,
    stages: usize,
    seed: u64,
) -> Result<Vec<u8>> {
    check_counts(stages, 1)?;
    let mut out = Vec::with_capacity(stages);
    run_with(rule, fleet, hypothesis, stages, &mut trial_rng(seed, hypothesis, 0), |_, b| out.push(b))?;
    Ok(out)
}

fn check_counts(stages: usize, trials: u64) -> Result<()> {
    if stages == 0 {
        return Err(Error::ZeroCount { what: "stage count" });
    }
    if trials == 0 {
        return Err(Error::ZeroCount { what: "trial count" });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageEstimate {
    pub stage: usize,
    /// Trials declaring 1 under H1.
    pub detections: u64,
    /// Trials declaring 1 under H0.
    pub false_alarms: u64,
    pub p_hat: f64,
    pub q_hat: f64,
    pub p_half_width: f64,
    pub q_half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub trials: u64,
    pub seed: u64,
    pub stages: Vec<StageEstimate>,
}

/// Three-sigma binomial half-width for an observed frequency.
pub fn three_sigma(freq: f64, trials: u64) -> f64 {
    3.0 * (freq * (1.0 - freq) / trials as f64).sqrt()
}

fn count_ones<F: FusionRule + ?Sized>(
    rule: &F,
    fleet: &Fleet,
    hypothesis: Hypothesis,
    stages: usize,
    trials: u64,
    seed: u64,
) -> Result<Vec<u64>> {
    (0..trials)
        .into_par_iter()
        .try_fold(
            || vec![0u64; stages],
            |mut counts, t| {
                let mut rng = trial_rng(seed, hypothesis, t);
                run_with(rule, fleet, hypothesis, stages, &mut rng, |k, b| counts[k] += b as u64)?;
                Ok(counts)
            },
        )
        .try_reduce(
            || vec![0u64; stages],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )
}

/// Runs `trials` independent runs per hypothesis and aggregates per-stage
/// decision frequencies.
pub fn monte_carlo<F: FusionRule + ?Sized>(
    rule: &F,
    fleet: &Fleet,
    stages: usize,
    trials: u64,
    seed: u64,
) -> Result<MonteCarloReport> {
    check_counts(stages, trials)?;
    if rule.n_sensors() != fleet.len() {
        return Err(Error::LengthMismatch { expected: rule.n_sensors(), got: fleet.len() });
    }
    let h1 = count_ones(rule, fleet, Hypothesis::H1, stages, trials, seed)?;
    let h0 = count_ones(rule, fleet, Hypothesis::H0, stages, trials, seed)?;
    let n = trials as f64;
    let stages = h1
        .into_iter()
        .zip(h0)
        .enumerate()
        .map(|(k, (d, f))| {
            let (p_hat, q_hat) = (d as f64 / n, f as f64 / n);
            StageEstimate {
                stage: k + 1,
                detections: d,
                false_alarms: f,
                p_hat,
                q_hat,
                p_half_width: three_sigma(p_hat, trials),
                q_half_width: three_sigma(q_hat, trials),
            }
        })
        .collect();
    Ok(MonteCarloReport { trials, seed, stages })
}
