//! Oracle multi-stage fusion: at every stage the fusion center runs an exact
//! N-P test over the sensor messages together with its own previous
//! decision, treating that decision as one more binary source whose profile
//! is the previous stage's `(p0, q0)`.
//!
//! Cross-memory ties are merged only when the likelihood ratios are exactly
//! equal. Near the limit two augmented atoms converge towards each other, and
//! merging them under the usual tolerance would change the stage test.

use rand::Rng;
use serde::Serialize;

use crate::detection::{Alpha, Fleet, OperatingPoint};
use crate::error::{Error, Result};
use crate::np::{
    extend_exact, solve_sorted, Extended, OutcomeAtom, OutcomeTable, RandomizedThreshold, Solution, TIE_TOL,
};
use crate::real::{DoubleDouble, Real};
use crate::trajectory::{FusionTrajectory, StageRecord};

/// Stopping rule of [`OracleFusion::run_until_plateau`].
pub const PLATEAU_TOL: f64 = 1e-14;

/// Profile of the fusion center's previous decision:
/// `p = P(prev = 1 | H1)`, `q = P(prev = 1 | H0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MemoryProfile {
    pub p: f64,
    pub q: f64,
}

impl MemoryProfile {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        for (what, v) in [("memory detection probability", p), ("memory false-alarm probability", q)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidProbability { what, value: v });
            }
        }
        Ok(Self { p, q })
    }

    pub fn odds_ratio(&self) -> f64 {
        self.p / (1.0 - self.p) * (1.0 - self.q) / self.q
    }

    fn log_ratios(&self) -> [f64; 2] {
        [((1.0 - self.p) / (1.0 - self.q)).ln(), (self.p / self.q).ln()]
    }
}

/// Stage-1 memory: a blind source, so the first stage equals the memoryless
/// test.
pub fn initial_memory() -> MemoryProfile {
    MemoryProfile { p: 0.5, q: 0.5 }
}

/// Limit detection probability `alpha R / (1 + alpha (R - 1))` for a fleet
/// with odds-ratio product `R`.
pub fn asymptotic_detection(odds_product: f64, alpha: f64) -> f64 {
    alpha * odds_product / (1.0 + alpha * (odds_product - 1.0))
}

pub fn oracle_asymptote(fleet: &Fleet, alpha: Alpha) -> f64 {
    asymptotic_detection(fleet.odds_product(), alpha.value())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleState {
    pub stage: usize,
    pub memory: MemoryProfile,
    pub threshold: RandomizedThreshold,
    pub point: OperatingPoint,
    /// Raw joint outcomes of sensors plus memory, `2^(n+1)`.
    pub outcome_count: u64,
    /// Atoms left after tie merging.
    pub atom_count: usize,
    /// Index of the threshold atom in ascending likelihood-ratio order.
    pub threshold_rank: usize,
}

/// Everything needed to apply one stage's test to a message vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRule {
    /// `positions[b][g]`: rank of fleet atom `g` paired with memory bit `b`.
    positions: [Vec<u32>; 2],
    rank: usize,
    pub threshold: RandomizedThreshold,
}

impl StageRule {
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Decision for fleet atom `group` with previous decision `prev`; `u` is
    /// a uniform draw used only at the threshold atom.
    fn decide_group(&self, group: usize, prev: u8, u: impl FnOnce() -> f64) -> u8 {
        let r = self.positions[(prev != 0) as usize][group] as usize;
        match r.cmp(&self.rank) {
            std::cmp::Ordering::Greater => 1,
            std::cmp::Ordering::Less => 0,
            std::cmp::Ordering::Equal => (u() < self.threshold.lambda) as u8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    pub states: Vec<OracleState>,
    pub trajectory: FusionTrajectory,
    /// First stage from which the augmented ordering and threshold rank stay
    /// fixed for the rest of the run.
    pub freeze_stage: usize,
}

#[derive(Debug, Clone)]
pub struct OracleFusion {
    fleet: Fleet,
    alpha: Alpha,
    table: OutcomeTable,
    logs: Vec<[f64; 2]>,
}

fn stage_solution<T: Real>(
    fleet_atoms: &[OutcomeAtom<T>],
    mem_p: T,
    mem_q: T,
    mem_logs: [f64; 2],
    alpha: T,
) -> (Extended<T>, Solution<T>) {
    let ext = extend_exact(fleet_atoms, mem_p, mem_q, mem_logs);
    let sol = solve_sorted(&ext.atoms, alpha);
    (ext, sol)
}

impl OracleFusion {
    pub fn new(fleet: Fleet, alpha: Alpha) -> Result<Self> {
        let table = OutcomeTable::for_fleet(&fleet)?;
        let logs = fleet.sensors().iter().map(|s| s.log_ratios()).collect();
        Ok(Self { fleet, alpha, table, logs })
    }

    pub fn fleet(&self) -> &Fleet {
        &self.fleet
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    pub fn table(&self) -> &OutcomeTable {
        &self.table
    }

    pub fn asymptote(&self) -> f64 {
        oracle_asymptote(&self.fleet, self.alpha)
    }

    fn solve(&self, memory: MemoryProfile) -> (Extended<f64>, Solution<f64>) {
        stage_solution(self.table.atoms(), memory.p, memory.q, memory.log_ratios(), self.alpha.value())
    }

    fn state(stage: usize, memory: MemoryProfile, ext: &Extended<f64>, sol: &Solution<f64>) -> OracleState {
        OracleState {
            stage,
            memory,
            threshold: RandomizedThreshold { log_t: ext.atoms[sol.index].log_lr, lambda: sol.lambda },
            point: OperatingPoint { q0: sol.q0, p0: sol.p0 },
            outcome_count: ext.atoms.iter().map(|a| a.multiplicity).sum(),
            atom_count: ext.atoms.len(),
            threshold_rank: sol.index,
        }
    }

    /// One stage of the oracle test given the memory profile.
    pub fn step(&self, stage: usize, memory: MemoryProfile) -> OracleState {
        let (ext, sol) = self.solve(memory);
        Self::state(stage, memory, &ext, &sol)
    }

    fn next_memory(&self, p0: f64) -> MemoryProfile {
        MemoryProfile { p: p0, q: self.alpha.value() }
    }

    fn run_inner(&self, stages: usize, stop_early: bool) -> Result<OracleRun> {
        if stages == 0 {
            return Err(Error::ZeroCount { what: "stage count" });
        }
        let mut states: Vec<OracleState> = Vec::with_capacity(stages);
        let mut memory = initial_memory();
        let mut prev_order: Option<([Vec<u32>; 2], usize)> = None;
        let mut freeze_stage = 1;
        let mut plateau = None;
        for k in 1..=stages {
            let (ext, sol) = self.solve(memory);
            let state = Self::state(k, memory, &ext, &sol);
            let order = (ext.positions, sol.index);
            if prev_order.as_ref().is_some_and(|prev| *prev != order) {
                freeze_stage = k;
            }
            prev_order = Some(order);
            memory = self.next_memory(state.point.p0);
            let delta = states.last().map(|s| (state.point.p0 - s.point.p0).abs());
            states.push(state);
            if stop_early && delta.is_some_and(|d| d < PLATEAU_TOL) {
                plateau = Some(k);
                break;
            }
        }
        let trajectory = FusionTrajectory {
            stages: states
                .iter()
                .map(|s| StageRecord { stage: s.stage, threshold: Some(s.threshold), point: s.point })
                .collect(),
            plateau,
        };
        Ok(OracleRun { states, trajectory, freeze_stage })
    }

    /// Runs exactly `stages` stages.
    pub fn run(&self, stages: usize) -> Result<OracleRun> {
        self.run_inner(stages, false)
    }

    /// Runs until consecutive detection probabilities differ by less than
    /// [`PLATEAU_TOL`], or `max_stages` is reached.
    pub fn run_until_plateau(&self, max_stages: usize) -> Result<OracleRun> {
        self.run_inner(max_stages, true)
    }

    /// Per-stage rules for online decisions over `stages` stages.
    pub fn schedule(&self, stages: usize) -> Result<OracleSchedule> {
        if stages == 0 {
            return Err(Error::ZeroCount { what: "stage count" });
        }
        let mut rules = Vec::with_capacity(stages);
        let mut points = Vec::with_capacity(stages);
        let mut memory = initial_memory();
        for _ in 0..stages {
            let (ext, sol) = self.solve(memory);
            rules.push(StageRule {
                threshold: RandomizedThreshold { log_t: ext.atoms[sol.index].log_lr, lambda: sol.lambda },
                positions: ext.positions,
                rank: sol.index,
            });
            points.push(OperatingPoint { q0: sol.q0, p0: sol.p0 });
            memory = self.next_memory(sol.p0);
        }
        Ok(OracleSchedule { table: self.table.clone(), logs: self.logs.clone(), rules, points })
    }

    /// Detection probabilities of the first `stages` stages in double-double
    /// precision.
    pub fn precise_detection(&self, stages: usize) -> Result<Vec<DoubleDouble>> {
        let table = OutcomeTable::<DoubleDouble>::enumerate_with_tol(self.fleet.sensors(), TIE_TOL)?;
        let alpha = DoubleDouble::from(self.alpha.value());
        let mut mem_p = DoubleDouble::from(0.5);
        let mut mem_q = DoubleDouble::from(0.5);
        let mut out = Vec::with_capacity(stages);
        for _ in 0..stages {
            let logs = MemoryProfile { p: mem_p.to_f64(), q: mem_q.to_f64() }.log_ratios();
            let (_, sol) = stage_solution(table.atoms(), mem_p, mem_q, logs, alpha);
            out.push(sol.p0);
            mem_p = sol.p0;
            mem_q = alpha;
        }
        Ok(out)
    }

    /// Limit detection probability in double-double precision.
    pub fn precise_asymptote(&self) -> DoubleDouble {
        let one = DoubleDouble::from(1.0);
        let r = self.fleet.sensors().iter().fold(one, |acc, s| {
            let (p, q) = (DoubleDouble::from(s.p()), DoubleDouble::from(s.q()));
            acc * p * (one - q) / ((one - p) * q)
        });
        let alpha = DoubleDouble::from(self.alpha.value());
        alpha * r / (one + alpha * (r - one))
    }

    /// Ratios `|p(k+1) - p_inf| / |p(k) - p_inf|` for `k = 1..stages-1`,
    /// measured on the double-double trajectory.
    pub fn contraction_ratios(&self, stages: usize) -> Result<Vec<f64>> {
        let limit = self.precise_asymptote();
        let errs: Vec<f64> = self.precise_detection(stages)?.into_iter().map(|p| (p - limit).abs().to_f64()).collect();
        Ok(errs.windows(2).map(|w| w[1] / w[0]).collect())
    }
}

pub fn oracle_step(fleet: &Fleet, alpha: Alpha, memory: MemoryProfile) -> Result<OracleState> {
    Ok(OracleFusion::new(fleet.clone(), alpha)?.step(1, memory))
}

pub fn oracle_run(fleet: &Fleet, alpha: Alpha, stages: usize) -> Result<FusionTrajectory> {
    Ok(OracleFusion::new(fleet.clone(), alpha)?.run(stages)?.trajectory)
}

/// Precomputed oracle tests for a fixed number of stages.
#[derive(Debug, Clone)]
pub struct OracleSchedule {
    table: OutcomeTable,
    logs: Vec<[f64; 2]>,
    rules: Vec<StageRule>,
    points: Vec<OperatingPoint>,
}

impl OracleSchedule {
    pub fn stages(&self) -> usize {
        self.rules.len()
    }

    pub fn sensor_count(&self) -> usize {
        self.logs.len()
    }

    pub fn rule(&self, stage_idx: usize) -> &StageRule {
        &self.rules[stage_idx]
    }

    pub fn points(&self) -> &[OperatingPoint] {
        &self.points
    }

    fn group_of(&self, bits: &[u8]) -> Result<usize> {
        if bits.len() != self.logs.len() {
            return Err(Error::LengthMismatch { expected: self.logs.len(), got: bits.len() });
        }
        let log_lr: f64 = bits.iter().zip(&self.logs).map(|(&b, l)| l[(b != 0) as usize]).sum();
        Ok(self.table.locate(log_lr).unwrap_or_else(|| nearest(&self.table, log_lr)))
    }

    /// Global decision at stage `stage_idx` (0-based).
    pub fn decide<R: Rng + ?Sized>(&self, stage_idx: usize, bits: &[u8], prev: u8, rng: &mut R) -> Result<u8> {
        let group = self.group_of(bits)?;
        Ok(self.rules[stage_idx].decide_group(group, prev, || rng.random::<f64>()))
    }
}

fn nearest(table: &OutcomeTable, log_lr: f64) -> usize {
    let atoms = table.atoms();
    let idx = atoms.partition_point(|a| a.log_lr < log_lr);
    match idx {
        0 => 0,
        i if i == atoms.len() => i - 1,
        i if (atoms[i].log_lr - log_lr) < (log_lr - atoms[i - 1].log_lr) => i,
        i => i - 1,
    }
}

/// Stand-alone randomized comparison of a log-likelihood ratio with a
/// threshold: 1 above `log_t + TIE_TOL`, 0 below `log_t - TIE_TOL`, and 1 with
/// probability `lambda` in between.
pub fn randomized_compare<R: Rng + ?Sized>(log_lr: f64, thr: &RandomizedThreshold, rng: &mut R) -> u8 {
    let d = log_lr - thr.log_t;
    if d > TIE_TOL {
        1
    } else if d < -TIE_TOL {
        0
    } else {
        (rng.random::<f64>() < thr.lambda) as u8
    }
}
