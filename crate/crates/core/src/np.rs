//! Single-stage Neyman-Pearson fusion over binary sensor messages.
//!
//! Every joint message vector is an outcome atom carrying its log-likelihood
//! ratio and its probability under each hypothesis. Atoms are kept sorted by
//! ascending ratio with ties merged, which is all the optimal randomized test
//! and the fused ROC need.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::detection::{Alpha, Fleet, OperatingPoint, SensorProfile};
use crate::error::{Error, Result};
use crate::real::Real;

/// Absolute tolerance on `log_lr` under which two atoms count as one.
pub const TIE_TOL: f64 = 1e-9;

/// Largest fleet the enumerator accepts.
pub const MAX_SENSORS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutcomeAtom<T = f64> {
    pub log_lr: f64,
    pub prob_h0: T,
    pub prob_h1: T,
    /// Number of raw message vectors folded into this atom.
    pub multiplicity: u64,
}

impl<T: Real> OutcomeAtom<T> {
    fn absorb(&mut self, other: &Self) {
        self.prob_h0 += other.prob_h0;
        self.prob_h1 += other.prob_h1;
        self.multiplicity += other.multiplicity;
    }

    fn recompute_log(&mut self) {
        self.log_lr = (self.prob_h1.to_f64() / self.prob_h0.to_f64()).ln();
    }

    fn ratio_cmp(&self, other: &Self) -> Ordering {
        T::ratio_cmp(self.prob_h1, self.prob_h0, self.log_lr, other.prob_h1, other.prob_h0, other.log_lr)
    }
}

/// Sorted, tie-merged outcome atoms of a fleet.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeTable<T = f64> {
    atoms: Vec<OutcomeAtom<T>>,
    n_sensors: usize,
    tie_tol: f64,
}

/// Deterministic pre-merge order: ascending `log_lr`, then H0 mass
/// descending, then H1 mass descending.
fn atom_order<T: Real>(a: &OutcomeAtom<T>, b: &OutcomeAtom<T>) -> Ordering {
    a.log_lr
        .total_cmp(&b.log_lr)
        .then_with(|| b.prob_h0.partial_cmp(&a.prob_h0).unwrap_or(Ordering::Equal))
        .then_with(|| b.prob_h1.partial_cmp(&a.prob_h1).unwrap_or(Ordering::Equal))
}

/// Merges consecutive atoms whose `log_lr` differ by at most `tol`. Input must
/// be sorted by `log_lr`. Merged atoms get `log_lr = ln(sum p1 / sum p0)`.
pub fn merge_ties<T: Real>(atoms: Vec<OutcomeAtom<T>>, tol: f64) -> Vec<OutcomeAtom<T>> {
    let mut out: Vec<OutcomeAtom<T>> = Vec::with_capacity(atoms.len());
    for atom in atoms {
        match out.last_mut() {
            Some(last) if (atom.log_lr - last.log_lr).abs() <= tol => {
                last.absorb(&atom);
                last.recompute_log();
            }
            _ => out.push(atom),
        }
    }
    out
}

/// How two sorted halves are combined when a further binary source is
/// appended to a table.
#[derive(Debug, Clone, Copy, PartialEq)]
enum TieRule {
    /// Merge when `log_lr` are within the tolerance.
    Tolerance(f64),
    /// Merge only when the two likelihood ratios compare equal.
    Exact,
}

/// Result of appending one binary source to a sorted table.
#[derive(Debug, Clone)]
pub(crate) struct Extended<T> {
    pub atoms: Vec<OutcomeAtom<T>>,
    /// `positions[b][g]` is the output index holding input atom `g` combined
    /// with source bit `b`.
    pub positions: [Vec<u32>; 2],
}

/// Appends one binary source with masses `P(1|H1) = p`, `P(1|H0) = q` and log
/// contributions `logs = [ln P(0|H1)/P(0|H0), ln p/q]`.
fn extend<T: Real>(atoms: &[OutcomeAtom<T>], p: T, q: T, logs: [f64; 2], rule: TieRule) -> Extended<T> {
    let one = T::one();
    let halves = [(one - p, one - q), (p, q)];
    let make = |g: usize, b: usize| {
        let a = &atoms[g];
        OutcomeAtom {
            log_lr: a.log_lr + logs[b],
            prob_h0: a.prob_h0 * halves[b].1,
            prob_h1: a.prob_h1 * halves[b].0,
            multiplicity: a.multiplicity,
        }
    };
    let m = atoms.len();
    let mut out: Vec<OutcomeAtom<T>> = Vec::with_capacity(2 * m);
    let mut positions = [vec![0u32; m], vec![0u32; m]];
    let (mut i, mut j) = (0usize, 0usize);
    while i < m || j < m {
        let take_zero = if i == m {
            false
        } else if j == m {
            true
        } else {
            make(i, 0).ratio_cmp(&make(j, 1)) != Ordering::Greater
        };
        let (g, b) = if take_zero { (i, 0) } else { (j, 1) };
        let atom = make(g, b);
        if take_zero {
            i += 1;
        } else {
            j += 1;
        }
        let merge = match (out.last(), rule) {
            (Some(last), TieRule::Tolerance(tol)) => (atom.log_lr - last.log_lr).abs() <= tol,
            (Some(last), TieRule::Exact) => last.ratio_cmp(&atom) == Ordering::Equal,
            (None, _) => false,
        };
        if merge {
            let last = out.last_mut().expect("checked above");
            last.absorb(&atom);
            if matches!(rule, TieRule::Tolerance(_)) {
                last.recompute_log();
            }
        } else {
            out.push(atom);
        }
        positions[b][g] = (out.len() - 1) as u32;
    }
    Extended { atoms: out, positions }
}

/// Appends a memory-like source, merging only exact likelihood-ratio ties.
pub(crate) fn extend_exact<T: Real>(atoms: &[OutcomeAtom<T>], p: T, q: T, logs: [f64; 2]) -> Extended<T> {
    extend(atoms, p, q, logs, TieRule::Exact)
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Outcome of the randomized N-P test at a given false-alarm level, in
/// terms of atom indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Solution<T> {
    pub index: usize,
    pub lambda: T,
    pub q0: T,
    pub p0: T,
}

/// Smallest index `j` whose strictly-higher H0 mass is at most `level`, with
/// `lambda = (level - above) / P0(j)` clamped to `[0, 1]`.
pub(crate) fn solve_sorted<T: Real>(atoms: &[OutcomeAtom<T>], level: T) -> Solution<T> {
    let mut above0 = T::zero();
    let mut above1 = T::zero();
    let mut j = atoms.len() - 1;
    while j > 0 && above0 + atoms[j].prob_h0 <= level {
        above0 += atoms[j].prob_h0;
        above1 += atoms[j].prob_h1;
        j -= 1;
    }
    let atom = &atoms[j];
    let mut lambda = (level - above0) / atom.prob_h0;
    if lambda < T::zero() {
        lambda = T::zero();
    } else if lambda > T::one() {
        lambda = T::one();
    }
    Solution { index: j, lambda, q0: above0 + lambda * atom.prob_h0, p0: above1 + lambda * atom.prob_h1 }
}

/// `(t, lambda)` of a randomized likelihood-ratio test: declare 1 above `t`,
/// 0 below, 1 with probability `lambda` at equality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomizedThreshold {
    pub log_t: f64,
    pub lambda: f64,
}

impl RandomizedThreshold {
    pub fn new(log_t: f64, lambda: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&lambda) {
            Ok(Self { log_t, lambda })
        } else {
            Err(Error::InvalidProbability { what: "randomization factor lambda", value: lambda })
        }
    }

    pub fn threshold(&self) -> f64 {
        self.log_t.exp()
    }
}

/// Piecewise-linear fused ROC from `(0, 0)` to `(1, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    pub vertices: Vec<OperatingPoint>,
    /// Slope of the segment ending at `vertices[i + 1]`.
    pub slopes: Vec<f64>,
}

impl<T: Real> OutcomeTable<T> {
    /// Enumerates the joint outcomes of `profiles`, merging atoms whose
    /// `log_lr` lie within `tie_tol`. Bit-identical fleets collapse straight
    /// to `n + 1` binomial atoms.
    pub fn enumerate_with_tol(profiles: &[SensorProfile], tie_tol: f64) -> Result<Self> {
        let n = profiles.len();
        if n == 0 {
            return Err(Error::EmptyFleet);
        }
        if n > MAX_SENSORS {
            return Err(Error::TooManySensors { n, max: MAX_SENSORS });
        }
        let atoms = if n > 1 && profiles.windows(2).all(|w| w[0] == w[1]) {
            Self::binomial_atoms(&profiles[0], n, tie_tol)
        } else {
            let seed = OutcomeAtom { log_lr: 0.0, prob_h0: T::one(), prob_h1: T::one(), multiplicity: 1 };
            profiles.iter().fold(vec![seed], |acc, s| {
                extend(&acc, T::from_f64(s.p()), T::from_f64(s.q()), s.log_ratios(), TieRule::Tolerance(tie_tol)).atoms
            })
        };
        Ok(Self { atoms, n_sensors: n, tie_tol })
    }

    fn binomial_atoms(s: &SensorProfile, n: usize, tie_tol: f64) -> Vec<OutcomeAtom<T>> {
        let one = T::one();
        let (p, q) = (T::from_f64(s.p()), T::from_f64(s.q()));
        let [l0, l1] = s.log_ratios();
        let pow = |x: T, e: usize| (0..e).fold(one, |acc, _| acc * x);
        let mut atoms: Vec<OutcomeAtom<T>> = (0..=n)
            .map(|k| {
                let c = binomial(n as u64, k as u64);
                let cf = T::from_f64(c as f64);
                OutcomeAtom {
                    log_lr: k as f64 * l1 + (n - k) as f64 * l0,
                    prob_h0: cf * pow(q, k) * pow(one - q, n - k),
                    prob_h1: cf * pow(p, k) * pow(one - p, n - k),
                    multiplicity: c,
                }
            })
            .collect();
        atoms.sort_by(atom_order);
        merge_ties(atoms, tie_tol)
    }

    /// Builds a table from arbitrary atoms: sorts deterministically, then
    /// merges ties.
    pub fn from_atoms(mut atoms: Vec<OutcomeAtom<T>>, n_sensors: usize, tie_tol: f64) -> Self {
        atoms.sort_by(atom_order);
        Self { atoms: merge_ties(atoms, tie_tol), n_sensors, tie_tol }
    }

    pub fn atoms(&self) -> &[OutcomeAtom<T>] {
        &self.atoms
    }

    pub fn n_sensors(&self) -> usize {
        self.n_sensors
    }

    pub fn tie_tol(&self) -> f64 {
        self.tie_tol
    }

    /// Number of raw message vectors represented, `2^n` for an enumerated
    /// fleet.
    pub fn raw_outcomes(&self) -> u64 {
        self.atoms.iter().map(|a| a.multiplicity).sum()
    }

    pub fn total_masses(&self) -> (T, T) {
        self.atoms.iter().fold((T::zero(), T::zero()), |(h0, h1), a| (h0 + a.prob_h0, h1 + a.prob_h1))
    }
}

impl OutcomeTable<f64> {
    pub fn enumerate(profiles: &[SensorProfile]) -> Result<Self> {
        Self::enumerate_with_tol(profiles, TIE_TOL)
    }

    pub fn for_fleet(fleet: &Fleet) -> Result<Self> {
        Self::enumerate(fleet.sensors())
    }

    pub fn solve_threshold(&self, alpha: Alpha) -> RandomizedThreshold {
        self.solve_level(alpha.value())
    }

    /// Randomized test whose false-alarm probability equals `level` in
    /// `[0, 1]`.
    pub fn solve_level(&self, level: f64) -> RandomizedThreshold {
        let sol = solve_sorted(&self.atoms, level);
        RandomizedThreshold { log_t: self.atoms[sol.index].log_lr, lambda: sol.lambda }
    }

    pub fn operating_point(&self, thr: &RandomizedThreshold) -> OperatingPoint {
        let (mut q0, mut p0) = (0.0, 0.0);
        for a in &self.atoms {
            let d = a.log_lr - thr.log_t;
            if d > self.tie_tol {
                q0 += a.prob_h0;
                p0 += a.prob_h1;
            } else if d >= -self.tie_tol {
                q0 += thr.lambda * a.prob_h0;
                p0 += thr.lambda * a.prob_h1;
            }
        }
        OperatingPoint { q0, p0 }
    }

    /// Index of the atom whose `log_lr` lies within the tie tolerance of
    /// `log_lr`, if any.
    pub fn locate(&self, log_lr: f64) -> Option<usize> {
        let idx = self.atoms.partition_point(|a| a.log_lr < log_lr - self.tie_tol);
        (idx < self.atoms.len() && (self.atoms[idx].log_lr - log_lr).abs() <= self.tie_tol).then_some(idx)
    }

    pub fn roc_curve(&self) -> RocCurve {
        let mut vertices = Vec::with_capacity(self.atoms.len() + 1);
        let mut slopes = Vec::with_capacity(self.atoms.len());
        let (mut q0, mut p0) = (0.0, 0.0);
        vertices.push(OperatingPoint { q0, p0 });
        for a in self.atoms.iter().rev() {
            q0 += a.prob_h0;
            p0 += a.prob_h1;
            vertices.push(OperatingPoint { q0, p0 });
            slopes.push(a.prob_h1 / a.prob_h0);
        }
        RocCurve { vertices, slopes }
    }
}

pub fn enumerate_outcomes(profiles: &[SensorProfile]) -> Result<OutcomeTable> {
    OutcomeTable::enumerate(profiles)
}

pub fn solve_threshold(table: &OutcomeTable, alpha: Alpha) -> RandomizedThreshold {
    table.solve_threshold(alpha)
}

pub fn operating_point(table: &OutcomeTable, thr: &RandomizedThreshold) -> OperatingPoint {
    table.operating_point(thr)
}

pub fn roc_curve(table: &OutcomeTable) -> RocCurve {
    table.roc_curve()
}

/// Point where the extensions of the first and last fused ROC segments
/// cross: `p = Q1 q` and `1 - p = (1 - q) / Q2` with `Q1 = prod p / prod q`,
/// `Q2 = prod (1-q) / prod (1-p)`.
pub fn roc_extension_intersection(fleet: &Fleet) -> Result<OperatingPoint> {
    let prods = fleet.products();
    let q1 = prods.first_slope();
    let q2 = prods.correct_reject / prods.miss;
    let r = q1 * q2;
    if r - 1.0 <= 0.0 {
        return Err(Error::BlindFleet);
    }
    Ok(OperatingPoint { q0: (q2 - 1.0) / (r - 1.0), p0: (r - q1) / (r - 1.0) })
}
