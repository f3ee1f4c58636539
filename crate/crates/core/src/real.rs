//! Scalar abstraction used by the table machinery so the same solver runs in
//! plain `f64` and in double-double precision.
//!
//! The double-double path exists for trajectory analysis: near the oracle's
//! limit the stage-to-stage error drops below the `f64` resolution of the
//! detection probability long before the contraction ratio settles.

use std::cmp::Ordering;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

pub trait Real:
    Copy
    + Debug
    + PartialOrd
    + Send
    + Sync
    + Add<Output = Self>
    + AddAssign
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }

    /// Orders two likelihood ratios `h1a/h0a` and `h1b/h0b`. The `f64`
    /// implementation orders by the precomputed log keys; higher precision
    /// types compare the cross products directly.
    fn ratio_cmp(h1a: Self, h0a: Self, log_a: f64, h1b: Self, h0b: Self, log_b: f64) -> Ordering;

    fn abs(self) -> Self {
        if self < Self::zero() {
            -self
        } else {
            self
        }
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }

    fn to_f64(self) -> f64 {
        self
    }

    fn ratio_cmp(_: f64, _: f64, log_a: f64, _: f64, _: f64, log_b: f64) -> Ordering {
        log_a.total_cmp(&log_b)
    }
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`, giving roughly 106
/// bits of significand.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const fn new(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    pub fn powi(self, mut exp: u32) -> Self {
        let mut base = self;
        let mut acc = Self::new(1.0);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            exp >>= 1;
        }
        acc
    }
}

impl From<f64> for DoubleDouble {
    fn from(x: f64) -> Self {
        Self::new(x)
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi)? {
            Ordering::Equal => self.lo.partial_cmp(&other.lo),
            ord => Some(ord),
        }
    }
}

impl Add for DoubleDouble {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        let (s, e) = two_sum(self.hi, rhs.hi);
        let (t, f) = two_sum(self.lo, rhs.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Self { hi, lo }
    }
}

impl AddAssign for DoubleDouble {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Neg for DoubleDouble {
    type Output = Self;

    fn neg(self) -> Self {
        Self { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;

    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        let (p, e) = two_prod(self.hi, rhs.hi);
        let e = e + (self.hi * rhs.lo + self.lo * rhs.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = Self;

    fn div(self, rhs: Self) -> Self {
        // Three-step long division; each quotient digit removes ~53 bits.
        let q1 = self.hi / rhs.hi;
        let r = self - rhs * Self::new(q1);
        let q2 = r.hi / rhs.hi;
        let r = r - rhs * Self::new(q2);
        let q3 = r.hi / rhs.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Self { hi, lo } + Self::new(q3)
    }
}

impl Real for DoubleDouble {
    fn from_f64(x: f64) -> Self {
        Self::new(x)
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn ratio_cmp(h1a: Self, h0a: Self, _: f64, h1b: Self, h0b: Self, _: f64) -> Ordering {
        (h1a * h0b).partial_cmp(&(h1b * h0a)).unwrap_or(Ordering::Equal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dd(x: f64) -> DoubleDouble {
        DoubleDouble::new(x)
    }

    #[test]
    fn complement_is_exact() {
        // 1 - 0.1 is not representable in f64; the residual must survive.
        let c = dd(1.0) - dd(0.1);
        let back = c + dd(0.1);
        assert_eq!(back, dd(1.0));
        assert_ne!(c.lo(), 0.0);
    }

    #[test]
    fn third_round_trips() {
        let third = dd(1.0) / dd(3.0);
        let one = third * dd(3.0);
        assert!((one - dd(1.0)).abs().to_f64() < 1e-31);
    }

    #[test]
    fn powi_matches_repeated_product() {
        let x = dd(0.61);
        let mut acc = dd(1.0);
        for _ in 0..7 {
            acc = acc * x;
        }
        assert!((x.powi(7) - acc).abs().to_f64() < 1e-31);
    }

    #[test]
    fn ratio_cmp_detects_equal_cross_products() {
        let a = dd(0.3);
        let b = dd(0.7);
        assert_eq!(DoubleDouble::ratio_cmp(a, b, 0.0, a, b, 0.0), Ordering::Equal);
        assert_eq!(DoubleDouble::ratio_cmp(b, a, 0.0, a, b, 0.0), Ordering::Greater);
    }

    proptest! {
        #[test]
        fn division_inverts_multiplication(a in 1e-6f64..1.0, b in 1e-6f64..1.0) {
            let q = dd(a) / dd(b);
            let back = q * dd(b);
            prop_assert!((back - dd(a)).abs().to_f64() <= 1e-30 * a);
        }

        #[test]
        fn sum_captures_rounding(a in -1.0f64..1.0, b in -1e-20f64..1e-20) {
            let s = dd(a) + dd(b);
            let diff = s - dd(a);
            prop_assert!((diff.to_f64() - b).abs() <= 1e-36 + 1e-30 * b.abs());
        }
    }
}
