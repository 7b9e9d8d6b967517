//! Numeric sample types the transform kernels run on.
//!
//! Kernels are written once against [`Sample`] (additions, subtractions and
//! power-of-two scaling) or [`Real`] (adds general constant multiplication).
//! Running a kernel on [`Counted`] tallies every operation it performs.

use std::cell::Cell;
use std::fmt;
use std::ops::{Add, AddAssign, Neg, Sub};

use num_traits::Zero;

use crate::Rational;

/// Arithmetic cost as (multiplications, additions, bit-shifts).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, serde::Serialize)]
pub struct OpCount {
    pub multiplications: u64,
    pub additions: u64,
    pub shifts: u64,
}

impl OpCount {
    pub const fn new(multiplications: u64, additions: u64, shifts: u64) -> Self {
        Self {
            multiplications,
            additions,
            shifts,
        }
    }

    pub fn scaled(self, factor: u64) -> Self {
        Self::new(
            self.multiplications * factor,
            self.additions * factor,
            self.shifts * factor,
        )
    }
}

impl Add for OpCount {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self::new(
            self.multiplications + rhs.multiplications,
            self.additions + rhs.additions,
            self.shifts + rhs.shifts,
        )
    }
}

impl AddAssign for OpCount {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl fmt::Display for OpCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(mult={}, add={}, shift={})",
            self.multiplications, self.additions, self.shifts
        )
    }
}

/// Values a multiplierless kernel can operate on.
pub trait Sample: Copy + Add<Output = Self> + Sub<Output = Self> + Neg<Output = Self> + fmt::Debug {
    fn zero() -> Self;

    /// Multiplies by `2^k`; `k` may be negative.
    fn shift(self, k: i32) -> Self;
}

/// Samples that also support multiplication by an arbitrary real constant.
pub trait Real: Sample {
    fn mul_const(self, c: f64) -> Self;
}

impl Sample for f64 {
    fn zero() -> Self {
        0.0
    }

    fn shift(self, k: i32) -> Self {
        self * 2f64.powi(k)
    }
}

impl Real for f64 {
    fn mul_const(self, c: f64) -> Self {
        self * c
    }
}

impl Sample for Rational {
    fn zero() -> Self {
        <Rational as Zero>::zero()
    }

    fn shift(self, k: i32) -> Self {
        if k >= 0 {
            self * Rational::from_integer(1i128 << k)
        } else {
            self / Rational::from_integer(1i128 << k.unsigned_abs())
        }
    }
}

/// An `f64` that reports every arithmetic operation to a per-run tally.
///
/// Negation is free; subtraction is charged as an addition.
#[derive(Clone, Copy)]
pub struct Counted<'a> {
    value: f64,
    tally: &'a Cell<OpCount>,
}

impl<'a> Counted<'a> {
    pub fn new(value: f64, tally: &'a Cell<OpCount>) -> Self {
        Self { value, tally }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    fn charge(&self, ops: OpCount) {
        self.tally.set(self.tally.get() + ops);
    }
}

impl fmt::Debug for Counted<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Counted({})", self.value)
    }
}

impl Add for Counted<'_> {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        self.charge(OpCount::new(0, 1, 0));
        Self {
            value: self.value + rhs.value,
            tally: self.tally,
        }
    }
}

impl Sub for Counted<'_> {
    type Output = Self;

    fn sub(self, rhs: Self) -> Self {
        self.charge(OpCount::new(0, 1, 0));
        Self {
            value: self.value - rhs.value,
            tally: self.tally,
        }
    }
}

impl Neg for Counted<'_> {
    type Output = Self;

    fn neg(self) -> Self {
        Self {
            value: -self.value,
            tally: self.tally,
        }
    }
}

impl Sample for Counted<'_> {
    fn zero() -> Self {
        unreachable!("counted samples are always created from a tally")
    }

    fn shift(self, k: i32) -> Self {
        if k != 0 {
            self.charge(OpCount::new(0, 0, 1));
        }
        Self {
            value: self.value * 2f64.powi(k),
            tally: self.tally,
        }
    }
}

impl Real for Counted<'_> {
    fn mul_const(self, c: f64) -> Self {
        self.charge(OpCount::new(1, 0, 0));
        Self {
            value: self.value * c,
            tally: self.tally,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counted_charges_each_operation() {
        let tally = Cell::new(OpCount::default());
        let a = Counted::new(3.0, &tally);
        let b = Counted::new(5.0, &tally);
        let c = (a + b) - (-a).shift(2);
        let d = c.mul_const(0.5).shift(0);
        assert_eq!(d.value(), 10.0);
        assert_eq!(tally.get(), OpCount::new(1, 2, 1));
    }

    #[test]
    fn rational_shift_is_exact() {
        let x = Rational::new(3, 4);
        assert_eq!(x.shift(-3), Rational::new(3, 32));
        assert_eq!(x.shift(2), Rational::from_integer(3));
    }

    #[test]
    fn op_count_sums_componentwise() {
        let a = OpCount::new(1, 2, 3);
        let b = OpCount::new(4, 5, 6);
        assert_eq!(a + b, b + a);
        assert_eq!(a.scaled(3), OpCount::new(3, 6, 9));
    }
}
