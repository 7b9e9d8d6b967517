//! Dyadic rationals `l / 2^p` and their signed-digit expansions.
//!
//! Multiplying a sample by a dyadic constant reduces to a handful of shifted
//! additions. [`CsdForm`] is that expansion, and its cost fields are what the
//! complexity model charges for one constant multiplication.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::Rational;

/// An exact number `numerator / 2^log2_denominator`, always kept in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DyadicRational {
    numerator: i64,
    log2_denominator: u32,
}

impl DyadicRational {
    pub fn new(numerator: i64, log2_denominator: u32) -> Self {
        let mut numerator = numerator;
        let mut log2_denominator = log2_denominator;
        if numerator == 0 {
            log2_denominator = 0;
        }
        while log2_denominator > 0 && numerator % 2 == 0 {
            numerator /= 2;
            log2_denominator -= 1;
        }
        Self {
            numerator,
            log2_denominator,
        }
    }

    pub const fn from_integer(v: i64) -> Self {
        Self {
            numerator: v,
            log2_denominator: 0,
        }
    }

    /// The grid point `m / 8` used by the parameter sweep.
    pub fn eighths(m: i64) -> Self {
        Self::new(m, 3)
    }

    pub fn numerator(&self) -> i64 {
        self.numerator
    }

    pub fn log2_denominator(&self) -> u32 {
        self.log2_denominator
    }

    pub fn is_zero(&self) -> bool {
        self.numerator == 0
    }

    pub fn to_f64(&self) -> f64 {
        self.numerator as f64 / (1u64 << self.log2_denominator) as f64
    }

    pub fn to_rational(&self) -> Rational {
        Rational::new(i128::from(self.numerator), 1i128 << self.log2_denominator)
    }

    /// Brings both operands to a common denominator exponent.
    fn aligned(self, other: Self) -> (i64, i64, u32) {
        let p = self.log2_denominator.max(other.log2_denominator);
        (
            self.numerator << (p - self.log2_denominator),
            other.numerator << (p - other.log2_denominator),
            p,
        )
    }
}

impl Add for DyadicRational {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        let (a, b, p) = self.aligned(rhs);
        Self::new(a + b, p)
    }
}

impl Sub for DyadicRational {
    type Output = Self;

    fn sub(self, rhs: Self) -> Self {
        let (a, b, p) = self.aligned(rhs);
        Self::new(a - b, p)
    }
}

impl Mul for DyadicRational {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        Self::new(
            self.numerator * rhs.numerator,
            self.log2_denominator + rhs.log2_denominator,
        )
    }
}

impl Neg for DyadicRational {
    type Output = Self;

    fn neg(self) -> Self {
        Self::new(-self.numerator, self.log2_denominator)
    }
}

impl PartialOrd for DyadicRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DyadicRational {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = self.aligned(*other);
        a.cmp(&b)
    }
}

impl fmt::Display for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.log2_denominator == 0 {
            write!(f, "{}", self.numerator)
        } else {
            write!(f, "{}/{}", self.numerator, 1u64 << self.log2_denominator)
        }
    }
}

/// One signed power of two, `sign * 2^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsdTerm {
    pub sign: i8,
    pub exponent: i32,
}

impl CsdTerm {
    pub fn value(&self) -> DyadicRational {
        let unit = if self.exponent >= 0 {
            DyadicRational::from_integer(1i64 << self.exponent)
        } else {
            DyadicRational::new(1, self.exponent.unsigned_abs())
        };
        if self.sign < 0 {
            -unit
        } else {
            unit
        }
    }
}

/// Minimum-weight signed-digit expansion of a dyadic constant.
///
/// Among all expansions with the fewest nonzero digits (the canonical signed
/// digit weight), the one with the fewest shifted terms is kept, so a unit
/// term `2^0` is used whenever one is available. For `11/8` this yields
/// `1 + 1/4 + 1/8` rather than the strictly non-adjacent `2 - 1/2 - 1/8`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsdForm {
    terms: Vec<CsdTerm>,
}

impl CsdForm {
    /// Terms ordered by descending exponent.
    pub fn terms(&self) -> &[CsdTerm] {
        &self.terms
    }

    pub fn weight(&self) -> usize {
        self.terms.len()
    }

    pub fn add_cost(&self) -> u64 {
        self.terms.len().saturating_sub(1) as u64
    }

    pub fn shift_cost(&self) -> u64 {
        self.terms.iter().filter(|t| t.exponent != 0).count() as u64
    }

    pub fn value(&self) -> DyadicRational {
        self.terms
            .iter()
            .fold(DyadicRational::from_integer(0), |acc, t| acc + t.value())
    }

    /// True when no two nonzero digits sit at adjacent positions.
    pub fn is_non_adjacent(&self) -> bool {
        self.terms.windows(2).all(|w| (w[0].exponent - w[1].exponent).abs() > 1)
    }
}

impl fmt::Display for CsdForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            let op = if t.sign < 0 { "-" } else { "+" };
            if i > 0 {
                write!(f, " {op} ")?;
            } else if t.sign < 0 {
                write!(f, "-")?;
            }
            write!(f, "{}", t.value().to_f64().abs())?;
        }
        Ok(())
    }
}

/// Lexicographic cost (weight, shifted terms) plus the digit positions chosen.
type Plan = (u32, u32, Vec<(i8, u32)>);

fn plan_digits(v: i64, pos: u32, unit_pos: u32, memo: &mut HashMap<(i64, u32), Plan>) -> Plan {
    if v == 0 {
        return (0, 0, Vec::new());
    }
    if let Some(p) = memo.get(&(v, pos)) {
        return p.clone();
    }
    let plan = if v % 2 == 0 {
        plan_digits(v / 2, pos + 1, unit_pos, memo)
    } else {
        let shift = u32::from(pos != unit_pos);
        // A lone +-1 must take the matching digit; the other choice never shrinks.
        let signs: &[i8] = match v {
            1 => &[1],
            -1 => &[-1],
            _ => &[1, -1],
        };
        signs
            .iter()
            .map(|&s| {
                let (w, sh, mut digits) = plan_digits((v - i64::from(s)) / 2, pos + 1, unit_pos, memo);
                digits.push((s, pos));
                (w + 1, sh + shift, digits)
            })
            .min_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)))
            .expect("at least one digit choice")
    };
    memo.insert((v, pos), plan.clone());
    plan
}

/// Signed-digit expansion of `v`; zero maps to the empty form.
pub fn csd_encode(v: DyadicRational) -> CsdForm {
    let mut memo = HashMap::new();
    let (_, _, digits) = plan_digits(v.numerator(), 0, v.log2_denominator(), &mut memo);
    let mut terms: Vec<CsdTerm> = digits
        .into_iter()
        .map(|(sign, pos)| CsdTerm {
            sign,
            exponent: pos as i32 - v.log2_denominator() as i32,
        })
        .collect();
    terms.sort_by_key(|t| std::cmp::Reverse(t.exponent));
    CsdForm { terms }
}
