//! Eight-point Hartley kernels: exact and dyadic-parametric matrices, the
//! five-stage sparse factorization, and the 11-multiplication Loeffler DCT
//! used as the separable baseline.

use std::f64::consts::{PI, SQRT_2};

use crate::dyadic::{csd_encode, CsdForm, DyadicRational};
use crate::linalg::{Field, Matrix};
use crate::scalar::{OpCount, Real, Sample};
use crate::{Error, Rational, Result};

pub const N: usize = 8;

/// `cas(x) = cos(x) + sin(x)`.
pub fn cas(x: f64) -> f64 {
    x.cos() + x.sin()
}

/// The `n`-point DHT kernel, `h[k][m] = cas(2*pi*k*m/n)`.
pub fn exact_dht_matrix(n: usize) -> Result<Matrix<f64>> {
    if n == 0 {
        return Err(Error::InvalidLength(0));
    }
    Ok(Matrix::from_fn(n, n, |k, m| {
        // Reduce k*m mod n first so large products keep full angle precision.
        cas(2.0 * PI * ((k * m) % n) as f64 / n as f64)
    }))
}

/// The value placed at the `beta` positions of the parametric matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Beta {
    /// `sqrt(2)`, giving the exact DHT.
    Sqrt2,
    Dyadic(DyadicRational),
}

impl Beta {
    pub fn to_f64(&self) -> f64 {
        match self {
            Beta::Sqrt2 => SQRT_2,
            Beta::Dyadic(d) => d.to_f64(),
        }
    }

    pub fn dyadic(&self) -> Option<DyadicRational> {
        match self {
            Beta::Sqrt2 => None,
            Beta::Dyadic(d) => Some(*d),
        }
    }
}

/// Layout of the parametric matrix: 1 = alpha, 2 = beta, sign carried along.
const PATTERN: [[i8; N]; N] = [
    [1, 1, 1, 1, 1, 1, 1, 1],
    [1, 2, 1, 0, -1, -2, -1, 0],
    [1, 1, -1, -1, 1, 1, -1, -1],
    [1, 0, -1, 2, -1, 0, 1, -2],
    [1, -1, 1, -1, 1, -1, 1, -1],
    [1, -2, 1, 0, -1, 2, -1, 0],
    [1, -1, -1, 1, 1, -1, -1, 1],
    [1, 0, -1, -2, -1, 0, 1, 2],
];

/// `H(alpha, beta)` with `alpha = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParametricHartleyMatrix {
    beta: Beta,
}

/// Builds `H(1, beta)`; `beta = 0` makes the matrix singular and is rejected.
pub fn build_parametric(beta: DyadicRational) -> Result<ParametricHartleyMatrix> {
    if beta.is_zero() {
        return Err(Error::SingularParameter);
    }
    Ok(ParametricHartleyMatrix {
        beta: Beta::Dyadic(beta),
    })
}

impl ParametricHartleyMatrix {
    pub fn exact() -> Self {
        Self { beta: Beta::Sqrt2 }
    }

    pub fn beta(&self) -> Beta {
        self.beta
    }

    fn entries<T: Clone + std::ops::Neg<Output = T>>(&self, one: T, zero: T, beta: T) -> Matrix<T> {
        Matrix::from_fn(N, N, |r, c| {
            let v = match PATTERN[r][c].abs() {
                0 => return zero.clone(),
                1 => one.clone(),
                _ => beta.clone(),
            };
            if PATTERN[r][c] < 0 {
                -v
            } else {
                v
            }
        })
    }

    pub fn to_f64(&self) -> Matrix<f64> {
        self.entries(1.0, 0.0, self.beta.to_f64())
    }

    /// Exact rational entries; `None` for the irrational exact case.
    pub fn to_rational(&self) -> Option<Matrix<Rational>> {
        let beta = self.beta.dyadic()?.to_rational();
        Some(self.entries(Rational::from_integer(1), Rational::from_integer(0), beta))
    }
}

/// The multiplier stage `M(1, beta)` for one diagonal slot.
#[derive(Debug, Clone, PartialEq)]
pub enum Multiplier {
    One,
    Dyadic(CsdForm),
    Irrational(f64),
}

/// `H = A3 * A2 * M * A1 * P`; the additive stages are kept as sign patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationStages {
    beta: Beta,
    /// Output position `r` reads input `permutation[r]`.
    permutation: [usize; N],
    a1: [[i8; N]; N],
    a2: [[i8; N]; N],
    a3: [[i8; N]; N],
    /// Diagonal of `M`; alpha slots are `One`.
    multipliers: [Multiplier; N],
}

const PERMUTATION: [usize; N] = [0, 4, 2, 6, 1, 5, 3, 7];

const A1: [[i8; N]; N] = [
    [1, 1, 0, 0, 0, 0, 0, 0],
    [1, -1, 0, 0, 0, 0, 0, 0],
    [0, 0, 1, 1, 0, 0, 0, 0],
    [0, 0, 1, -1, 0, 0, 0, 0],
    [0, 0, 0, 0, 1, 1, 0, 0],
    [0, 0, 0, 0, 1, -1, 0, 0],
    [0, 0, 0, 0, 0, 0, 1, 1],
    [0, 0, 0, 0, 0, 0, 1, -1],
];

const A2: [[i8; N]; N] = [
    [1, 0, 1, 0, 0, 0, 0, 0],
    [0, 1, 0, 1, 0, 0, 0, 0],
    [1, 0, -1, 0, 0, 0, 0, 0],
    [0, 1, 0, -1, 0, 0, 0, 0],
    [0, 0, 0, 0, 1, 0, 1, 0],
    [0, 0, 0, 0, 0, 1, 0, 0],
    [0, 0, 0, 0, 1, 0, -1, 0],
    [0, 0, 0, 0, 0, 0, 0, 1],
];

const A3: [[i8; N]; N] = [
    [1, 0, 0, 0, 1, 0, 0, 0],
    [0, 1, 0, 0, 0, 1, 0, 0],
    [0, 0, 1, 0, 0, 0, 1, 0],
    [0, 0, 0, 1, 0, 0, 0, 1],
    [1, 0, 0, 0, -1, 0, 0, 0],
    [0, 1, 0, 0, 0, -1, 0, 0],
    [0, 0, 1, 0, 0, 0, -1, 0],
    [0, 0, 0, 1, 0, 0, 0, -1],
];

/// Slots of `M` that carry beta; every other slot is alpha.
const BETA_SLOTS: [usize; 2] = [5, 7];

pub fn build_stages(beta: Beta) -> Result<FactorizationStages> {
    let beta_mul = match beta {
        Beta::Sqrt2 => Multiplier::Irrational(SQRT_2),
        Beta::Dyadic(d) if d.is_zero() => return Err(Error::SingularParameter),
        Beta::Dyadic(d) if d == DyadicRational::from_integer(1) => Multiplier::One,
        Beta::Dyadic(d) => Multiplier::Dyadic(csd_encode(d)),
    };
    let multipliers = std::array::from_fn(|i| {
        if BETA_SLOTS.contains(&i) {
            beta_mul.clone()
        } else {
            Multiplier::One
        }
    });
    Ok(FactorizationStages {
        beta,
        permutation: PERMUTATION,
        a1: A1,
        a2: A2,
        a3: A3,
        multipliers,
    })
}

fn sparse_matrix<T: Field>(rows: &[[i8; N]; N]) -> Matrix<T> {
    Matrix::from_fn(N, N, |r, c| match rows[r][c] {
        0 => T::zero(),
        1 => T::one(),
        _ => -T::one(),
    })
}

/// One output of a {-1, 0, 1} row: `r - 1` additions for `r` nonzeros.
/// Shift-add multiplication by a dyadic constant.
pub fn csd_multiply<S: Sample>(v: S, form: &CsdForm) -> S {
    let mut terms = form.terms().iter();
    let Some(first) = terms.next() else {
        return S::zero();
    };
    let lead = v.shift(first.exponent);
    let mut acc = if first.sign < 0 { -lead } else { lead };
    for t in terms {
        let term = v.shift(t.exponent);
        acc = if t.sign < 0 { acc - term } else { acc + term };
    }
    acc
}

impl FactorizationStages {
    pub fn beta(&self) -> Beta {
        self.beta
    }

    pub fn permutation_matrix<T: Field>(&self) -> Matrix<T> {
        Matrix::from_fn(N, N, |r, c| if self.permutation[r] == c { T::one() } else { T::zero() })
    }

    pub fn a1<T: Field>(&self) -> Matrix<T> {
        sparse_matrix(&self.a1)
    }

    pub fn a2<T: Field>(&self) -> Matrix<T> {
        sparse_matrix(&self.a2)
    }

    pub fn a3<T: Field>(&self) -> Matrix<T> {
        sparse_matrix(&self.a3)
    }

    pub fn multiplier_matrix_f64(&self) -> Matrix<f64> {
        let beta = self.beta.to_f64();
        Matrix::from_fn(N, N, |r, c| match (r == c, BETA_SLOTS.contains(&r)) {
            (false, _) => 0.0,
            (true, true) => beta,
            (true, false) => 1.0,
        })
    }

    pub fn multiplier_matrix_rational(&self) -> Option<Matrix<Rational>> {
        let beta = self.beta.dyadic()?.to_rational();
        Some(Matrix::from_fn(N, N, |r, c| match (r == c, BETA_SLOTS.contains(&r)) {
            (false, _) => Rational::from_integer(0),
            (true, true) => beta,
            (true, false) => Rational::from_integer(1),
        }))
    }

    /// Dense product of the five stages, evaluated in floating point.
    pub fn product_f64(&self) -> Matrix<f64> {
        self.a3::<f64>()
            .matmul(&self.a2())
            .matmul(&self.multiplier_matrix_f64())
            .matmul(&self.a1())
            .matmul(&self.permutation_matrix())
    }

    /// Dense product of the five stages in exact arithmetic (dyadic beta only).
    pub fn product_rational(&self) -> Option<Matrix<Rational>> {
        let m = self.multiplier_matrix_rational()?;
        Some(
            self.a3::<Rational>()
                .matmul(&self.a2())
                .matmul(&m)
                .matmul(&self.a1())
                .matmul(&self.permutation_matrix()),
        )
    }

    /// The butterflies below are `A1`, `A2` and `A3` written out; the
    /// dense constants remain the reference they are tested against.
    fn run<S: Sample>(&self, x: &[S; N], mul: impl Fn(S, &Multiplier) -> S) -> [S; N] {
        let p: [S; N] = std::array::from_fn(|r| x[self.permutation[r]]);
        let mut a = [
            p[0] + p[1],
            p[0] - p[1],
            p[2] + p[3],
            p[2] - p[3],
            p[4] + p[5],
            p[4] - p[5],
            p[6] + p[7],
            p[6] - p[7],
        ];
        for i in BETA_SLOTS {
            a[i] = mul(a[i], &self.multipliers[i]);
        }
        let b = [
            a[0] + a[2],
            a[1] + a[3],
            a[0] - a[2],
            a[1] - a[3],
            a[4] + a[6],
            a[5],
            a[4] - a[6],
            a[7],
        ];
        [
            b[0] + b[4],
            b[1] + b[5],
            b[2] + b[6],
            b[3] + b[7],
            b[0] - b[4],
            b[1] - b[5],
            b[2] - b[6],
            b[3] - b[7],
        ]
    }

    /// Runs the fast algorithm; dyadic multipliers use shift-add expansion.
    pub fn fast_apply<S: Real>(&self, x: &[S; N]) -> [S; N] {
        self.run(x, |v, m| match m {
            Multiplier::One => v,
            Multiplier::Dyadic(form) => csd_multiply(v, form),
            Multiplier::Irrational(c) => v.mul_const(*c),
        })
    }

    /// Multiplierless evaluation on any [`Sample`]; `None` for the exact kernel.
    pub fn fast_apply_dyadic<S: Sample>(&self, x: &[S; N]) -> Option<[S; N]> {
        self.beta.dyadic()?;
        Some(self.run(x, |v, m| match m {
            Multiplier::One => v,
            Multiplier::Dyadic(form) => csd_multiply(v, form),
            Multiplier::Irrational(_) => unreachable!("dyadic stages carry no irrational slot"),
        }))
    }
}

/// Analytical cost of one 8-point transform through the factorization.
pub fn count_1d(beta: Beta) -> Result<OpCount> {
    match beta {
        Beta::Sqrt2 => Ok(OpCount::new(2, 22, 0)),
        Beta::Dyadic(d) if d.is_zero() => Err(Error::SingularParameter),
        Beta::Dyadic(d) => {
            let form = csd_encode(d);
            Ok(OpCount::new(0, 22 + 2 * form.add_cost(), 2 * form.shift_cost()))
        }
    }
}

/// `D = diag((T * B^T)^-1)`: the per-output scale that turns `B^T` into an
/// (approximate) inverse of `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalCorrection<T> {
    pub diag: Vec<T>,
}

pub fn pair_correction<T: Field>(direct: &Matrix<T>, inverse: &Matrix<T>) -> Result<DiagonalCorrection<T>> {
    if direct.rows() != direct.cols() || direct.rows() != inverse.rows() || inverse.rows() != inverse.cols() {
        return Err(Error::DimensionMismatch(format!(
            "correction needs equal square matrices, got {}x{} and {}x{}",
            direct.rows(),
            direct.cols(),
            inverse.rows(),
            inverse.cols()
        )));
    }
    let gram = direct.matmul(&inverse.transpose());
    let inv = gram.inverse().ok_or(Error::NonInvertibleGram)?;
    Ok(DiagonalCorrection { diag: inv.diag() })
}

/// `D = diag((T * T^T)^-1)`.
pub fn diagonal_correction<T: Field>(matrix: &Matrix<T>) -> Result<DiagonalCorrection<T>> {
    pair_correction(matrix, matrix)
}

/// Length-8 DCT-II scaled by `sqrt(8)`: row 0 is all ones, the others are
/// `sqrt(2) * cos((2n + 1) k pi / 16)`. This is the matrix the Loeffler flow
/// graph computes.
pub fn dct_matrix() -> Matrix<f64> {
    Matrix::from_fn(N, N, |k, n| {
        if k == 0 {
            1.0
        } else {
            SQRT_2 * ((2 * n + 1) as f64 * k as f64 * PI / 16.0).cos()
        }
    })
}

/// Loeffler-Ligtenberg-Moschytz DCT: 11 multiplications, 29 additions.
#[derive(Debug, Clone, Copy)]
pub struct LoefflerDct {
    even_sum: f64,
    even_minus: f64,
    even_plus: f64,
    rot3: [f64; 3],
    rot1: [f64; 3],
}

impl Default for LoefflerDct {
    fn default() -> Self {
        let c = |k: f64| (k * PI / 16.0).cos();
        let s = |k: f64| (k * PI / 16.0).sin();
        // even rotation by pi/8 with gain sqrt(2)
        let (ke, se) = (SQRT_2 * c(2.0), SQRT_2 * s(2.0));
        Self {
            even_sum: se,
            even_minus: ke - se,
            even_plus: ke + se,
            rot3: [c(3.0), c(3.0) + s(3.0), s(3.0) - c(3.0)],
            rot1: [c(1.0), c(1.0) + s(1.0), s(1.0) - c(1.0)],
        }
    }
}

/// `(c*u - s*v, s*u + c*v)` with three multiplications.
fn rotate<S: Real>(u: S, v: S, k: &[f64; 3]) -> (S, S) {
    let z = (u + v).mul_const(k[0]);
    (z - v.mul_const(k[1]), z + u.mul_const(k[2]))
}

pub const LOEFFLER_COUNT: OpCount = OpCount::new(11, 29, 0);

impl LoefflerDct {
    pub fn apply<S: Real>(&self, x: &[S; N]) -> [S; N] {
        let s: [S; 4] = std::array::from_fn(|n| x[n] + x[7 - n]);
        let d: [S; 4] = std::array::from_fn(|n| x[n] - x[7 - n]);

        let b0 = s[0] + s[3];
        let b3 = s[0] - s[3];
        let b1 = s[1] + s[2];
        let b2 = s[1] - s[2];
        let y0 = b0 + b1;
        let y4 = b0 - b1;
        let z = (b2 + b3).mul_const(self.even_sum);
        let y2 = z + b3.mul_const(self.even_minus);
        let y6 = z - b2.mul_const(self.even_plus);

        let (p, p2) = rotate(d[0], d[3], &self.rot3);
        let (q2, q) = rotate(d[1], d[2], &self.rot1);
        let a = p + q;
        let b = p2 + q2;
        let y3 = (p - q).mul_const(SQRT_2);
        let y5 = (p2 - q2).mul_const(SQRT_2);
        let y1 = a + b;
        let y7 = a - b;

        [y0, y1, y2, y3, y4, y5, y6, y7]
    }
}

/// An 8-point transform that can run on samples of type `S`.
pub trait Kernel1d<S> {
    fn apply(&self, x: &[S; N]) -> [S; N];
}

impl<S: Real> Kernel1d<S> for FactorizationStages {
    fn apply(&self, x: &[S; N]) -> [S; N] {
        self.fast_apply(x)
    }
}

impl<S: Real> Kernel1d<S> for LoefflerDct {
    fn apply(&self, x: &[S; N]) -> [S; N] {
        LoefflerDct::apply(self, x)
    }
}

/// Multiplierless view of dyadic stages, usable with exact rationals.
#[derive(Debug, Clone, Copy)]
pub struct Multiplierless<'a>(pub &'a FactorizationStages);

impl<S: Sample> Kernel1d<S> for Multiplierless<'_> {
    fn apply(&self, x: &[S; N]) -> [S; N] {
        self.0
            .fast_apply_dyadic(x)
            .expect("multiplierless kernel needs a dyadic beta")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Counted;
    use num_traits::Signed;
    use std::cell::Cell;

    #[test]
    fn dht_of_length_one() {
        let m = exact_dht_matrix(1).unwrap();
        assert_eq!(m[(0, 0)], 1.0);
        assert!(matches!(exact_dht_matrix(0), Err(Error::InvalidLength(0))));
    }

    #[test]
    fn dht_entry_one_one_is_sqrt2() {
        let m = exact_dht_matrix(8).unwrap();
        assert!((m[(1, 1)] - SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn exact_matrix_matches_parametric_layout() {
        let m = exact_dht_matrix(8).unwrap();
        let p = ParametricHartleyMatrix::exact().to_f64();
        assert!(m.max_abs_diff(&p) < 1e-12);
    }

    #[test]
    fn dht_is_orthogonal_and_symmetric() {
        for n in [3, 5, 8, 12] {
            let m = exact_dht_matrix(n).unwrap();
            assert_eq!(m, m.transpose());
            let gram = m.matmul(&m.transpose());
            assert!(gram.max_abs_diff(&Matrix::identity(n).scale(&(n as f64))) < 1e-12);
        }
    }

    #[test]
    fn parametric_entries() {
        let one = build_parametric(DyadicRational::from_integer(1))
            .unwrap()
            .to_rational()
            .unwrap();
        for r in 0..N {
            for c in 0..N {
                let v = one[(r, c)];
                assert!(v == Rational::from_integer(0) || v.abs() == Rational::from_integer(1));
            }
        }
        let m = build_parametric(DyadicRational::eighths(11))
            .unwrap()
            .to_rational()
            .unwrap();
        assert_eq!(m[(1, 1)], Rational::new(11, 8));
        assert_eq!(m[(1, 3)], Rational::from_integer(0));
        assert!(matches!(
            build_parametric(DyadicRational::from_integer(0)),
            Err(Error::SingularParameter)
        ));
    }

    #[test]
    fn permutation_reorders_inputs() {
        let st = build_stages(Beta::Sqrt2).unwrap();
        let p = st.permutation_matrix::<f64>();
        let x: Vec<f64> = (0..8).map(f64::from).collect();
        assert_eq!(p.matvec(&x), vec![0.0, 4.0, 2.0, 6.0, 1.0, 5.0, 3.0, 7.0]);
    }

    #[test]
    fn three_halves_stage_product_is_exact() {
        let beta = DyadicRational::eighths(12);
        let st = build_stages(Beta::Dyadic(beta)).unwrap();
        let expected = build_parametric(beta).unwrap().to_rational().unwrap();
        assert_eq!(st.product_rational().unwrap(), expected);
    }

    #[test]
    fn additive_stages_hold_only_signs() {
        let st = build_stages(Beta::Sqrt2).unwrap();
        for m in [st.a1::<f64>(), st.a2(), st.a3()] {
            for r in 0..N {
                assert!(m.row(r).iter().all(|v| [-1.0, 0.0, 1.0].contains(v)));
            }
        }
        let p = st.permutation_matrix::<f64>();
        for r in 0..N {
            assert_eq!(p.row(r).iter().sum::<f64>(), 1.0);
            assert_eq!((0..N).map(|k| p[(k, r)]).sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn fast_apply_basis_and_zero() {
        let st = build_stages(Beta::Dyadic(DyadicRational::eighths(11))).unwrap();
        let mut e0 = [0.0; N];
        e0[0] = 1.0;
        assert_eq!(st.fast_apply(&e0), [1.0; N]);
        assert_eq!(st.fast_apply(&[0.0; N]), [0.0; N]);
    }

    #[test]
    fn fast_path_matches_dense_stages() {
        let x = [3.0, -1.5, 7.25, 0.0, 2.0, -4.0, 1.125, 9.0];
        let mut stages: Vec<FactorizationStages> = (1..=24)
            .map(|m| build_stages(Beta::Dyadic(DyadicRational::eighths(m))).unwrap())
            .collect();
        stages.push(build_stages(Beta::Sqrt2).unwrap());
        for st in &stages {
            let dense = st.product_f64().matvec(&x);
            let fast = st.fast_apply(&x);
            assert!(
                dense.iter().zip(fast).all(|(a, b)| (a - b).abs() < 1e-12),
                "{:?}",
                st.beta()
            );
        }
    }

    #[test]
    fn counts_follow_csd_costs() {
        assert_eq!(count_1d(Beta::Sqrt2).unwrap(), OpCount::new(2, 22, 0));
        assert_eq!(
            count_1d(Beta::Dyadic(DyadicRational::eighths(11))).unwrap(),
            OpCount::new(0, 26, 4)
        );
        assert_eq!(
            count_1d(Beta::Dyadic(DyadicRational::from_integer(2))).unwrap(),
            OpCount::new(0, 22, 2)
        );
        let min = (1..=24)
            .map(|m| count_1d(Beta::Dyadic(DyadicRational::eighths(m))).unwrap())
            .min_by_key(|c| (c.additions, c.shifts))
            .unwrap();
        assert_eq!(min, OpCount::new(0, 22, 0));
    }

    #[test]
    fn corrections() {
        let d = diagonal_correction(&exact_dht_matrix(8).unwrap()).unwrap();
        assert!(d.diag.iter().all(|v| (v - 0.125).abs() < 1e-14));
        let d = diagonal_correction(&Matrix::<Rational>::identity(8)).unwrap();
        assert!(d.diag.iter().all(|v| *v == Rational::from_integer(1)));
        let singular = Matrix::from_fn(8, 8, |_, c| c as f64);
        assert!(matches!(diagonal_correction(&singular), Err(Error::NonInvertibleGram)));
    }

    #[test]
    fn loeffler_matches_matrix() {
        let dct = LoefflerDct::default();
        let m = dct_matrix();
        let x = [3.0, -1.0, 4.0, 1.0, -5.0, 9.0, 2.0, -6.0];
        let y = dct.apply(&x);
        let expected = m.matvec(&x);
        for (a, b) in y.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12, "{y:?} vs {expected:?}");
        }
        // sqrt(8) times an orthonormal matrix
        let gram = m.matmul(&m.transpose());
        assert!(gram.max_abs_diff(&Matrix::identity(8).scale(&8.0)) < 1e-12);
    }

    #[test]
    fn loeffler_counts() {
        let tally = Cell::new(OpCount::default());
        let x: [Counted; N] = std::array::from_fn(|i| Counted::new(i as f64, &tally));
        LoefflerDct::default().apply(&x);
        assert_eq!(tally.get(), LOEFFLER_COUNT);
    }
}
