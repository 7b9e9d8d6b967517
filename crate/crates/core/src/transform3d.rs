//! Separable and non-separable 3D Hartley transforms built from i-mode
//! products, their inverses with folded diagonal corrections, and the
//! row-column execution strategy.
//!
//! The true 3D DHT (kernel `cas(a + b + c)`) is obtained from the separable
//! transform (kernel `cas(a) cas(b) cas(c)`) by the reflected combination
//! `Y = 1/2 (F1 + F2 + F3 - F1 F2 F3) Ys`, where `Fi` reverses index `i`
//! modulo its length. That operator is its own inverse and commutes with every
//! matrix in the parametric family, so the inverse path is the inverse
//! separable transform followed by the same combination.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;

use crate::kernels::{dct_matrix, exact_dht_matrix, pair_correction, Kernel1d, N};
use crate::linalg::{rational_to_big, Field, Matrix};
use crate::scalar::Sample;
use crate::search::{deviation_from_diagonality, Candidate};
use crate::tensor::{i_mode_product, Tensor3};
use crate::{Error, Rational, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransformKind {
    ExactDht,
    ExactDct,
    Approx(Candidate),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InversePolicy {
    /// The direct matrix is reused for the inverse.
    Involutional,
    /// The inverse uses a different grid matrix.
    Paired(Candidate),
    ExactInverse,
}

/// A transform together with the matrix its inverse is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TransformSpec {
    kind: TransformKind,
    inverse: InversePolicy,
}

impl TransformSpec {
    pub fn new(kind: TransformKind, inverse: InversePolicy) -> Result<Self> {
        match (kind, inverse) {
            (TransformKind::Approx(_), InversePolicy::ExactInverse) => Err(Error::InvalidSpec(
                "approximate transforms need an involutional or paired inverse".into(),
            )),
            (TransformKind::ExactDht | TransformKind::ExactDct, p) if p != InversePolicy::ExactInverse => Err(
                Error::InvalidSpec("exact transforms only support the exact inverse".into()),
            ),
            _ => Ok(Self { kind, inverse }),
        }
    }

    pub fn exact_dht() -> Self {
        Self {
            kind: TransformKind::ExactDht,
            inverse: InversePolicy::ExactInverse,
        }
    }

    pub fn exact_dct() -> Self {
        Self {
            kind: TransformKind::ExactDct,
            inverse: InversePolicy::ExactInverse,
        }
    }

    pub fn involutional(c: Candidate) -> Self {
        Self {
            kind: TransformKind::Approx(c),
            inverse: InversePolicy::Involutional,
        }
    }

    pub fn paired(direct: Candidate, inverse: Candidate) -> Self {
        Self {
            kind: TransformKind::Approx(direct),
            inverse: InversePolicy::Paired(inverse),
        }
    }

    /// Parses a method (`dht`, `dct` or a grid beta such as `11/8`) and an
    /// optional inverse policy (`exact`, `involutional` or a partner beta).
    pub fn parse(method: &str, policy: Option<&str>) -> Result<Self> {
        let kind: TransformKind = method.parse()?;
        let inverse = match policy {
            Some(p) => p.parse()?,
            None => match kind {
                TransformKind::Approx(_) => InversePolicy::Involutional,
                _ => InversePolicy::ExactInverse,
            },
        };
        Self::new(kind, inverse)
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn inverse_policy(&self) -> InversePolicy {
        self.inverse
    }

    /// Whether the reflected combination turns the separable result into the
    /// non-separable 3D DHT. The DCT is used separably.
    pub fn is_hartley(&self) -> bool {
        self.kind != TransformKind::ExactDct
    }

    pub fn direct(&self) -> Option<Candidate> {
        match self.kind {
            TransformKind::Approx(c) => Some(c),
            _ => None,
        }
    }

    /// The grid matrix used by the inverse, if any.
    pub fn inverse_candidate(&self) -> Option<Candidate> {
        match (self.kind, self.inverse) {
            (TransformKind::Approx(_), InversePolicy::Paired(q)) => Some(q),
            (TransformKind::Approx(c), _) => Some(c),
            _ => None,
        }
    }

    /// Deviation from diagonality of `T * B^T`; zero for the exact kinds.
    pub fn pair_deviation(&self) -> f64 {
        match (self.direct(), self.inverse_candidate()) {
            (Some(t), Some(b)) => {
                let gram = t.matrix_rational().matmul(&b.matrix_rational().transpose());
                deviation_from_diagonality(&gram)
            }
            _ => 0.0,
        }
    }

    /// Lengths this spec supports along one axis.
    fn check_length(&self, n: usize) -> Result<()> {
        match self.kind {
            TransformKind::ExactDht if n > 0 => Ok(()),
            TransformKind::ExactDht => Err(Error::InvalidLength(0)),
            _ if n == N => Ok(()),
            _ => Err(Error::DimensionMismatch(format!(
                "{self} needs axes of length {N}, got {n}"
            ))),
        }
    }

    /// Forward matrix, inverse-side matrix `B` and correction `diag((T B^T)^-1)`
    /// for one axis of length `n`.
    pub fn axis_factors_f64(&self, n: usize) -> Result<(Matrix<f64>, Matrix<f64>, Vec<f64>)> {
        self.check_length(n)?;
        Ok(match self.kind {
            TransformKind::ExactDht => {
                let h = exact_dht_matrix(n)?;
                (h.clone(), h, vec![1.0 / n as f64; n])
            }
            TransformKind::ExactDct => {
                let c = dct_matrix();
                (c.clone(), c, vec![1.0 / N as f64; N])
            }
            TransformKind::Approx(_) => {
                let (t, b, d) = self.axis_factors_rational_big()?;
                (t.to_f64(), b.to_f64(), d.iter().map(Field::to_f64).collect())
            }
        })
    }

    fn axis_factors_rational_big(&self) -> Result<(Matrix<Rational>, Matrix<Rational>, Vec<BigRational>)> {
        let (Some(tc), Some(bc)) = (self.direct(), self.inverse_candidate()) else {
            return Err(Error::InvalidSpec(format!("{self} has no exact rational form")));
        };
        let (t, b) = (tc.matrix_rational(), bc.matrix_rational());
        // Gauss-Jordan on 8x8 dyadic matrices can exceed i128 midway.
        let d = pair_correction(&t.map(rational_to_big), &b.map(rational_to_big))?.diag;
        Ok((t, b, d))
    }

    /// Exact rational factors; approximate kinds only.
    pub fn axis_factors_rational(&self) -> Result<(Matrix<Rational>, Matrix<Rational>, Vec<Rational>)> {
        let (t, b, d) = self.axis_factors_rational_big()?;
        let d = d.iter().map(big_to_rational).collect::<Result<_>>()?;
        Ok((t, b, d))
    }
}

fn big_to_rational(v: &BigRational) -> Result<Rational> {
    let conv = |x: &BigInt| {
        x.to_i128()
            .ok_or_else(|| Error::Overflow(format!("{v} does not fit in i128")))
    };
    Ok(Rational::new(conv(v.numer())?, conv(v.denom())?))
}

impl fmt::Display for TransformSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, self.inverse) {
            (TransformKind::ExactDht, _) => write!(f, "DHT"),
            (TransformKind::ExactDct, _) => write!(f, "DCT"),
            (TransformKind::Approx(c), InversePolicy::Paired(q)) => write!(f, "{c}/{q}"),
            (TransformKind::Approx(c), _) => write!(f, "{c}"),
        }
    }
}

/// Parses the display form: `DHT`, `DCT`, `H(11/8)` or `H(3/2)/H(11/8)`.
impl FromStr for TransformSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let beta = |h: &str| -> Result<Candidate> {
            h.strip_prefix("H(")
                .and_then(|r| r.strip_suffix(')'))
                .ok_or_else(|| Error::InvalidMethod(s.to_string()))?
                .parse()
        };
        match t.to_ascii_lowercase().as_str() {
            "dht" => return Ok(Self::exact_dht()),
            "dct" => return Ok(Self::exact_dct()),
            _ => {}
        }
        match t.split_once(")/") {
            Some((d, q)) => Self::new(
                TransformKind::Approx(beta(&format!("{d})"))?),
                InversePolicy::Paired(beta(q)?),
            ),
            None => Ok(Self::involutional(beta(t)?)),
        }
    }
}

impl FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dht" => Ok(TransformKind::ExactDht),
            "dct" => Ok(TransformKind::ExactDct),
            other => Ok(TransformKind::Approx(other.parse()?)),
        }
    }
}

impl FromStr for InversePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(InversePolicy::ExactInverse),
            "involutional" => Ok(InversePolicy::Involutional),
            other => Ok(InversePolicy::Paired(other.parse()?)),
        }
    }
}

/// `X x1 H1 x2 H2 x3 H3`.
pub fn sdht3_forward<T>(t: &Tensor3<T>, matrices: [&Matrix<T>; 3]) -> Result<Tensor3<T>>
where
    T: Copy + num_traits::Zero + std::ops::Add<Output = T> + std::ops::Mul<Output = T>,
{
    let a = i_mode_product(t, matrices[0], 1)?;
    let b = i_mode_product(&a, matrices[1], 2)?;
    i_mode_product(&b, matrices[2], 3)
}

/// `(F1 + F2 + F3 - F1 F2 F3) ys` without the leading one half; three
/// additions per entry.
pub fn reflect_combine<S: Sample>(ys: &Tensor3<S>) -> Tensor3<S> {
    let [n1, n2, n3] = ys.dims();
    let r = |k: usize, n: usize| (n - k) % n;
    Tensor3::from_fn(ys.dims(), |i, j, k| {
        let (ri, rj, rk) = (r(i, n1), r(j, n2), r(k, n3));
        ys.get(ri, j, k) + ys.get(i, rj, k) + ys.get(i, j, rk) - ys.get(ri, rj, rk)
    })
}

/// Rearranges a separable-domain tensor into the non-separable 3D DHT domain.
pub fn sdht_to_dht<S: Sample>(ys: &Tensor3<S>) -> Tensor3<S> {
    reflect_combine(ys).map(|v| v.shift(-1))
}

/// Precomputed per-axis matrices and the folded inverse scale for one spec
/// and volume shape.
#[derive(Debug, Clone)]
pub struct TransformPlan<T> {
    spec: TransformSpec,
    dims: [usize; 3],
    forward: [Matrix<T>; 3],
    inverse_t: [Matrix<T>; 3],
    scale: Tensor3<T>,
}

fn outer_scale<T: Field + Copy>(d: &[Vec<T>; 3], half: Option<T>) -> Tensor3<T> {
    let dims = [d[0].len(), d[1].len(), d[2].len()];
    Tensor3::from_fn(dims, |i, j, k| {
        let v = d[0][i] * d[1][j] * d[2][k];
        match half {
            Some(h) => v * h,
            None => v,
        }
    })
}

impl TransformPlan<f64> {
    pub fn new(spec: TransformSpec, dims: [usize; 3]) -> Result<Self> {
        let mut f = Vec::with_capacity(3);
        let mut b = Vec::with_capacity(3);
        let mut d = Vec::with_capacity(3);
        for &n in &dims {
            let (t, inv, diag) = spec.axis_factors_f64(n)?;
            f.push(t);
            b.push(inv.transpose());
            d.push(diag);
        }
        let d: [Vec<f64>; 3] = d.try_into().expect("three axes");
        let scale = outer_scale(&d, spec.is_hartley().then_some(0.5));
        Ok(Self {
            spec,
            dims,
            forward: f.try_into().expect("three axes"),
            inverse_t: b.try_into().expect("three axes"),
            scale,
        })
    }

    /// The usual 8x8x8 block plan.
    pub fn block(spec: TransformSpec) -> Result<Self> {
        Self::new(spec, [N; 3])
    }
}

impl TransformPlan<Rational> {
    /// Exact rational 8x8x8 plan for an approximate kind.
    pub fn exact(spec: TransformSpec) -> Result<Self> {
        let (t, b, d) = spec.axis_factors_rational()?;
        let bt = b.transpose();
        let d = [d.clone(), d.clone(), d];
        let scale = outer_scale(&d, Some(Rational::new(1, 2)));
        Ok(Self {
            spec,
            dims: [N; 3],
            forward: [t.clone(), t.clone(), t],
            inverse_t: [bt.clone(), bt.clone(), bt],
            scale,
        })
    }
}

impl<T: Field + Sample> TransformPlan<T> {
    pub fn spec(&self) -> TransformSpec {
        self.spec
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Per-coefficient scale applied before the inverse matrices: the outer
    /// product of the three diagonal corrections, with the one half of the
    /// reflected combination folded in for Hartley kinds.
    pub fn scale(&self) -> &Tensor3<T> {
        &self.scale
    }

    fn check(&self, t: &Tensor3<T>) -> Result<()> {
        if t.dims() != self.dims {
            return Err(Error::DimensionMismatch(format!(
                "plan built for {:?}, got {:?}",
                self.dims,
                t.dims()
            )));
        }
        Ok(())
    }

    /// Separable stage only.
    pub fn separable_forward(&self, x: &Tensor3<T>) -> Result<Tensor3<T>> {
        self.check(x)?;
        sdht3_forward(x, [&self.forward[0], &self.forward[1], &self.forward[2]])
    }

    pub fn forward(&self, x: &Tensor3<T>) -> Result<Tensor3<T>> {
        let ys = self.separable_forward(x)?;
        Ok(if self.spec.is_hartley() { sdht_to_dht(&ys) } else { ys })
    }

    /// Applies the folded scale, the three inverse-side products and, for
    /// Hartley kinds, the reflected combination.
    pub fn inverse(&self, y: &Tensor3<T>) -> Result<Tensor3<T>> {
        self.check(y)?;
        let z = y.zip_map(&self.scale, |a, s| a * s)?;
        let xs = sdht3_forward(&z, [&self.inverse_t[0], &self.inverse_t[1], &self.inverse_t[2]])?;
        Ok(if self.spec.is_hartley() {
            reflect_combine(&xs)
        } else {
            xs
        })
    }
}

pub fn dht3_forward(t: &Tensor3<f64>, spec: TransformSpec) -> Result<Tensor3<f64>> {
    TransformPlan::new(spec, t.dims())?.forward(t)
}

pub fn dht3_inverse(y: &Tensor3<f64>, spec: TransformSpec) -> Result<Tensor3<f64>> {
    TransformPlan::new(spec, y.dims())?.inverse(y)
}

/// Separable 8x8x8 transform as 64 contiguous 1D transforms per axis, with a
/// materialized dimension-shifting transpose after each pass.
pub fn row_column_execute<S, K>(t: &Tensor3<S>, kernel: &K) -> Result<Tensor3<S>>
where
    S: Sample,
    K: Kernel1d<S> + ?Sized,
{
    if t.dims() != [N; 3] {
        return Err(Error::DimensionMismatch(format!(
            "row-column execution needs an 8x8x8 block, got {:?}",
            t.dims()
        )));
    }
    let mut cur = t.clone();
    for _ in 0..3 {
        for row in cur.data_mut().chunks_exact_mut(N) {
            let x: [S; N] = row.try_into().expect("row of length 8");
            row.copy_from_slice(&kernel.apply(&x));
        }
        cur = cur.shift_dims();
    }
    Ok(cur)
}
