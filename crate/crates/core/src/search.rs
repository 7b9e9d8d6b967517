//! Exhaustive sweep over the dyadic grid `beta = m/8`, `m = 1..=24`, scoring
//! each candidate by deviation from diagonality, MSE against the exact DHT,
//! unified coding gain and arithmetic cost.

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;

use crate::dyadic::DyadicRational;
use crate::kernels::{build_parametric, build_stages, count_1d, exact_dht_matrix, Beta, FactorizationStages};
use crate::linalg::{Field, Matrix};
use crate::scalar::OpCount;
use crate::{Error, Rational, Result};

pub const GRID_MIN: u8 = 1;
pub const GRID_MAX: u8 = 24;

/// A grid index `m` with `beta = m / 8`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Candidate(u8);

impl Candidate {
    pub fn new(m: u8) -> Result<Self> {
        if (GRID_MIN..=GRID_MAX).contains(&m) {
            Ok(Self(m))
        } else if m == 0 {
            Err(Error::SingularParameter)
        } else {
            Err(Error::InvalidCandidate(m))
        }
    }

    pub fn all() -> impl Iterator<Item = Candidate> {
        (GRID_MIN..=GRID_MAX).map(Candidate)
    }

    pub fn m(&self) -> u8 {
        self.0
    }

    pub fn beta(&self) -> DyadicRational {
        DyadicRational::eighths(i64::from(self.0))
    }

    pub fn matrix_rational(&self) -> Matrix<Rational> {
        build_parametric(self.beta())
            .and_then(|p| p.to_rational().ok_or(Error::SingularParameter))
            .expect("grid betas are nonzero dyadics")
    }

    pub fn matrix_f64(&self) -> Matrix<f64> {
        self.matrix_rational().to_f64()
    }

    pub fn stages(&self) -> FactorizationStages {
        build_stages(Beta::Dyadic(self.beta())).expect("grid betas are nonzero")
    }

    pub fn op_count(&self) -> OpCount {
        count_1d(Beta::Dyadic(self.beta())).expect("grid betas are nonzero")
    }
}

impl std::str::FromStr for Candidate {
    type Err = Error;

    /// Parses `beta` as an integer, a fraction `p/q` or a decimal, e.g. `11/8`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidMethod(s.to_string());
        let t = s.trim();
        let value = match t.split_once('/') {
            Some((p, q)) => {
                let p: f64 = p.trim().parse().map_err(|_| bad())?;
                let q: f64 = q.trim().parse().map_err(|_| bad())?;
                p / q
            }
            None => t.parse::<f64>().map_err(|_| bad())?,
        };
        let m = value * 8.0;
        if !m.is_finite() || m.fract() != 0.0 || !(0.0..=255.0).contains(&m) {
            return Err(bad());
        }
        Candidate::new(m as u8)
    }
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "H({})", self.beta())
    }
}

/// AR(1) signal model behind the MSE and coding-gain figures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricConfig {
    pub rho: f64,
    pub n: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self { rho: 0.95, n: 8 }
    }
}

impl MetricConfig {
    pub fn new(rho: f64) -> Result<Self> {
        if rho > 0.0 && rho < 1.0 {
            Ok(Self { rho, n: 8 })
        } else {
            Err(Error::InvalidCorrelation(rho))
        }
    }

    /// `R[i][j] = rho^|i - j|`.
    pub fn covariance(&self) -> Matrix<f64> {
        Matrix::from_fn(self.n, self.n, |i, j| self.rho.powi(i.abs_diff(j) as i32))
    }
}

/// `sum diag(M)^2 / sum M^2`, kept in the matrix's own field so exact inputs
/// compare exactly.
pub fn diagonal_energy_ratio<T: Field>(m: &Matrix<T>) -> T {
    let mut diag = T::zero();
    let mut total = T::zero();
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            let sq = m[(r, c)].clone() * m[(r, c)].clone();
            if r == c {
                diag = diag + sq.clone();
            }
            total = total + sq;
        }
    }
    if total.is_zero() {
        T::one()
    } else {
        diag / total
    }
}

/// `delta(M) = 1 - ||diag(M)||_F / ||M||_F`; zero exactly when `M` is diagonal.
pub fn deviation_from_diagonality<T: Field>(m: &Matrix<T>) -> f64 {
    let ratio = diagonal_energy_ratio(m);
    if ratio.is_one() {
        return 0.0;
    }
    1.0 - ratio.to_f64().sqrt()
}

fn validate_square(m: &Matrix<f64>, n: usize) -> Result<()> {
    if m.rows() != n || m.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "expected {n}x{n} matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(())
}

/// `(1/n) trace((H - T) R (H - T)^T)` against the exact DHT under AR(1).
pub fn mse_vs_exact(candidate: &Matrix<f64>, config: &MetricConfig) -> Result<f64> {
    validate_square(candidate, config.n)?;
    let exact = exact_dht_matrix(config.n)?;
    let err = Matrix::from_fn(config.n, config.n, |r, c| exact[(r, c)] - candidate[(r, c)]);
    let cov = err.matmul(&config.covariance()).matmul(&err.transpose());
    Ok(cov.diag().iter().sum::<f64>() / config.n as f64)
}

/// Unified coding gain in dB: `10 log10 prod_i (A_i B_i)^(-1/n)` with
/// `A_i = (T R T^T)_ii` and `B_i` the squared norm of column `i` of `T^-1`.
pub fn coding_gain_db(candidate: &Matrix<f64>, config: &MetricConfig) -> Result<f64> {
    validate_square(candidate, config.n)?;
    let inv = candidate.inverse().ok_or(Error::NonInvertibleGram)?;
    let a = candidate
        .matmul(&config.covariance())
        .matmul(&candidate.transpose())
        .diag();
    let n = config.n;
    let log_sum: f64 = (0..n)
        .map(|i| {
            let b: f64 = (0..n).map(|r| inv[(r, i)] * inv[(r, i)]).sum();
            (a[i] * b).log10()
        })
        .sum();
    Ok(-10.0 * log_sum / n as f64)
}

/// Figures of merit for one grid candidate and its best quasi-inverse.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CandidateReport {
    pub m: u8,
    pub beta: String,
    pub delta_self: f64,
    pub mse: f64,
    pub coding_gain_db: f64,
    #[serde(skip)]
    pub op_count: OpCount,
    pub best_inverse_m: u8,
    pub delta_pair: f64,
    /// `delta_pair` is zero in exact arithmetic.
    pub exact_inverse: bool,
}

impl CandidateReport {
    pub fn candidate(&self) -> Candidate {
        Candidate(self.m)
    }
}

/// Orders quasi-inverse choices: lower deviation, then cheaper, then lower `q`.
fn pair_order(a: &(Candidate, Rational), b: &(Candidate, Rational)) -> Ordering {
    // a larger diagonal-energy ratio is a smaller deviation
    b.1.cmp(&a.1)
        .then_with(|| {
            let (ca, cb) = (a.0.op_count(), b.0.op_count());
            (ca.additions, ca.shifts).cmp(&(cb.additions, cb.shifts))
        })
        .then_with(|| a.0.cmp(&b.0))
}

/// Best inverse partner `q` for `direct` among all grid candidates.
pub fn best_inverse(direct: Candidate) -> (Candidate, Rational) {
    let d = direct.matrix_rational();
    Candidate::all()
        .map(|q| (q, diagonal_energy_ratio(&d.matmul(&q.matrix_rational()))))
        .min_by(pair_order)
        .expect("grid is nonempty")
}

pub fn evaluate(candidate: Candidate, config: &MetricConfig) -> Result<CandidateReport> {
    let exact_m = candidate.matrix_rational();
    let m = exact_m.to_f64();
    let self_ratio = diagonal_energy_ratio(&exact_m.matmul(&exact_m));
    let (q, pair_ratio) = best_inverse(candidate);
    let one = Rational::from_integer(1);
    let to_delta = |r: Rational| if r == one { 0.0 } else { 1.0 - r.to_f64().sqrt() };
    Ok(CandidateReport {
        m: candidate.m(),
        beta: candidate.beta().to_string(),
        delta_self: to_delta(self_ratio),
        mse: mse_vs_exact(&m, config)?,
        coding_gain_db: coding_gain_db(&m, config)?,
        op_count: candidate.op_count(),
        best_inverse_m: q.m(),
        delta_pair: to_delta(pair_ratio),
        exact_inverse: pair_ratio == one,
    })
}

/// One report per grid point, in ascending `m`.
pub fn sweep(config: &MetricConfig) -> Result<Vec<CandidateReport>> {
    Candidate::all()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&c| evaluate(c, config))
        .collect()
}

/// The transforms singled out by the sweep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub lowest_mse: Candidate,
    pub highest_gain: Candidate,
    pub lowest_cost: Candidate,
    /// Exact inverse partner of the lowest-cost candidate, when one exists.
    pub exact_partner: Option<Candidate>,
}

impl Selection {
    pub fn members(&self) -> Vec<Candidate> {
        let mut v = vec![self.lowest_cost, self.lowest_mse, self.highest_gain];
        v.extend(self.exact_partner);
        v.sort();
        v.dedup();
        v
    }
}

pub fn select(reports: &[CandidateReport]) -> Option<Selection> {
    let lowest_mse = reports.iter().min_by(|a, b| a.mse.total_cmp(&b.mse))?;
    let highest_gain = reports
        .iter()
        .max_by(|a, b| a.coding_gain_db.total_cmp(&b.coding_gain_db))?;
    let lowest_cost = reports
        .iter()
        .min_by_key(|r| (r.op_count.additions, r.op_count.shifts, r.m))?;
    Some(Selection {
        lowest_mse: lowest_mse.candidate(),
        highest_gain: highest_gain.candidate(),
        lowest_cost: lowest_cost.candidate(),
        exact_partner: lowest_cost
            .exact_inverse
            .then_some(Candidate(lowest_cost.best_inverse_m)),
    })
}
