//! Seeded synthetic data: separable AR(1) volumes and random test blocks.

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::kernels::N;
use crate::tensor::Tensor3;
use crate::{Error, Result};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Zero-mean, unit-variance field whose correlation between voxels `d` apart
/// is `rho^(|d1| + |d2| + |d3|)`.
pub fn ar1_field<R: Rng>(dims: [usize; 3], rho: f64, rng: &mut R) -> Result<Tensor3<f64>> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidCorrelation(rho));
    }
    let mut t = Tensor3::from_fn(dims, |_, _, _| rng.sample::<f64, _>(StandardNormal));
    let gain = (1.0 - rho * rho).sqrt();
    // filter along the last axis, then rotate so each axis gets a turn
    for _ in 0..3 {
        let n = t.dims()[2];
        for row in t.data_mut().chunks_mut(n) {
            for k in 1..n {
                row[k] = rho * row[k - 1] + gain * row[k];
            }
        }
        t = t.shift_dims();
    }
    Ok(t)
}

/// AR(1) volume mapped to `b`-bit integer samples: mean `2^b / 2`, standard
/// deviation `2^b / 8`, rounded and clamped to `[0, 2^b - 1]`.
pub fn ar1_volume(dims: [usize; 3], rho: f64, bit_depth: u8, seed: u64) -> Result<Tensor3<f64>> {
    let mut r = rng(seed);
    let field = ar1_field(dims, rho, &mut r)?;
    let range = 2f64.powi(bit_depth as i32);
    let max = range - 1.0;
    Ok(field.map(|&v| (range / 2.0 + v * range / 8.0).round().clamp(0.0, max)))
}

/// `count` independent unit-variance AR(1) blocks of size 8x8x8.
pub fn ar1_blocks(count: usize, rho: f64, seed: u64) -> Result<Vec<Tensor3<f64>>> {
    let mut r = rng(seed);
    (0..count).map(|_| ar1_field([N; 3], rho, &mut r)).collect()
}

/// Uniform integers in `lo..=hi`.
pub fn integer_tensor<R: Rng>(dims: [usize; 3], lo: i64, hi: i64, rng: &mut R) -> Tensor3<f64> {
    Tensor3::from_fn(dims, |_, _, _| rng.random_range(lo..=hi) as f64)
}

/// Uniform reals in `[-1, 1)`.
pub fn real_tensor<R: Rng>(dims: [usize; 3], rng: &mut R) -> Tensor3<f64> {
    Tensor3::from_fn(dims, |_, _, _| rng.random_range(-1.0..1.0))
}
