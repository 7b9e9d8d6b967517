//! PSNR and slice-wise SSIM between volumes, and block-weighted aggregation.

use rayon::prelude::*;

use crate::tensor::Tensor3;
use crate::{Error, Result};

const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

fn check_dims(a: &Tensor3<f64>, b: &Tensor3<f64>) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

/// `2^b - 1`.
pub fn peak(bit_depth: u8) -> f64 {
    2f64.powi(bit_depth as i32) - 1.0
}

pub fn mse(a: &Tensor3<f64>, b: &Tensor3<f64>) -> Result<f64> {
    check_dims(a, b)?;
    let sum: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.len() as f64)
}

/// `10 log10(peak^2 / mse)`; `f64::INFINITY` when the volumes are identical.
pub fn psnr(a: &Tensor3<f64>, b: &Tensor3<f64>, bit_depth: u8) -> Result<f64> {
    let e = mse(a, b)?;
    if e == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak(bit_depth).powi(2) / e).log10())
}

fn gaussian_window() -> [f64; WINDOW] {
    let c = (WINDOW / 2) as f64;
    let mut w: [f64; WINDOW] = std::array::from_fn(|i| (-((i as f64 - c).powi(2)) / (2.0 * SIGMA * SIGMA)).exp());
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Valid-mode separable filtering of a `rows x cols` image.
fn filter_valid(img: &[f64], rows: usize, cols: usize, w: &[f64; WINDOW]) -> Vec<f64> {
    let oc = cols - WINDOW + 1;
    let or = rows - WINDOW + 1;
    let mut horiz = vec![0.0; rows * oc];
    for r in 0..rows {
        let row = &img[r * cols..(r + 1) * cols];
        for c in 0..oc {
            horiz[r * oc + c] = w.iter().zip(&row[c..c + WINDOW]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; or * oc];
    for r in 0..or {
        for c in 0..oc {
            out[r * oc + c] = (0..WINDOW).map(|t| w[t] * horiz[(r + t) * oc + c]).sum();
        }
    }
    out
}

/// Mean SSIM of two `rows x cols` images with dynamic range `range`.
pub fn ssim_2d(x: &[f64], y: &[f64], rows: usize, cols: usize, range: f64) -> Result<f64> {
    if rows < WINDOW || cols < WINDOW {
        return Err(Error::SliceTooSmall { rows, cols });
    }
    let w = gaussian_window();
    let c1 = (K1 * range).powi(2);
    let c2 = (K2 * range).powi(2);
    let prod = |f: fn(f64, f64) -> f64| -> Vec<f64> { x.iter().zip(y).map(|(&a, &b)| f(a, b)).collect() };
    let mx = filter_valid(x, rows, cols, &w);
    let my = filter_valid(y, rows, cols, &w);
    let mxx = filter_valid(&prod(|a, _| a * a), rows, cols, &w);
    let myy = filter_valid(&prod(|_, b| b * b), rows, cols, &w);
    let mxy = filter_valid(&prod(|a, b| a * b), rows, cols, &w);
    let mut sum = 0.0;
    for i in 0..mx.len() {
        let (ux, uy) = (mx[i], my[i]);
        let vx = mxx[i] - ux * ux;
        let vy = myy[i] - uy * uy;
        let cxy = mxy[i] - ux * uy;
        sum += ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
    }
    Ok(sum / mx.len() as f64)
}

fn slice(t: &Tensor3<f64>, k: usize) -> Vec<f64> {
    let [n1, n2, _] = t.dims();
    let mut out = Vec::with_capacity(n1 * n2);
    for i in 0..n1 {
        for j in 0..n2 {
            out.push(t.get(i, j, k));
        }
    }
    out
}

/// SSIM of every axis-3 slice, dynamic range `range`.
pub fn ssim_slices_with_range(a: &Tensor3<f64>, b: &Tensor3<f64>, range: f64) -> Result<Vec<f64>> {
    check_dims(a, b)?;
    let [n1, n2, n3] = a.dims();
    (0..n3)
        .into_par_iter()
        .map(|k| ssim_2d(&slice(a, k), &slice(b, k), n1, n2, range))
        .collect()
}

/// Mean over axis-3 slices of the per-slice mean SSIM.
pub fn ssim(a: &Tensor3<f64>, b: &Tensor3<f64>, bit_depth: u8) -> Result<f64> {
    let s = ssim_slices_with_range(a, b, peak(bit_depth))?;
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct QualityReport {
    /// `f64::INFINITY` for identical inputs.
    pub psnr_db: f64,
    pub ssim: f64,
    pub per_slice_ssim: Vec<f64>,
    /// Weights behind an aggregated report; a single entry of 1 otherwise.
    pub weights: Vec<f64>,
}

pub fn evaluate(orig: &Tensor3<f64>, recon: &Tensor3<f64>, bit_depth: u8) -> Result<QualityReport> {
    let psnr_db = psnr(orig, recon, bit_depth)?;
    let per_slice_ssim = ssim_slices_with_range(orig, recon, peak(bit_depth))?;
    Ok(QualityReport {
        psnr_db,
        ssim: per_slice_ssim.iter().sum::<f64>() / per_slice_ssim.len() as f64,
        per_slice_ssim,
        weights: vec![1.0],
    })
}

/// Block-count-weighted mean of PSNR (in dB) and SSIM across volumes.
pub fn aggregate(reports: &[QualityReport], block_counts: &[usize]) -> Result<QualityReport> {
    if reports.len() != block_counts.len() {
        return Err(Error::LengthMismatch(format!(
            "{} reports but {} block counts",
            reports.len(),
            block_counts.len()
        )));
    }
    let total: usize = block_counts.iter().sum();
    if total == 0 {
        return Err(Error::LengthMismatch("total block weight is zero".into()));
    }
    let weights: Vec<f64> = block_counts.iter().map(|&c| c as f64).collect();
    let mean = |f: fn(&QualityReport) -> f64| {
        reports
            .iter()
            .zip(&weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(r, w)| f(r) * w)
            .sum::<f64>()
            / total as f64
    };
    Ok(QualityReport {
        psnr_db: mean(|r| r.psnr_db),
        ssim: mean(|r| r.ssim),
        per_slice_ssim: reports.iter().flat_map(|r| r.per_slice_ssim.iter().copied()).collect(),
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{integer_tensor, rng};

    fn naive_ssim_2d(x: &[f64], y: &[f64], rows: usize, cols: usize, range: f64) -> f64 {
        let c = 5.0;
        let mut w = [[0.0; WINDOW]; WINDOW];
        let mut total = 0.0;
        for (i, row) in w.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (-((i as f64 - c).powi(2) + (j as f64 - c).powi(2)) / 4.5).exp();
                total += *v;
            }
        }
        let (c1, c2) = ((0.01 * range).powi(2), (0.03 * range).powi(2));
        let mut acc = 0.0;
        let mut count = 0;
        for r in 0..=rows - WINDOW {
            for s in 0..=cols - WINDOW {
                let (mut ux, mut uy, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..WINDOW {
                    for j in 0..WINDOW {
                        let wt = w[i][j] / total;
                        let a = x[(r + i) * cols + s + j];
                        let b = y[(r + i) * cols + s + j];
                        ux += wt * a;
                        uy += wt * b;
                        xx += wt * a * a;
                        yy += wt * b * b;
                        xy += wt * a * b;
                    }
                }
                let num = (2.0 * ux * uy + c1) * (2.0 * (xy - ux * uy) + c2);
                let den = (ux * ux + uy * uy + c1) * (xx - ux * ux + yy - uy * uy + c2);
                acc += num / den;
                count += 1;
            }
        }
        acc / count as f64
    }

    #[test]
    fn psnr_examples() {
        let mut r = rng(1);
        let a = integer_tensor([8, 8, 8], 0, 254, &mut r);
        assert_eq!(psnr(&a, &a, 8).unwrap(), f64::INFINITY);
        let b = a.map(|v| v + 1.0);
        assert!((psnr(&a, &b, 8).unwrap() - 48.1308036086791).abs() < 1e-9);

        let c = integer_tensor([8, 8, 8], 0, 255, &mut r);
        let mut sum = 0.0;
        for (x, y) in a.data().iter().zip(c.data()) {
            sum += (x - y).powi(2);
        }
        let want = 10.0 * (255.0f64 * 255.0 / (sum / 512.0)).log10();
        assert!((psnr(&a, &c, 8).unwrap() - want).abs() < 1e-9);
        assert_eq!(psnr(&a, &c, 8).unwrap(), psnr(&c, &a, 8).unwrap());
        assert!(psnr(&a, &Tensor3::filled([8, 8, 4], 0.0), 8).is_err());
    }

    #[test]
    fn ssim_examples() {
        let mut r = rng(2);
        let a = integer_tensor([16, 12, 3], 0, 255, &mut r);
        assert_eq!(ssim(&a, &a, 8).unwrap(), 1.0);
        assert!(ssim(&a, &Tensor3::filled(a.dims(), 0.0), 8).unwrap() < 1.0);
        assert!(matches!(
            ssim(
                &Tensor3::filled([10, 16, 2], 0.0),
                &Tensor3::filled([10, 16, 2], 0.0),
                8
            ),
            Err(Error::SliceTooSmall { .. })
        ));
    }

    #[test]
    fn ssim_matches_direct_convolution() {
        let mut r = rng(3);
        let a = integer_tensor([16, 13, 2], 0, 255, &mut r);
        let b = integer_tensor([16, 13, 2], 0, 255, &mut r);
        let fast = ssim_slices_with_range(&a, &b, 255.0).unwrap();
        for (k, got) in fast.iter().enumerate() {
            let want = naive_ssim_2d(&slice(&a, k), &slice(&b, k), 16, 13, 255.0);
            assert!((got - want).abs() < 1e-6);
        }
        assert!((ssim(&a, &b, 8).unwrap() - ssim(&b, &a, 8).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn ssim_is_scale_invariant() {
        let mut r = rng(4);
        let a = integer_tensor([12, 12, 2], 0, 255, &mut r);
        let b = integer_tensor([12, 12, 2], 0, 255, &mut r);
        let s1 = ssim_slices_with_range(&a, &b, 255.0).unwrap();
        let s2 = ssim_slices_with_range(&a.map(|v| v * 3.0), &b.map(|v| v * 3.0), 765.0).unwrap();
        for (x, y) in s1.iter().zip(&s2) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn aggregation() {
        let rep = |p: f64, s: f64| QualityReport {
            psnr_db: p,
            ssim: s,
            per_slice_ssim: vec![s],
            weights: vec![1.0],
        };
        let one = aggregate(&[rep(40.0, 0.9)], &[5]).unwrap();
        assert_eq!((one.psnr_db, one.ssim), (40.0, 0.9));
        let two = aggregate(&[rep(40.0, 0.8), rep(44.0, 0.9)], &[1, 3]).unwrap();
        assert!((two.psnr_db - 43.0).abs() < 1e-12);
        assert!((two.ssim - 0.875).abs() < 1e-12);
        assert!(matches!(
            aggregate(&[rep(1.0, 1.0)], &[0]),
            Err(Error::LengthMismatch(_))
        ));
        assert!(aggregate(&[rep(1.0, 1.0)], &[1, 2]).is_err());
    }
}
