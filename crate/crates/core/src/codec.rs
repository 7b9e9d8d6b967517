//! Fixed-bitrate block codec: 8x8x8 partitioning with edge replication, 3D
//! zigzag ordering, coefficient truncation, a little-endian stream format and
//! rate-distortion sweeps.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::kernels::N;
use crate::quality::{aggregate, evaluate, QualityReport};
use crate::search::Candidate;
use crate::synth::ar1_blocks;
use crate::tensor::Tensor3;
use crate::transform3d::{TransformKind, TransformPlan, TransformSpec};
use crate::{Error, Result};

pub const BLOCK_LEN: usize = N * N * N;

/// Pairs whose `T * B^T` deviates further than this from diagonal are
/// rejected; the involutional `H(1)` sits at 1.94e-2.
pub const MAX_PAIR_DEVIATION: f64 = 1e-2;

/// Fractional bits kept for irrational (exact DHT and DCT) coefficients.
pub const FLOAT_FRACTION_BITS: i32 = 16;

pub const TRAINING_BLOCKS: usize = 10_000;
pub const TRAINING_RHO: f64 = 0.95;

const MAGIC: &[u8; 4] = b"H3DC";
const VERSION: u16 = 1;

fn unflat(i: usize) -> (usize, usize, usize) {
    (i / (N * N), (i / N) % N, i % N)
}

/// Coefficient retention priority: `order()[rank]` is a flat block index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZigzagOrder {
    order: Vec<u16>,
}

impl ZigzagOrder {
    pub fn new(order: Vec<u16>) -> Result<Self> {
        let mut seen = [false; BLOCK_LEN];
        if order.len() != BLOCK_LEN {
            return Err(Error::InvalidConfig(format!(
                "zigzag has {} entries, expected 512",
                order.len()
            )));
        }
        for &i in &order {
            let i = i as usize;
            if i >= BLOCK_LEN || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidConfig("zigzag is not a permutation of 0..512".into()));
            }
        }
        if order[0] != 0 {
            return Err(Error::InvalidConfig("zigzag rank 0 must be coefficient (0,0,0)".into()));
        }
        Ok(Self { order })
    }

    pub fn order(&self) -> &[u16] {
        &self.order
    }

    pub fn coords(&self, rank: usize) -> (usize, usize, usize) {
        unflat(self.order[rank] as usize)
    }
}

/// Ascending diagonal planes `k1 + k2 + k3`, lexicographic within a plane.
pub fn dct_zigzag() -> ZigzagOrder {
    let mut idx: Vec<usize> = (0..BLOCK_LEN).collect();
    idx.sort_by_key(|&i| {
        let (a, b, c) = unflat(i);
        (a + b + c, i)
    });
    ZigzagOrder {
        order: idx.into_iter().map(|i| i as u16).collect(),
    }
}

/// Orders coefficients by mean squared transform-domain magnitude over
/// `blocks`, descending, ties by ascending `k1 + k2 + k3` then index. The DC
/// coefficient is always placed first.
pub fn train_zigzag(spec: TransformSpec, blocks: &[Tensor3<f64>]) -> Result<ZigzagOrder> {
    if blocks.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let plan = TransformPlan::block(spec)?;
    let energy = blocks
        .par_iter()
        .map(|b| {
            plan.forward(b)
                .map(|y| y.data().iter().map(|v| v * v).collect::<Vec<_>>())
        })
        .try_reduce(
            || vec![0.0; BLOCK_LEN],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    let mut idx: Vec<usize> = (1..BLOCK_LEN).collect();
    idx.sort_by(|&x, &y| {
        let (a, b, c) = unflat(x);
        let (d, e, f) = unflat(y);
        energy[y]
            .total_cmp(&energy[x])
            .then((a + b + c).cmp(&(d + e + f)))
            .then(x.cmp(&y))
    });
    let mut order = vec![0u16];
    order.extend(idx.into_iter().map(|i| i as u16));
    ZigzagOrder::new(order)
}

/// The ordering used when none is supplied: the plane order for the DCT and
/// an AR(1)-model training for the Hartley kinds.
pub fn default_zigzag(spec: TransformSpec, seed: u64) -> Result<ZigzagOrder> {
    if spec.kind() == TransformKind::ExactDct {
        return Ok(dct_zigzag());
    }
    train_zigzag(spec, &ar1_blocks(TRAINING_BLOCKS, TRAINING_RHO, seed)?)
}

/// Block layout of a volume; trailing partial blocks are padded by repeating
/// the last plane along each short axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockGrid {
    dims: [usize; 3],
    counts: [usize; 3],
}

impl BlockGrid {
    pub fn new(dims: [usize; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::DimensionMismatch(format!("empty volume {dims:?}")));
        }
        Ok(Self {
            dims,
            counts: dims.map(|n| n.div_ceil(N)),
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn block_count(&self) -> usize {
        self.counts.iter().product()
    }

    fn origin(&self, b: usize) -> [usize; 3] {
        let c = self.counts;
        [b / (c[1] * c[2]) * N, (b / c[2]) % c[1] * N, b % c[2] * N]
    }

    /// Block `b` in row-major block order, edge-replicated where it overhangs.
    pub fn extract(&self, volume: &Tensor3<f64>, b: usize) -> Tensor3<f64> {
        let o = self.origin(b);
        let d = self.dims;
        Tensor3::from_fn([N; 3], |i, j, k| {
            volume.get(
                (o[0] + i).min(d[0] - 1),
                (o[1] + j).min(d[1] - 1),
                (o[2] + k).min(d[2] - 1),
            )
        })
    }

    /// Writes the in-range part of block `b` back into `volume`.
    pub fn place(&self, volume: &mut Tensor3<f64>, b: usize, block: &Tensor3<f64>) {
        let o = self.origin(b);
        let d = self.dims;
        for i in 0..N.min(d[0] - o[0]) {
            for j in 0..N.min(d[1] - o[1]) {
                for k in 0..N.min(d[2] - o[2]) {
                    volume.set(o[0] + i, o[1] + j, o[2] + k, block.get(i, j, k));
                }
            }
        }
    }
}

pub fn partition(volume: &Tensor3<f64>) -> Result<(Vec<Tensor3<f64>>, BlockGrid)> {
    let grid = BlockGrid::new(volume.dims())?;
    let blocks = (0..grid.block_count()).map(|b| grid.extract(volume, b)).collect();
    Ok((blocks, grid))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodecConfig {
    spec: TransformSpec,
    retained: usize,
    bit_depth: u8,
    zigzag: ZigzagOrder,
}

impl CodecConfig {
    pub fn new(spec: TransformSpec, retained: usize, bit_depth: u8, zigzag: ZigzagOrder) -> Result<Self> {
        if !(1..=BLOCK_LEN).contains(&retained) {
            return Err(Error::InvalidConfig(format!(
                "retained count {retained} outside 1..=512"
            )));
        }
        if bit_depth != 8 && bit_depth != 16 {
            return Err(Error::InvalidConfig(format!("bit depth {bit_depth} is not 8 or 16")));
        }
        let delta = spec.pair_deviation();
        if delta > MAX_PAIR_DEVIATION {
            return Err(Error::InvalidConfig(format!(
                "{spec} has inverse-pair deviation {delta:.3e} above {MAX_PAIR_DEVIATION:e}"
            )));
        }
        Ok(Self {
            spec,
            retained,
            bit_depth,
            zigzag,
        })
    }

    /// Picks `L = bpv * 512 / b`, which must be a whole number.
    pub fn with_bitrate(spec: TransformSpec, bpv: f64, bit_depth: u8, zigzag: ZigzagOrder) -> Result<Self> {
        let l = retained_for(bpv, bit_depth)?;
        Self::new(spec, l, bit_depth, zigzag)
    }

    pub fn spec(&self) -> TransformSpec {
        self.spec
    }

    pub fn retained(&self) -> usize {
        self.retained
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    pub fn zigzag(&self) -> &ZigzagOrder {
        &self.zigzag
    }

    /// Bits per voxel, `L * b / 512`.
    pub fn bitrate(&self) -> f64 {
        (self.retained * self.bit_depth as usize) as f64 / BLOCK_LEN as f64
    }

    pub fn with_retained(&self, retained: usize) -> Result<Self> {
        Self::new(self.spec, retained, self.bit_depth, self.zigzag.clone())
    }
}

pub fn retained_for(bpv: f64, bit_depth: u8) -> Result<usize> {
    let l = bpv * BLOCK_LEN as f64 / bit_depth as f64;
    if !l.is_finite() || l.fract() != 0.0 || l < 1.0 || l > BLOCK_LEN as f64 {
        return Err(Error::NonIntegralRetention { bpv, bit_depth });
    }
    Ok(l as usize)
}

/// Encoded volume: the first `L` zigzag coefficients of every block as
/// integers `round(c * 2^scale_log2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedVolume {
    dims: [usize; 3],
    config: CodecConfig,
    scale_log2: i8,
    coefficients: Vec<i32>,
}

impl CompressedVolume {
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn config(&self) -> &CodecConfig {
        &self.config
    }

    pub fn scale_log2(&self) -> i8 {
        self.scale_log2
    }

    pub fn coefficients(&self) -> &[i32] {
        &self.coefficients
    }

    pub fn block_count(&self) -> usize {
        self.coefficients.len() / self.config.retained
    }

    /// The same stream cut down to its first `retained` coefficients per block.
    pub fn truncated(&self, retained: usize) -> Result<Self> {
        if retained > self.config.retained {
            return Err(Error::InvalidConfig(format!(
                "cannot keep {retained} of {} stored coefficients",
                self.config.retained
            )));
        }
        let config = self.config.with_retained(retained)?;
        let coefficients = self
            .coefficients
            .chunks_exact(self.config.retained)
            .flat_map(|c| c[..retained].iter().copied())
            .collect();
        Ok(Self {
            dims: self.dims,
            config,
            scale_log2: self.scale_log2,
            coefficients,
        })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let c = &self.config;
        let (tid, tparam) = match c.spec.kind() {
            TransformKind::ExactDht => (0u8, 0u8),
            TransformKind::ExactDct => (1, 0),
            TransformKind::Approx(m) => (2, m.m()),
        };
        let (pid, pparam) = match c.spec.inverse_policy() {
            crate::InversePolicy::ExactInverse => (0u8, 0u8),
            crate::InversePolicy::Involutional => (1, 0),
            crate::InversePolicy::Paired(q) => (2, q.m()),
        };
        let mut buf = Vec::with_capacity(32 + 2 * BLOCK_LEN + 4 * self.coefficients.len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        for d in self.dims {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        buf.push(c.bit_depth);
        buf.extend_from_slice(&(c.retained as u16).to_le_bytes());
        buf.extend_from_slice(&[tid, tparam, pid, pparam, self.scale_log2 as u8]);
        for &z in c.zigzag.order() {
            buf.extend_from_slice(&z.to_le_bytes());
        }
        for &v in &self.coefficients {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| Error::MalformedStream(e.to_string()))?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::MalformedStream(m.to_string());
        let mut cur = bytes;
        let mut take = |n: usize| -> Result<&[u8]> {
            if cur.len() < n {
                return Err(bad("truncated header"));
            }
            let (head, tail) = cur.split_at(n);
            cur = tail;
            Ok(head)
        };
        if take(4)? != MAGIC {
            return Err(bad("missing H3DC magic"));
        }
        let version = u16::from_le_bytes(take(2)?.try_into().expect("2 bytes"));
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            *d = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
        }
        let bit_depth = take(1)?[0];
        let retained = u16::from_le_bytes(take(2)?.try_into().expect("2 bytes")) as usize;
        let h = take(5)?;
        let (tid, tparam, pid, pparam, scale_log2) = (h[0], h[1], h[2], h[3], h[4] as i8);
        let kind = match tid {
            0 => TransformKind::ExactDht,
            1 => TransformKind::ExactDct,
            2 => TransformKind::Approx(Candidate::new(tparam)?),
            t => return Err(bad(&format!("unknown transform id {t}"))),
        };
        let policy = match pid {
            0 => crate::InversePolicy::ExactInverse,
            1 => crate::InversePolicy::Involutional,
            2 => crate::InversePolicy::Paired(Candidate::new(pparam)?),
            p => return Err(bad(&format!("unknown inverse policy id {p}"))),
        };
        let zz = take(2 * BLOCK_LEN)?
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect();
        let config = CodecConfig::new(
            TransformSpec::new(kind, policy)?,
            retained,
            bit_depth,
            ZigzagOrder::new(zz)?,
        )?;
        let grid = BlockGrid::new(dims)?;
        let expected = grid.block_count() * retained * 4;
        if cur.len() != expected {
            return Err(bad(&format!("payload has {} bytes, expected {expected}", cur.len())));
        }
        let coefficients = cur
            .chunks_exact(4)
            .map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Self {
            dims,
            config,
            scale_log2,
            coefficients,
        })
    }
}

/// Forward transform of every block of `volume`, in block order.
pub fn forward_blocks(volume: &Tensor3<f64>, spec: TransformSpec) -> Result<Vec<Tensor3<f64>>> {
    let grid = BlockGrid::new(volume.dims())?;
    let plan = TransformPlan::block(spec)?;
    (0..grid.block_count())
        .into_par_iter()
        .map(|b| plan.forward(&grid.extract(volume, b)))
        .collect()
}

/// Inverse of [`forward_blocks`], cropped to `dims`.
pub fn inverse_blocks(blocks: &[Tensor3<f64>], dims: [usize; 3], spec: TransformSpec) -> Result<Tensor3<f64>> {
    let grid = BlockGrid::new(dims)?;
    if blocks.len() != grid.block_count() {
        return Err(Error::LengthMismatch(format!(
            "{} blocks given, a {dims:?} volume has {}",
            blocks.len(),
            grid.block_count()
        )));
    }
    let plan = TransformPlan::block(spec)?;
    let spatial: Vec<Tensor3<f64>> = blocks.par_iter().map(|y| plan.inverse(y)).collect::<Result<_>>()?;
    let mut out = Tensor3::filled(dims, 0.0);
    for (b, block) in spatial.iter().enumerate() {
        grid.place(&mut out, b, block);
    }
    Ok(out)
}

/// Fractional bits that represent every coefficient of `spec` exactly for
/// integer input, or [`FLOAT_FRACTION_BITS`] for the irrational kinds.
fn exact_fraction_bits(spec: TransformSpec) -> i32 {
    match spec.direct() {
        // three axes of beta denominators plus the one half of the combination
        Some(c) => 3 * c.beta().log2_denominator() as i32 + 1,
        None => FLOAT_FRACTION_BITS,
    }
}

fn check_samples(volume: &Tensor3<f64>, bit_depth: u8) -> Result<()> {
    let max = crate::quality::peak(bit_depth);
    match volume
        .data()
        .iter()
        .find(|v| !(v.fract() == 0.0 && (0.0..=max).contains(*v)))
    {
        Some(v) => Err(Error::InvalidConfig(format!(
            "sample {v} is not a {bit_depth}-bit integer"
        ))),
        None => Ok(()),
    }
}

pub fn encode(volume: &Tensor3<f64>, config: &CodecConfig) -> Result<CompressedVolume> {
    check_samples(volume, config.bit_depth)?;
    let grid = BlockGrid::new(volume.dims())?;
    let plan = TransformPlan::block(config.spec)?;
    let zig = config.zigzag.order();
    let full: Vec<Vec<f64>> = (0..grid.block_count())
        .into_par_iter()
        .map(|b| {
            let y = plan.forward(&grid.extract(volume, b))?;
            Ok(zig.iter().map(|&i| y.data()[i as usize]).collect())
        })
        .collect::<Result<_>>()?;

    // one scale for the whole stream, chosen from all 512 coefficients so
    // that encoding at L equals truncating an encoding at 512
    let max = full.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut s = exact_fraction_bits(config.spec);
    if max > 0.0 {
        s = s.min((i32::MAX as f64 / max).log2().floor() as i32);
    }
    let s = s.clamp(i8::MIN as i32, i8::MAX as i32);
    let mul = 2f64.powi(s);
    let coefficients = full
        .iter()
        .flat_map(|c| c[..config.retained].iter().map(|v| (v * mul).round() as i32))
        .collect();
    Ok(CompressedVolume {
        dims: volume.dims(),
        config: config.clone(),
        scale_log2: s as i8,
        coefficients,
    })
}

/// Inverse-transformed volume before rounding and clamping.
pub fn decode_unrounded(c: &CompressedVolume) -> Result<Tensor3<f64>> {
    let grid = BlockGrid::new(c.dims)?;
    let l = c.config.retained;
    if c.coefficients.len() != grid.block_count() * l {
        return Err(Error::MalformedStream(
            "coefficient count does not match block count".into(),
        ));
    }
    let plan = TransformPlan::block(c.config.spec)?;
    let inv = 2f64.powi(-(c.scale_log2 as i32));
    let zig = c.config.zigzag.order();
    let blocks: Vec<Tensor3<f64>> = c
        .coefficients
        .par_chunks_exact(l)
        .map(|coefs| {
            let mut y = Tensor3::filled([N; 3], 0.0);
            for (rank, &v) in coefs.iter().enumerate() {
                y.data_mut()[zig[rank] as usize] = v as f64 * inv;
            }
            plan.inverse(&y)
        })
        .collect::<Result<_>>()?;
    let mut out = Tensor3::filled(c.dims, 0.0);
    for (b, block) in blocks.iter().enumerate() {
        grid.place(&mut out, b, block);
    }
    Ok(out)
}

/// Reconstruction rounded to integers and clamped to the sample range.
pub fn decode(c: &CompressedVolume) -> Result<Tensor3<f64>> {
    let max = crate::quality::peak(c.config.bit_depth);
    Ok(decode_unrounded(c)?.map(|v| v.round().clamp(0.0, max)))
}

/// Decodes after checking the stream was produced with `expected`.
pub fn decode_with(c: &CompressedVolume, expected: &CodecConfig) -> Result<Tensor3<f64>> {
    if c.config.spec != expected.spec {
        return Err(Error::ConfigMismatch(format!(
            "stream uses {}, decoder expects {}",
            c.config.spec, expected.spec
        )));
    }
    if c.config.zigzag != expected.zigzag {
        return Err(Error::ConfigMismatch("zigzag orders differ".into()));
    }
    if c.config.bit_depth != expected.bit_depth || c.config.retained != expected.retained {
        return Err(Error::ConfigMismatch("bit depth or retained count differ".into()));
    }
    decode(c)
}

/// `[0.125, 0.625, ..., 7.125]`.
pub fn default_bitrates() -> Vec<f64> {
    (0..15).map(|i| 0.125 + 0.5 * i as f64).collect()
}

/// The methods compared in sweeps: both exact baselines, the involutional
/// `H(11/8)` and `H(3/2)`, and the four non-involutional pairs.
pub fn default_methods() -> Vec<TransformSpec> {
    let c = |m| Candidate::new(m).expect("grid point");
    vec![
        TransformSpec::exact_dht(),
        TransformSpec::exact_dct(),
        TransformSpec::involutional(c(11)),
        TransformSpec::involutional(c(12)),
        TransformSpec::paired(c(11), c(12)),
        TransformSpec::paired(c(12), c(11)),
        TransformSpec::paired(c(8), c(16)),
        TransformSpec::paired(c(16), c(8)),
    ]
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RdPoint {
    pub method: String,
    pub bpv: f64,
    #[serde(rename = "L")]
    pub retained: usize,
    pub psnr_db: f64,
    pub ssim: f64,
}

/// PSNR and SSIM for every `(method, bitrate)` cell, averaged over
/// `volumes` with block-count weights. Rows are ordered by method, then
/// bitrate.
pub fn rate_distortion_sweep(
    volumes: &[Tensor3<f64>],
    bit_depth: u8,
    methods: &[(TransformSpec, ZigzagOrder)],
    bitrates: &[f64],
) -> Result<Vec<RdPoint>> {
    let ls: Vec<usize> = bitrates
        .iter()
        .map(|&b| retained_for(b, bit_depth))
        .collect::<Result<_>>()?;
    if volumes.is_empty() {
        return Err(Error::LengthMismatch("no volumes to evaluate".into()));
    }
    let weights: Vec<usize> = volumes
        .iter()
        .map(|v| BlockGrid::new(v.dims()).map(|g| g.block_count()))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(methods.len() * bitrates.len());
    for (spec, zigzag) in methods {
        let config = CodecConfig::new(*spec, BLOCK_LEN, bit_depth, zigzag.clone())?;
        let full: Vec<CompressedVolume> = volumes.iter().map(|v| encode(v, &config)).collect::<Result<_>>()?;
        let cells: Vec<RdPoint> = ls
            .par_iter()
            .zip(bitrates)
            .map(|(&l, &bpv)| {
                let reports: Vec<QualityReport> = full
                    .iter()
                    .zip(volumes)
                    .map(|(c, v)| evaluate(v, &decode(&c.truncated(l)?)?, bit_depth))
                    .collect::<Result<_>>()?;
                let q = aggregate(&reports, &weights)?;
                Ok(RdPoint {
                    method: spec.to_string(),
                    bpv,
                    retained: l,
                    psnr_db: q.psnr_db,
                    ssim: q.ssim,
                })
            })
            .collect::<Result<_>>()?;
        rows.extend(cells);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{ar1_volume, integer_tensor, rng};

    fn c(m: u8) -> Candidate {
        Candidate::new(m).unwrap()
    }

    fn small_zigzag(spec: TransformSpec) -> ZigzagOrder {
        if spec.kind() == TransformKind::ExactDct {
            return dct_zigzag();
        }
        train_zigzag(spec, &ar1_blocks(200, 0.95, 5).unwrap()).unwrap()
    }

    #[test]
    fn blockwise_transform_round_trips() {
        let v = ar1_volume([13, 8, 17], 0.95, 8, 4).unwrap();
        for spec in [
            TransformSpec::exact_dht(),
            TransformSpec::exact_dct(),
            TransformSpec::paired(c(16), c(8)),
        ] {
            let y = forward_blocks(&v, spec).unwrap();
            assert_eq!(y.len(), 6);
            let back = inverse_blocks(&y, v.dims(), spec).unwrap();
            assert!(back.data().iter().zip(v.data()).all(|(a, b)| (a - b).abs() < 1e-9));
        }
        assert!(inverse_blocks(&[], [8, 8, 8], TransformSpec::exact_dht()).is_err());
    }

    #[test]
    fn partition_counts_and_padding() {
        assert_eq!(partition(&Tensor3::filled([16, 16, 16], 0.0)).unwrap().0.len(), 8);
        assert_eq!(BlockGrid::new([256, 256, 64]).unwrap().block_count(), 8192);
        let v = Tensor3::from_fn([9, 8, 8], |i, j, k| (i * 100 + j * 10 + k) as f64);
        let (blocks, grid) = partition(&v).unwrap();
        assert_eq!(blocks.len(), 2);
        for i in 0..8 {
            for j in 0..8 {
                for k in 0..8 {
                    assert_eq!(blocks[1].get(i, j, k), v.get(8, j, k));
                }
            }
        }
        let mut back = Tensor3::filled(v.dims(), -1.0);
        for (b, block) in blocks.iter().enumerate() {
            grid.place(&mut back, b, block);
        }
        assert_eq!(back, v);
        assert!(BlockGrid::new([0, 8, 8]).is_err());
    }

    #[test]
    fn dct_zigzag_examples() {
        let z = dct_zigzag();
        assert_eq!(z.coords(0), (0, 0, 0));
        assert_eq!(z.coords(1), (0, 0, 1));
        assert_eq!(z.coords(2), (0, 1, 0));
        assert_eq!(z.coords(3), (1, 0, 0));
        assert_eq!(z.coords(511), (7, 7, 7));
        assert!(ZigzagOrder::new(z.order().to_vec()).is_ok());
    }

    #[test]
    fn trained_zigzag_is_valid() {
        let z = small_zigzag(TransformSpec::involutional(c(11)));
        assert_eq!(z.coords(0), (0, 0, 0));
        let mut sorted = z.order().to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..512).collect::<Vec<u16>>());
        assert!(matches!(
            train_zigzag(TransformSpec::exact_dht(), &[]),
            Err(Error::EmptyTrainingSet)
        ));
    }

    #[test]
    fn zigzag_validation() {
        let mut o: Vec<u16> = (0..512).collect();
        o.swap(0, 1);
        assert!(ZigzagOrder::new(o).is_err());
        let mut o: Vec<u16> = (0..512).collect();
        o[5] = 4;
        assert!(ZigzagOrder::new(o).is_err());
        assert!(ZigzagOrder::new((0..511).collect()).is_err());
    }

    #[test]
    fn config_validation() {
        let z = dct_zigzag();
        assert!(CodecConfig::new(TransformSpec::exact_dht(), 0, 8, z.clone()).is_err());
        assert!(CodecConfig::new(TransformSpec::exact_dht(), 513, 8, z.clone()).is_err());
        assert!(CodecConfig::new(TransformSpec::exact_dht(), 10, 12, z.clone()).is_err());
        assert!(CodecConfig::new(TransformSpec::involutional(c(8)), 10, 8, z.clone()).is_err());
        assert!(CodecConfig::new(TransformSpec::paired(c(8), c(16)), 10, 8, z.clone()).is_ok());
        let cfg = CodecConfig::new(TransformSpec::exact_dht(), 128, 8, z.clone()).unwrap();
        assert_eq!(cfg.bitrate(), 2.0);
        assert_eq!(
            CodecConfig::with_bitrate(TransformSpec::exact_dht(), 2.0, 8, z.clone())
                .unwrap()
                .retained(),
            128
        );
        assert!(matches!(retained_for(0.1, 8), Err(Error::NonIntegralRetention { .. })));
        let grid: Vec<usize> = default_bitrates()
            .iter()
            .map(|&b| retained_for(b, 8).unwrap())
            .collect();
        assert_eq!(grid.len(), 15);
        assert_eq!((grid[0], grid[1], grid[14]), (8, 40, 456));
    }

    #[test]
    fn lossless_at_full_rate() {
        let v = ar1_volume([12, 16, 9], 0.95, 8, 3).unwrap();
        for spec in [
            TransformSpec::exact_dht(),
            TransformSpec::exact_dct(),
            TransformSpec::paired(c(8), c(16)),
            TransformSpec::paired(c(16), c(8)),
        ] {
            let cfg = CodecConfig::new(spec, 512, 8, small_zigzag(spec)).unwrap();
            let enc = encode(&v, &cfg).unwrap();
            assert_eq!(enc.coefficients().len(), enc.block_count() * 512);
            let raw = decode_unrounded(&enc).unwrap();
            let err = raw
                .data()
                .iter()
                .zip(v.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if spec.direct().is_some() {
                assert_eq!(err, 0.0, "{spec}");
            } else {
                assert!(err < 0.5, "{spec}: {err}");
            }
            assert_eq!(decode(&enc).unwrap(), v, "{spec}");
        }
    }

    #[test]
    fn sixteen_bit_lossless() {
        let v = ar1_volume([8, 8, 16], 0.95, 16, 4).unwrap();
        for spec in [TransformSpec::exact_dht(), TransformSpec::paired(c(8), c(16))] {
            let cfg = CodecConfig::new(spec, 512, 16, small_zigzag(spec)).unwrap();
            assert_eq!(decode(&encode(&v, &cfg).unwrap()).unwrap(), v);
        }
    }

    #[test]
    fn constant_and_zero_volumes() {
        for spec in [
            TransformSpec::exact_dht(),
            TransformSpec::involutional(c(11)),
            TransformSpec::paired(c(12), c(11)),
        ] {
            let z = small_zigzag(spec);
            let cfg = CodecConfig::new(spec, 1, 8, z.clone()).unwrap();
            let k = Tensor3::filled([16, 8, 8], 77.0);
            assert_eq!(decode(&encode(&k, &cfg).unwrap()).unwrap(), k, "{spec}");
            let zero = Tensor3::filled([8, 8, 8], 0.0);
            for l in [1, 40, 512] {
                let cfg = CodecConfig::new(spec, l, 8, z.clone()).unwrap();
                assert_eq!(decode(&encode(&zero, &cfg).unwrap()).unwrap(), zero);
            }
        }
    }

    #[test]
    fn mse_nonincreasing_in_retained() {
        let v = ar1_volume([16, 16, 16], 0.95, 8, 6).unwrap();
        for spec in [
            TransformSpec::exact_dht(),
            TransformSpec::exact_dct(),
            TransformSpec::involutional(c(11)),
        ] {
            let cfg = CodecConfig::new(spec, 512, 8, small_zigzag(spec)).unwrap();
            let full = encode(&v, &cfg).unwrap();
            let mut last = f64::INFINITY;
            for l in [1, 8, 40, 72, 136, 264, 456, 512] {
                let r = decode(&full.truncated(l).unwrap()).unwrap();
                let e = crate::quality::mse(&v, &r).unwrap();
                assert!(e <= last + 1e-9, "{spec} L={l}: {e} > {last}");
                last = e;
            }
        }
    }

    #[test]
    fn truncation_equals_direct_encoding() {
        let v = ar1_volume([8, 16, 8], 0.95, 8, 7).unwrap();
        let spec = TransformSpec::involutional(c(12));
        let z = small_zigzag(spec);
        let full = encode(&v, &CodecConfig::new(spec, 512, 8, z.clone()).unwrap()).unwrap();
        let direct = encode(&v, &CodecConfig::new(spec, 72, 8, z).unwrap()).unwrap();
        assert_eq!(full.truncated(72).unwrap(), direct);
    }

    #[test]
    fn decode_encode_drifts_by_one_rounding_step() {
        let v = ar1_volume([16, 16, 8], 0.95, 8, 8).unwrap();
        let drift = |spec: TransformSpec| {
            let cfg = CodecConfig::new(spec, 64, 8, small_zigzag(spec)).unwrap();
            let round = |x: &Tensor3<f64>| decode(&encode(x, &cfg).unwrap()).unwrap();
            let r2 = round(&round(&v));
            let r3 = round(&r2);
            r2.data()
                .iter()
                .zip(r3.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        for spec in [TransformSpec::exact_dht(), TransformSpec::exact_dct()] {
            assert!(drift(spec) <= 1.0, "{spec}");
        }
        // quasi-inverses are not projections, so no bound is asserted
        let spec = TransformSpec::involutional(c(11));
        println!("{spec}: second-to-third reconstruction drift {}", drift(spec));
    }

    #[test]
    fn stream_round_trip_and_mismatch() {
        let mut r = rng(9);
        let v = integer_tensor([9, 10, 11], 0, 255, &mut r);
        let spec = TransformSpec::paired(c(12), c(11));
        let cfg = CodecConfig::new(spec, 100, 8, small_zigzag(spec)).unwrap();
        let enc = encode(&v, &cfg).unwrap();
        let bytes = enc.to_bytes();
        assert_eq!(&bytes[..4], b"H3DC");
        let back = CompressedVolume::from_bytes(&bytes).unwrap();
        assert_eq!(back, enc);
        assert_eq!(decode_with(&back, &cfg).unwrap(), decode(&enc).unwrap());

        let other = CodecConfig::new(TransformSpec::exact_dht(), 100, 8, cfg.zigzag().clone()).unwrap();
        assert!(matches!(decode_with(&back, &other), Err(Error::ConfigMismatch(_))));
        let other = CodecConfig::new(spec, 100, 8, dct_zigzag()).unwrap();
        assert!(matches!(decode_with(&back, &other), Err(Error::ConfigMismatch(_))));

        assert!(CompressedVolume::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(CompressedVolume::from_bytes(&bad).is_err());
    }

    #[test]
    fn sweep_shape_and_rejections() {
        let v = ar1_volume([16, 16, 16], 0.95, 8, 10).unwrap();
        let methods: Vec<_> = [TransformSpec::exact_dht(), TransformSpec::exact_dct()]
            .into_iter()
            .map(|s| (s, small_zigzag(s)))
            .collect();
        let rows = rate_distortion_sweep(std::slice::from_ref(&v), 8, &methods, &default_bitrates()).unwrap();
        assert_eq!(rows.len(), 30);
        assert_eq!(rows[0].retained, 8);
        assert!(matches!(
            rate_distortion_sweep(std::slice::from_ref(&v), 8, &methods, &[0.3]),
            Err(Error::NonIntegralRetention { .. })
        ));
        let bad = vec![(TransformSpec::involutional(c(8)), dct_zigzag())];
        assert!(matches!(
            rate_distortion_sweep(&[v], 8, &bad, &[1.0]),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn out_of_range_samples_rejected() {
        let cfg = CodecConfig::new(TransformSpec::exact_dct(), 8, 8, dct_zigzag()).unwrap();
        assert!(encode(&Tensor3::filled([8, 8, 8], 256.0), &cfg).is_err());
        assert!(encode(&Tensor3::filled([8, 8, 8], 1.5), &cfg).is_err());
    }
}
