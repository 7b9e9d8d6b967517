//! Raw volume files with a TOML sidecar, CSV tables and SVG rate-distortion
//! plots. Every writer stages its output in a temporary file next to the
//! target and renames it into place, so a failed run leaves no partial file.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{RdPoint, BLOCK_LEN};
use crate::quality::peak;
use crate::tensor::Tensor3;
use crate::transform3d::TransformSpec;
use crate::{Error, Result};

/// Contents of the sidecar. Samples are little-endian with the third index
/// varying fastest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeHeader {
    pub dims: [usize; 3],
    pub bit_depth: u8,
}

impl VolumeHeader {
    pub fn payload_len(&self) -> usize {
        self.dims.iter().product::<usize>() * (self.bit_depth as usize / 8)
    }
}

/// `vol.raw` -> `vol.raw.toml`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".toml");
    PathBuf::from(s)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Runs `body` against a temporary file beside `path`, then renames it over
/// `path` only if `body` succeeded.
pub fn write_atomically(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush().map_err(io_err(path))?;
    }
    tmp.persist(path).map_err(|e| io_err(path)(e.error))?;
    Ok(())
}

pub fn read_header(sidecar: &Path) -> Result<VolumeHeader> {
    let text = fs::read_to_string(sidecar).map_err(io_err(sidecar))?;
    let malformed = |reason: String| Error::MalformedSidecar {
        path: sidecar.to_path_buf(),
        reason,
    };
    let h: VolumeHeader = toml::from_str(&text).map_err(|e| malformed(e.to_string()))?;
    if h.bit_depth != 8 && h.bit_depth != 16 {
        return Err(malformed(format!("bit_depth {} is not 8 or 16", h.bit_depth)));
    }
    if h.dims.contains(&0) {
        return Err(malformed(format!("dims {:?} contain a zero extent", h.dims)));
    }
    Ok(h)
}

/// Reads `path` using the sidecar at `sidecar_path(path)`.
pub fn read_volume(path: &Path) -> Result<(Tensor3<f64>, VolumeHeader)> {
    read_volume_with(path, &sidecar_path(path))
}

pub fn read_volume_with(path: &Path, sidecar: &Path) -> Result<(Tensor3<f64>, VolumeHeader)> {
    let header = read_header(sidecar)?;
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() != header.payload_len() {
        return Err(Error::LengthMismatch(format!(
            "{}: {} bytes on disk, sidecar {:?} at {} bits needs {}",
            path.display(),
            bytes.len(),
            header.dims,
            header.bit_depth,
            header.payload_len()
        )));
    }
    let data = match header.bit_depth {
        8 => bytes.iter().map(|&b| b as f64).collect(),
        _ => bytes
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]) as f64)
            .collect(),
    };
    Ok((Tensor3::new(header.dims, data)?, header))
}

/// Writes raw samples and the sidecar. Samples must already be integers in
/// `[0, 2^b - 1]`.
pub fn write_volume(path: &Path, volume: &Tensor3<f64>, bit_depth: u8) -> Result<()> {
    if bit_depth != 8 && bit_depth != 16 {
        return Err(Error::InvalidConfig(format!("bit depth {bit_depth} is not 8 or 16")));
    }
    let max = peak(bit_depth);
    if let Some(v) = volume
        .data()
        .iter()
        .find(|v| !(v.fract() == 0.0 && (0.0..=max).contains(*v)))
    {
        return Err(Error::InvalidConfig(format!(
            "sample {v} is not a {bit_depth}-bit integer"
        )));
    }
    let header = VolumeHeader {
        dims: volume.dims(),
        bit_depth,
    };
    let side = sidecar_path(path);
    let text = toml::to_string(&header).expect("header serializes");
    write_atomically(path, |w| {
        let bytes: Vec<u8> = match bit_depth {
            8 => volume.data().iter().map(|&v| v as u8).collect(),
            _ => volume.data().iter().flat_map(|&v| (v as u16).to_le_bytes()).collect(),
        };
        w.write_all(&bytes).map_err(io_err(path))
    })?;
    write_atomically(&side, |w| w.write_all(text.as_bytes()).map_err(io_err(&side)))
}

/// Sidecar of a transform-coefficient file: the source volume's shape and
/// depth plus the transform, so the inverse needs no further flags. The
/// payload is `blocks * 512` little-endian `f64` values in block order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientHeader {
    pub dims: [usize; 3],
    pub bit_depth: u8,
    pub transform: String,
    pub blocks: usize,
}

impl CoefficientHeader {
    pub fn spec(&self) -> Result<TransformSpec> {
        self.transform.parse()
    }
}

pub fn write_coefficients(path: &Path, header: &CoefficientHeader, blocks: &[Tensor3<f64>]) -> Result<()> {
    if blocks.len() != header.blocks || blocks.iter().any(|b| b.len() != BLOCK_LEN) {
        return Err(Error::LengthMismatch(format!(
            "header declares {} blocks of {BLOCK_LEN}, got {}",
            header.blocks,
            blocks.len()
        )));
    }
    let side = sidecar_path(path);
    let text = toml::to_string(header).expect("header serializes");
    write_atomically(path, |w| {
        let bytes: Vec<u8> = blocks
            .iter()
            .flat_map(|b| b.data())
            .flat_map(|v| v.to_le_bytes())
            .collect();
        w.write_all(&bytes).map_err(io_err(path))
    })?;
    write_atomically(&side, |w| w.write_all(text.as_bytes()).map_err(io_err(&side)))
}

pub fn read_coefficients(path: &Path) -> Result<(CoefficientHeader, Vec<Tensor3<f64>>)> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(io_err(&side))?;
    let header: CoefficientHeader = toml::from_str(&text).map_err(|e| Error::MalformedSidecar {
        path: side.clone(),
        reason: e.to_string(),
    })?;
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() != header.blocks * BLOCK_LEN * 8 {
        return Err(Error::LengthMismatch(format!(
            "{}: {} bytes on disk, {} blocks need {}",
            path.display(),
            bytes.len(),
            header.blocks,
            header.blocks * BLOCK_LEN * 8
        )));
    }
    let blocks = bytes
        .chunks_exact(BLOCK_LEN * 8)
        .map(|chunk| {
            let data = chunk
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            Tensor3::new([8; 3], data)
        })
        .collect::<Result<_>>()?;
    Ok((header, blocks))
}

/// Writes `header` then `rows` as CSV to any writer.
pub fn csv_to_writer<T: Serialize, W: Write>(w: W, header: &[&str], rows: &[T]) -> csv::Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(header)?;
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `rows` under an explicit header, so an empty table still gets one.
pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    write_atomically(path, |w| {
        csv_to_writer(w, header, rows).map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })
    })
}

pub const RD_HEADER: [&str; 5] = ["method", "bpv", "L", "psnr_db", "ssim"];

pub fn write_rd_csv(path: &Path, rows: &[RdPoint]) -> Result<()> {
    write_csv(path, &RD_HEADER, rows)
}

/// Distinct method names in first-seen order.
fn methods(rows: &[RdPoint]) -> Vec<&str> {
    let mut out: Vec<&str> = Vec::new();
    for r in rows {
        if !out.contains(&r.method.as_str()) {
            out.push(&r.method);
        }
    }
    out
}

/// PSNR and SSIM against bitrate as an SVG, one series per method. Returns
/// `false` without touching the filesystem when there is nothing to plot.
pub fn write_plot(path: &Path, rows: &[RdPoint]) -> Result<bool> {
    let finite: Vec<&RdPoint> = rows.iter().filter(|r| r.psnr_db.is_finite()).collect();
    if finite.is_empty() {
        return Ok(false);
    }
    let plot_err = |e: String| Error::Plot {
        path: path.to_path_buf(),
        reason: e,
    };
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (1100, 450)).into_drawing_area();
        root.fill(&WHITE).map_err(|e| plot_err(e.to_string()))?;
        let (left, right) = root.split_horizontally(550);
        let x_max = finite.iter().map(|r| r.bpv).fold(0.0, f64::max) * 1.02;
        let p_lo = finite.iter().map(|r| r.psnr_db).fold(f64::INFINITY, f64::min);
        let p_hi = finite.iter().map(|r| r.psnr_db).fold(f64::NEG_INFINITY, f64::max);
        let s_lo = rows.iter().map(|r| r.ssim).fold(1.0, f64::min);
        type Metric = fn(&RdPoint) -> f64;
        let panels: [(&DrawingArea<_, _>, &str, f64, f64, Metric); 2] = [
            (&left, "PSNR (dB)", p_lo.floor() - 1.0, p_hi.ceil() + 1.0, |r| r.psnr_db),
            (&right, "SSIM", (s_lo - 0.02).max(-1.0), 1.005, |r| r.ssim),
        ];
        let names = methods(rows);
        for (area, label, lo, hi, value) in panels {
            let mut chart = ChartBuilder::on(area)
                .margin(12)
                .x_label_area_size(36)
                .y_label_area_size(52)
                .build_cartesian_2d(0.0..x_max, lo..hi)
                .map_err(|e| plot_err(e.to_string()))?;
            chart
                .configure_mesh()
                .x_desc("bitrate (bpv)")
                .y_desc(label)
                .draw()
                .map_err(|e| plot_err(e.to_string()))?;
            for (i, name) in names.iter().enumerate() {
                let color = Palette99::pick(i).to_rgba();
                let pts = finite.iter().filter(|r| r.method == *name).map(|r| (r.bpv, value(r)));
                chart
                    .draw_series(LineSeries::new(pts, color.stroke_width(2)))
                    .map_err(|e| plot_err(e.to_string()))?
                    .label(*name)
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2)));
            }
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .position(SeriesLabelPosition::LowerRight)
                .draw()
                .map_err(|e| plot_err(e.to_string()))?;
        }
        root.present().map_err(|e| plot_err(e.to_string()))?;
    }
    write_atomically(path, |w| w.write_all(svg.as_bytes()).map_err(io_err(path)))?;
    Ok(true)
}
