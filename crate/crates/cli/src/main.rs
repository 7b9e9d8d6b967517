use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use hartley3d::codec::{
    decode, default_bitrates, default_methods, default_zigzag, encode, forward_blocks, inverse_blocks,
    rate_distortion_sweep, retained_for, CodecConfig, CompressedVolume, BLOCK_LEN,
};
use hartley3d::complexity::{table, verified_table, ComplexityRow};
use hartley3d::io::{
    csv_to_writer, read_coefficients, read_volume, write_atomically, write_coefficients, write_csv, write_plot,
    write_rd_csv, write_volume, CoefficientHeader, RD_HEADER,
};
use hartley3d::kernels::{build_stages, Beta, Kernel1d, LoefflerDct, Multiplierless};
use hartley3d::quality::{evaluate, peak};
use hartley3d::search::{best_inverse, select, sweep, MetricConfig};
use hartley3d::synth::{ar1_blocks, ar1_volume};
use hartley3d::transform3d::row_column_execute;
use hartley3d::{Candidate, InversePolicy, Tensor3, TransformKind, TransformSpec};

#[derive(Parser)]
#[command(
    name = "hartley3d",
    version,
    about = "Multiplierless 3D Hartley transforms and a fixed-rate volume codec"
)]
struct Cli {
    /// Worker threads for block-level parallelism.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    threads: u16,
    /// Seed for every randomized step (synthetic volumes, zigzag training, bench blocks).
    #[arg(long, global = true, default_value_t = 2024)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate all 24 dyadic candidates and report the selected transforms.
    Search {
        #[arg(long, default_value_t = 0.95)]
        rho: f64,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Blockwise forward transform of a volume, or the inverse of a coefficient file.
    Transform {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        method: MethodArgs,
        /// Read coefficients and write the reconstructed volume.
        #[arg(long)]
        inverse: bool,
    },
    /// Encode a volume at a fixed rate.
    Compress {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        method: MethodArgs,
        #[command(flatten)]
        rate: RateArgs,
    },
    /// Decode a compressed stream back to a volume.
    Decompress {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// PSNR and SSIM of a reconstruction, or the full rate-distortion sweep.
    Evaluate(EvaluateArgs),
    /// Operation counts of the 3D transforms for 8x8x8 blocks.
    Complexity {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also run the kernels on this many counting blocks and compare.
        #[arg(long, value_name = "BLOCKS")]
        verify: Option<usize>,
    },
    /// Relative timing of the 3D transforms over random blocks.
    Bench {
        #[arg(long, default_value_t = 8192, value_parser = clap::value_parser!(u64).range(1..))]
        blocks: u64,
        #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
        repeat: u64,
    },
}

#[derive(Args)]
struct MethodArgs {
    /// `dht`, `dct` or a grid beta such as `11/8`.
    #[arg(long)]
    method: Option<TransformKind>,
    /// `exact`, `involutional` or the beta of the inverse partner.
    #[arg(long = "inverse-policy")]
    inverse_policy: Option<InversePolicy>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct RateArgs {
    /// Target bitrate in bits per voxel.
    #[arg(long)]
    bpv: Option<f64>,
    /// Coefficients kept per block.
    #[arg(long)]
    retain: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long, required_unless_present = "sweep", conflicts_with = "sweep")]
    orig: Option<PathBuf>,
    #[arg(long, required_unless_present = "sweep", conflicts_with = "sweep")]
    recon: Option<PathBuf>,
    /// Run every default method over the 15-point bitrate grid.
    #[arg(long)]
    sweep: bool,
    /// Input volumes for the sweep; a synthetic AR(1) volume when omitted.
    #[arg(long = "in", requires = "sweep")]
    inputs: Vec<PathBuf>,
    /// Synthetic volume shape, as `n1,n2,n3`.
    #[arg(long, value_delimiter = ',', default_values_t = [64, 64, 64], requires = "sweep")]
    dims: Vec<usize>,
    #[arg(long = "bit-depth", default_value_t = 8, requires = "sweep")]
    bit_depth: u8,
    #[arg(long, default_value_t = 0.95, requires = "sweep")]
    rho: f64,
    #[arg(long, requires = "sweep")]
    csv: Option<PathBuf>,
    /// Plot destination; the CSV path with an `.svg` extension when omitted.
    #[arg(long, requires = "sweep")]
    plot: Option<PathBuf>,
}

/// Flag combinations clap cannot check on its own.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn config_line(key: &str, value: impl std::fmt::Display) {
    eprintln!("{key:>14}: {value}");
}

fn resolve_spec(m: &MethodArgs) -> anyhow::Result<TransformSpec> {
    let kind = m.method.ok_or_else(|| usage("--method is required"))?;
    let inverse = m.inverse_policy.unwrap_or(match kind {
        TransformKind::Approx(_) => InversePolicy::Involutional,
        _ => InversePolicy::ExactInverse,
    });
    TransformSpec::new(kind, inverse).map_err(|e| usage(e.to_string()))
}

fn zigzag_for(spec: TransformSpec, seed: u64) -> anyhow::Result<hartley3d::codec::ZigzagOrder> {
    Ok(default_zigzag(spec, seed)?)
}

fn load(path: &Path) -> anyhow::Result<(Tensor3<f64>, u8)> {
    let (v, h) = read_volume(path).with_context(|| format!("reading {}", path.display()))?;
    Ok((v, h.bit_depth))
}

#[derive(serde::Serialize)]
struct SearchRow {
    m: u8,
    beta: String,
    delta_self: f64,
    mse: f64,
    cg_db: f64,
    mult: u64,
    add: u64,
    shift: u64,
    best_inverse_m: u8,
    delta_pair: f64,
}

const SEARCH_HEADER: [&str; 10] = [
    "m",
    "beta",
    "delta_self",
    "mse",
    "cg_db",
    "mult",
    "add",
    "shift",
    "best_inverse_m",
    "delta_pair",
];

fn to_stdout<T: serde::Serialize>(header: &[&str], rows: &[T]) -> anyhow::Result<()> {
    csv_to_writer(io::stdout().lock(), header, rows)?;
    Ok(())
}

fn run_search(rho: f64, out: Option<PathBuf>) -> anyhow::Result<()> {
    config_line("command", "search");
    config_line("rho", rho);
    config_line("out", out.as_ref().map_or("stdout".into(), |p| p.display().to_string()));
    let cfg = MetricConfig::new(rho).map_err(|e| usage(e.to_string()))?;
    let reports = sweep(&cfg)?;
    let rows: Vec<SearchRow> = reports
        .iter()
        .map(|r| SearchRow {
            m: r.m,
            beta: r.beta.clone(),
            delta_self: r.delta_self,
            mse: r.mse,
            cg_db: r.coding_gain_db,
            mult: r.op_count.multiplications,
            add: r.op_count.additions,
            shift: r.op_count.shifts,
            best_inverse_m: r.best_inverse_m,
            delta_pair: r.delta_pair,
        })
        .collect();
    match &out {
        Some(p) => write_csv(p, &SEARCH_HEADER, &rows)?,
        None => to_stdout(&SEARCH_HEADER, &rows)?,
    }
    let sel = select(&reports).ok_or_else(|| anyhow!("empty candidate grid"))?;
    let members = sel.members();
    eprintln!("lowest MSE:    {}", sel.lowest_mse);
    eprintln!("highest Cg:    {}", sel.highest_gain);
    eprintln!("lowest cost:   {}", sel.lowest_cost);
    eprintln!(
        "selected:      {}",
        members.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ")
    );
    let mut pairs: Vec<(Candidate, Candidate)> = Vec::new();
    for &c in &members {
        let q = best_inverse(c).0;
        if members.contains(&q) && q != c && !pairs.contains(&(q, c)) {
            pairs.push((c, q));
        }
    }
    eprintln!(
        "pairings:      {}",
        pairs
            .iter()
            .map(|(a, b)| format!("{a} <-> {b}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(())
}

fn run_transform(input: &Path, out: &Path, method: &MethodArgs, inverse: bool) -> anyhow::Result<()> {
    config_line(
        "command",
        if inverse {
            "transform (inverse)"
        } else {
            "transform (forward)"
        },
    );
    if inverse {
        let (header, blocks) = read_coefficients(input).with_context(|| format!("reading {}", input.display()))?;
        let stored = header
            .spec()
            .context("coefficient sidecar names an unknown transform")?;
        if method.method.is_some_and(|k| k != stored.kind()) {
            return Err(usage(format!("--method does not match the stored transform {stored}")));
        }
        let spec = match method.inverse_policy {
            Some(p) => TransformSpec::new(stored.kind(), p).map_err(|e| usage(e.to_string()))?,
            None => stored,
        };
        config_line("in", input.display());
        config_line("transform", spec);
        config_line("dims", format!("{:?}", header.dims));
        config_line("bit depth", header.bit_depth);
        config_line("out", out.display());
        let max = peak(header.bit_depth);
        let v = inverse_blocks(&blocks, header.dims, spec)?.map(|x| x.round().clamp(0.0, max));
        write_volume(out, &v, header.bit_depth)?;
    } else {
        let spec = resolve_spec(method)?;
        let (v, bits) = load(input)?;
        config_line("in", input.display());
        config_line("transform", spec);
        config_line("dims", format!("{:?}", v.dims()));
        config_line("bit depth", bits);
        config_line("out", out.display());
        let blocks = forward_blocks(&v, spec)?;
        let header = CoefficientHeader {
            dims: v.dims(),
            bit_depth: bits,
            transform: spec.to_string(),
            blocks: blocks.len(),
        };
        write_coefficients(out, &header, &blocks)?;
        println!("wrote {} blocks of {BLOCK_LEN} coefficients", blocks.len());
    }
    Ok(())
}

fn run_compress(input: &Path, out: &Path, method: &MethodArgs, rate: &RateArgs, seed: u64) -> anyhow::Result<()> {
    let spec = resolve_spec(method)?;
    let (v, bits) = load(input)?;
    let retained = match (rate.bpv, rate.retain) {
        (Some(bpv), _) => retained_for(bpv, bits).map_err(|e| usage(e.to_string()))?,
        (None, Some(l)) => l,
        (None, None) => unreachable!("clap requires one rate flag"),
    };
    let zigzag = zigzag_for(spec, seed)?;
    let config = CodecConfig::new(spec, retained, bits, zigzag).map_err(|e| usage(e.to_string()))?;
    config_line("command", "compress");
    config_line("in", input.display());
    config_line("transform", spec);
    config_line("dims", format!("{:?}", v.dims()));
    config_line("bit depth", bits);
    config_line("retained", retained);
    config_line("bitrate", format!("{:.3} bpv", config.bitrate()));
    config_line("zigzag seed", seed);
    config_line("out", out.display());
    let stream = encode(&v, &config)?;
    write_atomically(out, |w| {
        stream.write_to(w).map_err(|source| hartley3d::Error::Io {
            path: out.to_path_buf(),
            source,
        })
    })?;
    println!(
        "{} blocks, {} coefficients, bitrate {:.3} bpv",
        stream.block_count(),
        stream.coefficients().len(),
        config.bitrate()
    );
    Ok(())
}

fn run_decompress(input: &Path, out: &Path) -> anyhow::Result<()> {
    let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let stream =
        CompressedVolume::read_from(BufReader::new(file)).with_context(|| format!("reading {}", input.display()))?;
    let cfg = stream.config();
    config_line("command", "decompress");
    config_line("in", input.display());
    config_line("transform", cfg.spec());
    config_line("dims", format!("{:?}", stream.dims()));
    config_line("bit depth", cfg.bit_depth());
    config_line("retained", cfg.retained());
    config_line("bitrate", format!("{:.3} bpv", cfg.bitrate()));
    config_line("out", out.display());
    let v = decode(&stream)?;
    write_volume(out, &v, cfg.bit_depth())?;
    Ok(())
}

fn run_evaluate(a: &EvaluateArgs, seed: u64) -> anyhow::Result<()> {
    if !a.sweep {
        let (orig, recon) = (a.orig.as_ref().expect("clap"), a.recon.as_ref().expect("clap"));
        let (x, bx) = load(orig)?;
        let (y, by) = load(recon)?;
        config_line("command", "evaluate");
        config_line("orig", orig.display());
        config_line("recon", recon.display());
        config_line("bit depth", bx);
        if bx != by || x.dims() != y.dims() {
            bail!(
                "volumes differ in shape or depth: {:?} at {bx} bits vs {:?} at {by} bits",
                x.dims(),
                y.dims()
            );
        }
        let q = evaluate(&x, &y, bx)?;
        println!("PSNR {:.4} dB", q.psnr_db);
        println!("SSIM {:.6}", q.ssim);
        return Ok(());
    }

    let csv = a.csv.as_ref().ok_or_else(|| usage("--sweep needs --csv"))?;
    let plot = a.plot.clone().unwrap_or_else(|| csv.with_extension("svg"));
    let (volumes, bits) = if a.inputs.is_empty() {
        if a.bit_depth != 8 && a.bit_depth != 16 {
            return Err(usage(format!("--bit-depth {} is not 8 or 16", a.bit_depth)));
        }
        let dims: [usize; 3] = a
            .dims
            .as_slice()
            .try_into()
            .map_err(|_| usage("--dims takes three extents"))?;
        let v = ar1_volume(dims, a.rho, a.bit_depth, seed).map_err(|e| usage(e.to_string()))?;
        (vec![v], a.bit_depth)
    } else {
        let loaded = a.inputs.iter().map(|p| load(p)).collect::<anyhow::Result<Vec<_>>>()?;
        let bits = loaded[0].1;
        if loaded.iter().any(|(_, b)| *b != bits) {
            bail!("sweep inputs mix bit depths");
        }
        (loaded.into_iter().map(|(v, _)| v).collect(), bits)
    };
    config_line("command", "evaluate --sweep");
    if a.inputs.is_empty() {
        config_line(
            "volumes",
            format!("synthetic AR(1) {:?}, rho {}, seed {seed}", a.dims, a.rho),
        );
    } else {
        config_line(
            "volumes",
            a.inputs
                .iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
                .join(", "),
        );
    }
    config_line("bit depth", bits);
    config_line(
        "methods",
        default_methods()
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(", "),
    );
    config_line("bitrates", format!("{:?}", default_bitrates()));
    config_line("zigzag seed", seed);
    config_line("csv", csv.display());
    config_line("plot", plot.display());

    let methods = default_methods()
        .into_iter()
        .map(|s| zigzag_for(s, seed).map(|z| (s, z)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let rows = rate_distortion_sweep(&volumes, bits, &methods, &default_bitrates())?;
    // stage both files before publishing either
    let dir = csv
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let staging = tempfile::tempdir_in(dir).with_context(|| format!("staging in {}", dir.display()))?;
    let tmp_csv = staging.path().join("rd.csv");
    let tmp_plot = staging.path().join("rd.svg");
    write_rd_csv(&tmp_csv, &rows)?;
    let plotted = write_plot(&tmp_plot, &rows)?;
    std::fs::rename(&tmp_csv, csv).with_context(|| format!("writing {}", csv.display()))?;
    if plotted {
        std::fs::rename(&tmp_plot, &plot).with_context(|| format!("writing {}", plot.display()))?;
    }
    to_stdout(&RD_HEADER, &rows)?;
    Ok(())
}

fn run_complexity(out: Option<PathBuf>, verify: Option<usize>, seed: u64) -> anyhow::Result<()> {
    config_line("command", "complexity");
    config_line("block", "8x8x8");
    config_line("out", out.as_ref().map_or("stdout".into(), |p| p.display().to_string()));
    let rows = table()?;
    let header = ["method", "multiplications", "additions", "shifts"];
    if let Some(n) = verify {
        config_line("verify blocks", n);
        let measured = verified_table(&ar1_blocks(n, 0.95, seed)?)?;
        let mut bad = Vec::new();
        for m in &measured {
            let expect = rows
                .iter()
                .find(|r| r.method == m.method)
                .map(|r| r.op_count.scaled(n as u64));
            let ok = expect == Some(m.op_count);
            eprintln!(
                "verified {:<18} {:>12} {:>12} {:>12} {}",
                m.method,
                m.op_count.multiplications,
                m.op_count.additions,
                m.op_count.shifts,
                if ok { "ok" } else { "MISMATCH" }
            );
            if !ok {
                bad.push(m.method.clone());
            }
        }
        if !bad.is_empty() {
            bail!("measured counts differ from the table for {bad:?}");
        }
    }
    match &out {
        Some(p) => write_csv(p, &header, &rows)?,
        None => to_stdout::<ComplexityRow>(&header, &rows)?,
    }
    Ok(())
}

fn run_bench(blocks: u64, repeat: u64, seed: u64, threads: u16) -> anyhow::Result<()> {
    config_line("command", "bench");
    config_line("blocks", blocks);
    config_line("repeat", repeat);
    config_line("seed", seed);
    config_line("threads", threads);
    let data = ar1_blocks(blocks as usize, 0.95, seed)?;
    let dht = build_stages(Beta::Sqrt2)?;
    let approx: Vec<(Candidate, _)> = [8, 11, 12, 16]
        .into_iter()
        .map(|m| Candidate::new(m).map(|c| (c, c.stages())))
        .collect::<Result<_, _>>()?;
    let dct = LoefflerDct::default();
    let mut kernels: Vec<(String, &(dyn Kernel1d<f64> + Sync))> =
        vec![("3D DCT".into(), &dct), ("3D DHT".into(), &dht)];
    let wrapped: Vec<(String, Multiplierless<'_>)> =
        approx.iter().map(|(c, s)| (c.to_string(), Multiplierless(s))).collect();
    for (name, k) in &wrapped {
        kernels.push((name.clone(), k));
    }

    let mut means = Vec::new();
    for (name, kernel) in &kernels {
        let mut total = 0.0;
        for _ in 0..repeat {
            let start = Instant::now();
            data.par_iter()
                .try_for_each(|b| row_column_execute(b, *kernel).map(|_| ()))?;
            total += start.elapsed().as_secs_f64();
        }
        means.push((name.clone(), 1e3 * total / repeat as f64));
    }
    let reference = |n: &str| {
        means
            .iter()
            .find(|(m, _)| m == n)
            .map(|(_, t)| *t)
            .expect("baseline timed")
    };
    let (t_dht, t_dct) = (reference("3D DHT"), reference("3D DCT"));
    let mut out = io::stdout().lock();
    writeln!(out, "method,mean_ms,reduction_vs_dht_pct,reduction_vs_dct_pct")?;
    for (name, t) in &means {
        writeln!(
            out,
            "{name},{t:.3},{:.1},{:.1}",
            100.0 * (t_dht - t) / t_dht,
            100.0 * (t_dct - t) / t_dct
        )?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    config_line("threads", cli.threads);
    config_line("seed", cli.seed);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads as usize)
        .build()?;
    let seed = cli.seed;
    pool.install(|| match cli.command {
        Command::Search { rho, out } => run_search(rho, out),
        Command::Transform {
            input,
            out,
            method,
            inverse,
        } => run_transform(&input, &out, &method, inverse),
        Command::Compress {
            input,
            out,
            method,
            rate,
        } => run_compress(&input, &out, &method, &rate, seed),
        Command::Decompress { input, out } => run_decompress(&input, &out),
        Command::Evaluate(a) => run_evaluate(&a, seed),
        Command::Complexity { out, verify } => run_complexity(out, verify, seed),
        Command::Bench { blocks, repeat } => run_bench(blocks, repeat, seed, cli.threads),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<Usage>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
