use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hartley3d::io::{read_volume, write_volume};
use hartley3d::quality::psnr;
use hartley3d::synth::ar1_volume;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hartley3d"))
        .args(args)
        .output()
        .unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn volume(dir: &Path, name: &str, dims: [usize; 3], bits: u8) -> std::path::PathBuf {
    let path = dir.join(name);
    write_volume(&path, &ar1_volume(dims, 0.95, bits, 9).unwrap(), bits).unwrap();
    path
}

#[test]
fn complexity_table() {
    let out = run(&["complexity"]);
    assert!(out.status.success());
    let stdout = text(&out.stdout);
    assert!(stdout.lines().any(|l| l == "H(11/8),0,6528,768"));
    assert!(stdout.lines().any(|l| l == "3D DCT row-column,2112,5568,0"));
    assert_eq!(stdout.lines().count(), 8);
    assert!(text(&out.stderr).contains("command: complexity"));
}

#[test]
fn complexity_verify_and_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c.csv");
    let out = run(&["complexity", "--verify", "3", "--out", p(&csv)]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(!text(&out.stderr).contains("MISMATCH"));
    assert!(fs::read_to_string(csv)
        .unwrap()
        .starts_with("method,multiplications,additions,shifts\n"));
}

#[test]
fn search_selects_four() {
    let out = run(&["search"]);
    assert!(out.status.success());
    let stdout = text(&out.stdout);
    assert_eq!(
        stdout.lines().next().unwrap(),
        "m,beta,delta_self,mse,cg_db,mult,add,shift,best_inverse_m,delta_pair"
    );
    assert_eq!(stdout.lines().count(), 25);
    let err = text(&out.stderr);
    assert!(err.contains("selected:      H(1), H(11/8), H(3/2), H(2)"));
    assert!(err.contains("H(1) <-> H(2)") && err.contains("H(11/8) <-> H(3/2)"));
}

#[test]
fn compress_reports_bitrate_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let vol = volume(dir.path(), "v.raw", [20, 16, 16], 8);
    let stream = dir.path().join("v.h3d");
    let out = run(&[
        "compress",
        "--in",
        p(&vol),
        "--out",
        p(&stream),
        "--method",
        "11/8",
        "--inverse-policy",
        "3/2",
        "--retain",
        "128",
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stderr).contains("bitrate: 2.000 bpv"));

    let recon = dir.path().join("r.raw");
    let out = run(&["decompress", "--in", p(&stream), "--out", p(&recon)]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let (a, _) = read_volume(&vol).unwrap();
    let (b, h) = read_volume(&recon).unwrap();
    assert_eq!(h.bit_depth, 8);
    assert!(psnr(&a, &b, 8).unwrap() > 30.0);

    let out = run(&["evaluate", "--orig", p(&vol), "--recon", p(&recon)]);
    assert!(out.status.success());
    let stdout = text(&out.stdout);
    assert!(stdout.starts_with("PSNR ") && stdout.contains("SSIM "));
}

#[test]
fn lossless_at_full_rate() {
    let dir = tempfile::tempdir().unwrap();
    let vol = volume(dir.path(), "v.raw", [8, 8, 16], 16);
    let stream = dir.path().join("v.h3d");
    let recon = dir.path().join("r.raw");
    for method in [["--method", "dht"], ["--method", "dct"]] {
        assert!(run(&[
            "compress",
            "--in",
            p(&vol),
            "--out",
            p(&stream),
            method[0],
            method[1],
            "--bpv",
            "16"
        ])
        .status
        .success());
        assert!(run(&["decompress", "--in", p(&stream), "--out", p(&recon)])
            .status
            .success());
        assert_eq!(fs::read(&vol).unwrap(), fs::read(&recon).unwrap());
    }
}

#[test]
fn transform_forward_and_inverse() {
    let dir = tempfile::tempdir().unwrap();
    let vol = volume(dir.path(), "v.raw", [9, 8, 8], 8);
    let coef = dir.path().join("y.bin");
    let back = dir.path().join("b.raw");
    let out = run(&[
        "transform",
        "--in",
        p(&vol),
        "--out",
        p(&coef),
        "--method",
        "1",
        "--inverse-policy",
        "2",
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert_eq!(fs::metadata(&coef).unwrap().len(), 2 * 512 * 8);
    let out = run(&["transform", "--inverse", "--in", p(&coef), "--out", p(&back)]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert_eq!(fs::read(&vol).unwrap(), fs::read(&back).unwrap());
}

#[test]
fn sweep_writes_csv_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rd.csv");
    let out = run(&[
        "evaluate",
        "--sweep",
        "--dims",
        "16,16,16",
        "--csv",
        p(&csv),
        "--threads",
        "2",
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let body = fs::read_to_string(&csv).unwrap();
    assert_eq!(body.lines().count(), 1 + 8 * 15);
    assert!(body.starts_with("method,bpv,L,psnr_db,ssim\n"));
    assert!(fs::read_to_string(dir.path().join("rd.svg"))
        .unwrap()
        .starts_with("<svg"));
    // nothing else is left behind
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 2);
}

#[test]
fn seeded_runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let vol = volume(dir.path(), "v.raw", [16, 16, 8], 8);
    let (a, b) = (dir.path().join("a.h3d"), dir.path().join("b.h3d"));
    for (out, threads) in [(&a, "1"), (&b, "4")] {
        let o = run(&[
            "--seed",
            "5",
            "--threads",
            threads,
            "compress",
            "--in",
            p(&vol),
            "--out",
            p(out),
            "--method",
            "3/2",
            "--bpv",
            "1.125",
        ]);
        assert!(o.status.success(), "{}", text(&o.stderr));
    }
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn bench_reports_reductions() {
    let out = run(&["bench", "--blocks", "16", "--repeat", "2"]);
    assert!(out.status.success());
    let stdout = text(&out.stdout);
    assert!(stdout.starts_with("method,mean_ms,reduction_vs_dht_pct,reduction_vs_dct_pct\n"));
    assert_eq!(stdout.lines().count(), 7);
    assert!(stdout.contains("\nH(11/8),"));
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        vec!["compress", "--in", "a", "--out", "b", "--method", "dht"],
        vec![
            "compress", "--in", "a", "--out", "b", "--method", "1/3", "--retain", "8",
        ],
        vec!["search", "--bogus"],
        vec!["evaluate", "--orig", "a"],
        vec!["bench", "--blocks", "0"],
    ] {
        assert_eq!(run(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn validation_rejects_involutional_h1() {
    let dir = tempfile::tempdir().unwrap();
    let vol = volume(dir.path(), "v.raw", [8, 8, 8], 8);
    let out_path = dir.path().join("s.h3d");
    let out = run(&[
        "compress",
        "--in",
        p(&vol),
        "--out",
        p(&out_path),
        "--method",
        "1",
        "--retain",
        "64",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("deviation"));
    assert!(!out_path.exists());
}

#[test]
fn data_errors_exit_3_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let vol = dir.path().join("bad.raw");
    fs::write(&vol, [0u8; 100]).unwrap();
    fs::write(dir.path().join("bad.raw.toml"), "dims = [8, 8, 8]\nbit_depth = 8\n").unwrap();
    let stream = dir.path().join("s.h3d");
    let out = run(&[
        "compress",
        "--in",
        p(&vol),
        "--out",
        p(&stream),
        "--method",
        "dht",
        "--retain",
        "8",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!stream.exists());

    fs::write(&stream, b"not a stream").unwrap();
    let recon = dir.path().join("r.raw");
    assert_eq!(
        run(&["decompress", "--in", p(&stream), "--out", p(&recon)])
            .status
            .code(),
        Some(3)
    );
    assert!(!recon.exists());
}
