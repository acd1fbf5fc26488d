use std::path::Path;
use std::process::{Command, Output};

use hetreco::io::{read_image, read_mat, write_image};
use hetreco::ndarray::NDArray;

fn hetreco(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetreco"))
        .args(args)
        .current_dir(dir)
        .env_remove("HETRECO_DEVICE")
        .env_remove("HETRECO_BACKENDS")
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn rel_l2(a: &NDArray, b: &NDArray) -> f64 {
    let (a, b) = (a.as_c32().unwrap(), b.as_c32().unwrap());
    let num: f64 = a.iter().zip(b).map(|(x, y)| f64::from((x - y).norm_sqr())).sum();
    let den: f64 = b.iter().map(|y| f64::from(y.norm_sqr())).sum();
    (num / den).sqrt()
}

#[test]
fn devices_table_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let table = ok(&hetreco(&["devices"], dir.path()));
    assert_eq!(table.lines().count(), 2, "{table}");
    assert!(table.contains("reference:0"));
    let json: serde_json::Value = serde_json::from_str(&ok(&hetreco(&["--backends", "interp", "devices", "--json"], dir.path()))).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 2);
    assert_eq!(json[1]["supports_source_kernels"], true);
}

#[test]
fn negate_black_to_white_and_back() {
    let dir = tempfile::tempdir().unwrap();
    write_image(dir.path().join("black.pgm"), &NDArray::from_u8(&[4, 3], vec![0; 12]).unwrap()).unwrap();
    ok(&hetreco(&["negate", "--input", "black.pgm", "--output", "white.pgm"], dir.path()));
    assert_eq!(read_image(dir.path().join("white.pgm")).unwrap().as_u8().unwrap(), &[255; 12]);

    let img = NDArray::from_u8(&[3, 2, 2], (0..12).map(|i| i * 20).collect()).unwrap();
    write_image(dir.path().join("c.ppm"), &img).unwrap();
    ok(&hetreco(&["negate", "--input", "c.ppm", "--output", "n.ppm"], dir.path()));
    ok(&hetreco(&["--backends", "interp", "negate", "--input", "n.ppm", "--output", "nn.ppm", "--device", "source"], dir.path()));
    assert_eq!(read_image(dir.path().join("nn.ppm")).unwrap(), img);
}

#[test]
fn failures_exit_nonzero_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = hetreco(&["negate", "--input", "missing.pgm", "--output", "x.pgm"], dir.path());
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: reading missing.pgm"));

    let out = hetreco(&["negate", "--input", "a", "--output", "b", "--device", "gpu"], dir.path());
    assert!(!out.status.success());
    let out = hetreco(&["gen-phantom", "--nx", "100", "--out-kdata", "k", "--out-smaps", "s", "--out-truth", "t"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("power of two"));
}

#[test]
fn phantom_then_reconstruct() {
    let dir = tempfile::tempdir().unwrap();
    let gen = ["gen-phantom", "--nx", "32", "--ny", "32", "--frames", "3", "--coils", "4", "--seed", "9"];
    let files = ["--out-kdata", "k.mat", "--out-smaps", "s.mat", "--out-truth", "t.mat"];
    ok(&hetreco(&[&gen[..], &files[..]].concat(), dir.path()));
    let first = std::fs::read(dir.path().join("k.mat")).unwrap();
    ok(&hetreco(&[&gen[..], &files[..]].concat(), dir.path()));
    assert_eq!(std::fs::read(dir.path().join("k.mat")).unwrap(), first, "deterministic per seed");

    ok(&hetreco(&["reconstruct", "--kdata", "k.mat", "--smaps", "s.mat", "--method", "sens", "--output", "m.mat"], dir.path()));
    let m = read_mat(dir.path().join("m.mat")).unwrap().remove(0);
    let t = read_mat(dir.path().join("t.mat")).unwrap().remove(0);
    assert_eq!(m.name, "recon");
    assert!(rel_l2(&m.array, &t.array) <= 1e-4);

    let out = hetreco(&["reconstruct", "--kdata", "k.mat", "--method", "sens", "--output", "m.mat"], dir.path());
    assert_eq!(out.status.code(), Some(2), "usage error");
}

#[test]
fn single_coil_rss_is_modulus() {
    let dir = tempfile::tempdir().unwrap();
    ok(&hetreco(&["gen-phantom", "--nx", "16", "--ny", "16", "--frames", "2", "--coils", "1", "--out-kdata", "k.mat", "--out-smaps", "s.mat", "--out-truth", "t.mat"], dir.path()));
    ok(&hetreco(&["reconstruct", "--kdata", "k.mat", "--method", "rss", "--output", "r.mat"], dir.path()));
    let r = read_mat(dir.path().join("r.mat")).unwrap().remove(0).array;
    let t = read_mat(dir.path().join("t.mat")).unwrap().remove(0).array;
    // One coil with a unit-modulus map: |S * M| = |M|.
    for (a, b) in r.as_f32().unwrap().iter().zip(t.as_c32().unwrap()) {
        assert!((a - b.norm()).abs() <= 1e-5, "{a} vs {}", b.norm());
    }
}

#[test]
fn bench_rows_and_deterministic_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = ok(&hetreco(&["bench", "--op", "rss", "--sizes", "16x16x2x3", "--repeats", "4"], dir.path()));
    let mut rows = csv::Reader::from_reader(csv.as_bytes());
    let recs: Vec<csv::StringRecord> = rows.records().map(Result::unwrap).collect();
    assert_eq!(recs.len(), 1);
    assert!(recs[0][5].parse::<f64>().unwrap() > 0.0);

    let args = ["bench", "--op", "fft", "--sizes", "8x8,16x4", "--repeats", "1", "--deterministic-timing", "--csv"];
    ok(&hetreco(&[&args[..], &["a.csv"]].concat(), dir.path()));
    ok(&hetreco(&[&args[..], &["b.csv"]].concat(), dir.path()));
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.csv")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 3);
}

#[test]
fn kernels_command_lists_builtins() {
    let dir = tempfile::tempdir().unwrap();
    let src = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/kernels");
    let mut args = vec!["kernels".to_string()];
    for entry in std::fs::read_dir(src).unwrap() {
        args.push(entry.unwrap().path().display().to_string());
    }
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = ok(&hetreco(&args, dir.path()));
    assert!(out.starts_with("built 6 unit(s) on interp:0"), "{out}");
}
