use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use iaq::io::{encode_pnm, write_importance};
use iaq::model::{ImageTensor, ImportanceMap};
use serde_json::Value;
use tempfile::TempDir;

fn iaq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iaq")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = iaq(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn error_of(out: &Output) -> Value {
    assert!(!out.status.success());
    serde_json::from_slice(&out.stderr).unwrap()
}

/// 224×224 gray image and a 196-patch importance file shaped like extractor output.
fn fixture(dir: &Path, name: &str, seed: usize) -> (PathBuf, PathBuf) {
    let px = (0..224 * 224)
        .map(|i| {
            let (r, c) = (i / 224, i % 224);
            ((r * 3 + c * 5 + seed * 17) % 251) as f32
        })
        .collect();
    let image = ImageTensor::new(224, 224, 1, px).unwrap();
    let img = dir.join(format!("{name}.pgm"));
    fs::write(&img, encode_pnm(&image).unwrap()).unwrap();

    let scores: Vec<f64> = (0..196)
        .map(|p| {
            let (r, c) = ((p / 14) as f64 - 6.5, (p % 14) as f64 - 6.5 + seed as f64);
            (-(r * r + c * c) / 8.0).exp() + 1e-3
        })
        .collect();
    let total: f64 = scores.iter().sum();
    let doc = serde_json::json!({
        "n_patches": 196,
        "grid": [14, 14],
        "scores": scores.iter().map(|s| s / total).collect::<Vec<_>>(),
    });
    let attn = dir.join(format!("{name}.attn.json"));
    fs::write(&attn, serde_json::to_string(&doc).unwrap()).unwrap();
    (img, attn)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn allocate_encode_transmit_decode() {
    let dir = TempDir::new().unwrap();
    let (img, attn) = fixture(dir.path(), "a", 0);
    let alloc = dir.path().join("alloc.json");
    ok(&["allocate", "--image", s(&img), "--importance", s(&attn), "--rho-target", "0.25", "--solver", "wf", "--out", s(&alloc)]);
    let doc: Value = serde_json::from_str(&fs::read_to_string(&alloc).unwrap()).unwrap();
    assert_eq!(doc["bits"].as_array().unwrap().len(), 196);
    assert_eq!(doc["side_info_bits"], 800);
    assert!(doc["payload_bits"].as_u64().unwrap() + 800 <= doc["target_bits"].as_u64().unwrap());

    let sent = dir.path().join("sent.iaqb");
    let noisy = dir.path().join("noisy.iaqb");
    let again = dir.path().join("again.iaqb");
    let recon = dir.path().join("recon.pgm");
    ok(&["encode", "--image", s(&img), "--importance", s(&attn), "--allocation", s(&alloc), "--out", s(&sent)]);
    ok(&["transmit", "--input", s(&sent), "--out", s(&noisy), "--mu", "0.01", "--seed", "5"]);
    ok(&["transmit", "--input", s(&sent), "--out", s(&again), "--mu", "0.01", "--seed", "5"]);
    assert_eq!(fs::read(&noisy).unwrap(), fs::read(&again).unwrap());
    assert_ne!(fs::read(&noisy).unwrap(), fs::read(&sent).unwrap());
    // the header and depth table survive the channel
    assert_eq!(fs::read(&noisy).unwrap()[..128], fs::read(&sent).unwrap()[..128]);
    ok(&["decode", "--input", s(&noisy), "--out", s(&recon)]);
    assert!(fs::read(&recon).unwrap().starts_with(b"P5\n224 224\n255\n"));

    // noiseless transmit is the identity
    ok(&["transmit", "--input", s(&sent), "--out", s(&again), "--mu", "0"]);
    assert_eq!(fs::read(&again).unwrap(), fs::read(&sent).unwrap());
}

#[test]
fn run_report_and_level_map() {
    let dir = TempDir::new().unwrap();
    let (img, attn) = fixture(dir.path(), "b", 1);
    let report = dir.path().join("report.json");
    let stem = dir.path().join("levels");
    let stdout = ok(&[
        "run", "--image", s(&img), "--importance", s(&attn), "--solver", "wf-mod", "--rho-target", "0.3",
        "--snr-db", "4", "--seed", "9", "--report", s(&report), "--level-map", s(&stem),
    ]);
    let printed: Value = serde_json::from_str(&stdout).unwrap();
    let saved: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(printed, saved);
    assert_eq!(printed["rng"], "chacha20");
    assert!(printed["mu"].as_f64().unwrap() > 0.0);

    let levels: Value = serde_json::from_str(&fs::read_to_string(stem.with_extension("json")).unwrap()).unwrap();
    assert_eq!(levels["bits"], printed["bits"]);
    assert!(fs::read(stem.with_extension("pgm")).unwrap().starts_with(b"P5\n14 14\n255\n"));

    let stem2 = dir.path().join("again");
    ok(&["levelmap", "--report", s(&report), "--out", s(&stem2)]);
    assert_eq!(fs::read(stem.with_extension("pgm")).unwrap(), fs::read(stem2.with_extension("pgm")).unwrap());
}

#[test]
fn every_solver_runs() {
    let dir = TempDir::new().unwrap();
    let (img, attn) = fixture(dir.path(), "c", 2);
    let base = ["run", "--image", s(&img), "--importance", s(&attn), "--rho-target", "0.25", "--mu", "0.02"];
    for extra in [
        &["--solver", "ia"][..],
        &["--solver", "wf"],
        &["--solver", "ia-mod"],
        &["--solver", "wf-mod", "--adjust", "score"],
        &["--solver", "fixed-q"],
        &["--solver", "fixed-q", "--q", "2"],
        &["--solver", "top-k", "--k", "10"],
        &["--solver", "at", "--delta", "0.01"],
        &["--solver", "ast", "--delta-sum", "0.5"],
    ] {
        let args: Vec<&str> = base.iter().copied().chain(extra.iter().copied()).collect();
        let report: Value = serde_json::from_str(&ok(&args)).unwrap();
        assert_eq!(report["bits"].as_array().unwrap().len(), 196, "{extra:?}");
    }
}

#[test]
fn machine_readable_errors() {
    let dir = TempDir::new().unwrap();
    let (img, attn) = fixture(dir.path(), "d", 0);

    let err = error_of(&iaq(&["run", "--image", s(&img), "--importance", s(&attn), "--solver", "nope"]));
    assert_eq!(err["error"], "usage");

    let out = iaq(&["run", "--image", s(&img), "--importance", s(&attn), "--rho-target", "0.25", "--solver", "ia-mod", "--mu", "0.3"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_of(&out)["error"], "regime_violation");

    let short = dir.path().join("short.attn.json");
    write_importance(&short, &ImportanceMap::uniform(7, 7).unwrap()).unwrap();
    let err = error_of(&iaq(&["run", "--image", s(&img), "--importance", s(&short), "--rho-target", "0.25"]));
    assert_eq!(err["error"], "geometry_mismatch");

    let err = error_of(&iaq(&["run", "--image", s(&img), "--importance", s(&attn), "--rho-target", "0.00001"]));
    assert_eq!(err["error"], "invalid_budget");

    let err = error_of(&iaq(&["decode", "--input", s(&attn), "--out", "/dev/null"]));
    assert_eq!(err["error"], "invalid_stream");

    let err = error_of(&iaq(&["run", "--image", "/nonexistent.pgm", "--importance", s(&attn), "--rho-target", "0.25"]));
    assert_eq!(err["error"], "io");
    assert!(err["message"].is_string());
}

#[test]
fn sweep_counts_and_determinism() {
    let dir = TempDir::new().unwrap();
    let names: Vec<_> = (0..3).map(|i| fixture(dir.path(), &format!("img{i}"), i)).collect();
    let images: Vec<Value> = names
        .iter()
        .map(|(img, attn)| {
            serde_json::json!({
                "image": img.file_name().unwrap().to_str().unwrap(),
                "importance": attn.file_name().unwrap().to_str().unwrap(),
            })
        })
        .collect();
    let config = serde_json::json!({
        "images": images,
        "solvers": ["ia", "wf-mod"],
        "rho_targets": [0.125, 0.25],
        "mus": [0.05],
        "gammas": [1.0],
        "master_seed": 11,
    });
    let cfg = dir.path().join("sweep.json");
    fs::write(&cfg, config.to_string()).unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let json = dir.path().join("a.json");
    ok(&["sweep", "--config", s(&cfg), "--csv", s(&a), "--json", s(&json)]);
    ok(&["sweep", "--config", s(&cfg), "--csv", s(&b)]);
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());

    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    let status = reader.headers().unwrap().iter().position(|h| h == "status").unwrap();
    assert_eq!(rows.iter().filter(|r| &r[status] == "ok").count(), 12);
    assert_eq!(rows.iter().filter(|r| &r[status] == "aggregate").count(), 4);

    let report: Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert!(report["rows"][0]["wall_time_s"].as_f64().is_some());
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("empty.json");
    fs::write(&cfg, r#"{"images": [], "solvers": [], "rho_targets": [], "mus": [], "gammas": []}"#).unwrap();
    let csv = dir.path().join("out.csv");
    ok(&["sweep", "--config", s(&cfg), "--csv", s(&csv)]);
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("image,solver,rho_target,mu,gamma,status"));
}
