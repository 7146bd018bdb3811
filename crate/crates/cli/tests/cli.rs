use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fringeproc"))
        .args(args)
        .current_dir(dir)
        .env("FRINGEPROC_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn simulate_then_evaluate_against_truth_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--out", "f.fpai", "--rows", "64", "--cols", "64", "--period", "12", "--seed", "3"]);
    for f in ["f.fpai", "f.json", "f_phase.fpai", "f_fo.fpai", "f_direction.fpai", "f.manifest.json"] {
        assert!(d.join(f).exists(), "{f} missing");
    }
    let stdout = ok(d, &["evaluate", "--pred", "f_fo.fpai", "--ref", "f_fo.fpai", "--json", "--json-report", "r.json"]);
    let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(report["orientation_error"].as_f64(), Some(0.0));
    assert!(d.join("r.json").exists());
}

#[test]
fn train_one_epoch_writes_loadable_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["make-dataset", "--out", "ds", "--train", "4", "--val", "2", "--rows", "16", "--cols", "16", "--seed", "1"]);
    assert!(d.join("ds/train/manifest.json").exists() && d.join("ds/val/item_1_fo.fpai").exists());
    ok(d, &["train", "--dataset", "ds", "--filters", "4", "--blocks", "1", "--epochs", "1", "--out", "m.fpaw", "--json-report", "h.json"]);
    let w = fringeproc::net::load_weights(&d.join("m.fpaw")).unwrap();
    assert_eq!(w.config.filters, 4);
    let history: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("h.json")).unwrap()).unwrap();
    assert_eq!(history["epochs"].as_array().unwrap().len(), 1);

    ok(d, &["simulate", "--out", "s.fpai", "--rows", "32", "--cols", "32", "--period", "10"]);
    ok(d, &["infer", "--model", "m.fpaw", "--input", "s.fpai", "--out", "fo.fpai", "--prefilter"]);
    ok(d, &["evaluate", "--pred", "fo.fpai", "--ref", "s_fo.fpai", "--exclude-border", "4"]);
}

#[test]
fn usage_and_io_failures_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let usage = run(d, &["simulate", "--out", "f.fpai", "--no-such-flag"]);
    assert_eq!(usage.status.code(), Some(2));
    let io = run(d, &["orient-classic", "--input", "missing.fpai", "--out", "o.fpai"]);
    assert_eq!(io.status.code(), Some(3));
    std::fs::write(d.join("junk.fpai"), b"not a container").unwrap();
    let format = run(d, &["unwrap-orientation", "--input", "junk.fpai", "--out", "o.fpai"]);
    assert_eq!(format.status.code(), Some(3));
}

#[test]
fn missing_model_reports_its_stage() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--out", "f.fpai", "--rows", "32", "--cols", "32", "--period", "10"]);
    let out = run(d, &["pipeline", "--input", "f.fpai", "--model", "absent.fpaw", "--out-dir", "p"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("load-model"));
}

#[test]
fn classic_chain_and_pipeline_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--out", "f.fpai", "--rows", "64", "--cols", "64", "--period", "12", "--coeff", "1"]);
    ok(d, &["orient-classic", "--input", "f.fpai", "--out", "fo.fpai", "--prefilter"]);
    ok(d, &["unwrap-orientation", "--input", "fo.fpai", "--out", "dir.fpai"]);
    ok(d, &["demodulate", "--input", "f.fpai", "--direction", "f_direction.fpai", "--out", "ph.fpai", "--prefilter"]);
    let s = ok(d, &["evaluate", "--pred", "ph.fpai", "--ref", "f_phase.fpai", "--metric", "rmse-phase", "--exclude-border", "16"]);
    assert!(s.starts_with("rmse-phase"));

    let w = fringeproc::net::build_network(fringeproc::net::NetworkConfig { filters: 4, blocks_per_path: 1, ..Default::default() }, 0).unwrap();
    fringeproc::net::save_weights(&w, &d.join("m.fpaw")).unwrap();
    // An untrained model may fail downstream; both runs must fail or succeed identically.
    let a = run(d, &["pipeline", "--input", "f.fpai", "--model", "m.fpaw", "--out-dir", "p"]);
    let b = run(d, &["pipeline", "--input", "f.fpai", "--model", "m.fpaw", "--out-dir", "p2"]);
    assert_eq!(a.status.code(), b.status.code());
    if a.status.success() {
        for f in ["orientation.fpai", "direction.fpai", "phase.fpai", "report.json"] {
            assert_eq!(std::fs::read(d.join("p").join(f)).unwrap(), std::fs::read(d.join("p2").join(f)).unwrap());
        }
    }
}

#[test]
fn benchmark_csv_has_one_row_per_case() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "benchmark", "--a-values", "0,2", "--noise", "0,0.1", "--methods", "cpfg,gradient", "--reps", "2", "--size", "64", "--out", "b.csv",
        "--error-maps", "maps",
    ];
    ok(d, &args);
    let csv = std::fs::read_to_string(d.join("b.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2 * 2);
    assert_eq!(csv.lines().next(), Some("a,noise_std,method,seed,oe"));
    let first = std::fs::read(d.join("b.csv")).unwrap();
    ok(d, &args);
    assert_eq!(std::fs::read(d.join("b.csv")).unwrap(), first);
    assert!(d.join("maps/a0_n0_cpfg_r0.fpai").exists());

    let no_model = run(d, &["benchmark", "--methods", "deeporient", "--out", "x.csv"]);
    assert_eq!(no_model.status.code(), Some(2));
}
