use std::path::Path;
use std::process::{Command, Output};

fn gridmem(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridmem"))
        .args(args)
        .env("GRIDMEM_OUT", dir)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn files(dir: &Path, prefix: &str) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with(prefix))
        .collect();
    v.sort();
    v
}

#[test]
fn validate_writes_manifest_to_env_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = gridmem(dir.path(), &["validate", "--sizes", "8,16"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(files(dir.path(), "manifest-").len(), 1);
}

#[test]
fn coherence_then_fit_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("coh.toml");
    std::fs::write(
        &cfg,
        "schema_version = 1\nexperiment = \"coherence\"\n[lattice]\nn = 5\n[coherence]\nt0 = 0.01\nratio = 1.2\nbootstrap = 100\n",
    )
    .unwrap();
    let out = gridmem(
        d,
        &[
            "coherence", "-c", cfg.to_str().unwrap(), "--betas", "2,2.5,3,3.5", "--sizes", "8", "--trials", "200",
            "--max-time", "1e4",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let tau = files(d, "tau-");
    assert_eq!(tau.len(), 1);
    assert!(!files(d, "pcurve-").is_empty());
    let text = std::fs::read_to_string(d.join(&tau[0])).unwrap();
    assert_eq!(text.lines().count(), 5);

    let input = d.join(&tau[0]);
    let out = gridmem(d, &["fit", "--input", input.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit = files(d, "fit-");
    assert_eq!(fit.len(), 1);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join(&fit[0])).unwrap()).unwrap();
    assert!(json["reports"].as_array().is_some_and(|r| !r.is_empty()));
}

#[test]
fn single_pair_writes_csv_and_event_log() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let log = d.join("events.csv");
    let out = gridmem(
        d,
        &["single-pair", "--l", "8", "--t-max", "20", "--samples", "10", "--event-log", log.to_str().unwrap()],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(files(d, "single_pair-").len(), 1);
    assert!(std::fs::read_to_string(&log).unwrap().lines().count() > 1);
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bad = d.join("bad.toml");
    std::fs::write(&bad, "schema_version = 1\nexperiment = \"coherence\"\nbogus = 3\n").unwrap();
    let out = gridmem(d, &["coherence", "-c", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    std::fs::write(&bad, "schema_version = 7\nexperiment = \"coherence\"\n").unwrap();
    assert_eq!(gridmem(d, &["coherence", "-c", bad.to_str().unwrap()]).status.code(), Some(1));

    let missing = d.join("nope.toml");
    assert_eq!(gridmem(d, &["validate", "-c", missing.to_str().unwrap()]).status.code(), Some(1));

    // six lines with M = 2 fail the degeneracy condition
    std::fs::write(
        &bad,
        "schema_version = 1\nexperiment = \"validate\"\n[lattice]\nn = 5\nm = 2\ngrid = { kind = \"pattern\", gaps = [2] }\n",
    )
    .unwrap();
    let args = ["validate", "-c", bad.to_str().unwrap(), "--sizes"];
    assert_eq!(gridmem(d, &[&args[..], &["8,16"]].concat()).status.code(), Some(0));
    assert_eq!(gridmem(d, &[&args[..], &["12"]].concat()).status.code(), Some(1));
    assert_eq!(files(d, "manifest-").len(), 1);
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let input = d.join("missing_tau.csv");
    let out = gridmem(d, &["fit", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
