use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tagcond"))
}

fn quick_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/quick.toml")
}

fn run(args: &[&str]) -> std::process::Output {
    let out = bin().args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

#[test]
fn run_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config();
    let out = tmp.path().to_str().unwrap();
    let files = ["summary.json", "summary.csv", "seed-1/rounds.jsonl", "seed-1/packs.jsonl", "seed-1/checkpoint/model.bin"];
    let snapshot = || files.map(|f| fs::read(tmp.path().join(f)).unwrap());
    let args = ["run", "--config", cfg.to_str().unwrap(), "--out", out, "--seed", "1", "--quiet"];
    run(&args);
    let first = snapshot();
    run(&args);
    for (f, (x, y)) in files.iter().zip(first.iter().zip(snapshot().iter())) {
        assert!(x == y, "{f} changed on rerun");
    }
    let rounds = fs::read_to_string(tmp.path().join("seed-1/rounds.jsonl")).unwrap();
    assert_eq!(rounds.lines().count(), 5);
}

#[test]
fn generated_files_round_trip_through_a_files_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config();
    let out = tmp.path().join("data");
    run(&["generate-data", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "0", "--quiet"]);
    let nodes = out.join("data-seed-0/nodes.jsonl");
    assert_eq!(fs::read_to_string(&nodes).unwrap().lines().count(), 120);
    let toml = "[graph-core.data]\nsource = \"files\"\nnodes = \"data/data-seed-0/nodes.jsonl\"\nedges = \"data/data-seed-0/edges.txt\"\n\n\
                [text-bank]\nencoder = { kind = \"hash\", dim = 32 }\n\n[gnn-backbone]\nhidden = 32\n\n\
                [fed-sim]\nrounds = 2\nclients = 3\n\n[bench-cli]\nseeds = [0]\nout_dir = \"run\"\n";
    let path = tmp.path().join("files.toml");
    fs::write(&path, toml).unwrap();
    run(&["run", "--config", path.to_str().unwrap(), "--quiet"]);
    assert!(tmp.path().join("run/seed-0/metrics.json").exists());
}

#[test]
fn report_reads_a_finished_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config();
    let out = tmp.path().to_str().unwrap();
    run(&["run", "--config", cfg.to_str().unwrap(), "--out", out, "--seed", "2", "--quiet"]);
    let rep = run(&["report", "--config", cfg.to_str().unwrap(), "--out", out, "--seed", "2"]);
    assert!(String::from_utf8_lossy(&rep.stdout).contains("accuracy"));
}

#[test]
fn bad_config_exits_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    fs::write(&path, "[fed-sim]\nroundz = 3\n").unwrap();
    let out = bin().args(["run", "--config", path.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("roundz"));
}

#[test]
fn checkpoint_for_other_data_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config();
    let out = tmp.path().to_str().unwrap();
    run(&["run", "--config", cfg.to_str().unwrap(), "--out", out, "--seed", "0", "--quiet"]);
    fs::rename(tmp.path().join("seed-0"), tmp.path().join("seed-1")).unwrap();
    let res = bin()
        .args(["faithfulness", "--config", cfg.to_str().unwrap(), "--out", out, "--seed", "1", "--quiet"])
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn theory_check_passes_and_writes_a_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config();
    run(&["theory-check", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap(), "--quiet"]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("theory.json")).unwrap()).unwrap();
    assert!(!v["checks"].as_array().unwrap().is_empty());
}
