use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qite_core::cli::{compare, Baseline};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qite"))
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg("run").arg("--config").arg(config).arg("--out").arg(out).args(extra).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

const FIELD: &str = "algorithm = \"qite\"\ninitial_state = \"0\"\n\n[model]\nname = \"one_qubit_field\"\nalpha = 0.7071067811865476\nbeta = 0.7071067811865476\n\n[qite]\ndtau = 0.2\nn_steps = 25\ndomain_size = 1\n";

#[test]
fn field_model_run_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "field.toml", FIELD);
    let out = tmp.path().join("field");
    let o = run(&cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("qite.csv"));
    assert_eq!(rows[0], ["sweep", "beta", "energy", "fidelity_opt"]);
    assert_eq!(rows.len(), 27);
    let last = rows.last().unwrap();
    assert!((last[1].parse::<f64>().unwrap() - 5.0).abs() < 1e-12);
    assert!((last[2].parse::<f64>().unwrap() + 1.0).abs() < 1e-2);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "complete");
    assert_eq!(manifest["config"]["model"]["name"], "one_qubit_field");
    assert!(manifest["phases"].as_array().unwrap().iter().any(|p| p["name"] == "qite"));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!((summary["final_energy"].as_f64().unwrap() + 1.0).abs() < 1e-2);
}

#[test]
fn count_config_and_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("count");
    let o = run(&configs().join("count_k4_t7_d4.toml"), &out, &[]);
    assert!(o.status.success());
    assert!(fs::read_to_string(out.join("summary.json")).unwrap().contains("12544"));
    let o = bin().args(["count", "--k", "6", "--t", "17", "--d", "4", "--odd-y"]).output().unwrap();
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "22440");
}

#[test]
fn malformed_config_exits_2_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "algorithm = \"qite\"\n[model]\nname = \"heisenberg\"\nn = 4\nj = 1.0\nb = 0.0\nspin = 3\n");
    let out = tmp.path().join("bad");
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
    assert!(!out.exists());
}

#[test]
fn resource_limit_exits_3_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("big");
    let o = run(&configs().join("heisenberg6_d2.toml"), &out, &["--max-qubits", "4"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!out.exists());
}

#[test]
fn identical_seeds_give_identical_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("qlanczos_noisy.toml");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    assert!(run(&cfg, &a, &[]).status.success());
    assert!(run(&cfg, &b, &[]).status.success());
    assert!(run(&cfg, &c, &["--seed-override", "5"]).status.success());
    let body = |d: &Path| fs::read(d.join("qlanczos.csv")).unwrap();
    assert_eq!(body(&a), body(&b));
    assert_ne!(body(&a), body(&c));

    let metts = write(
        tmp.path(),
        "metts.toml",
        "algorithm = \"qmetts\"\nseed = 3\n[model]\nname = \"heisenberg\"\nn = 2\nj = 1.0\nb = 0.0\n[metts]\nbeta = 1.0\nn_samples = 30\nn_warmup = 2\n",
    );
    assert!(run(&metts, &a, &[]).status.success());
    assert!(run(&metts, &b, &[]).status.success());
    assert_eq!(fs::read(a.join("qmetts.csv")).unwrap(), fs::read(b.join("qmetts.csv")).unwrap());
    let rows = csv_rows(&a.join("qmetts.csv"));
    assert_eq!(rows[0], ["sample", "label", "value"]);
    assert_eq!(rows.len(), 31);
}

#[test]
fn compare_against_oracle_and_self() {
    let tmp = tempfile::tempdir().unwrap();
    let q = tmp.path().join("qite");
    assert!(run(&configs().join("heisenberg4_exact.toml"), &q, &[]).status.success());
    let rows = compare(std::slice::from_ref(&q), Baseline::Oracle).unwrap();
    let at5 = rows.iter().find(|r| (r.beta - 5.0).abs() < 1e-9).unwrap();
    assert!(at5.delta.abs() <= 1e-3);
    assert!(rows.iter().all(|r| r.check));
    let own = compare(&[q.clone(), q.clone()], Baseline::First).unwrap();
    assert!(own.iter().all(|r| r.delta == 0.0));

    let l = tmp.path().join("ql");
    let cfg = write(
        tmp.path(),
        "ql.toml",
        &fs::read_to_string(configs().join("qlanczos_heisenberg4.toml")).unwrap().replace("n_steps = 100", "n_steps = 30"),
    );
    assert!(run(&cfg, &l, &[]).status.success());
    let rows = compare(std::slice::from_ref(&l), Baseline::Oracle).unwrap();
    assert!(!rows.is_empty() && rows.iter().all(|r| r.check));

    let o = bin().arg("compare").arg(&q).arg(&l).args(["--baseline", "first"]).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = String::from_utf8_lossy(&o.stdout);
    assert!(report.starts_with("run,beta,value,reference,delta,check"));
}

#[test]
fn compare_rejects_mismatched_models() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run(&configs().join("tfi4_trotter1.toml"), &a, &[]).status.success());
    let cfg = write(tmp.path(), "f.toml", FIELD);
    assert!(run(&cfg, &b, &[]).status.success());
    let o = bin().arg("compare").arg(&a).arg(&b).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("different model"));
}

#[test]
fn batch_runs_get_separate_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write(tmp.path(), "first.toml", FIELD);
    let b = configs().join("count_k4_t7_d4.toml");
    let out = tmp.path().join("batch");
    let o = bin().env("QITE_THREADS", "2").arg("run").arg("--config").arg(&a).arg("--config").arg(&b).arg("--out").arg(&out).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("first/qite.csv").exists());
    assert!(out.join("count_k4_t7_d4/summary.json").exists());
}

#[test]
fn checked_in_configs_validate() {
    let mut n = 0;
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = qite_core::cli::ExperimentConfig::load(&path).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 20);
}
