use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use remlab::varsolve::rem_gaussian_closed_form;
use serde_json::Value;

const REM: &str = r#"{"variant":"REM","p":[1.0],"b":2,
    "indices":[{"index":[1],"weight":1.0,"family":{"kind":"gaussian"}}],"h":0}"#;
const REM_EXP: &str = r#"{"variant":"REM","p":[1.0],
    "indices":[{"index":[1],"weight":1.0,"family":{"kind":"two_sided_exp"}}]}"#;
const GREM: &str = r#"{"variant":"GREM","p":[0.5,0.5],"indices":[
    {"index":[1],"weight":0.8944271909999159,"family":{"kind":"gaussian"}},
    {"index":[1,2],"weight":0.4472135954999579,"family":{"kind":"gaussian"}}]}"#;

fn remlab(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_remlab"));
    cmd.args(args).env_remove("REMLAB_MAX_N");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Data rows of a CSV, split into fields (the box column is the only quoted one).
fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| {
            let mut fields = Vec::new();
            let mut cur = String::new();
            let mut quoted = false;
            for c in l.chars() {
                match c {
                    '"' => quoted = !quoted,
                    ',' if !quoted => fields.push(std::mem::take(&mut cur)),
                    _ => cur.push(c),
                }
            }
            fields.push(cur);
            fields
        })
        .collect()
}

#[test]
fn invalid_specs_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad_p = write(dir.path(), "bad_p.json", &REM.replace("[1.0]", "[0.5,0.6]"));
    let o = remlab(&["solve", "--spec", &bad_p, "--beta", "1"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("p must sum to 1"));

    let chain = GREM.replace("\"index\":[1,2]", "\"index\":[2]");
    let bad_chain = write(dir.path(), "bad_chain.json", &chain);
    let o = remlab(&["solve", "--spec", &bad_chain, "--beta", "1"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("GREM indices must form the chain"));

    let broken = write(dir.path(), "broken.json", "{\"variant\": \"REM\",\n\"p\": [1.0,]\n}");
    let o = remlab(&["solve", "--spec", &broken, "--beta", "1"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn solve_matches_closed_form_on_a_beta_range() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "rem.json", REM);
    let out = dir.path().join("out");
    let o = remlab(&["solve", "--spec", &spec, "--beta", "0:2.5:0.25", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("solve.csv")).unwrap();
    let rows = rows(&csv);
    assert_eq!(rows.len(), 11);
    for r in &rows {
        let beta: f64 = r[1].parse().unwrap();
        let value: f64 = r[2].parse().unwrap();
        assert!((value - rem_gaussian_closed_form(beta)).abs() <= 1e-4, "beta {beta}: {value}");
    }
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), std::f64::consts::LN_2);

    let docs: Vec<PathBuf> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    assert_eq!(docs.len(), 11);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&docs[0]).unwrap()).unwrap();
    for key in ["beta", "value", "argmax", "method", "grid", "config_hash"] {
        assert!(doc.get(key).is_some(), "missing {key}");
    }
    assert!(doc["grid"].get("step").is_some() && doc["grid"].get("refinements").is_some());
}

#[test]
fn exponential_kink_at_beta_one() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "rem_exp.json", REM_EXP);
    let o = remlab(&["solve", "--spec", &spec, "--beta", "1"], &[]);
    assert_eq!(o.status.code(), Some(0));
    let v: f64 = rows(&stdout(&o))[0][2].parse().unwrap();
    assert!((v - std::f64::consts::LN_2).abs() <= 1e-4, "{v}");
}

#[test]
fn compare_threshold_drives_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "rem.json", REM);
    let ok = remlab(
        &["compare", "--spec", &spec, "--beta", "0.5", "--n", "20", "--replicas", "100", "--threshold", "0.05"],
        &[],
    );
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert_eq!(rows(&stdout(&ok)).len(), 1);

    let tight = remlab(&["compare", "--spec", &spec, "--beta", "0.5", "--n", "12", "--threshold", "1e-6"], &[]);
    assert_eq!(tight.status.code(), Some(1));

    let empty = remlab(&["compare", "--spec", &spec, "--beta", "", "--n", "12"], &[]);
    assert_eq!(empty.status.code(), Some(2));
    let missing = remlab(&["compare", "--spec", &spec, "--n", "12"], &[]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn ldp_check_reports_the_three_regimes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "rem.json", REM);
    let o = remlab(
        &[
            "ldp-check", "--spec", &spec, "--n", "12,16,20", "--seed", "3",
            "--box", "0.5,0.6", "--box", "1.3,1.4", "--box", "1.1,1.25",
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = rows(&stdout(&o));
    assert_eq!(rows.len(), 9);
    let regime = |b: &str| {
        let r: Vec<&Vec<String>> = rows.iter().filter(|r| r[1] == b).collect();
        assert_eq!(r.len(), 3);
        (r[0][6].clone(), r[0][7].clone())
    };
    let (reg, rate) = regime("[0.5,0.6]");
    assert_eq!(reg, "concentrated");
    assert!((rate.parse::<f64>().unwrap() + 0.125).abs() < 1e-12);
    assert_eq!(regime("[1.3,1.4]"), ("extinct".to_string(), "-inf".to_string()));
    assert_eq!(regime("[1.1,1.25]"), ("indeterminate".to_string(), String::new()));
}

#[test]
fn enumeration_cap_is_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "rem.json", REM);
    let args = ["simulate", "--spec", &spec, "--beta", "1", "--n", "12", "--replicas", "2"];
    assert_eq!(remlab(&args, &[("REMLAB_MAX_N", "10")]).status.code(), Some(2));
    assert_eq!(remlab(&args, &[("REMLAB_MAX_N", "31")]).status.code(), Some(2));
    assert_eq!(remlab(&args, &[("REMLAB_MAX_N", "12")]).status.code(), Some(0));
}

#[test]
fn simulate_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "grem.json", GREM);
    let args = ["simulate", "--spec", &spec, "--beta", "0.5,2", "--n", "6,17", "--replicas", "4", "--seed", "11"];
    let one = remlab(&args, &[("RAYON_NUM_THREADS", "1")]);
    let four = remlab(&args, &[("RAYON_NUM_THREADS", "4")]);
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(rows(&stdout(&one)).len(), 2 * 2 * 4);
}

fn statuses(dir: &Path) -> Vec<String> {
    let m: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    m["cells"].as_array().unwrap().iter().map(|c| c["status"].as_str().unwrap().to_string()).collect()
}

#[test]
fn sweep_is_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "rem.json", REM);
    let b = write(dir.path(), "grem.json", GREM);
    let out = dir.path().join("sweep");
    let out_s = out.to_str().unwrap();
    let run = |seed: &str, threads: &str| {
        let o = remlab(
            &[
                "sweep", "--spec", &a, "--spec", &b, "--beta", "0.5,1,2", "--n", "6,8", "--replicas", "3",
                "--seed", seed, "--out", out_s,
            ],
            &[("RAYON_NUM_THREADS", threads)],
        );
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    };

    run("7", "4");
    let files: Vec<PathBuf> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(files.len(), 13);
    assert!(out.join("manifest.json").exists());
    assert!(statuses(&out).iter().all(|s| s == "computed"));
    let victim = out.join("grem_beta0001_n8.json");
    let before = std::fs::read(&victim).unwrap();

    run("7", "1");
    assert!(statuses(&out).iter().all(|s| s == "skipped"));

    std::fs::remove_file(&victim).unwrap();
    run("7", "1");
    let st = statuses(&out);
    assert_eq!(st.iter().filter(|s| *s == "computed").count(), 1);
    assert_eq!(st.iter().filter(|s| *s == "skipped").count(), 11);
    assert_eq!(std::fs::read(&victim).unwrap(), before, "recomputed cell differs");

    run("8", "4");
    assert!(statuses(&out).iter().all(|s| s == "computed"));
    let m: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 8);
    assert_eq!(m["replica_seeds"].as_array().unwrap().len(), 3);
    assert!(m["version"].is_string() && m["config_hash"].is_string());
}

#[test]
fn sweep_requires_an_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "rem.json", REM);
    let o = remlab(&["sweep", "--spec", &a, "--beta", "1", "--n", "4"], &[]);
    assert_eq!(o.status.code(), Some(2));
}
