use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn adp(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_adp"));
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("ADP_")) {
        cmd.env_remove(k);
    }
    cmd.args(args).envs(envs.iter().copied()).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn error_json(o: &Output) -> serde_json::Value {
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    let line = err.lines().last().expect("an error line");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("not json: {line}: {e}"))
}

const SMALL: &[&str] = &["--records", "400", "--items", "30", "--k", "5", "--trials", "30", "--bootstrap-resamples", "100"];

fn run_to(dir: &Path, name: &str, args: &[&str]) -> Vec<Vec<u8>> {
    let out = dir.join(name);
    let mut all = args.to_vec();
    let out_s = out.to_str().unwrap();
    all.extend(["--out", out_s]);
    stdout(&adp(&all, &[]));
    let mut files = vec![fs::read(&out).unwrap(), fs::read(format!("{out_s}.config.json")).unwrap()];
    if let Ok(w) = fs::read(format!("{out_s}.witnesses.txt")) {
        files.push(w);
    }
    files
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        [&["topk-rnm", "--epsilon", "0.5,1"][..], SMALL].concat(),
        [&["topk-svt", "--epsilon", "0.5"][..], SMALL].concat(),
        vec!["monitor-location", "--trials", "200", "--bootstrap-resamples", "100"],
        vec!["monitor-map", "--users", "600", "--locations", "300", "--trials", "20", "--bootstrap-resamples", "100"],
        vec!["verify", "--trials", "10000"],
    ];
    for args in cases {
        let a = run_to(dir.path(), "a.csv", &args);
        let b = run_to(dir.path(), "a.csv", &args);
        assert_eq!(a, b, "{args:?}");
    }
    let data = dir.path().join("synth.dat");
    let d = data.to_str().unwrap();
    let first = run_to(dir.path(), "s.csv", &["synth", "--dataset", d, "--records", "500", "--items", "40"]);
    let bytes = fs::read(&data).unwrap();
    let second = run_to(dir.path(), "s.csv", &["synth", "--dataset", d, "--records", "500", "--items", "40"]);
    assert_eq!(first, second);
    assert_eq!(bytes, fs::read(&data).unwrap());
    assert_eq!(String::from_utf8(bytes).unwrap().lines().count(), 500);
}

#[test]
fn report_has_expected_columns() {
    let out = stdout(&adp(&[&["topk-rnm"][..], SMALL].concat(), &[]));
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "subcommand,epsilon,k,c,threshold,trials,seed,metric,mean,ci_lo,ci_hi");
    for l in lines {
        let f: Vec<&str> = l.split(',').collect();
        assert_eq!(f.len(), 11);
        let (m, lo, hi): (f64, f64, f64) = (f[8].parse().unwrap(), f[9].parse().unwrap(), f[10].parse().unwrap());
        assert!(lo <= m && m <= hi, "{l}");
    }
}

#[test]
fn flags_override_env_which_overrides_file() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("c.json");
    fs::write(&conf, r#"{"epsilon": [0.25], "trials": 20, "bootstrap_resamples": 50}"#).unwrap();
    let c = conf.to_str().unwrap();
    let eps_of = |o: &Output| stdout(o).lines().nth(1).unwrap().split(',').nth(1).unwrap().to_string();

    let base = ["monitor-location", "--config", c];
    assert_eq!(eps_of(&adp(&base, &[])), "0.25");
    assert_eq!(eps_of(&adp(&base, &[("ADP_EPSILON", "0.75")])), "0.75");
    assert_eq!(eps_of(&adp(&[&base[..], &["--epsilon", "2"]].concat(), &[("ADP_EPSILON", "0.75")])), "2");
    let trials = stdout(&adp(&base, &[])).lines().nth(1).unwrap().split(',').nth(5).unwrap().to_string();
    assert_eq!(trials, "20");
}

#[test]
fn failures_emit_a_json_error_line() {
    let e = error_json(&adp(&["nonsense"], &[]));
    assert_eq!(e["error"], "unknown_subcommand");
    let e = error_json(&adp(&["topk-rnm", "--epsilon=-1"], &[]));
    assert_eq!(e["error"], "invalid_budget");
    let e = error_json(&adp(&["topk-rnm", "--dataset", "/definitely/missing.dat"], &[]));
    assert_eq!(e["error"], "io");
    let e = error_json(&adp(&["topk-rnm", "--trials", "many"], &[]));
    assert_eq!(e["error"], "usage");
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.dat");
    fs::write(&bad, "1 2\n3 x\n").unwrap();
    let e = error_json(&adp(&["topk-rnm", "--dataset", bad.to_str().unwrap()], &[]));
    assert_eq!(e["error"], "parse");
}

#[test]
fn dataset_files_drive_experiments() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.dat");
    stdout(&adp(&["synth", "--dataset", t.to_str().unwrap(), "--records", "300", "--items", "25"], &[]));
    let out = stdout(&adp(&["topk-rnm", "--dataset", t.to_str().unwrap(), "--k", "3", "--trials", "10"], &[]));
    assert!(out.contains("topk-rnm,1,3,,,10,0,asym_accuracy,"));

    let v = dir.path().join("v.csv");
    stdout(&adp(&["synth", "--synth", "visits", "--dataset", v.to_str().unwrap(), "--users", "400", "--locations", "50"], &[]));
    let out = stdout(&adp(&["monitor-map", "--dataset", v.to_str().unwrap(), "--batch-size", "100", "--trials", "5"], &[]));
    assert!(out.contains("fn_ratio_update_3"));
}

#[test]
fn dataset_and_synth_conflict_outside_synth() {
    let e = error_json(&adp(&["topk-rnm", "--dataset", "x.dat", "--synth", "zipf"], &[]));
    assert_eq!(e["error"], "invalid_parameter");
}
