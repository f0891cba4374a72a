use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lightcone"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn out_dir(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('j'))
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect()
}

#[test]
fn spectrum_tables() {
    let o = run(&["spectrum", "--p", "3", "--jmax", "1"]);
    assert!(o.status.success());
    assert_eq!(rows(&stdout(&o)), vec![vec!["0", "2", "-3"], vec!["1", "0", "-5"]]);

    let o = run(&["spectrum", "--free", "--jmax", "3"]);
    let lambdas: Vec<String> = rows(&stdout(&o)).into_iter().map(|r| r[1].clone()).collect();
    assert_eq!(lambdas, ["0", "-1", "-2"]);

    let o = run(&["spectrum", "--p", "5", "--jmax", "0", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["rows"][0]["lambda_plus"], 1.5);
    assert_eq!(v["rows"][0]["lambda_minus"], -2.5);
}

#[test]
fn configuration_errors_exit_2() {
    for args in [
        &["spectrum", "--p", "4"][..],
        &["spectrum", "--p", "3", "--k", "5"],
        &["verify", "--free", "--n", "8"],
        &["verify", "--free", "--p", "3"],
        &["verify", "--k", "1"],
        &["sweep", "--ps", "3,4", "--ks", "1"],
        &["sweep", "--ks", "1"],
        &["spectrum", "--bogus"],
        &["decompose", "--p", "5", "--k", "3"],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = out_dir("config");
    std::fs::create_dir_all(&dir).unwrap();
    let file = dir.join("run.cfg");
    std::fs::write(&file, "# spectrum settings\np = 7\njmax = 3\n").unwrap();
    let o = run(&["spectrum", "--config", file.to_str().unwrap(), "--jmax", "0"]);
    assert!(o.status.success());
    assert_eq!(rows(&stdout(&o)).len(), 1);
    std::fs::write(&file, "p = 7\ncolour = red\n").unwrap();
    let o = run(&["spectrum", "--config", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn evolve_mode_decays_exactly() {
    let dir = out_dir("evolve");
    let o = run(&["evolve", "--free", "--mode", "-1", "--tau-end", "2", "--snapshots", "1", "--out", dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.join("norms.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("tau,norm_H,norm_H2k"));
    let data: Vec<(f64, f64)> = lines
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (f[0], f[1])
        })
        .collect();
    let n0 = data[0].1;
    for (t, n) in &data {
        assert!((n - (-t).exp() * n0).abs() < 1e-6);
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["snapshots"][0]["path"], "snapshot_000.csv");
    assert!(dir.join("snapshot_000.csv").exists());
}

#[test]
fn cfl_violation_exits_3() {
    let o = run(&["evolve", "--p", "3", "--dtau", "0.05", "--tau-end", "1", "--out", out_dir("cfl").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn decompose_writes_both_splits() {
    for (name, extra) in [("orthogonal", None), ("spectral", Some("--spectral"))] {
        let dir = out_dir(name);
        let mut args = vec!["decompose", "--p", "3", "--k", "1", "--out", dir.to_str().unwrap()];
        args.extend(extra);
        let o = run(&args);
        assert!(o.status.success());
        let rec: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join("decomposition.json")).unwrap()).unwrap();
        assert_eq!(rec["split"], name);
        assert_eq!(rec["labels"], serde_json::json!(["plus(0)", "minus(0)"]));
        assert!(dir.join("remainder.csv").exists());
    }
}

#[test]
fn modes_catalogue() {
    let dir = out_dir("modes");
    let o = run(&["modes", "--free", "--jmax", "4", "--k", "2", "--out", dir.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("modes.json")).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 4);
    assert_eq!(v[3]["lambda"], -3.0);
}

#[test]
fn verify_and_sweep_exit_codes() {
    let dir = out_dir("verify");
    let o = run(&["verify", "--p", "5", "--k", "2", "--no-gauge", "--samples", "3", "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["summary"]["verdict"], "pass");
    assert!((report["summary"]["max_rate"].as_f64().unwrap() + 0.5).abs() < 0.05);

    let dir = out_dir("sweep");
    let o = run(&["sweep", "--ps", "3,5,7", "--ks", "1,2", "--samples", "2", "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let sweep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(sweep["summary"]["cells"], 6);
    assert!(dir.join("p5_k2").join("report.json").exists());

    // p = 5 with k = 3 has no eigenfunction basis: that cell fails, the rest run.
    let dir = out_dir("sweep-partial");
    let o = run(&["sweep", "--ps", "5", "--ks", "1,3", "--samples", "1", "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let sweep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(sweep["summary"]["passed"], 1);
    assert!(sweep["cells"][1]["error"].as_str().unwrap().contains("coincides"));
}
