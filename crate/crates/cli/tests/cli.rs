use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lsdist_core::data::{generate, write_csv, Family, SyntheticSpec};
use lsdist_core::shapes::{write_pgm_ascii, GrayImage};
use lsdist_core::RngSpec;
use serde_json::Value;

fn lsdist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsdist")).args(args).output().expect("run lsdist")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn normal_csv(dir: &Path, name: &str, n: usize, mean: f64, seed: u64) -> String {
    let c = generate(
        &SyntheticSpec::new(Family::Normal { mean: vec![mean], variance: 1.0 }, n),
        RngSpec::new(seed),
    )
    .unwrap();
    let path = dir.join(name);
    write_csv(&c, &path).unwrap();
    path.to_string_lossy().into_owned()
}

fn s(p: PathBuf) -> String {
    p.to_string_lossy().into_owned()
}

fn assert_envelope(v: &Value, command: &str) {
    assert_eq!(v["command"], command);
    assert_eq!(v["tool"]["name"], "lsdist");
    assert_eq!(v["tool"]["version"], env!("CARGO_PKG_VERSION"));
    assert!(v["config"].is_object());
}

#[test]
fn dist_identical_inputs_print_zero() {
    let dir = tempfile::tempdir().unwrap();
    let a = normal_csv(dir.path(), "a.csv", 60, 0.0, 1);
    let out = stdout(&lsdist(&["dist", "--p", &a, "--q", &a, "--bands", "10", "--k", "auto", "--scheme", "ls1"]));
    assert_eq!(out, "0\n");
}

#[test]
fn dist_missing_file_exits_two_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let a = normal_csv(dir.path(), "a.csv", 20, 0.0, 1);
    let missing = s(dir.path().join("missing.csv"));
    let o = lsdist(&["dist", "--p", &a, "--q", &missing]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.csv"));
}

#[test]
fn schemes_share_jaccard_terms() {
    let dir = tempfile::tempdir().unwrap();
    let a = normal_csv(dir.path(), "a.csv", 150, 0.0, 1);
    let b = normal_csv(dir.path(), "b.csv", 130, 0.7, 2);
    let mut reports = Vec::new();
    for scheme in ["ls0", "ls1"] {
        let out = dir.path().join(format!("{scheme}.json"));
        stdout(&lsdist(&["dist", "--p", &a, "--q", &b, "--scheme", scheme, "--out", &s(out.clone())]));
        let v = json(&out);
        assert_envelope(&v, "dist");
        // `--k auto` is echoed resolved.
        assert_eq!(v["config"]["k"], 12);
        reports.push(v);
    }
    assert_eq!(reports[0]["result"]["scheme"], "ls0");
    assert_eq!(reports[1]["result"]["scheme"], "ls1");
    let terms = |v: &Value| -> Vec<Value> {
        v["result"]["per_band"].as_array().unwrap().iter().map(|b| b["jaccard_term"].clone()).collect()
    };
    assert_eq!(terms(&reports[0]), terms(&reports[1]));
}

#[test]
fn config_file_supplies_defaults_and_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let a = normal_csv(dir.path(), "a.csv", 50, 0.0, 1);
    let b = normal_csv(dir.path(), "b.csv", 50, 1.0, 2);
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, format!(r#"{{"p": {a:?}, "q": {b:?}, "bands": 4, "scheme": "ls0"}}"#)).unwrap();
    let out = s(dir.path().join("r.json"));
    stdout(&lsdist(&["--config", &s(cfg.clone()), "dist", "--out", &out]));
    let v = json(Path::new(&out));
    assert_eq!(v["config"]["bands"], 4);
    assert_eq!(v["result"]["per_band"].as_array().unwrap().len(), 4);

    std::fs::write(&cfg, r#"{"bands": 4, "colour": "red"}"#).unwrap();
    let o = lsdist(&["--config", &s(cfg), "dist", "--p", &a, "--q", &b]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
}

#[test]
fn strict_promotes_degeneracy_to_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let a = normal_csv(dir.path(), "a.csv", 4, 0.0, 1);
    let b = normal_csv(dir.path(), "b.csv", 4, 0.0, 2);
    // Fewer points than bands leaves some bands empty.
    assert!(lsdist(&["dist", "--p", &a, "--q", &b]).status.success());
    assert_eq!(lsdist(&["--strict", "dist", "--p", &a, "--q", &b]).status.code(), Some(3));
}

#[test]
fn permtest_reports_and_rejects_unknown_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let a = normal_csv(dir.path(), "a.csv", 40, 0.0, 1);
    let b = normal_csv(dir.path(), "b.csv", 40, 3.0, 2);
    let v: Value = serde_json::from_str(&stdout(&lsdist(&[
        "permtest", "--p", &a, "--q", &b, "--stat", "energy", "--n-perms", "50", "--seed", "1",
    ])))
    .unwrap();
    assert_envelope(&v, "permtest");
    assert_eq!(v["result"]["replicates"].as_array().unwrap().len(), 50);
    assert_eq!(v["result"]["p_value"], 0.0);
    assert_eq!(v["result"]["below_resolution"], true);

    let o = lsdist(&["permtest", "--p", &a, "--q", &b, "--stat", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_mean_shift_has_one_row_per_metric() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path().join("bench"));
    let table = stdout(&lsdist(&[
        "bench", "mean-shift", "--dims", "1", "--metrics", "t,energy,ls0,ls1", "--reps", "40", "--seed", "1", "--out-dir", &out,
    ]));
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "metric,d=1");
    let names: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["t", "energy", "ls0", "ls1"]);
    assert_eq!(std::fs::read_to_string(Path::new(&out).join("mean-shift.csv")).unwrap(), table);
    let cell = json(&Path::new(&out).join("mean-shift_ls1_d1.json"));
    assert_envelope(&cell, "bench");
    assert_eq!(cell["config"]["reps"], 40);
    assert!(Path::new(&out).join("mean-shift_ls1_d1_power.csv").exists());
}

#[test]
fn bench_variance_t_cell_is_none() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path().join("bench"));
    let table = stdout(&lsdist(&["bench", "variance", "--metrics", "t", "--reps", "60", "--out-dir", &out]));
    assert_eq!(table, "metric,d=1\nt,none\n");
}

#[test]
fn bench_homogeneity_table_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path().join("bench"));
    let table = stdout(&lsdist(&["bench", "homogeneity", "--n-perms", "30", "--out-dir", &out]));
    let names: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["ks", "chi2", "wilcoxon", "kl", "t", "energy", "mmd", "ls0", "ls1"]);
    assert!(table.starts_with("metric,parameters,p_value,reject\n"));
    assert!(table.contains("ls1,m = 10,"));
}

fn subjects(dir: &Path, groups: &[&str]) -> (String, String) {
    let clouds = dir.join("clouds");
    std::fs::create_dir_all(&clouds).unwrap();
    let mut labels = String::from("id,group\n");
    for (i, g) in groups.iter().enumerate() {
        let mean = if *g == "b" { 5.0 } else { 0.0 };
        normal_csv(&clouds, &format!("p{i}.csv"), 200, mean, 30 + i as u64);
        labels.push_str(&format!("p{i},{g}\n"));
    }
    let path = dir.join("labels.csv");
    std::fs::write(&path, labels).unwrap();
    (s(clouds), s(path))
}

#[test]
fn grouptest_separated_groups() {
    let dir = tempfile::tempdir().unwrap();
    let (clouds, labels) = subjects(dir.path(), &["a", "a", "b", "b"]);
    let out = s(dir.path().join("g.json"));
    stdout(&lsdist(&["grouptest", "--clouds", &clouds, "--labels", &labels, "--n-perms", "50", "--out", &out]));
    let v = json(Path::new(&out));
    assert_envelope(&v, "grouptest");
    assert!(v["result"]["report"]["delta_star"].as_f64().unwrap() > 0.0);
    assert_eq!(v["result"]["groups"], serde_json::json!([0, 0, 1, 1]));
}

#[test]
fn grouptest_singleton_group_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let (clouds, labels) = subjects(dir.path(), &["a", "a", "a", "b"]);
    assert_eq!(lsdist(&["grouptest", "--clouds", &clouds, "--labels", &labels]).status.code(), Some(2));
}

#[test]
fn shapes_twelve_images() {
    let dir = tempfile::tempdir().unwrap();
    let mut images = Vec::new();
    for i in 0..12usize {
        let size = 24;
        let (w, h) = (6 + i, 18 - i / 2);
        let pixels = (0..size * size)
            .map(|p| if p % size < w && p / size < h { 1.0 } else { 0.0 })
            .collect();
        let path = dir.path().join(format!("shape{i:02}.pgm"));
        std::fs::write(&path, write_pgm_ascii(&GrayImage::new(size, size, pixels).unwrap())).unwrap();
        images.push(s(path));
    }
    let out = dir.path().join("out");
    let mut args = vec!["shapes", "--images"];
    args.extend(images.iter().map(String::as_str));
    let out_s = s(out.clone());
    args.extend(["--scheme", "ls1", "--mds", "2", "--out-dir", &out_s]);
    stdout(&lsdist(&args));

    let matrix = std::fs::read_to_string(out.join("distance_matrix.csv")).unwrap();
    let rows: Vec<&str> = matrix.lines().collect();
    assert_eq!(rows.len(), 13);
    assert!(rows.iter().all(|r| r.split(',').count() == 13));
    let embedding = std::fs::read_to_string(out.join("embedding.csv")).unwrap();
    assert_eq!(embedding.lines().next(), Some("id,x,y"));
    assert_eq!(embedding.lines().count(), 13);
    assert_eq!(std::fs::read_to_string(out.join("eigenvalues.csv")).unwrap().lines().count(), 13);
    assert!(out.join("clouds").join("shape00.csv").exists());
    assert_envelope(&json(&out.join("shapes.json")), "shapes");
}
