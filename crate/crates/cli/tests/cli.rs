use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn helix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_helix"))
        .args(args)
        .env_remove("HELIX_RULES")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = helix(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn corpus(dir: &Path) -> String {
    let spec = write(
        dir,
        "spec.txt",
        "kind = corpus\nn_documents = 3000\ncountries = USA:3;JAPAN:1;UK:1\ncoupling = coordinated:0.4\nseed = 11\n",
    );
    let out = dir.join("corpus.txt");
    ok(&["synth", "--input", &spec, "--out", out.to_str().unwrap()]);
    out.to_str().unwrap().to_string()
}

#[test]
fn report_emits_one_row_per_slice_in_table_column_order() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = corpus(dir.path());
    let text = ok(&["report", "--input", &corpus, "--slice", "USA", "--slice", "all", "--slice", "JAPAN"]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "slice,number,pct_identified,t_uig_mbits,ui,ug,ig,uig,univ,industry,govern");
    assert_eq!(lines.len(), 4);
    let slices: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(slices, ["all", "JAPAN", "USA"]);
    for line in &lines[1..] {
        let t: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!(t.is_finite());
    }
}

#[test]
fn transmission_on_published_all_row_cells() {
    let dir = tempfile::tempdir().unwrap();
    let cells = write(
        dir.path(),
        "cells.csv",
        "name,u_only,i_only,g_only,ui,ug,ig,uig\nall,412733,15412,113617,16270,108919,4359,5201\n",
    );
    let text = ok(&["transmission", "--input", &cells]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("all,676511,"));
    assert!(lines[1].ends_with(",-77.0"), "{}", lines[1]);
}

#[test]
fn transmission_accepts_cube_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cube = write(
        dir.path(),
        "xor.csv",
        "u,i,g,count\n0,0,0,1\n0,1,1,1\n1,0,1,1\n1,1,0,1\n",
    );
    let text = ok(&["transmission", "--input", &cube]);
    assert!(text.lines().nth(1).unwrap().ends_with(",-1000.0"));
}

#[test]
fn webtrend_on_two_years_fits_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let hits = write(
        dir.path(),
        "hits.csv",
        "year,u,i,g,ui,ug,ig,uig\n1999,100,50,60,20,25,15,5\n2000,120,55,70,25,30,20,8\n",
    );
    let out = dir.path().join("web");
    ok(&["webtrend", "--input", &hits, "--out", out.to_str().unwrap()]);
    let trajectory = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(trajectory.lines().count(), 3);
    let trend = fs::read_to_string(out.join("trend.csv")).unwrap();
    let r2: f64 = trend.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert_eq!(r2, 1.0);
}

#[test]
fn inconsistent_hits_fail_with_named_cell() {
    let dir = tempfile::tempdir().unwrap();
    let hits = write(dir.path(), "bad.csv", "year,u,i,g,ui,ug,ig,uig\n1999,10,50,60,20,25,15,5\n");
    let out = helix(&["webtrend", "--input", &hits]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("bad.csv") && err.contains("1999"), "{err}");
}

#[test]
fn unknown_slice_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = corpus(dir.path());
    let out = helix(&["report", "--input", &corpus, "--slice", "ATLANTIS"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("ATLANTIS"));
}

#[test]
fn malformed_record_names_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.txt", "UT A1\nPY 19x9\nER\n");
    let out = helix(&["classify", "--input", &bad]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.txt") && err.contains("line 2"), "{err}");
}

#[test]
fn classify_prints_label_table() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = corpus(dir.path());
    let text = ok(&["classify", "--input", &corpus]);
    let labels: Vec<&str> = text.lines().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(labels, ["label", "University", "Industry", "Government", "Unidentified", "total"]);
}

#[test]
fn rule_file_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = corpus(dir.path());
    let rules = write(dir.path(), "rules.csv", "tier_index,label,identifier\n0,Government,UNIV\n");
    let out = Command::new(env!("CARGO_BIN_EXE_helix"))
        .args(["classify", "--input", &corpus])
        .env("HELIX_RULES", &rules)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("University,0,")), "{text}");
}

#[test]
fn config_file_fills_unset_flags_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let series = write(
        dir.path(),
        "s.csv",
        "year,A,B,C\n1998,10,20,30\n1999,12,22,35\n2000,15,25,38\n",
    );
    let config = write(dir.path(), "run.conf", "trend_model = linear\nalpha = 0.5\n");
    let from_config = ok(&["systemness", "--input", &series, "--config", &config]);
    assert!(from_config.lines().next().unwrap().ends_with(",smoothing_alpha"));
    assert!(from_config.lines().nth(1).unwrap().ends_with(",0.5"));
    let overridden = ok(&["systemness", "--input", &series, "--config", &config, "--alpha", "2"]);
    assert!(overridden.lines().nth(1).unwrap().ends_with(",2"));
}

#[test]
fn systemness_scores_each_subset() {
    let dir = tempfile::tempdir().unwrap();
    let series = write(
        dir.path(),
        "s.csv",
        "year,A,B,C\n1998,10,20,30\n1999,12,22,35\n2000,15,25,38\n",
    );
    let text = ok(&[
        "systemness", "--input", &series, "--subset", "A,B", "--subset", "A,B,C", "--target-year", "2000", "--window", "2",
        "--trend-model", "loglinear",
    ]);
    let subsets: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(subsets, ["A+B", "A+B+C"]);
}

#[test]
fn countries_fractional_counts_sum_to_documents() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = corpus(dir.path());
    let text = ok(&["countries", "--input", &corpus, "--counting", "fractional"]);
    let total: f64 = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 3000.0).abs() < 1e-6);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = corpus(dir.path());
    let first = fs::read(&a).unwrap();
    let b = corpus(dir.path());
    assert_eq!(first, fs::read(&b).unwrap());

    let series_spec = write(dir.path(), "series.txt", "kind = series\nregime = independent_trends\n");
    let runs: Vec<String> = (0..2).map(|_| ok(&["synth", "--input", &series_spec, "--seed", "9"])).collect();
    assert_eq!(runs[0], runs[1]);
    let other = ok(&["synth", "--input", &series_spec, "--seed", "10"]);
    assert_ne!(runs[0], other);

    let reports: Vec<String> = (0..2)
        .map(|_| ok(&["report", "--input", &a, "--slice", "all", "--slice", "UK", "--sample-space", "with-unidentified"]))
        .collect();
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn missing_input_fails() {
    let out = helix(&["transmission", "--input", "/nonexistent/cells.csv"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/cells.csv"));
}
