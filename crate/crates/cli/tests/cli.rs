use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SHORT: [&str; 4] = ["--iters", "1000", "--burnin", "200"];

fn surrex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surrex"))
        .args(args)
        .env_remove("SURREX_SEED")
        .output()
        .expect("surrex runs")
}

fn ok(args: &[&str]) -> Output {
    let o = surrex(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn generated(dir: &Path, scenario: &str) -> (PathBuf, PathBuf) {
    let out = dir.join(format!("gen{scenario}"));
    ok(&["generate", "--scenario", scenario, "--seed", "3", "--out", p(&out)]);
    (out.join("data.csv"), out.join("truth.csv"))
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn fit_writes_every_artifact_with_the_manifest_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, _) = generated(tmp.path(), "1");
    let out = tmp.path().join("fit");
    ok(&[&["fit", "--data", p(&data), "--model", "fex", "--out", p(&out)][..], &SHORT].concat());
    let manifest = json(&out.join("manifest.json"));
    let hash = manifest["manifest_hash"].as_str().unwrap();
    let verdict = json(&out.join("verdict.json"));
    assert_eq!(verdict["verdict"]["classes"].as_array().unwrap().len(), 5);
    assert_eq!(verdict["manifest_hash"], hash);
    assert_eq!(json(&out.join("diagnostics.json"))["manifest_hash"], hash);
    let summary = fs::read_to_string(out.join("posterior_summary.csv")).unwrap();
    assert!(summary.starts_with("parameter,mean,sd,q2.5,q50,q97.5,manifest_hash\n"));
    assert!(summary.lines().skip(1).all(|l| l.ends_with(hash)));
    assert!(summary.contains("\nbeta1,"));
    assert_eq!(manifest["invocation"]["command"], "fit");
    assert!(manifest["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(manifest["constants"]["bf_threshold"], 3.3);
}

#[test]
fn pex_defaults_to_even_prior_weights() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, _) = generated(tmp.path(), "3");
    let out = tmp.path().join("fit");
    ok(&[&["fit", "--data", p(&data), "--model", "pex", "--out", p(&out)][..], &SHORT].concat());
    let v = json(&out.join("verdict.json"));
    assert_eq!(v["model"]["kind"], "pex");
    assert_eq!(v["model"]["pi"], serde_json::json!([0.5, 0.5, 0.5, 0.5, 0.5]));
    assert!(v["verdict"]["classes"][0]["mixture_weight"].is_number());
}

#[test]
fn malformed_input_exits_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.csv");
    fs::write(
        &bad,
        "study_id,class_id,y1,se1,y2,se2,rho_w\na,c,0.1,0.1,0.2,0.1,0\nb,c,0.1,zero,0.2,0.1,0\n",
    )
    .unwrap();
    let o = surrex(&["fit", "--data", p(&bad), "--model", "standard", "--out", p(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 2") && err.contains("se1"), "{err}");

    let o = surrex(&["fit", "--data", p(&bad), "--model", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));

    let (data, _) = generated(tmp.path(), "3");
    let o = surrex(&["crossval", "--data", p(&data), "--model", "fex", "--target", "true"]);
    assert_eq!(o.status.code(), Some(2));
    let o = surrex(&["fit", "--data", p(&data), "--model", "pex", "--pi", "0.5,0.5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = surrex(&["fit", "--data", p(&data), "--model", "pex", "--pi", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn small_classes_get_no_standard_verdict() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d.csv");
    fs::write(
        &data,
        "study_id,class_id,y1,se1,y2,se2,rho_w\na,c,0.1,0.1,0.2,0.1,0\nb,c,0.5,0.1,0.4,0.1,0\n",
    )
    .unwrap();
    let out = tmp.path().join("fit");
    let o = ok(&[&["fit", "--data", p(&data), "--model", "standard", "--out", p(&out)][..], &SHORT].concat());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let v = json(&out.join("verdict.json"));
    assert_eq!(v["verdict"]["classes"].as_array().unwrap().len(), 0);
    assert_eq!(v["verdict"]["refused"][0]["class_id"], "c");
}

#[test]
fn crossval_has_one_row_per_study_and_baseline_ratios() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, truth) = generated(tmp.path(), "3");
    let std = tmp.path().join("std");
    let fex = tmp.path().join("fex");
    let common = ["--target", "true", "--truth", p(&truth), "--iters", "1000", "--burnin", "200"];
    ok(&[&["crossval", "--data", p(&data), "--model", "standard", "--out", p(&std)][..], &common].concat());
    let base = std.join("predictions.csv");
    ok(&[
        &["crossval", "--data", p(&data), "--model", "fex", "--out", p(&fex), "--baseline", p(&base)][..],
        &common,
    ]
    .concat());
    let text = fs::read_to_string(fex.join("predictions.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    let ratio = headers.iter().position(|h| h == "width_ratio").unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 35);
    assert!(rows.iter().all(|r| r[ratio].parse::<f64>().unwrap() > 0.0));
    let s = json(&fex.join("crossval_summary.json"));
    assert_eq!(s["summary"]["n_folds"], 35);
    assert!(s["summary"]["median_width_ratio"].is_number());
    let s = json(&std.join("crossval_summary.json"));
    assert!(s["summary"]["median_width_ratio"].is_null());
}

#[test]
fn seed_environment_variable_overrides_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("g");
    let o = Command::new(env!("CARGO_BIN_EXE_surrex"))
        .args(["generate", "--scenario", "2", "--seed", "1", "--out", p(&out)])
        .env("SURREX_SEED", "77")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(json(&out.join("manifest.json"))["config"]["seed"], 77);
    let o = Command::new(env!("CARGO_BIN_EXE_surrex"))
        .args(["generate", "--scenario", "2", "--out", p(&out)])
        .env("SURREX_SEED", "x")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_reports_ratios_and_reference_values() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sim");
    ok(&[
        &["simulate", "--scenario", "3,7", "--reps", "2", "--no-crossval", "--out", p(&out)][..],
        &SHORT,
    ]
    .concat());
    let text = fs::read_to_string(out.join("report.csv")).unwrap();
    for model in ["fex", "pex"] {
        assert!(text.contains(&format!("scenario3,{model},width_ratio_lambda1,")));
    }
    assert!(!text.contains("scenario3,standard,width_ratio_lambda1,"));
    assert!(text.contains("scenario7,standard,prob_strong[c2],"));
    assert!(text.contains("scenario3,fex,width_ratio_lambda1,") && text.contains(",0.520000,"));
    let r = json(&out.join("report.json"));
    assert_eq!(r["reports"].as_array().unwrap().len(), 2);
}

#[test]
fn replay_refuses_edited_manifests_and_changed_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, _) = generated(tmp.path(), "3");
    let out = tmp.path().join("fit");
    ok(&[&["fit", "--data", p(&data), "--model", "fex", "--out", p(&out)][..], &SHORT].concat());
    let manifest = out.join("manifest.json");

    let mut m = json(&manifest);
    m["config"]["seed"] = serde_json::json!(999);
    let edited = tmp.path().join("edited.json");
    fs::write(&edited, serde_json::to_vec(&m).unwrap()).unwrap();
    let o = surrex(&["replay", "--manifest", p(&edited), "--out", p(&tmp.path().join("r1"))]);
    assert_eq!(o.status.code(), Some(2));

    let text = fs::read_to_string(&data).unwrap().replacen("c1_s1,c1,", "c1_s1,c1,1", 1);
    fs::write(&data, text).unwrap();
    let o = surrex(&["replay", "--manifest", p(&manifest), "--out", p(&tmp.path().join("r2"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("inputs differ"));
}

#[test]
fn custom_scenario_specs_are_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = serde_json::to_value(surrex::build_scenario(2).unwrap()).unwrap();
    spec["index"] = serde_json::Value::Null;
    spec["classes"] = serde_json::json!([spec["classes"][0], spec["classes"][1]]);
    let path = tmp.path().join("spec.json");
    fs::write(&path, serde_json::to_vec(&spec).unwrap()).unwrap();
    let out = tmp.path().join("g");
    ok(&["generate", "--spec", p(&path), "--out", p(&out)]);
    let data = fs::read_to_string(out.join("data.csv")).unwrap();
    assert_eq!(data.lines().count(), 17);
}
