use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn discgs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_discgs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn generate(dir: &Path, preset: &str, seed: &str) {
    let o = discgs(&["generate", "--preset", preset, "--seed", seed, "--out", path(dir)]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn generate_preset_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    generate(&a, "synth-20k", "7");
    generate(&b, "synth-20k", "7");
    for f in ["data.csv", "labels.csv"] {
        let text = fs::read(a.join(f)).unwrap();
        assert_eq!(text, fs::read(b.join(f)).unwrap());
        assert_eq!(String::from_utf8(text).unwrap().lines().count(), 20_001);
    }
    assert_eq!(json(&a.join("manifest.json"))["seed"], 7);
}

#[test]
fn generate_from_spec_file() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("spec.json");
    fs::write(
        &spec,
        r#"{"components":[{"weight":1.0,"mean":[1.0],"covariance":[[0.5]]}],"n":12,"seed":3}"#,
    )
    .unwrap();
    let out = tmp.path().join("o");
    let o = discgs(&["generate", "--spec", path(&spec), "--out", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(out.join("labels.csv")).unwrap().lines().count(), 13);
}

#[test]
fn unknown_preset_lists_presets() {
    let tmp = tempfile::tempdir().unwrap();
    let o = discgs(&["generate", "--preset", "nope", "--out", path(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.starts_with("error[usage]:"));
    assert!(err.contains("synth-20k") && err.contains("synth-2-separated"));
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn fit_recovers_separated_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, "synth-2-separated", "1");
    let out = tmp.path().join("fit");
    let o = discgs(&[
        "fit",
        "--data",
        path(&data.join("data.csv")),
        "--truth",
        path(&data.join("labels.csv")),
        "--iters",
        "50",
        "--seed",
        "3",
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let metrics = json(&out.join("metrics.json"));
    assert_eq!(metrics["ari"], 1.0);
    assert_eq!(metrics["nmi_normalization"], "arithmetic");
    assert_eq!(json(&out.join("trace.json")).as_array().unwrap().len(), 50);
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["alpha"], 1.0);
    assert_eq!(manifest["prior"]["nu"], 3.0);
    assert!(manifest["version"].is_string());
}

#[test]
fn fit_without_truth_has_no_scores() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, "synth-2-separated", "2");
    let out = tmp.path().join("fit");
    let o = discgs(&[
        "fit",
        "--data",
        path(&data.join("data.csv")),
        "--iters",
        "3",
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let metrics = json(&out.join("metrics.json"));
    for key in ["ari", "nmi", "acc"] {
        assert!(metrics.get(key).is_none());
    }
    assert!(metrics["num_clusters_pred"].as_u64().unwrap() >= 1);
}

#[test]
fn usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let three = tmp.path().join("three.csv");
    fs::write(&three, "x0,x1\n0,0\n1,0\n0,1\n").unwrap();
    let out = tmp.path().join("o");
    let cases: Vec<Vec<&str>> = vec![
        vec!["fit", "--data", path(&three), "--iters", "0", "--out", path(&out)],
        vec![
            "fit-distributed",
            "--data",
            path(&three),
            "--workers",
            "10",
            "--out",
            path(&out),
        ],
        vec!["fit", "--data", path(&three), "--out", path(&out), "--bogus"],
        vec![
            "bench",
            "--data",
            path(&three),
            "--workers-list",
            "",
            "--out",
            path(&out),
        ],
        vec![
            "bench",
            "--data",
            path(&three),
            "--workers-list",
            "1",
            "--truth",
            path(&three),
            "--out",
            path(&out),
        ],
    ];
    for args in cases {
        let o = discgs(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        let err = stderr(&o);
        assert!(err.starts_with("error[usage]:"), "{err}");
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    }
}

#[test]
fn io_and_numerical_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let missing = tmp.path().join("missing.csv");
    let o = discgs(&["fit", "--data", path(&missing), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("error[io]:"));

    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "x0\n1\n2\nfoo\n").unwrap();
    let o = discgs(&["fit", "--data", path(&bad), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 4"));

    let flat = tmp.path().join("flat.csv");
    fs::write(&flat, "x0,x1\n1,1\n1,1\n1,1\n").unwrap();
    let o = discgs(&["fit", "--data", path(&flat), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error[numerical]:"));
}

#[test]
fn distributed_runs_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, "synth-2-separated", "4");
    let run = |name: &str, workers: &str| {
        let out = tmp.path().join(name);
        let o = discgs(&[
            "fit-distributed",
            "--data",
            path(&data.join("data.csv")),
            "--truth",
            path(&data.join("labels.csv")),
            "--workers",
            workers,
            "--iters",
            "10",
            "--seed",
            "9",
            "--out",
            path(&out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let a = run("a", "4");
    let b = run("b", "4");
    assert_eq!(
        fs::read(a.join("labels.csv")).unwrap(),
        fs::read(b.join("labels.csv")).unwrap()
    );
    assert_eq!(
        fs::read(a.join("metrics.json")).unwrap(),
        fs::read(b.join("metrics.json")).unwrap()
    );
    assert_eq!(
        fs::read(a.join("manifest.json")).unwrap(),
        fs::read(b.join("manifest.json")).unwrap()
    );
    assert_eq!(json(&a.join("manifest.json"))["workers"], serde_json::json!([4]));

    let single = run("single", "1");
    let labels = fs::read_to_string(single.join("labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 201);
    let trace = json(&single.join("trace.json"));
    assert!(trace.as_array().unwrap().iter().all(|r| r["ari"].is_number()));
}

#[test]
fn evaluate_and_bench() {
    let tmp = tempfile::tempdir().unwrap();
    let pred = tmp.path().join("pred.csv");
    let truth = tmp.path().join("truth.csv");
    fs::write(&pred, "index,label\n0,0\n1,0\n2,1\n3,1\n").unwrap();
    fs::write(&truth, "index,label\n0,0\n1,1\n2,0\n3,1\n").unwrap();
    let o = discgs(&["evaluate", "--pred", path(&pred), "--truth", path(&truth)]);
    assert!(o.status.success());
    let m: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((m["ari"].as_f64().unwrap() + 0.5).abs() < 1e-12);

    let data = tmp.path().join("data");
    generate(&data, "synth-2-separated", "5");
    let out = tmp.path().join("bench");
    let o = discgs(&[
        "bench",
        "--data",
        path(&data.join("data.csv")),
        "--workers-list",
        "1,2",
        "--iters",
        "3",
        "--include-central",
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("timing.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().last().unwrap().starts_with("central,1,3,"));
    assert_eq!(json(&out.join("timing.json")).as_array().unwrap().len(), 3);
}
