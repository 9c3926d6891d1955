use std::process::{Command, Output};

fn toric(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toric")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn eval_csv_row_for_mwpm() {
    let out = toric(&["eval", "--decoder", "mwpm", "--L", "5", "--p", "0.05", "--n", "500", "--seed", "1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# toric-eval v1");
    assert_eq!(lines[1], "decoder,L,p,n_samples,seed,p_acc,std_err,wall_time");
    let fields: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(&fields[..5], &["mwpm", "5", "0.05", "500", "1"]);
    let p_acc: f64 = fields[5].parse().unwrap();
    assert!(p_acc > 0.8 && p_acc <= 1.0);
}

#[test]
fn eval_is_reproducible_and_json_mirrors_fields() {
    let args = ["eval", "--decoder", "mld", "--L", "3", "--p", "0.1", "--n", "300", "--seed", "7", "--format", "json"];
    let a: serde_json::Value = serde_json::from_str(&stdout(&toric(&args))).unwrap();
    let b: serde_json::Value = serde_json::from_str(&stdout(&toric(&args))).unwrap();
    assert_eq!(a["p_acc"], b["p_acc"]);
    for key in ["decoder", "L", "p", "n_samples", "seed", "p_acc", "std_err", "wall_time"] {
        assert!(a.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(toric(&["eval", "--bogus"]).status.code(), Some(2));
    assert_eq!(toric(&["eval", "--decoder", "magic"]).status.code(), Some(2));
    assert_eq!(toric(&["eval", "--L", "4"]).status.code(), Some(2));
    assert_eq!(toric(&["eval", "--decoder", "end"]).status.code(), Some(2));
    assert_eq!(toric(&["threshold", "--p-grid", "0.2:0.1:3"]).status.code(), Some(2));
    assert_eq!(toric(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn exact_decoder_refuses_large_lattices() {
    let out = toric(&["eval", "--decoder", "mld", "--L", "5", "--n", "10"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(toric(&["oracle", "--L", "5"]).status.code(), Some(3));
}

#[test]
fn thin_threshold_design_is_a_fit_error() {
    let out = toric(&["threshold", "--L", "3", "--p-grid", "0.1:0.2:5", "--n", "20"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn sample_csv_layout() {
    let out = toric(&["sample", "--L", "3", "--p", "0.2", "--n", "50", "--seed", "3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# toric-samples v1 L=3"));
    assert_eq!(lines.next().unwrap().split(',').count(), 9 + 9 + 4);
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 50);
    for row in rows {
        let bits: Vec<u8> = row.split(',').map(|v| v.parse().unwrap()).collect();
        let sx: u8 = bits[..9].iter().sum();
        let sz: u8 = bits[9..18].iter().sum();
        assert_eq!((sx % 2, sz % 2), (0, 0));
    }
}

#[test]
fn oracle_posterior_for_given_syndrome() {
    let out = toric(&["oracle", "--L", "3", "--p", "0.1", "--sx", "000000000", "--sz", "000000000"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let post: Vec<f64> = v["posterior"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(post.len(), 16);
    assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(v["mld"], serde_json::json!([0, 0, 0, 0]));

    let odd = toric(&["oracle", "--L", "3", "--sx", "100000000", "--sz", "000000000"]);
    assert!(!odd.status.success());
    let short = toric(&["oracle", "--L", "3", "--sx", "1", "--sz", "0"]);
    assert_eq!(short.status.code(), Some(2));
}

#[test]
fn selfcheck_passes_on_small_lattice() {
    let out = toric(&["selfcheck", "--L", "3"]);
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.lines().count() >= 10);
    assert!(text.lines().all(|l| l.starts_with("PASS ")));
}

#[test]
fn train_then_evaluate_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("train.json");
    let model = dir.path().join("model.bin");
    let log = dir.path().join("log.csv");
    std::fs::write(
        &config,
        r#"{"L": 3, "p_train": 0.1, "batch_size": 32, "steps": 20, "eval_every": 10,
            "eval_samples": 64, "model": {"channels": [4], "depth": 1}}"#,
    )
    .unwrap();
    let out = toric(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--out",
        model.to_str().unwrap(),
        "--log",
        log.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let curve = std::fs::read_to_string(&log).unwrap();
    assert_eq!(curve.lines().next().unwrap(), "step,loss,eval_accuracy");
    assert_eq!(curve.lines().count(), 3);

    let out = toric(&["eval", "--decoder", "end", "--model", model.to_str().unwrap(), "--L", "3", "--n", "200"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).lines().nth(2).unwrap().starts_with("end,3,"));
}

#[test]
fn unknown_config_fields_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    std::fs::write(&config, r#"{"L": 3, "stepz": 10}"#).unwrap();
    let out = toric(&["train", "--config", config.to_str().unwrap(), "--out", dir.path().join("m").to_str().unwrap()]);
    assert!(!out.status.success());
}
