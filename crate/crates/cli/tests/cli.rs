//! End-to-end runs of the `ian` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ian::document;
use ian::fixtures::monks2_exactly_two;
use tempfile::TempDir;

fn ian(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ian")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = ian(args);
    assert!(
        out.status.success(),
        "ian {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(ian(&["train", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(ian(&[]).status.code(), Some(1));
    assert_eq!(ian(&["--help"]).status.code(), Some(0));
    let missing = ian(&["eval", "--model", "/nonexistent/m.json", "--data", "/nonexistent/d.csv"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));
}

#[test]
fn gen_writes_requested_rows() {
    let dir = TempDir::new().unwrap();
    let circle = dir.path().join("circle.csv");
    ok(&["gen", "--kind", "circle", "--n", "1000", "--seed", "7", "--out", p(&circle)]);
    let text = fs::read_to_string(&circle).unwrap();
    assert_eq!(text.lines().count(), 1001);
    assert!(text.starts_with("x1,x2,"));

    let monks = dir.path().join("monks.csv");
    ok(&["gen", "--kind", "monks2", "--out", p(&monks)]);
    assert_eq!(fs::read_to_string(&monks).unwrap().lines().count(), 4097);
}

#[test]
fn train_then_eval_agree() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("xor.csv");
    let model = dir.path().join("model.json");
    let report = dir.path().join("report.json");
    let metrics = dir.path().join("metrics.json");
    ok(&["gen", "--kind", "xor", "--n", "300", "--seed", "1", "--out", p(&data)]);
    ok(&[
        "train", "--kind", "sigmoid", "--arch", "2,1", "--data", p(&data), "--seed", "1", "--max-epochs", "40",
        "--out", p(&model), "--report", p(&report),
    ]);
    ok(&["eval", "--model", p(&model), "--data", p(&data), "--out", p(&metrics)]);
    assert_eq!(json(&report)["train_metrics"], json(&metrics));
    assert_eq!(json(&report)["architecture"], serde_json::json!([2, 1]));
}

#[test]
fn arch_must_end_with_output_width() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("iris.csv");
    fs::copy(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/iris.csv"), &data).unwrap();
    let out = ian(&["train", "--kind", "sigmoid", "--arch", "2,1", "--data", p(&data)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn explain_fixture_rules_match_eval() {
    let dir = TempDir::new().unwrap();
    let model = dir.path().join("fixture.json");
    let data = dir.path().join("monks.csv");
    let metrics = dir.path().join("metrics.json");
    let out_dir = dir.path().join("explain");
    document::save(&monks2_exactly_two(), &model).unwrap();
    ok(&["gen", "--kind", "monks2", "--out", p(&data)]);
    let text = ok(&["explain", "--model", p(&model), "--data", p(&data), "--out-dir", p(&out_dir)]);
    ok(&["eval", "--model", p(&model), "--data", p(&data), "--out", p(&metrics)]);

    let acc = json(&metrics)["accuracy"].as_f64().unwrap();
    assert_eq!(acc, 1.0);
    assert!(text.contains(&format!("rule accuracy on data: {acc:.4} (4096 of 4096 predictions match the network)")));
    assert!(text.contains("2-of-"), "{text}");
    assert_eq!(fs::read_to_string(out_dir.join("rules.txt")).unwrap(), text);

    let svg = fs::read_to_string(out_dir.join("network.svg")).unwrap();
    roxmltree::Document::parse(&svg).unwrap();
    assert!(svg.contains("b = 1.10"));
    let rules = json(&out_dir.join("rules.json"));
    assert_eq!(rules["input_dim"], 6);
    // 6 first-layer, 2 second-layer and 2 output-layer processing functions.
    assert_eq!(fs::read_dir(out_dir.join("curves")).unwrap().count(), 10);
    assert_eq!(json(&out_dir.join("shapes.json")).as_array().unwrap().len(), 10);
}

#[test]
fn explain_trained_heaviside_rules_match_eval() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("monks.csv");
    let model = dir.path().join("model.json");
    let metrics = dir.path().join("metrics.json");
    ok(&["gen", "--kind", "monks2", "--out", p(&data)]);
    ok(&[
        "train", "--kind", "heaviside", "--arch", "1,2,1", "--data", p(&data), "--seed", "3", "--max-epochs", "5",
        "--out", p(&model),
    ]);
    let text = ok(&["explain", "--model", p(&model), "--data", p(&data), "--out-dir", p(&dir.path().join("e"))]);
    ok(&["eval", "--model", p(&model), "--data", p(&data), "--out", p(&metrics)]);
    let acc = json(&metrics)["accuracy"].as_f64().unwrap();
    assert!(
        text.contains(&format!("rule accuracy on data: {acc:.4} (4096 of 4096 predictions match the network)")),
        "{text}"
    );
}

#[test]
fn explain_single_neuron_plots_each_input() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("bisector.csv");
    let model = dir.path().join("model.json");
    let out_dir = dir.path().join("explain");
    ok(&["gen", "--kind", "bisector", "--n", "200", "--out", p(&data)]);
    ok(&[
        "train", "--kind", "sigmoid", "--arch", "1", "--data", p(&data), "--max-epochs", "20", "--out", p(&model),
    ]);
    let text = ok(&["explain", "--model", p(&model), "--data", p(&data), "--out-dir", p(&out_dir)]);
    assert!(text.contains("R(1,1,1)") && text.contains("R(1,1,2)"), "{text}");
    let svg = fs::read_to_string(out_dir.join("network.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let curves = doc.descendants().filter(|n| n.attribute("class") == Some("curve")).count();
    assert_eq!(curves, 2);
    assert!(doc.descendants().any(|n| n.attribute("class") == Some("activation")));
    assert!(!out_dir.join("rules.json").exists());
}

#[test]
fn approx_reports_each_resolution() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("approx.csv");
    ok(&["approx", "--m-tilde", "1,2,4", "--grid", "21", "--out", p(&csv)]);
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "m_tilde,grid_points_per_dim,hidden_units,sup_error");
    assert_eq!(lines.len(), 4);
    let errors: Vec<f64> = lines[1..].iter().map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(errors.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn search_writes_model_log_and_report() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("bisector.csv");
    let (model, log, report) = (dir.path().join("m.json"), dir.path().join("log.json"), dir.path().join("r.json"));
    ok(&["gen", "--kind", "bisector", "--n", "200", "--out", p(&data)]);
    ok(&[
        "search", "--kind", "sigmoid", "--data", p(&data), "--max-nodes", "4", "--max-epochs", "10", "--out",
        p(&model), "--log", p(&log), "--report", p(&report),
    ]);
    assert_eq!(json(&log).as_array().unwrap().len(), 4);
    assert_eq!(json(&report)["nodes_trained"], 4);
    document::load(&model).unwrap();
}
