//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, ensure, Context, Result};
use ian::data::monks2_label;
use ian::document::from_json;
use ian::fixtures::monks2_exactly_two;
use ian::interpret::{extract_heaviside_rules, rules_to_predictor};
use ian::rng::{seeded, Rng as ChaCha};
use ian::search::{bfs_search, successors, Architecture, NodeTrainer, SearchConfig};
use ian::training::backward;
use ian::universality::{approximation_sweep, build_box_indicator, raw_output, BoxSpec};
use rand::Rng;
use serde::Deserialize;
use serde_json::{json, Value};
use tempfile::TempDir;

const GRAD_TOL: f64 = 1e-4;
const GRAD_FLOOR: f64 = 1e-8;
const GRAD_STEP: f64 = 1e-5;

fn ian(args: &[&str]) -> Result<String> {
    let out = Command::new(env!("CARGO_BIN_EXE_ian")).args(args).output()?;
    if !out.status.success() {
        bail!("ian {args:?} exited with {}: {}", out.status, String::from_utf8_lossy(&out.stderr));
    }
    Ok(String::from_utf8(out.stdout)?)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn within(start: Instant, limit: Duration) -> Result<()> {
    let took = start.elapsed();
    ensure!(took < limit, "took {took:.2?}, limit {limit:?}");
    Ok(())
}

/// All points of `{1, 2, 3, 4}^6`.
fn monks_domain() -> Vec<Vec<f64>> {
    (0..4096usize)
        .map(|code| (0..6).map(|i| ((code >> (2 * i)) & 3) as f64 + 1.0).collect())
        .collect()
}

#[derive(Deserialize)]
struct GradientCase {
    model: Value,
    x: Vec<f64>,
    target: usize,
    fd_gradient: Value,
}

#[derive(Deserialize)]
struct GradientFixture {
    step: f64,
    cases: Vec<GradientCase>,
}

fn gradients() -> Result<String> {
    let start = Instant::now();
    let fixture: GradientFixture =
        serde_json::from_str(include_str!("../../core/tests/data/gradient_cases.json"))?;
    ensure!(fixture.step == GRAD_STEP, "fixture step {}", fixture.step);
    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut worst = 0.0f64;
    for (n, case) in fixture.cases.iter().enumerate() {
        let net = from_json(&case.model.to_string())?;
        let numeric = from_json(&case.fd_gradient.to_string())?.flat_params();
        let trace = net.forward(&case.x)?;
        let analytic = backward(&net, &trace, case.target, 1.0)?.to_flat();
        ensure!(analytic.len() == numeric.len(), "case {n}: parameter count mismatch");
        for (a, n) in analytic.iter().zip(&numeric) {
            worst = worst.max((a - n).abs() / (a.abs() + n.abs()).max(GRAD_FLOOR));
        }
        *counts.entry(net.kind().to_string()).or_default() += 1;
    }
    ensure!(worst < GRAD_TOL, "max relative error {worst:e}");
    within(start, Duration::from_secs(10))?;
    let mut kinds: Vec<_> = counts.into_iter().map(|(k, c)| format!("{c} {k}")).collect();
    kinds.sort();
    Ok(format!("{} networks, max relative error {worst:.1e}", kinds.join(" + ")))
}

fn fixture_agrees() -> Result<String> {
    let start = Instant::now();
    let net = monks2_exactly_two();
    let mut agree = 0;
    for x in monks_domain() {
        agree += usize::from(net.predict(&x)? == monks2_label(&x));
    }
    ensure!(agree == 4096, "{agree} of 4096 agree");
    within(start, Duration::from_secs(1))?;
    Ok("4096 of 4096 points agree".into())
}

fn heaviside_doc(rng: &mut ChaCha, arch: &[usize]) -> Value {
    let mut layers = Vec::new();
    let mut arity = 6;
    for (l, &width) in arch.iter().enumerate() {
        let mut w = Vec::new();
        let mut b = Vec::new();
        for _ in 0..width {
            let mut wr = Vec::new();
            let mut br = Vec::new();
            for _ in 0..arity {
                wr.push(match rng.gen_range(0..10) {
                    0 => 0.0,
                    1..=4 => -rng.gen_range(0.5..3.0),
                    _ => rng.gen_range(0.5..3.0),
                });
                let top = if l == 0 { 4 } else { arity as i64 };
                let lo = if l == 0 { 1 } else { 0 };
                br.push(if rng.gen_bool(0.3) {
                    rng.gen_range(lo..=top) as f64
                } else {
                    rng.gen_range(lo as f64 - 0.5..top as f64 + 0.5)
                });
            }
            w.push(wr);
            b.push(br);
        }
        let mut layer = json!({ "w": w, "b": b });
        if l + 1 == arch.len() {
            let alpha: Vec<Vec<f64>> =
                (0..width).map(|_| (0..arity).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
            let out_bias: Vec<f64> = (0..width).map(|_| rng.gen_range(-1.5..1.5)).collect();
            layer["alpha"] = json!(alpha);
            layer["out_bias"] = json!(out_bias);
        }
        layers.push(layer);
        arity = width;
    }
    let head = if arch[arch.len() - 1] == 1 { "sigmoid" } else { "softmax" };
    json!({ "kind": "heaviside", "m": 1, "input_dim": 6, "head": head, "layers": layers })
}

fn rule_round_trip() -> Result<String> {
    let archs: [&[usize]; 10] = [
        &[1],
        &[2, 1],
        &[1, 2, 1],
        &[3, 1],
        &[2, 2, 1],
        &[4, 1],
        &[2, 3],
        &[3, 2, 1],
        &[1, 1, 1],
        &[2, 2, 2],
    ];
    let mut rng = seeded(2024);
    let mut nets = vec![("fixture".to_string(), monks2_exactly_two())];
    for (n, arch) in archs.iter().enumerate() {
        nets.push((format!("random {n} {arch:?}"), from_json(&heaviside_doc(&mut rng, arch).to_string())?));
    }
    let domain = vec![(1.0, 4.0); 6];
    let points = monks_domain();
    for (name, net) in &nets {
        let rules = extract_heaviside_rules(net, &domain)?;
        let predictor = rules_to_predictor(&rules)?;
        for x in &points {
            let (r, m) = (predictor.predict(x)?, net.predict(x)?);
            ensure!(r == m, "{name}: rules say {r}, network says {m} at {x:?}");
        }
    }
    Ok(format!("{} networks x 4096 points, all predictions reproduced", nets.len()))
}

fn random_box(rng: &mut ChaCha, dim: usize) -> Result<BoxSpec> {
    loop {
        let sides: Vec<(f64, f64)> = (0..dim).map(|_| (rng.gen(), rng.gen())).collect();
        let lows: Vec<f64> = sides.iter().map(|&(a, b)| a.min(b)).collect();
        let highs: Vec<f64> = sides.iter().map(|&(a, b)| a.max(b)).collect();
        if lows.iter().zip(&highs).all(|(l, h)| l < h) {
            return Ok(BoxSpec::new(lows, highs)?);
        }
    }
}

fn box_indicators() -> Result<String> {
    let start = Instant::now();
    let mut rng = seeded(11);
    let mut on_faces = 0usize;
    for (dim, count) in [(2, 50), (3, 20)] {
        for n in 0..count {
            let b = random_box(&mut rng, dim)?;
            let net = build_box_indicator(&b)?;
            for _ in 0..10_000 {
                // A quarter of the coordinates are snapped onto a face.
                let x: Vec<f64> = (0..dim)
                    .map(|i| match rng.gen_range(0..8) {
                        0 => b.lows()[i],
                        1 => b.highs()[i],
                        _ => rng.gen(),
                    })
                    .collect();
                on_faces += usize::from(x.iter().enumerate().any(|(i, &v)| v == b.lows()[i] || v == b.highs()[i]));
                let member = x.iter().enumerate().all(|(i, &v)| b.lows()[i] <= v && v < b.highs()[i]);
                let v = raw_output(&net, &x)?;
                ensure!(v == f64::from(u8::from(member)), "{dim}-D box {n}: output {v} at {x:?}, member {member}");
            }
        }
    }
    within(start, Duration::from_secs(5))?;
    Ok(format!("70 boxes x 10^4 points exact, {on_faces} points on faces"))
}

fn approximation() -> Result<String> {
    let start = Instant::now();
    let m_tildes = [1, 2, 4, 8, 16, 20];
    let reports = approximation_sweep(|x: &[f64]| (x[0] + x[1]) / 2.0, 2, &m_tildes, 201)?;
    for r in &reports {
        let bound = 1.0 / r.m_tilde as f64 + 1e-9;
        ensure!(r.sup_error <= bound, "m~={}: error {} > {bound}", r.m_tilde, r.sup_error);
    }
    for w in reports.windows(2) {
        ensure!(w[1].sup_error <= w[0].sup_error, "error grows from m~={} to m~={}", w[0].m_tilde, w[1].m_tilde);
    }
    let last = reports.last().ok_or_else(|| anyhow!("no reports"))?;
    ensure!(last.sup_error <= 0.05, "error {} at m~=20", last.sup_error);
    within(start, Duration::from_secs(30))?;
    let errors: Vec<String> = reports.iter().map(|r| format!("{}:{:.4}", r.m_tilde, r.sup_error)).collect();
    Ok(format!("sup errors {}", errors.join(" ")))
}

fn bench_rows(dir: &Path, args: &[&str]) -> Result<Vec<Value>> {
    let out = dir.join("bench.json");
    let mut full = vec!["bench", "--out", p(&out)];
    full.extend_from_slice(args);
    ian(&full)?;
    let report: Value = serde_json::from_str(&fs::read_to_string(&out)?)?;
    report["rows"].as_array().cloned().context("report without rows")
}

fn row_accuracy(row: &Value) -> Result<f64> {
    row["metrics"]["accuracy"].as_f64().context("row without accuracy")
}

fn table1_rows(dir: &Path, suite: &str, limit: Duration) -> Result<String> {
    let start = Instant::now();
    let rows = bench_rows(dir, &["--suite", suite, "--seeds", "5"])?;
    let mut parts = Vec::new();
    let mut failures = Vec::new();
    for row in &rows {
        let acc = row_accuracy(row)?;
        let target = row["target"].as_f64().context("row without target")?;
        let part = format!("{} {} {:.1}% (>= {:.0}%)", row["dataset"], row["kind"], 100.0 * acc, 100.0 * target);
        if acc < target {
            failures.push(part.clone());
        }
        parts.push(part);
    }
    ensure!(failures.is_empty(), "below target: {}", failures.join("; "));
    within(start, limit)?;
    Ok(parts.join(", ").replace('"', ""))
}

fn iris(dir: &Path) -> Result<String> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/iris.csv");
    let spec = format!("iris={data}");
    let rows = bench_rows(dir, &["--suite", "none", "--csv", &spec, "--csv-kind", "sigmoid", "--csv-seeds", "3"])?;
    let row = rows.first().context("no iris row")?;
    let acc = row_accuracy(row)?;
    ensure!(acc >= 0.95, "held-out accuracy {acc:.4} < 0.95");
    Ok(format!(
        "sigmoid, searched architecture {}, held-out accuracy {:.1}% (seeds {})",
        row["architecture"], 100.0 * acc, row["seed_accuracies"]
    ))
}

/// Scripted accuracies; architectures missing from the table score `default`.
struct Scripted {
    table: HashMap<Architecture, f64>,
    default: f64,
}

impl NodeTrainer for Scripted {
    type Model = ();

    fn fit(&self, arch: &Architecture, _seed: u64) -> ian::Result<((), f64)> {
        Ok(((), *self.table.get(arch).unwrap_or(&self.default)))
    }
}

fn search_mechanics() -> Result<String> {
    let a = |v: &[usize]| Architecture(v.to_vec());
    let got: HashSet<Architecture> = successors(&a(&[2, 1])).into_iter().collect();
    ensure!(got == HashSet::from([a(&[4, 1]), a(&[2, 2]), a(&[2, 1, 1])]), "successors([2,1]) = {got:?}");

    // Flat accuracy: every node spends one unit of patience.
    let flat = Scripted { table: HashMap::new(), default: 0.5 };
    let out = bfs_search(&flat, &SearchConfig::default());
    for e in &out.log {
        ensure!(e.patience_left == 5 - e.depth, "{} at depth {} has patience {}", e.arch, e.depth, e.patience_left);
        ensure!(e.expanded == (e.depth < 5), "{} expanded = {}", e.arch, e.expanded);
    }
    ensure!(!out.truncated, "flat search hit the node cap");

    // Gains of at least 1% keep patience, smaller gains spend it.
    let table = HashMap::from([(a(&[1]), 0.50), (a(&[2]), 0.60), (a(&[1, 1]), 0.505), (a(&[4]), 0.6099)]);
    let out = bfs_search(&Scripted { table, default: 0.0 }, &SearchConfig::default());
    let patience = |v: &[usize]| out.log.iter().find(|e| e.arch.0 == v).map(|e| e.patience_left);
    ensure!(patience(&[2]) == Some(5), "[2] gained 10% but has patience {:?}", patience(&[2]));
    ensure!(patience(&[1, 1]) == Some(4), "[1,1] gained 0.5% but has patience {:?}", patience(&[1, 1]));
    ensure!(patience(&[4]) == Some(4), "[4] gained 0.99% but has patience {:?}", patience(&[4]));

    // Ever-improving accuracies only stop at the cap.
    let mut rising_table = HashMap::new();
    let mut width = 1;
    for step in 0..12 {
        rising_table.insert(a(&[width]), 0.3 + 0.05 * step as f64);
        width *= 2;
    }
    let rising = Scripted { table: rising_table, default: 0.5 };
    let cfg = SearchConfig { max_nodes: 17, ..SearchConfig::default() };
    let out = bfs_search(&rising, &cfg);
    ensure!(out.log.len() <= 17 && out.truncated, "{} nodes, truncated {}", out.log.len(), out.truncated);
    Ok("successors, patience inheritance, 1% rule and node cap verified".into())
}

fn determinism(dir: &Path) -> Result<String> {
    let data = dir.join("xor.csv");
    ian(&["gen", "--kind", "xor", "--n", "400", "--seed", "3", "--out", p(&data)])?;
    let read = |path: &Path| fs::read(path).with_context(|| format!("reading {}", path.display()));
    let mut files = Vec::new();
    for (run, seed) in [(0, "5"), (1, "5"), (2, "6")] {
        let out = dir.join(format!("train{run}.json"));
        ian(&["train", "--kind", "sigmoid", "--arch", "2,1", "--data", p(&data), "--seed", seed, "--out", p(&out)])?;
        files.push(read(&out)?);
    }
    ensure!(files[0] == files[1], "train model files differ under the same seed");
    ensure!(files[0] != files[2], "train ignores --seed");
    let mut searched = Vec::new();
    for run in 0..2 {
        let (out, log) = (dir.join(format!("search{run}.json")), dir.join(format!("log{run}.json")));
        ian(&[
            "search", "--kind", "tanh-prod", "--data", p(&data), "--seed", "5", "--max-nodes", "6", "--out", p(&out),
            "--log", p(&log),
        ])?;
        searched.push((read(&out)?, read(&log)?));
    }
    ensure!(searched[0] == searched[1], "search outputs differ under the same seed");
    Ok("train and search model files byte-identical across runs".into())
}

fn main() {
    let dir = TempDir::new().expect("temporary directory");
    let criteria: Vec<(&str, Box<dyn FnOnce() -> Result<String> + '_>)> = vec![
        ("gradient check", Box::new(gradients)),
        ("MONK-2 fixture vs exactly-two oracle", Box::new(fixture_agrees)),
        ("rule extraction round trip", Box::new(rule_round_trip)),
        ("box indicators", Box::new(box_indicators)),
        ("step-sum approximation of (x1+x2)/2", Box::new(approximation)),
        ("synthetic benchmark rows", Box::new(|| table1_rows(dir.path(), "synthetic", Duration::from_secs(600)))),
        ("MONK-2 Heaviside [1,2,1]", Box::new(|| table1_rows(dir.path(), "monks", Duration::from_secs(600)))),
        ("iris searched, 80/20 split", Box::new(|| iris(dir.path()))),
        ("search mechanics", Box::new(search_mechanics)),
        ("determinism", Box::new(|| determinism(dir.path()))),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1} s]", n + 1),
            Err(e) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {e:#} [{secs:.1} s]", n + 1);
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
