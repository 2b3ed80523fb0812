use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{anyhow, Result};
use clap::{Args, ValueEnum};
use ian::data::{generate_monks2, generate_synthetic, split, Dataset, MonksVariant, Sampling, SyntheticKind};
use ian::metrics::{accuracy, evaluate, Metrics};
use ian::search::{search_network, SearchConfig};
use ian::training::{init_network, train, TrainConfig};
use ian::ProcessingKind;
use serde::Serialize;

use crate::output::write_json;
use crate::{to_kind, KindArg};

pub const CI_NOTE: &str = "accuracy in percent; ± is 1.96*sqrt(acc*(1-acc)/n_test), a normal-approximation \
binomial 95% half-width. How the reference column aggregated its ± is not stated, so the two are not \
directly comparable.";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Synthetic,
    Monks,
    All,
    /// Only the `--csv` datasets.
    None,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    suite: Suite,
    /// Training seeds per row; the best one is reported.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Samples per synthetic dataset.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    /// Extra dataset as NAME=PATH; searched and scored on a stratified 80/20 split.
    #[arg(long = "csv", value_name = "NAME=PATH")]
    csv: Vec<String>,
    #[arg(long, value_enum, default_value_t = KindArg::Sigmoid)]
    csv_kind: KindArg,
    #[arg(long, default_value_t = 3)]
    csv_seeds: u64,
    /// Cap on architectures trained per search.
    #[arg(long, default_value_t = 200)]
    max_nodes: usize,
    /// JSON report to write.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RowReport {
    pub dataset: String,
    pub kind: String,
    /// Full architecture including the output layer.
    pub architecture: Vec<usize>,
    pub searched: bool,
    /// Where accuracy was measured: `train` or `test`.
    pub evaluated_on: String,
    pub seed_accuracies: Vec<f64>,
    pub best_seed: u64,
    pub metrics: Metrics,
    /// Accuracy of the best model on a fresh sample from the same generator.
    pub fresh_accuracy: Option<f64>,
    pub reference: Option<f64>,
    pub target: Option<f64>,
    pub meets_target: Option<bool>,
}

#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub ci_formula: String,
    pub protocol: String,
    pub rows: Vec<RowReport>,
}

struct FixedRow {
    name: &'static str,
    data: Dataset,
    fresh: Option<Dataset>,
    kind: ProcessingKind,
    arch: Vec<usize>,
    reference: f64,
    target: f64,
}

fn synthetic_rows(n: usize, data_seed: u64) -> Result<Vec<FixedRow>> {
    let specs = [
        (SyntheticKind::Xor, ProcessingKind::Sigmoid, vec![2, 1], 100.0, 0.99),
        (SyntheticKind::Circle, ProcessingKind::TanhProd { m: 2 }, vec![1], 99.6, 0.97),
        (SyntheticKind::Parabola, ProcessingKind::Sigmoid, vec![2, 1], 100.0, 0.97),
        (SyntheticKind::Bisector, ProcessingKind::Sigmoid, vec![1], 99.3, 0.97),
    ];
    specs
        .into_iter()
        .map(|(sk, kind, arch, reference, target)| {
            Ok(FixedRow {
                name: sk.name(),
                data: generate_synthetic(sk, n, data_seed)?,
                fresh: Some(generate_synthetic(sk, n, data_seed.wrapping_add(1))?),
                kind,
                arch,
                reference,
                target,
            })
        })
        .collect()
}

fn monks_rows() -> Result<Vec<FixedRow>> {
    Ok(vec![FixedRow {
        name: "monks-2",
        data: generate_monks2(MonksVariant::Uniform4, Sampling::Full, 0)?,
        fresh: None,
        kind: ProcessingKind::Heaviside,
        arch: vec![1, 2, 1],
        reference: 100.0,
        target: 0.95,
    }])
}

/// Index of the highest accuracy, earliest on ties.
fn best_index(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn run_fixed(row: FixedRow, seeds: u64) -> Result<RowReport> {
    let mut nets = Vec::new();
    let mut accs = Vec::new();
    for seed in 0..seeds {
        let net = init_network(row.kind, &row.arch, row.data.feature_ranges(), seed)?;
        let (net, _) = train(&net, &row.data, &TrainConfig { seed, ..TrainConfig::default() })?;
        accs.push(accuracy(&net, &row.data)?);
        nets.push(net);
    }
    let best = best_index(&accs);
    let metrics = evaluate(&nets[best], &row.data)?;
    let fresh_accuracy = row.fresh.as_ref().map(|f| accuracy(&nets[best], f)).transpose()?;
    Ok(RowReport {
        dataset: row.name.to_string(),
        kind: row.kind.to_string(),
        architecture: row.arch,
        searched: false,
        evaluated_on: "train".into(),
        seed_accuracies: accs,
        best_seed: best as u64,
        meets_target: Some(metrics.accuracy >= row.target),
        metrics,
        fresh_accuracy,
        reference: Some(row.reference),
        target: Some(row.target),
    })
}

fn run_csv(name: &str, path: &str, kind: ProcessingKind, seeds: u64, max_nodes: usize) -> Result<RowReport> {
    let data = crate::load_data(&PathBuf::from(path))?;
    let mut runs = Vec::new();
    for seed in 0..seeds {
        let s = split(&data, 0.8, seed)?;
        let cfg = SearchConfig { base_seed: seed, max_nodes, ..SearchConfig::default() };
        let train_cfg = TrainConfig { seed, ..TrainConfig::default() };
        let (_, net, _, _) = search_network(kind, &s.train, &train_cfg, &cfg)?;
        let metrics = evaluate(&net, &s.test)?;
        runs.push((net.architecture(), metrics));
    }
    let accs: Vec<f64> = runs.iter().map(|r| r.1.accuracy).collect();
    let best = best_index(&accs);
    let (architecture, metrics) = runs.swap_remove(best);
    Ok(RowReport {
        dataset: name.to_string(),
        kind: kind.to_string(),
        architecture,
        searched: true,
        evaluated_on: "test".into(),
        seed_accuracies: accs,
        best_seed: best as u64,
        metrics,
        fresh_accuracy: None,
        reference: None,
        target: None,
        meets_target: None,
    })
}

fn table(report: &BenchReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {}", report.ci_formula);
    let _ = writeln!(s, "# {}", report.protocol);
    let _ = writeln!(
        s,
        "{:<10} {:<16} {:<10} {:>5} {:>15} {:>8} {:>9} {:>8} {:>7}",
        "dataset", "kind", "arch", "seed", "accuracy", "fresh", "reference", "target", "status"
    );
    for r in &report.rows {
        let arch: Vec<String> = r.architecture.iter().map(usize::to_string).collect();
        let _ = writeln!(
            s,
            "{:<10} {:<16} {:<10} {:>5} {:>15} {:>8} {:>9} {:>8} {:>7}",
            r.dataset,
            r.kind,
            format!("[{}]{}", arch.join(","), if r.searched { "*" } else { "" }),
            r.best_seed,
            format!("{:.1} (±{:.1})", 100.0 * r.metrics.accuracy, 100.0 * r.metrics.ci_halfwidth),
            r.fresh_accuracy.map_or("-".into(), |a| format!("{:.1}", 100.0 * a)),
            r.reference.map_or("-".into(), |p| format!("{p:.1}")),
            r.target.map_or("-".into(), |t| format!("≥{:.1}", 100.0 * t)),
            match r.meets_target {
                Some(true) => "ok",
                Some(false) => "below",
                None => "-",
            }
        );
    }
    s
}

pub fn run(a: BenchArgs) -> Result<()> {
    if a.seeds == 0 || a.csv_seeds == 0 {
        return Err(anyhow!("--seeds and --csv-seeds must be positive"));
    }
    let mut fixed = Vec::new();
    if matches!(a.suite, Suite::Synthetic | Suite::All) {
        fixed.extend(synthetic_rows(a.n, a.data_seed)?);
    }
    if matches!(a.suite, Suite::Monks | Suite::All) {
        fixed.extend(monks_rows()?);
    }
    let mut rows = Vec::new();
    for row in fixed {
        rows.push(run_fixed(row, a.seeds)?);
    }
    for spec in &a.csv {
        let (name, path) = spec
            .split_once('=')
            .ok_or_else(|| anyhow!("--csv expects NAME=PATH, got `{spec}`"))?;
        rows.push(run_csv(name, path, to_kind(a.csv_kind, 2), a.csv_seeds, a.max_nodes)?);
    }
    let report = BenchReport {
        ci_formula: CI_NOTE.into(),
        protocol: format!(
            "fixed rows: best of {} training seeds, scored on the training data; searched rows (*): \
             best of {} seeds, each searching on 80% and scoring on the held-out 20%",
            a.seeds, a.csv_seeds
        ),
        rows,
    };
    if let Some(path) = &a.out {
        write_json(path, &report)?;
    }
    print!("{}", table(&report));
    Ok(())
}
