//! `ian`: train, search, explain and benchmark inverted-neuron networks.

mod approx;
mod bench;
mod explain;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ian::data::{self, generate_monks2, generate_synthetic, Dataset, MonksVariant, Sampling, SyntheticKind};
use ian::metrics::{evaluate, Metrics};
use ian::search::{search_network, Architecture, SearchConfig};
use ian::training::{init_network, output_width, train, TrainConfig, TrainReport};
use ian::{document, ProcessingKind};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "ian", version, about = "Inverted artificial neuron networks: training, search, rules and approximation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic or MONK-2 dataset as CSV.
    Gen(GenArgs),
    /// Train a network with a fixed architecture.
    Train(TrainArgs),
    /// Breadth-first architecture search.
    Search(SearchArgs),
    /// Extract rules, shapes, curves and a diagram from a model.
    Explain(explain::ExplainArgs),
    /// Build step-function approximators and report their grid error.
    Approx(approx::ApproxArgs),
    /// Evaluate a model on a CSV dataset.
    Eval(EvalArgs),
    /// Run the benchmark matrix and print a results table.
    Bench(bench::BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DatasetKind {
    Bisector,
    Xor,
    XorLiteral,
    Parabola,
    Circle,
    Monks2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    /// Every attribute over {1, 2, 3, 4}.
    Uniform4,
    /// The UCI attribute cardinalities (3, 3, 2, 3, 4, 2).
    Official,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: DatasetKind,
    /// Number of samples; MONK-2 enumerates its whole domain when omitted.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = VariantArg::Uniform4)]
    monks_variant: VariantArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub(crate) enum KindArg {
    Heaviside,
    Sigmoid,
    TanhProd,
}

/// Processing-function selection shared by several subcommands.
#[derive(Args, Debug, Clone)]
pub(crate) struct KindOpts {
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Number of tanh factors for `tanh-prod`.
    #[arg(long, default_value_t = 2)]
    m: usize,
}

impl KindOpts {
    pub(crate) fn kind(&self) -> ProcessingKind {
        to_kind(self.kind, self.m)
    }
}

pub(crate) fn to_kind(kind: KindArg, m: usize) -> ProcessingKind {
    match kind {
        KindArg::Heaviside => ProcessingKind::Heaviside,
        KindArg::Sigmoid => ProcessingKind::Sigmoid,
        KindArg::TanhProd => ProcessingKind::TanhProd { m },
    }
}

#[derive(Args, Debug, Clone)]
pub(crate) struct HyperOpts {
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 128)]
    batch_size: usize,
    #[arg(long, default_value_t = 10_000)]
    max_epochs: usize,
    /// Early-stopping patience in epochs.
    #[arg(long, default_value_t = 250)]
    patience: usize,
    /// Smallest loss decrease that resets early stopping.
    #[arg(long, default_value_t = 0.01)]
    min_delta: f64,
}

impl HyperOpts {
    pub(crate) fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            es_patience: self.patience,
            es_min_delta: self.min_delta,
            seed,
        }
    }
}

pub(crate) fn parse_positive(s: &str) -> Result<usize, String> {
    match s.trim().parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("expected a positive integer, got `{s}`")),
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    kind: KindOpts,
    /// Layer widths including the output layer, e.g. `2,1`.
    #[arg(long, value_delimiter = ',', value_parser = parse_positive, required = true)]
    arch: Vec<usize>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model file to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON report to write.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Hold out this fraction (stratified) for testing.
    #[arg(long)]
    test_fraction: Option<f64>,
    #[command(flatten)]
    hyper: HyperOpts,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[command(flatten)]
    kind: KindOpts,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Best model file to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Search log (JSON) to write.
    #[arg(long)]
    log: Option<PathBuf>,
    /// JSON report to write.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    max_nodes: usize,
    #[arg(long, default_value_t = 5)]
    search_patience: usize,
    #[arg(long, default_value_t = 0.01)]
    min_improvement: f64,
    /// Score architectures on this held-out fraction of the training data
    /// instead of on the training data itself.
    #[arg(long)]
    holdout: Option<f64>,
    /// Hold out this fraction (stratified) for a final test.
    #[arg(long)]
    test_fraction: Option<f64>,
    #[command(flatten)]
    hyper: HyperOpts,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Write the metrics here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen(a) => gen(a),
        Command::Train(a) => train_cmd(a),
        Command::Search(a) => search_cmd(a),
        Command::Explain(a) => explain::run(a),
        Command::Approx(a) => approx::run(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Bench(a) => bench::run(a),
    }
}

pub(crate) fn load_data(path: &PathBuf) -> Result<Dataset> {
    data::load_csv(path).with_context(|| format!("reading {}", path.display()))
}

fn gen(a: GenArgs) -> Result<()> {
    let data = match a.kind {
        DatasetKind::Monks2 => {
            let variant = match a.monks_variant {
                VariantArg::Uniform4 => MonksVariant::Uniform4,
                VariantArg::Official => MonksVariant::Official,
            };
            let sampling = a.n.map_or(Sampling::Full, Sampling::Random);
            generate_monks2(variant, sampling, a.seed)?
        }
        other => {
            let kind = match other {
                DatasetKind::Bisector => SyntheticKind::Bisector,
                DatasetKind::Xor => SyntheticKind::Xor,
                DatasetKind::XorLiteral => SyntheticKind::XorLiteral,
                DatasetKind::Parabola => SyntheticKind::Parabola,
                DatasetKind::Circle => SyntheticKind::Circle,
                DatasetKind::Monks2 => unreachable!(),
            };
            generate_synthetic(kind, a.n.unwrap_or(1000), a.seed)?
        }
    };
    data::save_csv(&data, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!("wrote {} rows to {}", data.len(), a.out.display());
    Ok(())
}

/// Train/test partition, or the whole dataset for both when no fraction is given.
fn partition(data: Dataset, test_fraction: Option<f64>, seed: u64) -> Result<(Dataset, Option<Dataset>)> {
    match test_fraction {
        None => Ok((data, None)),
        Some(f) => {
            if !(f > 0.0 && f < 1.0) {
                bail!("--test-fraction must lie strictly between 0 and 1");
            }
            let s = data::split(&data, 1.0 - f, seed)?;
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
            Ok((s.train, Some(s.test)))
        }
    }
}

#[derive(Serialize)]
struct TrainSummary {
    kind: String,
    architecture: Vec<usize>,
    seed: u64,
    config: TrainConfig,
    training: TrainReport,
    train_metrics: Metrics,
    test_metrics: Option<Metrics>,
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let kind = a.kind.kind();
    let (train_data, test_data) = partition(load_data(&a.data)?, a.test_fraction, a.seed)?;
    let expected = output_width(train_data.n_classes());
    if a.arch.last() != Some(&expected) {
        bail!(
            "--arch must end with the output width {expected} for {} classes, got {:?}",
            train_data.n_classes(),
            a.arch
        );
    }
    let cfg = a.hyper.config(a.seed);
    let net = init_network(kind, &a.arch, train_data.feature_ranges(), a.seed)?;
    let (net, report) = train(&net, &train_data, &cfg)?;
    let summary = TrainSummary {
        kind: kind.to_string(),
        architecture: a.arch.clone(),
        seed: a.seed,
        config: cfg,
        train_metrics: evaluate(&net, &train_data)?,
        test_metrics: test_data.as_ref().map(|t| evaluate(&net, t)).transpose()?,
        training: report,
    };
    if let Some(out) = &a.out {
        document::save(&net, out).with_context(|| format!("writing {}", out.display()))?;
    }
    if let Some(path) = &a.report {
        output::write_json(path, &summary)?;
    }
    println!(
        "{kind} {:?}: {} epochs (best {}), loss {:.4}, train accuracy {}",
        summary.architecture,
        summary.training.epochs_run,
        summary.training.best_epoch,
        summary.training.best_train_loss,
        output::pct(&summary.train_metrics)
    );
    if let Some(m) = &summary.test_metrics {
        println!("test accuracy {}", output::pct(m));
    }
    Ok(())
}

#[derive(Serialize)]
struct SearchSummary {
    kind: String,
    best_architecture: Architecture,
    search_accuracy: f64,
    nodes_trained: usize,
    train_metrics: Metrics,
    test_metrics: Option<Metrics>,
}

fn search_cmd(a: SearchArgs) -> Result<()> {
    let kind = a.kind.kind();
    let (train_data, test_data) = partition(load_data(&a.data)?, a.test_fraction, a.seed)?;
    let cfg = SearchConfig {
        initial_patience: a.search_patience,
        min_improvement: a.min_improvement,
        max_nodes: a.max_nodes,
        base_seed: a.seed,
        holdout_fraction: a.holdout,
    };
    let (arch, net, acc, log) = search_network(kind, &train_data, &a.hyper.config(a.seed), &cfg)?;
    let summary = SearchSummary {
        kind: kind.to_string(),
        best_architecture: arch,
        search_accuracy: acc,
        nodes_trained: log.len(),
        train_metrics: evaluate(&net, &train_data)?,
        test_metrics: test_data.as_ref().map(|t| evaluate(&net, t)).transpose()?,
    };
    if let Some(out) = &a.out {
        document::save(&net, out).with_context(|| format!("writing {}", out.display()))?;
    }
    if let Some(path) = &a.log {
        output::write_json(path, &log)?;
    }
    if let Some(path) = &a.report {
        output::write_json(path, &summary)?;
    }
    println!(
        "{kind}: best hidden layers {} after {} nodes, search accuracy {:.4}, train accuracy {}",
        summary.best_architecture,
        summary.nodes_trained,
        acc,
        output::pct(&summary.train_metrics)
    );
    if let Some(m) = &summary.test_metrics {
        println!("test accuracy {}", output::pct(m));
    }
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let net = document::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let metrics = evaluate(&net, &load_data(&a.data)?)?;
    match &a.out {
        Some(path) => output::write_json(path, &metrics)?,
        None => println!("{}", serde_json::to_string_pretty(&metrics)?),
    }
    Ok(())
}
