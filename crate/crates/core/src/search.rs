//! Breadth-first search over network shapes.
//!
//! Starting from a single hidden neuron, each node spawns children by
//! doubling one hidden layer or appending a one-neuron layer. A child
//! inherits its parent's patience, losing one unit when it fails to beat
//! the parent's accuracy by at least `min_improvement`. Nodes whose
//! patience is exhausted are evaluated but not expanded.

use std::collections::HashSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{split, Dataset};
use crate::error::{Error, Result};
use crate::metrics::accuracy;
use crate::model::{Network, ProcessingKind};
use crate::rng::derive_seed;
use crate::training::{init_network, output_width, train, TrainConfig};

/// Hidden-layer widths; the output layer is implied by the dataset.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Architecture(pub Vec<usize>);

impl Architecture {
    pub fn start() -> Self {
        Architecture(vec![1])
    }

    pub fn neurons(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    /// Full layer widths including an output layer of `out` neurons.
    pub fn with_output(&self, out: usize) -> Vec<usize> {
        let mut v = self.0.clone();
        v.push(out);
        v
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

/// One child per hidden layer with that layer doubled, plus one with an
/// extra single-neuron layer appended.
pub fn successors(arch: &Architecture) -> Vec<Architecture> {
    let mut out: Vec<Architecture> = Vec::with_capacity(arch.depth() + 1);
    for l in 0..arch.depth() {
        let mut child = arch.0.clone();
        child[l] *= 2;
        out.push(Architecture(child));
    }
    let mut deeper = arch.0.clone();
    deeper.push(1);
    out.push(Architecture(deeper));
    let mut seen = HashSet::new();
    out.retain(|a| seen.insert(a.clone()));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub initial_patience: usize,
    /// Accuracy gain over the parent below which patience is spent.
    pub min_improvement: f64,
    pub max_nodes: usize,
    pub base_seed: u64,
    /// Score nodes on a held-out stratified split of this fraction instead
    /// of on the training data.
    pub holdout_fraction: Option<f64>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            initial_patience: 5,
            min_improvement: 0.01,
            max_nodes: 200,
            base_seed: 0,
            holdout_fraction: None,
        }
    }
}

/// Trains and scores one architecture.
pub trait NodeTrainer: Sync {
    type Model: Send;

    fn fit(&self, arch: &Architecture, seed: u64) -> Result<(Self::Model, f64)>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchNode {
    pub arch: Architecture,
    pub patience_left: usize,
    pub parent_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    /// Position in visiting order.
    pub index: usize,
    pub depth: usize,
    pub arch: Architecture,
    pub parent: Option<Architecture>,
    pub seed: u64,
    /// `None` when training failed.
    pub accuracy: Option<f64>,
    pub patience_left: usize,
    pub expanded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug)]
pub struct SearchOutcome<M> {
    pub best: Option<(Architecture, M, f64)>,
    pub log: Vec<LogEntry>,
    /// Whether the node cap cut the search short.
    pub truncated: bool,
}

/// Seed of the node training `arch`.
pub fn node_seed(base_seed: u64, arch: &Architecture) -> u64 {
    let words: Vec<u64> = arch.0.iter().map(|&w| w as u64).collect();
    derive_seed(base_seed, &words)
}

/// Runs the search with any trainer. Levels are trained in parallel; the
/// outcome depends only on the configuration, never on scheduling.
pub fn bfs_search<T: NodeTrainer>(trainer: &T, cfg: &SearchConfig) -> SearchOutcome<T::Model> {
    let mut visited: HashSet<Architecture> = HashSet::new();
    let mut log: Vec<LogEntry> = Vec::new();
    let mut best: Option<(Architecture, T::Model, f64)> = None;
    let mut truncated = false;

    // Pending nodes carry the patience inherited from their parent.
    let root = SearchNode {
        arch: Architecture::start(),
        patience_left: cfg.initial_patience,
        parent_accuracy: None,
    };
    let mut level: Vec<(SearchNode, Option<Architecture>)> = vec![(root, None)];
    let mut depth = 0;
    while !level.is_empty() {
        let budget = cfg.max_nodes.saturating_sub(log.len());
        if level.len() > budget {
            level.truncate(budget);
            truncated = true;
        }
        for (node, _) in &level {
            visited.insert(node.arch.clone());
        }
        let results: Vec<Result<(T::Model, f64)>> = level
            .par_iter()
            .map(|(node, _)| trainer.fit(&node.arch, node_seed(cfg.base_seed, &node.arch)))
            .collect();

        let mut next: Vec<(SearchNode, Option<Architecture>)> = Vec::new();
        for ((node, parent), result) in level.into_iter().zip(results) {
            let SearchNode {
                arch,
                patience_left: inherited,
                parent_accuracy,
            } = node;
            let seed = node_seed(cfg.base_seed, &arch);
            let (accuracy, error, model) = match result {
                Ok((model, acc)) => (Some(acc), None, Some(model)),
                Err(e) => (None, Some(e.to_string()), None),
            };
            let patience_left = match (parent_accuracy, accuracy) {
                (_, None) => 0,
                (None, Some(_)) => inherited,
                (Some(pa), Some(a)) if a - pa < cfg.min_improvement => inherited.saturating_sub(1),
                (Some(_), Some(_)) => inherited,
            };
            let expanded = patience_left > 0;
            if expanded {
                for child in successors(&arch) {
                    if !visited.contains(&child) && !next.iter().any(|(n, _)| n.arch == child) {
                        let node = SearchNode {
                            arch: child,
                            patience_left,
                            parent_accuracy: accuracy,
                        };
                        next.push((node, Some(arch.clone())));
                    }
                }
            }
            if let (Some(model), Some(acc)) = (model, accuracy) {
                let better = match &best {
                    None => true,
                    Some((b_arch, _, b_acc)) => {
                        acc > *b_acc
                            || (acc == *b_acc
                                && (arch.neurons(), arch.depth()) < (b_arch.neurons(), b_arch.depth()))
                    }
                };
                if better {
                    best = Some((arch.clone(), model, acc));
                }
            }
            log.push(LogEntry {
                index: log.len(),
                depth,
                arch,
                parent,
                seed,
                accuracy,
                patience_left,
                expanded,
                error,
            });
        }
        level = next;
        depth += 1;
        if log.len() >= cfg.max_nodes && !level.is_empty() {
            truncated = true;
            break;
        }
    }
    SearchOutcome { best, log, truncated }
}

/// Trains IAN networks of one processing kind on a dataset.
pub struct IanTrainer<'a> {
    pub kind: ProcessingKind,
    pub train_data: &'a Dataset,
    /// Scoring data; the training data when `None`.
    pub eval_data: Option<&'a Dataset>,
    pub train_cfg: TrainConfig,
}

impl NodeTrainer for IanTrainer<'_> {
    type Model = Network;

    fn fit(&self, arch: &Architecture, seed: u64) -> Result<(Network, f64)> {
        let layers = arch.with_output(output_width(self.train_data.n_classes()));
        let net = init_network(self.kind, &layers, self.train_data.feature_ranges(), seed)?;
        let cfg = TrainConfig {
            seed,
            ..self.train_cfg.clone()
        };
        let (net, _) = train(&net, self.train_data, &cfg)?;
        let acc = accuracy(&net, self.eval_data.unwrap_or(self.train_data))?;
        Ok((net, acc))
    }
}

/// Search over IAN architectures on `data`, returning the best trained network.
pub fn search_network(
    kind: ProcessingKind,
    data: &Dataset,
    train_cfg: &TrainConfig,
    cfg: &SearchConfig,
) -> Result<(Architecture, Network, f64, Vec<LogEntry>)> {
    let holdout = match cfg.holdout_fraction {
        Some(f) => Some(split(data, 1.0 - f, cfg.base_seed)?),
        None => None,
    };
    let trainer = IanTrainer {
        kind,
        train_data: holdout.as_ref().map_or(data, |s| &s.train),
        eval_data: holdout.as_ref().map(|s| &s.test),
        train_cfg: train_cfg.clone(),
    };
    let outcome = bfs_search(&trainer, cfg);
    match outcome.best {
        Some((arch, net, acc)) => Ok((arch, net, acc, outcome.log)),
        None => Err(Error::invalid("every architecture failed to train")),
    }
}
