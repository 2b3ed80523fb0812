//! Gradients, Adam, initialization and the early-stopped training loop.
//!
//! Heaviside networks are trained with a straight-through surrogate: the
//! forward pass uses the step function, while the backward pass uses the
//! derivative of `sigmoid(w (x - b))` wherever the step's derivative would
//! appear.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{sigmoid, ForwardTrace, Head, Layer, Network, NeuronParams, ProcessingKind};
use crate::rng::seeded;

/// Weighted negative log-likelihood of `target` under head probabilities.
///
/// A single probability is read as `P(class 1)`.
pub fn loss(probs: &[f64], target: usize, class_weight: f64) -> Result<f64> {
    let p = match probs.len() {
        0 => return Err(Error::invalid("empty probability vector")),
        1 => match target {
            0 => 1.0 - probs[0],
            1 => probs[0],
            _ => return Err(Error::invalid(format!("binary target must be 0 or 1, got {target}"))),
        },
        n if target < n => probs[target],
        n => return Err(Error::invalid(format!("target {target} out of range for {n} classes"))),
    };
    if !(class_weight > 0.0) {
        return Err(Error::invalid("class weight must be positive"));
    }
    Ok(-class_weight * p.max(f64::MIN_POSITIVE).ln())
}

/// `log(1 + exp(u))` without overflow.
fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// Same value as [`loss`], computed from logits for numerical stability.
pub(crate) fn loss_from_logits(head: Head, logits: &[f64], target: usize, weight: f64) -> f64 {
    match head {
        Head::Sigmoid => {
            let z = logits[0];
            weight * if target == 1 { softplus(-z) } else { softplus(z) }
        }
        Head::Softmax => {
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
            weight * (lse - logits[target])
        }
    }
}

/// Partial derivatives of one processing function.
#[derive(Debug, Clone, PartialEq)]
pub struct Partials {
    pub dw: Vec<f64>,
    pub db: Vec<f64>,
    pub dx: f64,
}

/// Derivatives of `h(x; w, b)`. Heaviside uses the sigmoid surrogate.
pub fn processing_partials(kind: ProcessingKind, w: &[f64], b: &[f64], x: f64) -> Partials {
    let k = kind.factors();
    let mut p = Partials {
        dw: vec![0.0; k],
        db: vec![0.0; k],
        dx: 0.0,
    };
    p.dx = partials_into(kind, w, b, x, 1.0, &mut p.dw, &mut p.db);
    p
}

/// Adds `scale * dh/dw` and `scale * dh/db` into the slices and returns `dh/dx`.
#[inline]
fn partials_into(kind: ProcessingKind, w: &[f64], b: &[f64], x: f64, scale: f64, gw: &mut [f64], gb: &mut [f64]) -> f64 {
    match kind {
        ProcessingKind::Heaviside | ProcessingKind::Sigmoid => {
            let s = sigmoid(w[0] * (x - b[0]));
            let ds = s * (1.0 - s);
            gw[0] += scale * ds * (x - b[0]);
            gb[0] -= scale * ds * w[0];
            ds * w[0]
        }
        ProcessingKind::TanhProd { .. } => {
            let m = w.len();
            let mut t = [0.0f64; 8];
            let mut heap;
            let t: &mut [f64] = if m <= t.len() {
                &mut t[..m]
            } else {
                heap = vec![0.0; m];
                &mut heap
            };
            for (tm, (&wm, &bm)) in t.iter_mut().zip(w.iter().zip(b)) {
                *tm = (wm * (x - bm)).tanh();
            }
            let mut dx = 0.0;
            for q in 0..m {
                let others: f64 = t.iter().enumerate().filter(|&(r, _)| r != q).map(|(_, v)| v).product();
                let du = 0.5 * (1.0 - t[q] * t[q]) * others;
                gw[q] += scale * du * (x - b[q]);
                gb[q] -= scale * du * w[q];
                dx += du * w[q];
            }
            dx
        }
    }
}

/// Gradient of the loss with the same shape as the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    fn from_flat(net: &Network, flat: &[f64]) -> Self {
        let mut shell = net.clone();
        shell.set_flat_params(flat).expect("gradient length matches the network");
        Self {
            layers: shell.layers().to_vec(),
        }
    }

    /// Entries in [`Network::flat_params`] order.
    pub fn to_flat(&self) -> Vec<f64> {
        crate::model::flatten_layers(&self.layers)
    }
}

/// Offsets of each layer's parameter block inside the flat vector.
fn layer_offsets(net: &Network) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(net.layers().len());
    let mut at = 0;
    for (l, layer) in net.layers().iter().enumerate() {
        offsets.push(at);
        let arity = net.layer_arity(l);
        at += layer.width() * 2 * arity * net.kind().factors();
        if layer.is_output() {
            at += layer.width() * arity + layer.width();
        }
    }
    offsets
}

fn check_trace(net: &Network, trace: &ForwardTrace) -> Result<()> {
    let stale = || Error::invalid("trace does not match the network's shape");
    if trace.layers.len() != net.layers().len() || trace.logits.len() != net.n_outputs() {
        return Err(stale());
    }
    for (l, (lt, layer)) in trace.layers.iter().zip(net.layers()).enumerate() {
        let arity = net.layer_arity(l);
        if lt.inputs.len() != arity || lt.h.len() != layer.width() || lt.h.iter().any(|r| r.len() != arity) {
            return Err(stale());
        }
    }
    Ok(())
}

/// Gradient of `class_weight * NLL(target)` for one sample.
pub fn backward(net: &Network, trace: &ForwardTrace, target: usize, class_weight: f64) -> Result<Gradients> {
    check_trace(net, trace)?;
    if target >= net.n_classes() {
        return Err(Error::invalid(format!("target {target} out of range")));
    }
    let mut flat = vec![0.0; net.param_count()];
    accumulate(net, &layer_offsets(net), trace, target, class_weight, &mut flat);
    Ok(Gradients::from_flat(net, &flat))
}

/// Adds the gradient of `weight * NLL(target)` into `grads` (flat order).
fn accumulate(net: &Network, offsets: &[usize], trace: &ForwardTrace, target: usize, weight: f64, grads: &mut [f64]) {
    let kind = net.kind();
    let k = kind.factors();
    // dL/dz
    let mut delta: Vec<f64> = match net.head() {
        Head::Sigmoid => vec![weight * (trace.probs[0] - target as f64)],
        Head::Softmax => trace
            .probs
            .iter()
            .enumerate()
            .map(|(j, p)| weight * (p - f64::from(u8::from(j == target))))
            .collect(),
    };
    for (l, layer) in net.layers().iter().enumerate().rev() {
        let lt = &trace.layers[l];
        let arity = lt.inputs.len();
        let block = arity * k;
        let base = offsets[l];
        let mut upstream = vec![0.0; arity];
        if layer.is_output() {
            let alpha_base = base + layer.width() * 2 * block;
            let bias_base = alpha_base + layer.width() * arity;
            for (j, &dz) in delta.iter().enumerate() {
                grads[bias_base + j] -= dz;
                for i in 0..arity {
                    grads[alpha_base + j * arity + i] += dz * lt.h[j][i];
                }
            }
        }
        for (j, neuron) in layer.neurons.iter().enumerate() {
            let ds = delta[j];
            if ds == 0.0 {
                continue;
            }
            let wb = base + j * 2 * block;
            let (gw, gb) = grads[wb..wb + 2 * block].split_at_mut(block);
            for (i, &xi) in lt.inputs.iter().enumerate() {
                let dh = match &layer.alpha {
                    Some(alpha) => ds * alpha[j][i],
                    None => ds,
                };
                let (w, b) = neuron.input(i, k);
                let r = i * k..(i + 1) * k;
                let dx = partials_into(kind, w, b, xi, dh, &mut gw[r.clone()], &mut gb[r]);
                upstream[i] += dh * dx;
            }
        }
        delta = upstream;
    }
}

/// First and second moment estimates for Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, learning_rate: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::shape(format!(
            "adam: {} params, {} grads, {} state entries",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let t = i32::try_from(state.t).unwrap_or(i32::MAX);
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = state.beta1 * *m + (1.0 - state.beta1) * g;
        *v = state.beta2 * *v + (1.0 - state.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= learning_rate * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

/// Draws a network for `architecture` (hidden widths followed by the output width).
///
/// Weights are Glorot-uniform. First-layer thresholds are uniform over each
/// feature's range; deeper thresholds are uniform over `[0, n_prev]`, the
/// range of the previous layer's sums. `alpha` starts at 1 and the output
/// bias at 0. One output neuron gets a sigmoid head, more get softmax.
pub fn init_network(
    kind: ProcessingKind,
    architecture: &[usize],
    feature_ranges: &[(f64, f64)],
    seed: u64,
) -> Result<Network> {
    kind.validate()?;
    if architecture.is_empty() || architecture.contains(&0) {
        return Err(Error::invalid(format!("invalid architecture {architecture:?}")));
    }
    if feature_ranges.is_empty() {
        return Err(Error::invalid("at least one input feature is required"));
    }
    if feature_ranges.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
        return Err(Error::invalid("feature ranges must be finite with min <= max"));
    }
    let k = kind.factors();
    let mut rng = seeded(seed);
    let mut draw = |lo: f64, hi: f64| if lo < hi { rng.gen_range(lo..=hi) } else { lo };
    let mut layers = Vec::with_capacity(architecture.len());
    let mut arity = feature_ranges.len();
    for (l, &width) in architecture.iter().enumerate() {
        let limit = (6.0 / (arity + width) as f64).sqrt();
        let neurons: Vec<NeuronParams> = (0..width)
            .map(|_| {
                let w = (0..arity * k).map(|_| draw(-limit, limit)).collect();
                let b = (0..arity * k)
                    .map(|idx| {
                        let (lo, hi) = if l == 0 { feature_ranges[idx / k] } else { (0.0, arity as f64) };
                        draw(lo, hi)
                    })
                    .collect();
                NeuronParams::new(w, b)
            })
            .collect();
        let layer = if l + 1 == architecture.len() {
            Layer::output(neurons, vec![vec![1.0; arity]; width], vec![0.0; width])
        } else {
            Layer::hidden(neurons)
        };
        layers.push(layer);
        arity = width;
    }
    let head = if architecture[architecture.len() - 1] == 1 {
        Head::Sigmoid
    } else {
        Head::Softmax
    };
    Network::new(kind, feature_ranges.len(), layers, head)
}

/// Output width matching a dataset's class count.
pub fn output_width(n_classes: usize) -> usize {
    if n_classes <= 2 {
        1
    } else {
        n_classes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub es_patience: usize,
    pub es_min_delta: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            batch_size: 128,
            max_epochs: 10_000,
            es_patience: 250,
            es_min_delta: 0.01,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.es_patience == 0 {
            return Err(Error::invalid("batch_size, max_epochs and es_patience must be positive"));
        }
        if !(self.es_min_delta >= 0.0) {
            return Err(Error::invalid("es_min_delta must be non-negative"));
        }
        Ok(())
    }
}

/// Stops when the monitored loss has not dropped by at least `min_delta`
/// below the best reference value for `patience` consecutive epochs.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    min_delta: f64,
    best: f64,
    wait: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        Self {
            patience,
            min_delta,
            best: f64::INFINITY,
            wait: 0,
        }
    }

    /// Records an epoch's loss; returns `true` when training should stop.
    pub fn update(&mut self, loss: f64) -> bool {
        if loss < self.best - self.min_delta {
            self.best = loss;
            self.wait = 0;
        } else {
            self.wait += 1;
        }
        self.wait >= self.patience
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub final_train_loss: f64,
    pub best_train_loss: f64,
    /// Zero-based epoch whose parameters were returned.
    pub best_epoch: usize,
    pub loss_history: Vec<f64>,
    pub stopped_early: bool,
}

/// Mean weighted loss of `net` over `data` with the given class weights.
pub fn dataset_loss(net: &Network, data: &Dataset, weights: &[f64]) -> Result<f64> {
    if data.n_features() != net.input_dim() {
        return Err(Error::shape("dataset and network input sizes differ"));
    }
    let mut total = 0.0;
    for (x, &y) in data.features().iter().zip(data.labels()) {
        let z = net.forward_raw(x)?;
        total += loss_from_logits(net.head(), &z, y, weights[y]);
    }
    Ok(total / data.len() as f64)
}

/// Weights `N / (C * n_c)` from the training set; absent classes get 0.
fn training_weights(data: &Dataset) -> Vec<f64> {
    let n = data.len() as f64;
    let c = data.n_classes() as f64;
    data.class_counts()
        .iter()
        .map(|&count| if count == 0 { 0.0 } else { n / (c * count as f64) })
        .collect()
}

/// Minibatch Adam on the class-weighted cross-entropy with early stopping
/// on the training loss. Returns the parameters of the lowest-loss epoch.
pub fn train(net: &Network, data: &Dataset, cfg: &TrainConfig) -> Result<(Network, TrainReport)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyData("cannot train on an empty dataset".into()));
    }
    if data.n_features() != net.input_dim() {
        return Err(Error::shape(format!(
            "network expects {} features, dataset has {}",
            net.input_dim(),
            data.n_features()
        )));
    }
    if data.n_classes() != net.n_classes() {
        return Err(Error::shape(format!(
            "network predicts {} classes, dataset has {}",
            net.n_classes(),
            data.n_classes()
        )));
    }
    let weights = training_weights(data);
    let offsets = layer_offsets(net);
    let mut rng = seeded(cfg.seed);
    let mut net = net.clone();
    let mut params = net.flat_params();
    let mut adam = AdamState::new(params.len());
    let mut grads = vec![0.0; params.len()];
    let mut trace = ForwardTrace::default();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut stopper = EarlyStopping::new(cfg.es_patience, cfg.es_min_delta);

    let mut history = Vec::new();
    let mut best = (f64::INFINITY, 0usize, params.clone());
    let mut stopped_early = false;

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_total = 0.0;
        for (bi, batch) in order.chunks(cfg.batch_size).enumerate() {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            let mut batch_total = 0.0;
            for &i in batch {
                let y = data.labels()[i];
                net.forward_into(&data.features()[i], &mut trace);
                batch_total += loss_from_logits(net.head(), &trace.logits, y, weights[y]);
                accumulate(&net, &offsets, &trace, y, weights[y] * scale, &mut grads);
            }
            if !batch_total.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: bi,
                    loss: batch_total * scale,
                });
            }
            adam_step(&mut params, &grads, &mut adam, cfg.learning_rate)?;
            net.set_flat_params(&params)?;
            epoch_total += batch_total;
        }
        let epoch_loss = epoch_total / data.len() as f64;
        history.push(epoch_loss);
        if epoch_loss < best.0 {
            best = (epoch_loss, epoch, params.clone());
        }
        if stopper.update(epoch_loss) {
            stopped_early = true;
            break;
        }
    }

    net.set_flat_params(&best.2)?;
    let report = TrainReport {
        epochs_run: history.len(),
        final_train_loss: *history.last().expect("at least one epoch"),
        best_train_loss: best.0,
        best_epoch: best.1,
        loss_history: history,
        stopped_early,
    };
    Ok((net, report))
}
