//! Network data model and forward evaluation.
//!
//! An inverted neuron applies a parametric *processing function* to each of
//! its inputs and sums the results; there is no activation after the sum.
//! Every processing function maps into `[0, 1]`, so a hidden neuron with
//! `n` inputs outputs a value in `[0, n]`.
//!
//! The output layer scales each processed input by a trainable `alpha`,
//! subtracts a per-output bias and feeds the result through the head
//! (shifted sigmoid for one output, softmax for several).
//!
//! Parameters of one neuron are stored flat: input `i`, factor `m` lives at
//! index `i * factors + m`, where `factors` is 1 for Heaviside and Sigmoid
//! and `M` for the tanh product.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The per-input nonlinearity shared by every neuron of a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProcessingKind {
    Heaviside,
    Sigmoid,
    /// Rescaled product of `m` hyperbolic tangents.
    TanhProd { m: usize },
}

impl ProcessingKind {
    /// Number of (w, b) pairs per input.
    pub fn factors(&self) -> usize {
        match self {
            ProcessingKind::TanhProd { m } => *m,
            _ => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProcessingKind::Heaviside => "heaviside",
            ProcessingKind::Sigmoid => "sigmoid",
            ProcessingKind::TanhProd { .. } => "tanh_prod",
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.factors() == 0 {
            return Err(Error::invalid("tanh product needs at least one factor"));
        }
        Ok(())
    }
}

impl fmt::Display for ProcessingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessingKind::TanhProd { m } => write!(f, "tanh_prod(M={m})"),
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    Sigmoid,
    Softmax,
}

impl Head {
    pub fn name(&self) -> &'static str {
        match self {
            Head::Sigmoid => "sigmoid",
            Head::Softmax => "softmax",
        }
    }

    /// Maps logits to class probabilities.
    ///
    /// The sigmoid head returns a single probability (of class 1).
    pub fn probabilities(&self, logits: &[f64]) -> Vec<f64> {
        match self {
            Head::Sigmoid => logits.iter().map(|&z| sigmoid(z)).collect(),
            Head::Softmax => softmax(logits),
        }
    }

    /// Class decision from probabilities. A sigmoid tie at exactly 0.5 goes
    /// to class 0; softmax ties go to the lowest index.
    pub fn decide(&self, probs: &[f64]) -> usize {
        match self {
            Head::Sigmoid => usize::from(probs[0] > 0.5),
            Head::Softmax => argmax(probs),
        }
    }

    pub fn n_classes(&self, n_outputs: usize) -> usize {
        match self {
            Head::Sigmoid => 2,
            Head::Softmax => n_outputs,
        }
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Heaviside step of `w (x - b)` with `H(0) = 1`.
///
/// Decided by sign rather than by forming the product so that the result
/// matches the threshold rules `x >= b` / `x <= b` exactly.
#[inline]
pub(crate) fn heaviside(w: f64, b: f64, x: f64) -> f64 {
    let fires = if w > 0.0 {
        x >= b
    } else if w < 0.0 {
        x <= b
    } else {
        true
    };
    if fires {
        1.0
    } else {
        0.0
    }
}

/// Unchecked processing-function evaluation. `w` and `b` hold `kind.factors()` entries.
#[inline]
pub(crate) fn processing_value(kind: ProcessingKind, w: &[f64], b: &[f64], x: f64) -> f64 {
    match kind {
        ProcessingKind::Heaviside => heaviside(w[0], b[0], x),
        ProcessingKind::Sigmoid => sigmoid(w[0] * (x - b[0])),
        ProcessingKind::TanhProd { .. } => {
            let prod: f64 = w
                .iter()
                .zip(b)
                .map(|(&wm, &bm)| (wm * (x - bm)).tanh())
                .product();
            (prod + 1.0) / 2.0
        }
    }
}

/// Evaluates one processing function on a scalar input.
///
/// `w` and `b` must each hold one value for Heaviside and Sigmoid, and `M`
/// values for `TanhProd { m: M }`.
pub fn eval_processing(kind: ProcessingKind, w: &[f64], b: &[f64], x: f64) -> Result<f64> {
    kind.validate()?;
    let k = kind.factors();
    if w.len() != k || b.len() != k {
        return Err(Error::invalid(format!(
            "{kind} expects {k} weight(s) and bias(es), got {} and {}",
            w.len(),
            b.len()
        )));
    }
    if !x.is_finite() {
        return Err(Error::invalid(format!("input is not finite: {x}")));
    }
    if let Some(p) = w.iter().chain(b).find(|p| !p.is_finite()) {
        return Err(Error::invalid(format!("parameter is not finite: {p}")));
    }
    Ok(processing_value(kind, w, b, x))
}

/// Weights and thresholds of one neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronParams {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl NeuronParams {
    pub fn new(w: Vec<f64>, b: Vec<f64>) -> Self {
        Self { w, b }
    }

    /// Parameters for input `i`.
    #[inline]
    pub fn input(&self, i: usize, factors: usize) -> (&[f64], &[f64]) {
        let r = i * factors..(i + 1) * factors;
        (&self.w[r.clone()], &self.b[r])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub neurons: Vec<NeuronParams>,
    /// Per-neuron, per-input output scales; output layer only.
    pub alpha: Option<Vec<Vec<f64>>>,
    /// Per-neuron bias subtracted before the head; output layer only.
    pub out_bias: Option<Vec<f64>>,
}

impl Layer {
    pub fn hidden(neurons: Vec<NeuronParams>) -> Self {
        Self {
            neurons,
            alpha: None,
            out_bias: None,
        }
    }

    pub fn output(neurons: Vec<NeuronParams>, alpha: Vec<Vec<f64>>, out_bias: Vec<f64>) -> Self {
        Self {
            neurons,
            alpha: Some(alpha),
            out_bias: Some(out_bias),
        }
    }

    pub fn width(&self) -> usize {
        self.neurons.len()
    }

    pub fn is_output(&self) -> bool {
        self.alpha.is_some()
    }
}

/// A layered network of inverted neurons.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    kind: ProcessingKind,
    input_dim: usize,
    layers: Vec<Layer>,
    head: Head,
}

impl Network {
    /// Builds a network, checking every shape invariant.
    pub fn new(kind: ProcessingKind, input_dim: usize, layers: Vec<Layer>, head: Head) -> Result<Self> {
        let net = Self {
            kind,
            input_dim,
            layers,
            head,
        };
        net.validate().map_err(|(path, message)| Error::parse(path, message))?;
        Ok(net)
    }

    pub fn kind(&self) -> ProcessingKind {
        self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn output_layer(&self) -> &Layer {
        self.layers.last().expect("network has at least one layer")
    }

    pub fn n_outputs(&self) -> usize {
        self.output_layer().width()
    }

    pub fn n_classes(&self) -> usize {
        self.head.n_classes(self.n_outputs())
    }

    /// Neuron counts per layer, output layer included.
    pub fn architecture(&self) -> Vec<usize> {
        self.layers.iter().map(Layer::width).collect()
    }

    /// Input arity of layer `l`.
    pub fn layer_arity(&self, l: usize) -> usize {
        if l == 0 {
            self.input_dim
        } else {
            self.layers[l - 1].width()
        }
    }

    /// Checks invariants, reporting the offending path on failure.
    pub(crate) fn validate(&self) -> std::result::Result<(), (String, String)> {
        let err = |p: String, m: String| Err((p, m));
        if let ProcessingKind::TanhProd { m: 0 } = self.kind {
            return err("m".into(), "tanh product needs at least one factor".into());
        }
        if self.input_dim == 0 {
            return err("input_dim".into(), "must be positive".into());
        }
        if self.layers.is_empty() {
            return err("layers".into(), "at least one layer is required".into());
        }
        let k = self.kind.factors();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let arity = self.layer_arity(l);
            if layer.neurons.is_empty() {
                return err(format!("layers[{l}]"), "layer has no neurons".into());
            }
            for (j, neuron) in layer.neurons.iter().enumerate() {
                for (name, values) in [("w", &neuron.w), ("b", &neuron.b)] {
                    if values.len() != arity * k {
                        return err(
                            format!("layers[{l}].{name}[{j}]"),
                            format!("expected {arity} input(s) x {k} factor(s), found {} value(s)", values.len()),
                        );
                    }
                    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                        return err(format!("layers[{l}].{name}[{j}]"), format!("entry {i} is not finite"));
                    }
                }
            }
            match (l == last, &layer.alpha, &layer.out_bias) {
                (true, Some(alpha), Some(out_bias)) => {
                    if alpha.len() != layer.width() {
                        return err(
                            format!("layers[{l}].alpha"),
                            format!("expected {} row(s), found {}", layer.width(), alpha.len()),
                        );
                    }
                    for (j, row) in alpha.iter().enumerate() {
                        if row.len() != arity {
                            return err(
                                format!("layers[{l}].alpha[{j}]"),
                                format!("expected {arity} value(s), found {}", row.len()),
                            );
                        }
                        if row.iter().any(|v| !v.is_finite()) {
                            return err(format!("layers[{l}].alpha[{j}]"), "entry is not finite".into());
                        }
                    }
                    if out_bias.len() != layer.width() {
                        return err(
                            format!("layers[{l}].out_bias"),
                            format!("expected {} value(s), found {}", layer.width(), out_bias.len()),
                        );
                    }
                    if out_bias.iter().any(|v| !v.is_finite()) {
                        return err(format!("layers[{l}].out_bias"), "entry is not finite".into());
                    }
                }
                (true, None, _) => return err(format!("layers[{l}].alpha"), "missing on the output layer".into()),
                (true, _, None) => {
                    return err(format!("layers[{l}].out_bias"), "missing on the output layer".into())
                }
                (false, Some(_), _) => {
                    return err(format!("layers[{l}].alpha"), "only allowed on the output layer".into())
                }
                (false, _, Some(_)) => {
                    return err(format!("layers[{l}].out_bias"), "only allowed on the output layer".into())
                }
                (false, None, None) => {}
            }
        }
        let width = self.n_outputs();
        match (self.head, width) {
            (Head::Sigmoid, 1) => {}
            (Head::Softmax, w) if w >= 2 => {}
            (head, w) => {
                return err(
                    "head".into(),
                    format!("{} head is incompatible with {w} output neuron(s)", head.name()),
                )
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::shape(format!(
                "network expects {} input(s), got {}",
                self.input_dim,
                x.len()
            )));
        }
        if let Some(v) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("input is not finite: {v}")));
        }
        Ok(())
    }

    /// Full forward pass, retaining every intermediate value.
    pub fn forward(&self, x: &[f64]) -> Result<ForwardTrace> {
        self.check_input(x)?;
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> ForwardTrace {
        let mut trace = ForwardTrace::default();
        self.forward_into(x, &mut trace);
        trace
    }

    /// Forward pass reusing the buffers of `trace`.
    pub(crate) fn forward_into(&self, x: &[f64], trace: &mut ForwardTrace) {
        let k = self.kind.factors();
        trace.layers.resize_with(self.layers.len(), LayerTrace::default);
        for (l, layer) in self.layers.iter().enumerate() {
            let (done, rest) = trace.layers.split_at_mut(l);
            let lt = &mut rest[0];
            lt.inputs.clear();
            match done.last() {
                Some(prev) => lt.inputs.extend_from_slice(&prev.sums),
                None => lt.inputs.extend_from_slice(x),
            }
            lt.h.resize_with(layer.width(), Vec::new);
            lt.sums.clear();
            for (j, neuron) in layer.neurons.iter().enumerate() {
                let row = &mut lt.h[j];
                row.clear();
                let mut sum = 0.0;
                for (i, &xi) in lt.inputs.iter().enumerate() {
                    let (w, b) = neuron.input(i, k);
                    let h = processing_value(self.kind, w, b, xi);
                    row.push(h);
                    sum += match &layer.alpha {
                        Some(alpha) => alpha[j][i] * h,
                        None => h,
                    };
                }
                lt.sums.push(sum);
            }
        }
        let sums = &trace.layers.last().expect("at least one layer").sums;
        let out_bias = self.output_layer().out_bias.as_ref().expect("validated output layer");
        trace.logits.clear();
        trace.logits.extend(sums.iter().zip(out_bias).map(|(s, b)| s - b));
        trace.probs = self.head.probabilities(&trace.logits);
    }

    /// Pre-head output: the alpha-weighted sums minus the output bias.
    pub fn forward_raw(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.raw_unchecked(x))
    }

    /// Allocation-light evaluation of the pre-head output.
    pub(crate) fn raw_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let k = self.kind.factors();
        let mut inputs = x.to_vec();
        for layer in &self.layers {
            let next: Vec<f64> = layer
                .neurons
                .iter()
                .enumerate()
                .map(|(j, neuron)| {
                    let mut sum = 0.0;
                    for (i, &xi) in inputs.iter().enumerate() {
                        let (w, b) = neuron.input(i, k);
                        let h = processing_value(self.kind, w, b, xi);
                        sum += match &layer.alpha {
                            Some(alpha) => alpha[j][i] * h,
                            None => h,
                        };
                    }
                    sum
                })
                .collect();
            inputs = next;
        }
        let out_bias = self.output_layer().out_bias.as_ref().expect("validated output layer");
        inputs.iter().zip(out_bias).map(|(s, b)| s - b).collect()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.head.probabilities(&self.raw_unchecked(x)))
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(self.head.decide(&self.predict_proba(x)?))
    }

    /// Total number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| {
                let nb: usize = l.neurons.iter().map(|n| n.w.len() + n.b.len()).sum();
                let na: usize = l.alpha.iter().flatten().map(Vec::len).sum();
                nb + na + l.out_bias.as_ref().map_or(0, Vec::len)
            })
            .sum()
    }

    /// Parameters in canonical order: per layer, per neuron `w` then `b`;
    /// then `alpha` rows and `out_bias` of the output layer.
    pub fn flat_params(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    /// Overwrites every parameter from a slice in [`Network::flat_params`] order.
    pub fn set_flat_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                values.len()
            )));
        }
        let mut it = values.iter().copied();
        for layer in &mut self.layers {
            for p in layer_params_mut(layer) {
                *p = it.next().expect("length checked");
            }
        }
        Ok(())
    }
}

pub(crate) fn layer_params_mut(layer: &mut Layer) -> impl Iterator<Item = &mut f64> {
    layer
        .neurons
        .iter_mut()
        .flat_map(|n| n.w.iter_mut().chain(n.b.iter_mut()))
        .chain(layer.alpha.iter_mut().flatten().flatten())
        .chain(layer.out_bias.iter_mut().flatten())
}

pub(crate) fn flatten_layers(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for layer in layers {
        for n in &layer.neurons {
            out.extend_from_slice(&n.w);
            out.extend_from_slice(&n.b);
        }
        for row in layer.alpha.iter().flatten() {
            out.extend_from_slice(row);
        }
        if let Some(ob) = &layer.out_bias {
            out.extend_from_slice(ob);
        }
    }
    out
}

/// Values of one layer recorded during a forward pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LayerTrace {
    /// What the layer received (the network input for the first layer).
    pub inputs: Vec<f64>,
    /// `h[j][i]`: processing function of neuron `j` applied to input `i`.
    pub h: Vec<Vec<f64>>,
    /// Neuron outputs; alpha-weighted (before the output bias) on the output layer.
    pub sums: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForwardTrace {
    pub layers: Vec<LayerTrace>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}
