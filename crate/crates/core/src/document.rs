//! JSON model documents.
//!
//! ```json
//! {"kind": "tanh_prod", "m": 2, "input_dim": 2, "head": "sigmoid",
//!  "layers": [{"w": [[[5.0, -5.0], [1.0, 2.0]]], "b": [...],
//!              "alpha": [[1.0, 1.0]], "out_bias": [0.0]}]}
//! ```
//!
//! `w[j][i]` is a number for Heaviside and Sigmoid networks and an array of
//! `m` numbers for tanh-product networks. Floats are written in shortest
//! round-trip form, so a save/load cycle is bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Head, Layer, Network, NeuronParams, ProcessingKind};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum KindTag {
    Heaviside,
    Sigmoid,
    TanhProd,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum HeadTag {
    Sigmoid,
    Softmax,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Cell {
    Scalar(f64),
    Factors(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    w: Vec<Vec<Cell>>,
    b: Vec<Vec<Cell>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    out_bias: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    kind: KindTag,
    m: usize,
    input_dim: usize,
    head: HeadTag,
    layers: Vec<LayerDoc>,
}

fn to_doc(net: &Network) -> ModelDoc {
    let kind = net.kind();
    let k = kind.factors();
    let cells = |values: &[f64]| -> Vec<Cell> {
        values
            .chunks(k)
            .map(|c| match kind {
                ProcessingKind::TanhProd { .. } => Cell::Factors(c.to_vec()),
                _ => Cell::Scalar(c[0]),
            })
            .collect()
    };
    ModelDoc {
        kind: match kind {
            ProcessingKind::Heaviside => KindTag::Heaviside,
            ProcessingKind::Sigmoid => KindTag::Sigmoid,
            ProcessingKind::TanhProd { .. } => KindTag::TanhProd,
        },
        m: k,
        input_dim: net.input_dim(),
        head: match net.head() {
            Head::Sigmoid => HeadTag::Sigmoid,
            Head::Softmax => HeadTag::Softmax,
        },
        layers: net
            .layers()
            .iter()
            .map(|layer| LayerDoc {
                w: layer.neurons.iter().map(|n| cells(&n.w)).collect(),
                b: layer.neurons.iter().map(|n| cells(&n.b)).collect(),
                alpha: layer.alpha.clone(),
                out_bias: layer.out_bias.clone(),
            })
            .collect(),
    }
}

fn flatten_cells(cells: &[Cell], kind: ProcessingKind, path: &str) -> Result<Vec<f64>> {
    let k = kind.factors();
    let mut out = Vec::with_capacity(cells.len() * k);
    for (i, cell) in cells.iter().enumerate() {
        match (kind, cell) {
            (ProcessingKind::TanhProd { .. }, Cell::Factors(v)) if v.len() == k => out.extend_from_slice(v),
            (ProcessingKind::TanhProd { .. }, Cell::Factors(v)) => {
                return Err(Error::parse(
                    format!("{path}[{i}]"),
                    format!("expected {k} factor(s), found {}", v.len()),
                ))
            }
            (ProcessingKind::TanhProd { .. }, Cell::Scalar(_)) => {
                return Err(Error::parse(format!("{path}[{i}]"), format!("expected an array of {k} numbers")))
            }
            (_, Cell::Scalar(v)) => out.push(*v),
            (_, Cell::Factors(_)) => {
                return Err(Error::parse(format!("{path}[{i}]"), format!("{kind} parameters are scalars")))
            }
        }
    }
    Ok(out)
}

fn from_doc(doc: ModelDoc) -> Result<Network> {
    let kind = match doc.kind {
        KindTag::Heaviside | KindTag::Sigmoid if doc.m != 1 => {
            return Err(Error::parse("m", "must be 1 unless kind is tanh_prod"))
        }
        KindTag::Heaviside => ProcessingKind::Heaviside,
        KindTag::Sigmoid => ProcessingKind::Sigmoid,
        KindTag::TanhProd if doc.m == 0 => return Err(Error::parse("m", "must be at least 1")),
        KindTag::TanhProd => ProcessingKind::TanhProd { m: doc.m },
    };
    let head = match doc.head {
        HeadTag::Sigmoid => Head::Sigmoid,
        HeadTag::Softmax => Head::Softmax,
    };
    let mut layers = Vec::with_capacity(doc.layers.len());
    for (l, ld) in doc.layers.into_iter().enumerate() {
        if ld.w.len() != ld.b.len() {
            return Err(Error::parse(
                format!("layers[{l}].b"),
                format!("{} neuron(s) in w but {} in b", ld.w.len(), ld.b.len()),
            ));
        }
        let mut neurons = Vec::with_capacity(ld.w.len());
        for (j, (w, b)) in ld.w.iter().zip(&ld.b).enumerate() {
            neurons.push(NeuronParams::new(
                flatten_cells(w, kind, &format!("layers[{l}].w[{j}]"))?,
                flatten_cells(b, kind, &format!("layers[{l}].b[{j}]"))?,
            ));
        }
        layers.push(Layer {
            neurons,
            alpha: ld.alpha,
            out_bias: ld.out_bias,
        });
    }
    Network::new(kind, doc.input_dim, layers, head)
}

/// Serializes a network to a pretty-printed JSON document.
pub fn to_json(net: &Network) -> String {
    serde_json::to_string_pretty(&to_doc(net)).expect("model documents always serialize")
}

/// Parses and validates a model document.
pub fn from_json(text: &str) -> Result<Network> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: ModelDoc = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::parse(path, e.into_inner().to_string())
    })?;
    from_doc(doc)
}

pub fn save(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let mut text = to_json(net);
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Network> {
    from_json(&std::fs::read_to_string(path)?)
}
