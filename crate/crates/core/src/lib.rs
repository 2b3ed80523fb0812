//! Inverted artificial neuron (IAN) networks.
//!
//! Each neuron passes every input through its own parametric processing
//! function (Heaviside step, sigmoid, or a rescaled product of tanh) and
//! sums the results. The crate covers the model and its JSON document,
//! training with Adam and early stopping, breadth-first structure search,
//! rule extraction and shape analysis, and constructive step-function
//! approximators built from Heaviside networks.

pub mod data;
pub mod document;
pub mod error;
pub mod fixtures;
pub mod interpret;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod search;
pub mod training;
pub mod universality;

pub use error::{Error, Result};
pub use model::{eval_processing, ForwardTrace, Head, Layer, LayerTrace, Network, NeuronParams, ProcessingKind};
