//! Hand-built reference networks.

use crate::model::{Head, Layer, Network, NeuronParams, ProcessingKind};

/// Heaviside network for MONK-2 ("exactly two of six attributes equal 1")
/// over attributes in `{1, 2, 3, 4}`, architecture `[1, 2, 1]`.
///
/// * layer 1: one neuron counting `x_i <= 1.1`, i.e. the attributes equal to 1;
/// * layer 2: one neuron fires on a count `>= 1.9`, the other on `<= 2.1`;
/// * output: both pass through unchanged (`>= 0.5`, alpha 1) and the head
///   is centred at `b* = 1.9`, so class 1 needs both middle neurons active.
pub fn monks2_exactly_two() -> Network {
    let first = NeuronParams::new(vec![-1.0; 6], vec![1.1; 6]);
    let at_least_two = NeuronParams::new(vec![1.0], vec![1.9]);
    let at_most_two = NeuronParams::new(vec![-1.0], vec![2.1]);
    let output = NeuronParams::new(vec![1.0, 1.0], vec![0.5, 0.5]);
    Network::new(
        ProcessingKind::Heaviside,
        6,
        vec![
            Layer::hidden(vec![first]),
            Layer::hidden(vec![at_least_two, at_most_two]),
            Layer::output(vec![output], vec![vec![1.0, 1.0]], vec![1.9]),
        ],
        Head::Sigmoid,
    )
    .expect("reference network is well formed")
}
