//! Classification metrics.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::Network;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// `1.96 * sqrt(acc * (1 - acc) / n)`, the normal-approximation 95% half-width.
    pub ci_halfwidth: f64,
    pub n_test: usize,
    /// `confusion[true][predicted]`
    pub confusion: Vec<Vec<usize>>,
}

pub fn binomial_ci_halfwidth(accuracy: f64, n: usize) -> f64 {
    1.96 * (accuracy * (1.0 - accuracy) / n as f64).max(0.0).sqrt()
}

fn check(net: &Network, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyData("cannot evaluate on an empty dataset".into()));
    }
    if data.n_features() != net.input_dim() {
        return Err(Error::shape(format!(
            "network expects {} features, dataset has {}",
            net.input_dim(),
            data.n_features()
        )));
    }
    Ok(())
}

pub fn evaluate(net: &Network, data: &Dataset) -> Result<Metrics> {
    check(net, data)?;
    let c = data.n_classes().max(net.n_classes());
    let mut confusion = vec![vec![0usize; c]; c];
    for (x, &y) in data.features().iter().zip(data.labels()) {
        confusion[y][net.predict(x)?] += 1;
    }
    let correct: usize = (0..c).map(|k| confusion[k][k]).sum();
    let accuracy = correct as f64 / data.len() as f64;
    Ok(Metrics {
        accuracy,
        ci_halfwidth: binomial_ci_halfwidth(accuracy, data.len()),
        n_test: data.len(),
        confusion,
    })
}

pub fn accuracy(net: &Network, data: &Dataset) -> Result<f64> {
    check(net, data)?;
    let mut correct = 0usize;
    for (x, &y) in data.features().iter().zip(data.labels()) {
        correct += usize::from(net.predict(x)? == y);
    }
    Ok(correct as f64 / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Head, Layer, NeuronParams, ProcessingKind};

    /// Predicts class 1 iff x >= 0.
    fn step() -> Network {
        Network::new(
            ProcessingKind::Heaviside,
            1,
            vec![Layer::output(vec![NeuronParams::new(vec![1.0], vec![0.0])], vec![vec![10.0]], vec![5.0])],
            Head::Sigmoid,
        )
        .unwrap()
    }

    fn data(xs: &[f64], ys: &[usize]) -> Dataset {
        Dataset::new(
            xs.iter().map(|&x| vec![x]).collect(),
            ys.to_vec(),
            vec!["x".into()],
            vec!["0".into(), "1".into()],
        )
        .unwrap()
    }

    #[test]
    fn perfect_predictions() {
        let m = evaluate(&step(), &data(&[-1.0, 0.5, 2.0], &[0, 1, 1])).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.ci_halfwidth, 0.0);
        assert_eq!(m.confusion, vec![vec![1, 0], vec![0, 2]]);
    }

    #[test]
    fn half_width_at_one_half() {
        assert!((binomial_ci_halfwidth(0.5, 100) - 0.098).abs() < 1e-12);
    }

    #[test]
    fn confusion_is_consistent() {
        let d = data(&[-1.0, -0.5, 0.5, 2.0, 3.0], &[0, 1, 0, 1, 1]);
        let m = evaluate(&step(), &d).unwrap();
        let diag: usize = (0..2).map(|k| m.confusion[k][k]).sum();
        assert_eq!(diag as f64 / 5.0, m.accuracy);
        assert_eq!(m.confusion.iter().flatten().sum::<usize>(), m.n_test);
        assert_eq!(accuracy(&step(), &d).unwrap(), m.accuracy);
    }
}
