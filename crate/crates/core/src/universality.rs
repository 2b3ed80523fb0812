//! Heaviside networks that compute step functions exactly.
//!
//! A two-layer Heaviside network can compute the indicator of a translated
//! orthant `{x : x_i >= a_i for all i}`: the first layer fires one unit per
//! satisfied coordinate and the second fires only when all `n` do. The
//! indicator of a right-open box `[l, h)` is the signed sum of the `2^n`
//! orthant indicators anchored at its corners, with sign `(-1)^k` for `k`
//! coordinates taken from `h`. Weighted sums of box indicators then give
//! arbitrary step functions, and sampling a continuous `g` on a fine cube
//! grid gives a uniform approximation of `g` on `[0, 1]^n`.
//!
//! Built networks are evaluated with [`Network::forward_raw`]: the output
//! layer's alpha coefficients carry the step values and the output bias is 0.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Head, Layer, Network, NeuronParams, ProcessingKind};

/// Largest box dimension accepted; a box needs `2^n` orthants.
pub const MAX_BOX_DIM: usize = 12;

/// Largest cube dimension for [`build_uniform_approximator`].
pub const MAX_APPROX_DIM: usize = 3;

/// Slack added to upper thresholds on the top faces of `[0, 1]^n` so that
/// the closed cube is covered by right-open boxes.
pub const TOP_FACE_SLACK: f64 = 1e-9;

/// Axis-aligned box `[lows, highs)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    lows: Vec<f64>,
    highs: Vec<f64>,
}

impl BoxSpec {
    pub fn new(lows: Vec<f64>, highs: Vec<f64>) -> Result<Self> {
        if lows.is_empty() || lows.len() != highs.len() {
            return Err(Error::shape(format!(
                "box needs matching non-empty bounds, got {} and {}",
                lows.len(),
                highs.len()
            )));
        }
        for (i, (l, h)) in lows.iter().zip(&highs).enumerate() {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::invalid(format!("coordinate {i}: need finite low < high, got [{l}, {h})")));
            }
        }
        Ok(Self { lows, highs })
    }

    pub fn dim(&self) -> usize {
        self.lows.len()
    }

    pub fn lows(&self) -> &[f64] {
        &self.lows
    }

    pub fn highs(&self) -> &[f64] {
        &self.highs
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lows.iter().zip(&self.highs))
            .all(|(&v, (&l, &h))| l <= v && v < h)
    }
}

/// `sum_j coefficient_j * indicator(box_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSum {
    terms: Vec<(f64, BoxSpec)>,
}

impl StepSum {
    pub fn new(terms: Vec<(f64, BoxSpec)>) -> Result<Self> {
        let Some((_, first)) = terms.first() else {
            return Err(Error::invalid("a step sum needs at least one term"));
        };
        let n = first.dim();
        if terms.iter().any(|(_, b)| b.dim() != n) {
            return Err(Error::shape("all boxes of a step sum must share a dimension"));
        }
        if let Some((c, _)) = terms.iter().find(|(c, _)| !c.is_finite()) {
            return Err(Error::invalid(format!("coefficient is not finite: {c}")));
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[(f64, BoxSpec)] {
        &self.terms
    }

    pub fn dim(&self) -> usize {
        self.terms[0].1.dim()
    }

    /// Direct evaluation by membership tests.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .filter(|(_, b)| b.contains(x))
            .map(|(c, _)| c)
            .sum()
    }
}

/// Two-layer Heaviside network: one hidden neuron per orthant anchor, one
/// output neuron whose alpha coefficients are the orthant weights.
fn orthant_network(dim: usize, orthants: Vec<(Vec<f64>, f64)>) -> Result<Network> {
    let hidden: Vec<NeuronParams> = orthants
        .iter()
        .map(|(anchor, _)| NeuronParams::new(vec![1.0; dim], anchor.clone()))
        .collect();
    let width = hidden.len();
    // Fires iff the hidden sum reaches n, i.e. every coordinate is satisfied.
    let output = NeuronParams::new(vec![1.0; width], vec![dim as f64 - 0.5; width]);
    let alpha = vec![orthants.iter().map(|(_, c)| *c).collect()];
    Network::new(
        ProcessingKind::Heaviside,
        dim,
        vec![Layer::hidden(hidden), Layer::output(vec![output], alpha, vec![0.0])],
        Head::Sigmoid,
    )
}

/// Indicator of `{x : x_i >= anchor_i for all i}`.
pub fn build_orthant(anchor: &[f64]) -> Result<Network> {
    if anchor.is_empty() {
        return Err(Error::invalid("anchor must have at least one coordinate"));
    }
    if anchor.iter().any(|a| !a.is_finite()) {
        return Err(Error::invalid("anchor must be finite"));
    }
    orthant_network(anchor.len(), vec![(anchor.to_vec(), 1.0)])
}

/// Signed corner orthants of one box: `(anchor, (-1)^(number of high coordinates))`.
fn corner_orthants(b: &BoxSpec) -> Result<Vec<(Vec<f64>, f64)>> {
    let n = b.dim();
    if n > MAX_BOX_DIM {
        return Err(Error::Unsupported(format!(
            "box dimension {n} exceeds the limit of {MAX_BOX_DIM} (2^n orthants)"
        )));
    }
    Ok((0..1usize << n)
        .map(|mask| {
            let anchor = (0..n)
                .map(|i| if mask >> i & 1 == 1 { b.highs[i] } else { b.lows[i] })
                .collect();
            let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            (anchor, sign)
        })
        .collect())
}

/// Indicator of a right-open box via inclusion-exclusion over its corners.
pub fn build_box_indicator(b: &BoxSpec) -> Result<Network> {
    orthant_network(b.dim(), corner_orthants(b)?)
}

/// Network computing a step sum. Orthants shared by several boxes are
/// merged into one hidden unit and units whose weight cancels to zero are
/// dropped.
pub fn build_step_sum(sum: &StepSum) -> Result<Network> {
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut merged: Vec<(Vec<f64>, f64)> = Vec::new();
    for (coef, b) in &sum.terms {
        for (anchor, sign) in corner_orthants(b)? {
            let key: Vec<u64> = anchor.iter().map(|v| v.to_bits()).collect();
            match index.get(&key) {
                Some(&at) => merged[at].1 += sign * coef,
                None => {
                    index.insert(key, merged.len());
                    merged.push((anchor, sign * coef));
                }
            }
        }
    }
    let first = merged[0].0.clone();
    merged.retain(|(_, c)| *c != 0.0);
    if merged.is_empty() {
        merged.push((first, 0.0));
    }
    orthant_network(sum.dim(), merged)
}

/// Step approximant of `g` on `[0, 1]^dim` over `m_tilde^dim` cubes of side
/// `1 / m_tilde`, each weighted by `g` at its centre.
pub fn uniform_step_sum<G>(g: G, dim: usize, m_tilde: usize) -> Result<StepSum>
where
    G: Fn(&[f64]) -> f64,
{
    if m_tilde == 0 {
        return Err(Error::invalid("m_tilde must be at least 1"));
    }
    if dim == 0 || dim > MAX_APPROX_DIM {
        return Err(Error::Unsupported(format!(
            "cube dimension must lie in 1..={MAX_APPROX_DIM}, got {dim}"
        )));
    }
    let m = m_tilde as f64;
    let edge = |k: usize| {
        if k == m_tilde {
            1.0 + TOP_FACE_SLACK
        } else {
            k as f64 / m
        }
    };
    let total = m_tilde.pow(dim as u32);
    let mut terms = Vec::with_capacity(total);
    for code in 0..total {
        let mut idx = vec![0usize; dim];
        let mut rest = code;
        for slot in idx.iter_mut().rev() {
            *slot = rest % m_tilde;
            rest /= m_tilde;
        }
        let centre: Vec<f64> = idx.iter().map(|&k| (k as f64 + 0.5) / m).collect();
        let value = g(&centre);
        if !value.is_finite() {
            return Err(Error::invalid(format!(
                "g is not finite ({value}) at the centre {centre:?} of cube {idx:?}"
            )));
        }
        let lows = idx.iter().map(|&k| edge(k)).collect();
        let highs = idx.iter().map(|&k| edge(k + 1)).collect();
        terms.push((value, BoxSpec::new(lows, highs)?));
    }
    StepSum::new(terms)
}

pub fn build_uniform_approximator<G>(g: G, dim: usize, m_tilde: usize) -> Result<Network>
where
    G: Fn(&[f64]) -> f64,
{
    build_step_sum(&uniform_step_sum(g, dim, m_tilde)?)
}

/// Scalar pre-head output of a single-output network.
pub fn raw_output(net: &Network, x: &[f64]) -> Result<f64> {
    Ok(net.forward_raw(x)?[0])
}

/// Largest `|raw_output(net, x) - oracle(x)|` over the uniform grid with
/// `points_per_dim` points per axis on `[0, 1]^n`, endpoints included.
pub fn grid_max_error<F>(net: &Network, oracle: F, points_per_dim: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if points_per_dim < 2 {
        return Err(Error::invalid("need at least 2 grid points per dimension"));
    }
    let n = net.input_dim();
    let total = points_per_dim
        .checked_pow(n as u32)
        .ok_or_else(|| Error::Unsupported("grid is too large".into()))?;
    let step = (points_per_dim - 1) as f64;
    Ok((0..total)
        .into_par_iter()
        .map(|code| {
            let mut x = vec![0.0; n];
            let mut rest = code;
            for v in x.iter_mut().rev() {
                *v = (rest % points_per_dim) as f64 / step;
                rest /= points_per_dim;
            }
            (net.raw_unchecked(&x)[0] - oracle(&x)).abs()
        })
        .reduce(|| 0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxReport {
    pub m_tilde: usize,
    pub grid_points_per_dim: usize,
    pub hidden_units: usize,
    pub sup_error: f64,
}

impl ApproxReport {
    pub const CSV_HEADER: &'static str = "m_tilde,grid_points_per_dim,hidden_units,sup_error";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.m_tilde, self.grid_points_per_dim, self.hidden_units, self.sup_error
        )
    }
}

/// Builds the approximator for each `m_tilde` and measures its grid error.
pub fn approximation_sweep<G>(g: G, dim: usize, m_tildes: &[usize], points_per_dim: usize) -> Result<Vec<ApproxReport>>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    m_tildes
        .iter()
        .map(|&m| {
            let net = build_uniform_approximator(&g, dim, m)?;
            Ok(ApproxReport {
                m_tilde: m,
                grid_points_per_dim: points_per_dim,
                hidden_units: net.layers()[0].width(),
                sup_error: grid_max_error(&net, &g, points_per_dim)?,
            })
        })
        .collect()
}
