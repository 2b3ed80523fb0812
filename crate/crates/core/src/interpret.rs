//! Explanations of trained networks.
//!
//! Heaviside networks translate exactly into threshold rules: first-layer
//! processing functions become atoms such as `x1 <= 1.10`, deeper ones count
//! how many upstream rules hold (M-of-N), and the output layer is a table
//! of every combination of active processing functions. Smooth networks get
//! a qualitative shape per processing function instead.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{eval_processing, sigmoid, Head, Network, ProcessingKind};

/// Largest number of output-layer inputs whose combinations are enumerated.
pub const DEFAULT_CASE_CAP: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Ge,
    Le,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Ge => "≥",
            Relation::Le => "≤",
        }
    }

    fn negated_symbol(self) -> &'static str {
        match self {
            Relation::Ge => "<",
            Relation::Le => ">",
        }
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Rule {
    Atom {
        feature: usize,
        relation: Relation,
        threshold: f64,
        /// Read off a smooth processing function rather than extracted exactly.
        #[serde(default, skip_serializing_if = "is_false")]
        approximate: bool,
    },
    ConstTrue,
    ConstFalse,
    Not {
        rule: Box<Rule>,
    },
    /// Holds when at least `m` of `rules` hold.
    MofN {
        m: usize,
        rules: Vec<Rule>,
        /// The threshold sat exactly on an attainable count.
        #[serde(default, skip_serializing_if = "is_false")]
        boundary: bool,
    },
    CaseTable(CaseTable),
}

/// One combination of active output-layer processing functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    /// Bit `t` set when input `t` of the table holds.
    pub mask: u64,
    /// Pre-head value per output neuron, `sum(alpha * h) - out_bias`.
    pub logits: Vec<f64>,
    pub class: usize,
}

/// Final-layer decision table.
///
/// Input `t = j * arity + i` is processing function `i` of output neuron `j`.
/// When complete, `entries[mask].mask == mask` for all `2^k` masks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseTable {
    pub head: Head,
    pub arity: usize,
    pub alpha: Vec<Vec<f64>>,
    pub out_bias: Vec<f64>,
    pub inputs: Vec<Rule>,
    pub entries: Vec<Case>,
    /// Set when the inputs exceeded the enumeration cap; `entries` is empty.
    pub truncated: bool,
}

impl Rule {
    /// Logical negation with trivial simplifications.
    pub fn negate(self) -> Rule {
        match self {
            Rule::ConstTrue => Rule::ConstFalse,
            Rule::ConstFalse => Rule::ConstTrue,
            Rule::Not { rule } => *rule,
            other => Rule::Not { rule: Box::new(other) },
        }
    }

    /// Evaluates a boolean rule on a raw input vector.
    pub fn holds(&self, x: &[f64]) -> Result<bool> {
        self.check(x.len())?;
        Ok(self.eval(x))
    }

    fn eval(&self, x: &[f64]) -> bool {
        match self {
            Rule::Atom { feature, relation: Relation::Ge, threshold, .. } => x[*feature] >= *threshold,
            Rule::Atom { feature, relation: Relation::Le, threshold, .. } => x[*feature] <= *threshold,
            Rule::ConstTrue => true,
            Rule::ConstFalse => false,
            Rule::Not { rule } => !rule.eval(x),
            Rule::MofN { m, rules, .. } => {
                let mut count = 0;
                for r in rules {
                    count += usize::from(r.eval(x));
                    if count >= *m {
                        return true;
                    }
                }
                false
            }
            Rule::CaseTable(_) => unreachable!("case tables are rejected by check"),
        }
    }

    /// Structural validation of a boolean rule for inputs of dimension `dim`.
    fn check(&self, dim: usize) -> Result<()> {
        match self {
            Rule::Atom { feature, threshold, .. } => {
                if *feature >= dim {
                    return Err(Error::invalid(format!("atom refers to feature {feature}, input has {dim}")));
                }
                if threshold.is_nan() {
                    return Err(Error::invalid("atom threshold is NaN"));
                }
                Ok(())
            }
            Rule::ConstTrue | Rule::ConstFalse => Ok(()),
            Rule::Not { rule } => rule.check(dim),
            Rule::MofN { m, rules, .. } => {
                if *m == 0 || *m > rules.len() {
                    return Err(Error::invalid(format!("{m}-of-{} rule is out of range", rules.len())));
                }
                rules.iter().try_for_each(|r| r.check(dim))
            }
            Rule::CaseTable(_) => Err(Error::Unsupported("a case table is not a boolean rule".into())),
        }
    }

    /// Human-readable form, e.g. `3-of-{x2 ≥ 3.08, x3 ≤ 5.14}`.
    ///
    /// Features are named from `names`, falling back to `x1, x2, ...`.
    pub fn to_text(&self, names: &[String]) -> String {
        match self {
            Rule::Atom { feature, relation, threshold, approximate } => format!(
                "{} {} {threshold:.2}{}",
                feature_name(names, *feature),
                relation.symbol(),
                if *approximate { " (approximate)" } else { "" }
            ),
            Rule::ConstTrue => "true".into(),
            Rule::ConstFalse => "false".into(),
            Rule::Not { rule } => match rule.as_ref() {
                Rule::Atom { feature, relation, threshold, approximate } => format!(
                    "{} {} {threshold:.2}{}",
                    feature_name(names, *feature),
                    relation.negated_symbol(),
                    if *approximate { " (approximate)" } else { "" }
                ),
                other => format!("¬({})", other.to_text(names)),
            },
            Rule::MofN { m, rules, boundary } => {
                let inner: Vec<String> = rules.iter().map(|r| r.to_text(names)).collect();
                format!("{m}-of-{{{}}}{}", inner.join(", "), boundary_note(*boundary, *m))
            }
            Rule::CaseTable(table) => table.to_text(names),
        }
    }
}

fn boundary_note(boundary: bool, m: usize) -> String {
    if boundary {
        format!(" [threshold exactly {m}]")
    } else {
        String::new()
    }
}

fn feature_name(names: &[String], i: usize) -> String {
    names.get(i).cloned().unwrap_or_else(|| format!("x{}", i + 1))
}

impl CaseTable {
    fn build(head: Head, arity: usize, alpha: Vec<Vec<f64>>, out_bias: Vec<f64>, inputs: Vec<Rule>, cap: usize) -> Self {
        let k = inputs.len();
        let truncated = k > cap.min(63);
        let mut entries = Vec::new();
        if !truncated {
            entries.reserve(1 << k);
            for mask in 0..(1u64 << k) {
                // Same accumulation order as the forward pass, so the class
                // matches `predict` bit for bit.
                let logits: Vec<f64> = alpha
                    .iter()
                    .zip(&out_bias)
                    .enumerate()
                    .map(|(j, (row, bias))| {
                        let mut sum = 0.0;
                        for (i, a) in row.iter().enumerate() {
                            let h = if mask >> (j * arity + i) & 1 == 1 { 1.0 } else { 0.0 };
                            sum += a * h;
                        }
                        sum - bias
                    })
                    .collect();
                let class = head.decide(&head.probabilities(&logits));
                entries.push(Case { mask, logits, class });
            }
        }
        CaseTable { head, arity, alpha, out_bias, inputs, entries, truncated }
    }

    /// Class for a given set of active inputs.
    pub fn class_of(&self, mask: u64) -> Result<usize> {
        if self.truncated {
            return Err(Error::Unsupported(format!(
                "case table over {} inputs was truncated",
                self.inputs.len()
            )));
        }
        self.entries
            .get(mask as usize)
            .map(|c| c.class)
            .ok_or_else(|| Error::invalid(format!("mask {mask} outside the case table")))
    }

    fn check(&self, dim: usize) -> Result<()> {
        if self.truncated {
            return Err(Error::Unsupported(format!(
                "case table over {} inputs exceeds the enumeration cap; rules are incomplete",
                self.inputs.len()
            )));
        }
        let k = self.inputs.len();
        if k >= 64 || self.entries.len() != 1usize << k {
            return Err(Error::invalid(format!("case table over {k} inputs has {} entries", self.entries.len())));
        }
        if let Some((i, _)) = self.entries.iter().enumerate().find(|(i, c)| c.mask != *i as u64) {
            return Err(Error::invalid(format!("case table entry {i} is out of order")));
        }
        self.inputs.iter().try_for_each(|r| r.check(dim))
    }

    fn to_text(&self, names: &[String]) -> String {
        let labels: Vec<String> = self.inputs.iter().map(|r| r.to_text(names)).collect();
        let mut s = String::new();
        for (t, label) in labels.iter().enumerate() {
            let _ = writeln!(s, "I{} = {label}", t + 1);
        }
        self.write_cases(&mut s);
        s
    }

    fn write_cases(&self, s: &mut String) {
        if self.truncated {
            let _ = writeln!(
                s,
                "cases: truncated, {} inputs exceed the enumeration cap",
                self.inputs.len()
            );
            return;
        }
        let _ = writeln!(s, "cases ({} head):", self.head.name());
        for case in &self.entries {
            let active: Vec<String> = (0..self.inputs.len())
                .filter(|t| case.mask >> t & 1 == 1)
                .map(|t| format!("I{}", t + 1))
                .collect();
            let logits: Vec<String> = case.logits.iter().map(|z| format!("{z:.2}")).collect();
            let _ = writeln!(
                s,
                "  {{{}}} -> z = {} -> class {}",
                active.join(", "),
                logits.join(" / "),
                case.class
            );
        }
    }
}

/// Exact rules of a Heaviside network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub input_dim: usize,
    pub feature_names: Vec<String>,
    /// `hidden[l][j][i]`: processing function `i` of neuron `j` in hidden layer `l`.
    pub hidden: Vec<Vec<Vec<Rule>>>,
    /// Always a [`Rule::CaseTable`].
    pub output: Rule,
}

impl RuleSet {
    /// Names used for features in text output.
    pub fn with_feature_names(mut self, names: Vec<String>) -> Self {
        self.feature_names = names;
        self
    }

    pub fn case_table(&self) -> &CaseTable {
        match &self.output {
            Rule::CaseTable(t) => t,
            _ => unreachable!("rule sets end in a case table"),
        }
    }

    pub fn is_truncated(&self) -> bool {
        self.case_table().truncated
    }

    /// Plain-text listing. Rules of deeper layers refer to the upstream
    /// neuron's rules as `R(l,j,·)` instead of repeating them.
    pub fn to_text(&self) -> String {
        let names = &self.feature_names;
        let mut s = String::new();
        let mut upstream: Option<&Vec<Vec<Rule>>> = None;
        for (l, layer) in self.hidden.iter().enumerate() {
            for (j, neuron) in layer.iter().enumerate() {
                for (i, rule) in neuron.iter().enumerate() {
                    let text = compact(rule, upstream.map(|u| (l, &u[i], i)), names);
                    let _ = writeln!(s, "R({},{},{}) = {text}", l + 1, j + 1, i + 1);
                }
            }
            upstream = Some(layer);
        }
        let table = self.case_table();
        let depth = self.hidden.len();
        let _ = writeln!(
            s,
            "output layer (b* = {}):",
            table.out_bias.iter().map(|b| format!("{b:.2}")).collect::<Vec<_>>().join(" / ")
        );
        for (t, rule) in table.inputs.iter().enumerate() {
            let (j, i) = (t / table.arity, t % table.arity);
            let text = compact(rule, upstream.map(|u| (depth, &u[i], i)), names);
            let _ = writeln!(
                s,
                "  I{} = R({},{},{}) = {text}, alpha = {:.2}",
                t + 1,
                depth + 1,
                j + 1,
                i + 1,
                table.alpha[j][i]
            );
        }
        table.write_cases(&mut s);
        s
    }
}

/// Text for a rule, abbreviating an M-of-N over a whole upstream neuron.
/// `upstream` carries the 1-based layer of that neuron, its rules and its index.
fn compact(rule: &Rule, upstream: Option<(usize, &Vec<Rule>, usize)>, names: &[String]) -> String {
    if let (Rule::MofN { m, rules, boundary }, Some((l, up, i))) = (rule, upstream) {
        let reference = format!("R({l},{},·)", i + 1);
        if rules == up {
            return format!("{m}-of-{{{reference}}}{}", boundary_note(*boundary, *m));
        }
        let negated: Vec<Rule> = up.iter().cloned().map(Rule::negate).collect();
        if *rules == negated {
            return format!("{m}-of-{{¬{reference}}}{}", boundary_note(*boundary, *m));
        }
    }
    rule.to_text(names)
}

fn check_domain(net: &Network, domain: &[(f64, f64)]) -> Result<()> {
    if domain.len() != net.input_dim() {
        return Err(Error::shape(format!(
            "domain has {} ranges, network expects {} inputs",
            domain.len(),
            net.input_dim()
        )));
    }
    if let Some((i, r)) = domain.iter().enumerate().find(|(_, (lo, hi))| lo.is_nan() || hi.is_nan() || lo > hi) {
        return Err(Error::invalid(format!("domain range {i} is invalid: {r:?}")));
    }
    Ok(())
}

/// Rule for a first-layer processing function on feature `i`.
///
/// An atom that is constant over the feature's range collapses to a constant.
fn atom_rule(i: usize, w: f64, b: f64, (lo, hi): (f64, f64)) -> Rule {
    if w > 0.0 {
        if b <= lo {
            Rule::ConstTrue
        } else if b > hi {
            Rule::ConstFalse
        } else {
            Rule::Atom { feature: i, relation: Relation::Ge, threshold: b, approximate: false }
        }
    } else if w < 0.0 {
        if b >= hi {
            Rule::ConstTrue
        } else if b < lo {
            Rule::ConstFalse
        } else {
            Rule::Atom { feature: i, relation: Relation::Le, threshold: b, approximate: false }
        }
    } else {
        Rule::ConstTrue
    }
}

/// Rule for a processing function applied to the count of true rules of an
/// upstream neuron.
fn count_rule(w: f64, b: f64, upstream: &[Rule]) -> Rule {
    let n = upstream.len();
    let nf = n as f64;
    if w > 0.0 {
        // count >= b  <=>  count >= ceil(b)
        if b <= 0.0 {
            return Rule::ConstTrue;
        }
        if b > nf {
            return Rule::ConstFalse;
        }
        Rule::MofN { m: b.ceil() as usize, rules: upstream.to_vec(), boundary: b.fract() == 0.0 }
    } else if w < 0.0 {
        // count <= b  <=>  at least n - floor(b) rules fail
        if b >= nf {
            return Rule::ConstTrue;
        }
        if b < 0.0 {
            return Rule::ConstFalse;
        }
        Rule::MofN {
            m: n - b.floor() as usize,
            rules: upstream.iter().cloned().map(Rule::negate).collect(),
            boundary: b.fract() == 0.0,
        }
    } else {
        Rule::ConstTrue
    }
}

/// Exact rules of a Heaviside network over the given per-feature ranges,
/// enumerating at most [`DEFAULT_CASE_CAP`] output-layer inputs.
pub fn extract_heaviside_rules(net: &Network, domain: &[(f64, f64)]) -> Result<RuleSet> {
    extract_heaviside_rules_with_cap(net, domain, DEFAULT_CASE_CAP)
}

pub fn extract_heaviside_rules_with_cap(net: &Network, domain: &[(f64, f64)], cap: usize) -> Result<RuleSet> {
    if net.kind() != ProcessingKind::Heaviside {
        return Err(Error::Unsupported(format!(
            "exact rules need a heaviside network, got {}",
            net.kind()
        )));
    }
    check_domain(net, domain)?;
    let mut hidden = Vec::new();
    let mut upstream: Option<Vec<Vec<Rule>>> = None;
    for layer in net.layers() {
        let rules: Vec<Vec<Rule>> = layer
            .neurons
            .iter()
            .map(|neuron| {
                neuron
                    .w
                    .iter()
                    .zip(&neuron.b)
                    .enumerate()
                    .map(|(i, (&w, &b))| match &upstream {
                        None => atom_rule(i, w, b, domain[i]),
                        Some(up) => count_rule(w, b, &up[i]),
                    })
                    .collect()
            })
            .collect();
        if layer.is_output() {
            let arity = rules[0].len();
            let table = CaseTable::build(
                net.head(),
                arity,
                layer.alpha.clone().expect("validated output layer"),
                layer.out_bias.clone().expect("validated output layer"),
                rules.into_iter().flatten().collect(),
                cap,
            );
            return Ok(RuleSet {
                input_dim: net.input_dim(),
                feature_names: Vec::new(),
                hidden,
                output: Rule::CaseTable(table),
            });
        }
        hidden.push(rules.clone());
        upstream = Some(rules);
    }
    unreachable!("validated networks end in an output layer")
}

/// Classifier that evaluates extracted rules.
#[derive(Debug, Clone, Copy)]
pub struct RulePredictor<'a> {
    table: &'a CaseTable,
    input_dim: usize,
}

impl RulePredictor<'_> {
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.input_dim {
            return Err(Error::shape(format!("expected {} inputs, got {}", self.input_dim, x.len())));
        }
        let mut mask = 0u64;
        for (t, rule) in self.table.inputs.iter().enumerate() {
            if rule.eval(x) {
                mask |= 1 << t;
            }
        }
        Ok(self.table.entries[mask as usize].class)
    }
}

/// Builds a classifier from a complete rule set.
pub fn rules_to_predictor(rules: &RuleSet) -> Result<RulePredictor<'_>> {
    let table = match &rules.output {
        Rule::CaseTable(t) => t,
        _ => return Err(Error::invalid("rule set output must be a case table")),
    };
    table.check(rules.input_dim)?;
    Ok(RulePredictor { table, input_dim: rules.input_dim })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ShapeClass {
    Constant {
        value: f64,
    },
    StepLike {
        direction: Direction,
        threshold: f64,
    },
    LinearLike {
        direction: Direction,
    },
    Bell {
        center: f64,
        inverted: bool,
    },
    /// `threshold` is the 0.5 crossing, `None` when the curve stays on one
    /// side of 0.5 over the interval. `sharpness` is the steepest slope seen.
    FuzzyRule {
        direction: Direction,
        threshold: Option<f64>,
        sharpness: f64,
    },
}

impl ShapeClass {
    pub fn name(&self) -> &'static str {
        match self {
            ShapeClass::Constant { .. } => "constant",
            ShapeClass::StepLike { .. } => "step",
            ShapeClass::LinearLike { .. } => "linear",
            ShapeClass::Bell { .. } => "bell",
            ShapeClass::FuzzyRule { .. } => "fuzzy rule",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapeConfig {
    pub grid: usize,
    /// Ranges below this are constant.
    pub tau_const: f64,
    /// Largest 0.1-to-0.9 transition width, as a fraction of the interval, of a step.
    pub tau_steep: f64,
    pub min_r2: f64,
}

impl Default for ShapeConfig {
    fn default() -> Self {
        Self { grid: 512, tau_const: 0.05, tau_steep: 0.05, min_r2: 0.99 }
    }
}

/// `k` evenly spaced samples of a processing function, endpoints included.
pub fn sample_curve(kind: ProcessingKind, w: &[f64], b: &[f64], interval: (f64, f64), k: usize) -> Result<Vec<(f64, f64)>> {
    let (lo, hi) = interval;
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 samples, got {k}")));
    }
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::invalid(format!("invalid interval [{lo}, {hi}]")));
    }
    (0..k)
        .map(|i| {
            let x = if i == k - 1 { hi } else { lo + (hi - lo) * i as f64 / (k - 1) as f64 };
            Ok((x, eval_processing(kind, w, b, x)?))
        })
        .collect()
}

/// CSV with columns `x,h`.
pub fn curve_csv(points: &[(f64, f64)]) -> String {
    let mut s = String::from("x,h\n");
    for (x, h) in points {
        let _ = writeln!(s, "{x},{h}");
    }
    s
}

/// First `x` where the sampled curve reaches `level`, linearly interpolated.
fn crossing(xs: &[f64], ys: &[f64], level: f64) -> Option<f64> {
    for k in 0..ys.len() {
        if ys[k] == level {
            return Some(xs[k]);
        }
        if k + 1 < ys.len() && (ys[k] - level) * (ys[k + 1] - level) < 0.0 {
            let t = (level - ys[k]) / (ys[k + 1] - ys[k]);
            return Some(xs[k] + t * (xs[k + 1] - xs[k]));
        }
    }
    None
}

/// Last `x` where the sampled curve crosses `level`.
fn last_crossing(xs: &[f64], ys: &[f64], level: f64) -> Option<f64> {
    let rx: Vec<f64> = xs.iter().rev().copied().collect();
    let ry: Vec<f64> = ys.iter().rev().copied().collect();
    crossing(&rx, &ry, level)
}

fn is_monotone(ys: &[f64], direction: Direction) -> bool {
    const TOL: f64 = 1e-12;
    ys.windows(2).all(|p| match direction {
        Direction::Increasing => p[1] >= p[0] - TOL,
        Direction::Decreasing => p[1] <= p[0] + TOL,
    })
}

fn r_squared(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy * sxy / (sxx * syy)
}

/// Unique interior peak (or trough with `inverted`) rising at least `tau`
/// above both ends, as `(center, inverted)`.
fn find_bell(xs: &[f64], ys: &[f64], tau: f64) -> Option<(f64, bool)> {
    let n = ys.len();
    let ends = (ys[0], ys[n - 1]);
    for inverted in [false, true] {
        // Flip troughs into peaks.
        let v: Vec<f64> = if inverted { ys.iter().map(|y| -y).collect() } else { ys.to_vec() };
        let p = (0..n).fold(0, |best, k| if v[k] > v[best] { k } else { best });
        let base = if inverted { (-ends.0).max(-ends.1) } else { ends.0.max(ends.1) };
        if p == 0 || p == n - 1 || v[p] - base <= tau {
            continue;
        }
        if !is_monotone(&v[..=p], Direction::Increasing) || !is_monotone(&v[p..], Direction::Decreasing) {
            continue;
        }
        let half = (v[p] + base) / 2.0;
        let left = crossing(&xs[..=p], &v[..=p], half).unwrap_or(xs[0]);
        let right = last_crossing(&xs[p..], &v[p..], half).unwrap_or(xs[n - 1]);
        return Some(((left + right) / 2.0, inverted));
    }
    None
}

/// Qualitative shape of a processing function over `interval`.
///
/// Checks, in order: constant, step, bell, linear, and otherwise a fuzzy
/// threshold rule.
pub fn classify_shape(
    kind: ProcessingKind,
    w: &[f64],
    b: &[f64],
    interval: (f64, f64),
    cfg: &ShapeConfig,
) -> Result<ShapeClass> {
    let (lo, hi) = interval;
    if !(lo < hi) {
        return Err(Error::invalid(format!("interval [{lo}, {hi}] is empty")));
    }
    let points = sample_curve(kind, w, b, interval, cfg.grid.max(3))?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
    let (min, max) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    if max - min < cfg.tau_const {
        return Ok(ShapeClass::Constant { value: ys.iter().sum::<f64>() / ys.len() as f64 });
    }
    let (first, last) = (ys[0], ys[ys.len() - 1]);
    let direction = if last >= first { Direction::Increasing } else { Direction::Decreasing };
    let monotone = is_monotone(&ys, direction);
    if monotone && (last - first).abs() > 1.0 - cfg.tau_const {
        if let (Some(a), Some(c), Some(t)) = (crossing(&xs, &ys, 0.1), crossing(&xs, &ys, 0.9), crossing(&xs, &ys, 0.5)) {
            if (c - a).abs() < cfg.tau_steep * (hi - lo) {
                return Ok(ShapeClass::StepLike { direction, threshold: t });
            }
        }
    }
    if let Some((center, inverted)) = find_bell(&xs, &ys, cfg.tau_const) {
        return Ok(ShapeClass::Bell { center, inverted });
    }
    if r_squared(&xs, &ys) > cfg.min_r2 {
        return Ok(ShapeClass::LinearLike { direction });
    }
    let sharpness = xs
        .windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| ((y[1] - y[0]) / (x[1] - x[0])).abs())
        .fold(0.0, f64::max);
    Ok(ShapeClass::FuzzyRule { direction, threshold: crossing(&xs, &ys, 0.5), sharpness })
}

/// Shape summary of one processing function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessingSummary {
    /// 0-based layer, neuron and input indices.
    pub layer: usize,
    pub neuron: usize,
    pub input: usize,
    pub interval: (f64, f64),
    pub shape: ShapeClass,
    /// First-layer threshold read off the curve; only for smooth kinds.
    pub rule: Option<Rule>,
}

/// Input interval of each layer: the feature ranges for the first layer and
/// `[0, n]` for a layer fed by neurons with `n` inputs each.
pub fn layer_intervals(net: &Network, domain: &[(f64, f64)]) -> Result<Vec<Vec<(f64, f64)>>> {
    check_domain(net, domain)?;
    let mut out = vec![domain.to_vec()];
    for l in 1..net.layers().len() {
        let n = net.layer_arity(l - 1) as f64;
        out.push(vec![(0.0, n); net.layer_arity(l)]);
    }
    Ok(out)
}

fn approximate_atom(feature: usize, shape: &ShapeClass) -> Option<Rule> {
    let (direction, threshold) = match *shape {
        ShapeClass::StepLike { direction, threshold } => (direction, threshold),
        ShapeClass::FuzzyRule { direction, threshold: Some(t), .. } => (direction, t),
        _ => return None,
    };
    let relation = match direction {
        Direction::Increasing => Relation::Ge,
        Direction::Decreasing => Relation::Le,
    };
    Some(Rule::Atom { feature, relation, threshold, approximate: true })
}

/// Classifies every processing function of a network.
///
/// Unbounded feature ranges fall back to `[-1, 1]`.
pub fn summarize_processing(net: &Network, domain: &[(f64, f64)], cfg: &ShapeConfig) -> Result<Vec<ProcessingSummary>> {
    let intervals = layer_intervals(net, domain)?;
    let k = net.kind().factors();
    let mut out = Vec::new();
    for (l, layer) in net.layers().iter().enumerate() {
        for (j, neuron) in layer.neurons.iter().enumerate() {
            for (i, &range) in intervals[l].iter().enumerate() {
                let interval = plot_interval(range);
                let (w, b) = neuron.input(i, k);
                let shape = classify_shape(net.kind(), w, b, interval, cfg)?;
                let rule = match (l, net.kind()) {
                    (0, ProcessingKind::Sigmoid | ProcessingKind::TanhProd { .. }) => approximate_atom(i, &shape),
                    _ => None,
                };
                out.push(ProcessingSummary { layer: l, neuron: j, input: i, interval, shape, rule });
            }
        }
    }
    Ok(out)
}

/// Finite, non-degenerate interval for sampling.
fn plot_interval((lo, hi): (f64, f64)) -> (f64, f64) {
    let (lo, hi) = if lo.is_finite() && hi.is_finite() { (lo, hi) } else { (-1.0, 1.0) };
    if lo < hi {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

const PLOT_W: f64 = 140.0;
const PLOT_H: f64 = 64.0;
const CELL_H: f64 = PLOT_H + 40.0;
const COL_W: f64 = PLOT_W + 190.0;
const MARGIN: f64 = 40.0;
const NEURON_GAP: f64 = 28.0;
const CURVE_SAMPLES: usize = 129;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Polyline points for `points` mapped into the plot box at `(x0, y0)`,
/// with `h` from 0 at the bottom to 1 at the top.
fn polyline(points: &[(f64, f64)], x0: f64, y0: f64, (lo, hi): (f64, f64)) -> String {
    points
        .iter()
        .map(|&(x, h)| {
            let px = x0 + (x - lo) / (hi - lo) * PLOT_W;
            let py = y0 + (1.0 - h.clamp(0.0, 1.0)) * PLOT_H;
            format!("{px:.2},{py:.2}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

struct Plot<'a> {
    class: &'a str,
    x0: f64,
    y0: f64,
    interval: (f64, f64),
    points: Vec<(f64, f64)>,
    title: String,
    caption: String,
    thresholds: Vec<f64>,
}

fn write_plot(s: &mut String, p: &Plot) {
    let (x0, y0) = (p.x0, p.y0);
    let _ = writeln!(s, r#"<g class="{}">"#, p.class);
    let _ = writeln!(
        s,
        r##"<rect x="{x0:.2}" y="{y0:.2}" width="{PLOT_W}" height="{PLOT_H}" fill="#fafafa" stroke="#999"/>"##
    );
    for &t in &p.thresholds {
        let (lo, hi) = p.interval;
        if t >= lo && t <= hi {
            let px = x0 + (t - lo) / (hi - lo) * PLOT_W;
            let _ = writeln!(
                s,
                r##"<line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{:.2}" stroke="#bbb" stroke-dasharray="3,3"/>"##,
                y0 + PLOT_H
            );
        }
    }
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>"##,
        polyline(&p.points, x0, y0, p.interval)
    );
    let _ = writeln!(s, r#"<text x="{x0:.2}" y="{:.2}" font-size="11">{}</text>"#, y0 - 4.0, escape(&p.title));
    let _ = writeln!(
        s,
        r#"<text x="{x0:.2}" y="{:.2}" font-size="10">{}</text>"#,
        y0 + PLOT_H + 13.0,
        escape(&p.caption)
    );
    let _ = writeln!(s, "</g>");
}

fn fmt_list(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(", ")
}

/// SVG diagram of a network: one curve plot per processing function,
/// grouped by neuron, with summation nodes, alpha and `b*` annotations.
///
/// First-layer plots are titled from `names`, falling back to `x1, x2, ...`.
pub fn render_svg(net: &Network, domain: &[(f64, f64)], names: &[String]) -> Result<String> {
    let intervals = layer_intervals(net, domain)?;
    let k = net.kind().factors();
    let layers = net.layers();
    let heights: Vec<f64> = layers
        .iter()
        .enumerate()
        .map(|(l, layer)| layer.width() as f64 * (net.layer_arity(l) as f64 * CELL_H + NEURON_GAP))
        .collect();
    let height = heights.iter().fold(0.0f64, |a, &b| a.max(b)) + 2.0 * MARGIN;
    let width = (layers.len() as f64 + 1.0) * COL_W + 2.0 * MARGIN;

    let mut body = String::new();
    // Summation node centres of the previous layer.
    let mut prev_nodes: Vec<(f64, f64)> = Vec::new();
    for (l, layer) in layers.iter().enumerate() {
        let x0 = MARGIN + l as f64 * COL_W + 40.0;
        let arity = net.layer_arity(l);
        let mut y = MARGIN + (height - 2.0 * MARGIN - heights[l]) / 2.0;
        let mut nodes = Vec::new();
        for (j, neuron) in layer.neurons.iter().enumerate() {
            let box_h = arity as f64 * CELL_H;
            let _ = writeln!(
                body,
                r##"<rect class="neuron" x="{:.2}" y="{:.2}" width="{:.2}" height="{box_h:.2}" fill="none" stroke="#444" rx="6"/>"##,
                x0 - 10.0,
                y,
                PLOT_W + 20.0
            );
            let node = (x0 + PLOT_W + 90.0, y + box_h / 2.0);
            for i in 0..arity {
                let y0 = y + i as f64 * CELL_H + 24.0;
                let interval = plot_interval(intervals[l][i]);
                let (w, b) = neuron.input(i, k);
                let points = sample_curve(net.kind(), w, b, interval, CURVE_SAMPLES)?;
                let title = match l {
                    0 => feature_name(names, i),
                    _ => format!("n({},{})", l, i + 1),
                };
                let _ = match &prev_nodes.get(i) {
                    Some(&(px, py)) => writeln!(
                        body,
                        r##"<line x1="{:.2}" y1="{py:.2}" x2="{:.2}" y2="{:.2}" stroke="#ccc"/>"##,
                        px + 14.0,
                        x0 - 10.0,
                        y0 + PLOT_H / 2.0
                    ),
                    None => Ok(()),
                };
                write_plot(
                    &mut body,
                    &Plot {
                        class: "curve",
                        x0,
                        y0,
                        interval,
                        points,
                        title,
                        caption: format!("b = {}  w = {}", fmt_list(b), fmt_list(w)),
                        thresholds: b.to_vec(),
                    },
                );
                let (lx, ly) = (x0 + PLOT_W, y0 + PLOT_H / 2.0);
                let _ = writeln!(
                    body,
                    r##"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{:.2}" stroke="#888"/>"##,
                    node.0 - 14.0,
                    node.1
                );
                if let Some(alpha) = &layer.alpha {
                    let _ = writeln!(
                        body,
                        r#"<text class="alpha" x="{:.2}" y="{:.2}" font-size="10">α = {:.2}</text>"#,
                        lx + 6.0,
                        ly - 4.0,
                        alpha[j][i]
                    );
                }
            }
            let _ = writeln!(
                body,
                r##"<circle class="sum" cx="{:.2}" cy="{:.2}" r="14" fill="#e8f5e9" stroke="#2e7d32"/>"##,
                node.0,
                node.1
            );
            let _ = writeln!(
                body,
                r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">Σ</text>"#,
                node.0,
                node.1 + 5.0
            );
            if let Some(out_bias) = &layer.out_bias {
                let _ = writeln!(
                    body,
                    r#"<text class="bias" x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">b* = {:.2}</text>"#,
                    node.0,
                    node.1 + 30.0,
                    out_bias[j]
                );
            }
            nodes.push(node);
            y += box_h + NEURON_GAP;
        }
        prev_nodes = nodes;
    }
    write_head(&mut body, net, &prev_nodes);
    Ok(format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    ))
}

/// Head plot to the right of the output summation nodes.
fn write_head(s: &mut String, net: &Network, nodes: &[(f64, f64)]) {
    let out = net.output_layer();
    let x0 = nodes[0].0 + 60.0;
    match net.head() {
        Head::Sigmoid => {
            let alpha = &out.alpha.as_ref().expect("validated output layer")[0];
            let b_star = out.out_bias.as_ref().expect("validated output layer")[0];
            let lo: f64 = alpha.iter().map(|a| a.min(0.0)).sum();
            let hi: f64 = alpha.iter().map(|a| a.max(0.0)).sum();
            let interval = plot_interval((lo.min(b_star - 1.0), hi.max(b_star + 1.0)));
            let points: Vec<(f64, f64)> = (0..CURVE_SAMPLES)
                .map(|i| {
                    let z = interval.0 + (interval.1 - interval.0) * i as f64 / (CURVE_SAMPLES - 1) as f64;
                    (z, sigmoid(z - b_star))
                })
                .collect();
            let (nx, ny) = nodes[0];
            let y0 = ny - PLOT_H / 2.0;
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" y1="{ny:.2}" x2="{x0:.2}" y2="{ny:.2}" stroke="#888"/>"##,
                nx + 14.0
            );
            write_plot(
                s,
                &Plot {
                    class: "activation",
                    x0,
                    y0,
                    interval,
                    points,
                    title: "P(class 1) = σ(Σ − b*)".into(),
                    caption: format!("class 1 iff Σ > {b_star:.2}"),
                    thresholds: vec![b_star],
                },
            );
        }
        Head::Softmax => {
            let top = nodes.first().map_or(0.0, |n| n.1) - 20.0;
            let bottom = nodes.last().map_or(0.0, |n| n.1) + 20.0;
            for &(nx, ny) in nodes {
                let _ = writeln!(
                    s,
                    r##"<line x1="{:.2}" y1="{ny:.2}" x2="{x0:.2}" y2="{ny:.2}" stroke="#888"/>"##,
                    nx + 14.0
                );
            }
            let _ = writeln!(
                s,
                r##"<rect class="activation" x="{x0:.2}" y="{top:.2}" width="80" height="{:.2}" fill="#fdecea" stroke="#c62828"/>"##,
                bottom - top
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">softmax</text>"#,
                x0 + 40.0,
                (top + bottom) / 2.0 + 4.0
            );
        }
    }
}

/// Writes the diagram of [`render_svg`] to `path`.
pub fn render_network(net: &Network, domain: &[(f64, f64)], path: impl AsRef<Path>) -> Result<()> {
    render_network_with_names(net, domain, &[], path)
}

pub fn render_network_with_names(
    net: &Network,
    domain: &[(f64, f64)],
    names: &[String],
    path: impl AsRef<Path>,
) -> Result<()> {
    std::fs::write(path, render_svg(net, domain, names)?)?;
    Ok(())
}

/// Curve samples of every processing function, keyed `(layer, neuron, input)`
/// with 0-based indices.
pub fn network_curves(net: &Network, domain: &[(f64, f64)], k: usize) -> Result<Vec<((usize, usize, usize), Vec<(f64, f64)>)>> {
    let intervals = layer_intervals(net, domain)?;
    let factors = net.kind().factors();
    let mut out = Vec::new();
    for (l, layer) in net.layers().iter().enumerate() {
        for (j, neuron) in layer.neurons.iter().enumerate() {
            for (i, &range) in intervals[l].iter().enumerate() {
                let (w, b) = neuron.input(i, factors);
                out.push(((l, j, i), sample_curve(net.kind(), w, b, plot_interval(range), k)?));
            }
        }
    }
    Ok(out)
}
