use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use ian::interpret::{
    curve_csv, extract_heaviside_rules_with_cap, network_curves, render_network_with_names, rules_to_predictor,
    summarize_processing, ShapeClass, ShapeConfig, DEFAULT_CASE_CAP,
};
use ian::{document, Network, ProcessingKind};

use crate::output::write_json;

#[derive(Args, Debug)]
pub struct ExplainArgs {
    #[arg(long)]
    model: PathBuf,
    /// Dataset supplying feature ranges and names; rule accuracy is checked on it.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Points per exported curve.
    #[arg(long, default_value_t = 101)]
    samples: usize,
    /// Largest number of output-layer inputs to enumerate.
    #[arg(long, default_value_t = DEFAULT_CASE_CAP)]
    case_cap: usize,
}

/// Feature ranges spanning every first-layer threshold with a margin of 1,
/// used when no dataset is given.
fn threshold_domain(net: &Network) -> Vec<(f64, f64)> {
    let k = net.kind().factors();
    (0..net.input_dim())
        .map(|i| {
            let (lo, hi) = net.layers()[0]
                .neurons
                .iter()
                .flat_map(|n| n.input(i, k).1.iter().copied())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), b| (lo.min(b), hi.max(b)));
            (lo - 1.0, hi + 1.0)
        })
        .collect()
}

fn describe(shape: &ShapeClass) -> String {
    match shape {
        ShapeClass::Constant { value } => format!("constant {value:.2}"),
        ShapeClass::StepLike { direction, threshold } => format!("step ({direction:?}) at {threshold:.2}"),
        ShapeClass::LinearLike { direction } => format!("linear ({direction:?})"),
        ShapeClass::Bell { center, inverted } => {
            format!("{} centred at {center:.2}", if *inverted { "inverted bell" } else { "bell" })
        }
        ShapeClass::FuzzyRule { direction, threshold, sharpness } => match threshold {
            Some(t) => format!("fuzzy rule ({direction:?}) around {t:.2}, slope up to {sharpness:.2}"),
            None => format!("fuzzy rule ({direction:?}) without a 0.5 crossing, slope up to {sharpness:.2}"),
        },
    }
    .to_lowercase()
}

pub fn run(a: ExplainArgs) -> Result<()> {
    let net = document::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let data = a.data.as_ref().map(crate::load_data).transpose()?;
    let (domain, names) = match &data {
        Some(d) => {
            if d.n_features() != net.input_dim() {
                bail!("model expects {} features, dataset has {}", net.input_dim(), d.n_features());
            }
            (d.feature_ranges().to_vec(), d.feature_names().to_vec())
        }
        None => (threshold_domain(&net), Vec::new()),
    };
    fs::create_dir_all(a.out_dir.join("curves")).with_context(|| format!("creating {}", a.out_dir.display()))?;

    let shapes = summarize_processing(&net, &domain, &ShapeConfig::default())?;
    write_json(&a.out_dir.join("shapes.json"), &shapes)?;
    for ((l, j, i), points) in network_curves(&net, &domain, a.samples)? {
        let path = a.out_dir.join("curves").join(format!("l{}_n{}_in{}.csv", l + 1, j + 1, i + 1));
        fs::write(&path, curve_csv(&points)).with_context(|| format!("writing {}", path.display()))?;
    }
    render_network_with_names(&net, &domain, &names, a.out_dir.join("network.svg"))?;

    let mut text = String::new();
    if net.kind() == ProcessingKind::Heaviside {
        let rules = extract_heaviside_rules_with_cap(&net, &domain, a.case_cap)?.with_feature_names(names.clone());
        write_json(&a.out_dir.join("rules.json"), &rules)?;
        text.push_str(&rules.to_text());
        if let Some(d) = &data {
            match rules_to_predictor(&rules) {
                Ok(p) => {
                    let mut agree = 0usize;
                    let mut correct = 0usize;
                    for (x, &y) in d.features().iter().zip(d.labels()) {
                        let r = p.predict(x)?;
                        agree += usize::from(r == net.predict(x)?);
                        correct += usize::from(r == y);
                    }
                    let _ = writeln!(
                        text,
                        "rule accuracy on data: {:.4} ({} of {} predictions match the network)",
                        correct as f64 / d.len() as f64,
                        agree,
                        d.len()
                    );
                }
                Err(e) => {
                    let _ = writeln!(text, "rules cannot be evaluated: {e}");
                }
            }
        }
    } else {
        let _ = writeln!(text, "{} network, shapes of processing functions:", net.kind());
        for s in &shapes {
            let _ = write!(
                text,
                "R({},{},{}) on [{:.2}, {:.2}]: {}",
                s.layer + 1,
                s.neuron + 1,
                s.input + 1,
                s.interval.0,
                s.interval.1,
                describe(&s.shape)
            );
            if let Some(rule) = &s.rule {
                let _ = write!(text, "; {}", rule.to_text(&names));
            }
            text.push('\n');
        }
    }
    fs::write(a.out_dir.join("rules.txt"), &text)?;
    print!("{text}");
    Ok(())
}
