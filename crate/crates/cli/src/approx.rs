use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use ian::universality::{approximation_sweep, ApproxReport};

use crate::parse_positive;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Target {
    /// Mean of the coordinates.
    Mean,
    /// Product of the coordinates.
    Product,
    /// `sin(2 pi x1)` scaled into `[0, 1]`.
    Sine,
    /// Gaussian bump centred in the cube.
    Peak,
}

impl Target {
    fn eval(self, x: &[f64]) -> f64 {
        match self {
            Target::Mean => x.iter().sum::<f64>() / x.len() as f64,
            Target::Product => x.iter().product(),
            Target::Sine => 0.5 + 0.5 * (2.0 * std::f64::consts::PI * x[0]).sin(),
            Target::Peak => (-8.0 * x.iter().map(|v| (v - 0.5) * (v - 0.5)).sum::<f64>()).exp(),
        }
    }
}

#[derive(Args, Debug)]
pub struct ApproxArgs {
    #[arg(long, value_enum, default_value_t = Target::Mean)]
    function: Target,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Cubes per axis, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_positive, default_value = "1,2,4,8,16,20")]
    m_tilde: Vec<usize>,
    /// Verification grid points per axis.
    #[arg(long, default_value_t = 201)]
    grid: usize,
    /// CSV report to write.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(a: ApproxArgs) -> Result<()> {
    let f = a.function;
    let reports = approximation_sweep(move |x: &[f64]| f.eval(x), a.dim, &a.m_tilde, a.grid)?;
    if let Some(path) = &a.out {
        let mut csv = String::from(ApproxReport::CSV_HEADER);
        csv.push('\n');
        for r in &reports {
            csv.push_str(&r.csv_row());
            csv.push('\n');
        }
        std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("{:>8} {:>8} {:>10} {:>14}", "m_tilde", "grid", "hidden", "sup_error");
    for r in &reports {
        println!("{:>8} {:>8} {:>10} {:>14.6e}", r.m_tilde, r.grid_points_per_dim, r.hidden_units, r.sup_error);
    }
    Ok(())
}
