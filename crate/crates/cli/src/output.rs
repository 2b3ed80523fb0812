use std::path::Path;

use anyhow::{Context, Result};
use ian::metrics::Metrics;
use serde::Serialize;

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// `98.7 (±0.7)` in percent.
pub fn pct(m: &Metrics) -> String {
    format!("{:.1} (±{:.1})", 100.0 * m.accuracy, 100.0 * m.ci_halfwidth)
}
