use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{SecondsFormat, Utc};
use msms_core::sim::{CostModelResult, CostRow};
use msms_core::sweep::ComparisonReport;
use serde::Serialize;

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush().with_context(|| format!("writing {}", path.display()))
}

/// Record of one CLI invocation. Written after every other artifact.
#[derive(Debug, Serialize)]
pub struct RunManifest<C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub config: C,
    pub artifacts: Vec<PathBuf>,
    pub started_at: String,
    pub finished_at: String,
}

impl<C: Serialize> RunManifest<C> {
    pub fn new(command: &'static str, seed: u64, config: C, started_at: String) -> Self {
        Self {
            tool: "msms",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config,
            artifacts: Vec::new(),
            started_at,
            finished_at: String::new(),
        }
    }

    pub fn finish(mut self, dir: &Path) -> Result<PathBuf> {
        self.finished_at = now();
        let path = dir.join("manifest.json");
        write_json(&path, &self)?;
        Ok(path)
    }
}

pub fn summary_table(comparison: &ComparisonReport) -> String {
    let mut out = format!(
        "{:<10} {:>14} {:>12} {:>9} {:>9} {:>10}\n",
        "strategy", "total_steps", "priority_ops", "injected", "detected", "miss_rate"
    );
    for report in &comparison.reports {
        let t = &report.totals;
        out.push_str(&format!(
            "{:<10} {:>14} {:>12} {:>9} {:>9} {:>10}\n",
            report.config.strategy.name(),
            t.total_steps,
            t.priority_ops,
            t.errors_injected,
            t.errors_detected,
            t.miss_rate_display()
        ));
    }
    out
}

/// Integers print bare, anything else with two decimals.
pub fn units(x: f64) -> String {
    if (x - x.round()).abs() < 1e-9 {
        format!("{}", x.round() as i64)
    } else {
        format!("{x:.2}")
    }
}

pub fn cost_table(result: &CostModelResult) -> String {
    let row = |name: &str, r: &CostRow| format!("{:<32} {:>8} {:>8}\n", name, units(r.time), units(r.space));
    let mut out = format!("{:<32} {:>8} {:>8}\n", "system", "time", "space");
    out.push_str(&row("None (standard)", &result.none));
    out.push_str(&row("Technique", &result.technique));
    let label = format!("MSMS w/ technique {}% priority", units(result.priority_fraction * 100.0));
    out.push_str(&row(&label, &result.msms));
    out
}
