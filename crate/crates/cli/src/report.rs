use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

/// One CSV row. Fields that do not apply to a run stay empty.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Row {
    pub n: usize,
    pub seed: u64,
    pub p: Option<f64>,
    pub adversary: Option<String>,
    pub algo: String,
    pub objective: String,
    pub value: Option<f64>,
    /// Objective value of the planted tree.
    pub opt_proxy: Option<f64>,
    pub ratio: Option<f64>,
    pub queries: Option<u64>,
    pub depth: Option<usize>,
    pub wall_ms: f64,
    pub mem_bits: Option<u64>,
    /// `pass`, `fail` (inconsistent output) or `fail_signal` (aborted build).
    pub consistency: Option<String>,
    /// Brute-force optimum, filled when n is small enough.
    pub opt_exact: Option<f64>,
    pub ratio_exact: Option<f64>,
}

pub fn write_rows(rows: &[Row], path: Option<&Path>) -> anyhow::Result<()> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
