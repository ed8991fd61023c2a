use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::generate_batch;
use super::LanguageModel;
use crate::dist::TokenId;
use crate::error::{Error, Result};
use crate::iqr_ip::SamplerConfig;
use crate::metrics::{MetricsReport, ReportOptions, Sample};
use crate::sampler::Method;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub method: Method,
    pub config: SamplerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: Cell,
    pub report: MetricsReport,
}

/// Generates `samples_per_cell` samples for one cell and scores them.
pub fn run_cell<M: LanguageModel + ?Sized>(
    model: &M,
    cell: &Cell,
    samples_per_cell: usize,
    prompt: &[TokenId],
    opts: &ReportOptions,
    record_dists: bool,
) -> Result<(Vec<Sample>, MetricsReport)> {
    let samples = generate_batch(model, &cell.config, cell.method, prompt, samples_per_cell, record_dists)?;
    let report = MetricsReport::compute(model, &samples, opts)?;
    Ok((samples, report))
}

/// Runs every cell of `grid`. Cells run in parallel; each cell's seeds come
/// from its own config, so the result does not depend on scheduling.
pub fn run_experiment<M: LanguageModel + ?Sized>(
    model: &M,
    grid: &[Cell],
    samples_per_cell: usize,
    prompt: &[TokenId],
    opts: &ReportOptions,
) -> Result<Vec<CellResult>> {
    if grid.is_empty() {
        return Err(Error::EmptyInput("experiment grid"));
    }
    grid.par_iter()
        .map(|cell| {
            let (_, report) = run_cell(model, cell, samples_per_cell, prompt, opts, false)?;
            Ok(CellResult { cell: cell.clone(), report })
        })
        .collect()
}
