use std::collections::{BTreeMap, BTreeSet};

use picker_bench::eval::{
    aggregate_windows, evaluate_waveform, group_by_waveform, read_window_outputs,
    ClassifiedWaveform,
};
use picker_bench::metrics::{
    cumulative_rmsr, f1, noise_percent_correct, recall, select_threshold, AggregateCounts,
    CumulativeRmsrCurve, LabeledTrace, ThresholdSelection,
};
use picker_bench::{Dataset, PickClass, ProbabilityTrace};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Ctx, PICKS_FILE, SCORES_FILE, THRESHOLD_FILE, TRACES_FILE};
use crate::error::CliError;
use crate::io;

#[derive(Serialize)]
struct AggregateSummary {
    n_traces: usize,
    n_windows: usize,
    /// Dataset waveforms that had no windows at all.
    waveforms_without_windows: Vec<String>,
    /// Traces with at least one sample no window covered.
    partially_covered: Vec<String>,
}

pub fn aggregate(ctx: &mut Ctx) -> Result<(), CliError> {
    let dataset = ctx.dataset()?;
    let windows_path = ctx.config.windows_path();
    let windows = read_window_outputs(io::open(&windows_path)?)?;
    let n_windows = windows.len();
    let groups = group_by_waveform(windows);
    if let Some(id) = groups.keys().find(|id| dataset.waveform(id).is_none()) {
        return Err(CliError::Core(picker_bench::Error::InvalidRecord {
            id: id.clone(),
            message: format!(
                "windows in {} for a waveform not in the dataset",
                windows_path.display()
            ),
        }));
    }
    let wanted: Vec<_> = dataset
        .waveforms()
        .iter()
        .filter(|w| groups.contains_key(&w.waveform_id))
        .collect();
    let traces = wanted
        .par_iter()
        .map(|w| aggregate_windows(&groups[&w.waveform_id], w.n_samples))
        .collect::<picker_bench::Result<Vec<_>>>()?;
    let summary = AggregateSummary {
        n_traces: traces.len(),
        n_windows,
        waveforms_without_windows: dataset
            .waveforms()
            .iter()
            .filter(|w| !groups.contains_key(&w.waveform_id))
            .map(|w| w.waveform_id.clone())
            .collect(),
        partially_covered: traces
            .iter()
            .filter(|t| t.coverage.contains(&0))
            .map(|t| t.waveform_id.clone())
            .collect(),
    };
    ctx.out.ndjson(&ctx.path(TRACES_FILE), &traces)?;
    ctx.out.json(&ctx.path("aggregate_summary.json"), &summary)
}

/// Traces for `members`, in dataset order, each paired with its record.
fn labeled(
    dataset: &Dataset,
    traces: &mut BTreeMap<String, ProbabilityTrace>,
    members: &BTreeSet<String>,
    split: &str,
) -> Result<Vec<LabeledTrace>, CliError> {
    dataset
        .waveforms()
        .iter()
        .filter(|w| members.contains(&w.waveform_id))
        .map(|w| {
            let trace = traces.remove(&w.waveform_id).ok_or_else(|| {
                CliError::Core(picker_bench::Error::InvalidRecord {
                    id: w.waveform_id.clone(),
                    message: format!("{split} waveform has no aggregated trace"),
                })
            })?;
            Ok(LabeledTrace {
                record: w.clone(),
                trace,
            })
        })
        .collect()
}

fn load_traces(ctx: &Ctx) -> Result<BTreeMap<String, ProbabilityTrace>, CliError> {
    let traces: Vec<ProbabilityTrace> = io::read_ndjson(&ctx.path(TRACES_FILE))?;
    Ok(traces
        .into_iter()
        .map(|t| (t.waveform_id.clone(), t))
        .collect())
}

pub fn threshold(ctx: &mut Ctx) -> Result<(), CliError> {
    let dataset = ctx.dataset()?;
    let plan = ctx.split_plan()?;
    let mut traces = load_traces(ctx)?;
    let validation = labeled(
        &dataset,
        &mut traces,
        &plan.validation_members,
        "validation",
    )?;
    let p = &ctx.config.picking;
    let selection = select_threshold(&validation, &p.threshold_grid, p.tp_half_width_s)?;
    ctx.out.json(&ctx.path(THRESHOLD_FILE), &selection)
}

#[derive(Serialize)]
struct PickRow<'a> {
    waveform_id: &'a str,
    sample_index: usize,
    probability: f64,
    classification: PickClass,
    residual_s: Option<f64>,
}

pub fn pick(ctx: &mut Ctx) -> Result<(), CliError> {
    let threshold = match ctx.config.picking.threshold {
        Some(t) => t,
        None => io::read_json::<ThresholdSelection>(&ctx.path(THRESHOLD_FILE))?.threshold,
    };
    let dataset = ctx.dataset()?;
    let plan = ctx.split_plan()?;
    let mut traces = load_traces(ctx)?;
    let test = labeled(&dataset, &mut traces, &plan.test_members, "test")?;
    let tp_half_width = ctx.config.picking.tp_half_width_s;
    let classified = test
        .par_iter()
        .map(|lt| evaluate_waveform(&lt.record, &lt.trace, threshold, tp_half_width))
        .collect::<picker_bench::Result<Vec<_>>>()?;
    let rows: Vec<PickRow> = classified
        .iter()
        .flat_map(|c| c.picks.iter())
        .map(|p| PickRow {
            waveform_id: &p.waveform_id,
            sample_index: p.sample_index,
            probability: p.probability,
            classification: p.classification,
            residual_s: p.residual_s,
        })
        .collect();
    ctx.out.ndjson(&ctx.path(PICKS_FILE), &classified)?;
    ctx.out.csv(&ctx.path("picks.csv"), &rows)
}

#[derive(Serialize, Deserialize)]
pub struct Scores {
    pub threshold: Option<f64>,
    pub counts: AggregateCounts,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub noise_percent_correct: Option<f64>,
    pub rmsr: CumulativeRmsrCurve,
}

#[derive(Serialize)]
struct RmsrRow {
    cutoff_s: f64,
    rmsr_s: Option<f64>,
    n_residuals: usize,
}

pub fn score(ctx: &mut Ctx) -> Result<(), CliError> {
    let classified: Vec<ClassifiedWaveform> = io::read_ndjson(&ctx.path(PICKS_FILE))?;
    let counts = AggregateCounts::from_waveforms(classified.iter().map(|c| &c.counts));
    let residuals: Vec<f64> = classified
        .iter()
        .flat_map(|c| c.counts.residuals.iter().copied())
        .collect();
    let rmsr = cumulative_rmsr(&residuals, &ctx.config.picking.rmsr_grid)?;
    let threshold = match ctx.config.picking.threshold {
        Some(t) => Some(t),
        None => io::read_json::<ThresholdSelection>(&ctx.path(THRESHOLD_FILE))
            .ok()
            .map(|s| s.threshold),
    };
    let rows: Vec<RmsrRow> = rmsr
        .grid
        .iter()
        .zip(&rmsr.values)
        .zip(&rmsr.counts)
        .map(|((&g, &v), &n)| RmsrRow {
            cutoff_s: g,
            rmsr_s: v,
            n_residuals: n,
        })
        .collect();
    let scores = Scores {
        threshold,
        counts,
        recall: recall(&counts).ok(),
        f1: f1(&counts).ok(),
        noise_percent_correct: noise_percent_correct(&counts).ok(),
        rmsr,
    };
    ctx.out.json(&ctx.path(SCORES_FILE), &scores)?;
    ctx.out.csv(&ctx.path("rmsr.csv"), &rows)
}
