use std::collections::BTreeMap;

use picker_bench::eval::{slice_windows, write_window_outputs, WindowOutput};
use picker_bench::model::MetricTable;
use picker_bench::stratify::{build_split_plan, sample_cluster_sets, ClusterModel, GeoPoint};
use picker_bench::synth::{
    gen_geo_dataset, gen_metrics, gen_trace, gen_waveform, SynthTraceParams,
};
use picker_bench::{Dataset, WaveformRecord};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{stage, stem, Ctx, CLUSTERS_FILE, SPLIT_FILE, TABLES_DIR};
use crate::error::CliError;

/// Ground truth of a synthetic catalog.
#[derive(Serialize)]
struct SynthTruth<'a> {
    centers: &'a [GeoPoint],
    source_blob: BTreeMap<&'a str, usize>,
    noise_blob: BTreeMap<&'a str, usize>,
}

/// One table per grid point of a functional metric.
#[derive(Debug, Serialize, Deserialize)]
pub struct FunctionalTables {
    pub metric_name: String,
    pub grid: Vec<f64>,
    pub tables: Vec<MetricTable>,
}

pub fn synth(ctx: &mut Ctx) -> Result<(), CliError> {
    let s = ctx.config.synth.clone();
    let generated = gen_geo_dataset(&s.geo, ctx.seed(&[stage::GEO]))?;
    let dataset_path = ctx.config.dataset_path();
    let base = dataset_path
        .parent()
        .map(|p| p.to_path_buf())
        .unwrap_or_default();

    let mut waveforms: Vec<WaveformRecord> = generated.dataset.waveforms().to_vec();
    if s.write_traces {
        let seed = ctx.seed(&[stage::WAVEFORMS]);
        let ds = &generated.dataset;
        let magnitude = |w: &WaveformRecord| {
            w.source_id
                .as_deref()
                .and_then(|id| ds.source(id))
                .and_then(|src| src.magnitude)
        };
        let traces = waveforms
            .par_iter()
            .map(|w| gen_waveform(w, magnitude(w), seed))
            .collect::<picker_bench::Result<Vec<_>>>()?;
        for (w, t) in waveforms.iter_mut().zip(&traces) {
            let locator = format!("traces/{}.pbt", stem(&w.waveform_id));
            ctx.out.bytes(&base.join(&locator), &t.encode())?;
            w.trace_ref = Some(locator);
        }
    }
    let dataset = Dataset::new(generated.dataset.sources().to_vec(), waveforms)?;
    ctx.out.bytes(&dataset_path, &dataset.to_metadata_bytes())?;

    let noise_ids: Vec<&str> = dataset
        .noise_waveforms()
        .map(|w| w.waveform_id.as_str())
        .collect();
    let truth = SynthTruth {
        centers: &generated.centers,
        source_blob: dataset
            .sources()
            .iter()
            .map(|x| x.source_id.as_str())
            .zip(generated.source_blob.iter().copied())
            .collect(),
        noise_blob: noise_ids
            .into_iter()
            .zip(generated.noise_blob.iter().copied())
            .collect(),
    };
    ctx.out.json(&ctx.path("synth_truth.json"), &truth)?;

    // The simulated picker's window outputs.
    let params = SynthTraceParams {
        seed: ctx.seed(&[stage::PICKER]),
        ..s.trace
    };
    let windows = dataset
        .waveforms()
        .par_iter()
        .map(|w| {
            let t = gen_trace(w, &params)?;
            Ok(slice_windows(
                &w.waveform_id,
                &t.values,
                s.window_samples,
                s.stride_samples,
            ))
        })
        .collect::<picker_bench::Result<Vec<Vec<WindowOutput>>>>()?;
    let windows: Vec<WindowOutput> = windows.into_iter().flatten().collect();
    let mut bytes = Vec::new();
    write_window_outputs(&mut bytes, &windows)?;
    ctx.out.bytes(&ctx.config.windows_path(), &bytes)?;

    let design = &ctx.config.design;
    let tables_dir = ctx.path(TABLES_DIR);
    for (k, m) in s.metrics.iter().enumerate() {
        let mut table = gen_metrics(design, &m.params, ctx.seed(&[stage::TABLES, k as u64]))?;
        table.metric_name = m.name.clone();
        ctx.out.json(
            &tables_dir.join(format!("{}.table.json", stem(&m.name))),
            &table,
        )?;
    }
    if let Some(f) = &s.functional {
        let tables = f
            .grid
            .iter()
            .enumerate()
            .map(|(g, &x)| {
                let mut t = gen_metrics(
                    design,
                    &f.params_at(x),
                    ctx.seed(&[stage::FUNCTIONAL, g as u64]),
                )?;
                t.metric_name = format!("{}@{x}", f.name);
                Ok(t)
            })
            .collect::<picker_bench::Result<Vec<_>>>()?;
        let ft = FunctionalTables {
            metric_name: f.name.clone(),
            grid: f.grid.clone(),
            tables,
        };
        ctx.out.json(
            &tables_dir.join(format!("{}.functional.json", stem(&f.name))),
            &ft,
        )?;
    }
    Ok(())
}

fn fit_clusters(ctx: &mut Ctx, dataset: &Dataset) -> Result<ClusterModel, CliError> {
    let c = &ctx.config.cluster;
    let model = ClusterModel::fit(dataset, c.k, ctx.seed(&[stage::CLUSTER]), &c.options())?;
    ctx.out.json(&ctx.path(CLUSTERS_FILE), &model)?;
    Ok(model)
}

pub fn cluster(ctx: &mut Ctx) -> Result<(), CliError> {
    let dataset = ctx.dataset()?;
    fit_clusters(ctx, &dataset).map(|_| ())
}

/// Uses `clusters.json` when present and fits it first otherwise.
pub fn split(ctx: &mut Ctx) -> Result<(), CliError> {
    let dataset = ctx.dataset()?;
    let model = if ctx.path(CLUSTERS_FILE).exists() {
        ctx.clusters()?
    } else {
        fit_clusters(ctx, &dataset)?
    };
    let plan = build_split_plan(
        &dataset,
        &model,
        &ctx.config.split,
        ctx.seed(&[stage::SPLIT]),
    )?;
    ctx.out.json(&ctx.path(SPLIT_FILE), &plan)
}

#[derive(Serialize)]
struct SetRow {
    quantity: usize,
    set_index: usize,
    cluster_ids: String,
    n_sources: usize,
    n_earthquake_waveforms: usize,
    n_noise_waveforms: usize,
}

pub fn sample_sets(ctx: &mut Ctx) -> Result<(), CliError> {
    let plan = ctx.split_plan()?;
    let design = &ctx.config.design;
    design.validate(Some(plan.training_clusters.len()))?;
    let per = ctx
        .config
        .sample_sets
        .sources_per_cluster
        .unwrap_or_else(|| plan.default_sources_per_cluster());
    let sets = sample_cluster_sets(
        &plan.training_clusters,
        design,
        per,
        &plan,
        ctx.seed(&[stage::SETS]),
    )?;
    let rows: Vec<SetRow> = sets
        .iter()
        .map(|s| SetRow {
            quantity: s.quantity,
            set_index: s.set_index,
            cluster_ids: s
                .cluster_ids
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(";"),
            n_sources: s.draws.iter().map(|d| d.source_ids.len()).sum(),
            n_earthquake_waveforms: s
                .draws
                .iter()
                .map(|d| d.earthquake_waveform_ids.len())
                .sum(),
            n_noise_waveforms: s.draws.iter().map(|d| d.noise_waveform_ids.len()).sum(),
        })
        .collect();
    ctx.out.json(&ctx.path("cluster_sets.json"), &sets)?;
    ctx.out.csv(&ctx.path("cluster_sets.csv"), &rows)
}
