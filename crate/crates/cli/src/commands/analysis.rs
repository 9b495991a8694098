use std::collections::BTreeMap;
use std::path::PathBuf;

use picker_bench::diagnostics::{
    epicentral_distance_km, feature_density, sp_intervals, window_features, GridSpec,
    WindowFeatureOptions,
};
use picker_bench::ranksim::{rank_table_level, RankOptions};
use picker_bench::seed;
use picker_bench::statframe::{functional_fit, qq_data, FitResult, PointFit, QqPoint};
use picker_bench::{fit as fit_table, DesignSpec, Direction, MetricTable, RankMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::prepare::FunctionalTables;
use super::{keyed, stage, stem, Ctx, FIT_DIR, RANK_DIR, TABLES_DIR};
use crate::error::CliError;
use crate::io;

fn scalar_tables(ctx: &Ctx) -> Result<BTreeMap<String, MetricTable>, CliError> {
    let mut paths = io::files_with_suffix(&ctx.path(TABLES_DIR), ".table.json")?;
    paths.extend(ctx.config.tables.iter().cloned());
    let loaded = paths
        .into_iter()
        .map(|p| io::read_json::<MetricTable>(&p).map(|t| (p, t)))
        .collect::<Result<Vec<_>, _>>()?;
    keyed(loaded, |t| &t.metric_name)
}

fn functional_tables(ctx: &Ctx) -> Result<BTreeMap<String, FunctionalTables>, CliError> {
    let loaded = io::files_with_suffix(&ctx.path(TABLES_DIR), ".functional.json")?
        .into_iter()
        .map(|p| io::read_json::<FunctionalTables>(&p).map(|t| (p, t)))
        .collect::<Result<Vec<_>, _>>()?;
    keyed(loaded, |t| &t.metric_name)
}

fn no_tables(ctx: &Ctx) -> CliError {
    CliError::missing(
        &ctx.path(TABLES_DIR),
        "no metric tables; run `synth` or list `tables`",
    )
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QqSet {
    pub metric_name: String,
    pub train: Vec<QqPoint>,
    pub data: Vec<QqPoint>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FunctionalFit {
    pub metric_name: String,
    pub design: DesignSpec,
    pub points: Vec<PointFit>,
}

pub fn fit_path(ctx: &Ctx, name: &str, kind: &str) -> PathBuf {
    ctx.path(FIT_DIR)
        .join(format!("{}.{kind}.json", stem(name)))
}

pub fn fit(ctx: &mut Ctx) -> Result<(), CliError> {
    let scalar = scalar_tables(ctx)?;
    let functional = functional_tables(ctx)?;
    if scalar.is_empty() && functional.is_empty() {
        return Err(no_tables(ctx));
    }
    let options = ctx.config.stats.options();
    let fits = scalar
        .par_iter()
        .map(|(_, t)| fit_table(t, &options))
        .collect::<picker_bench::Result<Vec<FitResult>>>()?;
    for f in &fits {
        let train: Vec<f64> = f.residuals_train.iter().map(|r| r.residual).collect();
        let data: Vec<f64> = f.residuals_data.iter().map(|r| r.residual).collect();
        let qq = QqSet {
            metric_name: f.metric_name.clone(),
            train: qq_data(&train)?,
            data: qq_data(&data)?,
        };
        ctx.out.json(&fit_path(ctx, &f.metric_name, "fit"), f)?;
        ctx.out.json(&fit_path(ctx, &f.metric_name, "qq"), &qq)?;
    }
    for (name, ft) in &functional {
        let points = functional_fit(&ft.tables, &ft.grid, &options)?;
        let design = match ft.tables.first() {
            Some(t) => t.design.clone(),
            None => continue,
        };
        let out = FunctionalFit {
            metric_name: name.clone(),
            design,
            points,
        };
        ctx.out.json(&fit_path(ctx, name, "curve"), &out)?;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RankLevel {
    pub quantity_index: usize,
    pub quantity: usize,
    pub matrix: RankMatrix,
    pub expected_ranks: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RankReport {
    pub metric_name: String,
    pub direction: Direction,
    pub levels: Vec<RankLevel>,
}

pub fn rank(ctx: &mut Ctx) -> Result<(), CliError> {
    let tables = scalar_tables(ctx)?;
    if tables.is_empty() {
        return Err(no_tables(ctx));
    }
    for (name, table) in &tables {
        let direction = ctx.config.rank.direction(name);
        let levels = table
            .design
            .quantity_levels
            .iter()
            .enumerate()
            .map(|(a, &q)| {
                let options = RankOptions {
                    seed: ctx.seed(&[stage::RANK, seed::hash_str(name), a as u64]),
                    mc_draws: ctx.config.rank.mc_draws,
                    force_monte_carlo: false,
                };
                let matrix = rank_table_level(table, a, direction, &options)?;
                Ok(RankLevel {
                    quantity_index: a,
                    quantity: q,
                    expected_ranks: matrix.expected_ranks(),
                    matrix,
                })
            })
            .collect::<picker_bench::Result<Vec<_>>>()?;
        let report = RankReport {
            metric_name: name.clone(),
            direction,
            levels,
        };
        ctx.out.json(
            &ctx.path(RANK_DIR).join(format!("{}.rank.json", stem(name))),
            &report,
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct DensityRow<'a> {
    feature: &'a str,
    group: &'a str,
    x: f64,
    density: f64,
}

#[derive(Serialize)]
struct FeatureRow<'a> {
    waveform_id: &'a str,
    group: &'a str,
    component: &'a str,
    argmax_frequency_hz: Option<f64>,
    log_peak_amplitude: Option<f64>,
    truncated: bool,
}

#[derive(Serialize)]
struct CurveInfo {
    feature: String,
    group: String,
    n_values: usize,
    bandwidth: f64,
    degenerate: bool,
}

#[derive(Serialize)]
struct DiagnoseSummary {
    grouping: &'static str,
    group_sizes: BTreeMap<String, usize>,
    n_earthquake: usize,
    fraction_with_s: f64,
    curves: Vec<CurveInfo>,
    /// Groups with fewer than two values get no density.
    skipped: Vec<String>,
    window_features: usize,
}

/// Per-feature values by group, ordered for reproducible output.
type Features = BTreeMap<String, BTreeMap<String, Vec<f64>>>;

fn push(features: &mut Features, feature: &str, group: &str, value: Option<f64>) {
    if let Some(v) = value.filter(|v| v.is_finite()) {
        features
            .entry(feature.to_string())
            .or_default()
            .entry(group.to_string())
            .or_default()
            .push(v);
    }
}

/// Density comparisons across splits (or clusters before splitting), plus
/// spectral features when the dataset references waveform files.
pub fn diagnose(ctx: &mut Ctx) -> Result<(), CliError> {
    let dataset = ctx.dataset()?;
    let model = ctx.clusters()?;
    let plan = if ctx.path(super::SPLIT_FILE).exists() {
        Some(ctx.split_plan()?)
    } else {
        None
    };
    let training = plan
        .as_ref()
        .map(|p| p.training_members())
        .unwrap_or_default();
    let group_of = |w: &picker_bench::WaveformRecord| -> Option<String> {
        match &plan {
            Some(p) => {
                let id = &w.waveform_id;
                if p.test_members.contains(id) {
                    Some("test".into())
                } else if p.validation_members.contains(id) {
                    Some("validation".into())
                } else if training.contains(id) {
                    Some("training".into())
                } else {
                    None
                }
            }
            None => model
                .cluster_of_waveform(w)
                .map(|c| format!("cluster_{c:02}")),
        }
    };

    let sp = sp_intervals(&dataset);
    let sp_by_id: BTreeMap<&str, f64> = sp
        .waveform_ids
        .iter()
        .map(String::as_str)
        .zip(sp.intervals_s.iter().copied())
        .collect();
    let mut features = Features::new();
    let mut group_sizes: BTreeMap<String, usize> = BTreeMap::new();
    let mut eq = Vec::new();
    for w in dataset.waveforms() {
        let Some(g) = group_of(w) else { continue };
        *group_sizes.entry(g.clone()).or_default() += 1;
        let Some(src) = w.source_id.as_deref().and_then(|id| dataset.source(id)) else {
            continue;
        };
        push(&mut features, "magnitude", &g, src.magnitude);
        push(&mut features, "depth_km", &g, src.depth_km);
        let d = epicentral_distance_km((src.latitude, src.longitude), w.station());
        push(&mut features, "distance_km", &g, Some(d));
        push(
            &mut features,
            "sp_interval_s",
            &g,
            sp_by_id.get(w.waveform_id.as_str()).copied(),
        );
        if w.trace_ref.is_some() {
            eq.push((w, g));
        }
    }

    let d = &ctx.config.diagnose;
    let wopts = WindowFeatureOptions {
        window_s: d.window_s,
        bin_width_hz: d.bin_width_hz,
        ..WindowFeatureOptions::default()
    };
    let base = ctx
        .config
        .dataset_path()
        .parent()
        .map(|p| p.to_path_buf())
        .unwrap_or_default();
    let computed = eq
        .par_iter()
        .map(|(w, _)| {
            let samples = dataset.load_trace(&base, w)?;
            let p = w.p_arrival_index.unwrap_or(0);
            window_features(&samples, p, w.sampling_rate_hz, &wopts)
        })
        .collect::<picker_bench::Result<Vec<_>>>()?;
    let mut feature_rows = Vec::new();
    for ((w, g), wf) in eq.iter().zip(&computed) {
        for c in &wf.components {
            push(
                &mut features,
                &format!("{}_argmax_hz", c.component),
                g,
                c.argmax_frequency_hz,
            );
            push(
                &mut features,
                &format!("{}_log_peak", c.component),
                g,
                c.log_peak_amplitude,
            );
            feature_rows.push(FeatureRow {
                waveform_id: &w.waveform_id,
                group: g,
                component: &c.component,
                argmax_frequency_hz: c.argmax_frequency_hz,
                log_peak_amplitude: c.log_peak_amplitude,
                truncated: wf.truncated,
            });
        }
    }

    let spec = GridSpec {
        n_points: d.grid_points,
        ..GridSpec::default()
    };
    let mut skipped = Vec::new();
    let mut curves = Vec::new();
    for (feature, groups) in &features {
        let usable: Vec<(String, Vec<f64>)> = groups
            .iter()
            .filter(|(g, v)| {
                let ok = v.len() >= 2;
                if !ok {
                    skipped.push(format!("{feature}/{g}"));
                }
                ok
            })
            .map(|(g, v)| (g.clone(), v.clone()))
            .collect();
        for (curve, (_, values)) in feature_density(feature, &usable, &spec)?
            .into_iter()
            .zip(&usable)
        {
            curves.push((curve, values.len()));
        }
    }
    let rows: Vec<DensityRow> = curves
        .iter()
        .flat_map(|(c, _)| {
            c.grid
                .iter()
                .zip(&c.density)
                .map(|(&x, &density)| DensityRow {
                    feature: &c.feature_name,
                    group: &c.group_id,
                    x,
                    density,
                })
        })
        .collect();
    let summary = DiagnoseSummary {
        grouping: if plan.is_some() { "split" } else { "cluster" },
        group_sizes,
        n_earthquake: sp.n_earthquake,
        fraction_with_s: sp.fraction_with_s,
        curves: curves
            .iter()
            .map(|(c, n)| CurveInfo {
                feature: c.feature_name.clone(),
                group: c.group_id.clone(),
                n_values: *n,
                bandwidth: c.bandwidth,
                degenerate: c.degenerate,
            })
            .collect(),
        skipped,
        window_features: computed.len(),
    };
    let dir = ctx.path("diagnostics");
    ctx.out.csv(&dir.join("densities.csv"), &rows)?;
    if !feature_rows.is_empty() {
        ctx.out
            .csv(&dir.join("window_features.csv"), &feature_rows)?;
    }
    ctx.out.json(&dir.join("summary.json"), &summary)
}
