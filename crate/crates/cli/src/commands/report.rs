//! Bundles fit, rank and score outputs into one summary plus plot-ready CSVs.

use picker_bench::statframe::{FitResult, Interval};
use serde::Serialize;
use serde_json::Value;

use super::analysis::{FunctionalFit, QqSet, RankReport};
use super::{Ctx, FIT_DIR, RANK_DIR, SCORES_FILE, THRESHOLD_FILE};
use crate::error::CliError;
use crate::io;

#[derive(Serialize)]
struct CellSummary {
    model: usize,
    quantity: usize,
    mean: f64,
    mean_ci: Interval,
    var_data: f64,
    var_data_ci: Interval,
    var_data_negative: bool,
    var_train: f64,
    var_train_ci: Interval,
}

#[derive(Serialize)]
struct RankSummary {
    quantity: usize,
    expected_ranks: Vec<f64>,
    method: picker_bench::ranksim::RankMethod,
}

#[derive(Serialize)]
struct MetricSummary {
    metric_name: String,
    grand_mean: f64,
    model_effects: Vec<f64>,
    quantity_effects: Vec<f64>,
    cells: Vec<CellSummary>,
    ranks: Option<Vec<RankSummary>>,
}

#[derive(Serialize)]
struct Summary {
    seed: u64,
    metrics: Vec<MetricSummary>,
    functional_metrics: Vec<String>,
    threshold: Option<Value>,
    scores: Option<Value>,
}

#[derive(Serialize)]
struct CurveRow<'a> {
    metric: &'a str,
    model: usize,
    quantity: usize,
    mean: f64,
    ci_low: f64,
    ci_high: f64,
}

#[derive(Serialize)]
struct VarianceRow<'a> {
    metric: &'a str,
    model: usize,
    quantity: usize,
    component: &'static str,
    estimate: f64,
    ci_low: f64,
    ci_high: f64,
    negative: bool,
}

#[derive(Serialize)]
struct RankRow<'a> {
    metric: &'a str,
    quantity: usize,
    model: usize,
    rank: usize,
    probability: f64,
}

#[derive(Serialize)]
struct QqRow<'a> {
    metric: &'a str,
    residual: &'static str,
    theoretical: f64,
    sample: f64,
}

#[derive(Serialize)]
struct FunctionalRow<'a> {
    metric: &'a str,
    grid: f64,
    model: usize,
    quantity: usize,
    mean: Option<f64>,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
}

fn optional_json(path: &std::path::Path) -> Result<Option<Value>, CliError> {
    if path.exists() {
        io::read_json(path).map(Some)
    } else {
        Ok(None)
    }
}

pub fn report(ctx: &mut Ctx) -> Result<(), CliError> {
    let fit_dir = ctx.path(FIT_DIR);
    let fits = io::files_with_suffix(&fit_dir, ".fit.json")?
        .iter()
        .map(|p| io::read_json::<FitResult>(p))
        .collect::<Result<Vec<_>, _>>()?;
    let curves = io::files_with_suffix(&fit_dir, ".curve.json")?
        .iter()
        .map(|p| io::read_json::<FunctionalFit>(p))
        .collect::<Result<Vec<_>, _>>()?;
    if fits.is_empty() && curves.is_empty() {
        return Err(CliError::missing(
            &fit_dir,
            "no fit outputs; run `fit` first",
        ));
    }
    let qqs = io::files_with_suffix(&fit_dir, ".qq.json")?
        .iter()
        .map(|p| io::read_json::<QqSet>(p))
        .collect::<Result<Vec<_>, _>>()?;
    let ranks = io::files_with_suffix(&ctx.path(RANK_DIR), ".rank.json")?
        .iter()
        .map(|p| io::read_json::<RankReport>(p))
        .collect::<Result<Vec<_>, _>>()?;

    let mut curve_rows = Vec::new();
    let mut variance_rows = Vec::new();
    let mut metrics = Vec::new();
    for f in &fits {
        let name = f.metric_name.as_str();
        let levels = &f.design.quantity_levels;
        let mut cells = Vec::new();
        for c in &f.cells {
            let q = levels[c.quantity];
            let v = &c.components;
            curve_rows.push(CurveRow {
                metric: name,
                model: c.model,
                quantity: q,
                mean: c.mean,
                ci_low: c.mean_ci.low,
                ci_high: c.mean_ci.high,
            });
            for (component, estimate, ci, negative) in [
                ("data", v.var_data, v.var_data_ci, v.var_data_negative),
                ("train", v.var_train, v.var_train_ci, false),
            ] {
                variance_rows.push(VarianceRow {
                    metric: name,
                    model: c.model,
                    quantity: q,
                    component,
                    estimate,
                    ci_low: ci.low,
                    ci_high: ci.high,
                    negative,
                });
            }
            cells.push(CellSummary {
                model: c.model,
                quantity: q,
                mean: c.mean,
                mean_ci: c.mean_ci,
                var_data: v.var_data,
                var_data_ci: v.var_data_ci,
                var_data_negative: v.var_data_negative,
                var_train: v.var_train,
                var_train_ci: v.var_train_ci,
            });
        }
        let rank = ranks.iter().find(|r| r.metric_name == f.metric_name);
        metrics.push(MetricSummary {
            metric_name: f.metric_name.clone(),
            grand_mean: f.effects.grand_mean,
            model_effects: f.effects.model_effects.clone(),
            quantity_effects: f.effects.quantity_effects.clone(),
            cells,
            ranks: rank.map(|r| {
                r.levels
                    .iter()
                    .map(|l| RankSummary {
                        quantity: l.quantity,
                        expected_ranks: l.expected_ranks.clone(),
                        method: l.matrix.method,
                    })
                    .collect()
            }),
        });
    }

    let rank_rows: Vec<RankRow> = ranks
        .iter()
        .flat_map(|r| {
            r.levels.iter().flat_map(move |l| {
                l.matrix.probs.iter().enumerate().flat_map(move |(m, row)| {
                    row.iter().enumerate().map(move |(k, &p)| RankRow {
                        metric: &r.metric_name,
                        quantity: l.quantity,
                        model: m,
                        rank: k + 1,
                        probability: p,
                    })
                })
            })
        })
        .collect();

    let qq_rows: Vec<QqRow> = qqs
        .iter()
        .flat_map(|q| {
            let train = q.train.iter().map(move |p| ("train", p));
            let data = q.data.iter().map(move |p| ("data", p));
            train.chain(data).map(move |(residual, p)| QqRow {
                metric: &q.metric_name,
                residual,
                theoretical: p.theoretical,
                sample: p.sample,
            })
        })
        .collect();

    let mut functional_rows = Vec::new();
    for c in &curves {
        let n_a = c.design.n_quantities();
        for point in &c.points {
            for (idx, cell) in point.cells.iter().enumerate() {
                functional_rows.push(FunctionalRow {
                    metric: &c.metric_name,
                    grid: point.grid_value,
                    model: idx / n_a,
                    quantity: c.design.quantity_levels[idx % n_a],
                    mean: cell.as_ref().map(|x| x.mean),
                    ci_low: cell.as_ref().map(|x| x.mean_ci.low),
                    ci_high: cell.as_ref().map(|x| x.mean_ci.high),
                });
            }
        }
    }

    let summary = Summary {
        seed: ctx.config.seed,
        metrics,
        functional_metrics: curves.iter().map(|c| c.metric_name.clone()).collect(),
        threshold: optional_json(&ctx.path(THRESHOLD_FILE))?
            .and_then(|v| v.get("threshold").cloned()),
        scores: optional_json(&ctx.path(SCORES_FILE))?,
    };
    let dir = ctx.path("report");
    ctx.out.json(&dir.join("summary.json"), &summary)?;
    ctx.out.csv(&dir.join("learning_curves.csv"), &curve_rows)?;
    ctx.out
        .csv(&dir.join("variance_components.csv"), &variance_rows)?;
    ctx.out.csv(&dir.join("rank_bars.csv"), &rank_rows)?;
    ctx.out.csv(&dir.join("qq_points.csv"), &qq_rows)?;
    ctx.out
        .csv(&dir.join("functional_curves.csv"), &functional_rows)
}
