//! Mixed-effects summary of a balanced metric table.
//!
//! Each metric value decomposes as
//! `y[m][a][d][i] = γ + μ[m] + α[a] + θ[m][a] + e_data[m][a][d] + e_train[m][a][d][i]`
//! with fixed model, quantity and interaction effects (sum-to-zero) and two
//! Gaussian random terms whose variances depend on the (m, a) cell. Within a
//! cell the design is a balanced one-way nested layout, so the variance
//! components have closed-form method-of-moments estimates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::model::{DesignSpec, MetricTable, ModelInstanceKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanInterval {
    /// Normal quantiles.
    Gaussian,
    /// Student-t quantiles with `n_cluster_sets − 1` degrees of freedom.
    StudentT,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub ci_level: f64,
    pub mean_interval: MeanInterval,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            ci_level: 0.90,
            mean_interval: MeanInterval::StudentT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    pub ms_within: f64,
    pub ms_between: f64,
    pub df_within: usize,
    pub df_between: usize,
    pub var_train: f64,
    pub var_train_ci: Interval,
    pub var_data: f64,
    pub var_data_ci: Interval,
    /// Satterthwaite degrees of freedom; absent when the estimate is not
    /// positive and the interval falls back to a normal approximation.
    pub var_data_df: Option<f64>,
    pub var_data_negative: bool,
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!(
            "confidence level {level} outside (0, 1)"
        )));
    }
    Ok(())
}

fn check_cell(cell: &[f64], n_sets: usize, n_inits: usize) -> Result<()> {
    if n_sets < 2 || n_inits < 2 {
        return Err(Error::Design(format!(
            "variance separation needs ≥2 cluster sets and ≥2 initializations, got {n_sets}×{n_inits}"
        )));
    }
    if cell.len() != n_sets * n_inits {
        return Err(Error::invalid(format!(
            "cell holds {} values, expected {n_sets}×{n_inits}",
            cell.len()
        )));
    }
    if cell.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in cell"));
    }
    Ok(())
}

struct MeanSquares {
    set_means: Vec<f64>,
    mean: f64,
    within: f64,
    between: f64,
}

fn mean_squares(cell: &[f64], n_sets: usize, n_inits: usize) -> MeanSquares {
    let set_means: Vec<f64> = cell
        .chunks_exact(n_inits)
        .map(|row| row.iter().sum::<f64>() / n_inits as f64)
        .collect();
    let mean = set_means.iter().sum::<f64>() / n_sets as f64;
    let ss_within: f64 = cell
        .chunks_exact(n_inits)
        .zip(&set_means)
        .map(|(row, m)| row.iter().map(|y| (y - m).powi(2)).sum::<f64>())
        .sum();
    let ss_sets: f64 = set_means.iter().map(|m| (m - mean).powi(2)).sum();
    MeanSquares {
        within: ss_within / (n_sets * (n_inits - 1)) as f64,
        between: n_inits as f64 * ss_sets / (n_sets - 1) as f64,
        set_means,
        mean,
    }
}

fn chi2_quantile(df: f64, p: f64) -> f64 {
    ChiSquared::new(df)
        .expect("degrees of freedom are positive")
        .inverse_cdf(p)
}

fn z_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Training and data-sampling variance for one cell of `n_sets × n_inits`
/// values, stored row-major by cluster set.
pub fn variance_components(
    cell: &[f64],
    n_sets: usize,
    n_inits: usize,
    level: f64,
) -> Result<VarianceComponents> {
    check_cell(cell, n_sets, n_inits)?;
    check_level(level)?;
    let ms = mean_squares(cell, n_sets, n_inits);
    let df_within = n_sets * (n_inits - 1);
    let df_between = n_sets - 1;
    let tail = (1.0 - level) / 2.0;

    let nu = df_within as f64;
    let var_train = ms.within;
    let var_train_ci = Interval {
        low: nu * var_train / chi2_quantile(nu, 1.0 - tail),
        high: nu * var_train / chi2_quantile(nu, tail),
    };

    let i = n_inits as f64;
    let var_data = (ms.between - ms.within) / i;
    let (var_data_ci, var_data_df) = if var_data > 0.0 {
        let denom = ms.between.powi(2) / df_between as f64 + ms.within.powi(2) / nu;
        let df = (ms.between - ms.within).powi(2) / denom;
        (
            Interval {
                low: df * var_data / chi2_quantile(df, 1.0 - tail),
                high: df * var_data / chi2_quantile(df, tail),
            },
            Some(df),
        )
    } else {
        let se = (2.0 * ms.between.powi(2) / df_between as f64 + 2.0 * ms.within.powi(2) / nu)
            .sqrt()
            / i;
        let z = z_quantile(1.0 - tail);
        (
            Interval {
                low: var_data - z * se,
                high: var_data + z * se,
            },
            None,
        )
    };

    Ok(VarianceComponents {
        ms_within: ms.within,
        ms_between: ms.between,
        df_within,
        df_between,
        var_train,
        var_train_ci,
        var_data,
        var_data_ci,
        var_data_df,
        var_data_negative: var_data < 0.0,
    })
}

/// Interval for a cell mean built from the spread of cluster-set means,
/// `ȳ ± q · sqrt(MS_between / (D·I))`.
pub fn cell_mean_ci(
    cell: &[f64],
    n_sets: usize,
    n_inits: usize,
    level: f64,
    kind: MeanInterval,
) -> Result<Interval> {
    check_cell(cell, n_sets, n_inits)?;
    check_level(level)?;
    let ms = mean_squares(cell, n_sets, n_inits);
    let p = 1.0 - (1.0 - level) / 2.0;
    let q = match kind {
        MeanInterval::Gaussian => z_quantile(p),
        MeanInterval::StudentT => StudentsT::new(0.0, 1.0, (n_sets - 1) as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(p),
    };
    let half = q * (ms.between / (n_sets * n_inits) as f64).sqrt();
    Ok(Interval {
        low: ms.mean - half,
        high: ms.mean + half,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedEffects {
    pub grand_mean: f64,
    pub model_effects: Vec<f64>,
    pub quantity_effects: Vec<f64>,
    /// `interactions[m][a]`.
    pub interactions: Vec<Vec<f64>>,
}

impl FixedEffects {
    /// Sum-to-zero decomposition of a complete `[m][a]` grid of cell means.
    pub fn from_cell_means(means: &[Vec<f64>]) -> Self {
        let n_m = means.len();
        let n_a = means[0].len();
        let grand_mean = means.iter().flatten().sum::<f64>() / (n_m * n_a) as f64;
        let model_effects: Vec<f64> = means
            .iter()
            .map(|row| row.iter().sum::<f64>() / n_a as f64 - grand_mean)
            .collect();
        let quantity_effects: Vec<f64> = (0..n_a)
            .map(|a| means.iter().map(|row| row[a]).sum::<f64>() / n_m as f64 - grand_mean)
            .collect();
        let interactions = means
            .iter()
            .enumerate()
            .map(|(m, row)| {
                row.iter()
                    .enumerate()
                    .map(|(a, y)| y - grand_mean - model_effects[m] - quantity_effects[a])
                    .collect()
            })
            .collect();
        FixedEffects {
            grand_mean,
            model_effects,
            quantity_effects,
            interactions,
        }
    }

    pub fn cell_mean(&self, model: usize, quantity: usize) -> f64 {
        self.grand_mean
            + self.model_effects[model]
            + self.quantity_effects[quantity]
            + self.interactions[model][quantity]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFit {
    pub model: usize,
    pub quantity: usize,
    pub mean: f64,
    pub mean_ci: Interval,
    pub components: VarianceComponents,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainResidual {
    pub key: ModelInstanceKey,
    /// `y − ȳ[m][a][d]`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataResidual {
    pub model: usize,
    pub quantity: usize,
    pub cluster_set: usize,
    /// `ȳ[m][a][d] − ȳ[m][a]`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub metric_name: String,
    pub design: DesignSpec,
    pub options: FitOptions,
    pub effects: FixedEffects,
    /// Cells in `(model, quantity)` order.
    pub cells: Vec<CellFit>,
    pub residuals_train: Vec<TrainResidual>,
    pub residuals_data: Vec<DataResidual>,
}

impl FitResult {
    pub fn cell(&self, model: usize, quantity: usize) -> &CellFit {
        &self.cells[model * self.design.n_quantities() + quantity]
    }
}

fn fit_cell(
    cell: &[f64],
    model: usize,
    quantity: usize,
    design: &DesignSpec,
    options: &FitOptions,
) -> Result<CellFit> {
    let (d, i) = (design.n_cluster_sets, design.n_inits);
    let components = variance_components(cell, d, i, options.ci_level)?;
    let mean_ci = cell_mean_ci(cell, d, i, options.ci_level, options.mean_interval)?;
    Ok(CellFit {
        model,
        quantity,
        mean: mean_squares(cell, d, i).mean,
        mean_ci,
        components,
    })
}

/// Fits the full model to a completely observed table.
pub fn fit(table: &MetricTable, options: &FitOptions) -> Result<FitResult> {
    table.validate()?;
    let design = &table.design;
    let (n_m, n_a, n_d, n_i) = (
        design.n_models,
        design.n_quantities(),
        design.n_cluster_sets,
        design.n_inits,
    );
    if n_d < 2 || n_i < 2 {
        return Err(Error::Design(
            "fit needs ≥2 cluster sets and ≥2 initializations".into(),
        ));
    }
    let mut cells = Vec::with_capacity(n_m * n_a);
    let mut residuals_train = Vec::with_capacity(design.n_instances());
    let mut residuals_data = Vec::with_capacity(n_m * n_a * n_d);
    for m in 0..n_m {
        for a in 0..n_a {
            let values = table.cell(m, a).ok_or_else(|| Error::IncompleteCell {
                metric: table.metric_name.clone(),
                model: m,
                quantity: a,
            })?;
            let cf = fit_cell(&values, m, a, design, options)?;
            let set_means = mean_squares(&values, n_d, n_i).set_means;
            for (d, row) in values.chunks_exact(n_i).enumerate() {
                residuals_data.push(DataResidual {
                    model: m,
                    quantity: a,
                    cluster_set: d,
                    residual: set_means[d] - cf.mean,
                });
                for (i, y) in row.iter().enumerate() {
                    residuals_train.push(TrainResidual {
                        key: ModelInstanceKey::new(m, a, d, i),
                        residual: y - set_means[d],
                    });
                }
            }
            cells.push(cf);
        }
    }
    let means: Vec<Vec<f64>> = (0..n_m)
        .map(|m| (0..n_a).map(|a| cells[m * n_a + a].mean).collect())
        .collect();
    Ok(FitResult {
        metric_name: table.metric_name.clone(),
        design: design.clone(),
        options: *options,
        effects: FixedEffects::from_cell_means(&means),
        cells,
        residuals_train,
        residuals_data,
    })
}

/// Fit at one point of a functional metric's domain. Cells with any missing
/// value are skipped; effects need every cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFit {
    pub grid_value: f64,
    pub effects: Option<FixedEffects>,
    pub cells: Vec<Option<CellFit>>,
}

/// Treats every grid point of a functional metric as its own scalar metric.
pub fn functional_fit(
    tables: &[MetricTable],
    grid: &[f64],
    options: &FitOptions,
) -> Result<Vec<PointFit>> {
    if tables.len() != grid.len() {
        return Err(Error::invalid(format!(
            "{} tables for {} grid points",
            tables.len(),
            grid.len()
        )));
    }
    if let Some(first) = tables.first() {
        if tables.iter().any(|t| t.design != first.design) {
            return Err(Error::Design(
                "functional tables use different designs".into(),
            ));
        }
    }
    tables
        .par_iter()
        .zip(grid.par_iter())
        .map(|(table, &g)| {
            table.validate()?;
            let design = &table.design;
            let mut cells = Vec::with_capacity(design.n_cells());
            for m in 0..design.n_models {
                for a in 0..design.n_quantities() {
                    cells.push(match table.cell(m, a) {
                        Some(values) => Some(fit_cell(&values, m, a, design, options)?),
                        None => None,
                    });
                }
            }
            let effects = if cells.iter().all(Option::is_some) {
                let n_a = design.n_quantities();
                let means: Vec<Vec<f64>> = (0..design.n_models)
                    .map(|m| {
                        (0..n_a)
                            .map(|a| cells[m * n_a + a].as_ref().unwrap().mean)
                            .collect()
                    })
                    .collect();
                Some(FixedEffects::from_cell_means(&means))
            } else {
                None
            };
            Ok(PointFit {
                grid_value: g,
                effects,
                cells,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QqPoint {
    pub theoretical: f64,
    pub sample: f64,
}

/// Sorted residuals against Gaussian quantiles at plotting positions
/// `(k − 0.5)/n`. The standard quantiles are rescaled so their sample
/// standard deviation matches the residuals'.
pub fn qq_data(residuals: &[f64]) -> Result<Vec<QqPoint>> {
    let n = residuals.len();
    if n < 3 {
        return Err(Error::invalid(format!(
            "QQ data needs ≥3 residuals, got {n}"
        )));
    }
    if residuals.iter().any(|r| !r.is_finite()) {
        return Err(Error::invalid("non-finite residual"));
    }
    let mut sorted = residuals.to_vec();
    sorted.sort_by(f64::total_cmp);
    let normal = Normal::standard();
    let q: Vec<f64> = (1..=n)
        .map(|k| normal.inverse_cdf((k as f64 - 0.5) / n as f64))
        .collect();
    let scale = sample_sd(&sorted) / sample_sd(&q);
    Ok(q.iter()
        .zip(sorted)
        .map(|(&t, s)| QqPoint {
            theoretical: t * scale,
            sample: s,
        })
        .collect())
}

fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn design(m: usize, a: usize, d: usize, i: usize) -> DesignSpec {
        DesignSpec {
            n_models: m,
            quantity_levels: (1..=a).collect(),
            n_cluster_sets: d,
            n_inits: i,
        }
    }

    fn random_table(seed: u64, d: &DesignSpec) -> MetricTable {
        let mut rng = seed::rng(seed);
        MetricTable::from_fn("r", d.clone(), |_| rng.random_range(0.0..1.0)).unwrap()
    }

    #[test]
    fn constant_table() {
        let d = design(3, 5, 12, 4);
        let t = MetricTable::from_fn("c", d, |_| 0.625).unwrap();
        let f = fit(&t, &FitOptions::default()).unwrap();
        assert_eq!(f.effects.grand_mean, 0.625);
        assert!(f.effects.model_effects.iter().all(|&x| x == 0.0));
        assert!(f.effects.quantity_effects.iter().all(|&x| x == 0.0));
        for c in &f.cells {
            assert_eq!(c.components.var_train, 0.0);
            assert_eq!(c.components.var_data, 0.0);
            assert_eq!(c.mean_ci.width(), 0.0);
            assert_eq!(c.components.var_train_ci.width(), 0.0);
            assert_eq!(c.components.var_data_ci.width(), 0.0);
            assert!(!c.components.var_data_negative);
        }
    }

    #[test]
    fn replicate_free_cell() {
        // Identical initializations within each set: no training variance.
        let set_means = [0.1, 0.4, 0.2, 0.7];
        let cell: Vec<f64> = set_means.iter().flat_map(|&m| [m; 3]).collect();
        let vc = variance_components(&cell, 4, 3, 0.9).unwrap();
        assert!(vc.var_train < 1e-30);
        let mean = set_means.iter().sum::<f64>() / 4.0;
        let s2 = set_means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / 3.0;
        assert!((vc.var_data - s2).abs() < 1e-15);
    }

    #[test]
    fn negative_data_variance_is_flagged() {
        // MSb = 0 and MSw = 4/2 = 2, so (MSb − MSw)/I = −1.
        let vc = variance_components(&[1.0, -1.0, 1.0, -1.0], 2, 2, 0.9).unwrap();
        assert_eq!(vc.ms_between, 0.0);
        assert_eq!(vc.var_train, 2.0);
        assert_eq!(vc.var_data, -1.0);
        assert!(vc.var_data_negative);
        assert!(vc.var_data_df.is_none());
        assert!(vc.var_data_ci.contains(-1.0));
    }

    #[test]
    fn degenerate_shapes_are_rejected() {
        assert!(variance_components(&[1.0, 2.0], 1, 2, 0.9).is_err());
        assert!(variance_components(&[1.0, 2.0], 2, 1, 0.9).is_err());
        assert!(variance_components(&[1.0, 2.0, 3.0], 2, 2, 0.9).is_err());
        assert!(cell_mean_ci(&[1.0; 4], 2, 2, 1.0, MeanInterval::Gaussian).is_err());
        let mut t = random_table(1, &design(2, 2, 3, 2));
        t.mark_missing(&ModelInstanceKey::new(1, 1, 2, 0));
        assert!(matches!(
            fit(&t, &FitOptions::default()),
            Err(Error::IncompleteCell {
                model: 1,
                quantity: 1,
                ..
            })
        ));
    }

    #[test]
    fn interval_symmetry_and_gaussian_vs_t() {
        let mut rng = seed::rng(5);
        for _ in 0..100 {
            let cell: Vec<f64> = (0..48).map(|_| rng.random()).collect();
            let ms = mean_squares(&cell, 12, 4);
            let z = cell_mean_ci(&cell, 12, 4, 0.9, MeanInterval::Gaussian).unwrap();
            let t = cell_mean_ci(&cell, 12, 4, 0.9, MeanInterval::StudentT).unwrap();
            assert!(((z.low + z.high) / 2.0 - ms.mean).abs() < 1e-12);
            assert!(((t.low + t.high) / 2.0 - ms.mean).abs() < 1e-12);
            assert!(t.width() > z.width());
        }
    }

    #[test]
    fn known_quantiles() {
        assert!((z_quantile(0.95) - 1.6448536269514722).abs() < 1e-9);
        // chi-square(36) 5% and 95% points.
        assert!((chi2_quantile(36.0, 0.05) - 23.268_606_6).abs() < 1e-5);
        assert!((chi2_quantile(36.0, 0.95) - 50.998_460_4).abs() < 1e-5);
    }

    #[test]
    fn decomposition_identity_and_constraints() {
        for s in 0..20 {
            let t = random_table(s, &design(3, 5, 4, 3));
            let f = fit(&t, &FitOptions::default()).unwrap();
            let e = &f.effects;
            assert!(e.model_effects.iter().sum::<f64>().abs() < 1e-12);
            assert!(e.quantity_effects.iter().sum::<f64>().abs() < 1e-12);
            for m in 0..3 {
                assert!(e.interactions[m].iter().sum::<f64>().abs() < 1e-12);
            }
            for a in 0..5 {
                assert!((0..3).map(|m| e.interactions[m][a]).sum::<f64>().abs() < 1e-12);
                for m in 0..3 {
                    assert!((e.cell_mean(m, a) - f.cell(m, a).mean).abs() < 1e-12);
                }
            }
            // Residual sums vanish within each (m,a,d) and each (m,a).
            for chunk in f.residuals_train.chunks(3) {
                assert!(chunk.iter().map(|r| r.residual).sum::<f64>().abs() < 1e-12);
            }
            for chunk in f.residuals_data.chunks(4) {
                assert!(chunk.iter().map(|r| r.residual).sum::<f64>().abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn sum_of_squares_composition(vals in proptest::collection::vec(-5.0f64..5.0, 12)) {
            let (d, i) = (4usize, 3usize);
            let ms = mean_squares(&vals, d, i);
            let n = (d * i) as f64;
            let total = vals.iter().map(|y| (y - ms.mean).powi(2)).sum::<f64>() / (n - 1.0);
            let composed = ((d - 1) as f64 * ms.between + (d * (i - 1)) as f64 * ms.within) / (n - 1.0);
            prop_assert!((total - composed).abs() < 1e-10);
        }

        #[test]
        fn shift_and_permutation_invariance(vals in proptest::collection::vec(-1.0f64..1.0, 12),
                                             shifts in proptest::collection::vec(-3.0f64..3.0, 4),
                                             c in -10.0f64..10.0) {
            let (d, i) = (4usize, 3usize);
            let base = variance_components(&vals, d, i, 0.9).unwrap();
            let per_set: Vec<f64> = vals.chunks(i).zip(&shifts).flat_map(|(row, s)| row.iter().map(move |y| y + s)).collect();
            let shifted = variance_components(&per_set, d, i, 0.9).unwrap();
            prop_assert!((shifted.var_train - base.var_train).abs() < 1e-9);
            let global: Vec<f64> = vals.iter().map(|y| y + c).collect();
            let g = variance_components(&global, d, i, 0.9).unwrap();
            prop_assert!((g.var_data - base.var_data).abs() < 1e-9);
            prop_assert!((g.var_train - base.var_train).abs() < 1e-9);
            let mut rows: Vec<Vec<f64>> = vals.chunks(i).map(|r| { let mut r = r.to_vec(); r.reverse(); r }).collect();
            rows.rotate_left(1);
            let permuted: Vec<f64> = rows.concat();
            let p = variance_components(&permuted, d, i, 0.9).unwrap();
            prop_assert!((p.var_data - base.var_data).abs() < 1e-12);
            prop_assert!((p.var_train - base.var_train).abs() < 1e-12);
        }
    }

    #[test]
    fn functional_reductions() {
        let d = design(2, 2, 3, 2);
        let t = random_table(9, &d);
        let opts = FitOptions::default();
        let single = functional_fit(std::slice::from_ref(&t), &[0.1], &opts).unwrap();
        let direct = fit(&t, &opts).unwrap();
        assert_eq!(single[0].effects.as_ref().unwrap(), &direct.effects);
        let cells: Vec<CellFit> = single[0].cells.iter().map(|c| c.clone().unwrap()).collect();
        assert_eq!(cells, direct.cells);

        let repeated =
            functional_fit(&[t.clone(), t.clone(), t.clone()], &[0.1, 0.2, 0.3], &opts).unwrap();
        assert!(repeated
            .windows(2)
            .all(|w| w[0].cells == w[1].cells && w[0].effects == w[1].effects));

        let mut masked = t.clone();
        masked.mark_missing(&ModelInstanceKey::new(0, 1, 0, 0));
        let pf = functional_fit(&[masked], &[0.1], &opts).unwrap();
        assert!(pf[0].effects.is_none());
        assert!(pf[0].cells[1].is_none());
        assert_eq!(pf[0].cells[0], Some(direct.cells[0].clone()));
    }

    #[test]
    fn qq_fixed_point_and_sorting() {
        let n = 25;
        let sigma = 0.37;
        let normal = Normal::standard();
        let res: Vec<f64> = (1..=n)
            .rev()
            .map(|k| sigma * normal.inverse_cdf((k as f64 - 0.5) / n as f64))
            .collect();
        let qq = qq_data(&res).unwrap();
        for p in &qq {
            assert!((p.theoretical - p.sample).abs() < 1e-9);
        }
        assert!(qq
            .windows(2)
            .all(|w| w[0].theoretical <= w[1].theoretical && w[0].sample <= w[1].sample));
        assert!(qq_data(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn qq_gaussian_correlation() {
        let mut rng = seed::rng(3);
        let res: Vec<f64> = (0..10_000)
            .map(|_| 0.02 * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        let qq = qq_data(&res).unwrap();
        let xs: Vec<f64> = qq.iter().map(|p| p.theoretical).collect();
        let ys: Vec<f64> = qq.iter().map(|p| p.sample).collect();
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        assert!(cov / (vx * vy).sqrt() > 0.999);
    }
}
