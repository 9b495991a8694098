//! Run configuration. Every section except `seed` and `out_dir` has defaults,
//! and unknown keys are rejected so typos surface as errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use picker_bench::eval::DEFAULT_TP_HALF_WIDTH_S;
use picker_bench::metrics::{default_rmsr_grid, default_threshold_grid};
use picker_bench::ranksim::Direction;
use picker_bench::statframe::{FitOptions, MeanInterval};
use picker_bench::stratify::{KMeansInit, KMeansOptions, SplitConfig};
use picker_bench::synth::{GeoSpec, MetricParams, SynthTraceParams};
use picker_bench::DesignSpec;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Metadata NDJSON; defaults to `<out_dir>/dataset.ndjson`.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    /// Window-output NDJSON; defaults to `<out_dir>/windows.ndjson`.
    #[serde(default)]
    pub windows: Option<PathBuf>,
    /// Extra metric tables to fit and rank, beside those under `<out_dir>/tables`.
    #[serde(default)]
    pub tables: Vec<PathBuf>,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub cluster: ClusterSection,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub sample_sets: SampleSetsSection,
    #[serde(default)]
    pub design: DesignSpec,
    #[serde(default)]
    pub picking: PickingSection,
    #[serde(default)]
    pub stats: StatsSection,
    #[serde(default)]
    pub rank: RankSection,
    #[serde(default)]
    pub diagnose: DiagnoseSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub geo: GeoSpec,
    /// Seed fields inside are ignored; streams derive from the run seed.
    pub trace: SynthTraceParams,
    /// Layout of the simulated picker's window outputs.
    pub window_samples: usize,
    pub stride_samples: usize,
    /// Also write three-component waveforms for spectral diagnostics.
    pub write_traces: bool,
    pub metrics: Vec<NamedMetric>,
    pub functional: Option<FunctionalMetric>,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            geo: GeoSpec {
                n_clusters: 20,
                sources_per_cluster: 25,
                waveforms_per_source: 1,
                n_samples: 3000,
                ..GeoSpec::default()
            },
            trace: SynthTraceParams::default(),
            window_samples: 1500,
            stride_samples: 750,
            write_traces: false,
            metrics: vec![
                NamedMetric {
                    name: "f1".into(),
                    params: MetricParams::homogeneous(
                        0.8,
                        vec![0.02, -0.02, 0.0],
                        vec![-0.05, -0.025, 0.0, 0.025, 0.05],
                        4e-4,
                        1e-4,
                    ),
                },
                NamedMetric {
                    name: "noise_percent_correct".into(),
                    params: MetricParams::homogeneous(
                        0.9,
                        vec![0.01, 0.0, -0.01],
                        vec![-0.03, -0.01, 0.0, 0.01, 0.03],
                        2e-4,
                        2e-4,
                    ),
                },
            ],
            functional: Some(FunctionalMetric::default()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedMetric {
    pub name: String,
    pub params: MetricParams,
}

/// A metric curve over a grid whose mean and spread scale linearly with the
/// grid value, like cumulative RMSR over its cutoff.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FunctionalMetric {
    pub name: String,
    pub grid: Vec<f64>,
    pub mean_slope: f64,
    pub model_slopes: Vec<f64>,
    pub quantity_slopes: Vec<f64>,
    pub sd_data_slope: f64,
    pub sd_train_slope: f64,
}

impl Default for FunctionalMetric {
    fn default() -> Self {
        FunctionalMetric {
            name: "cumulative_rmsr".into(),
            grid: (1..=15).map(|k| k as f64 * 0.02).collect(),
            mean_slope: 0.5,
            model_slopes: vec![-0.05, 0.05, 0.0],
            quantity_slopes: vec![0.08, 0.04, 0.0, -0.04, -0.08],
            sd_data_slope: 0.03,
            sd_train_slope: 0.015,
        }
    }
}

impl FunctionalMetric {
    pub fn params_at(&self, x: f64) -> MetricParams {
        let scale = |v: &[f64]| v.iter().map(|s| s * x).collect();
        MetricParams::homogeneous(
            self.mean_slope * x,
            scale(&self.model_slopes),
            scale(&self.quantity_slopes),
            (self.sd_data_slope * x).powi(2),
            (self.sd_train_slope * x).powi(2),
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterSection {
    pub k: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub n_init: usize,
    pub init: KMeansInit,
}

impl Default for ClusterSection {
    fn default() -> Self {
        ClusterSection {
            k: 20,
            max_iter: 300,
            tol: 1e-6,
            n_init: 10,
            init: KMeansInit::PlusPlus,
        }
    }
}

impl ClusterSection {
    pub fn options(&self) -> KMeansOptions {
        KMeansOptions {
            max_iter: self.max_iter,
            tol: self.tol,
            n_init: self.n_init,
            init: self.init,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleSetsSection {
    /// Defaults to the split's `floor(training_fraction × s_min)`.
    pub sources_per_cluster: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PickingSection {
    pub tp_half_width_s: f64,
    pub threshold_grid: Vec<f64>,
    pub rmsr_grid: Vec<f64>,
    /// Skips validation-based selection when set.
    pub threshold: Option<f64>,
}

impl Default for PickingSection {
    fn default() -> Self {
        PickingSection {
            tp_half_width_s: DEFAULT_TP_HALF_WIDTH_S,
            threshold_grid: default_threshold_grid(),
            rmsr_grid: default_rmsr_grid(),
            threshold: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatsSection {
    pub ci_level: f64,
    pub mean_interval: MeanInterval,
}

impl Default for StatsSection {
    fn default() -> Self {
        let d = FitOptions::default();
        StatsSection {
            ci_level: d.ci_level,
            mean_interval: d.mean_interval,
        }
    }
}

impl StatsSection {
    pub fn options(&self) -> FitOptions {
        FitOptions {
            ci_level: self.ci_level,
            mean_interval: self.mean_interval,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RankSection {
    pub mc_draws: usize,
    /// Per-metric direction; metrics not listed are higher-is-better.
    pub directions: BTreeMap<String, Direction>,
}

impl Default for RankSection {
    fn default() -> Self {
        RankSection {
            mc_draws: 200_000,
            directions: BTreeMap::from([("cumulative_rmsr".to_string(), Direction::LowerIsBetter)]),
        }
    }
}

impl RankSection {
    pub fn direction(&self, metric: &str) -> Direction {
        self.directions
            .get(metric)
            .copied()
            .unwrap_or(Direction::HigherIsBetter)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnoseSection {
    pub grid_points: usize,
    pub window_s: f64,
    pub bin_width_hz: f64,
}

impl Default for DiagnoseSection {
    fn default() -> Self {
        DiagnoseSection {
            grid_points: 512,
            window_s: 10.0,
            bin_width_hz: 5.0,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Reads the optional config file, applies overrides and checks the
    /// result against the schema.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::missing(p, e))?;
                serde_json::from_str::<Value>(&text).map_err(|e| CliError::config(e.to_string()))?
            }
            None => Value::Object(Default::default()),
        };
        let obj = value
            .as_object_mut()
            .ok_or_else(|| CliError::config("config must be a JSON object"))?;
        if let Some(seed) = overrides.seed {
            obj.insert("seed".into(), seed.into());
        }
        if let Some(out) = &overrides.out_dir {
            obj.insert("out_dir".into(), out.to_string_lossy().into_owned().into());
        }
        let config: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner().to_string();
            CliError::schema(&path, inner)
        })?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        let explicit = self.dataset.iter().chain(&self.windows).chain(&self.tables);
        for p in explicit {
            if !p.exists() {
                return Err(CliError::MissingInput {
                    path: p.clone(),
                    message: "referenced by config but not found".into(),
                });
            }
        }
        if self.cluster.k == 0 {
            return Err(CliError::invalid_field("cluster.k", "must be positive"));
        }
        if self.synth.window_samples == 0 || self.synth.stride_samples == 0 {
            return Err(CliError::invalid_field(
                "synth",
                "window and stride must be positive",
            ));
        }
        Ok(())
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.dataset
            .clone()
            .unwrap_or_else(|| self.out_dir.join("dataset.ndjson"))
    }

    pub fn windows_path(&self) -> PathBuf {
        self.windows
            .clone()
            .unwrap_or_else(|| self.out_dir.join("windows.ndjson"))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_everything_but_seed_and_out() {
        let c: RunConfig = serde_json::from_str(r#"{"seed": 3, "out_dir": "x"}"#).unwrap();
        assert_eq!(c.design, DesignSpec::default());
        assert_eq!(c.cluster.k, 20);
        let err = serde_json::from_str::<RunConfig>(r#"{"out_dir": "x"}"#).unwrap_err();
        assert!(err.to_string().contains("missing field `seed`"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<RunConfig>(r#"{"seed": 1, "out_dir": "x", "sede": 2}"#)
            .unwrap_err();
        assert!(err.to_string().contains("sede"));
    }

    #[test]
    fn functional_params_scale_with_grid() {
        let f = FunctionalMetric::default();
        let p = f.params_at(0.2);
        assert!((p.grand_mean - 0.1).abs() < 1e-12);
        assert!((p.model_effects.iter().sum::<f64>()).abs() < 1e-12);
    }
}
