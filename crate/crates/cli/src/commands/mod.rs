//! Subcommand implementations. Each reads its declared inputs from the run
//! directory and writes its outputs atomically.

mod analysis;
mod picking;
mod prepare;
mod report;

use std::collections::BTreeMap;
use std::path::PathBuf;

use picker_bench::model::load_metadata;
use picker_bench::seed;
use picker_bench::stratify::{ClusterModel, SplitPlan};
use picker_bench::Dataset;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{self, Outputs};

pub use analysis::{diagnose, fit, rank};
pub use picking::{aggregate, pick, score, threshold};
pub use prepare::{cluster, sample_sets, split, synth};
pub use report::report;

/// Stream identifiers mixed into the run seed, one per pipeline stage.
mod stage {
    pub const GEO: u64 = 1;
    pub const PICKER: u64 = 2;
    pub const WAVEFORMS: u64 = 3;
    pub const TABLES: u64 = 4;
    pub const FUNCTIONAL: u64 = 5;
    pub const CLUSTER: u64 = 6;
    pub const SPLIT: u64 = 7;
    pub const SETS: u64 = 8;
    pub const RANK: u64 = 9;
}

pub const CLUSTERS_FILE: &str = "clusters.json";
pub const SPLIT_FILE: &str = "split.json";
pub const TRACES_FILE: &str = "traces.ndjson";
pub const THRESHOLD_FILE: &str = "threshold.json";
pub const PICKS_FILE: &str = "picks.ndjson";
pub const SCORES_FILE: &str = "scores.json";
pub const TABLES_DIR: &str = "tables";
pub const FIT_DIR: &str = "fit";
pub const RANK_DIR: &str = "rank";

pub struct Ctx {
    pub config: RunConfig,
    pub out: Outputs,
}

impl Ctx {
    pub fn new(config: RunConfig) -> Self {
        Ctx {
            config,
            out: Outputs::default(),
        }
    }

    fn seed(&self, parts: &[u64]) -> u64 {
        seed::derive(self.config.seed, parts)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.config.path(name)
    }

    fn dataset(&self) -> Result<Dataset, CliError> {
        let p = self.config.dataset_path();
        if !p.exists() {
            return Err(CliError::missing(
                &p,
                "dataset not found; run `synth` or set `dataset`",
            ));
        }
        Ok(load_metadata(&p)?)
    }

    fn clusters(&self) -> Result<ClusterModel, CliError> {
        io::read_json(&self.path(CLUSTERS_FILE))
    }

    fn split_plan(&self) -> Result<SplitPlan, CliError> {
        io::read_json(&self.path(SPLIT_FILE))
    }
}

/// Reads every table, keyed by metric name. Two files naming the same
/// metric are an error rather than a silent overwrite.
fn keyed<T>(
    items: impl IntoIterator<Item = (PathBuf, T)>,
    name: impl Fn(&T) -> &str,
) -> Result<BTreeMap<String, T>, CliError> {
    let mut out = BTreeMap::new();
    for (path, item) in items {
        let key = name(&item).to_string();
        if out.insert(key.clone(), item).is_some() {
            return Err(CliError::config(format!(
                "metric {key:?} defined twice (last in {})",
                path.display()
            )));
        }
    }
    Ok(out)
}

/// File-name-safe form of a metric name.
fn stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
