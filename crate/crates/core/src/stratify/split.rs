use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::kmeans::ClusterModel;
use crate::error::{Error, Result};
use crate::model::{Dataset, WaveformKind};
use crate::seed::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub n_test_north: usize,
    pub n_test_south: usize,
    pub noise_ratio: f64,
    pub validation_fraction: f64,
    pub training_fraction: f64,
    /// Overrides `floor(validation_fraction × s_min)` when set.
    pub validation_sources_per_cluster: Option<usize>,
    /// Take everything available instead of failing when a pool runs short.
    pub take_all: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            n_test_north: 4,
            n_test_south: 4,
            noise_ratio: 0.114,
            validation_fraction: 0.2,
            training_fraction: 0.8,
            validation_sources_per_cluster: None,
            take_all: false,
        }
    }
}

/// One source left in a training pool, with the waveforms that travel with it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSource {
    pub source_id: String,
    pub waveform_ids: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPool {
    pub sources: Vec<PoolSource>,
    pub noise_waveform_ids: Vec<String>,
}

impl TrainingPool {
    pub fn waveform_ids(&self) -> impl Iterator<Item = &String> {
        self.sources
            .iter()
            .flat_map(|s| s.waveform_ids.iter())
            .chain(self.noise_waveform_ids.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub config: SplitConfig,
    pub seed: u64,
    pub test_clusters_north: Vec<usize>,
    pub test_clusters_south: Vec<usize>,
    pub training_clusters: Vec<usize>,
    pub test_sources_north: Vec<String>,
    pub test_sources_south: Vec<String>,
    pub test_members: BTreeSet<String>,
    /// Smallest source count over the training clusters.
    pub min_training_sources: usize,
    pub validation_sources: BTreeMap<usize, Vec<String>>,
    pub validation_members: BTreeSet<String>,
    pub training_pools: BTreeMap<usize, TrainingPool>,
}

impl SplitPlan {
    /// `floor(training_fraction × s_min)`, the per-cluster training draw.
    pub fn default_sources_per_cluster(&self) -> usize {
        floor_fraction(self.config.training_fraction, self.min_training_sources)
    }

    pub fn validation_sources_per_cluster(&self) -> usize {
        self.validation_sources
            .values()
            .map(Vec::len)
            .min()
            .unwrap_or(0)
    }

    pub fn training_members(&self) -> BTreeSet<String> {
        self.training_pools
            .values()
            .flat_map(|p| p.waveform_ids().cloned())
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub(crate) fn floor_fraction(fraction: f64, count: usize) -> usize {
    // Guard against products such as 0.29 × 100 = 28.999999999999996.
    (fraction * count as f64 + 1e-9).floor() as usize
}

pub(crate) fn round_count(ratio: f64, count: usize) -> usize {
    (ratio * count as f64).round() as usize
}

/// Uniform draw of `k` items without replacement, returned in input order.
pub(crate) fn sample_in_order<T: Clone>(rng: &mut Rng, items: &[T], k: usize) -> Vec<T> {
    let mut picked = index::sample(rng, items.len(), k).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| items[i].clone()).collect()
}

struct ClusterContents {
    /// Source positions in dataset order.
    sources: Vec<usize>,
    noise: Vec<String>,
}

fn group_by_cluster(dataset: &Dataset, model: &ClusterModel) -> Result<Vec<ClusterContents>> {
    let mut groups: Vec<ClusterContents> = (0..model.k)
        .map(|_| ClusterContents {
            sources: Vec::new(),
            noise: Vec::new(),
        })
        .collect();
    for (pos, s) in dataset.sources().iter().enumerate() {
        let c = *model.source_clusters.get(&s.source_id).ok_or_else(|| {
            Error::invalid(format!("source {} not in cluster model", s.source_id))
        })?;
        groups[c].sources.push(pos);
    }
    for w in dataset.noise_waveforms() {
        let c = model
            .cluster_of_waveform(w)
            .expect("noise waveforms always resolve");
        groups[c].noise.push(w.waveform_id.clone());
    }
    Ok(groups)
}

pub(crate) fn available(
    pool_len: usize,
    wanted: usize,
    take_all: bool,
    cluster: usize,
    what: &str,
) -> Result<usize> {
    if wanted <= pool_len {
        Ok(wanted)
    } else if take_all {
        Ok(pool_len)
    } else {
        Err(Error::ClusterExhausted {
            cluster,
            message: format!("needs {wanted} {what}, has {pool_len}"),
        })
    }
}

/// Builds the leakage-aware train/validation/test partition.
///
/// Test clusters are the northernmost and southernmost centroids; the larger
/// region is subsampled to the smaller one's source count. Validation takes
/// the same number of sources from every training cluster. Waveforms always
/// follow their source, so no source straddles two splits.
pub fn build_split_plan(
    dataset: &Dataset,
    model: &ClusterModel,
    config: &SplitConfig,
    seed: u64,
) -> Result<SplitPlan> {
    let n_test = config.n_test_north + config.n_test_south;
    if n_test >= model.k {
        return Err(Error::invalid(format!(
            "{n_test} test clusters leave no training clusters out of {}",
            model.k
        )));
    }
    for (name, v) in [
        ("noise_ratio", config.noise_ratio),
        ("validation_fraction", config.validation_fraction),
        ("training_fraction", config.training_fraction),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::invalid(format!("{name} must be nonnegative")));
        }
    }

    let groups = group_by_cluster(dataset, model)?;
    let mut by_lat: Vec<usize> = (0..model.k).collect();
    by_lat.sort_by(|&a, &b| {
        model.centroids[b]
            .lat
            .total_cmp(&model.centroids[a].lat)
            .then(a.cmp(&b))
    });
    let mut north: Vec<usize> = by_lat[..config.n_test_north].to_vec();
    let mut south: Vec<usize> = by_lat[model.k - config.n_test_south..].to_vec();
    let mut training: Vec<usize> =
        by_lat[config.n_test_north..model.k - config.n_test_south].to_vec();
    north.sort_unstable();
    south.sort_unstable();
    training.sort_unstable();

    let mut rng = seed::rng(seed::derive(seed, &[0]));
    let region_sources = |clusters: &[usize]| -> Vec<usize> {
        let mut v: Vec<usize> = clusters
            .iter()
            .flat_map(|&c| groups[c].sources.iter().copied())
            .collect();
        v.sort_unstable();
        v
    };
    let north_pool = region_sources(&north);
    let south_pool = region_sources(&south);
    let balanced = north_pool.len().min(south_pool.len());

    let mut test_members = BTreeSet::new();
    let mut region_draw =
        |pool: &[usize], clusters: &[usize], rng: &mut Rng| -> Result<Vec<String>> {
            let chosen = sample_in_order(rng, pool, balanced);
            let mut eq_count = 0;
            for &pos in &chosen {
                for w in dataset.waveforms_of(pos) {
                    test_members.insert(w.waveform_id.clone());
                    eq_count += 1;
                }
            }
            let noise_pool: Vec<String> = clusters
                .iter()
                .flat_map(|&c| groups[c].noise.iter().cloned())
                .collect();
            let wanted = round_count(config.noise_ratio, eq_count);
            let cluster = clusters.first().copied().unwrap_or(0);
            let n = available(
                noise_pool.len(),
                wanted,
                config.take_all,
                cluster,
                "test noise waveforms",
            )?;
            test_members.extend(sample_in_order(rng, &noise_pool, n));
            Ok(chosen
                .iter()
                .map(|&p| dataset.sources()[p].source_id.clone())
                .collect())
        };
    let test_sources_north = region_draw(&north_pool, &north, &mut rng)?;
    let test_sources_south = region_draw(&south_pool, &south, &mut rng)?;

    let min_training_sources = training
        .iter()
        .map(|&c| groups[c].sources.len())
        .min()
        .unwrap_or(0);
    let per_cluster = config
        .validation_sources_per_cluster
        .unwrap_or_else(|| floor_fraction(config.validation_fraction, min_training_sources));

    let mut validation_sources = BTreeMap::new();
    let mut validation_members = BTreeSet::new();
    let mut training_pools = BTreeMap::new();
    for &c in &training {
        let mut rng = seed::rng(seed::derive(seed, &[1, c as u64]));
        let group = &groups[c];
        let n_src = available(
            group.sources.len(),
            per_cluster,
            config.take_all,
            c,
            "validation sources",
        )?;
        let chosen = sample_in_order(&mut rng, &group.sources, n_src);
        let chosen_set: BTreeSet<usize> = chosen.iter().copied().collect();
        let mut eq_count = 0;
        for &pos in &chosen {
            for w in dataset.waveforms_of(pos) {
                validation_members.insert(w.waveform_id.clone());
                eq_count += 1;
            }
        }
        let wanted = round_count(config.noise_ratio, eq_count);
        let n_noise = available(
            group.noise.len(),
            wanted,
            config.take_all,
            c,
            "validation noise waveforms",
        )?;
        let val_noise = sample_in_order(&mut rng, &group.noise, n_noise);
        let val_noise_set: BTreeSet<&String> = val_noise.iter().collect();

        let pool = TrainingPool {
            sources: group
                .sources
                .iter()
                .filter(|p| !chosen_set.contains(p))
                .map(|&pos| PoolSource {
                    source_id: dataset.sources()[pos].source_id.clone(),
                    waveform_ids: dataset
                        .waveforms_of(pos)
                        .filter(|w| w.kind == WaveformKind::Earthquake)
                        .map(|w| w.waveform_id.clone())
                        .collect(),
                })
                .collect(),
            noise_waveform_ids: group
                .noise
                .iter()
                .filter(|id| !val_noise_set.contains(id))
                .cloned()
                .collect(),
        };
        validation_members.extend(val_noise.iter().cloned());
        validation_sources.insert(
            c,
            chosen
                .iter()
                .map(|&p| dataset.sources()[p].source_id.clone())
                .collect(),
        );
        training_pools.insert(c, pool);
    }

    Ok(SplitPlan {
        config: config.clone(),
        seed,
        test_clusters_north: north,
        test_clusters_south: south,
        training_clusters: training,
        test_sources_north,
        test_sources_south,
        test_members,
        min_training_sources,
        validation_sources,
        validation_members,
        training_pools,
    })
}
