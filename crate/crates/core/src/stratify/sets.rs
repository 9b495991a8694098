use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::split::{available, round_count, sample_in_order, SplitPlan};
use crate::error::{Error, Result};
use crate::model::DesignSpec;
use crate::seed;

/// Data drawn from one cluster for one training budget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterDraw {
    pub cluster_id: usize,
    pub source_ids: Vec<String>,
    pub earthquake_waveform_ids: Vec<String>,
    pub noise_waveform_ids: Vec<String>,
}

/// A random selection of training clusters for one (quantity, repeat) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSet {
    pub quantity_index: usize,
    pub quantity: usize,
    pub set_index: usize,
    pub cluster_ids: Vec<usize>,
    pub draws: Vec<ClusterDraw>,
}

impl ClusterSet {
    pub fn waveform_ids(&self) -> impl Iterator<Item = &String> {
        self.draws.iter().flat_map(|d| {
            d.earthquake_waveform_ids
                .iter()
                .chain(d.noise_waveform_ids.iter())
        })
    }
}

/// Draws `n_cluster_sets` cluster selections for every quantity level.
///
/// Each (quantity, set) pair uses its own stream seeded from
/// `(seed, quantity_index, set_index)`, so any set can be regenerated alone.
pub fn sample_cluster_sets(
    training_cluster_ids: &[usize],
    design: &DesignSpec,
    sources_per_cluster: usize,
    plan: &SplitPlan,
    seed: u64,
) -> Result<Vec<ClusterSet>> {
    if let Some(&top) = design.quantity_levels.iter().max() {
        if top > training_cluster_ids.len() {
            return Err(Error::Design(format!(
                "quantity level {top} exceeds {} training clusters",
                training_cluster_ids.len()
            )));
        }
    }
    for &c in training_cluster_ids {
        let pool = plan
            .training_pools
            .get(&c)
            .ok_or_else(|| Error::invalid(format!("cluster {c} has no training pool")))?;
        if pool.sources.len() < sources_per_cluster {
            return Err(Error::ClusterExhausted {
                cluster: c,
                message: format!(
                    "needs {sources_per_cluster} training sources, pool has {}",
                    pool.sources.len()
                ),
            });
        }
    }

    let mut sets = Vec::with_capacity(design.n_quantities() * design.n_cluster_sets);
    for (a, &quantity) in design.quantity_levels.iter().enumerate() {
        for d in 0..design.n_cluster_sets {
            let mut rng = seed::rng(seed::derive(seed, &[a as u64, d as u64]));
            let mut cluster_ids: Vec<usize> =
                index::sample(&mut rng, training_cluster_ids.len(), quantity)
                    .into_iter()
                    .map(|i| training_cluster_ids[i])
                    .collect();
            cluster_ids.sort_unstable();

            let mut draws = Vec::with_capacity(quantity);
            for &c in &cluster_ids {
                let pool = &plan.training_pools[&c];
                let chosen = sample_in_order(&mut rng, &pool.sources, sources_per_cluster);
                let earthquake_waveform_ids: Vec<String> = chosen
                    .iter()
                    .flat_map(|s| s.waveform_ids.iter().cloned())
                    .collect();
                let wanted = round_count(plan.config.noise_ratio, earthquake_waveform_ids.len());
                let n_noise = available(
                    pool.noise_waveform_ids.len(),
                    wanted,
                    plan.config.take_all,
                    c,
                    "training noise waveforms",
                )?;
                draws.push(ClusterDraw {
                    cluster_id: c,
                    source_ids: chosen.into_iter().map(|s| s.source_id).collect(),
                    earthquake_waveform_ids,
                    noise_waveform_ids: sample_in_order(
                        &mut rng,
                        &pool.noise_waveform_ids,
                        n_noise,
                    ),
                });
            }
            sets.push(ClusterSet {
                quantity_index: a,
                quantity,
                set_index: d,
                cluster_ids,
                draws,
            });
        }
    }
    Ok(sets)
}
