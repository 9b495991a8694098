//! Rank probabilities from joint resampling of training initializations.
//!
//! For a fixed training set, every model has `I` trained instances. An
//! outcome picks one instance per model, so there are `I^M` equally likely
//! outcomes per set. Ranks are averaged over outcomes and over sets.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MetricTable;
use crate::seed;

/// Outcome counts above this use Monte Carlo instead of enumeration.
pub const MAX_EXACT_OUTCOMES: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherIsBetter,
    LowerIsBetter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMethod {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankOptions {
    pub seed: u64,
    /// Draws per training set when enumeration is too large.
    pub mc_draws: usize,
    /// Forces sampling even when enumeration is feasible.
    #[serde(default)]
    pub force_monte_carlo: bool,
}

impl Default for RankOptions {
    fn default() -> Self {
        RankOptions {
            seed: 0,
            mc_draws: 200_000,
            force_monte_carlo: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankMatrix {
    /// `probs[m][r]`: probability that model `m` takes rank `r` (0 is best).
    pub probs: Vec<Vec<f64>>,
    pub direction: Direction,
    pub outcomes_per_set: u64,
    pub method: RankMethod,
}

impl RankMatrix {
    pub fn n_models(&self) -> usize {
        self.probs.len()
    }

    /// Expected rank of each model, counting from 1.
    pub fn expected_ranks(&self) -> Vec<f64> {
        self.probs
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(r, p)| (r + 1) as f64 * p)
                    .sum()
            })
            .collect()
    }
}

/// Adds one outcome's rank mass to `acc`. Tied models split the ranks they
/// jointly occupy evenly.
fn accumulate(values: &[f64], direction: Direction, weight: f64, acc: &mut [Vec<f64>]) {
    for (m, &v) in values.iter().enumerate() {
        let mut better = 0;
        let mut tied = 0;
        for &w in values {
            if w == v {
                tied += 1;
            } else if match direction {
                Direction::HigherIsBetter => w > v,
                Direction::LowerIsBetter => w < v,
            } {
                better += 1;
            }
        }
        let share = weight / tied as f64;
        for slot in &mut acc[m][better..better + tied] {
            *slot += share;
        }
    }
}

fn check_scores(scores: &[Vec<Vec<f64>>]) -> Result<(usize, usize)> {
    let first = scores
        .first()
        .ok_or_else(|| Error::invalid("no training sets to rank"))?;
    let n_models = first.len();
    if n_models < 2 {
        return Err(Error::invalid("ranking needs at least two models"));
    }
    let n_inits = first[0].len();
    if n_inits == 0 {
        return Err(Error::invalid("ranking needs at least one initialization"));
    }
    for set in scores {
        if set.len() != n_models || set.iter().any(|row| row.len() != n_inits) {
            return Err(Error::invalid("ragged score array"));
        }
        if set.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite score"));
        }
    }
    Ok((n_models, n_inits))
}

fn exact_set(set: &[Vec<f64>], direction: Direction, n_outcomes: u64) -> Vec<Vec<f64>> {
    let n_models = set.len();
    let n_inits = set[0].len();
    let mut acc = vec![vec![0.0; n_models]; n_models];
    let mut choice = vec![0usize; n_models];
    let mut values: Vec<f64> = set.iter().map(|row| row[0]).collect();
    let weight = 1.0 / n_outcomes as f64;
    loop {
        accumulate(&values, direction, weight, &mut acc);
        // Odometer step over instance choices.
        let mut m = 0;
        loop {
            if m == n_models {
                return acc;
            }
            choice[m] += 1;
            if choice[m] < n_inits {
                values[m] = set[m][choice[m]];
                break;
            }
            choice[m] = 0;
            values[m] = set[m][0];
            m += 1;
        }
    }
}

fn sampled_set(
    set: &[Vec<f64>],
    direction: Direction,
    draws: usize,
    rng: &mut seed::Rng,
) -> Vec<Vec<f64>> {
    let n_models = set.len();
    let n_inits = set[0].len();
    let mut acc = vec![vec![0.0; n_models]; n_models];
    let mut values = vec![0.0; n_models];
    let weight = 1.0 / draws as f64;
    for _ in 0..draws {
        for (v, row) in values.iter_mut().zip(set) {
            *v = row[rng.random_range(0..n_inits)];
        }
        accumulate(&values, direction, weight, &mut acc);
    }
    acc
}

/// Rank probabilities for `scores[d][m][i]`.
pub fn rank_probabilities(
    scores: &[Vec<Vec<f64>>],
    direction: Direction,
    options: &RankOptions,
) -> Result<RankMatrix> {
    let (n_models, n_inits) = check_scores(scores)?;
    let outcomes = (n_inits as u64).checked_pow(n_models as u32);
    let exact = !options.force_monte_carlo && outcomes.is_some_and(|n| n <= MAX_EXACT_OUTCOMES);
    if !exact && options.mc_draws == 0 {
        return Err(Error::invalid("Monte Carlo ranking needs mc_draws > 0"));
    }
    let per_set: Vec<Vec<Vec<f64>>> = scores
        .par_iter()
        .enumerate()
        .map(|(d, set)| {
            if exact {
                exact_set(set, direction, outcomes.unwrap())
            } else {
                let mut rng = seed::rng(seed::derive(options.seed, &[d as u64]));
                sampled_set(set, direction, options.mc_draws, &mut rng)
            }
        })
        .collect();
    let mut probs = vec![vec![0.0; n_models]; n_models];
    for acc in &per_set {
        for (row, add) in probs.iter_mut().zip(acc) {
            for (p, a) in row.iter_mut().zip(add) {
                *p += a / scores.len() as f64;
            }
        }
    }
    Ok(RankMatrix {
        probs,
        direction,
        outcomes_per_set: outcomes.unwrap_or(u64::MAX),
        method: if exact {
            RankMethod::Exact
        } else {
            RankMethod::MonteCarlo
        },
    })
}

/// Rank probabilities at one quantity level of a complete table.
pub fn rank_table_level(
    table: &MetricTable,
    quantity: usize,
    direction: Direction,
    options: &RankOptions,
) -> Result<RankMatrix> {
    table.validate()?;
    if quantity >= table.design.n_quantities() {
        return Err(Error::invalid(format!(
            "quantity index {quantity} out of range"
        )));
    }
    let scores = (0..table.design.n_cluster_sets)
        .map(|d| {
            table
                .slice(quantity, d)
                .ok_or_else(|| Error::IncompleteCell {
                    metric: table.metric_name.clone(),
                    model: usize::MAX,
                    quantity,
                })
        })
        .collect::<Result<Vec<_>>>()?;
    rank_probabilities(&scores, direction, options)
}
