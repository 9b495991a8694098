//! Summary classification metrics, cumulative RMSR curves and validation
//! threshold selection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{evaluate_waveform, ProbabilityTrace, WaveformCounts};
use crate::model::{WaveformKind, WaveformRecord};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn_noise: usize,
    pub n_noise: usize,
}

impl AggregateCounts {
    pub fn add(&mut self, w: &WaveformCounts) {
        match w.kind {
            WaveformKind::Earthquake => {
                self.tp += w.tp;
                self.fp += w.fp;
                self.fn_ += w.fn_;
            }
            WaveformKind::Noise => {
                self.n_noise += 1;
                if w.is_clean() {
                    self.tn_noise += 1;
                }
            }
        }
    }

    pub fn from_waveforms<'a>(counts: impl IntoIterator<Item = &'a WaveformCounts>) -> Self {
        let mut acc = AggregateCounts::default();
        for c in counts {
            acc.add(c);
        }
        acc
    }
}

pub fn recall(c: &AggregateCounts) -> Result<f64> {
    let denom = c.tp + c.fn_;
    if denom == 0 {
        return Err(Error::UndefinedMetric("recall"));
    }
    Ok(c.tp as f64 / denom as f64)
}

pub fn f1(c: &AggregateCounts) -> Result<f64> {
    let denom = 2 * c.tp + c.fp + c.fn_;
    if denom == 0 {
        return Err(Error::UndefinedMetric("f1"));
    }
    Ok((2 * c.tp) as f64 / denom as f64)
}

pub fn noise_percent_correct(c: &AggregateCounts) -> Result<f64> {
    if c.n_noise == 0 {
        return Err(Error::UndefinedMetric("noise_percent_correct"));
    }
    Ok(c.tn_noise as f64 / c.n_noise as f64)
}

/// RMS of residuals restricted to `|r| ≤ cutoff`, traced over a cutoff grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeRmsrCurve {
    pub grid: Vec<f64>,
    /// `None` where no residual falls under the cutoff.
    pub values: Vec<Option<f64>>,
    pub counts: Vec<usize>,
}

/// Cutoffs 0.005, 0.010, …, 0.300 s.
pub fn default_rmsr_grid() -> Vec<f64> {
    (1..=60).map(|k| k as f64 / 200.0).collect()
}

/// Thresholds 0.01, 0.02, …, 0.99.
pub fn default_threshold_grid() -> Vec<f64> {
    (1..=99).map(|k| k as f64 / 100.0).collect()
}

pub fn cumulative_rmsr(residuals: &[f64], grid: &[f64]) -> Result<CumulativeRmsrCurve> {
    if grid.iter().any(|g| !(g.is_finite() && *g > 0.0)) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(
            "RMSR grid must be positive and strictly ascending",
        ));
    }
    let mut sq: Vec<(f64, f64)> = residuals
        .iter()
        .filter(|r| r.is_finite())
        .map(|r| (r.abs(), r * r))
        .collect();
    sq.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut values = Vec::with_capacity(grid.len());
    let mut counts = Vec::with_capacity(grid.len());
    let mut taken = 0;
    let mut sum = 0.0;
    let mut prev: Option<f64> = None;
    for &cutoff in grid {
        while taken < sq.len() && sq[taken].0 <= cutoff {
            sum += sq[taken].1;
            taken += 1;
        }
        counts.push(taken);
        if taken == 0 {
            values.push(None);
            continue;
        }
        let largest = sq[taken - 1].0;
        // Exact arithmetic guarantees both bounds; rounding may not.
        let mut v = (sum / taken as f64).sqrt().min(largest);
        if let Some(p) = prev {
            v = v.max(p);
        }
        prev = Some(v);
        values.push(Some(v));
    }
    Ok(CumulativeRmsrCurve {
        grid: grid.to_vec(),
        values,
        counts,
    })
}

/// A trace paired with the labels needed to score it.
#[derive(Debug, Clone)]
pub struct LabeledTrace {
    pub record: WaveformRecord,
    pub trace: ProbabilityTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdScore {
    pub threshold: f64,
    pub f1: Option<f64>,
    pub noise_percent_correct: Option<f64>,
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSelection {
    pub threshold: f64,
    pub objective: f64,
    pub scan: Vec<ThresholdScore>,
}

pub fn score_threshold(
    validation: &[LabeledTrace],
    threshold: f64,
    tp_half_width_s: f64,
) -> Result<ThresholdScore> {
    let mut counts = AggregateCounts::default();
    for lt in validation {
        let c = evaluate_waveform(&lt.record, &lt.trace, threshold, tp_half_width_s)?;
        counts.add(&c.counts);
    }
    let f1 = f1(&counts).ok();
    let noise = noise_percent_correct(&counts).ok();
    Ok(ThresholdScore {
        threshold,
        f1,
        noise_percent_correct: noise,
        objective: f1.zip(noise).map(|(a, b)| 0.5 * (a + b)),
    })
}

/// Picks the grid threshold maximizing mean(F1, noise % correct) over the
/// validation traces; the lowest threshold wins ties.
pub fn select_threshold(
    validation: &[LabeledTrace],
    grid: &[f64],
    tp_half_width_s: f64,
) -> Result<ThresholdSelection> {
    let has = |k| validation.iter().any(|lt| lt.record.kind == k);
    if !has(WaveformKind::Earthquake) || !has(WaveformKind::Noise) {
        return Err(Error::invalid(
            "threshold selection needs earthquake and noise validation waveforms",
        ));
    }
    let scan: Vec<ThresholdScore> = grid
        .par_iter()
        .map(|&t| score_threshold(validation, t, tp_half_width_s))
        .collect::<Result<_>>()?;
    let mut best: Option<(f64, f64)> = None;
    for s in &scan {
        if let Some(obj) = s.objective {
            if best.is_none_or(|(_, b)| obj > b) {
                best = Some((s.threshold, obj));
            }
        }
    }
    let (threshold, objective) = best.ok_or(Error::UndefinedMetric("threshold objective"))?;
    Ok(ThresholdSelection {
        threshold,
        objective,
        scan,
    })
}
