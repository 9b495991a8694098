use serde::{Deserialize, Serialize};

use super::windows::ProbabilityTrace;
use crate::error::{Error, Result};
use crate::model::{WaveformKind, WaveformRecord};

/// Half-width of the window around a labeled P arrival inside which a pick
/// counts as correct.
pub const DEFAULT_TP_HALF_WIDTH_S: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PickClass {
    Tp,
    Fp,
    Unclassified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pick {
    pub waveform_id: String,
    pub sample_index: usize,
    pub probability: f64,
    pub classification: PickClass,
    /// Predicted minus labeled arrival in seconds; set only for true positives.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformCounts {
    pub waveform_id: String,
    pub kind: WaveformKind,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub residuals: Vec<f64>,
}

impl WaveformCounts {
    /// A noise waveform is clean when nothing was picked on it.
    pub fn is_clean(&self) -> bool {
        self.kind == WaveformKind::Noise && self.fp == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedWaveform {
    pub counts: WaveformCounts,
    pub picks: Vec<Pick>,
}

/// One pick per maximal run of defined samples strictly above `threshold`,
/// placed at the run's maximum (earliest index on ties).
pub fn extract_picks(trace: &ProbabilityTrace, threshold: f64) -> Vec<Pick> {
    let mut picks = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in trace.values.iter().enumerate() {
        if trace.is_defined(i) && v > threshold {
            match best {
                Some((_, bv)) if bv >= v => {}
                _ => best = Some((i, v)),
            }
        } else if let Some((at, p)) = best.take() {
            picks.push(unclassified(&trace.waveform_id, at, p));
        }
    }
    if let Some((at, p)) = best {
        picks.push(unclassified(&trace.waveform_id, at, p));
    }
    picks
}

fn unclassified(waveform_id: &str, sample_index: usize, probability: f64) -> Pick {
    Pick {
        waveform_id: waveform_id.to_string(),
        sample_index,
        probability,
        classification: PickClass::Unclassified,
        residual_s: None,
    }
}

/// Classifies picks on an earthquake waveform. The pick nearest the label
/// within ±`tp_half_width_s` (earlier on ties) is the single true positive;
/// every other pick is a false positive.
pub fn classify_picks(
    waveform_id: &str,
    picks: &[Pick],
    labeled_p_index: Option<usize>,
    sampling_rate_hz: f64,
    tp_half_width_s: f64,
) -> Result<ClassifiedWaveform> {
    let label = labeled_p_index.ok_or_else(|| Error::InvalidRecord {
        id: waveform_id.to_string(),
        message: "earthquake waveform has no P label".into(),
    })?;
    if !(sampling_rate_hz > 0.0) {
        return Err(Error::invalid("sampling rate must be positive"));
    }
    let residual = |p: &Pick| (p.sample_index as f64 - label as f64) / sampling_rate_hz;

    let mut tp_at: Option<(usize, f64)> = None;
    for (k, p) in picks.iter().enumerate() {
        let r = residual(p);
        if r.abs() > tp_half_width_s {
            continue;
        }
        let better = match tp_at {
            None => true,
            Some((j, best)) => {
                r.abs() < best.abs()
                    || (r.abs() == best.abs() && p.sample_index < picks[j].sample_index)
            }
        };
        if better {
            tp_at = Some((k, r));
        }
    }

    let classified: Vec<Pick> = picks
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let mut p = p.clone();
            match tp_at {
                Some((j, r)) if j == k => {
                    p.classification = PickClass::Tp;
                    p.residual_s = Some(r);
                }
                _ => {
                    p.classification = PickClass::Fp;
                    p.residual_s = None;
                }
            }
            p
        })
        .collect();
    let tp = usize::from(tp_at.is_some());
    Ok(ClassifiedWaveform {
        counts: WaveformCounts {
            waveform_id: waveform_id.to_string(),
            kind: WaveformKind::Earthquake,
            tp,
            fp: picks.len() - tp,
            fn_: 1 - tp,
            residuals: tp_at.map(|(_, r)| vec![r]).unwrap_or_default(),
        },
        picks: classified,
    })
}

/// On noise waveforms every pick is a false positive.
pub fn classify_noise(waveform_id: &str, picks: &[Pick]) -> ClassifiedWaveform {
    ClassifiedWaveform {
        counts: WaveformCounts {
            waveform_id: waveform_id.to_string(),
            kind: WaveformKind::Noise,
            tp: 0,
            fp: picks.len(),
            fn_: 0,
            residuals: Vec::new(),
        },
        picks: picks
            .iter()
            .map(|p| Pick {
                classification: PickClass::Fp,
                residual_s: None,
                ..p.clone()
            })
            .collect(),
    }
}

/// Extracts and classifies picks for one waveform.
pub fn evaluate_waveform(
    record: &WaveformRecord,
    trace: &ProbabilityTrace,
    threshold: f64,
    tp_half_width_s: f64,
) -> Result<ClassifiedWaveform> {
    let picks = extract_picks(trace, threshold);
    match record.kind {
        WaveformKind::Earthquake => classify_picks(
            &record.waveform_id,
            &picks,
            record.p_arrival_index,
            record.sampling_rate_hz,
            tp_half_width_s,
        ),
        WaveformKind::Noise => Ok(classify_noise(&record.waveform_id, &picks)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    fn pick_at(i: usize) -> Pick {
        unclassified("w", i, 0.9)
    }

    /// Independent scan: collect maximal runs first, then take each argmax.
    fn brute_force_picks(trace: &ProbabilityTrace, threshold: f64) -> Vec<(usize, f64)> {
        let mut runs: Vec<Vec<usize>> = Vec::new();
        let mut current: Vec<usize> = Vec::new();
        for i in 0..trace.len() {
            if trace.coverage[i] > 0 && trace.values[i] > threshold {
                current.push(i);
            } else if !current.is_empty() {
                runs.push(std::mem::take(&mut current));
            }
        }
        if !current.is_empty() {
            runs.push(current);
        }
        runs.iter()
            .map(|run| {
                let max = run
                    .iter()
                    .map(|&i| trace.values[i])
                    .fold(f64::MIN, f64::max);
                let at = *run.iter().find(|&&i| trace.values[i] == max).unwrap();
                (at, max)
            })
            .collect()
    }

    #[test]
    fn empty_and_three_bumps() {
        let flat = ProbabilityTrace::dense("w", vec![0.2; 50]);
        assert!(extract_picks(&flat, 0.5).is_empty());
        let mut v = vec![0.1; 100];
        for (c, h) in [(10, 0.8), (40, 0.6), (80, 0.95)] {
            v[c - 1] = h - 0.1;
            v[c] = h;
            v[c + 1] = h - 0.05;
        }
        let picks = extract_picks(&ProbabilityTrace::dense("w", v), 0.5);
        assert_eq!(
            picks.iter().map(|p| p.sample_index).collect::<Vec<_>>(),
            vec![10, 40, 80]
        );
    }

    #[test]
    fn threshold_is_strict_and_ties_go_early() {
        let t = ProbabilityTrace::dense("w", vec![0.5, 0.7, 0.7, 0.6, 0.5]);
        let p = extract_picks(&t, 0.5);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].sample_index, 1);
        assert!(extract_picks(&t, 0.7).is_empty());
    }

    #[test]
    fn undefined_samples_break_runs() {
        let mut t = ProbabilityTrace::dense("w", vec![0.9; 6]);
        t.coverage[3] = 0;
        let p = extract_picks(&t, 0.5);
        assert_eq!(
            p.iter().map(|p| p.sample_index).collect::<Vec<_>>(),
            vec![0, 4]
        );
    }

    #[test]
    fn extraction_matches_run_scan_oracle() {
        let mut rng = seed::rng(21);
        for _ in 0..1000 {
            let n = rng.random_range(1..400);
            let mut t = ProbabilityTrace::dense(
                "w",
                (0..n)
                    .map(|_| (rng.random_range(0..20) as f64) / 19.0)
                    .collect(),
            );
            for c in t.coverage.iter_mut() {
                if rng.random_bool(0.05) {
                    *c = 0;
                }
            }
            let th = rng.random_range(0.05..0.95);
            let got: Vec<(usize, f64)> = extract_picks(&t, th)
                .iter()
                .map(|p| (p.sample_index, p.probability))
                .collect();
            assert_eq!(got, brute_force_picks(&t, th));
        }
    }

    #[test]
    fn classification_examples() {
        let c = classify_picks("w", &[pick_at(1000)], Some(1000), 100.0, 0.3).unwrap();
        assert_eq!((c.counts.tp, c.counts.fp, c.counts.fn_), (1, 0, 0));
        assert_eq!(c.counts.residuals, vec![0.0]);

        let c = classify_picks("w", &[], Some(1000), 100.0, 0.3).unwrap();
        assert_eq!((c.counts.tp, c.counts.fp, c.counts.fn_), (0, 0, 1));

        let c =
            classify_picks("w", &[pick_at(1020), pick_at(1500)], Some(1000), 100.0, 0.3).unwrap();
        assert_eq!((c.counts.tp, c.counts.fp, c.counts.fn_), (1, 1, 0));
        assert!((c.counts.residuals[0] - 0.2).abs() < 1e-12);
        assert_eq!(c.picks[0].classification, PickClass::Tp);
        assert_eq!(c.picks[1].classification, PickClass::Fp);

        assert!(classify_picks("w", &[], None, 100.0, 0.3).is_err());
    }

    #[test]
    fn nearest_wins_and_earlier_breaks_ties() {
        let c = classify_picks(
            "w",
            &[pick_at(990), pick_at(1010), pick_at(1025)],
            Some(1000),
            100.0,
            0.3,
        )
        .unwrap();
        assert_eq!(c.counts.tp, 1);
        assert_eq!(c.counts.fp, 2);
        assert!((c.counts.residuals[0] + 0.1).abs() < 1e-12);
        // Boundary: exactly 0.3 s away is inside.
        let c = classify_picks("w", &[pick_at(1030)], Some(1000), 100.0, 0.3).unwrap();
        assert_eq!(c.counts.tp, 1);
        let c = classify_picks("w", &[pick_at(1031)], Some(1000), 100.0, 0.3).unwrap();
        assert_eq!((c.counts.tp, c.counts.fp, c.counts.fn_), (0, 1, 1));
    }

    /// Independent window matcher over sample offsets.
    fn brute_force_match(
        picks: &[usize],
        label: usize,
        half_width_samples: usize,
    ) -> Option<usize> {
        let mut candidates: Vec<usize> = picks
            .iter()
            .copied()
            .filter(|&p| p.abs_diff(label) <= half_width_samples)
            .collect();
        candidates.sort_by_key(|&p| (p.abs_diff(label), p));
        candidates.first().copied()
    }

    #[test]
    fn classification_matches_window_oracle() {
        let mut rng = seed::rng(8);
        for _ in 0..1000 {
            let label = rng.random_range(100..900);
            let mut idx: Vec<usize> = (0..rng.random_range(0..6))
                .map(|_| rng.random_range(label - 60..label + 60))
                .collect();
            idx.sort_unstable();
            idx.dedup();
            let picks: Vec<Pick> = idx.iter().map(|&i| pick_at(i)).collect();
            let c = classify_picks("w", &picks, Some(label), 100.0, 0.3).unwrap();
            let expect = brute_force_match(&idx, label, 30);
            assert_eq!(c.counts.tp, usize::from(expect.is_some()));
            assert_eq!(c.counts.tp + c.counts.fn_, 1);
            assert_eq!(c.counts.fp, idx.len() - c.counts.tp);
            if let Some(e) = expect {
                let r = c.counts.residuals[0];
                assert!((r - (e as f64 - label as f64) / 100.0).abs() < 1e-12);
                assert!(r.abs() <= 0.3);
            }
        }
    }

    #[test]
    fn noise_classification() {
        let c = classify_noise("n", &[]);
        assert!(c.counts.is_clean());
        let c = classify_noise("n", &[pick_at(3), pick_at(9)]);
        assert_eq!(c.counts.fp, 2);
        assert!(!c.counts.is_clean());
    }

    #[test]
    fn raising_threshold_never_adds_exceeding_samples() {
        let mut rng = seed::rng(2);
        let t = ProbabilityTrace::dense("w", (0..500).map(|_| rng.random()).collect());
        let count = |th: f64| t.values.iter().filter(|&&v| v > th).count();
        let mut prev = usize::MAX;
        for k in 1..100 {
            let c = count(k as f64 / 100.0);
            assert!(c <= prev);
            prev = c;
        }
    }
}
