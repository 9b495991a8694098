//! Synthetic traces through windowing, picking and scoring.

use picker_bench::eval::{
    aggregate_windows, evaluate_waveform, slice_windows, DEFAULT_TP_HALF_WIDTH_S,
};
use picker_bench::metrics::{
    default_threshold_grid, f1, noise_percent_correct, recall, select_threshold, AggregateCounts,
    LabeledTrace,
};
use picker_bench::model::WaveformRecord;
use picker_bench::seed;
use picker_bench::synth::{gen_geo_dataset, gen_trace, GeoSpec, SynthTraceParams};
use rand::Rng;

fn labeled(records: &[WaveformRecord], params: &SynthTraceParams) -> Vec<LabeledTrace> {
    records
        .iter()
        .map(|r| LabeledTrace {
            record: r.clone(),
            trace: gen_trace(r, params).unwrap(),
        })
        .collect()
}

#[test]
fn recall_tracks_miss_rate() {
    let spec = GeoSpec {
        n_clusters: 10,
        sources_per_cluster: 100,
        waveforms_per_source: 2,
        ..GeoSpec::default()
    };
    let ds = gen_geo_dataset(&spec, 1).unwrap().dataset;
    let params = SynthTraceParams {
        miss_rate: 0.2,
        pick_error_sd_s: 0.05,
        false_bump_rate: 0.1,
        seed: 42,
        ..SynthTraceParams::default()
    };
    let mut counts = AggregateCounts::default();
    let mut n_eq = 0;
    for lt in labeled(ds.waveforms(), &params) {
        n_eq += lt.record.is_earthquake() as usize;
        let c = evaluate_waveform(&lt.record, &lt.trace, 0.5, DEFAULT_TP_HALF_WIDTH_S).unwrap();
        counts.add(&c.counts);
    }
    let r = recall(&counts).unwrap();
    let se = (0.8 * 0.2 / n_eq as f64).sqrt();
    assert!((r - 0.8).abs() < 3.0 * se, "recall {r}, se {se}");
    for v in [
        r,
        f1(&counts).unwrap(),
        noise_percent_correct(&counts).unwrap(),
    ] {
        assert!((0.0..=1.0).contains(&v));
    }
}

#[test]
fn windowed_aggregation_preserves_picks() {
    let rec = WaveformRecord::earthquake("w", "s", (0.0, 0.0), 1234, 6000);
    let params = SynthTraceParams {
        miss_rate: 0.0,
        pick_error_sd_s: 0.0,
        false_bump_rate: 0.0,
        ..SynthTraceParams::default()
    };
    let dense = gen_trace(&rec, &params).unwrap();
    let windows = slice_windows("w", &dense.values, 3000, 200);
    assert_eq!(windows.len(), 16);
    let rebuilt = aggregate_windows(&windows, 6000).unwrap();
    for (a, b) in rebuilt.values.iter().zip(&dense.values) {
        assert!((a - b).abs() < 1e-6);
    }
    let out = evaluate_waveform(&rec, &rebuilt, 0.5, DEFAULT_TP_HALF_WIDTH_S).unwrap();
    assert_eq!((out.counts.tp, out.counts.fp, out.counts.fn_), (1, 0, 0));
    assert_eq!(out.counts.residuals, vec![0.0]);
}

/// Exhaustive grid search with independently written picking and matching.
fn oracle_threshold(validation: &[LabeledTrace], grid: &[f64]) -> (f64, f64) {
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for &t in grid {
        let (mut tp, mut fp, mut fn_, mut tn, mut n_noise) =
            (0usize, 0usize, 0usize, 0usize, 0usize);
        for lt in validation {
            let v = &lt.trace.values;
            let mut picks = Vec::new();
            let mut i = 0;
            while i < v.len() {
                if v[i] > t {
                    let start = i;
                    while i < v.len() && v[i] > t {
                        i += 1;
                    }
                    let top = (start..i).fold(start, |b, j| if v[j] > v[b] { j } else { b });
                    picks.push(top);
                } else {
                    i += 1;
                }
            }
            match lt.record.p_arrival_index {
                Some(p) => {
                    let rate = lt.record.sampling_rate_hz;
                    let hit = picks
                        .iter()
                        .any(|&k| ((k as f64 - p as f64) / rate).abs() <= 0.3);
                    tp += hit as usize;
                    fn_ += (!hit) as usize;
                    fp += picks.len() - hit as usize;
                }
                None => {
                    // Noise picks only enter the noise score.
                    n_noise += 1;
                    tn += picks.is_empty() as usize;
                }
            }
        }
        let f1 = if tp + fp + fn_ == 0 {
            continue;
        } else {
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
        };
        let obj = 0.5 * (f1 + tn as f64 / n_noise as f64);
        if obj > best.1 {
            best = (t, obj);
        }
    }
    best
}

#[test]
fn threshold_selection_matches_exhaustive_scan() {
    let mut rng = seed::rng(77);
    let grid = default_threshold_grid();
    for trial in 0..20u64 {
        let spec = GeoSpec {
            n_clusters: 2,
            sources_per_cluster: rng.random_range(5..15),
            waveforms_per_source: 2,
            n_samples: 3000,
            ..GeoSpec::default()
        };
        let ds = gen_geo_dataset(&spec, trial).unwrap().dataset;
        let params = SynthTraceParams {
            bump_height: rng.random_range(0.3..1.0),
            background_level: rng.random_range(0.0..0.2),
            pick_error_sd_s: rng.random_range(0.0..0.3),
            miss_rate: rng.random_range(0.0..0.4),
            false_bump_rate: rng.random_range(0.0..1.0),
            seed: trial,
            ..SynthTraceParams::default()
        };
        let val = labeled(ds.waveforms(), &params);
        let sel = select_threshold(&val, &grid, DEFAULT_TP_HALF_WIDTH_S).unwrap();
        let (t, obj) = oracle_threshold(&val, &grid);
        assert_eq!(sel.threshold, t, "trial {trial}");
        assert!((sel.objective - obj).abs() < 1e-12);
        for s in &sel.scan {
            if let Some(o) = s.objective {
                assert!(o <= sel.objective);
            }
        }
    }
}

#[test]
fn separable_set_picks_lowest_clean_threshold() {
    let spec = GeoSpec {
        n_clusters: 2,
        sources_per_cluster: 10,
        waveforms_per_source: 2,
        n_samples: 3000,
        ..GeoSpec::default()
    };
    let ds = gen_geo_dataset(&spec, 3).unwrap().dataset;
    let params = SynthTraceParams {
        bump_height: 0.9,
        background_level: 0.05,
        pick_error_sd_s: 0.0,
        miss_rate: 0.0,
        false_bump_rate: 0.0,
        seed: 3,
        ..SynthTraceParams::default()
    };
    let val = labeled(ds.waveforms(), &params);
    let grid = default_threshold_grid();
    let sel = select_threshold(&val, &grid, DEFAULT_TP_HALF_WIDTH_S).unwrap();
    assert_eq!(sel.objective, 1.0);
    // Picks need values strictly above the threshold, so a threshold equal
    // to the background is already clean.
    assert_eq!(sel.threshold, 0.05);
    assert_eq!(oracle_threshold(&val, &grid).0, 0.05);
    let peak = val
        .iter()
        .flat_map(|lt| lt.trace.values.iter().copied())
        .fold(0.0, f64::max);
    for s in &sel.scan {
        let optimal = s.objective == Some(1.0);
        assert_eq!(
            optimal,
            s.threshold >= 0.05 && s.threshold < peak,
            "{}",
            s.threshold
        );
    }
}
