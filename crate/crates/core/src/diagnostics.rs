//! Feature distributions per cluster: kernel densities of metadata and of
//! spectral features in the window after the P arrival.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::trace::COMPONENTS;
use crate::model::{Dataset, TraceSamples};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_points: usize,
    /// Grid padding beyond the data range, in units of the widest bandwidth.
    pub pad_bandwidths: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n_points: 512,
            pad_bandwidths: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub feature_name: String,
    pub group_id: String,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    /// All values identical: the mass sits in the grid cell nearest them.
    pub degenerate: bool,
}

impl DensityCurve {
    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.density)
    }

    /// Linear interpolation; zero outside the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        let g = &self.grid;
        if g.is_empty() || x < g[0] || x > g[g.len() - 1] {
            return 0.0;
        }
        let j = g.partition_point(|&v| v <= x).min(g.len() - 1).max(1);
        let (x0, x1) = (g[j - 1], g[j]);
        let t = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
        self.density[j - 1] * (1.0 - t) + self.density[j] * t
    }
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
        .sum()
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule of thumb, falling back to the standard deviation when
/// the interquartile range vanishes.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = (quantile(&sorted, 0.75) - quantile(&sorted, 0.25)) / 1.34;
    let spread = if iqr > 0.0 { sd.min(iqr) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

/// Gaussian kernel densities for several groups on one shared grid, each
/// renormalized to unit trapezoidal area.
pub fn feature_density(
    feature_name: &str,
    groups: &[(String, Vec<f64>)],
    spec: &GridSpec,
) -> Result<Vec<DensityCurve>> {
    if spec.n_points < 3 {
        return Err(Error::invalid("density grid needs at least 3 points"));
    }
    for (id, values) in groups {
        if values.len() < 2 {
            return Err(Error::invalid(format!(
                "{feature_name}/{id}: density needs ≥2 values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "{feature_name}/{id}: non-finite value"
            )));
        }
    }
    let bandwidths: Vec<f64> = groups.iter().map(|(_, v)| silverman_bandwidth(v)).collect();
    let all = groups.iter().flat_map(|(_, v)| v.iter().copied());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        return Ok(Vec::new());
    }
    let pad = spec.pad_bandwidths * bandwidths.iter().cloned().fold(0.0, f64::max);
    let (mut a, mut b) = (lo - pad, hi + pad);
    if b - a <= 0.0 {
        a -= 0.5;
        b += 0.5;
    }
    let step = (b - a) / (spec.n_points - 1) as f64;
    let grid: Vec<f64> = (0..spec.n_points).map(|k| a + k as f64 * step).collect();

    Ok(groups
        .iter()
        .zip(&bandwidths)
        .map(|((id, values), &h)| {
            let (density, degenerate) = if h > 0.0 {
                let raw: Vec<f64> = grid
                    .par_iter()
                    .map(|&x| {
                        values
                            .iter()
                            .map(|v| (-0.5 * ((x - v) / h).powi(2)).exp())
                            .sum::<f64>()
                    })
                    .collect();
                let area = trapezoid(&grid, &raw);
                (raw.iter().map(|r| r / area).collect(), false)
            } else {
                // Unit mass at the nearest grid point; end points carry half
                // weight under the trapezoid rule.
                let j = (((values[0] - a) / step).round() as usize).min(spec.n_points - 1);
                let weight = if j == 0 || j == spec.n_points - 1 {
                    step / 2.0
                } else {
                    step
                };
                let mut d = vec![0.0; spec.n_points];
                d[j] = 1.0 / weight;
                (d, true)
            };
            DensityCurve {
                feature_name: feature_name.to_string(),
                group_id: id.clone(),
                grid: grid.clone(),
                density,
                bandwidth: h,
                degenerate,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowFeatureOptions {
    pub window_s: f64,
    pub bin_width_hz: f64,
    pub log_floor: f64,
}

impl Default for WindowFeatureOptions {
    fn default() -> Self {
        WindowFeatureOptions {
            window_s: 10.0,
            bin_width_hz: 5.0,
            log_floor: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentFeatures {
    pub component: String,
    /// Lower edge of each half-open frequency bin.
    pub bin_low_hz: Vec<f64>,
    /// Largest log10 amplitude in each bin.
    pub bin_max_log: Vec<Option<f64>>,
    /// Every log10 amplitude in each bin.
    pub bin_log_amplitudes: Vec<Vec<f64>>,
    pub argmax_frequency_hz: Option<f64>,
    /// log10 of the largest absolute sample in the window.
    pub log_peak_amplitude: Option<f64>,
    pub all_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFeatures {
    pub start_index: usize,
    pub n_window: usize,
    /// The window ran past the end of the trace and was shortened.
    pub truncated: bool,
    pub components: Vec<ComponentFeatures>,
}

/// Amplitude spectrum `|X_k|` for `k = 0..=n/2`, without taper or scaling.
fn amplitude_spectrum(fft: &Arc<dyn Fft<f64>>, samples: &[f32]) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = samples
        .iter()
        .map(|&s| Complex::new(f64::from(s), 0.0))
        .collect();
    fft.process(&mut buf);
    buf[..samples.len() / 2 + 1]
        .iter()
        .map(|c| c.norm())
        .collect()
}

/// Spectral and amplitude features of the window starting at the P arrival.
pub fn window_features(
    trace: &TraceSamples,
    p_index: usize,
    sampling_rate_hz: f64,
    options: &WindowFeatureOptions,
) -> Result<WindowFeatures> {
    if !(sampling_rate_hz > 0.0 && options.window_s > 0.0 && options.bin_width_hz > 0.0) {
        return Err(Error::invalid(
            "rate, window length and bin width must be positive",
        ));
    }
    let n = trace.n_samples();
    if p_index >= n {
        return Err(Error::invalid(format!(
            "P index {p_index} beyond {n} samples"
        )));
    }
    let wanted = (options.window_s * sampling_rate_hz).round() as usize;
    let end = (p_index + wanted).min(n);
    let len = end - p_index;
    let fft = FftPlanner::new().plan_fft_forward(len);
    let floor = options.log_floor;
    let components = COMPONENTS
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let window = &trace.component(c)[p_index..end];
            let spectrum = amplitude_spectrum(&fft, window);
            let freq = |k: usize| k as f64 * sampling_rate_hz / len as f64;
            let n_bins = (freq(spectrum.len() - 1) / options.bin_width_hz).floor() as usize + 1;
            let peak = window
                .iter()
                .fold(0.0f64, |m, &s| m.max(f64::from(s).abs()));
            let all_zero = peak == 0.0;
            let mut bin_log_amplitudes = vec![Vec::new(); n_bins];
            let mut argmax = 0;
            for (k, &amp) in spectrum.iter().enumerate() {
                let bin = (freq(k) / options.bin_width_hz).floor() as usize;
                bin_log_amplitudes[bin].push(amp.max(floor).log10());
                if amp > spectrum[argmax] {
                    argmax = k;
                }
            }
            let bin_max_log = bin_log_amplitudes
                .iter()
                .map(|b| {
                    if all_zero {
                        None
                    } else {
                        b.iter().copied().reduce(f64::max)
                    }
                })
                .collect();
            ComponentFeatures {
                component: name.to_string(),
                bin_low_hz: (0..n_bins)
                    .map(|b| b as f64 * options.bin_width_hz)
                    .collect(),
                bin_max_log,
                bin_log_amplitudes: if all_zero {
                    vec![Vec::new(); n_bins]
                } else {
                    bin_log_amplitudes
                },
                argmax_frequency_hz: (!all_zero).then(|| freq(argmax)),
                log_peak_amplitude: (!all_zero).then(|| peak.log10()),
                all_zero,
            }
        })
        .collect();
    Ok(WindowFeatures {
        start_index: p_index,
        n_window: len,
        truncated: len < wanted,
        components,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpSummary {
    pub waveform_ids: Vec<String>,
    pub intervals_s: Vec<f64>,
    pub n_earthquake: usize,
    /// Share of earthquake waveforms carrying an S label.
    pub fraction_with_s: f64,
}

/// S-P times of every waveform labeled with both phases.
pub fn sp_intervals(dataset: &Dataset) -> SpSummary {
    let mut waveform_ids = Vec::new();
    let mut intervals_s = Vec::new();
    let mut n_earthquake = 0;
    for w in dataset.earthquake_waveforms() {
        n_earthquake += 1;
        if let (Some(p), Some(s)) = (w.p_arrival_index, w.s_arrival_index) {
            waveform_ids.push(w.waveform_id.clone());
            intervals_s.push((s as f64 - p as f64) / w.sampling_rate_hz);
        }
    }
    let fraction_with_s = if n_earthquake == 0 {
        0.0
    } else {
        intervals_s.len() as f64 / n_earthquake as f64
    };
    SpSummary {
        waveform_ids,
        intervals_s,
        n_earthquake,
        fraction_with_s,
    }
}

/// Great-circle distance in km between two latitude/longitude points.
pub fn epicentral_distance_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    const EARTH_RADIUS_KM: f64 = 6371.0;
    let (la1, lo1) = (a.0.to_radians(), a.1.to_radians());
    let (la2, lo2) = (b.0.to_radians(), b.1.to_radians());
    let h = ((la2 - la1) / 2.0).sin().powi(2)
        + la1.cos() * la2.cos() * ((lo2 - lo1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}
