//! Seeded generators with known ground truth: clustered catalogs, picker
//! probability traces, and metric tables drawn from the mixed-effects model.

use rand::Rng as _;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::ProbabilityTrace;
use crate::model::{
    Dataset, DesignSpec, MetricTable, SourceRecord, TraceSamples, WaveformRecord,
    DEFAULT_SAMPLING_RATE_HZ,
};
use crate::seed;
use crate::stratify::GeoPoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeoSpec {
    pub n_clusters: usize,
    pub sources_per_cluster: usize,
    pub waveforms_per_source: usize,
    /// Standard deviation of source positions around their blob center.
    pub spread_deg: f64,
    /// Distance between neighboring blob centers on the placement grid.
    pub center_spacing_deg: f64,
    /// Noise waveforms per blob, as a fraction of its earthquake waveforms.
    pub noise_fraction: f64,
    pub n_samples: usize,
}

impl Default for GeoSpec {
    fn default() -> Self {
        GeoSpec {
            n_clusters: 16,
            sources_per_cluster: 40,
            waveforms_per_source: 3,
            spread_deg: 0.15,
            center_spacing_deg: 1.5,
            noise_fraction: 0.2,
            n_samples: 6000,
        }
    }
}

impl GeoSpec {
    pub fn new(
        n_clusters: usize,
        sources_per_cluster: usize,
        waveforms_per_source: usize,
        spread_deg: f64,
    ) -> Self {
        GeoSpec {
            n_clusters,
            sources_per_cluster,
            waveforms_per_source,
            spread_deg,
            ..GeoSpec::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 || self.sources_per_cluster == 0 || self.waveforms_per_source == 0 {
            return Err(Error::invalid("synthetic counts must be positive"));
        }
        if !(self.spread_deg >= 0.0 && self.center_spacing_deg > 0.0 && self.noise_fraction >= 0.0)
        {
            return Err(Error::invalid(
                "synthetic spreads and fractions must be nonnegative",
            ));
        }
        // Labels need room for a P arrival, the S-P gap and a 10 s tail.
        if self.n_samples < 3000 {
            return Err(Error::invalid(
                "synthetic waveforms need at least 3000 samples",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub dataset: Dataset,
    pub centers: Vec<GeoPoint>,
    /// Blob of each source, aligned with `dataset.sources()`.
    pub source_blob: Vec<usize>,
    /// Blob of each noise waveform, in dataset order.
    pub noise_blob: Vec<usize>,
}

/// Blob centers on a near-square grid. Rows are offset by a fraction of the
/// spacing so no two centers share a latitude.
fn blob_centers(spec: &GeoSpec) -> Vec<GeoPoint> {
    let cols = (spec.n_clusters as f64).sqrt().ceil() as usize;
    let rows = spec.n_clusters.div_ceil(cols);
    let s = spec.center_spacing_deg;
    let lat0 = -(rows as f64 - 1.0) * s / 2.0;
    let lon0 = -(cols as f64 - 1.0) * s / 2.0;
    (0..spec.n_clusters)
        .map(|c| {
            let (r, k) = (c / cols, c % cols);
            GeoPoint::new(
                (lat0 + r as f64 * s + k as f64 * s / (cols as f64 * 4.0)).clamp(-89.0, 89.0),
                (lon0 + k as f64 * s).clamp(-179.0, 179.0),
            )
        })
        .collect()
}

fn jittered(rng: &mut seed::Rng, center: &GeoPoint, sd: f64) -> (f64, f64) {
    let dlat: f64 = rng.sample(StandardNormal);
    let dlon: f64 = rng.sample(StandardNormal);
    (
        (center.lat + sd * dlat).clamp(-90.0, 90.0),
        (center.lon + sd * dlon).clamp(-180.0, 180.0),
    )
}

/// A catalog of Gaussian blobs with co-located stations. Earthquake
/// waveforms carry P and S labels; noise waveforms sit at their blob.
pub fn gen_geo_dataset(spec: &GeoSpec, seed: u64) -> Result<SynthDataset> {
    spec.validate()?;
    let mut rng = seed::rng(seed);
    let centers = blob_centers(spec);
    let rate = DEFAULT_SAMPLING_RATE_HZ;
    let mut sources = Vec::new();
    let mut waveforms = Vec::new();
    let mut source_blob = Vec::new();
    let mut noise_blob = Vec::new();
    for (b, center) in centers.iter().enumerate() {
        for s in 0..spec.sources_per_cluster {
            let id = format!("src_{b:03}_{s:04}");
            let (lat, lon) = jittered(&mut rng, center, spec.spread_deg);
            let mut source = SourceRecord::new(&id, lat, lon);
            source.depth_km = Some(rng.random_range(2.0..30.0));
            source.magnitude = Some(rng.random_range(0.5..4.5));
            for w in 0..spec.waveforms_per_source {
                let station = jittered(&mut rng, center, spec.spread_deg);
                let p = rng.random_range(500..1500);
                let sp = rng.random_range((rate as usize)..(10 * rate as usize));
                let mut record = WaveformRecord::earthquake(
                    format!("{id}_w{w}"),
                    &id,
                    station,
                    p,
                    spec.n_samples,
                );
                if p + sp < spec.n_samples {
                    record.s_arrival_index = Some(p + sp);
                }
                waveforms.push(record);
            }
            sources.push(source);
            source_blob.push(b);
        }
        let n_noise = (spec.noise_fraction
            * (spec.sources_per_cluster * spec.waveforms_per_source) as f64)
            .round() as usize;
        for n in 0..n_noise {
            let station = jittered(&mut rng, center, spec.spread_deg);
            waveforms.push(WaveformRecord::noise(
                format!("noise_{b:03}_{n:04}"),
                station,
                spec.n_samples,
            ));
            noise_blob.push(b);
        }
    }
    Ok(SynthDataset {
        dataset: Dataset::new(sources, waveforms)?,
        centers,
        source_blob,
        noise_blob,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthTraceParams {
    pub bump_sigma_s: f64,
    pub bump_height: f64,
    pub background_level: f64,
    pub pick_error_sd_s: f64,
    pub miss_rate: f64,
    /// Expected number of spurious bumps per trace.
    pub false_bump_rate: f64,
    pub seed: u64,
}

impl Default for SynthTraceParams {
    fn default() -> Self {
        SynthTraceParams {
            bump_sigma_s: 0.1,
            bump_height: 0.9,
            background_level: 0.05,
            pick_error_sd_s: 0.05,
            miss_rate: 0.1,
            false_bump_rate: 0.1,
            seed: 0,
        }
    }
}

impl SynthTraceParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} = {v} outside [0, 1]")))
            }
        };
        unit("bump_height", self.bump_height)?;
        unit("background_level", self.background_level)?;
        unit("miss_rate", self.miss_rate)?;
        unit("false_bump_rate", self.false_bump_rate)?;
        if !(self.bump_sigma_s > 0.0 && self.bump_sigma_s.is_finite()) {
            return Err(Error::invalid("bump_sigma_s must be positive"));
        }
        if !(self.pick_error_sd_s >= 0.0 && self.pick_error_sd_s.is_finite()) {
            return Err(Error::invalid("pick_error_sd_s must be nonnegative"));
        }
        Ok(())
    }
}

fn add_bump(values: &mut [f64], center: f64, sigma: f64, height: f64) {
    let reach = 8.0 * sigma;
    let lo = (center - reach).floor().max(0.0) as usize;
    let hi = ((center + reach).ceil().max(0.0) as usize).min(values.len().saturating_sub(1));
    if center + reach < 0.0 || lo >= values.len() {
        return;
    }
    for (i, v) in values.iter_mut().enumerate().take(hi + 1).skip(lo) {
        let z = (i as f64 - center) / sigma;
        *v += height * (-0.5 * z * z).exp();
    }
}

/// Picker output for one waveform: background plus a Gaussian bump at the
/// jittered P label, plus Poisson-many spurious bumps, clipped to [0, 1].
/// Each waveform draws from its own stream keyed by its id.
pub fn gen_trace(record: &WaveformRecord, params: &SynthTraceParams) -> Result<ProbabilityTrace> {
    params.validate()?;
    let rate = record.sampling_rate_hz;
    let n = record.n_samples;
    let mut rng = seed::rng(seed::derive(
        params.seed,
        &[seed::hash_str(&record.waveform_id)],
    ));
    let sigma = params.bump_sigma_s * rate;
    let mut values = vec![params.background_level; n];

    if record.is_earthquake() {
        let p = record.p_arrival_index.ok_or_else(|| Error::InvalidRecord {
            id: record.waveform_id.clone(),
            message: "earthquake waveform without a P label".into(),
        })?;
        let missed = rng.random::<f64>() < params.miss_rate;
        let jitter: f64 = rng.sample(StandardNormal);
        if !missed {
            let center = p as f64 + jitter * params.pick_error_sd_s * rate;
            add_bump(&mut values, center, sigma, params.bump_height);
        }
    }
    if params.false_bump_rate > 0.0 {
        let count = Poisson::new(params.false_bump_rate)
            .expect("rate checked positive")
            .sample(&mut rng) as usize;
        for _ in 0..count {
            let center = rng.random_range(0.0..n as f64);
            add_bump(&mut values, center, sigma, params.bump_height);
        }
    }
    for v in &mut values {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(ProbabilityTrace::dense(record.waveform_id.clone(), values))
}

/// Three-component ground motion: low-level Gaussian noise, plus
/// for earthquakes a decaying sinusoid starting at the P label. The dominant
/// frequency is drawn from 2..20 Hz and the amplitude grows with magnitude.
pub fn gen_waveform(
    record: &WaveformRecord,
    magnitude: Option<f64>,
    seed: u64,
) -> Result<TraceSamples> {
    record.validate()?;
    let mut rng = seed::rng(seed::derive(seed, &[seed::hash_str(&record.waveform_id)]));
    let n = record.n_samples;
    let rate = record.sampling_rate_hz;
    let noise_sd = 0.01;
    let mut comps: [Vec<f32>; 3] = Default::default();
    for c in &mut comps {
        *c = (0..n)
            .map(|_| (noise_sd * Distribution::<f64>::sample(&StandardNormal, &mut rng)) as f32)
            .collect();
    }
    if let Some(p) = record.p_arrival_index {
        let freq = rng.random_range(2.0..20.0);
        let amp = 10f64.powf(magnitude.unwrap_or(2.0) - 2.0);
        let decay_s = rng.random_range(1.0..4.0);
        let phases: [f64; 3] = [
            0.0,
            rng.random_range(0.0..std::f64::consts::TAU),
            rng.random_range(0.0..std::f64::consts::TAU),
        ];
        let gains = [1.0, 0.7, 0.7];
        for (c, comp) in comps.iter_mut().enumerate() {
            for (k, x) in comp.iter_mut().enumerate().skip(p) {
                let t = (k - p) as f64 / rate;
                let w = std::f64::consts::TAU * freq * t + phases[c];
                *x += (gains[c] * amp * (-t / decay_s).exp() * w.sin()) as f32;
            }
        }
    }
    let [z, north, east] = comps;
    TraceSamples::new(z, north, east)
}

/// Parameters of the mixed-effects model for one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    pub grand_mean: f64,
    pub model_effects: Vec<f64>,
    pub quantity_effects: Vec<f64>,
    /// `interactions[m][a]`.
    pub interactions: Vec<Vec<f64>>,
    /// `var_data[m][a]`.
    pub var_data: Vec<Vec<f64>>,
    pub var_train: Vec<Vec<f64>>,
}

impl MetricParams {
    /// No interactions and the same variances in every cell.
    pub fn homogeneous(
        grand_mean: f64,
        model_effects: Vec<f64>,
        quantity_effects: Vec<f64>,
        var_data: f64,
        var_train: f64,
    ) -> Self {
        let (m, a) = (model_effects.len(), quantity_effects.len());
        MetricParams {
            grand_mean,
            model_effects,
            quantity_effects,
            interactions: vec![vec![0.0; a]; m],
            var_data: vec![vec![var_data; a]; m],
            var_train: vec![vec![var_train; a]; m],
        }
    }

    pub fn cell_mean(&self, m: usize, a: usize) -> f64 {
        self.grand_mean + self.model_effects[m] + self.quantity_effects[a] + self.interactions[m][a]
    }

    fn validate(&self, design: &DesignSpec) -> Result<()> {
        let (n_m, n_a) = (design.n_models, design.n_quantities());
        let grid_ok = |g: &[Vec<f64>]| g.len() == n_m && g.iter().all(|r| r.len() == n_a);
        if self.model_effects.len() != n_m
            || self.quantity_effects.len() != n_a
            || !grid_ok(&self.interactions)
            || !grid_ok(&self.var_data)
            || !grid_ok(&self.var_train)
        {
            return Err(Error::invalid(format!(
                "parameter shapes do not match a {n_m}×{n_a} design"
            )));
        }
        let zero = |xs: &mut dyn Iterator<Item = f64>, what: &str| {
            if xs.sum::<f64>().abs() > 1e-9 {
                Err(Error::invalid(format!("{what} must sum to zero")))
            } else {
                Ok(())
            }
        };
        zero(&mut self.model_effects.iter().copied(), "model effects")?;
        zero(
            &mut self.quantity_effects.iter().copied(),
            "quantity effects",
        )?;
        for m in 0..n_m {
            zero(
                &mut self.interactions[m].iter().copied(),
                "interaction rows",
            )?;
        }
        for a in 0..n_a {
            zero(
                &mut self.interactions.iter().map(|r| r[a]),
                "interaction columns",
            )?;
        }
        if self
            .var_data
            .iter()
            .chain(&self.var_train)
            .flatten()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::invalid("variances must be nonnegative"));
        }
        Ok(())
    }
}

/// Draws one complete table from the model.
pub fn gen_metrics(design: &DesignSpec, params: &MetricParams, seed: u64) -> Result<MetricTable> {
    params.validate(design)?;
    let mut rng = seed::rng(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut table = MetricTable::empty("synthetic", design.clone());
    for m in 0..design.n_models {
        for a in 0..design.n_quantities() {
            let mean = params.cell_mean(m, a);
            let sd_data = params.var_data[m][a].sqrt();
            let sd_train = params.var_train[m][a].sqrt();
            for d in 0..design.n_cluster_sets {
                let set_mean = mean + sd_data * unit.sample(&mut rng);
                for i in 0..design.n_inits {
                    let y = set_mean + sd_train * unit.sample(&mut rng);
                    table.set(&crate::model::ModelInstanceKey::new(m, a, d, i), y)?;
                }
            }
        }
    }
    Ok(table)
}
