//! Lloyd's k-means over (latitude, longitude) pairs in degree space.

use std::collections::{BTreeMap, HashSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, WaveformKind, WaveformRecord};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        GeoPoint { lat, lon }
    }

    pub fn dist2(&self, other: &GeoPoint) -> f64 {
        let dl = self.lat - other.lat;
        let dn = self.lon - other.lon;
        dl * dl + dn * dn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansOptions {
    pub max_iter: usize,
    /// Stop once no centroid moves more than this many degrees.
    pub tol: f64,
    /// Independent restarts; the lowest final inertia wins, earliest on ties.
    #[serde(default = "one")]
    pub n_init: usize,
    #[serde(default)]
    pub init: KMeansInit,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KMeansInit {
    /// k distinct points drawn uniformly.
    #[default]
    Uniform,
    /// D²-weighted seeding (k-means++).
    PlusPlus,
}

fn one() -> usize {
    1
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            max_iter: 300,
            tol: 1e-6,
            n_init: 1,
            init: KMeansInit::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansFit {
    pub centroids: Vec<GeoPoint>,
    pub labels: Vec<usize>,
    pub inertia: f64,
    /// Inertia after every assignment step, ending with the final one.
    pub inertia_history: Vec<f64>,
    pub n_iter: usize,
    pub converged: bool,
}

/// Index of the nearest centroid; ties go to the lowest index.
pub fn nearest(centroids: &[GeoPoint], point: &GeoPoint) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = point.dist2(c);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

pub fn kmeans_fit(
    points: &[GeoPoint],
    k: usize,
    seed: u64,
    options: &KMeansOptions,
) -> Result<KMeansFit> {
    if points.is_empty() {
        return Err(Error::invalid("k-means on empty input"));
    }
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    if !(options.tol > 0.0) {
        return Err(Error::invalid("tol must be positive"));
    }
    if options.n_init == 0 {
        return Err(Error::invalid("n_init must be positive"));
    }
    if points
        .iter()
        .any(|p| !(p.lat.is_finite() && p.lon.is_finite()))
    {
        return Err(Error::invalid("non-finite coordinate"));
    }

    let mut seen = HashSet::new();
    let distinct: Vec<GeoPoint> = points
        .iter()
        .filter(|p| seen.insert((p.lat.to_bits(), p.lon.to_bits())))
        .copied()
        .collect();
    if k > distinct.len() {
        return Err(Error::invalid(format!(
            "k = {k} exceeds {} distinct points",
            distinct.len()
        )));
    }

    let mut best = lloyd(points, &distinct, k, seed::rng(seed), options);
    for r in 1..options.n_init {
        let run = lloyd(
            points,
            &distinct,
            k,
            seed::rng(seed::derive(seed, &[r as u64])),
            options,
        );
        if run.inertia < best.inertia {
            best = run;
        }
    }
    Ok(best)
}

fn lloyd(
    points: &[GeoPoint],
    distinct: &[GeoPoint],
    k: usize,
    mut rng: seed::Rng,
    options: &KMeansOptions,
) -> KMeansFit {
    let mut centroids = match options.init {
        KMeansInit::Uniform => index::sample(&mut rng, distinct.len(), k)
            .into_iter()
            .map(|i| distinct[i])
            .collect(),
        KMeansInit::PlusPlus => plus_plus(distinct, k, &mut rng),
    };

    let mut labels = vec![0; points.len()];
    let mut history = Vec::new();
    let mut converged = false;
    let mut n_iter = 0;

    while n_iter < options.max_iter {
        n_iter += 1;
        let inertia = assign(points, &mut centroids, &mut labels);
        push_checked(&mut history, inertia);

        let updated = means(points, &labels, &centroids);
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| a.dist2(b).sqrt())
            .fold(0.0, f64::max);
        centroids = updated;
        if shift < options.tol {
            converged = true;
            break;
        }
    }
    let inertia = assign(points, &mut centroids, &mut labels);
    push_checked(&mut history, inertia);

    KMeansFit {
        centroids,
        labels,
        inertia,
        inertia_history: history,
        n_iter,
        converged,
    }
}

fn plus_plus(distinct: &[GeoPoint], k: usize, rng: &mut seed::Rng) -> Vec<GeoPoint> {
    let mut centroids = vec![distinct[rng.random_range(0..distinct.len())]];
    let mut d2: Vec<f64> = distinct.iter().map(|p| p.dist2(&centroids[0])).collect();
    while centroids.len() < k {
        // Chosen points have weight zero, so they are never drawn twice.
        let pick = WeightedIndex::new(&d2)
            .expect("k ≤ distinct points leaves positive weight")
            .sample(rng);
        let c = distinct[pick];
        for (d, p) in d2.iter_mut().zip(distinct) {
            *d = d.min(p.dist2(&c));
        }
        centroids.push(c);
    }
    centroids
}

fn push_checked(history: &mut Vec<f64>, inertia: f64) {
    if let Some(&prev) = history.last() {
        debug_assert!(
            inertia <= prev + 1e-9 * prev.max(1.0),
            "inertia increased: {prev} -> {inertia}"
        );
    }
    history.push(inertia);
}

/// Assigns every point to its nearest centroid, reseeding empty clusters at
/// the point farthest from its own centroid. Returns the inertia.
fn assign(points: &[GeoPoint], centroids: &mut [GeoPoint], labels: &mut [usize]) -> f64 {
    let k = centroids.len();
    let mut counts = vec![0usize; k];
    for (p, label) in points.iter().zip(labels.iter_mut()) {
        *label = nearest(centroids, p);
        counts[*label] += 1;
    }
    for j in 0..k {
        if counts[j] > 0 {
            continue;
        }
        let far = points
            .iter()
            .enumerate()
            .filter(|(i, _)| counts[labels[*i]] > 1)
            .map(|(i, p)| (i, p.dist2(&centroids[labels[i]])))
            .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            });
        if let Some((i, _)) = far {
            counts[labels[i]] -= 1;
            labels[i] = j;
            counts[j] = 1;
            centroids[j] = points[i];
        }
    }
    points
        .iter()
        .zip(labels.iter())
        .map(|(p, &l)| p.dist2(&centroids[l]))
        .sum()
}

fn means(points: &[GeoPoint], labels: &[usize], previous: &[GeoPoint]) -> Vec<GeoPoint> {
    let k = previous.len();
    let mut sums = vec![(0.0, 0.0); k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        sums[l].0 += p.lat;
        sums[l].1 += p.lon;
        counts[l] += 1;
    }
    (0..k)
        .map(|j| {
            if counts[j] == 0 {
                previous[j]
            } else {
                let n = counts[j] as f64;
                GeoPoint::new(sums[j].0 / n, sums[j].1 / n)
            }
        })
        .collect()
}

/// Spatial clusters fitted on source locations, with noise waveforms placed
/// through their station coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub seed: u64,
    pub centroids: Vec<GeoPoint>,
    pub inertia: f64,
    pub inertia_history: Vec<f64>,
    pub n_iter: usize,
    pub converged: bool,
    pub source_clusters: BTreeMap<String, usize>,
    pub noise_clusters: BTreeMap<String, usize>,
}

impl ClusterModel {
    pub fn fit(dataset: &Dataset, k: usize, seed: u64, options: &KMeansOptions) -> Result<Self> {
        let points: Vec<GeoPoint> = dataset
            .sources()
            .iter()
            .map(|s| GeoPoint::new(s.latitude, s.longitude))
            .collect();
        let fit = kmeans_fit(&points, k, seed, options)?;
        let source_clusters = dataset
            .sources()
            .iter()
            .zip(&fit.labels)
            .map(|(s, &l)| (s.source_id.clone(), l))
            .collect();
        let noise_clusters = dataset
            .noise_waveforms()
            .map(|w| {
                let station = GeoPoint::new(w.station_latitude, w.station_longitude);
                (w.waveform_id.clone(), nearest(&fit.centroids, &station))
            })
            .collect();
        Ok(ClusterModel {
            k,
            seed,
            centroids: fit.centroids,
            inertia: fit.inertia,
            inertia_history: fit.inertia_history,
            n_iter: fit.n_iter,
            converged: fit.converged,
            source_clusters,
            noise_clusters,
        })
    }

    pub fn assign(&self, point: &GeoPoint) -> usize {
        nearest(&self.centroids, point)
    }

    /// Cluster of a waveform: its source's cluster for earthquakes, the
    /// station's nearest centroid for noise.
    pub fn cluster_of_waveform(&self, waveform: &WaveformRecord) -> Option<usize> {
        match waveform.kind {
            WaveformKind::Earthquake => waveform
                .source_id
                .as_ref()
                .and_then(|s| self.source_clusters.get(s))
                .copied(),
            WaveformKind::Noise => Some(
                self.noise_clusters
                    .get(&waveform.waveform_id)
                    .copied()
                    .unwrap_or_else(|| {
                        self.assign(&GeoPoint::new(
                            waveform.station_latitude,
                            waveform.station_longitude,
                        ))
                    }),
            ),
        }
    }
}

/// Nearest-centroid lookup for a fitted model.
pub fn assign_cluster(model: &ClusterModel, point: &GeoPoint) -> usize {
    model.assign(point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn blobs(
        seed: u64,
        centers: &[(f64, f64)],
        n: usize,
        spread: f64,
    ) -> (Vec<GeoPoint>, Vec<usize>) {
        let mut rng = seed::rng(seed);
        let noise = Normal::new(0.0, spread).unwrap();
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for (b, &(la, lo)) in centers.iter().enumerate() {
            for _ in 0..n {
                pts.push(GeoPoint::new(
                    la + noise.sample(&mut rng),
                    lo + noise.sample(&mut rng),
                ));
                truth.push(b);
            }
        }
        (pts, truth)
    }

    #[test]
    fn k1_is_the_mean() {
        let pts = vec![
            GeoPoint::new(1.0, 2.0),
            GeoPoint::new(3.0, -2.0),
            GeoPoint::new(5.0, 6.0),
        ];
        let fit = kmeans_fit(&pts, 1, 0, &KMeansOptions::default()).unwrap();
        assert!((fit.centroids[0].lat - 3.0).abs() < 1e-12);
        assert!((fit.centroids[0].lon - 2.0).abs() < 1e-12);
        assert!(fit.converged);
    }

    #[test]
    fn k_equal_distinct_points_gives_zero_inertia() {
        let pts = vec![
            GeoPoint::new(0.0, 0.0),
            GeoPoint::new(1.0, 0.0),
            GeoPoint::new(0.0, 1.0),
            GeoPoint::new(1.0, 0.0),
        ];
        let fit = kmeans_fit(&pts, 3, 5, &KMeansOptions::default()).unwrap();
        assert_eq!(fit.inertia, 0.0);
        assert_eq!(fit.labels[1], fit.labels[3]);
        assert!(kmeans_fit(&pts, 4, 5, &KMeansOptions::default()).is_err());
    }

    #[test]
    fn input_errors() {
        let o = KMeansOptions::default();
        assert!(kmeans_fit(&[], 1, 0, &o).is_err());
        let pts = [GeoPoint::new(0.0, 0.0)];
        assert!(kmeans_fit(&pts, 0, 0, &o).is_err());
        assert!(kmeans_fit(&pts, 1, 0, &KMeansOptions { tol: 0.0, ..o }).is_err());
    }

    #[test]
    fn two_blobs_recovered_for_20_seeds() {
        let (pts, _) = blobs(11, &[(0.0, 0.0), (10.0, 10.0)], 100, 0.1);
        for seed in 0..20 {
            let fit = kmeans_fit(&pts, 2, seed, &KMeansOptions::default()).unwrap();
            let mut cs = fit.centroids.clone();
            cs.sort_by(|a, b| a.lat.total_cmp(&b.lat));
            assert!(
                cs[0].dist2(&GeoPoint::new(0.0, 0.0)).sqrt() < 0.05,
                "seed {seed}"
            );
            assert!(
                cs[1].dist2(&GeoPoint::new(10.0, 10.0)).sqrt() < 0.05,
                "seed {seed}"
            );
        }
    }

    #[test]
    fn empty_cluster_is_reseeded() {
        // Two far-apart duplicates-heavy groups; many centroids start in one.
        let mut pts = vec![GeoPoint::new(0.0, 0.0); 50];
        pts.extend((0..6).map(|i| GeoPoint::new(0.001 * i as f64, 0.0)));
        pts.push(GeoPoint::new(30.0, 30.0));
        for seed in 0..30 {
            let fit = kmeans_fit(&pts, 4, seed, &KMeansOptions::default()).unwrap();
            let mut counts = [0; 4];
            fit.labels.iter().for_each(|&l| counts[l] += 1);
            assert!(counts.iter().all(|&c| c > 0), "seed {seed}: {counts:?}");
        }
    }

    #[test]
    fn centroids_are_means_at_convergence() {
        let (pts, _) = blobs(3, &[(38.0, 15.0), (42.0, 12.0), (45.0, 9.0)], 80, 0.7);
        let fit = kmeans_fit(&pts, 3, 1, &KMeansOptions::default()).unwrap();
        assert!(fit.converged);
        let m = means(&pts, &fit.labels, &fit.centroids);
        for (a, b) in m.iter().zip(&fit.centroids) {
            assert!(a.dist2(b).sqrt() < 1e-6);
        }
    }

    #[test]
    fn assign_ties_and_brute_force() {
        let cs = vec![
            GeoPoint::new(0.0, 0.0),
            GeoPoint::new(1.0, 0.0),
            GeoPoint::new(5.0, 5.0),
            GeoPoint::new(7.0, 7.0),
            GeoPoint::new(-1.0, 0.0),
        ];
        assert_eq!(nearest(&cs, &GeoPoint::new(7.0, 7.0)), 3);
        // (0.5, 0) is equidistant from centroids 0 and 1.
        assert_eq!(nearest(&cs, &GeoPoint::new(0.5, 0.0)), 0);

        let mut rng = seed::rng(99);
        for _ in 0..1000 {
            let p = GeoPoint::new(rng.random_range(-3.0..9.0), rng.random_range(-3.0..9.0));
            let brute = (0..cs.len())
                .min_by(|&a, &b| p.dist2(&cs[a]).total_cmp(&p.dist2(&cs[b])).then(a.cmp(&b)))
                .unwrap();
            assert_eq!(nearest(&cs, &p), brute);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn inertia_never_increases(seed in 0u64..1000, k in 1usize..8) {
            let mut rng = seed::rng(seed);
            let pts: Vec<GeoPoint> = (0..120)
                .map(|_| GeoPoint::new(rng.random_range(36.0..47.0), rng.random_range(6.0..19.0)))
                .collect();
            let fit = kmeans_fit(&pts, k, seed, &KMeansOptions::default()).unwrap();
            for w in fit.inertia_history.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
            let pp = KMeansOptions { init: KMeansInit::PlusPlus, n_init: 3, ..KMeansOptions::default() };
            let best = kmeans_fit(&pts, k, seed, &pp).unwrap();
            for w in best.inertia_history.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
            for (j, c) in fit.centroids.iter().enumerate() {
                prop_assert_eq!(nearest(&fit.centroids, c), j);
            }
        }
    }

    #[test]
    fn restarts_keep_the_best_run() {
        let mut rng = seed::rng(31);
        let pts: Vec<GeoPoint> = (0..300)
            .map(|_| GeoPoint::new(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)))
            .collect();
        for s in 0..10 {
            let single = kmeans_fit(&pts, 6, s, &KMeansOptions::default()).unwrap();
            let multi = kmeans_fit(
                &pts,
                6,
                s,
                &KMeansOptions {
                    n_init: 8,
                    ..KMeansOptions::default()
                },
            )
            .unwrap();
            // Restart 0 reuses the plain seed, so restarts never do worse.
            assert!(multi.inertia <= single.inertia);
        }
        assert!(kmeans_fit(
            &pts,
            2,
            0,
            &KMeansOptions {
                n_init: 0,
                ..KMeansOptions::default()
            }
        )
        .is_err());
    }

    #[test]
    fn plus_plus_separates_many_blobs() {
        let mut rng = seed::rng(5);
        let mut pts = Vec::new();
        for b in 0..20 {
            for _ in 0..50 {
                pts.push(GeoPoint::new(
                    (b / 5) as f64 * 2.0 + rng.random_range(-0.01..0.01),
                    (b % 5) as f64 * 2.0 + rng.random_range(-0.01..0.01),
                ));
            }
        }
        let opts = KMeansOptions {
            init: KMeansInit::PlusPlus,
            n_init: 5,
            ..KMeansOptions::default()
        };
        let fit = kmeans_fit(&pts, 20, 1, &opts).unwrap();
        let mut sizes = vec![0; 20];
        for &l in &fit.labels {
            sizes[l] += 1;
        }
        assert!(sizes.iter().all(|&n| n == 50), "{sizes:?}");
    }
}
