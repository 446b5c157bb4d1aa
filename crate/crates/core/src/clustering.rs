//! Density-peak clustering with fitness-proportionate suppression.
//!
//! Every sample gets a Gaussian-kernel density. The densest remaining sample
//! becomes a center, and every sample's working density is then scaled by
//! `min(1, (d / R)^2)` where `d` is its distance to the new center and `R`
//! the sharing radius. Centers keep being drawn until the best remaining
//! density falls below `tau` times the initial maximum. Samples are then
//! assigned to their nearest center.
//!
//! A candidate only becomes a center when it is a genuine density peak: no
//! denser sample may lie within one kernel bandwidth of it. Flank samples
//! that survive suppression are discarded instead of spawning clusters.
//!
//! Bandwidth and sharing radius both derive from the mean pairwise distance,
//! so the only knob is the stopping ratio `tau`.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{euclidean, Features};
use crate::error::{Error, Result};

pub const DEFAULT_TAU: f64 = 0.05;

/// Above this many samples, bandwidth and sharing radius are estimated from
/// a fixed-seed uniform subsample of this size.
pub const SCALE_SAMPLE_LIMIT: usize = 20_000;

/// Cluster information: centers, per-sample assignment and center distance.
///
/// Row `j` of the clustered [`Features`] view corresponds to entry `j` of
/// `assignments` and `center_distances`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterModel {
    pub centers: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub center_distances: Vec<f64>,
    pub cluster_sizes: Vec<usize>,
}

impl ClusterModel {
    /// Assigns every row to its nearest center (ties to the lower center
    /// index). Centers that attract no rows are kept with size 0.
    pub fn from_centers(features: &Features, centers: Vec<Vec<f64>>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::InvalidParameter("at least one center is required".into()));
        }
        if let Some(c) = centers.iter().find(|c| c.len() != features.dim()) {
            return Err(Error::DimensionMismatch { left: features.dim(), right: c.len() });
        }
        let nearest: Vec<(usize, f64)> = (0..features.len())
            .into_par_iter()
            .map(|r| {
                let x = features.row(r);
                let mut best = (0, euclidean(x, &centers[0]));
                for (i, c) in centers.iter().enumerate().skip(1) {
                    let d = euclidean(x, c);
                    if d < best.1 {
                        best = (i, d);
                    }
                }
                best
            })
            .collect();
        let mut cluster_sizes = vec![0; centers.len()];
        for &(c, _) in &nearest {
            cluster_sizes[c] += 1;
        }
        let (assignments, center_distances) = nearest.into_iter().unzip();
        Ok(Self { centers, assignments, center_distances, cluster_sizes })
    }

    pub fn num_clusters(&self) -> usize {
        self.centers.len()
    }

    pub fn num_samples(&self) -> usize {
        self.assignments.len()
    }

    /// Rows assigned to cluster `i`, ascending.
    pub fn members(&self, i: usize) -> Vec<usize> {
        self.assignments.iter().enumerate().filter(|&(_, &a)| a == i).map(|(r, _)| r).collect()
    }
}

/// Anything that can turn a feature view into a [`ClusterModel`].
pub trait Clusterer {
    fn cluster(&self, features: &Features) -> Result<ClusterModel>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpsClustering {
    pub tau: f64,
}

impl Default for FpsClustering {
    fn default() -> Self {
        Self { tau: DEFAULT_TAU }
    }
}

impl Clusterer for FpsClustering {
    fn cluster(&self, features: &Features) -> Result<ClusterModel> {
        fps_cluster_with(features, self.tau)
    }
}

/// Mean pairwise distance, exact below [`SCALE_SAMPLE_LIMIT`] rows.
pub fn mean_pairwise_distance(features: &Features) -> f64 {
    let n = features.len();
    if n < 2 {
        return 0.0;
    }
    let rows: Vec<usize> = if n > SCALE_SAMPLE_LIMIT {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut picked = index::sample(&mut rng, n, SCALE_SAMPLE_LIMIT).into_vec();
        picked.sort_unstable();
        picked
    } else {
        (0..n).collect()
    };
    let m = rows.len();
    let per_row: Vec<f64> =
        (0..m).into_par_iter().map(|a| rows[a + 1..].iter().map(|&b| features.dist(rows[a], b)).sum()).collect();
    let pairs = (m * (m - 1) / 2) as f64;
    per_row.iter().sum::<f64>() / pairs
}

/// Kernel bandwidth: mean pairwise distance over `sqrt(2 ln n)`.
pub fn bandwidth(features: &Features) -> f64 {
    let n = features.len() as f64;
    mean_pairwise_distance(features) / (2.0 * n.ln()).sqrt()
}

/// Gaussian-kernel density of every row against all other rows.
pub fn estimate_density(features: &Features) -> Result<Vec<f64>> {
    let n = features.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: n });
    }
    Ok(density_with_bandwidth(features, bandwidth(features)))
}

fn density_with_bandwidth(features: &Features, sigma: f64) -> Vec<f64> {
    let n = features.len();
    let two_var = 2.0 * sigma * sigma;
    (0..n)
        .into_par_iter()
        .map(|j| {
            let mut sum = 0.0;
            for k in (0..n).filter(|&k| k != j) {
                let d = features.dist(j, k);
                sum += if two_var > 0.0 {
                    (-(d * d) / two_var).exp()
                } else if d == 0.0 {
                    1.0
                } else {
                    0.0
                };
            }
            sum.max(f64::MIN_POSITIVE)
        })
        .collect()
}

pub fn fps_cluster(features: &Features) -> Result<ClusterModel> {
    fps_cluster_with(features, DEFAULT_TAU)
}

pub fn fps_cluster_with(features: &Features, tau: f64) -> Result<ClusterModel> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidParameter(format!("tau {tau} not in [0, 1]")));
    }
    let n = features.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: n });
    }
    let radius = mean_pairwise_distance(features);
    let sigma = radius / (2.0 * (n as f64).ln()).sqrt();
    let density = density_with_bandwidth(features, sigma);
    let separation = peak_separation(features, &density);
    let centers = select_peaks(features, density, &separation, sigma, radius, tau, |_| ())
        .into_iter()
        .map(|r| features.row(r).to_vec())
        .collect();
    ClusterModel::from_centers(features, centers)
}

/// Distance from every row to the nearest row that is denser (equal density
/// counts as denser when the other row comes first). Infinite for the
/// global peak.
pub fn peak_separation(features: &Features, density: &[f64]) -> Vec<f64> {
    (0..features.len())
        .into_par_iter()
        .map(|j| {
            (0..features.len())
                .filter(|&k| density[k] > density[j] || (density[k] == density[j] && k < j))
                .map(|k| features.dist(j, k))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Returns the rows chosen as centers, in selection order.
///
/// A candidate whose peak separation is below `min_separation` sits on the
/// flank of some other peak; it is dropped from candidacy without becoming
/// a center or suppressing anything.
fn select_peaks(
    features: &Features,
    mut working: Vec<f64>,
    separation: &[f64],
    min_separation: f64,
    radius: f64,
    tau: f64,
    mut after_suppression: impl FnMut(&[f64]),
) -> Vec<usize> {
    let floor = tau * working.iter().copied().fold(0.0, f64::max);
    let mut centers = Vec::new();
    loop {
        let (best, peak) = argmax(&working);
        // The first center is always taken, so c >= 1.
        if !centers.is_empty() && (peak < floor || peak <= 0.0) {
            break;
        }
        if !centers.is_empty() && separation[best] < min_separation {
            working[best] = 0.0;
            continue;
        }
        centers.push(best);
        for (r, w) in working.iter_mut().enumerate() {
            let d = features.dist(best, r);
            let ratio = if radius > 0.0 { d / radius } else { 0.0 };
            *w *= (ratio * ratio).min(1.0);
        }
        after_suppression(&working);
    }
    centers
}

/// First index of the maximum.
fn argmax(xs: &[f64]) -> (usize, f64) {
    xs.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |best, (i, x)| if x > best.1 { (i, x) } else { best })
}

/// The two nearest other centers of one cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Neighbors {
    pub nc1: usize,
    pub nc2: usize,
    pub d_ref1: f64,
    pub d_ref2: f64,
}

/// Per-cluster neighbor table, indexed by cluster.
pub type NeighborInfo = Vec<Neighbors>;

/// For every cluster, the two nearest distinct other centers (ties to the
/// lower index). With exactly two clusters both slots name the other one.
pub fn neighboring_centers(model: &ClusterModel) -> Result<NeighborInfo> {
    let c = model.num_clusters();
    if c < 2 {
        return Err(Error::SingleCluster);
    }
    let info = (0..c)
        .map(|i| {
            let mut others: Vec<(usize, f64)> =
                (0..c).filter(|&j| j != i).map(|j| (j, euclidean(&model.centers[i], &model.centers[j]))).collect();
            others.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            let first = others[0];
            let second = others.get(1).copied().unwrap_or(first);
            Neighbors { nc1: first.0, nc2: second.0, d_ref1: first.1, d_ref2: second.1 }
        })
        .collect();
    Ok(info)
}
