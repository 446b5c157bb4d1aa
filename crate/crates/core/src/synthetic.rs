//! Gaussian blob generator for tests and the `--synthetic` CLI source.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// `blobs:<clusters>:<points>:<overlap>[:<seed>]`
///
/// Blob centers sit evenly on the unit circle; each blob is isotropic with
/// standard deviation `overlap * spacing`, where `spacing` is the distance
/// between adjacent centers. `points` is the total sample count, spread as
/// evenly as possible across blobs. Labels are the blob indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub clusters: usize,
    pub points: usize,
    pub overlap: f64,
    pub seed: u64,
}

impl BlobSpec {
    /// Three overlapping blobs, 600 points.
    pub const OVERLAPPED_3: BlobSpec = BlobSpec { clusters: 3, points: 600, overlap: 0.35, seed: 0 };

    pub fn centers(&self) -> Vec<[f64; 2]> {
        if self.clusters == 1 {
            return vec![[0.0, 0.0]];
        }
        (0..self.clusters)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / self.clusters as f64;
                [a.cos(), a.sin()]
            })
            .collect()
    }

    pub fn blob_std(&self) -> f64 {
        let spacing = if self.clusters < 2 { 1.0 } else { 2.0 * (PI / self.clusters as f64).sin() };
        self.overlap * spacing
    }

    pub fn generate(&self) -> Result<Dataset> {
        if self.clusters == 0 || self.points < self.clusters {
            return Err(Error::InvalidParameter(format!(
                "blob spec needs >= 1 cluster and at least one point per cluster, got {self}"
            )));
        }
        if !(self.overlap >= 0.0 && self.overlap.is_finite()) {
            return Err(Error::InvalidParameter(format!("blob overlap {} must be >= 0", self.overlap)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let noise = Normal::new(0.0, self.blob_std()).expect("finite nonnegative std");
        let mut rows = Vec::with_capacity(self.points);
        let mut labels = Vec::with_capacity(self.points);
        for (blob, center) in self.centers().iter().enumerate() {
            let size = self.points / self.clusters + usize::from(blob < self.points % self.clusters);
            for _ in 0..size {
                rows.push(vec![center[0] + noise.sample(&mut rng), center[1] + noise.sample(&mut rng)]);
                labels.push(blob.to_string());
            }
        }
        Dataset::from_parts(&rows, &labels)
    }
}

impl fmt::Display for BlobSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "blobs:{}:{}:{}:{}", self.clusters, self.points, self.overlap, self.seed)
    }
}

impl FromStr for BlobSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad =
            || Error::InvalidParameter(format!("bad synthetic spec {s:?}, expected blobs:<c>:<n>:<overlap>[:<seed>]"));
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() < 4 || parts.len() > 5 || parts[0] != "blobs" {
            return Err(bad());
        }
        Ok(BlobSpec {
            clusters: parts[1].parse().map_err(|_| bad())?,
            points: parts[2].parse().map_err(|_| bad())?,
            overlap: parts[3].parse().map_err(|_| bad())?,
            seed: parts.get(4).map_or(Ok(0), |p| p.parse()).map_err(|_| bad())?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_prints() {
        let spec: BlobSpec = "blobs:3:600:0.35".parse().unwrap();
        assert_eq!(spec, BlobSpec::OVERLAPPED_3);
        assert_eq!(spec.to_string().parse::<BlobSpec>().unwrap(), spec);
        assert!("blobs:3".parse::<BlobSpec>().is_err());
        assert!("moons:3:6:0.1".parse::<BlobSpec>().is_err());
    }

    #[test]
    fn generates_balanced_labelled_blobs() {
        let ds = BlobSpec { clusters: 3, points: 10, overlap: 0.1, seed: 4 }.generate().unwrap();
        assert_eq!(ds.len(), 10);
        assert_eq!(ds.num_classes(), 3);
        let counts: Vec<usize> = (0..3).map(|c| ds.labels().iter().filter(|&&l| l == c).count()).collect();
        assert_eq!(counts, [4, 3, 3]);
    }
}
