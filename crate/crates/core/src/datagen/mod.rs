//! Artificial datasets and CSV ingestion.

mod csv;
mod fixtures;

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed::RngSeed;

pub use self::csv::{load_csv, read_csv, write_csv, write_csv_to, CsvSchema, LoadedCsv};
pub use fixtures::{load_bundled, BundledDataset};

const MAX_CENTROID_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArtificialId {
    B,
    C,
    D,
    E,
}

impl ArtificialId {
    pub const ALL: [ArtificialId; 4] = [ArtificialId::B, ArtificialId::C, ArtificialId::D, ArtificialId::E];

    pub fn name(self) -> &'static str {
        match self {
            ArtificialId::B => "b",
            ArtificialId::C => "c",
            ArtificialId::D => "d",
            ArtificialId::E => "e",
        }
    }

    pub fn k_star(self) -> usize {
        match self {
            ArtificialId::B => 3,
            ArtificialId::C | ArtificialId::D => 4,
            ArtificialId::E => 2,
        }
    }
}

impl fmt::Display for ArtificialId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArtificialId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ArtificialId::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown artificial dataset `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArtificialSpec {
    pub id: ArtificialId,
    pub n_points: usize,
    pub n_features: usize,
    pub k_star: usize,
    /// Minimum distance between any two centroids, in units of the
    /// within-cluster standard deviation.
    pub cluster_separation: f64,
    pub seed: RngSeed,
}

impl ArtificialSpec {
    /// 1000 points, 10 features, separation 4.
    pub fn new(id: ArtificialId, seed: RngSeed) -> Self {
        ArtificialSpec {
            id,
            n_points: 1000,
            n_features: 10,
            k_star: id.k_star(),
            cluster_separation: 4.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_star < 2 {
            return Err(Error::InvalidConfig(format!("k_star must be >= 2, got {}", self.k_star)));
        }
        if self.n_points < self.k_star {
            return Err(Error::DatasetTooSmall {
                n: self.n_points,
                k: self.k_star,
            });
        }
        if self.n_features == 0 {
            return Err(Error::InvalidConfig("n_features must be >= 1".into()));
        }
        if !(self.cluster_separation.is_finite() && self.cluster_separation >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "cluster_separation must be finite and >= 0, got {}",
                self.cluster_separation
            )));
        }
        Ok(())
    }
}

/// Spherical unit-variance Gaussian clusters in near-equal proportions.
/// Centroids are drawn from an isotropic normal and redrawn until every pair
/// is at least `cluster_separation` apart.
pub fn generate_artificial(spec: &ArtificialSpec) -> Result<Dataset> {
    generate_with_centroids(spec).map(|(ds, _)| ds)
}

fn generate_with_centroids(spec: &ArtificialSpec) -> Result<(Dataset, Vec<f64>)> {
    spec.validate()?;
    let (n, f, k) = (spec.n_points, spec.n_features, spec.k_star);
    let root = spec.seed.derive(&["artificial", spec.id.name()]);
    let mut rng = root.rng();

    // typical pairwise distance of the draws is 1.5 × separation
    let spread = 1.5 * spec.cluster_separation / (2.0 * f as f64).sqrt();
    let centroid_dist = Normal::new(0.0, spread.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let min_sq = spec.cluster_separation * spec.cluster_separation;
    let mut centroids = None;
    for _ in 0..MAX_CENTROID_ATTEMPTS {
        let candidate: Vec<f64> = (0..k * f).map(|_| centroid_dist.sample(&mut rng)).collect();
        let separated = (0..k).all(|a| {
            (a + 1..k).all(|b| {
                let d: f64 = (0..f)
                    .map(|j| (candidate[a * f + j] - candidate[b * f + j]).powi(2))
                    .sum();
                d >= min_sq
            })
        });
        if separated {
            centroids = Some(candidate);
            break;
        }
    }
    let centroids = centroids.ok_or(Error::SeparationInfeasible {
        separation: spec.cluster_separation,
        attempts: MAX_CENTROID_ATTEMPTS,
    })?;

    let mut values = Vec::with_capacity(n * f);
    let mut labels = Vec::with_capacity(n);
    for c in 0..k {
        let size = n / k + usize::from(c < n % k);
        for _ in 0..size {
            for j in 0..f {
                let z: f64 = StandardNormal.sample(&mut rng);
                values.push(centroids[c * f + j] + z);
            }
            labels.push(c);
        }
    }
    let names = (0..f).map(|j| format!("x{j}")).collect();
    let ds = Dataset::from_flat(format!("artificial_{}", spec.id), n, f, values, names)?.with_labels(labels)?;
    Ok((ds, centroids))
}
