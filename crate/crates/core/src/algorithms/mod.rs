//! Clustering algorithms mapping `(Dataset, k)` to a [`Partition`].

mod gmm;
mod kmeans;
mod ward;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{ensure_clusterable, Dataset, Partition, RetrievalSeries};
use crate::error::{Error, Result};
use crate::seed::RngSeed;

pub use gmm::{gmm_em, gmm_fit, GmmFit};
pub use kmeans::{kmeans, kmeans_fit, KMeansFit};
pub use ward::{ward_agglomerative, ward_linkage, Dendrogram, Merge};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlgorithmConfig {
    pub max_iterations: usize,
    /// Relative change of the objective below which a fit counts as converged.
    pub convergence_tolerance: f64,
    /// Independent initialisations; the best objective wins.
    pub restarts: usize,
    pub seed: RngSeed,
    /// Added to every GMM covariance diagonal.
    pub covariance_regularization: f64,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        AlgorithmConfig {
            max_iterations: 300,
            convergence_tolerance: 1e-6,
            restarts: 1,
            seed: RngSeed(0),
            covariance_regularization: 1e-6,
        }
    }
}

impl AlgorithmConfig {
    pub fn with_seed(mut self, seed: RngSeed) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be >= 1".into()));
        }
        if !(self.convergence_tolerance > 0.0) {
            return Err(Error::InvalidConfig("convergence_tolerance must be > 0".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be >= 1".into()));
        }
        if !(self.covariance_regularization >= 0.0) {
            return Err(Error::InvalidConfig(
                "covariance_regularization must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Inertia (k-means), log-likelihood (GMM) or final SSW (Ward), per iteration.
    pub objective_trace: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
}

impl FitDiagnostics {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    KMeans,
    Gmm,
    Ward,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::KMeans, Algorithm::Gmm, Algorithm::Ward];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::KMeans => "kmeans",
            Algorithm::Gmm => "gmm",
            Algorithm::Ward => "ward",
        }
    }

    pub fn is_deterministic(self) -> bool {
        matches!(self, Algorithm::Ward)
    }

    pub fn fit(self, dataset: &Dataset, k: usize, config: &AlgorithmConfig) -> Result<(Partition, FitDiagnostics)> {
        match self {
            Algorithm::KMeans => kmeans(dataset, k, config),
            Algorithm::Gmm => gmm_em(dataset, k, config),
            Algorithm::Ward => {
                let partition = ward_agglomerative(dataset, k)?;
                let ssw = crate::baselines::cluster_summary(dataset, &partition)?.ssw;
                Ok((
                    partition,
                    FitDiagnostics {
                        objective_trace: vec![ssw],
                        iterations_run: 1,
                        converged: true,
                    },
                ))
            }
        }
    }

    /// Independent fits for every k in `[k_min, k_max]`. Ward builds its
    /// dendrogram once and cuts it at each k, which gives the same partitions
    /// as separate runs.
    pub fn fit_series(
        self,
        dataset: &Dataset,
        k_min: usize,
        k_max: usize,
        config: &AlgorithmConfig,
    ) -> Result<RetrievalSeries> {
        if k_min == 0 || k_max < k_min {
            return Err(Error::InvalidConfig(format!(
                "invalid k range [{k_min}, {k_max}]"
            )));
        }
        ensure_clusterable(dataset, k_max)?;
        let partitions = match self {
            Algorithm::Ward => {
                let dendrogram = ward_linkage(dataset);
                (k_min..=k_max)
                    .map(|k| dendrogram.cut(k))
                    .collect::<Result<Vec<_>>>()?
            }
            _ => (k_min..=k_max)
                .map(|k| self.fit(dataset, k, config).map(|(p, _)| p))
                .collect::<Result<Vec<_>>>()?,
        };
        RetrievalSeries::new(k_min, partitions)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kmeans" | "k-means" => Ok(Algorithm::KMeans),
            "gmm" => Ok(Algorithm::Gmm),
            "ward" | "agglomerative" => Ok(Algorithm::Ward),
            other => Err(Error::InvalidConfig(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Moves points into empty clusters until every cluster has a member.
///
/// Each empty cluster takes the point farthest from its current centre among
/// clusters that can spare one. The centre of the filled cluster is reset to
/// that point.
pub(crate) fn repair_empty_clusters(
    dataset: &Dataset,
    assignments: &mut [usize],
    centers: &mut [f64],
    k: usize,
) {
    let f = dataset.n_features();
    let mut sizes = vec![0usize; k];
    for &a in assignments.iter() {
        sizes[a] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, &a) in assignments.iter().enumerate() {
            if sizes[a] < 2 {
                continue;
            }
            let d = squared_distance(dataset.row(i), &centers[a * f..(a + 1) * f]);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        let (i, _) = best.expect("n >= k guarantees a donor cluster");
        sizes[assignments[i]] -= 1;
        assignments[i] = empty;
        sizes[empty] = 1;
        centers[empty * f..(empty + 1) * f].copy_from_slice(dataset.row(i));
    }
}
