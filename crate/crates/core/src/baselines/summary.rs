use serde::{Deserialize, Serialize};

use super::MetricScore;
use crate::data::{validate_partition, Dataset, Partition};
use crate::error::{Error, Result};

/// Centroids, grand mean and the SSW/SSB decomposition of a partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    /// Row-major `k × F`.
    pub centroids: Vec<f64>,
    pub grand_mean: Vec<f64>,
    pub ssw: f64,
    pub ssb: f64,
}

impl ClusterSummary {
    pub fn centroid(&self, cluster: usize) -> &[f64] {
        let f = self.grand_mean.len();
        &self.centroids[cluster * f..(cluster + 1) * f]
    }
}

pub fn cluster_summary(dataset: &Dataset, partition: &Partition) -> Result<ClusterSummary> {
    validate_partition(partition, dataset.n_points())?;
    let f = dataset.n_features();
    let k = partition.k();
    let n = dataset.n_points() as f64;

    let mut centroids = vec![0.0; k * f];
    let mut grand_mean = vec![0.0; f];
    for (row, &a) in dataset.rows().zip(partition.assignments()) {
        for j in 0..f {
            centroids[a * f + j] += row[j];
            grand_mean[j] += row[j];
        }
    }
    for (c, &size) in partition.cluster_sizes().iter().enumerate() {
        for j in 0..f {
            centroids[c * f + j] /= size as f64;
        }
    }
    grand_mean.iter_mut().for_each(|g| *g /= n);

    let ssw = dataset
        .rows()
        .zip(partition.assignments())
        .map(|(row, &a)| {
            row.iter()
                .zip(&centroids[a * f..(a + 1) * f])
                .map(|(x, c)| (x - c) * (x - c))
                .sum::<f64>()
        })
        .sum();
    let ssb = partition
        .cluster_sizes()
        .iter()
        .enumerate()
        .map(|(c, &size)| {
            size as f64
                * centroids[c * f..(c + 1) * f]
                    .iter()
                    .zip(&grand_mean)
                    .map(|(m, g)| (m - g) * (m - g))
                    .sum::<f64>()
        })
        .sum();

    Ok(ClusterSummary {
        centroids,
        grand_mean,
        ssw,
        ssb,
    })
}

/// `(N − k)/(k − 1) · SSB/SSW`.
pub fn calinski_harabasz(dataset: &Dataset, partition: &Partition) -> Result<MetricScore> {
    let k = partition.k();
    if k < 2 {
        return Err(Error::KTooSmall(k));
    }
    let summary = cluster_summary(dataset, partition)?;
    if summary.ssw <= 0.0 {
        return Err(Error::ZeroWithinDispersion);
    }
    let n = dataset.n_points() as f64;
    let value = (n - k as f64) / (k as f64 - 1.0) * summary.ssb / summary.ssw;
    Ok(MetricScore {
        metric_name: "ch".into(),
        k,
        value,
    })
}
