use super::MetricScore;
use crate::data::{validate_partition, Dataset, Partition};
use crate::error::{Error, Result};

/// Mean silhouette width with Euclidean distances. Points in singleton
/// clusters score 0.
pub fn silhouette(dataset: &Dataset, partition: &Partition) -> Result<MetricScore> {
    let k = partition.k();
    if k < 2 {
        return Err(Error::KTooSmall(k));
    }
    validate_partition(partition, dataset.n_points())?;
    let n = dataset.n_points();
    let sizes = partition.cluster_sizes();
    let assignments = partition.assignments();

    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for i in 0..n {
        let own = assignments[i];
        if sizes[own] == 1 {
            continue;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        let xi = dataset.row(i);
        for (j, &aj) in assignments.iter().enumerate() {
            if j != i {
                sums[aj] += euclidean(xi, dataset.row(j));
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(MetricScore {
        metric_name: "silhouette".into(),
        k,
        value: total / n as f64,
    })
}

#[inline]
fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
