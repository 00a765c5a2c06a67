//! Lloyd's algorithm with k-means++ seeding.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{repair_empty_clusters, squared_distance, AlgorithmConfig, FitDiagnostics};
use crate::data::{ensure_clusterable, Dataset, Partition};
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub partition: Partition,
    /// Row-major `k × F`.
    pub centroids: Vec<f64>,
    pub diagnostics: FitDiagnostics,
}

impl KMeansFit {
    pub fn inertia(&self) -> f64 {
        self.diagnostics.final_objective()
    }
}

pub fn kmeans(dataset: &Dataset, k: usize, config: &AlgorithmConfig) -> Result<(Partition, FitDiagnostics)> {
    let fit = kmeans_fit(dataset, k, config)?;
    Ok((fit.partition, fit.diagnostics))
}

/// Best of `config.restarts` runs by final inertia. Restart `r` draws from
/// stream `r` of the seed, so adding restarts never worsens the result.
pub fn kmeans_fit(dataset: &Dataset, k: usize, config: &AlgorithmConfig) -> Result<KMeansFit> {
    config.validate()?;
    ensure_clusterable(dataset, k)?;
    let mut best: Option<KMeansFit> = None;
    for r in 0..config.restarts {
        let mut rng = config.seed.stream(r as u64).rng();
        let fit = lloyd(dataset, k, config, &mut rng);
        if best.as_ref().is_none_or(|b| fit.inertia() < b.inertia()) {
            best = Some(fit);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

fn kmeans_plus_plus(dataset: &Dataset, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = dataset.n_points();
    let f = dataset.n_features();
    let mut centers = Vec::with_capacity(k * f);
    let first = rng.random_range(0..n);
    centers.extend_from_slice(dataset.row(first));
    let mut min_d2: Vec<f64> = dataset.rows().map(|r| squared_distance(r, dataset.row(first))).collect();
    for _ in 1..k {
        let pick = match WeightedIndex::new(&min_d2) {
            Ok(dist) => dist.sample(rng),
            // every point coincides with a centre already
            Err(_) => rng.random_range(0..n),
        };
        let row = dataset.row(pick);
        centers.extend_from_slice(row);
        for (d, x) in min_d2.iter_mut().zip(dataset.rows()) {
            *d = d.min(squared_distance(x, row));
        }
    }
    centers
}

fn lloyd(dataset: &Dataset, k: usize, config: &AlgorithmConfig, rng: &mut ChaCha8Rng) -> KMeansFit {
    let n = dataset.n_points();
    let f = dataset.n_features();
    let mut centers = kmeans_plus_plus(dataset, k, rng);
    let mut assignments = vec![usize::MAX; n];
    let mut trace = Vec::new();
    let mut converged = false;

    for _ in 0..config.max_iterations {
        let mut changed = false;
        for (i, row) in dataset.rows().enumerate() {
            let current = assignments[i];
            let mut best = current;
            let mut best_d = if current == usize::MAX {
                f64::INFINITY
            } else {
                squared_distance(row, &centers[current * f..(current + 1) * f])
            };
            for c in 0..k {
                let d = squared_distance(row, &centers[c * f..(c + 1) * f]);
                // strict improvement only, so ties never flip an assignment
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if best != current {
                assignments[i] = best;
                changed = true;
            }
        }
        repair_empty_clusters(dataset, &mut assignments, &mut centers, k);
        update_centroids(dataset, &assignments, &mut centers, k);
        let inertia = inertia(dataset, &assignments, &centers);

        let previous = trace.last().copied();
        trace.push(inertia);
        if !changed {
            converged = true;
            break;
        }
        if let Some(prev) = previous {
            if (prev - inertia).abs() <= config.convergence_tolerance * prev.abs() {
                converged = true;
                break;
            }
        }
    }

    let iterations_run = trace.len();
    KMeansFit {
        partition: Partition::new(assignments, k).expect("repair leaves no empty cluster"),
        centroids: centers,
        diagnostics: FitDiagnostics {
            objective_trace: trace,
            iterations_run,
            converged,
        },
    }
}

fn update_centroids(dataset: &Dataset, assignments: &[usize], centers: &mut [f64], k: usize) {
    let f = dataset.n_features();
    let mut sums = vec![0.0; k * f];
    let mut counts = vec![0usize; k];
    for (row, &a) in dataset.rows().zip(assignments) {
        counts[a] += 1;
        for (s, v) in sums[a * f..(a + 1) * f].iter_mut().zip(row) {
            *s += v;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for j in 0..f {
                centers[c * f + j] = sums[c * f + j] / counts[c] as f64;
            }
        }
    }
}

fn inertia(dataset: &Dataset, assignments: &[usize], centers: &[f64]) -> f64 {
    let f = dataset.n_features();
    dataset
        .rows()
        .zip(assignments)
        .map(|(row, &a)| squared_distance(row, &centers[a * f..(a + 1) * f]))
        .sum()
}
