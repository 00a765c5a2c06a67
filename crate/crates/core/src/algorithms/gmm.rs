//! Gaussian mixture with full covariances, fitted by expectation-maximisation.

use nalgebra::DMatrix;

use super::kmeans::kmeans_fit;
use super::{repair_empty_clusters, AlgorithmConfig, FitDiagnostics};
use crate::data::{ensure_clusterable, Dataset, Partition};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone)]
pub struct GmmFit {
    pub partition: Partition,
    pub weights: Vec<f64>,
    /// Row-major `k × F`.
    pub means: Vec<f64>,
    /// One row-major `F × F` matrix per component.
    pub covariances: Vec<Vec<f64>>,
    /// Log-likelihood per iteration.
    pub diagnostics: FitDiagnostics,
}

pub fn gmm_em(dataset: &Dataset, k: usize, config: &AlgorithmConfig) -> Result<(Partition, FitDiagnostics)> {
    let fit = gmm_fit(dataset, k, config)?;
    Ok((fit.partition, fit.diagnostics))
}

/// Inverse Cholesky factor of one component, with the pieces the E-step needs.
struct Component {
    /// `L⁻¹`, lower triangle, row-major `F × F`.
    inv_chol: Vec<f64>,
    log_det: f64,
}

impl Component {
    fn new(cov: &[f64], f: usize, index: usize) -> Result<Self> {
        let m = DMatrix::from_row_slice(f, f, cov);
        let chol = m
            .cholesky()
            .ok_or(Error::SingularCovariance { component: index })?;
        let l = chol.l();
        let mut log_det = 0.0;
        for i in 0..f {
            let d = l[(i, i)];
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::SingularCovariance { component: index });
            }
            log_det += 2.0 * d.ln();
        }
        let inv = l
            .solve_lower_triangular(&DMatrix::identity(f, f))
            .ok_or(Error::SingularCovariance { component: index })?;
        let mut inv_chol = vec![0.0; f * f];
        for i in 0..f {
            for j in 0..=i {
                inv_chol[i * f + j] = inv[(i, j)];
            }
        }
        if inv_chol.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularCovariance { component: index });
        }
        Ok(Component { inv_chol, log_det })
    }

    /// Squared Mahalanobis distance of the centred point `diff`.
    fn mahalanobis(&self, diff: &[f64]) -> f64 {
        let f = diff.len();
        let mut total = 0.0;
        for (i, row) in self.inv_chol.chunks_exact(f).enumerate() {
            let y = dot(&row[..=i], &diff[..=i]);
            total += y * y;
        }
        total
    }
}

/// Dot product with four independent accumulators.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// EM initialised from a k-means run with the same configuration.
pub fn gmm_fit(dataset: &Dataset, k: usize, config: &AlgorithmConfig) -> Result<GmmFit> {
    config.validate()?;
    ensure_clusterable(dataset, k)?;
    let n = dataset.n_points();
    let f = dataset.n_features();
    let reg = config.covariance_regularization;

    let init = kmeans_fit(dataset, k, config)?;
    let mut means = init.centroids.clone();
    let hard: Vec<Vec<f64>> = (0..k)
        .map(|c| {
            init.partition
                .assignments()
                .iter()
                .map(|&a| if a == c { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let mut covariances: Vec<Vec<f64>> = (0..k)
        .map(|c| weighted_covariance(dataset, &hard[c], &means[c * f..(c + 1) * f], reg))
        .collect();
    let mut weights: Vec<f64> = init
        .partition
        .cluster_sizes()
        .iter()
        .map(|&s| s as f64 / n as f64)
        .collect();

    // resp[c][i]
    let mut resp = vec![vec![0.0; n]; k];
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut log_probs = vec![0.0; k];
    let mut diff = vec![0.0; f];

    for iteration in 0..config.max_iterations {
        // E-step
        let components = covariances
            .iter()
            .enumerate()
            .map(|(c, cov)| Component::new(cov, f, c))
            .collect::<Result<Vec<_>>>()?;
        let offsets: Vec<f64> = components
            .iter()
            .zip(&weights)
            .map(|(comp, w)| w.ln() - 0.5 * (f as f64 * LN_2PI + comp.log_det))
            .collect();
        let mut log_likelihood = 0.0;
        for (i, x) in dataset.rows().enumerate() {
            for (c, comp) in components.iter().enumerate() {
                for ((d, v), m) in diff.iter_mut().zip(x).zip(&means[c * f..(c + 1) * f]) {
                    *d = v - m;
                }
                let m2 = comp.mahalanobis(&diff);
                log_probs[c] = offsets[c] - 0.5 * m2;
            }
            let max = log_probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + log_probs.iter().map(|lp| (lp - max).exp()).sum::<f64>().ln();
            log_likelihood += lse;
            for c in 0..k {
                resp[c][i] = (log_probs[c] - lse).exp();
            }
        }

        let previous = trace.last().copied();
        trace.push(log_likelihood);
        if let Some(prev) = previous {
            if (log_likelihood - prev).abs() <= config.convergence_tolerance * prev.abs() {
                converged = true;
                break;
            }
        }
        if iteration + 1 == config.max_iterations {
            break;
        }

        // M-step
        for c in 0..k {
            let nk: f64 = resp[c].iter().sum::<f64>() + 10.0 * f64::EPSILON;
            weights[c] = nk / n as f64;
            let mean = &mut means[c * f..(c + 1) * f];
            mean.iter_mut().for_each(|m| *m = 0.0);
            for (x, &r) in dataset.rows().zip(&resp[c]) {
                for (m, v) in mean.iter_mut().zip(x) {
                    *m += r * v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= nk);
            covariances[c] = weighted_covariance(dataset, &resp[c], &means[c * f..(c + 1) * f], reg);
        }
    }

    let mut assignments: Vec<usize> = (0..n)
        .map(|i| {
            (0..k)
                .max_by(|&a, &b| resp[a][i].total_cmp(&resp[b][i]).then(b.cmp(&a)))
                .expect("k >= 1")
        })
        .collect();
    let mut centers = means.clone();
    repair_empty_clusters(dataset, &mut assignments, &mut centers, k);

    let iterations_run = trace.len();
    Ok(GmmFit {
        partition: Partition::new(assignments, k).expect("repair leaves no empty cluster"),
        weights,
        means,
        covariances,
        diagnostics: FitDiagnostics {
            objective_trace: trace,
            iterations_run,
            converged,
        },
    })
}

/// `Σ r_i (x_i − μ)(x_i − μ)ᵀ / Σ r_i + reg·I`, row-major.
fn weighted_covariance(dataset: &Dataset, weights: &[f64], mean: &[f64], reg: f64) -> Vec<f64> {
    let f = dataset.n_features();
    let mut cov = vec![0.0; f * f];
    let mut total = 0.0;
    let mut diff = vec![0.0; f];
    for (x, &w) in dataset.rows().zip(weights) {
        if w == 0.0 {
            continue;
        }
        total += w;
        for ((d, v), m) in diff.iter_mut().zip(x).zip(mean) {
            *d = v - m;
        }
        for (a, row) in cov.chunks_exact_mut(f).enumerate() {
            let wa = w * diff[a];
            for (c, d) in row[..=a].iter_mut().zip(&diff[..=a]) {
                *c += wa * d;
            }
        }
    }
    let total = total + 10.0 * f64::EPSILON;
    for a in 0..f {
        for b in 0..=a {
            let v = cov[a * f + b] / total;
            cov[a * f + b] = v;
            cov[b * f + a] = v;
        }
        cov[a * f + a] += reg;
    }
    cov
}
