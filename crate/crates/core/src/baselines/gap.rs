//! Gap statistic against uniform reference data over the bounding box.

use std::ops::RangeInclusive;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::summary::cluster_summary;
use crate::algorithms::{Algorithm, AlgorithmConfig};
use crate::data::{Dataset, RetrievalSeries};
use crate::error::{Error, Result};
use crate::seed::RngSeed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GapOptions {
    /// Number of reference datasets, B.
    pub references: usize,
    /// Scale the reference standard deviation by `sqrt(1 + 1/B)`.
    pub sd_correction: bool,
}

impl Default for GapOptions {
    fn default() -> Self {
        GapOptions {
            references: 10,
            sd_correction: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub k: usize,
    pub gap: f64,
    pub s_k: f64,
    pub log_ssw: f64,
    pub expected_log_ssw_random: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapProfile {
    pub per_k: Vec<GapPoint>,
    pub references: usize,
    pub seed: RngSeed,
}

/// Fits `algorithm` on the data and on B uniform reference datasets for
/// every k in `k_range`.
pub fn gap_statistic(
    dataset: &Dataset,
    algorithm: Algorithm,
    k_range: RangeInclusive<usize>,
    options: &GapOptions,
    config: &AlgorithmConfig,
) -> Result<GapProfile> {
    if options.references < 2 {
        return Err(Error::InvalidB(options.references));
    }
    let series = algorithm.fit_series(dataset, *k_range.start(), *k_range.end(), config)?;
    gap_from_series(dataset, &series, algorithm, options, config)
}

/// Gap profile reusing already fitted partitions of the data; only the
/// reference datasets are clustered here.
pub fn gap_from_series(
    dataset: &Dataset,
    series: &RetrievalSeries,
    algorithm: Algorithm,
    options: &GapOptions,
    config: &AlgorithmConfig,
) -> Result<GapProfile> {
    let b = options.references;
    if b < 2 {
        return Err(Error::InvalidB(b));
    }
    let (k_min, k_max) = (series.k_min(), series.k_max());
    let data_logs = series
        .iter()
        .map(|p| log_ssw(dataset, p))
        .collect::<Result<Vec<_>>>()?;

    let root = config.seed.derive(&["gap-reference"]);
    let bounds = dataset.bounds();
    // rows: reference index, columns: k
    let reference_logs = (0..b)
        .into_par_iter()
        .map(|r| {
            let reference = uniform_reference(dataset, &bounds, root.stream(2 * r as u64))?;
            let cfg = config.with_seed(root.stream(2 * r as u64 + 1));
            let fits = algorithm.fit_series(&reference, k_min, k_max, &cfg)?;
            fits.iter().map(|p| log_ssw(&reference, p)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let correction = if options.sd_correction {
        (1.0 + 1.0 / b as f64).sqrt()
    } else {
        1.0
    };
    let per_k = (k_min..=k_max)
        .enumerate()
        .map(|(idx, k)| {
            let logs: Vec<f64> = reference_logs.iter().map(|row| row[idx]).collect();
            let mean = logs.iter().sum::<f64>() / b as f64;
            let var = logs.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / b as f64;
            GapPoint {
                k,
                gap: mean - data_logs[idx],
                s_k: var.sqrt() * correction,
                log_ssw: data_logs[idx],
                expected_log_ssw_random: mean,
            }
        })
        .collect();

    Ok(GapProfile {
        per_k,
        references: b,
        seed: config.seed,
    })
}

fn log_ssw(dataset: &Dataset, partition: &crate::data::Partition) -> Result<f64> {
    let ssw = cluster_summary(dataset, partition)?.ssw;
    if ssw <= 0.0 {
        return Err(Error::ZeroWithinDispersion);
    }
    Ok(ssw.ln())
}

fn uniform_reference(dataset: &Dataset, bounds: &[(f64, f64)], seed: RngSeed) -> Result<Dataset> {
    let mut rng = seed.rng();
    let values = (0..dataset.n_points())
        .flat_map(|_| bounds.iter().map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect::<Vec<_>>())
        .collect();
    Dataset::from_flat(
        format!("{}-reference", dataset.name()),
        dataset.n_points(),
        dataset.n_features(),
        values,
        dataset.feature_names().to_vec(),
    )
}

/// Smallest k with `Gap(k) ≥ Gap(k+1) − s_{k+1}`, else the largest k.
pub fn select_k_gap(profile: &GapProfile) -> Result<usize> {
    let points = &profile.per_k;
    if points.len() < 2 {
        return Err(Error::ProfileTooShort);
    }
    Ok(points
        .windows(2)
        .find(|w| w[0].gap >= w[1].gap - w[1].s_k)
        .map_or(points[points.len() - 1].k, |w| w[0].k))
}
