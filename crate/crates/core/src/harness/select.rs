use serde::{Deserialize, Serialize};

use super::config::MetricKind;
use crate::algorithms::{Algorithm, AlgorithmConfig};
use crate::baselines::{
    calinski_harabasz, gap_from_series, select_k_argmax, select_k_gap, silhouette, GapOptions, MetricScore,
};
use crate::data::{Dataset, RetrievalSeries};
use crate::error::{Error, Result};
use crate::infoguide::{default_alpha_grid, retrievals_equivalent, select_k_infoguide};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectOptions {
    pub alpha: f64,
    pub gap: GapOptions,
}

impl Default for SelectOptions {
    fn default() -> Self {
        SelectOptions {
            alpha: 0.05,
            gap: GapOptions::default(),
        }
    }
}

/// Per-k evidence behind a selection. Which fields are set depends on the
/// metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerKDiagnostic {
    pub k: usize,
    /// Silhouette, CH or Gap value.
    pub score: Option<f64>,
    /// Gap's s_k.
    pub spread: Option<f64>,
    /// InfoGuide: whether C^(k+1) is equivalent to C^(k) at α_u = α.
    pub equivalent_to_next: Option<bool>,
    /// InfoGuide: smallest per-feature p-value over all cluster pairs.
    pub min_p_value: Option<f64>,
}

impl PerKDiagnostic {
    fn empty(k: usize) -> Self {
        PerKDiagnostic {
            k,
            score: None,
            spread: None,
            equivalent_to_next: None,
            min_p_value: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub metric: MetricKind,
    pub algorithm: Algorithm,
    pub k_hat: usize,
    pub per_k: Vec<PerKDiagnostic>,
}

/// Selects k with one metric over an already fitted series. Silhouette and
/// CH only score k ≥ 2.
pub fn select_k(
    dataset: &Dataset,
    series: &RetrievalSeries,
    algorithm: Algorithm,
    metric: MetricKind,
    options: &SelectOptions,
    config: &AlgorithmConfig,
) -> Result<SelectionResult> {
    let (k_hat, per_k) = match metric {
        MetricKind::InfoGuide => {
            let result = select_k_infoguide(dataset, series, options.alpha, &default_alpha_grid(options.alpha))?;
            let per_k = (series.k_min()..series.k_max())
                .map(|k| {
                    let report = retrievals_equivalent(dataset, series.get(k + 1)?, series.get(k)?, options.alpha)?;
                    Ok(PerKDiagnostic {
                        equivalent_to_next: Some(report.retrievals_equivalent),
                        min_p_value: Some(report.min_p_value()),
                        ..PerKDiagnostic::empty(k)
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            (result.k_hat, per_k)
        }
        MetricKind::Silhouette | MetricKind::Ch => {
            let scores = argmax_scores(dataset, series, metric)?;
            let k_hat = select_k_argmax(&scores)?;
            let per_k = scores
                .iter()
                .map(|s| PerKDiagnostic {
                    score: Some(s.value),
                    ..PerKDiagnostic::empty(s.k)
                })
                .collect();
            (k_hat, per_k)
        }
        MetricKind::Gap => {
            let profile = gap_from_series(dataset, series, algorithm, &options.gap, config)?;
            let k_hat = select_k_gap(&profile)?;
            let per_k = profile
                .per_k
                .iter()
                .map(|p| PerKDiagnostic {
                    score: Some(p.gap),
                    spread: Some(p.s_k),
                    ..PerKDiagnostic::empty(p.k)
                })
                .collect();
            (k_hat, per_k)
        }
    };
    Ok(SelectionResult {
        metric,
        algorithm,
        k_hat,
        per_k,
    })
}

fn argmax_scores(dataset: &Dataset, series: &RetrievalSeries, metric: MetricKind) -> Result<Vec<MetricScore>> {
    let start = series.k_min().max(2);
    if start > series.k_max() {
        return Err(Error::KTooSmall(series.k_max()));
    }
    (start..=series.k_max())
        .map(|k| {
            let p = series.get(k)?;
            match metric {
                MetricKind::Silhouette => silhouette(dataset, p),
                _ => calinski_harabasz(dataset, p),
            }
        })
        .collect()
}
