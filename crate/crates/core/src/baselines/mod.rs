//! Distance-based internal validation indices and their k-selection rules.

mod gap;
mod silhouette;
mod summary;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use gap::{gap_from_series, gap_statistic, select_k_gap, GapOptions, GapPoint, GapProfile};
pub use silhouette::silhouette;
pub use summary::{calinski_harabasz, cluster_summary, ClusterSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub metric_name: String,
    pub k: usize,
    pub value: f64,
}

/// k with the largest finite score; ties go to the smaller k.
pub fn select_k_argmax(scores: &[MetricScore]) -> Result<usize> {
    if let Some(first) = scores.first() {
        if scores.iter().any(|s| s.metric_name != first.metric_name) {
            return Err(Error::InvalidConfig("scores mix several metrics".into()));
        }
    }
    let mut best: Option<&MetricScore> = None;
    for s in scores.iter().filter(|s| s.value.is_finite()) {
        best = match best {
            Some(b) if s.value > b.value || (s.value == b.value && s.k < b.k) => Some(s),
            Some(b) => Some(b),
            None => Some(s),
        };
    }
    best.map(|s| s.k).ok_or(Error::EmptyScores)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(pairs: &[(usize, f64)]) -> Vec<MetricScore> {
        pairs
            .iter()
            .map(|&(k, value)| MetricScore {
                metric_name: "silhouette".into(),
                k,
                value,
            })
            .collect()
    }

    #[test]
    fn argmax_examples() {
        assert_eq!(select_k_argmax(&scores(&[(2, 0.3), (3, 0.7), (4, 0.5)])).unwrap(), 3);
        assert_eq!(select_k_argmax(&scores(&[(2, 0.5), (3, 0.5)])).unwrap(), 2);
        assert_eq!(select_k_argmax(&scores(&[(3, 0.5), (2, 0.5)])).unwrap(), 2);
        assert_eq!(select_k_argmax(&scores(&[(2, f64::NAN)])), Err(Error::EmptyScores));
        assert_eq!(select_k_argmax(&[]), Err(Error::EmptyScores));
    }
}
