//! Cluster-number selection from traces of information gain.
//!
//! Two retrievals `C^(k+1)` and `C^(k)` are equivalent when every cluster of
//! the finer one has at least one distributionally equivalent cluster in the
//! coarser one. Two clusters are equivalent when no feature rejects equality
//! of distribution under a two-sample KS test at the Bonferroni-corrected
//! level `α_u / (F·(k+1)·k)`. The selected k is the smallest one whose
//! successor brings no new cluster, maximised over a grid of `α_u ∈ (0, α]`.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Partition, RetrievalSeries};
use crate::error::{Error, Result};
use crate::stats::{bonferroni_threshold, ks_two_sample_sorted};

/// Clusters below this size are flagged in reports (the test still runs).
pub const SMALL_CLUSTER: usize = 5;

/// Which side of the retrieval pair must be covered by equivalences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquivalenceDirection {
    /// Every cluster of `C^(k+1)` has an equivalent cluster in `C^(k)`.
    #[default]
    FinerCovered,
    /// Every cluster of `C^(k)` has an equivalent cluster in `C^(k+1)`.
    CoarserCovered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub k: usize,
    pub k_plus_1: usize,
    pub alpha_u: f64,
    pub threshold: f64,
    pub n_features: usize,
    /// Flattened `(k+1) × k × F`; see [`EquivalenceReport::p_value`].
    pub p_values: Vec<f64>,
    /// `(k+1) × k`.
    pub cluster_equivalence: Vec<Vec<bool>>,
    pub retrievals_equivalent: bool,
    /// `(i, j)` pairs where either cluster has fewer than [`SMALL_CLUSTER`] points.
    pub small_pairs: Vec<(usize, usize)>,
}

impl EquivalenceReport {
    /// p-value for cluster `i` of `C^(k+1)`, cluster `j` of `C^(k)`, feature `f`.
    pub fn p_value(&self, i: usize, j: usize, f: usize) -> f64 {
        self.p_values[(i * self.k + j) * self.n_features + f]
    }

    pub fn min_p_value(&self) -> f64 {
        self.p_values.iter().copied().fold(1.0, f64::min)
    }
}

/// Per-cluster, per-feature samples sorted ascending: `[cluster][feature]`.
struct SortedClusters(Vec<Vec<Vec<f64>>>);

impl SortedClusters {
    fn new(dataset: &Dataset, partition: &Partition) -> Result<Self> {
        if partition.n_points() != dataset.n_points() {
            return Err(Error::ShapeMismatch(format!(
                "partition covers {} points, dataset has {}",
                partition.n_points(),
                dataset.n_points()
            )));
        }
        let f = dataset.n_features();
        let mut clusters: Vec<Vec<Vec<f64>>> = partition
            .cluster_sizes()
            .iter()
            .map(|&s| vec![Vec::with_capacity(s); f])
            .collect();
        for (row, &a) in dataset.rows().zip(partition.assignments()) {
            for (sample, &v) in clusters[a].iter_mut().zip(row) {
                sample.push(v);
            }
        }
        for cluster in &mut clusters {
            for sample in cluster {
                sample.sort_by(f64::total_cmp);
            }
        }
        Ok(SortedClusters(clusters))
    }
}

/// All KS p-values between the clusters of two consecutive retrievals. They
/// do not depend on `α_u`, so one table serves the whole grid.
struct Transition {
    k: usize,
    n_features: usize,
    p_values: Vec<f64>,
    small_pairs: Vec<(usize, usize)>,
}

impl Transition {
    fn new(finer: &SortedClusters, coarser: &SortedClusters) -> Self {
        let k = coarser.0.len();
        let n_features = coarser.0[0].len();
        let mut p_values = Vec::with_capacity(finer.0.len() * k * n_features);
        let mut small_pairs = Vec::new();
        for (i, ci) in finer.0.iter().enumerate() {
            for (j, cj) in coarser.0.iter().enumerate() {
                for (fi, fj) in ci.iter().zip(cj) {
                    p_values.push(ks_two_sample_sorted(fi, fj).p_value);
                }
                if ci[0].len().min(cj[0].len()) < SMALL_CLUSTER {
                    small_pairs.push((i, j));
                }
            }
        }
        Transition {
            k,
            n_features,
            p_values,
            small_pairs,
        }
    }

    fn cluster_equivalence(&self, threshold: f64) -> Vec<Vec<bool>> {
        let f = self.n_features;
        (0..=self.k)
            .map(|i| {
                (0..self.k)
                    .map(|j| {
                        let base = (i * self.k + j) * f;
                        self.p_values[base..base + f].iter().all(|&p| p >= threshold)
                    })
                    .collect()
            })
            .collect()
    }

    fn report(&self, alpha_u: f64, direction: EquivalenceDirection) -> Result<EquivalenceReport> {
        let threshold = bonferroni_threshold(alpha_u, self.n_features * (self.k + 1) * self.k)?;
        let cluster_equivalence = self.cluster_equivalence(threshold);
        let retrievals_equivalent = covered(&cluster_equivalence, direction);
        Ok(EquivalenceReport {
            k: self.k,
            k_plus_1: self.k + 1,
            alpha_u,
            threshold,
            n_features: self.n_features,
            p_values: self.p_values.clone(),
            cluster_equivalence,
            retrievals_equivalent,
            small_pairs: self.small_pairs.clone(),
        })
    }

    fn equivalent(&self, alpha_u: f64, direction: EquivalenceDirection) -> Result<bool> {
        let threshold = bonferroni_threshold(alpha_u, self.n_features * (self.k + 1) * self.k)?;
        Ok(covered(&self.cluster_equivalence(threshold), direction))
    }
}

fn covered(matrix: &[Vec<bool>], direction: EquivalenceDirection) -> bool {
    match direction {
        EquivalenceDirection::FinerCovered => matrix.iter().all(|row| row.iter().any(|&e| e)),
        EquivalenceDirection::CoarserCovered => {
            let k = matrix.first().map_or(0, Vec::len);
            (0..k).all(|j| matrix.iter().any(|row| row[j]))
        }
    }
}

/// Feature-wise equivalence of two clusters, given as `F` samples each.
pub fn clusters_equivalent(c_a: &[Vec<f64>], c_b: &[Vec<f64>], threshold: f64) -> Result<(bool, Vec<f64>)> {
    if c_a.len() != c_b.len() {
        return Err(Error::FeatureCountMismatch {
            left: c_a.len(),
            right: c_b.len(),
        });
    }
    let p_values = c_a
        .iter()
        .zip(c_b)
        .map(|(a, b)| crate::stats::ks_two_sample(a, b).map(|r| r.p_value))
        .collect::<Result<Vec<_>>>()?;
    let equivalent = p_values.iter().all(|&p| p >= threshold);
    Ok((equivalent, p_values))
}

pub fn retrievals_equivalent(
    dataset: &Dataset,
    part_k1: &Partition,
    part_k: &Partition,
    alpha_u: f64,
) -> Result<EquivalenceReport> {
    retrievals_equivalent_with(dataset, part_k1, part_k, alpha_u, EquivalenceDirection::default())
}

pub fn retrievals_equivalent_with(
    dataset: &Dataset,
    part_k1: &Partition,
    part_k: &Partition,
    alpha_u: f64,
    direction: EquivalenceDirection,
) -> Result<EquivalenceReport> {
    if part_k1.k() != part_k.k() + 1 {
        return Err(Error::ShapeMismatch(format!(
            "expected retrievals with k+1 and k clusters, got {} and {}",
            part_k1.k(),
            part_k.k()
        )));
    }
    let finer = SortedClusters::new(dataset, part_k1)?;
    let coarser = SortedClusters::new(dataset, part_k)?;
    Transition::new(&finer, &coarser).report(alpha_u, direction)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaSelection {
    pub alpha_u: f64,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoGuideResult {
    pub k_hat: usize,
    pub alpha: f64,
    pub alpha_grid: Vec<f64>,
    pub per_alpha_k: Vec<AlphaSelection>,
    /// The `α_u` whose scan produced `k_hat` (the largest such grid value).
    pub selected_alpha_u: f64,
    /// Reports for every k scanned under `selected_alpha_u`.
    pub reports: Vec<EquivalenceReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct InfoGuideOptions {
    pub direction: EquivalenceDirection,
}

/// `n` log-spaced values from `alpha / 1000` to `alpha`.
pub fn default_alpha_grid(alpha: f64) -> Vec<f64> {
    log_spaced_grid(alpha / 1000.0, alpha, 20)
}

pub fn log_spaced_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut grid: Vec<f64> = (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect();
    grid[n - 1] = hi;
    grid
}

/// Sorted cluster columns and transition p-values, built on first use.
struct TransitionCache<'a> {
    dataset: &'a Dataset,
    retrievals: &'a RetrievalSeries,
    sorted: Vec<Option<SortedClusters>>,
    transitions: Vec<Option<Transition>>,
}

impl TransitionCache<'_> {
    fn get(&mut self, k: usize) -> Result<&Transition> {
        let k_min = self.retrievals.k_min();
        let idx = k - k_min;
        if self.transitions[idx].is_none() {
            for kk in [k, k + 1] {
                if self.sorted[kk - k_min].is_none() {
                    self.sorted[kk - k_min] =
                        Some(SortedClusters::new(self.dataset, self.retrievals.get(kk)?)?);
                }
            }
            let t = Transition::new(
                self.sorted[idx + 1].as_ref().expect("filled above"),
                self.sorted[idx].as_ref().expect("filled above"),
            );
            self.transitions[idx] = Some(t);
        }
        Ok(self.transitions[idx].as_ref().expect("filled above"))
    }
}

pub fn select_k_infoguide(
    dataset: &Dataset,
    retrievals: &RetrievalSeries,
    alpha: f64,
    alpha_grid: &[f64],
) -> Result<InfoGuideResult> {
    select_k_infoguide_with(dataset, retrievals, alpha, alpha_grid, &InfoGuideOptions::default())
}

pub fn select_k_infoguide_with(
    dataset: &Dataset,
    retrievals: &RetrievalSeries,
    alpha: f64,
    alpha_grid: &[f64],
    options: &InfoGuideOptions,
) -> Result<InfoGuideResult> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if alpha_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if let Some(&bad) = alpha_grid.iter().find(|&&a| !(a > 0.0 && a <= alpha)) {
        return Err(Error::InvalidAlpha(bad));
    }
    let (k_min, k_max) = (retrievals.k_min(), retrievals.k_max());

    let mut cache = TransitionCache {
        dataset,
        retrievals,
        sorted: (k_min..=k_max).map(|_| None).collect(),
        transitions: (k_min..k_max).map(|_| None).collect(),
    };

    let mut per_alpha_k = Vec::with_capacity(alpha_grid.len());
    for &alpha_u in alpha_grid {
        let mut selected = k_max;
        for k in k_min..k_max {
            if cache.get(k)?.equivalent(alpha_u, options.direction)? {
                selected = k;
                break;
            }
        }
        per_alpha_k.push(AlphaSelection { alpha_u, k: selected });
    }

    let k_hat = per_alpha_k.iter().map(|s| s.k).max().expect("grid is non-empty");
    let selected_alpha_u = per_alpha_k
        .iter()
        .filter(|s| s.k == k_hat)
        .map(|s| s.alpha_u)
        .fold(f64::NEG_INFINITY, f64::max);
    debug_assert_eq!(
        k_hat,
        per_alpha_k
            .iter()
            .max_by(|a, b| a.alpha_u.total_cmp(&b.alpha_u))
            .map(|s| s.k)
            .unwrap(),
        "selection must be monotone in alpha_u"
    );

    let reports = (k_min..=k_hat.min(k_max - 1))
        .map(|k| cache.get(k)?.report(selected_alpha_u, options.direction))
        .collect::<Result<Vec<_>>>()?;

    Ok(InfoGuideResult {
        k_hat,
        alpha,
        alpha_grid: alpha_grid.to_vec(),
        per_alpha_k,
        selected_alpha_u,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rng: &mut ChaCha8Rng, n: usize, mean: f64) -> Vec<f64> {
        (0..n)
            .map(|_| mean + Distribution::<f64>::sample(&StandardNormal, rng))
            .collect::<Vec<f64>>()
    }

    #[test]
    fn identical_clusters_are_equivalent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = vec![gaussian(&mut rng, 30, 0.0), gaussian(&mut rng, 30, 2.0)];
        let (eq, p) = clusters_equivalent(&c, &c, 0.05).unwrap();
        assert!(eq);
        assert!(p.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn shifted_blob_is_not_equivalent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = vec![gaussian(&mut rng, 100, 0.0)];
        let b = vec![gaussian(&mut rng, 100, 10.0)];
        let (eq, p) = clusters_equivalent(&a, &b, 0.05).unwrap();
        assert!(!eq);
        assert!(p[0] < 1e-10);
    }

    #[test]
    fn one_rejecting_feature_suffices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shared = gaussian(&mut rng, 100, 0.0);
        let a = vec![shared.clone(), gaussian(&mut rng, 100, 0.0)];
        let b = vec![shared, gaussian(&mut rng, 100, 10.0)];
        let (eq, p) = clusters_equivalent(&a, &b, 0.05).unwrap();
        assert!(!eq);
        assert_eq!(p[0], 1.0);
    }

    #[test]
    fn mismatched_features() {
        assert_eq!(
            clusters_equivalent(&[vec![1.0]], &[vec![1.0], vec![2.0]], 0.05),
            Err(Error::FeatureCountMismatch { left: 1, right: 2 })
        );
        assert_eq!(
            clusters_equivalent(&[vec![]], &[vec![2.0]], 0.05),
            Err(Error::EmptySample)
        );
    }

    #[test]
    fn shape_mismatch() {
        let ds = Dataset::from_rows("s", &[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let p1 = Partition::single(3).unwrap();
        let p3 = Partition::new(vec![0, 1, 2], 3).unwrap();
        assert!(matches!(
            retrievals_equivalent(&ds, &p3, &p1, 0.05),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn threshold_and_small_pairs() {
        let ds = Dataset::from_rows("s", &[vec![0.0, 1.0], vec![1.0, 1.0], vec![2.0, 0.0]]).unwrap();
        let p2 = Partition::new(vec![0, 0, 1], 2).unwrap();
        let p1 = Partition::single(3).unwrap();
        let r = retrievals_equivalent(&ds, &p2, &p1, 0.05).unwrap();
        assert_eq!(r.threshold, 0.05 / (2.0 * 2.0 * 1.0));
        // two finer clusters, one coarser, two features
        assert_eq!(r.p_values.len(), 4);
        assert_eq!(r.small_pairs, vec![(0, 0), (1, 0)]);
    }

    #[test]
    fn grid_validation() {
        let ds = Dataset::from_rows("s", &[vec![0.0], vec![1.0]]).unwrap();
        let series = RetrievalSeries::new(
            1,
            vec![Partition::single(2).unwrap(), Partition::new(vec![0, 1], 2).unwrap()],
        )
        .unwrap();
        assert_eq!(select_k_infoguide(&ds, &series, 0.05, &[]), Err(Error::EmptyGrid));
        assert_eq!(
            select_k_infoguide(&ds, &series, 0.05, &[0.1]),
            Err(Error::InvalidAlpha(0.1))
        );
    }

    #[test]
    fn repeated_point_stops_at_k_min() {
        let ds = Dataset::from_rows("same", &vec![vec![3.0, -1.0]; 12]).unwrap();
        let partitions: Vec<Partition> = (1..=5)
            .map(|k| Partition::new((0..12).map(|i| i % k).collect(), k).unwrap())
            .collect();
        let series = RetrievalSeries::new(1, partitions).unwrap();
        let r = select_k_infoguide(&ds, &series, 0.05, &default_alpha_grid(0.05)).unwrap();
        assert_eq!(r.k_hat, 1);
        assert!(r.reports[0].retrievals_equivalent);
    }

    #[test]
    fn default_grid_shape() {
        let g = default_alpha_grid(0.05);
        assert_eq!(g.len(), 20);
        assert!((g[0] - 0.05e-3).abs() < 1e-15);
        assert_eq!(g[19], 0.05);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn directions_disagree_on_outlier_split() {
        // C^(1) = everything; C^(2) = {bulk, 10 far outliers}. The bulk still
        // matches the whole dataset, the outlier group matches nothing.
        let rows: Vec<Vec<f64>> = (0..210)
            .map(|i| vec![if i < 200 { i as f64 * 0.01 } else { 50.0 + i as f64 * 0.01 }])
            .collect();
        let ds = Dataset::from_rows("d", &rows).unwrap();
        let p2 = Partition::new((0..210).map(|i| usize::from(i >= 200)).collect(), 2).unwrap();
        let p1 = Partition::single(210).unwrap();
        let finer = retrievals_equivalent_with(&ds, &p2, &p1, 0.05, EquivalenceDirection::FinerCovered).unwrap();
        let coarser = retrievals_equivalent_with(&ds, &p2, &p1, 0.05, EquivalenceDirection::CoarserCovered).unwrap();
        assert_eq!(finer.cluster_equivalence, vec![vec![true], vec![false]]);
        assert!(!finer.retrievals_equivalent);
        assert!(coarser.retrievals_equivalent);
    }
}
