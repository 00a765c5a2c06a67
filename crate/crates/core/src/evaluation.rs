//! External evaluation: agreement with ground truth and out-of-sample
//! regression gain for datasets without it.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Partition};
use crate::error::{Error, Result};
use crate::seed::RngSeed;
use crate::stats::{wilson_interval, WilsonInterval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NmiNormalization {
    #[default]
    Arithmetic,
    Geometric,
    Max,
}

/// NMI with the arithmetic mean of the two entropies.
pub fn nmi(a: &Partition, b: &Partition) -> Result<f64> {
    nmi_with(a, b, NmiNormalization::Arithmetic)
}

pub fn nmi_with(a: &Partition, b: &Partition, normalization: NmiNormalization) -> Result<f64> {
    if a.n_points() != b.n_points() {
        return Err(Error::LengthMismatch {
            expected: a.n_points(),
            got: b.n_points(),
        });
    }
    let n = a.n_points() as f64;
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    for (&x, &y) in a.assignments().iter().zip(b.assignments()) {
        *joint.entry((x, y)).or_default() += 1;
    }
    let entropy = |sizes: &[usize]| -> f64 {
        sizes
            .iter()
            .map(|&s| s as f64 / n)
            .map(|p| if p > 0.0 { -p * p.ln() } else { 0.0 })
            .sum()
    };
    let ha = entropy(a.cluster_sizes());
    let hb = entropy(b.cluster_sizes());
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    if ha == 0.0 || hb == 0.0 {
        return Ok(0.0);
    }
    // sum in a fixed order so the value does not depend on hash iteration
    let mut cells: Vec<((usize, usize), usize)> = joint.into_iter().collect();
    cells.sort_unstable();
    let mi: f64 = cells
        .iter()
        .map(|&((x, y), c)| {
            let pxy = c as f64 / n;
            let px = a.cluster_sizes()[x] as f64 / n;
            let py = b.cluster_sizes()[y] as f64 / n;
            pxy * (pxy / (px * py)).ln()
        })
        .sum();
    let norm = match normalization {
        NmiNormalization::Arithmetic => (ha + hb) / 2.0,
        NmiNormalization::Geometric => (ha * hb).sqrt(),
        NmiNormalization::Max => ha.max(hb),
    };
    Ok((mi / norm).clamp(0.0, 1.0))
}

/// Wilson interval for the share of trials that selected `k_star`.
pub fn prob_true_k(selected_ks: &[usize], k_star: usize, confidence: f64) -> Result<WilsonInterval> {
    if selected_ks.is_empty() {
        return Err(Error::EmptyInput);
    }
    let successes = selected_ks.iter().filter(|&&k| k == k_star).count();
    wilson_interval(successes, selected_ks.len(), confidence)
}

/// `1 − (1 − R²)(n − 1)/(n − p − 1)`.
pub fn adjusted_r2(r2: f64, n_samples: usize, n_predictors: usize) -> Result<f64> {
    if n_samples <= n_predictors + 1 {
        return Err(Error::DegenerateDof {
            n_samples,
            n_predictors,
        });
    }
    let n = n_samples as f64;
    let p = n_predictors as f64;
    Ok(1.0 - (1.0 - r2) * (n - 1.0) / (n - p - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressionEvalConfig {
    pub test_fraction: f64,
    /// Repeated random train/test splits.
    pub folds: usize,
    pub seed: RngSeed,
}

impl Default for RegressionEvalConfig {
    fn default() -> Self {
        RegressionEvalConfig {
            test_fraction: 0.3,
            folds: 10,
            seed: RngSeed(0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub r2_train: f64,
    pub r2_out: f64,
    pub adjusted_r2_out: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionEval {
    /// Mean adjusted out-of-sample R² over the folds that were not skipped.
    pub mean_adjusted_r2_out: f64,
    /// `None` marks a fold skipped for a rank-deficient design.
    pub folds: Vec<Option<FoldResult>>,
    /// Fitted predictors, intercept excluded.
    pub n_predictors: usize,
}

const RIDGE: f64 = 1e-10;
const PIVOT_TOLERANCE: f64 = 1e-12;

/// Ordinary least squares on `features` plus, when given, `k − 1` one-hot
/// cluster indicators (cluster 0 is the reference level). Every fold uses the
/// same seeded split regardless of `partition`, so runs with and without
/// clusters are directly comparable.
pub fn external_regression_eval(
    features: &Dataset,
    target: &[f64],
    partition: Option<&Partition>,
    config: &RegressionEvalConfig,
) -> Result<RegressionEval> {
    let n = features.n_points();
    if target.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: target.len(),
        });
    }
    if let Some(p) = partition {
        if p.n_points() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: p.n_points(),
            });
        }
    }
    if !(config.test_fraction > 0.0 && config.test_fraction < 1.0) {
        return Err(Error::InvalidConfig("test_fraction must lie in (0, 1)".into()));
    }
    if config.folds == 0 {
        return Err(Error::InvalidConfig("folds must be >= 1".into()));
    }

    let design = design_matrix(features, partition);
    let n_predictors = design.ncols() - 1;
    let n_test = ((n as f64) * config.test_fraction).round() as usize;
    if n_test <= n_predictors + 1 || n - n_test <= n_predictors + 1 {
        return Err(Error::DegenerateDof {
            n_samples: n_test.min(n - n_test),
            n_predictors,
        });
    }

    let folds: Vec<Option<FoldResult>> = (0..config.folds)
        .map(|fold| {
            let (train, test) = split(n, n_test, config.seed.stream(fold as u64));
            match fit_ols(&design, target, &train) {
                Ok(beta) => {
                    let r2_train = r_squared(&design, target, &train, &beta);
                    let r2_out = r_squared(&design, target, &test, &beta);
                    let adjusted_r2_out = adjusted_r2(r2_out, test.len(), n_predictors)?;
                    Ok(Some(FoldResult {
                        r2_train,
                        r2_out,
                        adjusted_r2_out,
                    }))
                }
                Err(Error::RankDeficient) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let kept: Vec<f64> = folds.iter().flatten().map(|f| f.adjusted_r2_out).collect();
    if kept.is_empty() {
        return Err(Error::RankDeficient);
    }
    Ok(RegressionEval {
        mean_adjusted_r2_out: kept.iter().sum::<f64>() / kept.len() as f64,
        folds,
        n_predictors,
    })
}

fn design_matrix(features: &Dataset, partition: Option<&Partition>) -> DMatrix<f64> {
    let n = features.n_points();
    let f = features.n_features();
    let extra = partition.map_or(0, |p| p.k() - 1);
    let mut x = DMatrix::zeros(n, 1 + f + extra);
    for (i, row) in features.rows().enumerate() {
        x[(i, 0)] = 1.0;
        for (j, &v) in row.iter().enumerate() {
            x[(i, 1 + j)] = v;
        }
        if let Some(p) = partition {
            let c = p.assignments()[i];
            if c > 0 {
                x[(i, f + c)] = 1.0;
            }
        }
    }
    x
}

/// Seeded shuffle; the first `n_test` indices form the test split.
fn split(n: usize, n_test: usize, seed: RngSeed) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed.rng());
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    (train, test)
}

fn fit_ols(design: &DMatrix<f64>, target: &[f64], rows: &[usize]) -> Result<DVector<f64>> {
    let x = design.select_rows(rows);
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| target[i]));
    let gram = x.transpose() * &x;
    let p = gram.nrows();
    let regularized = &gram + DMatrix::identity(p, p) * RIDGE;
    let chol = regularized.clone().cholesky().ok_or(Error::RankDeficient)?;
    let l = chol.l();
    for i in 0..p {
        let scale = gram[(i, i)];
        // squared pivot = residual norm of column i after the earlier columns
        if scale <= 0.0 || l[(i, i)] * l[(i, i)] < PIVOT_TOLERANCE * scale {
            return Err(Error::RankDeficient);
        }
    }
    Ok(chol.solve(&(x.transpose() * y)))
}

fn r_squared(design: &DMatrix<f64>, target: &[f64], rows: &[usize], beta: &DVector<f64>) -> f64 {
    let mean = rows.iter().map(|&i| target[i]).sum::<f64>() / rows.len() as f64;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for &i in rows {
        let pred: f64 = design.row(i).iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
        ss_res += (target[i] - pred).powi(2);
        ss_tot += (target[i] - mean).powi(2);
    }
    if ss_tot == 0.0 {
        return if ss_res == 0.0 { 1.0 } else { 0.0 };
    }
    1.0 - ss_res / ss_tot
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn nmi_identical_and_relabeled() {
        let a = Partition::new(vec![0, 0, 1, 1, 2, 2], 3).unwrap();
        assert!((nmi(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let b = a.relabel(&[2, 0, 1]).unwrap();
        assert!((nmi(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nmi_independent_partitions_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 10_000;
        let a = Partition::new((0..n).map(|i| i % 2).collect(), 2).unwrap();
        let b = Partition::new((0..n).map(|_| rng.random_range(0..2)).collect(), 2).unwrap();
        assert!(nmi(&a, &b).unwrap() < 0.01);
    }

    #[test]
    fn nmi_zero_entropy_conventions() {
        let one = Partition::single(4).unwrap();
        let two = Partition::new(vec![0, 0, 1, 1], 2).unwrap();
        assert_eq!(nmi(&one, &one).unwrap(), 1.0);
        assert_eq!(nmi(&one, &two).unwrap(), 0.0);
        assert!(nmi(&one, &Partition::single(3).unwrap()).is_err());
    }

    #[test]
    fn nmi_normalizations_order() {
        let a = Partition::new(vec![0, 0, 0, 1, 1, 1, 2, 2], 3).unwrap();
        let b = Partition::new(vec![0, 0, 1, 1, 1, 1, 1, 1], 2).unwrap();
        let ar = nmi_with(&a, &b, NmiNormalization::Arithmetic).unwrap();
        let ge = nmi_with(&a, &b, NmiNormalization::Geometric).unwrap();
        let mx = nmi_with(&a, &b, NmiNormalization::Max).unwrap();
        assert!(mx <= ar && ar <= ge);
    }

    #[test]
    fn prob_true_k_examples() {
        let w = prob_true_k(&[3, 3, 3], 3, 0.95).unwrap();
        assert!(w.point > 0.5);
        assert_eq!(w.upper, 1.0);
        let w = prob_true_k(&[2, 4, 5], 3, 0.95).unwrap();
        assert_eq!(w.lower, 0.0);
        assert_eq!(w, wilson_interval(0, 3, 0.95).unwrap());
        let ks: Vec<usize> = (0..30).map(|i| if i < 21 { 4 } else { 5 }).collect();
        assert_eq!(prob_true_k(&ks, 4, 0.95).unwrap(), wilson_interval(21, 30, 0.95).unwrap());
        assert_eq!(prob_true_k(&[], 3, 0.95), Err(Error::EmptyInput));
    }

    #[test]
    fn adjusted_r2_examples() {
        assert_eq!(adjusted_r2(1.0, 50, 3).unwrap(), 1.0);
        assert!((adjusted_r2(0.0, 100, 9).unwrap() + 0.1).abs() < 1e-12);
        assert!((adjusted_r2(0.5, 11, 9).unwrap() + 4.0).abs() < 1e-12);
        assert!(matches!(adjusted_r2(0.5, 10, 9), Err(Error::DegenerateDof { .. })));
    }

    proptest! {
        #[test]
        fn adjusted_r2_decreasing_in_predictors(r2 in -1.0f64..0.999, p in 0usize..20) {
            let n = 50;
            prop_assert!(adjusted_r2(r2, n, p + 1).unwrap() < adjusted_r2(r2, n, p).unwrap());
        }

        #[test]
        fn nmi_symmetric_and_bounded(
            a in proptest::collection::vec(0usize..4, 2..60),
            seed in 0u64..1000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<usize> = a.iter().map(|_| rng.random_range(0..3)).collect();
            let pa = Partition::from_labels(&a).unwrap();
            let pb = Partition::from_labels(&b).unwrap();
            let x = nmi(&pa, &pb).unwrap();
            let y = nmi(&pb, &pa).unwrap();
            prop_assert!((x - y).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&x));
        }
    }

    fn regression_fixture(n: usize, seed: u64, offset: f64) -> (Dataset, Vec<f64>, Partition) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut target = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let x1: f64 = StandardNormal.sample(&mut rng);
            let x2: f64 = StandardNormal.sample(&mut rng);
            let c = i % 2;
            let noise: f64 = StandardNormal.sample(&mut rng);
            rows.push(vec![x1, x2]);
            target.push(2.0 * x1 - x2 + if c == 0 { -offset } else { offset } + noise);
            labels.push(c);
        }
        (
            Dataset::from_rows("r", &rows).unwrap(),
            target,
            Partition::new(labels, 2).unwrap(),
        )
    }

    #[test]
    fn exact_linear_target_scores_one() {
        let (ds, _, p) = regression_fixture(200, 1, 0.0);
        let target: Vec<f64> = ds.rows().map(|r| 3.0 + 2.0 * r[0] - 0.5 * r[1]).collect();
        let cfg = RegressionEvalConfig::default();
        let without = external_regression_eval(&ds, &target, None, &cfg).unwrap();
        let with = external_regression_eval(&ds, &target, Some(&p), &cfg).unwrap();
        assert!((without.mean_adjusted_r2_out - 1.0).abs() < 1e-9);
        assert!((with.mean_adjusted_r2_out - 1.0).abs() < 1e-9);
        assert_eq!(with.n_predictors, 3);
    }

    #[test]
    fn planted_offsets_raise_out_of_sample_fit() {
        let (ds, target, p) = regression_fixture(600, 2, 5.0);
        let cfg = RegressionEvalConfig::default();
        let without = external_regression_eval(&ds, &target, None, &cfg).unwrap();
        let with = external_regression_eval(&ds, &target, Some(&p), &cfg).unwrap();
        assert!(with.mean_adjusted_r2_out > without.mean_adjusted_r2_out + 0.05);
    }

    #[test]
    fn random_labels_do_not_help() {
        let (ds, target, _) = regression_fixture(600, 3, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noise = Partition::from_labels(&(0..600).map(|i| if i < 10 { i } else { rng.random_range(0..10) }).collect::<Vec<_>>()).unwrap();
        assert_eq!(noise.k(), 10);
        let cfg = RegressionEvalConfig::default();
        let without = external_regression_eval(&ds, &target, None, &cfg).unwrap();
        let with = external_regression_eval(&ds, &target, Some(&noise), &cfg).unwrap();
        assert!(with.mean_adjusted_r2_out <= without.mean_adjusted_r2_out + 0.01);
    }

    #[test]
    fn nested_model_train_fit_never_better() {
        let (ds, target, p) = regression_fixture(300, 5, 1.0);
        let cfg = RegressionEvalConfig::default();
        let without = external_regression_eval(&ds, &target, None, &cfg).unwrap();
        let with = external_regression_eval(&ds, &target, Some(&p), &cfg).unwrap();
        for (a, b) in without.folds.iter().zip(&with.folds) {
            let (a, b) = (a.unwrap(), b.unwrap());
            assert!(a.r2_train <= b.r2_train + 1e-12);
        }
    }

    #[test]
    fn absent_cluster_in_training_split_skips_fold() {
        let (ds, target, _) = regression_fixture(100, 6, 0.0);
        // cluster 1 holds a single point, so some training splits miss it
        let p = Partition::new((0..100).map(|i| usize::from(i == 0)).collect(), 2).unwrap();
        let cfg = RegressionEvalConfig {
            folds: 20,
            ..Default::default()
        };
        let eval = external_regression_eval(&ds, &target, Some(&p), &cfg).unwrap();
        assert!(eval.folds.iter().any(Option::is_none));
        assert!(eval.folds.iter().any(Option::is_some));
    }

    #[test]
    fn length_mismatch() {
        let (ds, target, _) = regression_fixture(50, 7, 0.0);
        assert!(matches!(
            external_regression_eval(&ds, &target[..49], None, &RegressionEvalConfig::default()),
            Err(Error::LengthMismatch { .. })
        ));
    }
}
