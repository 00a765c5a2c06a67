//! Datasets, partitions and retrieval series.
//!
//! Both [`Dataset`] and [`Partition`] validate their invariants at
//! construction and are immutable afterwards, so they can be shared freely
//! between worker threads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An N×F matrix of finite reals with feature names and optional ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    name: String,
    n_points: usize,
    n_features: usize,
    /// Row-major, `n_points * n_features` entries.
    values: Vec<f64>,
    feature_names: Vec<String>,
    labels: Option<Vec<usize>>,
}

impl Dataset {
    /// Builds a dataset from row-major values.
    pub fn from_flat(
        name: impl Into<String>,
        n_points: usize,
        n_features: usize,
        values: Vec<f64>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if n_points == 0 {
            return Err(Error::InvalidDataset("dataset has no points".into()));
        }
        if n_features == 0 {
            return Err(Error::InvalidDataset("dataset has no features".into()));
        }
        if values.len() != n_points * n_features {
            return Err(Error::LengthMismatch {
                expected: n_points * n_features,
                got: values.len(),
            });
        }
        if feature_names.len() != n_features {
            return Err(Error::LengthMismatch {
                expected: n_features,
                got: feature_names.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite value at row {}, feature {}",
                pos / n_features,
                pos % n_features
            )));
        }
        Ok(Dataset {
            name: name.into(),
            n_points,
            n_features,
            values,
            feature_names,
            labels: None,
        })
    }

    /// Builds a dataset from rows, naming features `x0, x1, ...`.
    pub fn from_rows(name: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n_features) {
            return Err(Error::LengthMismatch {
                expected: n_features,
                got: bad.len(),
            });
        }
        let names = (0..n_features).map(|j| format!("x{j}")).collect();
        let values = rows.iter().flatten().copied().collect();
        Dataset::from_flat(name, rows.len(), n_features, values, names)
    }

    /// Attaches ground-truth labels, which must cover `{0..k*-1}` contiguously.
    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n_points {
            return Err(Error::LengthMismatch {
                expected: self.n_points,
                got: labels.len(),
            });
        }
        let k = labels.iter().max().map_or(0, |m| m + 1);
        validate_assignments(&labels, k, self.n_points)?;
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_features)
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_features + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// The ground-truth partition C*, when labels are present.
    pub fn ground_truth(&self) -> Option<Partition> {
        let labels = self.labels.as_ref()?;
        let k = labels.iter().max().map_or(0, |m| m + 1);
        Some(Partition::new(labels.clone(), k).expect("labels validated at construction"))
    }

    /// Per-feature bounding box as `(min, max)` pairs.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); self.n_features];
        for row in self.rows() {
            for (b, &v) in bounds.iter_mut().zip(row) {
                b.0 = b.0.min(v);
                b.1 = b.1.max(v);
            }
        }
        bounds
    }

    /// Z-scored copy. Constant features are centred but left unscaled.
    pub fn standardized(&self) -> Dataset {
        let n = self.n_points as f64;
        let mut mean = vec![0.0; self.n_features];
        for row in self.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; self.n_features];
        for row in self.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let sd: Vec<f64> = var
            .iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        let values = self
            .rows()
            .flat_map(|row| {
                row.iter()
                    .zip(&mean)
                    .zip(&sd)
                    .map(|((v, m), s)| (v - m) / s)
                    .collect::<Vec<_>>()
            })
            .collect();
        Dataset {
            values,
            ..self.clone()
        }
    }

    /// Rows at `indices`, in the given order. Labels are dropped.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Dataset> {
        let mut values = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            if i >= self.n_points {
                return Err(Error::IndexOutOfBounds {
                    index: i,
                    limit: self.n_points,
                });
            }
            values.extend_from_slice(self.row(i));
        }
        Dataset::from_flat(
            self.name.clone(),
            indices.len(),
            self.n_features,
            values,
            self.feature_names.clone(),
        )
    }
}

/// An assignment of each of N points to one of k non-empty clusters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PartitionRepr", into = "PartitionRepr")]
pub struct Partition {
    assignments: Vec<usize>,
    k: usize,
    cluster_sizes: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct PartitionRepr {
    assignments: Vec<usize>,
    k: usize,
}

impl TryFrom<PartitionRepr> for Partition {
    type Error = Error;

    fn try_from(repr: PartitionRepr) -> Result<Self> {
        Partition::new(repr.assignments, repr.k)
    }
}

impl From<Partition> for PartitionRepr {
    fn from(p: Partition) -> Self {
        PartitionRepr {
            assignments: p.assignments,
            k: p.k,
        }
    }
}

impl Partition {
    pub fn new(assignments: Vec<usize>, k: usize) -> Result<Self> {
        validate_assignments(&assignments, k, assignments.len())?;
        let mut cluster_sizes = vec![0; k];
        for &a in &assignments {
            cluster_sizes[a] += 1;
        }
        Ok(Partition {
            assignments,
            k,
            cluster_sizes,
        })
    }

    /// Compacts arbitrary labels into `0..k` in first-appearance order.
    pub fn from_labels<T: Eq + std::hash::Hash + Clone>(labels: &[T]) -> Result<Self> {
        let mut ids = std::collections::HashMap::new();
        let assignments: Vec<usize> = labels
            .iter()
            .map(|l| {
                let next = ids.len();
                *ids.entry(l.clone()).or_insert(next)
            })
            .collect();
        Partition::new(assignments, ids.len())
    }

    /// All `n` points in cluster 0.
    pub fn single(n: usize) -> Result<Self> {
        Partition::new(vec![0; n], 1)
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_points(&self) -> usize {
        self.assignments.len()
    }

    pub fn cluster_sizes(&self) -> &[usize] {
        &self.cluster_sizes
    }

    /// Point indices of `cluster`, ascending.
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter_map(|(i, &a)| (a == cluster).then_some(i))
            .collect()
    }

    /// Point indices of every cluster, each ascending.
    pub fn all_members(&self) -> Vec<Vec<usize>> {
        let mut members: Vec<Vec<usize>> = self
            .cluster_sizes
            .iter()
            .map(|&s| Vec::with_capacity(s))
            .collect();
        for (i, &a) in self.assignments.iter().enumerate() {
            members[a].push(i);
        }
        members
    }

    /// Applies `permutation[old] = new` to every label.
    pub fn relabel(&self, permutation: &[usize]) -> Result<Partition> {
        if permutation.len() != self.k {
            return Err(Error::LengthMismatch {
                expected: self.k,
                got: permutation.len(),
            });
        }
        let assignments = self.assignments.iter().map(|&a| permutation[a]).collect();
        Partition::new(assignments, self.k)
    }
}

/// Checks raw assignments against the partition invariants for `n` points.
pub fn validate_assignments(assignments: &[usize], k: usize, n: usize) -> Result<()> {
    if assignments.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: assignments.len(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidConfig("partition must have k >= 1".into()));
    }
    let mut seen = vec![false; k];
    for &a in assignments {
        if a >= k {
            return Err(Error::OutOfRangeLabel { label: a, k });
        }
        seen[a] = true;
    }
    if let Some(cluster) = seen.iter().position(|s| !s) {
        return Err(Error::EmptyCluster { cluster });
    }
    Ok(())
}

/// Ok iff `partition` is a valid partition of a dataset with `n` points.
pub fn validate_partition(partition: &Partition, n: usize) -> Result<()> {
    validate_assignments(&partition.assignments, partition.k, n)?;
    let sum: usize = partition.cluster_sizes.iter().sum();
    if sum != n || partition.cluster_sizes.len() != partition.k {
        return Err(Error::LengthMismatch { expected: n, got: sum });
    }
    Ok(())
}

/// Values of `feature` for the members of `cluster`, in point-index order.
pub fn cluster_feature_values(
    dataset: &Dataset,
    partition: &Partition,
    cluster: usize,
    feature: usize,
) -> Result<Vec<f64>> {
    if partition.n_points() != dataset.n_points() {
        return Err(Error::LengthMismatch {
            expected: dataset.n_points(),
            got: partition.n_points(),
        });
    }
    if cluster >= partition.k() {
        return Err(Error::IndexOutOfBounds {
            index: cluster,
            limit: partition.k(),
        });
    }
    if feature >= dataset.n_features() {
        return Err(Error::IndexOutOfBounds {
            index: feature,
            limit: dataset.n_features(),
        });
    }
    Ok(partition
        .assignments()
        .iter()
        .enumerate()
        .filter(|(_, &a)| a == cluster)
        .map(|(i, _)| dataset.value(i, feature))
        .collect())
}

/// Rejects `k` outside `1..=N` before any fit starts.
pub fn ensure_clusterable(dataset: &Dataset, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    if dataset.n_points() < k {
        return Err(Error::DatasetTooSmall {
            n: dataset.n_points(),
            k,
        });
    }
    Ok(())
}

/// One partition for every k in `[k_min, k_max]`, from a single algorithm run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalSeries {
    k_min: usize,
    partitions: Vec<Partition>,
}

impl RetrievalSeries {
    pub fn new(k_min: usize, partitions: Vec<Partition>) -> Result<Self> {
        if partitions.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n = partitions[0].n_points();
        for (offset, p) in partitions.iter().enumerate() {
            if p.k() != k_min + offset {
                return Err(Error::MissingRetrieval(k_min + offset));
            }
            if p.n_points() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: p.n_points(),
                });
            }
        }
        Ok(RetrievalSeries { k_min, partitions })
    }

    pub fn k_min(&self) -> usize {
        self.k_min
    }

    pub fn k_max(&self) -> usize {
        self.k_min + self.partitions.len() - 1
    }

    pub fn len(&self) -> usize {
        self.partitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partitions.is_empty()
    }

    pub fn get(&self, k: usize) -> Result<&Partition> {
        k.checked_sub(self.k_min)
            .and_then(|i| self.partitions.get(i))
            .ok_or(Error::MissingRetrieval(k))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Partition> {
        self.partitions.iter()
    }
}
