//! Agglomerative clustering with Ward's linkage.
//!
//! Distances live in a condensed upper-triangular matrix and are updated with
//! the Lance–Williams recurrence. Each active slot caches its nearest
//! neighbour among higher slots, so a merge costs O(N) plus the rows whose
//! cached neighbour was invalidated.
//!
//! Ties between equal merge costs go to the pair with the smallest
//! `(slot_a, slot_b)`, which makes the dendrogram fully deterministic.

use super::squared_distance;
use crate::data::{ensure_clusterable, Dataset, Partition};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    /// Surviving slot (the smaller index).
    pub a: usize,
    /// Absorbed slot.
    pub b: usize,
    /// Increase in total within-cluster sum of squares caused by the merge.
    pub cost: f64,
    /// Size of the merged cluster.
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    n_points: usize,
    merges: Vec<Merge>,
}

struct Condensed {
    n: usize,
    data: Vec<f64>,
}

impl Condensed {
    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.data[self.index(a, b)]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let idx = self.index(a, b);
        self.data[idx] = v;
    }
}

pub fn ward_linkage(dataset: &Dataset) -> Dendrogram {
    let n = dataset.n_points();
    let mut dist = Condensed {
        n,
        data: Vec::with_capacity(n * n.saturating_sub(1) / 2),
    };
    for i in 0..n {
        for j in i + 1..n {
            dist.data.push(squared_distance(dataset.row(i), dataset.row(j)));
        }
    }

    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut nn = vec![usize::MAX; n];
    let mut nn_dist = vec![f64::INFINITY; n];

    let recompute = |r: usize, active: &[bool], dist: &Condensed, nn: &mut [usize], nn_dist: &mut [f64]| {
        let mut best = (f64::INFINITY, usize::MAX);
        for j in r + 1..n {
            if active[j] {
                let d = dist.get(r, j);
                if d < best.0 {
                    best = (d, j);
                }
            }
        }
        nn_dist[r] = best.0;
        nn[r] = best.1;
    };

    for r in 0..n {
        recompute(r, &active, &dist, &mut nn, &mut nn_dist);
    }

    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for _ in 1..n {
        let mut a = usize::MAX;
        let mut best = f64::INFINITY;
        for r in 0..n {
            if active[r] && nn_dist[r] < best {
                best = nn_dist[r];
                a = r;
            }
        }
        let b = nn[a];
        let d_ab = best;
        let (sa, sb) = (size[a], size[b]);

        for x in 0..n {
            if !active[x] || x == a || x == b {
                continue;
            }
            let sx = size[x];
            let updated = ((sx + sa) as f64 * dist.get(x, a) + (sx + sb) as f64 * dist.get(x, b)
                - sx as f64 * d_ab)
                / (sx + sa + sb) as f64;
            dist.set(x, a, updated);
        }
        active[b] = false;
        size[a] = sa + sb;
        merges.push(Merge {
            a,
            b,
            // the recurrence keeps d = 2·Δ(SSW)
            cost: d_ab / 2.0,
            size: sa + sb,
        });

        for r in 0..n {
            if !active[r] {
                continue;
            }
            if r == a || nn[r] == a || nn[r] == b {
                recompute(r, &active, &dist, &mut nn, &mut nn_dist);
            } else if r < a {
                let d = dist.get(r, a);
                if d < nn_dist[r] || (d == nn_dist[r] && a < nn[r]) {
                    nn_dist[r] = d;
                    nn[r] = a;
                }
            }
        }
    }

    Dendrogram { n_points: n, merges }
}

impl Dendrogram {
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Applies the first `N − k` merges. Cluster ids follow the first
    /// appearance of each cluster in point order.
    pub fn cut(&self, k: usize) -> Result<Partition> {
        if k == 0 {
            return Err(Error::InvalidConfig("k must be >= 1".into()));
        }
        if k > self.n_points {
            return Err(Error::DatasetTooSmall {
                n: self.n_points,
                k,
            });
        }
        let mut parent: Vec<usize> = (0..self.n_points).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for m in &self.merges[..self.n_points - k] {
            let ra = find(&mut parent, m.a);
            let rb = find(&mut parent, m.b);
            parent[rb] = ra;
        }
        let roots: Vec<usize> = (0..self.n_points).map(|i| find(&mut parent, i)).collect();
        Partition::from_labels(&roots)
    }
}

pub fn ward_agglomerative(dataset: &Dataset, k: usize) -> Result<Partition> {
    ensure_clusterable(dataset, k)?;
    ward_linkage(dataset).cut(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::cluster_summary;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(points: &[f64]) -> Dataset {
        let rows: Vec<Vec<f64>> = points.iter().map(|&p| vec![p]).collect();
        Dataset::from_rows("line", &rows).unwrap()
    }

    /// Greedy Ward by brute force: at every step try all pairs and evaluate
    /// the SSW increase from the merged cluster members directly.
    fn brute_force_ward(ds: &Dataset, k: usize) -> Vec<Vec<usize>> {
        let mut clusters: Vec<Vec<usize>> = (0..ds.n_points()).map(|i| vec![i]).collect();
        let ssw = |members: &[usize]| {
            let f = ds.n_features();
            let mut total = 0.0;
            for j in 0..f {
                let m = members.iter().map(|&i| ds.value(i, j)).sum::<f64>() / members.len() as f64;
                total += members.iter().map(|&i| (ds.value(i, j) - m).powi(2)).sum::<f64>();
            }
            total
        };
        while clusters.len() > k {
            let mut best = (f64::INFINITY, 0, 0);
            for a in 0..clusters.len() {
                for b in a + 1..clusters.len() {
                    let mut merged = clusters[a].clone();
                    merged.extend(&clusters[b]);
                    let inc = ssw(&merged) - ssw(&clusters[a]) - ssw(&clusters[b]);
                    if inc < best.0 - 1e-12 {
                        best = (inc, a, b);
                    }
                }
            }
            let taken = clusters.remove(best.2);
            clusters[best.1].extend(taken);
        }
        let mut out: Vec<Vec<usize>> = clusters
            .into_iter()
            .map(|mut c| {
                c.sort();
                c
            })
            .collect();
        out.sort();
        out
    }

    fn groups(p: &Partition) -> Vec<Vec<usize>> {
        let mut g = p.all_members();
        g.sort();
        g
    }

    #[test]
    fn four_points_two_groups() {
        let ds = line(&[0.0, 1.0, 10.0, 11.0]);
        let p = ward_agglomerative(&ds, 2).unwrap();
        assert_eq!(groups(&p), vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(groups(&p), brute_force_ward(&ds, 2));
    }

    #[test]
    fn extremes() {
        let ds = line(&[4.0, 1.0, 10.0, 11.0, 2.5]);
        assert_eq!(ward_agglomerative(&ds, 5).unwrap().cluster_sizes(), &[1; 5]);
        assert_eq!(ward_agglomerative(&ds, 1).unwrap().cluster_sizes(), &[5]);
        assert!(ward_agglomerative(&ds, 6).is_err());
    }

    #[test]
    fn matches_brute_force_greedy_on_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.random_range(3..12);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)])
                .collect();
            let ds = Dataset::from_rows("r", &rows).unwrap();
            let dendro = ward_linkage(&ds);
            for k in 1..=n {
                assert_eq!(groups(&dendro.cut(k).unwrap()), brute_force_ward(&ds, k));
            }
        }
    }

    #[test]
    fn merge_costs_sum_to_within_cluster_ss() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)])
            .collect();
        let ds = Dataset::from_rows("r", &rows).unwrap();
        let dendro = ward_linkage(&ds);
        for k in [1, 3, 7, 40] {
            let p = dendro.cut(k).unwrap();
            let ssw = cluster_summary(&ds, &p).unwrap().ssw;
            let sum: f64 = dendro.merges()[..40 - k].iter().map(|m| m.cost).sum();
            assert!((ssw - sum).abs() < 1e-9 * ssw.max(1.0));
        }
    }

    #[test]
    fn ties_merge_smallest_pair_first() {
        // three equally spaced points: (0,1) and (1,2) tie; (0,1) goes first
        let ds = line(&[0.0, 1.0, 2.0]);
        let d = ward_linkage(&ds);
        assert_eq!((d.merges()[0].a, d.merges()[0].b), (0, 1));
        assert_eq!(d.merges()[1].a, 0);
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.random_range(0.0..1.0)]).collect();
        let ds = Dataset::from_rows("r", &rows).unwrap();
        let first = ward_agglomerative(&ds, 4).unwrap();
        for _ in 0..3 {
            assert_eq!(ward_agglomerative(&ds, 4).unwrap(), first);
        }
    }
}
