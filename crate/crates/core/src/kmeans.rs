//! Lloyd-style kernel k-means through the kernel trick.
//!
//! Squared feature-space distances to cluster means are evaluated as
//! `K(x,x) + S_l / |C_l|^2 - 2 R_l(x) / |C_l|`, where `S_l` sums the Gram
//! block of cluster `l` and `R_l(x)` sums the row of `x` over that cluster.

use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::GramMatrix;

/// Distances below this are rounding noise and are clamped to zero.
pub const NEGATIVE_DISTANCE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMethod {
    /// k-means++ seeding with kernel distances, then one assignment sweep.
    KppFeatureSpace,
    /// Uniformly random labels with every cluster seeded by one point.
    RandomAssignment,
}

impl FromStr for InitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kpp" | "kpp_feature_space" | "k-means++" => Ok(InitMethod::KppFeatureSpace),
            "random" | "random_assignment" => Ok(InitMethod::RandomAssignment),
            other => Err(Error::InvalidParameter(format!("unknown init method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitConfig {
    pub method: InitMethod,
    pub seed: u64,
    pub restarts: usize,
    pub max_iterations: usize,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self { method: InitMethod::KppFeatureSpace, seed: 0, restarts: 1, max_iterations: 300 }
    }
}

impl InitConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("restarts must be >= 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub labels: Vec<usize>,
    pub k: usize,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Cost after initialization and after every committed sweep of the
    /// winning restart.
    pub cost_trace: Vec<f64>,
}

impl ClusteringResult {
    pub fn sizes(&self) -> Vec<usize> {
        cluster_sizes(&self.labels, self.k)
    }
}

pub fn cluster_sizes(labels: &[usize], k: usize) -> Vec<usize> {
    let mut sizes = vec![0; k];
    for &l in labels {
        sizes[l] += 1;
    }
    sizes
}

/// Relabels to `0..k` in order of first appearance; returns the new labels
/// and `k`.
pub fn compact_labels(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::HashMap::new();
    let out = labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect();
    (out, map.len())
}

/// Per-cluster sizes and summed Gram blocks for a labelling with ids in
/// `0..k`.
#[derive(Debug, Clone)]
pub struct ClusterStats {
    pub sizes: Vec<usize>,
    /// `row_sums[[x, l]] = sum_{y in C_l} K(x, y)`.
    pub row_sums: Array2<f64>,
    /// `within[l] = sum_{y,z in C_l} K(y, z)`.
    pub within: Vec<f64>,
}

impl ClusterStats {
    pub fn new(gram: &GramMatrix, labels: &[usize], k: usize) -> Result<Self> {
        let n = gram.point_count();
        if labels.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidParameter(format!("label {bad} out of range for k={k}")));
        }
        let sizes = cluster_sizes(labels, k);
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|x| {
                let mut acc = vec![0.0; k];
                let row = gram.values().row(x);
                for (y, &kv) in row.iter().enumerate() {
                    acc[labels[y]] += kv;
                }
                acc
            })
            .collect();
        let mut row_sums = Array2::zeros((n, k));
        for (x, r) in rows.into_iter().enumerate() {
            for (l, v) in r.into_iter().enumerate() {
                row_sums[[x, l]] = v;
            }
        }
        let mut within = vec![0.0; k];
        for (x, &l) in labels.iter().enumerate() {
            within[l] += row_sums[[x, l]];
        }
        Ok(Self { sizes, row_sums, within })
    }

    /// Squared distance from point `x` to the feature-space mean of cluster `l`.
    pub fn sqdist(&self, gram: &GramMatrix, x: usize, l: usize) -> Result<f64> {
        let size = self.sizes[l];
        if size == 0 {
            return Err(Error::EmptyCluster(l));
        }
        let s = size as f64;
        let d = gram.get(x, x) + self.within[l] / (s * s) - 2.0 * self.row_sums[[x, l]] / s;
        Ok(clamp_distance(d))
    }

    /// `n x k` matrix of squared distances; empty clusters get `+inf`.
    pub fn distance_matrix(&self, gram: &GramMatrix) -> Array2<f64> {
        let n = gram.point_count();
        let k = self.sizes.len();
        Array2::from_shape_fn((n, k), |(x, l)| self.sqdist(gram, x, l).unwrap_or(f64::INFINITY))
    }
}

fn clamp_distance(d: f64) -> f64 {
    if d < 0.0 {
        if d < -NEGATIVE_DISTANCE_TOLERANCE {
            log::debug!("negative kernel distance {d} clamped to 0");
        }
        0.0
    } else {
        d
    }
}

/// `||psi(x) - c_l||^2` where `c_l` is the feature-space mean of cluster
/// `cluster` under `labels`.
pub fn point_to_cluster_sqdist(gram: &GramMatrix, labels: &[usize], point: usize, cluster: usize) -> Result<f64> {
    let n = gram.point_count();
    if labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
    }
    let mut size = 0usize;
    let mut row = 0.0;
    let mut within = 0.0;
    for y in 0..n {
        if labels[y] != cluster {
            continue;
        }
        size += 1;
        row += gram.get(point, y);
        for z in 0..n {
            if labels[z] == cluster {
                within += gram.get(y, z);
            }
        }
    }
    if size == 0 {
        return Err(Error::EmptyCluster(cluster));
    }
    let s = size as f64;
    Ok(clamp_distance(gram.get(point, point) + within / (s * s) - 2.0 * row / s))
}

/// Kernel k-means cost of a labelling with ids `0..k`, `k = max + 1`;
/// every id in that range must be used.
pub fn clustering_cost(gram: &GramMatrix, labels: &[usize]) -> Result<f64> {
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    if k == 0 {
        return Err(Error::EmptyDataset);
    }
    let stats = ClusterStats::new(gram, labels, k)?;
    if let Some(empty) = stats.sizes.iter().position(|&s| s == 0) {
        return Err(Error::EmptyCluster(empty));
    }
    labels.iter().enumerate().map(|(x, &l)| stats.sqdist(gram, x, l)).sum()
}

/// Cost of a labelling whose ids need not be contiguous.
pub fn partition_cost(gram: &GramMatrix, labels: &[usize]) -> Result<f64> {
    clustering_cost(gram, &compact_labels(labels).0)
}

/// Runs kernel k-means `init.restarts` times and keeps the lowest-cost
/// result (earliest restart wins ties).
pub fn kernel_kmeans(gram: &GramMatrix, k: usize, init: &InitConfig) -> Result<ClusteringResult> {
    init.validate()?;
    let n = gram.point_count();
    if k < 1 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let mut master = ChaCha8Rng::seed_from_u64(init.seed);
    let mut best: Option<ClusteringResult> = None;
    for _ in 0..init.restarts {
        let seed: u64 = master.random();
        let run = lloyd(gram, k, init, seed)?;
        if best.as_ref().is_none_or(|b| run.cost < b.cost) {
            best = Some(run);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

fn lloyd(gram: &GramMatrix, k: usize, init: &InitConfig, seed: u64) -> Result<ClusteringResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = match init.method {
        InitMethod::KppFeatureSpace => kpp_init(gram, k, &mut rng),
        InitMethod::RandomAssignment => random_init(gram.point_count(), k, &mut rng),
    };
    let mut trace = vec![clustering_cost(gram, &labels)?];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..init.max_iterations {
        iterations += 1;
        let stats = ClusterStats::new(gram, &labels, k)?;
        let dist = stats.distance_matrix(gram);
        let mut next: Vec<usize> = dist.rows().into_iter().map(|r| argmin(r.iter().copied())).collect();
        let own: Vec<f64> = next.iter().enumerate().map(|(x, &l)| dist[[x, l]]).collect();
        repair_empty(&mut next, &own, k);
        if next == labels {
            converged = true;
            break;
        }
        labels = next;
        trace.push(clustering_cost(gram, &labels)?);
    }
    let cost = clustering_cost(gram, &labels)?;
    Ok(ClusteringResult { labels, k, cost, iterations, converged, cost_trace: trace })
}

/// Index of the smallest value; the lowest index wins ties.
fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::INFINITY;
    for (i, v) in values.enumerate() {
        if v < best_v {
            best_v = v;
            best = i;
        }
    }
    best
}

/// Moves, for each empty cluster, the point farthest from its own center
/// (among clusters with more than one point) into it.
fn repair_empty(labels: &mut [usize], own_dist: &[f64], k: usize) {
    let mut sizes = cluster_sizes(labels, k);
    let mut moved = vec![false; labels.len()];
    for c in 0..k {
        if sizes[c] > 0 {
            continue;
        }
        let donor = (0..labels.len())
            .filter(|&x| !moved[x] && sizes[labels[x]] > 1)
            .max_by(|&a, &b| own_dist[a].total_cmp(&own_dist[b]).then(b.cmp(&a)));
        if let Some(x) = donor {
            sizes[labels[x]] -= 1;
            labels[x] = c;
            sizes[c] += 1;
            moved[x] = true;
        }
    }
}

fn kpp_init(gram: &GramMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = gram.point_count();
    let pair = |x: usize, s: usize| clamp_distance(gram.get(x, x) + gram.get(s, s) - 2.0 * gram.get(x, s));
    let mut seeds = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = (0..n).map(|x| pair(x, seeds[0])).collect();
    while seeds.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random_range(0.0..total);
            let mut idx = n - 1;
            for (x, &d) in nearest.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                if r < d {
                    idx = x;
                    break;
                }
                r -= d;
            }
            if nearest[idx] <= 0.0 {
                idx = nearest.iter().rposition(|&d| d > 0.0).unwrap_or(idx);
            }
            idx
        } else {
            let free: Vec<usize> = (0..n).filter(|x| !seeds.contains(x)).collect();
            free[rng.random_range(0..free.len())]
        };
        seeds.push(pick);
        for x in 0..n {
            nearest[x] = nearest[x].min(pair(x, pick));
        }
    }
    let mut labels = Vec::with_capacity(n);
    let mut own = Vec::with_capacity(n);
    for x in 0..n {
        let l = argmin(seeds.iter().map(|&s| pair(x, s)));
        labels.push(l);
        own.push(pair(x, seeds[l]));
    }
    // a seed may lose its own point to an earlier duplicate seed
    for (l, &s) in seeds.iter().enumerate() {
        if !labels.contains(&l) && cluster_sizes(&labels, k)[labels[s]] > 1 {
            labels[s] = l;
        }
    }
    repair_empty(&mut labels, &own, k);
    labels
}

fn random_init(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut labels = vec![0; n];
    for (pos, &x) in order.iter().enumerate() {
        labels[x] = if pos < k { pos } else { rng.random_range(0..k) };
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{gen_exkmc_counterexample, gen_quadratic_counterexample, Dataset};
    use crate::kernels::{gram_matrix, KernelSpec};
    use proptest::prelude::{prop_assert, proptest};

    fn random_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect()
    }

    #[test]
    fn singleton_cluster_distance_is_zero() {
        let ds = Dataset::from_rows("t", &random_rows(5, 2, 1), None).unwrap();
        let g = gram_matrix(&KernelSpec::gaussian(0.7), &ds).unwrap();
        let labels = [0, 1, 1, 1, 1];
        assert_eq!(point_to_cluster_sqdist(&g, &labels, 0, 0).unwrap(), 0.0);
        assert!(matches!(point_to_cluster_sqdist(&g, &labels, 0, 2), Err(Error::EmptyCluster(2))));
    }

    #[test]
    fn linear_kernel_matches_explicit_mean() {
        let rows = random_rows(12, 2, 2);
        let ds = Dataset::from_rows("t", &rows, None).unwrap();
        let g = gram_matrix(&KernelSpec::linear(), &ds).unwrap();
        let labels: Vec<usize> = (0..12).map(|i| i % 3).collect();
        for l in 0..3 {
            let members: Vec<&Vec<f64>> = rows.iter().zip(&labels).filter(|(_, &c)| c == l).map(|(r, _)| r).collect();
            let mean: Vec<f64> = (0..2).map(|c| members.iter().map(|r| r[c]).sum::<f64>() / members.len() as f64).collect();
            for (x, r) in rows.iter().enumerate() {
                let explicit: f64 = r.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum();
                let trick = point_to_cluster_sqdist(&g, &labels, x, l).unwrap();
                assert!((explicit - trick).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn exkmc_dataset_distance_to_own_cluster() {
        let ds = gen_exkmc_counterexample(0.1, 10).unwrap();
        let g = gram_matrix(&KernelSpec::linear(), &ds).unwrap();
        let labels = ds.labels().unwrap();
        // point 0 sits at -1.1, its cluster's mean at -1
        let d = point_to_cluster_sqdist(&g, labels, 0, 0).unwrap();
        assert!((d - 0.01).abs() < 1e-12);
        let cost = clustering_cost(&g, labels).unwrap();
        assert!((cost - 60.0 * 0.01).abs() < 1e-12);
    }

    #[test]
    fn identical_points_cost_zero() {
        let ds = Dataset::from_rows("t", &vec![vec![1.5, -0.5]; 6], None).unwrap();
        for spec in [KernelSpec::gaussian(1.0), KernelSpec::linear(), KernelSpec::laplace(3.0)] {
            let g = gram_matrix(&spec, &ds).unwrap();
            assert_eq!(clustering_cost(&g, &[0; 6]).unwrap(), 0.0);
        }
    }

    #[test]
    fn quadratic_counterexample_partition_costs_zero() {
        let ds = gen_quadratic_counterexample().unwrap();
        let g = gram_matrix(&KernelSpec::quadratic(), &ds).unwrap();
        assert_eq!(clustering_cost(&g, &[0, 0, 1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn cost_rejects_gaps() {
        let ds = Dataset::from_rows("t", &random_rows(4, 2, 3), None).unwrap();
        let g = gram_matrix(&KernelSpec::gaussian(1.0), &ds).unwrap();
        assert!(matches!(clustering_cost(&g, &[0, 0, 2, 2]), Err(Error::EmptyCluster(1))));
        assert!(partition_cost(&g, &[0, 0, 2, 2]).is_ok());
    }

    #[test]
    fn k_equals_n_gives_singletons() {
        let ds = Dataset::from_rows("t", &random_rows(7, 3, 4), None).unwrap();
        let g = gram_matrix(&KernelSpec::gaussian(1.0), &ds).unwrap();
        for method in [InitMethod::KppFeatureSpace, InitMethod::RandomAssignment] {
            let init = InitConfig { method, ..InitConfig::default() };
            let r = kernel_kmeans(&g, 7, &init).unwrap();
            assert_eq!(r.cost, 0.0);
            let mut sorted = r.labels.clone();
            sorted.sort();
            assert_eq!(sorted, (0..7).collect::<Vec<_>>());
        }
    }

    #[test]
    fn invalid_k_and_config() {
        let ds = Dataset::from_rows("t", &random_rows(3, 1, 5), None).unwrap();
        let g = gram_matrix(&KernelSpec::linear(), &ds).unwrap();
        assert!(matches!(kernel_kmeans(&g, 0, &InitConfig::default()), Err(Error::InvalidK { .. })));
        assert!(matches!(kernel_kmeans(&g, 4, &InitConfig::default()), Err(Error::InvalidK { .. })));
        let bad = InitConfig { restarts: 0, ..InitConfig::default() };
        assert!(kernel_kmeans(&g, 2, &bad).is_err());
    }

    #[test]
    fn duplicate_points_keep_k_clusters() {
        let mut rows = vec![vec![0.0]; 5];
        rows.push(vec![3.0]);
        let ds = Dataset::from_rows("t", &rows, None).unwrap();
        let g = gram_matrix(&KernelSpec::linear(), &ds).unwrap();
        let r = kernel_kmeans(&g, 3, &InitConfig::default().with_restarts(4)).unwrap();
        assert!(r.sizes().iter().all(|&s| s > 0));
    }

    #[test]
    fn deterministic_given_seed() {
        let ds = Dataset::from_rows("t", &random_rows(40, 2, 6), None).unwrap();
        let g = gram_matrix(&KernelSpec::gaussian(2.0), &ds).unwrap();
        let init = InitConfig::default().with_seed(11).with_restarts(3);
        assert_eq!(kernel_kmeans(&g, 3, &init).unwrap(), kernel_kmeans(&g, 3, &init).unwrap());
    }

    proptest! {
        #[test]
        fn monotone_descent_and_nonempty(seed in 0u64..500, k in 1usize..5, gamma in 0.1f64..5.0) {
            let ds = Dataset::from_rows("t", &random_rows(30, 2, seed), None).unwrap();
            let g = gram_matrix(&KernelSpec::gaussian(gamma), &ds).unwrap();
            let r = kernel_kmeans(&g, k, &InitConfig::default().with_seed(seed)).unwrap();
            for w in r.cost_trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0));
            }
            prop_assert!(r.sizes().iter().all(|&s| s > 0));
            let recomputed = clustering_cost(&g, &r.labels).unwrap();
            prop_assert!((recomputed - r.cost).abs() <= 1e-12 * r.cost.abs().max(1e-300));
        }

        #[test]
        fn permutation_invariance(seed in 0u64..500) {
            let ds = Dataset::from_rows("t", &random_rows(15, 2, seed), None).unwrap();
            let g = gram_matrix(&KernelSpec::laplace(1.0), &ds).unwrap();
            let labels: Vec<usize> = (0..15).map(|i| (i * 7 + seed as usize) % 3).collect();
            let perm = [2usize, 0, 1];
            let relabeled: Vec<usize> = labels.iter().map(|&l| perm[l]).collect();
            let a = clustering_cost(&g, &labels).unwrap();
            let b = clustering_cost(&g, &relabeled).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
