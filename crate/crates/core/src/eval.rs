//! Price of explainability, adjusted Rand index, per-coordinate costs and
//! exhaustive oracles for small instances.

use std::collections::HashMap;
use std::fmt;

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::features::{midpoint, IntervalCut};
use crate::kernels::{component_gram_matrix, GramMatrix, KernelSpec};
use crate::kmeans::{clustering_cost, compact_labels};
use crate::refine::CutMode;
use crate::tree::{tree_cost, InterpretableTree};

pub const BRUTE_FORCE_PARTITION_LIMIT: usize = 14;
pub const BRUTE_FORCE_TREE_POINTS: usize = 12;
pub const BRUTE_FORCE_TREE_DIMS: usize = 64;
pub const BRUTE_FORCE_TREE_LEAVES: usize = 3;

/// Ratio of a tree's cost to a baseline cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Price {
    Finite(f64),
    /// The baseline is zero while the tree's cost is not.
    Unbounded,
}

impl Price {
    pub fn is_unbounded(self) -> bool {
        matches!(self, Price::Unbounded)
    }

    /// The ratio, with `+inf` for the unbounded case.
    pub fn value(self) -> f64 {
        match self {
            Price::Finite(v) => v,
            Price::Unbounded => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Price::Finite(v) => Some(v),
            Price::Unbounded => None,
        }
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Price::Finite(v) => write!(f, "{v:.5}"),
            Price::Unbounded => f.write_str("unbounded"),
        }
    }
}

pub fn price_of_explainability(tree_cost: f64, baseline_cost: f64) -> Result<Price> {
    if tree_cost < 0.0 || baseline_cost < 0.0 {
        return Err(Error::Negative("price_of_explainability"));
    }
    if tree_cost.is_nan() || baseline_cost.is_nan() {
        return Err(Error::InvalidParameter("cost is NaN".into()));
    }
    Ok(match (tree_cost == 0.0, baseline_cost == 0.0) {
        (true, true) => Price::Finite(1.0),
        (false, true) => Price::Unbounded,
        _ => Price::Finite(tree_cost / baseline_cost),
    })
}

fn pairs(m: u64) -> f64 {
    (m * m.saturating_sub(1)) as f64 / 2.0
}

/// Chance-corrected agreement between two labelings.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    if a.len() < 2 {
        return Err(Error::InvalidParameter("ARI needs at least two points".into()));
    }
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| pairs(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| pairs(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(a.len() as u64);
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    let denom = max - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

/// Kernel k-means cost of `labels` under each one-dimensional component
/// kernel of a product family.
pub fn per_dimension_costs(data: &Dataset, spec: &KernelSpec, labels: &[usize]) -> Result<Vec<f64>> {
    if !spec.family.is_product() {
        return Err(Error::NotDecomposable(spec.family.name()));
    }
    let labels = compact_labels(labels).0;
    (0..data.d()).map(|i| clustering_cost(&component_gram_matrix(spec, data, i)?, &labels)).collect()
}

/// Exact optimum over all partitions into exactly `k` non-empty clusters.
/// Returns the cost and an optimal labeling.
pub fn brute_force_optimal_cost(gram: &GramMatrix, k: usize) -> Result<(f64, Vec<usize>)> {
    let n = gram.point_count();
    if n > BRUTE_FORCE_PARTITION_LIMIT {
        return Err(Error::TooLarge { what: "partition enumeration", size: n, limit: BRUTE_FORCE_PARTITION_LIMIT });
    }
    if k < 1 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let mut search = PartitionSearch {
        gram,
        k,
        labels: vec![0; n],
        sizes: vec![0; k],
        within: vec![0.0; k],
        best: f64::INFINITY,
        best_labels: Vec::new(),
    };
    search.recurse(0, 0);
    let labels = search.best_labels;
    Ok((clustering_cost(gram, &labels)?, labels))
}

struct PartitionSearch<'a> {
    gram: &'a GramMatrix,
    k: usize,
    labels: Vec<usize>,
    sizes: Vec<usize>,
    within: Vec<f64>,
    best: f64,
    best_labels: Vec<usize>,
}

impl PartitionSearch<'_> {
    /// Restricted growth strings: point `x` joins an open block or opens
    /// block `used`.
    fn recurse(&mut self, x: usize, used: usize) {
        let n = self.labels.len();
        if x == n {
            if used != self.k {
                return;
            }
            let diag: f64 = (0..n).map(|i| self.gram.get(i, i)).sum();
            let cost = diag - (0..self.k).map(|l| self.within[l] / self.sizes[l] as f64).sum::<f64>();
            if cost < self.best {
                self.best = cost;
                self.best_labels = self.labels.clone();
            }
            return;
        }
        if self.k - used > n - x {
            return;
        }
        let top = if used < self.k { used + 1 } else { used };
        for l in 0..top {
            let cross: f64 = (0..x).filter(|&y| self.labels[y] == l).map(|y| self.gram.get(x, y)).sum();
            let delta = 2.0 * cross + self.gram.get(x, x);
            self.labels[x] = l;
            self.sizes[l] += 1;
            self.within[l] += delta;
            self.recurse(x + 1, used.max(l + 1));
            self.within[l] -= delta;
            self.sizes[l] -= 1;
        }
    }
}

/// Every cut used by the exhaustive tree search: bounds at midpoints
/// between consecutive distinct data values, one-sided or two-sided.
pub fn data_midpoint_cuts(data: &Dataset, mode: CutMode) -> Vec<IntervalCut> {
    let mut cuts = Vec::new();
    for dim in 0..data.d() {
        let v = data.unique_coordinate_values(dim);
        let mids: Vec<f64> = v.windows(2).map(|w| midpoint(w[0], w[1])).collect();
        match mode {
            CutMode::OneSided => cuts.extend(mids.iter().map(|&t| IntervalCut::threshold(dim, t))),
            CutMode::Interval => {
                let mut bounds = vec![f64::NEG_INFINITY];
                bounds.extend(&mids);
                bounds.push(f64::INFINITY);
                for a in 0..bounds.len() {
                    for b in a + 1..bounds.len() {
                        if let Ok(c) = IntervalCut::new(dim, bounds[a], bounds[b], true) {
                            cuts.push(c);
                        }
                    }
                }
            }
        }
    }
    cuts
}

/// Minimum cost over all trees with at most `k` leaves built from
/// data-midpoint cuts, each leaf its own cluster.
pub fn brute_force_best_tree(data: &Dataset, gram: &GramMatrix, k: usize, mode: CutMode) -> Result<(InterpretableTree, f64)> {
    let n = data.n();
    for (what, size, limit) in [
        ("tree search points", n, BRUTE_FORCE_TREE_POINTS),
        ("tree search dimensions", data.d(), BRUTE_FORCE_TREE_DIMS),
        ("tree search leaves", k, BRUTE_FORCE_TREE_LEAVES),
    ] {
        if size > limit {
            return Err(Error::TooLarge { what, size, limit });
        }
    }
    if k == 0 {
        return Err(Error::InvalidK { k, n });
    }
    if gram.point_count() != n {
        return Err(Error::DimensionMismatch { expected: gram.point_count(), got: n });
    }
    // cuts inducing the same split are interchangeable; keep the first
    let mut seen = std::collections::HashSet::new();
    let (cuts, masks): (Vec<IntervalCut>, Vec<u32>) = data_midpoint_cuts(data, mode)
        .into_iter()
        .map(|c| {
            let m = (0..n).filter(|&i| c.goes_left(data.points()[[i, c.input_dim]])).fold(0u32, |m, i| m | (1 << i));
            (c, m)
        })
        .filter(|&(_, m)| seen.insert(m))
        .unzip();
    let mut dp = TreeSearch { gram, n, masks: &masks, memo: HashMap::new() };
    let full = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    dp.best(full, k);
    let mut tree = InterpretableTree::single_leaf(0);
    let mut next_cluster = 1;
    let mut todo = vec![(0usize, full, k)];
    while let Some((node, mask, leaves)) = todo.pop() {
        if let Some((_, Some((c, kl)))) = dp.memo.get(&(mask, leaves)).copied() {
            let left_mask = mask & masks[c];
            let right_mask = mask & !masks[c];
            let left_cluster = tree.leaf_cluster(node).expect("leaf");
            let (l, r) = tree.split_leaf(node, cuts[c], left_cluster, next_cluster, None)?;
            next_cluster += 1;
            todo.push((l, left_mask, kl));
            todo.push((r, right_mask, leaves - kl));
        }
    }
    let cost = tree_cost(&tree, data, gram)?;
    Ok((tree, cost))
}

type Choice = Option<(usize, usize)>;

struct TreeSearch<'a> {
    gram: &'a GramMatrix,
    n: usize,
    masks: &'a [u32],
    memo: HashMap<(u32, usize), (f64, Choice)>,
}

impl TreeSearch<'_> {
    fn leaf_cost(&self, mask: u32) -> f64 {
        let members: Vec<usize> = (0..self.n).filter(|&i| mask & (1 << i) != 0).collect();
        let diag: f64 = members.iter().map(|&i| self.gram.get(i, i)).sum();
        let mut sum = 0.0;
        for &a in &members {
            for &b in &members {
                sum += self.gram.get(a, b);
            }
        }
        (diag - sum / members.len() as f64).max(0.0)
    }

    fn best(&mut self, mask: u32, leaves: usize) -> f64 {
        if let Some(&(c, _)) = self.memo.get(&(mask, leaves)) {
            return c;
        }
        let mut best = (self.leaf_cost(mask), None);
        if leaves > 1 {
            for c in 0..self.masks.len() {
                let left = mask & self.masks[c];
                let right = mask & !self.masks[c];
                if left == 0 || right == 0 {
                    continue;
                }
                for kl in 1..leaves {
                    let cost = self.best(left, kl) + self.best(right, leaves - kl);
                    if cost < best.0 {
                        best = (cost, Some((c, kl)));
                    }
                }
            }
        }
        self.memo.insert((mask, leaves), best);
        best.0
    }
}
