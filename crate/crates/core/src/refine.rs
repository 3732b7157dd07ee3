//! Greedy tree growth against fixed reference centers: the cost objective
//! adds the cut that most reduces the kernel cost of leaves assigned to
//! their best reference center; the purity objective does the same for the
//! number of points whose reference cluster differs from their leaf's.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::features::{midpoint, IntervalCut};
use crate::kernels::GramMatrix;
use crate::kmeans::ClusterStats;
use crate::tree::InterpretableTree;

/// Distinct values per coordinate above which candidate bounds are thinned.
pub const MAX_UNIQUE_VALUES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Exkmc,
    Expand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutMode {
    OneSided,
    Interval,
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exkmc" => Ok(Objective::Exkmc),
            "expand" => Ok(Objective::Expand),
            other => Err(Error::InvalidParameter(format!("unknown objective {other:?}"))),
        }
    }
}

impl FromStr for CutMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one_sided" | "one-sided" => Ok(CutMode::OneSided),
            "interval" => Ok(CutMode::Interval),
            other => Err(Error::InvalidParameter(format!("unknown cut mode {other:?}"))),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Exkmc => "exkmc",
            Objective::Expand => "expand",
        })
    }
}

impl fmt::Display for CutMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CutMode::OneSided => "one_sided",
            CutMode::Interval => "interval",
        })
    }
}

/// Per-point, per-reference-center cost: squared feature-space distance
/// for the cost objective, a mismatch indicator for the purity objective.
#[derive(Debug, Clone)]
pub struct ReferenceCosts {
    pub costs: Array2<f64>,
    pub objective: Objective,
}

impl ReferenceCosts {
    pub fn new(gram: &GramMatrix, ref_labels: &[usize], objective: Objective) -> Result<Self> {
        let k = ref_labels.iter().copied().max().map_or(0, |m| m + 1);
        if k == 0 {
            return Err(Error::EmptyDataset);
        }
        let costs = match objective {
            Objective::Exkmc => {
                let stats = ClusterStats::new(gram, ref_labels, k)?;
                if let Some(l) = stats.sizes.iter().position(|&s| s == 0) {
                    return Err(Error::EmptyCluster(l));
                }
                stats.distance_matrix(gram)
            }
            Objective::Expand => {
                if ref_labels.len() != gram.point_count() {
                    return Err(Error::DimensionMismatch { expected: gram.point_count(), got: ref_labels.len() });
                }
                Array2::from_shape_fn((ref_labels.len(), k), |(x, j)| f64::from(u8::from(ref_labels[x] != j)))
            }
        };
        Ok(Self { costs, objective })
    }

    pub fn k(&self) -> usize {
        self.costs.ncols()
    }

    fn sums(&self, points: impl Iterator<Item = usize>) -> Vec<f64> {
        let mut s = vec![0.0; self.k()];
        for x in points {
            for (j, v) in s.iter_mut().enumerate() {
                *v += self.costs[[x, j]];
            }
        }
        s
    }

    /// Best single center for a set of points and its cost.
    pub fn no_split_cost(&self, points: &[usize]) -> (f64, usize) {
        argmin(&self.sums(points.iter().copied()))
    }

    /// Cost of a split given as a left-membership flag per node point,
    /// minimized over ordered center pairs.
    pub fn split_cost(&self, points: &[usize], goes_left: impl Fn(usize) -> bool) -> Result<(f64, (usize, usize))> {
        let (l, r): (Vec<usize>, Vec<usize>) = points.iter().partition(|&&x| goes_left(x));
        if l.is_empty() || r.is_empty() {
            return Err(Error::EmptySide);
        }
        let (cl, j) = argmin(&self.sums(l.into_iter()));
        let (cr, m) = argmin(&self.sums(r.into_iter()));
        Ok((cl + cr, (j, m)))
    }
}

fn argmin(v: &[f64]) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for (j, &c) in v.iter().enumerate() {
        if c < best.0 {
            best = (c, j);
        }
    }
    best
}

/// Cost of splitting `node_points` by `cut` under the kernel cost
/// objective, with the minimizing `(left, right)` center pair.
pub fn exkmc_cut_cost(
    gram: &GramMatrix,
    ref_labels: &[usize],
    data: &Dataset,
    node_points: &[usize],
    cut: &IntervalCut,
) -> Result<(f64, (usize, usize))> {
    let rc = ReferenceCosts::new(gram, ref_labels, Objective::Exkmc)?;
    rc.split_cost(node_points, |x| cut.goes_left(data.points()[[x, cut.input_dim]]))
}

/// Number of points whose reference cluster differs from their side's
/// chosen center, minimized over ordered center pairs.
pub fn expand_cut_cost(ref_labels: &[usize], data: &Dataset, node_points: &[usize], cut: &IntervalCut) -> Result<(usize, (usize, usize))> {
    let k = ref_labels.iter().copied().max().map_or(0, |m| m + 1);
    let (l, r): (Vec<usize>, Vec<usize>) = node_points.iter().partition(|&&x| cut.goes_left(data.points()[[x, cut.input_dim]]));
    if l.is_empty() || r.is_empty() {
        return Err(Error::EmptySide);
    }
    let impurity = |side: &[usize]| -> (usize, usize) {
        let mut counts = vec![0usize; k];
        for &x in side {
            counts[ref_labels[x]] += 1;
        }
        let (mut best, mut arg) = (0, 0);
        for (j, &c) in counts.iter().enumerate() {
            if c > best {
                best = c;
                arg = j;
            }
        }
        (side.len() - best, arg)
    };
    let (a, j) = impurity(&l);
    let (b, m) = impurity(&r);
    Ok((a + b, (j, m)))
}

/// The best split of one leaf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub node: usize,
    pub depth: usize,
    pub cut: IntervalCut,
    pub cost: f64,
    pub no_split_cost: f64,
    pub gain: f64,
    pub centers: (usize, usize),
}

/// Ordering where `Less` means preferred: larger gain, shallower node,
/// smaller coordinate, smaller lower bound, smaller upper bound, lower
/// node id.
fn preference(a: &SplitCandidate, b: &SplitCandidate) -> Ordering {
    b.gain
        .total_cmp(&a.gain)
        .then(a.depth.cmp(&b.depth))
        .then(a.cut.input_dim.cmp(&b.cut.input_dim))
        .then(a.cut.lower.total_cmp(&b.cut.lower))
        .then(a.cut.upper.total_cmp(&b.cut.upper))
        .then(a.node.cmp(&b.node))
}

/// Groups of node points with equal coordinate values, merged between the
/// kept boundaries; returns `(bounds, groups)` where `bounds[b]` is the cut
/// value between group `b` and `b + 1`.
fn coordinate_groups(data: &Dataset, points: &[usize], dim: usize, max_unique: usize) -> (Vec<f64>, Vec<Vec<usize>>) {
    let mut sorted: Vec<usize> = points.to_vec();
    sorted.sort_by(|&a, &b| data.points()[[a, dim]].total_cmp(&data.points()[[b, dim]]));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for x in sorted {
        let v = data.points()[[x, dim]];
        if values.last() == Some(&v) {
            groups.last_mut().expect("group").push(x);
        } else {
            values.push(v);
            groups.push(vec![x]);
        }
    }
    let m = groups.len();
    let all_bounds: Vec<f64> = values.windows(2).map(|w| midpoint(w[0], w[1])).collect();
    if m <= max_unique {
        return (all_bounds, groups);
    }
    // keep max_unique - 1 boundaries at quantile positions of the values
    let mut keep: Vec<usize> = (1..max_unique).map(|i| ((i as f64 / max_unique as f64) * (m - 1) as f64).round() as usize).collect();
    keep.retain(|&b| b >= 1 && b < m);
    keep.dedup();
    let mut merged = Vec::with_capacity(keep.len() + 1);
    let mut bounds = Vec::with_capacity(keep.len());
    let mut start = 0;
    for &b in &keep {
        merged.push(groups[start..b].concat());
        bounds.push(all_bounds[b - 1]);
        start = b;
    }
    merged.push(groups[start..].concat());
    (bounds, merged)
}

/// Best split of the leaf `node` holding `points`, or `None` when every
/// coordinate is constant on it.
pub fn best_split(
    rc: &ReferenceCosts,
    data: &Dataset,
    node: usize,
    depth: usize,
    points: &[usize],
    mode: CutMode,
    max_unique: usize,
) -> Option<SplitCandidate> {
    if points.len() < 2 {
        return None;
    }
    let (no_split_cost, _) = rc.no_split_cost(points);
    let k = rc.k();
    (0..data.d())
        .into_par_iter()
        .filter_map(|dim| {
            let (bounds, groups) = coordinate_groups(data, points, dim, max_unique);
            let m = groups.len();
            if m < 2 {
                return None;
            }
            // prefix[g][j]: cost of the first g groups against center j
            let mut prefix = vec![vec![0.0; k]; m + 1];
            for (g, members) in groups.iter().enumerate() {
                let s = rc.sums(members.iter().copied());
                for j in 0..k {
                    prefix[g + 1][j] = prefix[g][j] + s[j];
                }
            }
            let total = &prefix[m];
            let eval = |a: usize, b: usize| -> (f64, (usize, usize)) {
                // inside (left) is groups a..=b
                let inside: Vec<f64> = (0..k).map(|j| prefix[b + 1][j] - prefix[a][j]).collect();
                let outside: Vec<f64> = (0..k).map(|j| total[j] - inside[j]).collect();
                let (ci, j) = argmin(&inside);
                let (co, l) = argmin(&outside);
                (ci + co, (j, l))
            };
            let mut best: Option<SplitCandidate> = None;
            let mut consider = |a: usize, b: usize| {
                let lower = if a == 0 { f64::NEG_INFINITY } else { bounds[a - 1] };
                let upper = if b == m - 1 { f64::INFINITY } else { bounds[b] };
                let Ok(cut) = IntervalCut::new(dim, lower, upper, true) else { return };
                let (cost, centers) = eval(a, b);
                let cand = SplitCandidate { node, depth, cut, cost, no_split_cost, gain: no_split_cost - cost, centers };
                if best.as_ref().is_none_or(|cur| preference(&cand, cur) == Ordering::Less) {
                    best = Some(cand);
                }
            };
            match mode {
                CutMode::OneSided => {
                    for b in 0..m - 1 {
                        consider(0, b);
                    }
                }
                CutMode::Interval => {
                    for a in 0..m {
                        for b in a..m {
                            if a == 0 && b == m - 1 {
                                continue;
                            }
                            consider(a, b);
                        }
                    }
                }
            }
            best
        })
        .min_by(preference)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub leaves: usize,
    pub objective: Objective,
    pub cut_mode: CutMode,
    pub max_unique: usize,
}

impl RefineConfig {
    pub fn new(leaves: usize, objective: Objective, cut_mode: CutMode) -> Self {
        Self { leaves, objective, cut_mode, max_unique: MAX_UNIQUE_VALUES }
    }
}

#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub tree: InterpretableTree,
    /// False when no leaf could be split before reaching the target.
    pub reached_target: bool,
    /// Accepted splits in order.
    pub splits: Vec<SplitCandidate>,
}

/// Grows `tree` (a single best-center leaf when `None`) to `config.leaves`
/// leaves. Only the two children of the last split are re-scanned.
pub fn refine(
    tree: Option<&InterpretableTree>,
    data: &Dataset,
    gram: &GramMatrix,
    ref_labels: &[usize],
    config: &RefineConfig,
) -> Result<RefineOutcome> {
    refine_impl(tree, data, gram, ref_labels, config, false)
}

/// Same as [`refine`] but re-scans every leaf before each split. Used to
/// check that incremental scanning picks the same splits.
pub fn refine_full_rescan(
    tree: Option<&InterpretableTree>,
    data: &Dataset,
    gram: &GramMatrix,
    ref_labels: &[usize],
    config: &RefineConfig,
) -> Result<RefineOutcome> {
    refine_impl(tree, data, gram, ref_labels, config, true)
}

fn refine_impl(
    tree: Option<&InterpretableTree>,
    data: &Dataset,
    gram: &GramMatrix,
    ref_labels: &[usize],
    config: &RefineConfig,
    full: bool,
) -> Result<RefineOutcome> {
    if ref_labels.len() != data.n() || gram.point_count() != data.n() {
        return Err(Error::DimensionMismatch { expected: data.n(), got: ref_labels.len().min(gram.point_count()) });
    }
    if config.max_unique < 2 {
        return Err(Error::InvalidParameter("max_unique must be >= 2".into()));
    }
    let rc = ReferenceCosts::new(gram, ref_labels, config.objective)?;
    let mut tree = match tree {
        Some(t) => {
            t.check_dimension(data.d())?;
            t.clone()
        }
        None => {
            let all: Vec<usize> = (0..data.n()).collect();
            InterpretableTree::single_leaf(rc.no_split_cost(&all).1)
        }
    };
    if config.leaves < tree.k_leaves() {
        return Err(Error::LeafTarget { target: config.leaves, current: tree.k_leaves() });
    }
    let node_points = tree.node_points(data);
    let mut leaf_points: HashMap<usize, Vec<usize>> = tree.leaves().into_iter().map(|l| (l, node_points[l].clone())).collect();
    let scan = |tree: &InterpretableTree, node: usize, points: &[usize]| {
        best_split(&rc, data, node, tree.depth_of(node), points, config.cut_mode, config.max_unique)
    };
    let mut best: HashMap<usize, Option<SplitCandidate>> = leaf_points.iter().map(|(&l, p)| (l, scan(&tree, l, p))).collect();
    let mut splits = Vec::new();
    while tree.k_leaves() < config.leaves {
        if full {
            best = leaf_points.iter().map(|(&l, p)| (l, scan(&tree, l, p))).collect();
        }
        let Some(choice) = best.values().flatten().copied().min_by(preference) else {
            log::warn!("no splittable leaf left at {} leaves", tree.k_leaves());
            return Ok(RefineOutcome { tree, reached_target: false, splits });
        };
        let points = leaf_points.remove(&choice.node).expect("leaf points");
        best.remove(&choice.node);
        let (l, r) = tree.split_leaf(choice.node, choice.cut, choice.centers.0, choice.centers.1, None)?;
        let (lp, rp): (Vec<usize>, Vec<usize>) =
            points.into_iter().partition(|&x| choice.cut.goes_left(data.points()[[x, choice.cut.input_dim]]));
        best.insert(l, scan(&tree, l, &lp));
        best.insert(r, scan(&tree, r, &rp));
        leaf_points.insert(l, lp);
        leaf_points.insert(r, rp);
        splits.push(choice);
    }
    Ok(RefineOutcome { tree, reached_target: true, splits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::gen_exkmc_counterexample;
    use crate::kernels::{gram_matrix, KernelSpec};
    use crate::kmeans::clustering_cost;
    use crate::tree::tree_cost;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};
    use rand::{Rng, SeedableRng};

    fn line(values: &[f64], labels: Vec<usize>) -> Dataset {
        Dataset::from_rows("l", &values.iter().map(|&v| vec![v]).collect::<Vec<_>>(), Some(labels)).unwrap()
    }

    #[test]
    fn perfect_two_cluster_split() {
        let data = line(&[0.0, 1.0, 10.0, 11.0], vec![0, 0, 1, 1]);
        let g = gram_matrix(&KernelSpec::linear(), &data).unwrap();
        let labels = data.labels().unwrap();
        let (cost, pair) = exkmc_cut_cost(&g, labels, &data, &[0, 1, 2, 3], &IntervalCut::threshold(0, 5.5)).unwrap();
        assert!((cost - clustering_cost(&g, labels).unwrap()).abs() < 1e-12);
        assert_eq!(pair, (0, 1));
        assert!(matches!(exkmc_cut_cost(&g, labels, &data, &[0, 1], &IntervalCut::threshold(0, 5.5)), Err(Error::EmptySide)));
    }

    #[test]
    fn counterexample_cut_costs() {
        let eps = 0.1;
        let data = gen_exkmc_counterexample(eps, 10).unwrap();
        let n = data.n() as f64;
        let g = gram_matrix(&KernelSpec::linear(), &data).unwrap();
        let labels = data.labels().unwrap();
        let all: Vec<usize> = (0..data.n()).collect();
        let rc = ReferenceCosts::new(&g, labels, Objective::Exkmc).unwrap();
        for (theta, want) in [
            (0.0, 2.0 * n / 3.0 * eps * eps + n / 3.0 * (1.0 - eps) * (1.0 - eps)),
            (0.5, 2.0 * n / 3.0 * eps * eps + n / 6.0 * (1.0 - eps).powi(2) + n / 6.0 * (1.0 + eps).powi(2)),
        ] {
            let cut = IntervalCut::threshold(0, theta);
            let left = |x: usize| cut.goes_left(data.points()[[x, 0]]);
            let (j, l) = (0, 2);
            let fixed: f64 = all.iter().map(|&x| rc.costs[[x, if left(x) { j } else { l }]]).sum();
            assert!((fixed - want).abs() < 1e-9, "theta {theta}: {fixed} vs {want}");
            let (best, _) = exkmc_cut_cost(&g, labels, &data, &all, &cut).unwrap();
            assert!(best <= fixed + 1e-12);
        }
    }

    #[test]
    fn expand_counts() {
        let values: Vec<f64> = (0..10).map(f64::from).collect();
        let labels = vec![0, 0, 0, 0, 0, 0, 1, 1, 1, 1];
        let data = line(&values, labels.clone());
        let all: Vec<usize> = (0..10).collect();
        assert_eq!(expand_cut_cost(&labels, &data, &all, &IntervalCut::threshold(0, 5.5)).unwrap(), (0, (0, 1)));
        // left {0..=3}: pure; right {4..=9}: two zeros among four ones
        assert_eq!(expand_cut_cost(&labels, &data, &all, &IntervalCut::threshold(0, 3.5)).unwrap().0, 2);
    }

    #[test]
    fn refine_to_current_size_is_identity() {
        let data = line(&[0.0, 1.0, 10.0, 11.0], vec![0, 0, 1, 1]);
        let g = gram_matrix(&KernelSpec::linear(), &data).unwrap();
        let mut t = InterpretableTree::single_leaf(0);
        t.split_leaf(0, IntervalCut::threshold(0, 5.5), 0, 1, None).unwrap();
        let out = refine(Some(&t), &data, &g, data.labels().unwrap(), &RefineConfig::new(2, Objective::Exkmc, CutMode::OneSided)).unwrap();
        assert_eq!(out.tree, t);
        assert!(out.reached_target);
        let err = refine(Some(&t), &data, &g, data.labels().unwrap(), &RefineConfig::new(1, Objective::Exkmc, CutMode::OneSided));
        assert!(matches!(err, Err(Error::LeafTarget { .. })));
    }

    #[test]
    fn stops_when_nothing_splits() {
        let data = line(&[1.0, 1.0, 2.0], vec![0, 0, 1]);
        let g = gram_matrix(&KernelSpec::linear(), &data).unwrap();
        let out = refine(None, &data, &g, data.labels().unwrap(), &RefineConfig::new(5, Objective::Exkmc, CutMode::Interval)).unwrap();
        assert!(!out.reached_target);
        assert_eq!(out.tree.k_leaves(), 2);
    }

    #[test]
    fn counterexample_from_empty_tree() {
        let eps = 0.01;
        let data = gen_exkmc_counterexample(eps, 10).unwrap();
        let g = gram_matrix(&KernelSpec::linear(), &data).unwrap();
        let labels = data.labels().unwrap();
        let out = refine(None, &data, &g, labels, &RefineConfig::new(3, Objective::Exkmc, CutMode::OneSided)).unwrap();
        let price = tree_cost(&out.tree, &data, &g).unwrap() / clustering_cost(&g, labels).unwrap();
        // the leaf holding n/6 misplaced points among n/2 has at least
        // (n/6)(n/3) pairs at distance >= 1 - 2 eps
        let bound = 0.5 + (1.0 - 2.0 * eps).powi(2) / (9.0 * eps * eps);
        assert!(price >= bound, "{price} < {bound}");
    }

    #[test]
    fn thinning_caps_groups() {
        let values: Vec<f64> = (0..1000).map(|i| f64::from(i) * 0.01).collect();
        let data = line(&values, vec![0; 1000]);
        let all: Vec<usize> = (0..1000).collect();
        let (bounds, groups) = coordinate_groups(&data, &all, 0, 200);
        assert_eq!(groups.len(), bounds.len() + 1);
        assert!(groups.len() <= 200);
        assert_eq!(groups.iter().map(Vec::len).sum::<usize>(), 1000);
        let (b2, g2) = coordinate_groups(&data, &all[..150], 0, 200);
        assert_eq!((b2.len(), g2.len()), (149, 150));
    }

    fn blobs(seed: u64) -> (Dataset, Vec<usize>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for c in 0..3 {
            let mu = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            for _ in 0..12 {
                rows.push(vec![mu[0] + rng.random_range(-1.5..1.5), mu[1] + rng.random_range(-1.5..1.5)]);
                labels.push(c);
            }
        }
        (Dataset::from_rows("b", &rows, Some(labels.clone())).unwrap(), labels)
    }

    proptest! {
        #[test]
        fn incremental_matches_full_rescan(seed in 0u64..500, expand: bool, interval: bool) {
            let (data, labels) = blobs(seed);
            let g = gram_matrix(&KernelSpec::gaussian(0.5), &data).unwrap();
            let objective = if expand { Objective::Expand } else { Objective::Exkmc };
            let mode = if interval { CutMode::Interval } else { CutMode::OneSided };
            let cfg = RefineConfig::new(7, objective, mode);
            let a = refine(None, &data, &g, &labels, &cfg).unwrap();
            let b = refine_full_rescan(None, &data, &g, &labels, &cfg).unwrap();
            prop_assert_eq!(&a.tree, &b.tree);
            prop_assert_eq!(a.tree.k_leaves(), 7);
            for s in &a.splits {
                prop_assert!(s.gain >= -1e-9 * s.no_split_cost.abs().max(1.0));
            }
        }

        #[test]
        fn interval_never_worse_than_one_sided(seed in 0u64..500, expand: bool) {
            let (data, labels) = blobs(seed);
            let g = gram_matrix(&KernelSpec::laplace(1.0), &data).unwrap();
            let objective = if expand { Objective::Expand } else { Objective::Exkmc };
            let rc = ReferenceCosts::new(&g, &labels, objective).unwrap();
            let all: Vec<usize> = (0..data.n()).collect();
            let a = best_split(&rc, &data, 0, 0, &all, CutMode::OneSided, 200).unwrap();
            let b = best_split(&rc, &data, 0, 0, &all, CutMode::Interval, 200).unwrap();
            prop_assert!(b.cost <= a.cost + 1e-9);
        }

        #[test]
        fn scan_cost_matches_direct_evaluation(seed in 0u64..500) {
            let (data, labels) = blobs(seed);
            let g = gram_matrix(&KernelSpec::gaussian(1.0), &data).unwrap();
            let rc = ReferenceCosts::new(&g, &labels, Objective::Exkmc).unwrap();
            let all: Vec<usize> = (0..data.n()).collect();
            let s = best_split(&rc, &data, 0, 0, &all, CutMode::Interval, 200).unwrap();
            let (direct, _) = exkmc_cut_cost(&g, &labels, &data, &all, &s.cut).unwrap();
            prop_assert!((direct - s.cost).abs() < 1e-9);
            let (j, l) = s.centers;
            let with_pair: f64 = all
                .iter()
                .map(|&x| rc.costs[[x, if s.cut.goes_left(data.points()[[x, s.cut.input_dim]]) { j } else { l }]])
                .sum();
            prop_assert!((with_pair - direct).abs() < 1e-9);
        }
    }
}
