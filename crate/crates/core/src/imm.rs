//! Iterative mistake minimization on an explicit feature matrix with fixed
//! centers. At every node the threshold cut separating the fewest points
//! from their own center is chosen, until each leaf holds one center.

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureCut {
    pub column: usize,
    pub theta: f64,
    pub mistakes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateMode {
    /// Midpoints between consecutive projected centers.
    #[default]
    CenterMidpoints,
    /// Center midpoints plus midpoints between consecutive data values.
    Exhaustive,
}

impl std::str::FromStr for CandidateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centers" | "center_midpoints" => Ok(CandidateMode::CenterMidpoints),
            "exhaustive" => Ok(CandidateMode::Exhaustive),
            other => Err(Error::InvalidParameter(format!("unknown candidate mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureNode {
    /// `value <= theta` goes left.
    Internal {
        cut: FeatureCut,
        left: usize,
        right: usize,
    },
    Leaf {
        center: usize,
    },
}

/// A tree over feature columns together with the points and centers that
/// reached every node during construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTree {
    pub nodes: Vec<FeatureNode>,
    pub node_points: Vec<Vec<usize>>,
    pub node_centers: Vec<Vec<usize>>,
    pub parent: Vec<Option<usize>>,
}

impl FeatureTree {
    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| matches!(self.nodes[i], FeatureNode::Leaf { .. })).collect()
    }

    pub fn depth(&self) -> usize {
        (0..self.nodes.len())
            .map(|mut id| {
                let mut d = 0;
                while let Some(p) = self.parent[id] {
                    d += 1;
                    id = p;
                }
                d
            })
            .max()
            .unwrap_or(0)
    }

    /// Leaf reached by a feature row.
    pub fn route(&self, row: ArrayView1<'_, f64>) -> usize {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                FeatureNode::Leaf { .. } => return id,
                FeatureNode::Internal { cut, left, right } => {
                    id = if row[cut.column] <= cut.theta { *left } else { *right };
                }
            }
        }
    }
}

fn split_theta(a: f64, b: f64) -> f64 {
    let m = a + 0.5 * (b - a);
    if m < b {
        m
    } else {
        a
    }
}

fn check_shapes(features: &Array2<f64>, labels: &[usize], centers: &Array2<f64>) -> Result<()> {
    if labels.len() != features.nrows() {
        return Err(Error::DimensionMismatch { expected: features.nrows(), got: labels.len() });
    }
    if centers.ncols() != features.ncols() {
        return Err(Error::DimensionMismatch { expected: features.ncols(), got: centers.ncols() });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= centers.nrows()) {
        return Err(Error::InvalidParameter(format!("label {bad} has no center")));
    }
    Ok(())
}

/// Points of `node_points` whose own center is in `node_centers` and lands
/// on the other side of `value <= theta`.
pub fn count_mistakes(
    features: &Array2<f64>,
    labels: &[usize],
    centers: &Array2<f64>,
    node_points: &[usize],
    node_centers: &[usize],
    column: usize,
    theta: f64,
) -> usize {
    let mut present = vec![false; centers.nrows()];
    for &c in node_centers {
        present[c] = true;
    }
    let center_left: Vec<bool> = (0..centers.nrows()).map(|c| centers[[c, column]] <= theta).collect();
    node_points
        .iter()
        .filter(|&&x| {
            let c = labels[x];
            present[c] && (features[[x, column]] <= theta) != center_left[c]
        })
        .count()
}

/// Midpoints between consecutive distinct projections of `node_centers`,
/// per column. Every returned cut splits the centers into two non-empty
/// groups.
pub fn candidate_cuts(centers: &Array2<f64>, node_centers: &[usize]) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    for col in 0..centers.ncols() {
        let mut v: Vec<f64> = node_centers.iter().map(|&c| centers[[c, col]]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        out.extend(v.windows(2).map(|w| (col, split_theta(w[0], w[1]))));
    }
    if out.is_empty() && node_centers.len() >= 2 {
        return Err(Error::DegenerateCenters);
    }
    Ok(out)
}

fn exhaustive_cuts(
    features: &Array2<f64>,
    centers: &Array2<f64>,
    node_points: &[usize],
    node_centers: &[usize],
) -> Result<Vec<(usize, f64)>> {
    let mut out = candidate_cuts(centers, node_centers)?;
    for col in 0..features.ncols() {
        let mut v: Vec<f64> = node_points.iter().map(|&x| features[[x, col]]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        let cmin = node_centers.iter().map(|&c| centers[[c, col]]).fold(f64::INFINITY, f64::min);
        let cmax = node_centers.iter().map(|&c| centers[[c, col]]).fold(f64::NEG_INFINITY, f64::max);
        for w in v.windows(2) {
            let t = split_theta(w[0], w[1]);
            if cmin <= t && t < cmax {
                out.push((col, t));
            }
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    out.dedup();
    Ok(out)
}

/// The minimum-mistake cut; ties go to the smaller column, then smaller
/// threshold.
pub fn best_cut(
    features: &Array2<f64>,
    labels: &[usize],
    centers: &Array2<f64>,
    node_points: &[usize],
    node_centers: &[usize],
    mode: CandidateMode,
) -> Result<FeatureCut> {
    let candidates = match mode {
        CandidateMode::CenterMidpoints => candidate_cuts(centers, node_centers)?,
        CandidateMode::Exhaustive => exhaustive_cuts(features, centers, node_points, node_centers)?,
    };
    candidates
        .par_iter()
        .map(|&(column, theta)| FeatureCut {
            column,
            theta,
            mistakes: count_mistakes(features, labels, centers, node_points, node_centers, column, theta),
        })
        .min_by(|a, b| a.mistakes.cmp(&b.mistakes).then(a.column.cmp(&b.column)).then(a.theta.total_cmp(&b.theta)))
        .ok_or(Error::DegenerateCenters)
}

/// Builds a tree with one leaf per center row. Label `l` belongs to center
/// row `l`.
pub fn imm_build(features: &Array2<f64>, labels: &[usize], centers: &Array2<f64>, mode: CandidateMode) -> Result<FeatureTree> {
    check_shapes(features, labels, centers)?;
    let k = centers.nrows();
    if k == 0 {
        return Err(Error::InvalidParameter("at least one center is required".into()));
    }
    let mut tree = FeatureTree {
        nodes: vec![FeatureNode::Leaf { center: 0 }],
        node_points: vec![(0..features.nrows()).collect()],
        node_centers: vec![(0..k).collect()],
        parent: vec![None],
    };
    let mut stack = vec![0];
    while let Some(id) = stack.pop() {
        let centers_here = tree.node_centers[id].clone();
        if centers_here.len() == 1 {
            tree.nodes[id] = FeatureNode::Leaf { center: centers_here[0] };
            continue;
        }
        let points = tree.node_points[id].clone();
        let cut = best_cut(features, labels, centers, &points, &centers_here, mode)?;
        let (lp, rp): (Vec<usize>, Vec<usize>) = points.iter().partition(|&&x| features[[x, cut.column]] <= cut.theta);
        let (lc, rc): (Vec<usize>, Vec<usize>) = centers_here.iter().partition(|&&c| centers[[c, cut.column]] <= cut.theta);
        debug_assert!(!lc.is_empty() && !rc.is_empty());
        let left = tree.nodes.len();
        let right = left + 1;
        for (p, c) in [(lp, lc), (rp, rc)] {
            tree.nodes.push(FeatureNode::Leaf { center: c[0] });
            tree.node_points.push(p);
            tree.node_centers.push(c);
            tree.parent.push(Some(id));
        }
        tree.nodes[id] = FeatureNode::Internal { cut, left, right };
        stack.push(right);
        stack.push(left);
    }
    Ok(tree)
}

/// Whether every leaf holds exactly one center when center rows are routed
/// through the tree.
pub fn centers_separated(tree: &FeatureTree, centers: &Array2<f64>) -> bool {
    let mut per_leaf = vec![0usize; tree.nodes.len()];
    for c in 0..centers.nrows() {
        let leaf = tree.route(centers.row(c));
        match tree.nodes[leaf] {
            FeatureNode::Leaf { center } if center == c => per_leaf[leaf] += 1,
            _ => return false,
        }
    }
    tree.leaves().into_iter().all(|l| per_leaf[l] == 1)
}

/// Whether each chosen cut has no more mistakes than any candidate in
/// `mode`, re-scanned from scratch.
pub fn mistakes_minimal(
    tree: &FeatureTree,
    features: &Array2<f64>,
    labels: &[usize],
    centers: &Array2<f64>,
    mode: CandidateMode,
) -> Result<bool> {
    for (id, node) in tree.nodes.iter().enumerate() {
        if let FeatureNode::Internal { cut, .. } = node {
            let points = &tree.node_points[id];
            let cs = &tree.node_centers[id];
            let candidates = match mode {
                CandidateMode::CenterMidpoints => candidate_cuts(centers, cs)?,
                CandidateMode::Exhaustive => exhaustive_cuts(features, centers, points, cs)?,
            };
            let recount = count_mistakes(features, labels, centers, points, cs, cut.column, cut.theta);
            if recount != cut.mistakes {
                return Ok(false);
            }
            for (col, theta) in candidates {
                if count_mistakes(features, labels, centers, points, cs, col, theta) < cut.mistakes {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Mistake lower bound check at every internal node and column:
/// `t(u) * max_{a,b} (a_i - b_i)^2 <= 4k * sum_{x correct} (x_i - c_i(x))^2`.
/// Returns the offending `(node, column)` pairs.
pub fn mistake_bound_violations(
    tree: &FeatureTree,
    features: &Array2<f64>,
    labels: &[usize],
    centers: &Array2<f64>,
) -> Vec<(usize, usize)> {
    let k = centers.nrows() as f64;
    let mut bad = Vec::new();
    for (id, node) in tree.nodes.iter().enumerate() {
        let FeatureNode::Internal { cut, .. } = node else { continue };
        let cs = &tree.node_centers[id];
        let mut present = vec![false; centers.nrows()];
        for &c in cs {
            present[c] = true;
        }
        for col in 0..features.ncols() {
            let lo = cs.iter().map(|&c| centers[[c, col]]).fold(f64::INFINITY, f64::min);
            let hi = cs.iter().map(|&c| centers[[c, col]]).fold(f64::NEG_INFINITY, f64::max);
            let lhs = cut.mistakes as f64 * (hi - lo) * (hi - lo);
            let rhs: f64 = tree.node_points[id]
                .iter()
                .filter(|&&x| present[labels[x]])
                .map(|&x| {
                    let d = features[[x, col]] - centers[[labels[x], col]];
                    d * d
                })
                .sum::<f64>()
                * 4.0
                * k;
            if lhs > rhs * (1.0 + 1e-9) + 1e-12 {
                bad.push((id, col));
            }
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::surrogate_centers;
    use ndarray::array;
    use proptest::prelude::{prop_assert, proptest};
    use rand::{Rng, SeedableRng};

    #[test]
    fn candidate_midpoints() {
        let c = array![[0.0], [10.0]];
        assert_eq!(candidate_cuts(&c, &[0, 1]).unwrap(), vec![(0, 5.0)]);
        let c = array![[0.0], [4.0], [10.0]];
        assert_eq!(candidate_cuts(&c, &[0, 1, 2]).unwrap(), vec![(0, 2.0), (0, 7.0)]);
        let c = array![[1.0], [1.0], [5.0]];
        assert_eq!(candidate_cuts(&c, &[0, 1, 2]).unwrap(), vec![(0, 3.0)]);
        let c = array![[1.0, 2.0], [1.0, 2.0]];
        assert!(matches!(candidate_cuts(&c, &[0, 1]), Err(Error::DegenerateCenters)));
    }

    #[test]
    fn separated_line_single_cut() {
        let f = array![[0.0], [1.0], [10.0], [11.0]];
        let labels = [0, 0, 1, 1];
        let c = surrogate_centers(&f, &labels).unwrap();
        assert_eq!(c, array![[0.5], [10.5]]);
        let tree = imm_build(&f, &labels, &c, CandidateMode::CenterMidpoints).unwrap();
        match &tree.nodes[0] {
            FeatureNode::Internal { cut, .. } => {
                assert_eq!((cut.column, cut.theta, cut.mistakes), (0, 5.5, 0));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(tree.leaves().len(), 2);
    }

    #[test]
    fn mistakes_by_hand() {
        // centers at 0 (points 0,1,2) and 10 (points 3,4,5); cut at 1.5
        let f = array![[-1.0], [1.0], [2.0], [8.0], [12.0], [1.0]];
        let labels = [0, 0, 0, 1, 1, 1];
        let c = array![[0.0], [10.0]];
        // point 2 (at 2.0, center left) goes right; point 5 (at 1.0, center right) goes left
        assert_eq!(count_mistakes(&f, &labels, &c, &[0, 1, 2, 3, 4, 5], &[0, 1], 0, 1.5), 2);
        // point 5 no longer counted once its center has left the node
        assert_eq!(count_mistakes(&f, &labels, &c, &[0, 1, 2, 3, 4, 5], &[0], 0, 1.5), 1);
        assert_eq!(count_mistakes(&f, &labels, &c, &[0, 1, 2, 3, 4, 5], &[0, 1], 0, 5.0), 1);
    }

    #[test]
    fn single_center_is_a_leaf() {
        let f = array![[1.0], [2.0]];
        let c = array![[1.5]];
        let tree = imm_build(&f, &[0, 0], &c, CandidateMode::CenterMidpoints).unwrap();
        assert_eq!(tree.nodes, vec![FeatureNode::Leaf { center: 0 }]);
    }

    #[test]
    fn empty_side_allowed() {
        // the two left centers have no points between them
        let f = array![[0.0], [0.1], [20.0]];
        let labels = [0, 0, 2];
        let c = array![[0.05], [5.0], [20.0]];
        let tree = imm_build(&f, &labels, &c, CandidateMode::CenterMidpoints).unwrap();
        assert_eq!(tree.leaves().len(), 3);
        assert!(centers_separated(&tree, &c));
    }

    fn blobs(seed: u64, k: usize, d: usize, per: usize) -> (Array2<f64>, Vec<usize>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for c in 0..k {
            let mu: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
            for _ in 0..per {
                rows.extend(mu.iter().map(|m| m + rng.random_range(-2.0..2.0)));
                labels.push(c);
            }
        }
        (Array2::from_shape_vec((k * per, d), rows).unwrap(), labels)
    }

    proptest! {
        #[test]
        fn invariants_on_random_blobs(seed in 0u64..2000, k in 2usize..6, d in 1usize..4) {
            let (f, labels) = blobs(seed, k, d, 8);
            let c = surrogate_centers(&f, &labels).unwrap();
            let tree = imm_build(&f, &labels, &c, CandidateMode::CenterMidpoints).unwrap();
            prop_assert!(tree.leaves().len() == k);
            prop_assert!(tree.depth() < k);
            prop_assert!(centers_separated(&tree, &c));
            prop_assert!(mistakes_minimal(&tree, &f, &labels, &c, CandidateMode::CenterMidpoints).unwrap());
            prop_assert!(mistake_bound_violations(&tree, &f, &labels, &c).is_empty());
        }

        #[test]
        fn exhaustive_never_worse_at_root(seed in 0u64..2000, k in 2usize..5) {
            let (f, labels) = blobs(seed, k, 2, 6);
            let c = surrogate_centers(&f, &labels).unwrap();
            let all: Vec<usize> = (0..f.nrows()).collect();
            let cs: Vec<usize> = (0..k).collect();
            let a = best_cut(&f, &labels, &c, &all, &cs, CandidateMode::CenterMidpoints).unwrap();
            let b = best_cut(&f, &labels, &c, &all, &cs, CandidateMode::Exhaustive).unwrap();
            prop_assert!(b.mistakes <= a.mistakes);
        }
    }
}
