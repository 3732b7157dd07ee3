//! Reference kernel k-means, surrogate features, mistake minimization in
//! feature space, and translation of every feature cut into an interval cut
//! on one input coordinate.

use std::collections::HashMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::features::{
    build_features, feature_cut_to_interval, snap_cut_to_data, surrogate_centers, taylor_approximation_error, CutDirection, FeatureMatrix,
    FeatureMode, DEFAULT_TAYLOR_ORDER,
};
use crate::imm::{centers_separated, imm_build, CandidateMode, FeatureNode, FeatureTree};
use crate::kernels::{gram_matrix, GramMatrix, KernelFamily, KernelSpec};
use crate::kmeans::{cluster_sizes, kernel_kmeans, ClusteringResult, InitConfig};
use crate::tree::{tree_cost, FeatureSpaceCut, InterpretableTree};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelImmConfig {
    pub k: usize,
    pub mode: FeatureMode,
    /// Taylor or chi-square expansion order.
    pub order: usize,
    /// Anchor subsample for distance features; all points when `None`.
    pub anchors: Option<usize>,
    pub candidates: CandidateMode,
    pub init: InitConfig,
}

impl KernelImmConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            mode: FeatureMode::Auto,
            order: DEFAULT_TAYLOR_ORDER,
            anchors: None,
            candidates: CandidateMode::CenterMidpoints,
            init: InitConfig::default(),
        }
    }

    pub fn with_mode(mut self, mode: FeatureMode) -> Self {
        self.mode = mode;
        self
    }
}

/// One explained tree with the artifacts needed to audit it.
#[derive(Debug, Clone)]
pub struct Explanation {
    pub tree: InterpretableTree,
    pub feature_tree: FeatureTree,
    pub features: FeatureMatrix,
    pub centers: Array2<f64>,
    pub mode: FeatureMode,
    pub cost: f64,
    /// Worst per-coordinate Taylor kernel error on the data (Taylor mode).
    pub taylor_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct KernelImmResult {
    pub explanation: Explanation,
    pub reference: ClusteringResult,
}

/// Concrete modes tried for `mode` and `family`.
pub fn resolve_modes(mode: FeatureMode, spec: &KernelSpec) -> Result<Vec<FeatureMode>> {
    if !mode.supports(spec.family) {
        return Err(Error::IncompatibleFeatureMode { mode: mode.name(), kernel: spec.family.name() });
    }
    Ok(match mode {
        FeatureMode::Auto => match spec.family {
            KernelFamily::Gaussian => vec![FeatureMode::Taylor, FeatureMode::Distance],
            KernelFamily::Laplace => vec![FeatureMode::Distance],
            KernelFamily::Linear => vec![FeatureMode::Raw],
            _ => vec![FeatureMode::Additive],
        },
        m => vec![m],
    })
}

/// Runs the reference clustering with the exact kernel and explains it.
pub fn kernel_imm(data: &Dataset, spec: &KernelSpec, config: &KernelImmConfig) -> Result<KernelImmResult> {
    resolve_modes(config.mode, spec)?;
    spec.check_dataset(data)?;
    let gram = gram_matrix(spec, data)?;
    let reference = kernel_kmeans(&gram, config.k, &config.init)?;
    let explanation = explain_reference(data, spec, &gram, &reference.labels, config)?;
    Ok(KernelImmResult { explanation, reference })
}

/// Explains a fixed reference labeling with ids `0..k`. In auto mode every
/// applicable feature map is tried and the lowest-cost tree kept (earlier
/// mode on ties).
pub fn explain_reference(
    data: &Dataset,
    spec: &KernelSpec,
    gram: &GramMatrix,
    labels: &[usize],
    config: &KernelImmConfig,
) -> Result<Explanation> {
    let modes = resolve_modes(config.mode, spec)?;
    let sizes = cluster_sizes(labels, labels.iter().copied().max().map_or(0, |m| m + 1));
    let found = sizes.iter().filter(|&&s| s > 0).count();
    if found != config.k || sizes.len() != config.k {
        return Err(Error::DegenerateClustering { found, expected: config.k });
    }
    let mut best: Option<Explanation> = None;
    for mode in modes {
        let features = build_features(data, spec, mode, config.order, config.anchors)?;
        let centers = surrogate_centers(&features.values, labels)?;
        let feature_tree = imm_build(&features.values, labels, &centers, config.candidates)?;
        let tree = translate_tree(data, &features, &feature_tree)?;
        let cost = tree_cost(&tree, data, gram)?;
        let taylor_error = if mode == FeatureMode::Taylor { Some(taylor_approximation_error(data, spec, config.order)?) } else { None };
        log::debug!("{mode} features: {} columns, tree cost {cost}", features.columns());
        let candidate = Explanation { tree, feature_tree, features, centers, mode, cost, taylor_error };
        if best.as_ref().is_none_or(|b| candidate.cost < b.cost) {
            best = Some(candidate);
        }
    }
    best.ok_or_else(|| Error::InvalidParameter("no feature map available".into()))
}

/// Converts a feature-space tree into an interval tree on the input
/// coordinates and checks that every node splits its data identically.
pub fn translate_tree(data: &Dataset, features: &FeatureMatrix, ftree: &FeatureTree) -> Result<InterpretableTree> {
    let root_cluster = match ftree.nodes[0] {
        FeatureNode::Leaf { center } => center,
        FeatureNode::Internal { .. } => 0,
    };
    let mut tree = InterpretableTree::single_leaf(root_cluster);
    // feature node -> tree node
    let mut map = HashMap::from([(0usize, 0usize)]);
    let mut stack = vec![0usize];
    while let Some(fid) = stack.pop() {
        let FeatureNode::Internal { cut, left, right } = ftree.nodes[fid] else { continue };
        let desc = &features.descriptors[cut.column];
        let dim = desc.input_dim;
        let points = &ftree.node_points[fid];
        let interval = if points.is_empty() {
            let col = data.points().column(dim);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            feature_cut_to_interval(desc, cut.theta, CutDirection::Le, (lo, hi))?
        } else {
            let mut values: Vec<f64> = points.iter().map(|&x| data.points()[[x, dim]]).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            snap_cut_to_data(desc, cut.theta, CutDirection::Le, &values, cut.column)?
        };
        let leaf_center = |id: usize| match ftree.nodes[id] {
            FeatureNode::Leaf { center } => center,
            FeatureNode::Internal { .. } => ftree.node_centers[id][0],
        };
        let tid = map[&fid];
        let trace = FeatureSpaceCut { column: cut.column, theta: cut.theta };
        let (tl, tr) = tree.split_leaf(tid, interval, leaf_center(left), leaf_center(right), Some(trace))?;
        map.insert(left, tl);
        map.insert(right, tr);
        stack.push(right);
        stack.push(left);
    }
    let tree_points = tree.node_points(data);
    for (fid, &tid) in &map {
        let mut a = ftree.node_points[*fid].clone();
        a.sort_unstable();
        if a != tree_points[tid] {
            return Err(Error::SplitMismatch { node: tid });
        }
    }
    Ok(tree)
}

/// Per-node check that the interval split equals the feature split, plus
/// center separation in feature space. Returns the offending tree nodes.
pub fn audit(data: &Dataset, explanation: &Explanation) -> Vec<usize> {
    let mut bad = Vec::new();
    let tree_points = explanation.tree.node_points(data);
    for node in explanation.tree.internal_nodes() {
        let Some(trace) = explanation.tree.trace(node) else {
            bad.push(node);
            continue;
        };
        let crate::tree::TreeNode::Internal { cut, left, .. } = *explanation.tree.node(node) else { continue };
        let desc = &explanation.features.descriptors[trace.column];
        if desc.input_dim != cut.input_dim {
            bad.push(node);
            continue;
        }
        let feature_left: Vec<usize> =
            tree_points[node].iter().copied().filter(|&x| explanation.features.values[[x, trace.column]] <= trace.theta).collect();
        if feature_left != tree_points[left] {
            bad.push(node);
        }
    }
    if !centers_separated(&explanation.feature_tree, &explanation.centers) {
        bad.push(usize::MAX);
    }
    bad
}
