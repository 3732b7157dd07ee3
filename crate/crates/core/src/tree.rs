//! Axis-aligned interval decision trees over input coordinates.

use std::fmt::Write as _;
use std::str::FromStr;

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::features::IntervalCut;
use crate::kernels::GramMatrix;
use crate::kmeans::{compact_labels, partition_cost};

/// The feature-space threshold `phi_column <= theta` a node was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpaceCut {
    pub column: usize,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreeNode {
    Internal { cut: IntervalCut, left: usize, right: usize },
    Leaf { leaf_id: usize, cluster: usize },
}

/// Arena-backed binary tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpretableTree {
    nodes: Vec<TreeNode>,
    parent: Vec<Option<usize>>,
    trace: Vec<Option<FeatureSpaceCut>>,
    leaf_count: usize,
}

impl InterpretableTree {
    pub fn single_leaf(cluster: usize) -> Self {
        Self { nodes: vec![TreeNode::Leaf { leaf_id: 0, cluster }], parent: vec![None], trace: vec![None], leaf_count: 1 }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn k_leaves(&self) -> usize {
        self.leaf_count
    }

    pub fn trace(&self, id: usize) -> Option<FeatureSpaceCut> {
        self.trace[id]
    }

    pub fn parent(&self, id: usize) -> Option<usize> {
        self.parent[id]
    }

    pub fn depth_of(&self, mut id: usize) -> usize {
        let mut depth = 0;
        while let Some(p) = self.parent[id] {
            depth += 1;
            id = p;
        }
        depth
    }

    pub fn depth(&self) -> usize {
        self.leaves().into_iter().map(|l| self.depth_of(l)).max().unwrap_or(0)
    }

    /// Leaf node ids in depth-first, left-to-right order.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0];
        while let Some(id) = stack.pop() {
            match self.nodes[id] {
                TreeNode::Leaf { .. } => out.push(id),
                TreeNode::Internal { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        out
    }

    pub fn internal_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| matches!(self.nodes[i], TreeNode::Internal { .. })).collect()
    }

    pub fn leaf_cluster(&self, id: usize) -> Option<usize> {
        match self.nodes[id] {
            TreeNode::Leaf { cluster, .. } => Some(cluster),
            TreeNode::Internal { .. } => None,
        }
    }

    /// Replaces leaf `id` by an internal node with two new leaves. The left
    /// leaf keeps the old leaf id; the right one gets the next free id.
    pub fn split_leaf(
        &mut self,
        id: usize,
        cut: IntervalCut,
        left_cluster: usize,
        right_cluster: usize,
        trace: Option<FeatureSpaceCut>,
    ) -> Result<(usize, usize)> {
        let TreeNode::Leaf { leaf_id, .. } = self.nodes[id] else {
            return Err(Error::TreeFormat(format!("node {id} is not a leaf")));
        };
        let left = self.nodes.len();
        let right = left + 1;
        self.nodes.push(TreeNode::Leaf { leaf_id, cluster: left_cluster });
        self.nodes.push(TreeNode::Leaf { leaf_id: self.leaf_count, cluster: right_cluster });
        self.parent.push(Some(id));
        self.parent.push(Some(id));
        self.trace.push(None);
        self.trace.push(None);
        self.nodes[id] = TreeNode::Internal { cut, left, right };
        self.trace[id] = trace;
        self.leaf_count += 1;
        Ok((left, right))
    }

    /// Node id of the leaf reached by `point`.
    pub fn route(&self, point: ArrayView1<'_, f64>) -> usize {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                TreeNode::Leaf { .. } => return id,
                TreeNode::Internal { cut, left, right } => {
                    id = if cut.goes_left(point[cut.input_dim]) { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, point: ArrayView1<'_, f64>) -> usize {
        self.leaf_cluster(self.route(point)).expect("route ends at a leaf")
    }

    pub fn check_dimension(&self, d: usize) -> Result<()> {
        for node in &self.nodes {
            if let TreeNode::Internal { cut, .. } = node {
                if cut.input_dim >= d {
                    return Err(Error::DimensionMismatch { expected: cut.input_dim + 1, got: d });
                }
            }
        }
        Ok(())
    }

    /// Leaf node id per point.
    pub fn leaf_assignment(&self, data: &Dataset) -> Vec<usize> {
        (0..data.n()).map(|i| self.route(data.point(i))).collect()
    }

    /// Point indices reaching each node, indexed by node id.
    pub fn node_points(&self, data: &Dataset) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for i in 0..data.n() {
            let p = data.point(i);
            let mut id = 0;
            loop {
                out[id].push(i);
                match self.nodes[id] {
                    TreeNode::Leaf { .. } => break,
                    TreeNode::Internal { cut, left, right } => {
                        id = if cut.goes_left(p[cut.input_dim]) { left } else { right };
                    }
                }
            }
        }
        out
    }

    /// Leaves no data point reaches.
    pub fn empty_leaves(&self, data: &Dataset) -> Vec<usize> {
        let reached = self.node_points(data);
        self.leaves().into_iter().filter(|&l| reached[l].is_empty()).collect()
    }

    /// Checks structure: binary, acyclic, every node reachable once, leaf
    /// ids distinct and dense, cut invariants.
    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0];
        let mut leaf_ids = Vec::new();
        while let Some(id) = stack.pop() {
            if id >= self.nodes.len() || seen[id] {
                return Err(Error::TreeFormat(format!("node {id} is shared or missing")));
            }
            seen[id] = true;
            match self.nodes[id] {
                TreeNode::Leaf { leaf_id, .. } => leaf_ids.push(leaf_id),
                TreeNode::Internal { cut, left, right } => {
                    IntervalCut::new(cut.input_dim, cut.lower, cut.upper, cut.inside_goes_left)
                        .map_err(|e| Error::TreeFormat(e.to_string()))?;
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::TreeFormat("unreachable nodes".into()));
        }
        leaf_ids.sort_unstable();
        if leaf_ids != (0..self.leaf_count).collect::<Vec<_>>() {
            return Err(Error::TreeFormat("leaf ids must be 0..k without repeats".into()));
        }
        Ok(())
    }
}

/// Cluster id per point.
pub fn induced_partition(tree: &InterpretableTree, data: &Dataset) -> Vec<usize> {
    (0..data.n()).map(|i| tree.predict(data.point(i))).collect()
}

/// Kernel k-means cost of the induced partition: leaves sharing a cluster
/// id are merged and empty leaves are ignored.
pub fn tree_cost(tree: &InterpretableTree, data: &Dataset, gram: &GramMatrix) -> Result<f64> {
    check_points(data, gram)?;
    let empty = tree.empty_leaves(data);
    if !empty.is_empty() {
        log::warn!("{} empty leaves excluded from costing", empty.len());
    }
    partition_cost(gram, &induced_partition(tree, data))
}

/// Cost with every non-empty leaf treated as its own cluster.
pub fn per_leaf_cost(tree: &InterpretableTree, data: &Dataset, gram: &GramMatrix) -> Result<f64> {
    check_points(data, gram)?;
    partition_cost(gram, &tree.leaf_assignment(data))
}

fn check_points(data: &Dataset, gram: &GramMatrix) -> Result<()> {
    if data.n() != gram.point_count() {
        return Err(Error::DimensionMismatch { expected: gram.point_count(), got: data.n() });
    }
    Ok(())
}

/// Number of distinct cluster ids among leaves reached by data.
pub fn reached_clusters(tree: &InterpretableTree, data: &Dataset) -> usize {
    compact_labels(&induced_partition(tree, data)).1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Dot,
    Text,
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ExportFormat::Json),
            "dot" => Ok(ExportFormat::Dot),
            "text" | "txt" => Ok(ExportFormat::Text),
            other => Err(Error::TreeFormat(format!("unknown export format {other:?}"))),
        }
    }
}

pub fn export_tree(tree: &InterpretableTree, format: ExportFormat) -> String {
    match format {
        ExportFormat::Json => serde_json::to_string_pretty(&to_json(tree, 0)).expect("tree json"),
        ExportFormat::Dot => to_dot(tree),
        ExportFormat::Text => {
            let mut out = String::new();
            write_text(tree, 0, 0, &mut out);
            out
        }
    }
}

fn bound(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn to_json(tree: &InterpretableTree, id: usize) -> Value {
    match tree.nodes[id] {
        TreeNode::Leaf { leaf_id, cluster } => json!({ "leaf": leaf_id, "cluster": cluster }),
        TreeNode::Internal { cut, left, right } => {
            let mut node = Map::new();
            node.insert("dim".into(), json!(cut.input_dim));
            node.insert("lower".into(), bound(cut.lower));
            node.insert("upper".into(), bound(cut.upper));
            if !cut.inside_goes_left {
                node.insert("inside_goes_left".into(), json!(false));
            }
            if let Some(t) = tree.trace[id] {
                node.insert("feature_cut".into(), json!({ "column": t.column, "theta": t.theta }));
            }
            node.insert("left".into(), to_json(tree, left));
            node.insert("right".into(), to_json(tree, right));
            json!({ "node": node })
        }
    }
}

fn interval_label(cut: &IntervalCut, inside: bool) -> String {
    let lo = if cut.lower.is_finite() { format!("{}", cut.lower) } else { "-\u{221e}".into() };
    let hi = if cut.upper.is_finite() { format!("{}", cut.upper) } else { "\u{221e}".into() };
    let sym = if inside { "\u{2208}" } else { "\u{2209}" };
    format!("x_{} {sym} [{lo}, {hi}]", cut.input_dim)
}

fn to_dot(tree: &InterpretableTree) -> String {
    let mut out = String::from("digraph tree {\n  node [shape=box];\n");
    for (id, node) in tree.nodes.iter().enumerate() {
        match node {
            TreeNode::Leaf { leaf_id, cluster } => {
                let _ = writeln!(out, "  n{id} [label=\"leaf {leaf_id}\\ncluster {cluster}\"];");
            }
            TreeNode::Internal { cut, .. } => {
                let _ = writeln!(out, "  n{id} [label=\"x_{}\"];", cut.input_dim);
            }
        }
    }
    for (id, node) in tree.nodes.iter().enumerate() {
        if let TreeNode::Internal { cut, left, right } = node {
            let _ = writeln!(out, "  n{id} -> n{left} [label=\"{}\"];", interval_label(cut, cut.inside_goes_left));
            let _ = writeln!(out, "  n{id} -> n{right} [label=\"{}\"];", interval_label(cut, !cut.inside_goes_left));
        }
    }
    out.push_str("}\n");
    out
}

fn write_text(tree: &InterpretableTree, id: usize, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match tree.nodes[id] {
        TreeNode::Leaf { leaf_id, cluster } => {
            let _ = writeln!(out, "{pad}leaf {leaf_id} -> cluster {cluster}");
        }
        TreeNode::Internal { cut, left, right } => {
            let _ = writeln!(out, "{pad}if {}:", interval_label(&cut, cut.inside_goes_left));
            write_text(tree, left, indent + 1, out);
            let _ = writeln!(out, "{pad}else:");
            write_text(tree, right, indent + 1, out);
        }
    }
}

/// Parses the JSON format written by [`export_tree`].
pub fn import_tree(text: &str) -> Result<InterpretableTree> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::TreeFormat(e.to_string()))?;
    let mut tree = InterpretableTree { nodes: Vec::new(), parent: Vec::new(), trace: Vec::new(), leaf_count: 0 };
    parse_node(&value, None, &mut tree)?;
    tree.validate()?;
    Ok(tree)
}

fn parse_node(v: &Value, parent: Option<usize>, tree: &mut InterpretableTree) -> Result<usize> {
    let bad = |m: &str| Error::TreeFormat(m.to_string());
    let uint = |v: &Value, key: &str| -> Result<usize> {
        v.get(key).and_then(Value::as_u64).map(|u| u as usize).ok_or_else(|| Error::TreeFormat(format!("missing or invalid {key:?}")))
    };
    let id = tree.nodes.len();
    tree.parent.push(parent);
    tree.trace.push(None);
    if v.get("leaf").is_some() {
        tree.nodes.push(TreeNode::Leaf { leaf_id: uint(v, "leaf")?, cluster: uint(v, "cluster")? });
        tree.leaf_count += 1;
        return Ok(id);
    }
    let node = v.get("node").ok_or_else(|| bad("expected \"node\" or \"leaf\""))?;
    let dim = uint(node, "dim")?;
    let read_bound = |key: &str, inf: f64| -> Result<f64> {
        match node.get(key) {
            None | Some(Value::Null) => Ok(inf),
            Some(x) => x.as_f64().ok_or_else(|| Error::TreeFormat(format!("{key} must be a number or null"))),
        }
    };
    let lower = read_bound("lower", f64::NEG_INFINITY)?;
    let upper = read_bound("upper", f64::INFINITY)?;
    let inside_goes_left = match node.get("inside_goes_left") {
        None => true,
        Some(b) => b.as_bool().ok_or_else(|| bad("inside_goes_left must be boolean"))?,
    };
    let cut = IntervalCut::new(dim, lower, upper, inside_goes_left).map_err(|e| Error::TreeFormat(e.to_string()))?;
    if let Some(fc) = node.get("feature_cut") {
        let theta = fc.get("theta").and_then(Value::as_f64).ok_or_else(|| bad("feature_cut.theta"))?;
        tree.trace[id] = Some(FeatureSpaceCut { column: uint(fc, "column")?, theta });
    }
    // placeholder until children are parsed
    tree.nodes.push(TreeNode::Leaf { leaf_id: usize::MAX, cluster: 0 });
    let left = parse_node(node.get("left").ok_or_else(|| bad("missing left child"))?, Some(id), tree)?;
    let right = parse_node(node.get("right").ok_or_else(|| bad("missing right child"))?, Some(id), tree)?;
    tree.nodes[id] = TreeNode::Internal { cut, left, right };
    Ok(id)
}
