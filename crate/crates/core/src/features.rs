//! Per-coordinate surrogate feature maps and the translation of
//! feature-space threshold cuts back to interval cuts on one input
//! coordinate.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelSpec};

pub const DEFAULT_TAYLOR_ORDER: usize = 5;
pub const DEFAULT_TAYLOR_MARGIN: f64 = 0.1;
pub const BISECTION_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Taylor,
    DistanceAnchor,
    Hellinger,
    HikStep,
    Chi2Term,
    /// The input coordinate itself (linear kernel).
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotoneProfile {
    Increasing,
    Decreasing,
    /// Increasing up to the peak (in input coordinates), decreasing after.
    UnimodalPeakAt(f64),
    /// Zero below the anchor, constant at or above it.
    Step,
}

/// One column of a surrogate feature map. Everything needed to evaluate
/// the column at an arbitrary input value is stored here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub input_dim: usize,
    pub component: usize,
    pub kind: FeatureKind,
    /// Anchor coordinate (distance features) or step location on the
    /// `x^beta` scale (intersection steps); zero otherwise.
    pub anchor_value: f64,
    pub profile: MonotoneProfile,
    /// Constant factor of the column.
    pub scale: f64,
    /// Bandwidth, or the intersection exponent for step columns.
    pub param: f64,
    /// Added to the input coordinate before evaluation (Taylor columns).
    pub shift: f64,
    /// Expansion order (chi-square columns).
    pub order: usize,
}

impl FeatureDescriptor {
    /// Evaluates the column at input coordinate value `x`.
    pub fn eval(&self, x: f64) -> f64 {
        match self.kind {
            FeatureKind::Taylor => {
                let z = x + self.shift;
                let j = self.component as i32;
                let gamma = self.param;
                if z > 0.0 {
                    (j as f64 * z.ln() - gamma * z * z).exp() * self.scale
                } else {
                    z.powi(j) * (-gamma * z * z).exp() * self.scale
                }
            }
            FeatureKind::DistanceAnchor => {
                let t = (x - self.anchor_value).abs();
                match self.order {
                    0 => (-self.param * t * t).exp(),
                    _ => (-self.param * t).exp(),
                }
            }
            FeatureKind::Hellinger => x.max(0.0).sqrt(),
            FeatureKind::HikStep => {
                if x.max(0.0).powf(self.param) >= self.anchor_value {
                    self.scale
                } else {
                    0.0
                }
            }
            FeatureKind::Chi2Term => {
                let r = self.component as f64 / self.order as f64;
                self.scale * x * r.powf(x)
            }
            FeatureKind::Raw => x,
        }
    }
}

/// An `n x D` surrogate feature matrix with one descriptor per column.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Array2<f64>,
    pub descriptors: Vec<FeatureDescriptor>,
    pub source_spec: KernelSpec,
    /// Expansion order for Taylor and chi-square maps.
    pub order: Option<usize>,
    /// Per-coordinate translation applied before evaluation (Taylor maps).
    pub shift: Vec<f64>,
}

impl FeatureMatrix {
    fn build(data: &Dataset, descriptors: Vec<FeatureDescriptor>, spec: KernelSpec, order: Option<usize>, shift: Vec<f64>) -> Self {
        let n = data.n();
        let columns: Vec<Vec<f64>> =
            descriptors.par_iter().map(|desc| data.points().column(desc.input_dim).iter().map(|&x| desc.eval(x)).collect()).collect();
        let mut values = Array2::zeros((n, descriptors.len()));
        for (c, col) in columns.into_iter().enumerate() {
            for (r, v) in col.into_iter().enumerate() {
                values[[r, c]] = v;
            }
        }
        Self { values, descriptors, source_spec: spec, order, shift }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn columns(&self) -> usize {
        self.values.ncols()
    }

    /// Inner products of feature rows: the surrogate Gram matrix.
    pub fn gram(&self) -> Array2<f64> {
        self.values.dot(&self.values.t())
    }

    /// Checks that `column` follows its declared profile on the sorted
    /// values of its input coordinate.
    pub fn check_profile(&self, data: &Dataset, column: usize) -> Result<()> {
        let desc = &self.descriptors[column];
        let mut pairs: Vec<(f64, f64)> =
            data.points().column(desc.input_dim).iter().zip(self.values.column(column).iter()).map(|(&x, &v)| (x, v)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let tol = 1e-12;
        let ok = pairs.windows(2).all(|w| {
            let ((x0, v0), (x1, v1)) = (w[0], w[1]);
            match desc.profile {
                MonotoneProfile::Increasing | MonotoneProfile::Step => v1 >= v0 - tol,
                MonotoneProfile::Decreasing => v1 <= v0 + tol,
                MonotoneProfile::UnimodalPeakAt(p) => {
                    if x1 <= p {
                        v1 >= v0 - tol
                    } else if x0 >= p {
                        v1 <= v0 + tol
                    } else {
                        true
                    }
                }
            }
        });
        if ok {
            Ok(())
        } else {
            Err(Error::InconsistentProfile { column })
        }
    }
}

/// Which surrogate map to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    Taylor,
    Distance,
    Additive,
    Raw,
    /// Both Taylor and distance maps for the gaussian; keep the cheaper tree.
    Auto,
}

impl FeatureMode {
    pub fn name(self) -> &'static str {
        match self {
            FeatureMode::Taylor => "taylor",
            FeatureMode::Distance => "distance",
            FeatureMode::Additive => "additive",
            FeatureMode::Raw => "raw",
            FeatureMode::Auto => "auto",
        }
    }

    /// Whether the map is defined for `family`. `Auto` accepts every family
    /// that has at least one map.
    pub fn supports(self, family: KernelFamily) -> bool {
        match self {
            FeatureMode::Taylor => family == KernelFamily::Gaussian,
            FeatureMode::Distance => family.is_product(),
            FeatureMode::Additive => family.is_additive(),
            FeatureMode::Raw => family == KernelFamily::Linear,
            FeatureMode::Auto => family.is_product() || family.is_additive() || family == KernelFamily::Linear,
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "taylor" => FeatureMode::Taylor,
            "distance" => FeatureMode::Distance,
            "additive" => FeatureMode::Additive,
            "raw" => FeatureMode::Raw,
            "auto" => FeatureMode::Auto,
            other => return Err(Error::InvalidParameter(format!("unknown feature mode {other:?}"))),
        })
    }
}

fn incompatible(mode: FeatureMode, spec: &KernelSpec) -> Error {
    Error::IncompatibleFeatureMode { mode: mode.name(), kernel: spec.family.name() }
}

fn ln_factorial(j: usize) -> f64 {
    (2..=j).map(|v| (v as f64).ln()).sum()
}

/// Per-coordinate shift placing each coordinate's minimum at `margin`.
pub fn taylor_shift(data: &Dataset, margin: f64) -> Vec<f64> {
    (0..data.d())
        .map(|i| {
            let lo = data.points().column(i).iter().copied().fold(f64::INFINITY, f64::min);
            margin - lo
        })
        .collect()
}

/// Truncated Taylor features of the gaussian kernel with shift margin
/// [`DEFAULT_TAYLOR_MARGIN`].
pub fn taylor_features(data: &Dataset, spec: &KernelSpec, order: usize) -> Result<FeatureMatrix> {
    taylor_features_with_margin(data, spec, order, DEFAULT_TAYLOR_MARGIN)
}

/// Column `(i, j)` holds `z^j exp(-gamma z^2) sqrt((2 gamma)^j / j!)` where
/// `z` is coordinate `i` shifted so its minimum equals `margin`.
pub fn taylor_features_with_margin(data: &Dataset, spec: &KernelSpec, order: usize, margin: f64) -> Result<FeatureMatrix> {
    if spec.family != KernelFamily::Gaussian {
        return Err(incompatible(FeatureMode::Taylor, spec));
    }
    spec.validate()?;
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(Error::InvalidParameter(format!("taylor margin must be positive, got {margin}")));
    }
    let gamma = spec.gamma;
    let shift = taylor_shift(data, margin);
    let mut descriptors = Vec::with_capacity(data.d() * (order + 1));
    for (i, &s) in shift.iter().enumerate() {
        for j in 0..=order {
            let profile =
                if j == 0 { MonotoneProfile::Decreasing } else { MonotoneProfile::UnimodalPeakAt((j as f64 / (2.0 * gamma)).sqrt() - s) };
            descriptors.push(FeatureDescriptor {
                input_dim: i,
                component: j,
                kind: FeatureKind::Taylor,
                anchor_value: 0.0,
                profile,
                scale: (0.5 * (j as f64 * (2.0 * gamma).ln() - ln_factorial(j))).exp(),
                param: gamma,
                shift: s,
                order,
            });
        }
    }
    Ok(FeatureMatrix::build(data, descriptors, *spec, Some(order), shift))
}

/// Kernel-anchor features `h(|x_i - a|)` with every data point as an anchor.
pub fn distance_features(data: &Dataset, spec: &KernelSpec) -> Result<FeatureMatrix> {
    let anchors: Vec<usize> = (0..data.n()).collect();
    distance_features_with_anchors(data, spec, &anchors)
}

/// `count` anchors spread evenly over the point order; all points when
/// `count >= n`.
pub fn subsample_anchors(n: usize, count: usize) -> Vec<usize> {
    if count >= n {
        return (0..n).collect();
    }
    let mut idx: Vec<usize> = (0..count).map(|a| a * n / count).collect();
    idx.dedup();
    idx
}

pub fn distance_features_with_anchors(data: &Dataset, spec: &KernelSpec, anchors: &[usize]) -> Result<FeatureMatrix> {
    if !spec.family.is_product() {
        return Err(incompatible(FeatureMode::Distance, spec));
    }
    spec.validate()?;
    if let Some(&bad) = anchors.iter().find(|&&a| a >= data.n()) {
        return Err(Error::InvalidParameter(format!("anchor index {bad} out of range")));
    }
    // order 0 marks the squared profile, 1 the absolute one
    let profile_code = usize::from(spec.family == KernelFamily::Laplace);
    let mut descriptors = Vec::with_capacity(data.d() * anchors.len());
    for i in 0..data.d() {
        for (j, &a) in anchors.iter().enumerate() {
            let anchor = data.points()[[a, i]];
            descriptors.push(FeatureDescriptor {
                input_dim: i,
                component: j,
                kind: FeatureKind::DistanceAnchor,
                anchor_value: anchor,
                profile: MonotoneProfile::UnimodalPeakAt(anchor),
                scale: 1.0,
                param: spec.gamma,
                shift: 0.0,
                order: profile_code,
            });
        }
    }
    Ok(FeatureMatrix::build(data, descriptors, *spec, None, vec![0.0; data.d()]))
}

/// Features for additive kernels: exact for Hellinger and histogram
/// intersection, order-`order` approximation for chi-square.
pub fn additive_features(data: &Dataset, spec: &KernelSpec, order: usize) -> Result<FeatureMatrix> {
    if !spec.family.is_additive() {
        return Err(incompatible(FeatureMode::Additive, spec));
    }
    spec.check_dataset(data)?;
    let base = |i, j, kind, profile| FeatureDescriptor {
        input_dim: i,
        component: j,
        kind,
        anchor_value: 0.0,
        profile,
        scale: 1.0,
        param: 0.0,
        shift: 0.0,
        order: 0,
    };
    let mut descriptors = Vec::new();
    let mut recorded_order = None;
    match spec.family {
        KernelFamily::Hellinger => {
            for i in 0..data.d() {
                descriptors.push(base(i, 0, FeatureKind::Hellinger, MonotoneProfile::Increasing));
            }
        }
        KernelFamily::HistogramIntersection => {
            for i in 0..data.d() {
                let mut z: Vec<f64> = data.points().column(i).iter().map(|&x| x.powf(spec.beta)).collect();
                z.sort_by(f64::total_cmp);
                z.dedup();
                let mut prev = 0.0;
                for (j, &zj) in z.iter().enumerate() {
                    if j == 0 && zj == 0.0 {
                        // a zero-height first step contributes nothing
                        prev = zj;
                        continue;
                    }
                    descriptors.push(FeatureDescriptor {
                        anchor_value: zj,
                        scale: (zj - prev).sqrt(),
                        param: spec.beta,
                        ..base(i, j + 1, FeatureKind::HikStep, MonotoneProfile::Step)
                    });
                    prev = zj;
                }
            }
        }
        KernelFamily::AdditiveChi2 => {
            if order == 0 {
                return Err(Error::InvalidParameter("chi-square expansion order must be >= 1".into()));
            }
            recorded_order = Some(order);
            for i in 0..data.d() {
                for j in 1..=order {
                    let profile = if j == order {
                        MonotoneProfile::Increasing
                    } else {
                        MonotoneProfile::UnimodalPeakAt(1.0 / (order as f64 / j as f64).ln())
                    };
                    descriptors.push(FeatureDescriptor {
                        scale: (2.0 / j as f64).sqrt(),
                        order,
                        ..base(i, j, FeatureKind::Chi2Term, profile)
                    });
                }
            }
        }
        _ => unreachable!(),
    }
    Ok(FeatureMatrix::build(data, descriptors, *spec, recorded_order, vec![0.0; data.d()]))
}

/// The identity map, one increasing column per coordinate.
pub fn raw_features(data: &Dataset, spec: &KernelSpec) -> Result<FeatureMatrix> {
    if spec.family != KernelFamily::Linear {
        return Err(incompatible(FeatureMode::Raw, spec));
    }
    let descriptors = (0..data.d())
        .map(|i| FeatureDescriptor {
            input_dim: i,
            component: 0,
            kind: FeatureKind::Raw,
            anchor_value: 0.0,
            profile: MonotoneProfile::Increasing,
            scale: 1.0,
            param: 0.0,
            shift: 0.0,
            order: 0,
        })
        .collect();
    Ok(FeatureMatrix::build(data, descriptors, *spec, None, vec![0.0; data.d()]))
}

/// Builds the map for a concrete mode (not `Auto`).
pub fn build_features(data: &Dataset, spec: &KernelSpec, mode: FeatureMode, order: usize, anchors: Option<usize>) -> Result<FeatureMatrix> {
    if !mode.supports(spec.family) {
        return Err(incompatible(mode, spec));
    }
    match mode {
        FeatureMode::Taylor => taylor_features(data, spec, order),
        FeatureMode::Distance => match anchors {
            Some(count) => distance_features_with_anchors(data, spec, &subsample_anchors(data.n(), count)),
            None => distance_features(data, spec),
        },
        FeatureMode::Additive => additive_features(data, spec, order),
        FeatureMode::Raw => raw_features(data, spec),
        FeatureMode::Auto => Err(Error::InvalidParameter("auto is resolved by the caller".into())),
    }
}

/// Largest absolute gap between the truncated Taylor kernel and the exact
/// one-dimensional gaussian kernel over all coordinate pairs of the data.
pub fn taylor_approximation_error(data: &Dataset, spec: &KernelSpec, order: usize) -> Result<f64> {
    let fm = taylor_features(data, spec, order)?;
    let per_dim = order + 1;
    let n = data.n();
    let errs: Vec<f64> = (0..data.d())
        .into_par_iter()
        .map(|i| {
            let block = fm.values.slice(ndarray::s![.., i * per_dim..(i + 1) * per_dim]);
            let mut worst: f64 = 0.0;
            for a in 0..n {
                for b in a..n {
                    let approx = block.row(a).dot(&block.row(b));
                    let diff = data.points()[[a, i]] - data.points()[[b, i]];
                    let exact = (-spec.gamma * diff * diff).exp();
                    worst = worst.max((approx - exact).abs());
                }
            }
            worst
        })
        .collect();
    Ok(errs.into_iter().fold(0.0, f64::max))
}

/// Mean feature row per cluster; row `l` belongs to label `l`.
pub fn surrogate_centers(features: &Array2<f64>, labels: &[usize]) -> Result<Array2<f64>> {
    if labels.len() != features.nrows() {
        return Err(Error::DimensionMismatch { expected: features.nrows(), got: labels.len() });
    }
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    if k == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut centers = Array2::zeros((k, features.ncols()));
    let mut counts = vec![0usize; k];
    for (row, &l) in features.axis_iter(Axis(0)).zip(labels) {
        let mut c = centers.row_mut(l);
        c += &row;
        counts[l] += 1;
    }
    for (l, &count) in counts.iter().enumerate() {
        if count == 0 {
            return Err(Error::EmptyCluster(l));
        }
        centers.row_mut(l).mapv_inplace(|v| v / count as f64);
    }
    Ok(centers)
}

/// `x_dim in [lower, upper]` (closed) versus its complement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalCut {
    pub input_dim: usize,
    pub lower: f64,
    pub upper: f64,
    pub inside_goes_left: bool,
}

impl IntervalCut {
    pub fn new(input_dim: usize, lower: f64, upper: f64, inside_goes_left: bool) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || !(lower < upper) {
            return Err(Error::InvalidParameter(format!("interval bounds must satisfy lower < upper, got [{lower}, {upper}]")));
        }
        if lower == f64::NEG_INFINITY && upper == f64::INFINITY {
            return Err(Error::InvalidParameter("interval cut needs at least one finite bound".into()));
        }
        if lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(Error::InvalidParameter("interval bounds are out of order".into()));
        }
        Ok(Self { input_dim, lower, upper, inside_goes_left })
    }

    /// `x_dim <= theta` goes left.
    pub fn threshold(input_dim: usize, theta: f64) -> Self {
        Self { input_dim, lower: f64::NEG_INFINITY, upper: theta, inside_goes_left: true }
    }

    /// A cut sending every point with coordinate at most `data_max` to one
    /// side: its interval lies strictly above the data.
    pub fn everything(input_dim: usize, data_max: f64, left: bool) -> Self {
        let lower = if data_max.abs() < 1.0 { data_max + 1.0 } else { data_max + data_max.abs() };
        Self { input_dim, lower, upper: f64::INFINITY, inside_goes_left: !left }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn goes_left(&self, x: f64) -> bool {
        self.contains(x) == self.inside_goes_left
    }

    pub fn is_one_sided(&self) -> bool {
        self.lower == f64::NEG_INFINITY || self.upper == f64::INFINITY
    }
}

impl fmt::Display for IntervalCut {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lo = if self.lower.is_finite() { format!("{}", self.lower) } else { "-inf".into() };
        let hi = if self.upper.is_finite() { format!("{}", self.upper) } else { "inf".into() };
        let sym = if self.inside_goes_left { "\u{2208}" } else { "\u{2209}" };
        write!(f, "x{} {sym} [{lo}, {hi}]", self.input_dim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CutDirection {
    /// Predicate `phi(x) <= theta`.
    Le,
    /// Predicate `phi(x) > theta`.
    Gt,
}

impl CutDirection {
    pub fn holds(self, value: f64, theta: f64) -> bool {
        match self {
            CutDirection::Le => value <= theta,
            CutDirection::Gt => value > theta,
        }
    }
}

/// Finds `x` in `[lo, hi]` where the monotone `f` crosses `theta`, given
/// `f(lo)` and `f(hi)` on opposite sides.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, theta: f64) -> f64 {
    let lo_above = f(lo) > theta;
    while hi - lo > BISECTION_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) > theta) == lo_above {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The continuous interval cut equivalent to `phi(x_i) <direction> theta`
/// for inputs in `data_range`: the returned cut sends exactly the points
/// satisfying the predicate to the left. Unimodal profiles are inverted by
/// bisection on each monotone side; anchor columns use the closed-form
/// inverse of the distance profile.
pub fn feature_cut_to_interval(
    desc: &FeatureDescriptor,
    theta: f64,
    direction: CutDirection,
    data_range: (f64, f64),
) -> Result<IntervalCut> {
    let (lo, hi) = data_range;
    if !(lo <= hi) {
        return Err(Error::InvalidParameter(format!("invalid data range [{lo}, {hi}]")));
    }
    let dim = desc.input_dim;
    let f = |x: f64| desc.eval(x);
    let le_left = direction == CutDirection::Le;
    // the predicate-true set equals, on [lo, hi], `inside` or its complement
    let (lower, upper, inside_is_le) = match desc.profile {
        MonotoneProfile::Increasing | MonotoneProfile::Step if desc.kind == FeatureKind::HikStep => {
            if theta >= desc.scale {
                return Ok(IntervalCut::everything(dim, hi, le_left));
            }
            if theta < 0.0 {
                return Ok(IntervalCut::everything(dim, hi, !le_left));
            }
            (desc.anchor_value.powf(1.0 / desc.param), f64::INFINITY, false)
        }
        MonotoneProfile::Increasing | MonotoneProfile::Step => {
            if f(hi) <= theta {
                return Ok(IntervalCut::everything(dim, hi, le_left));
            }
            if f(lo) > theta {
                return Ok(IntervalCut::everything(dim, hi, !le_left));
            }
            let t = bisect(f, lo, hi, theta);
            return Ok(if le_left { IntervalCut::threshold(dim, t) } else { IntervalCut::new(dim, t, f64::INFINITY, true)? });
        }
        MonotoneProfile::Decreasing => {
            if f(lo) <= theta {
                return Ok(IntervalCut::everything(dim, hi, le_left));
            }
            if f(hi) > theta {
                return Ok(IntervalCut::everything(dim, hi, !le_left));
            }
            let t = bisect(f, lo, hi, theta);
            return Ok(if le_left { IntervalCut::new(dim, t, f64::INFINITY, true)? } else { IntervalCut::threshold(dim, t) });
        }
        MonotoneProfile::UnimodalPeakAt(peak) => {
            let top = f(peak.clamp(lo, hi));
            if top <= theta {
                return Ok(IntervalCut::everything(dim, hi, le_left));
            }
            let (a, b) = if desc.kind == FeatureKind::DistanceAnchor {
                let spec = if desc.order == 0 { KernelSpec::gaussian(desc.param) } else { KernelSpec::laplace(desc.param) };
                let r = spec.inverse_distance_profile(theta)?;
                (desc.anchor_value - r, desc.anchor_value + r)
            } else {
                let p = peak.clamp(lo, hi);
                let a = if f(lo) > theta { f64::NEG_INFINITY } else { bisect(f, lo, p, theta) };
                let b = if f(hi) > theta { f64::INFINITY } else { bisect(f, p, hi, theta) };
                (a, b)
            };
            let a = if a < lo { f64::NEG_INFINITY } else { a };
            let b = if b > hi { f64::INFINITY } else { b };
            if a == f64::NEG_INFINITY && b == f64::INFINITY {
                return Ok(IntervalCut::everything(dim, hi, !le_left));
            }
            // inside is the superlevel set {phi > theta}
            (a, b, false)
        }
    };
    let inside_goes_left = if le_left { inside_is_le } else { !inside_is_le };
    IntervalCut::new(dim, lower, upper, inside_goes_left)
}

/// The interval cut reproducing `phi(x_i) <direction> theta` exactly on the
/// given sorted distinct coordinate values, with finite bounds at midpoints
/// between neighbouring values. Fails when neither the predicate set nor
/// its complement is a contiguous run.
pub fn snap_cut_to_data(
    desc: &FeatureDescriptor,
    theta: f64,
    direction: CutDirection,
    sorted_values: &[f64],
    column: usize,
) -> Result<IntervalCut> {
    let dim = desc.input_dim;
    let Some(&max) = sorted_values.last() else {
        return Err(Error::EmptyDataset);
    };
    let member: Vec<bool> = sorted_values.iter().map(|&x| direction.holds(desc.eval(x), theta)).collect();
    if member.iter().all(|&m| m) {
        return Ok(IntervalCut::everything(dim, max, true));
    }
    if !member.iter().any(|&m| m) {
        return Ok(IntervalCut::everything(dim, max, false));
    }
    let run = |want: bool| -> Option<(usize, usize)> {
        let first = member.iter().position(|&m| m == want)?;
        let last = member.iter().rposition(|&m| m == want)?;
        member[first..=last].iter().all(|&m| m == want).then_some((first, last))
    };
    let (first, last, inside_goes_left) = if let Some((a, b)) = run(true) {
        (a, b, true)
    } else if let Some((a, b)) = run(false) {
        (a, b, false)
    } else {
        return Err(Error::InconsistentProfile { column });
    };
    let m = sorted_values.len();
    let lower = if first == 0 { f64::NEG_INFINITY } else { midpoint(sorted_values[first - 1], sorted_values[first]) };
    let upper = if last == m - 1 { f64::INFINITY } else { midpoint(sorted_values[last], sorted_values[last + 1]) };
    IntervalCut::new(dim, lower, upper, inside_goes_left)
}

/// Midpoint of `a < b` that lies strictly between them whenever a
/// representable value does.
pub fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + 0.5 * (b - a);
    if m > a && m < b {
        m
    } else {
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{eval_kernel, gram_matrix};
    use ndarray::array;
    use proptest::prelude::*;

    fn ds(rows: &[Vec<f64>]) -> Dataset {
        Dataset::from_rows("t", rows, None).unwrap()
    }

    #[test]
    fn taylor_zeroth_column_and_shape() {
        let data = ds(&[vec![0.5, 1.0], vec![1.5, 0.2], vec![1.0, 2.0]]);
        let fm = taylor_features(&data, &KernelSpec::gaussian(1.0), 5).unwrap();
        assert_eq!(fm.columns(), 12);
        for r in 0..3 {
            let z = data.points()[[r, 0]] + fm.shift[0];
            assert!((fm.values[[r, 0]] - (-z * z).exp()).abs() < 1e-15);
        }
        assert!((fm.shift[0] - (0.1 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn taylor_column_matches_formula() {
        let data = ds(&[vec![0.3], vec![1.7]]);
        let gamma = 0.8;
        let fm = taylor_features(&data, &KernelSpec::gaussian(gamma), 4).unwrap();
        for r in 0..2 {
            let z: f64 = data.points()[[r, 0]] + fm.shift[0];
            for j in 0..=4usize {
                let fact: f64 = (1..=j).map(|v| v as f64).product();
                let want = z.powi(j as i32) * (-gamma * z * z).exp() * ((2.0 * gamma).powi(j as i32) / fact).sqrt();
                assert!((fm.values[[r, j]] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn taylor_error_decreases_with_order() {
        let data = ds(&(1..=20).map(|i| vec![i as f64 / 10.0]).collect::<Vec<_>>());
        let spec = KernelSpec::gaussian(1.0);
        let errs: Vec<f64> = (1..=30).map(|m| taylor_approximation_error(&data, &spec, m).unwrap()).collect();
        for w in errs.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(errs[29] < 1e-6);
    }

    #[test]
    fn non_gaussian_rejected_for_taylor() {
        let data = ds(&[vec![1.0]]);
        assert!(matches!(taylor_features(&data, &KernelSpec::laplace(1.0), 3), Err(Error::IncompatibleFeatureMode { .. })));
        assert!(distance_features(&data, &KernelSpec::linear()).is_err());
        assert!(additive_features(&data, &KernelSpec::gaussian(1.0), 3).is_err());
    }

    #[test]
    fn distance_features_values() {
        let data = ds(&[vec![0.0, 1.0, 2.0], vec![2.0, 0.0, 1.0], vec![1.0, 1.0, 1.0], vec![3.0, 3.0, 0.0], vec![0.5, 0.5, 0.5]]);
        let fm = distance_features(&data, &KernelSpec::laplace(1.0)).unwrap();
        assert_eq!(fm.columns(), 15);
        for j in 0..5 {
            assert_eq!(fm.values[[j, j]], 1.0);
        }
        // anchor 0 has coordinate 0 equal to 0; point 1 sits at 2
        assert!((fm.values[[1, 0]] - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn hellinger_features() {
        let data = ds(&[vec![4.0, 9.0]]);
        let fm = additive_features(&data, &KernelSpec::hellinger(), 0).unwrap();
        assert_eq!(fm.values, array![[2.0, 3.0]]);
    }

    #[test]
    fn hik_two_point_example() {
        let data = ds(&[vec![1.0], vec![3.0]]);
        let fm = additive_features(&data, &KernelSpec::histogram_intersection(1.0), 0).unwrap();
        assert_eq!(fm.values.row(0).to_vec(), vec![1.0, 0.0]);
        assert!((fm.values[[1, 1]] - 2f64.sqrt()).abs() < 1e-15);
        assert!((fm.gram()[[0, 1]] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn chi2_last_column_is_linear() {
        let data = ds(&[vec![0.25], vec![0.6]]);
        let m = 4;
        let fm = additive_features(&data, &KernelSpec::additive_chi2(), m).unwrap();
        assert_eq!(fm.columns(), m);
        for r in 0..2 {
            let x = data.points()[[r, 0]];
            assert!((fm.values[[r, m - 1]] - (2.0 / m as f64).sqrt() * x).abs() < 1e-15);
        }
    }

    #[test]
    fn chi2_rejects_zero() {
        let data = ds(&[vec![0.0, 1.0]]);
        match additive_features(&data, &KernelSpec::additive_chi2(), 3) {
            Err(Error::Domain { coordinate, .. }) => assert_eq!(coordinate, 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn laplace_anchor_cut_closed_form() {
        let data = ds(&[vec![-3.0], vec![0.0], vec![3.0]]);
        let fm = distance_features(&data, &KernelSpec::laplace(1.0)).unwrap();
        let desc = fm.descriptors[1];
        let theta = 0.2;
        let cut = feature_cut_to_interval(&desc, theta, CutDirection::Le, (-3.0, 3.0)).unwrap();
        let r = (1.0f64 / theta).ln();
        assert!((cut.lower + r).abs() < 1e-12 && (cut.upper - r).abs() < 1e-12);
        assert!(!cut.inside_goes_left);
    }

    #[test]
    fn taylor_zeroth_order_cut_is_one_sided() {
        let data = ds(&[vec![0.0], vec![2.0]]);
        let fm = taylor_features(&data, &KernelSpec::gaussian(1.0), 2).unwrap();
        let desc = fm.descriptors[0];
        let theta = 0.5;
        let cut = feature_cut_to_interval(&desc, theta, CutDirection::Gt, (0.0, 2.0)).unwrap();
        let want = ((1.0f64 / theta).ln()).sqrt() - fm.shift[0];
        assert_eq!(cut.lower, f64::NEG_INFINITY);
        assert!((cut.upper - want).abs() < 1e-9);
        assert!(cut.inside_goes_left);
    }

    #[test]
    fn taylor_unimodal_cut_matches_grid() {
        // shift 0 keeps input and shifted coordinates equal
        let desc = FeatureDescriptor {
            input_dim: 0,
            component: 2,
            kind: FeatureKind::Taylor,
            anchor_value: 0.0,
            profile: MonotoneProfile::UnimodalPeakAt(1.0),
            scale: (0.5 * (2.0 * 2f64.ln() - 2f64.ln())).exp(),
            param: 1.0,
            shift: 0.0,
            order: 2,
        };
        let peak = desc.eval(1.0);
        let theta = peak * 0.999;
        let cut = feature_cut_to_interval(&desc, theta, CutDirection::Gt, (0.0, 3.0)).unwrap();
        assert!(cut.lower.is_finite() && cut.upper.is_finite());
        assert!(cut.lower < 1.0 && cut.upper > 1.0);
        let mut mismatched = 0;
        for g in 0..10_000 {
            let x = 3.0 * g as f64 / 9_999.0;
            if (desc.eval(x) > theta) != cut.goes_left(x) {
                // allow disagreement only within bisection tolerance
                assert!((x - cut.lower).abs() < 1e-9 || (x - cut.upper).abs() < 1e-9);
                mismatched += 1;
            }
        }
        assert_eq!(mismatched, 0);
    }

    #[test]
    fn snapping_matches_predicate() {
        let data = ds(&[vec![0.0], vec![1.0], vec![2.0], vec![5.0], vec![6.0]]);
        let fm = distance_features(&data, &KernelSpec::gaussian(0.5)).unwrap();
        let values = data.unique_coordinate_values(0);
        for (c, desc) in fm.descriptors.iter().enumerate() {
            for theta in [0.01, 0.3, 0.6, 0.99, 1.0] {
                for dir in [CutDirection::Le, CutDirection::Gt] {
                    let cut = snap_cut_to_data(desc, theta, dir, &values, c).unwrap();
                    for &x in &values {
                        assert_eq!(cut.goes_left(x), dir.holds(desc.eval(x), theta));
                    }
                }
            }
        }
    }

    #[test]
    fn snapping_rejects_non_contiguous() {
        // z^2 exp(-z^2) without a shift has peaks at -1 and 1
        let desc = FeatureDescriptor {
            input_dim: 0,
            component: 2,
            kind: FeatureKind::Taylor,
            anchor_value: 0.0,
            profile: MonotoneProfile::UnimodalPeakAt(1.0),
            scale: 1.0,
            param: 1.0,
            shift: 0.0,
            order: 2,
        };
        let values = [-3.0, -1.0, 0.0, 1.0, 3.0];
        assert!(matches!(snap_cut_to_data(&desc, 0.1, CutDirection::Le, &values, 3), Err(Error::InconsistentProfile { column: 3 })));
    }

    #[test]
    fn surrogate_centers_by_hand() {
        let f = array![[1.0, 2.0], [3.0, 4.0], [10.0, 0.0], [20.0, 2.0]];
        let c = surrogate_centers(&f, &[0, 0, 1, 1]).unwrap();
        assert_eq!(c, array![[2.0, 3.0], [15.0, 1.0]]);
        let single = surrogate_centers(&f, &[0, 0, 0, 0]).unwrap();
        assert_eq!(single, array![[8.5, 2.0]]);
        assert_eq!(surrogate_centers(&f, &[0, 1, 2, 3]).unwrap(), f);
        assert!(matches!(surrogate_centers(&f, &[0, 0, 2, 2]), Err(Error::EmptyCluster(1))));
    }

    #[test]
    fn interval_cut_rules() {
        let cut = IntervalCut::threshold(0, 5.5);
        assert!(cut.goes_left(5.5));
        assert!(!cut.goes_left(5.6));
        assert!(IntervalCut::new(0, 2.0, 1.0, true).is_err());
        assert!(IntervalCut::new(0, f64::NEG_INFINITY, f64::INFINITY, true).is_err());
        let all_left = IntervalCut::everything(0, 3.0, true);
        assert!(all_left.goes_left(3.0) && all_left.goes_left(-100.0));
        let all_right = IntervalCut::everything(0, -2.0, false);
        assert!(!all_right.goes_left(-2.0));
    }

    fn random_data(seed: u64, n: usize, d: usize, lo: f64, hi: f64) -> Dataset {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(lo..hi)).collect()).collect();
        ds(&rows)
    }

    proptest! {
        #[test]
        fn hik_gram_is_exact(seed in 0u64..1000, beta in 0.3f64..2.0) {
            let data = random_data(seed, 12, 3, 0.0, 5.0);
            let spec = KernelSpec::histogram_intersection(beta);
            let fm = additive_features(&data, &spec, 0).unwrap();
            let g = gram_matrix(&spec, &data).unwrap();
            let diff = (&fm.gram() - g.values()).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
            prop_assert!(diff < 1e-12);
        }

        #[test]
        fn hellinger_gram_is_exact(seed in 0u64..1000) {
            let data = random_data(seed, 8, 3, 0.0, 5.0);
            let spec = KernelSpec::hellinger();
            let fm = additive_features(&data, &spec, 0).unwrap();
            for a in 0..8 {
                for b in 0..8 {
                    let k = eval_kernel(&spec, data.point(a), data.point(b)).unwrap();
                    prop_assert!((fm.gram()[[a, b]] - k).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn columns_follow_declared_profiles(seed in 0u64..1000, gamma in 0.1f64..10.0) {
            let data = random_data(seed, 15, 2, 0.01, 1.0);
            let maps = [
                taylor_features(&data, &KernelSpec::gaussian(gamma), 6).unwrap(),
                distance_features(&data, &KernelSpec::gaussian(gamma)).unwrap(),
                distance_features(&data, &KernelSpec::laplace(gamma)).unwrap(),
                additive_features(&data, &KernelSpec::additive_chi2(), 5).unwrap(),
                additive_features(&data, &KernelSpec::histogram_intersection(1.0), 0).unwrap(),
            ];
            for fm in &maps {
                for c in 0..fm.columns() {
                    prop_assert!(fm.check_profile(&data, c).is_ok());
                }
            }
        }

        #[test]
        fn columns_depend_on_one_coordinate(seed in 0u64..1000) {
            let data = random_data(seed, 10, 3, 0.0, 1.0);
            let spec = KernelSpec::gaussian(2.0);
            let fm = taylor_features(&data, &spec, 3).unwrap();
            let mut shuffled = data.points().clone();
            // reverse coordinate 2 across points; columns of dims 0, 1 stay put
            let col: Vec<f64> = shuffled.column(2).iter().rev().copied().collect();
            for (r, v) in col.into_iter().enumerate() {
                shuffled[[r, 2]] = v;
            }
            let other = taylor_features(&Dataset::new("s", shuffled, None).unwrap(), &spec, 3).unwrap();
            for (c, desc) in fm.descriptors.iter().enumerate() {
                if desc.input_dim != 2 {
                    prop_assert_eq!(fm.values.column(c), other.values.column(c));
                }
            }
        }

        #[test]
        fn snapped_cut_reproduces_split(seed in 0u64..1000, q in 0.0f64..1.0) {
            let data = random_data(seed, 20, 2, -1.0, 1.0);
            let fm = taylor_features(&data, &KernelSpec::gaussian(3.0), 5).unwrap();
            for (c, desc) in fm.descriptors.iter().enumerate() {
                let col = fm.values.column(c);
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let theta = lo + q * (hi - lo);
                let values = data.unique_coordinate_values(desc.input_dim);
                let cut = snap_cut_to_data(desc, theta, CutDirection::Le, &values, c).unwrap();
                for r in 0..data.n() {
                    prop_assert_eq!(cut.goes_left(data.points()[[r, desc.input_dim]]), col[r] <= theta);
                }
            }
        }
    }
}
