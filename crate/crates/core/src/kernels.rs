//! Kernel families, pointwise and per-coordinate evaluation, Gram matrices.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Gaussian,
    Laplace,
    Linear,
    Quadratic,
    EpsilonNeighborhood,
    Hellinger,
    HistogramIntersection,
    AdditiveChi2,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Laplace => "laplace",
            KernelFamily::Linear => "linear",
            KernelFamily::Quadratic => "quadratic",
            KernelFamily::EpsilonNeighborhood => "epsilon_neighborhood",
            KernelFamily::Hellinger => "hellinger",
            KernelFamily::HistogramIntersection => "histogram_intersection",
            KernelFamily::AdditiveChi2 => "additive_chi2",
        }
    }

    /// Product of one-dimensional kernels `K = prod_i K_i`.
    pub fn is_product(self) -> bool {
        matches!(self, KernelFamily::Gaussian | KernelFamily::Laplace)
    }

    /// Sum of one-dimensional kernels `K = sum_i K_i`.
    pub fn is_additive(self) -> bool {
        matches!(self, KernelFamily::Hellinger | KernelFamily::HistogramIntersection | KernelFamily::AdditiveChi2)
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "gaussian" | "rbf" => KernelFamily::Gaussian,
            "laplace" | "laplacian" => KernelFamily::Laplace,
            "linear" => KernelFamily::Linear,
            "quadratic" => KernelFamily::Quadratic,
            "epsilon" | "epsilon_neighborhood" => KernelFamily::EpsilonNeighborhood,
            "hellinger" => KernelFamily::Hellinger,
            "hik" | "histogram_intersection" => KernelFamily::HistogramIntersection,
            "chi2" | "additive_chi2" => KernelFamily::AdditiveChi2,
            other => return Err(Error::InvalidParameter(format!("unknown kernel {other:?}"))),
        })
    }
}

/// A kernel family together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// Bandwidth for gaussian and laplace.
    pub gamma: f64,
    /// Radius for the epsilon-neighborhood kernel.
    pub epsilon: f64,
    /// Exponent for generalized histogram intersection.
    pub beta: f64,
}

impl KernelSpec {
    fn with(family: KernelFamily) -> Self {
        Self { family, gamma: 1.0, epsilon: 1.0, beta: 1.0 }
    }

    pub fn gaussian(gamma: f64) -> Self {
        Self { gamma, ..Self::with(KernelFamily::Gaussian) }
    }

    pub fn laplace(gamma: f64) -> Self {
        Self { gamma, ..Self::with(KernelFamily::Laplace) }
    }

    pub fn linear() -> Self {
        Self::with(KernelFamily::Linear)
    }

    pub fn quadratic() -> Self {
        Self::with(KernelFamily::Quadratic)
    }

    pub fn epsilon_neighborhood(epsilon: f64) -> Self {
        Self { epsilon, ..Self::with(KernelFamily::EpsilonNeighborhood) }
    }

    pub fn hellinger() -> Self {
        Self::with(KernelFamily::Hellinger)
    }

    pub fn histogram_intersection(beta: f64) -> Self {
        Self { beta, ..Self::with(KernelFamily::HistogramIntersection) }
    }

    pub fn additive_chi2() -> Self {
        Self::with(KernelFamily::AdditiveChi2)
    }

    /// Builds a spec for `family`, taking whichever parameter it uses.
    pub fn from_family(family: KernelFamily, gamma: f64, epsilon: f64, beta: f64) -> Self {
        Self { family, gamma, epsilon, beta }
    }

    /// Only the epsilon-neighborhood kernel is not positive semi-definite.
    pub fn psd(&self) -> bool {
        self.family != KernelFamily::EpsilonNeighborhood
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, v: f64| {
            Err(Error::InvalidParameter(format!("{name} must be positive and finite for the {} kernel, got {v}", self.family)))
        };
        match self.family {
            KernelFamily::Gaussian | KernelFamily::Laplace if !(self.gamma > 0.0 && self.gamma.is_finite()) => bad("gamma", self.gamma),
            KernelFamily::EpsilonNeighborhood if !(self.epsilon > 0.0 && self.epsilon.is_finite()) => bad("epsilon", self.epsilon),
            KernelFamily::HistogramIntersection if !(self.beta > 0.0 && self.beta.is_finite()) => bad("beta", self.beta),
            _ => Ok(()),
        }
    }

    /// Checks that a coordinate value lies in the domain of the family.
    pub fn check_coordinate(&self, coordinate: usize, value: f64) -> Result<()> {
        let ok = match self.family {
            KernelFamily::Hellinger | KernelFamily::HistogramIntersection => value >= 0.0,
            KernelFamily::AdditiveChi2 => value > 0.0,
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain { kernel: self.family.name(), coordinate, value, point: None })
        }
    }

    /// Checks every coordinate of every point; errors name the point index.
    pub fn check_dataset(&self, data: &Dataset) -> Result<()> {
        self.validate()?;
        for (i, row) in data.points().rows().into_iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                self.check_coordinate(c, v).map_err(|e| with_point(e, i))?;
            }
        }
        Ok(())
    }

    /// Diagonal value `K(x, x)`.
    pub fn diagonal(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        eval_kernel(self, x, x)
    }

    /// The univariate profile `h(t)` of a distance-based product kernel.
    pub fn distance_profile(&self, t: f64) -> Result<f64> {
        match self.family {
            KernelFamily::Gaussian => Ok((-self.gamma * t * t).exp()),
            KernelFamily::Laplace => Ok((-self.gamma * t.abs()).exp()),
            other => Err(Error::NotDecomposable(other.name())),
        }
    }

    /// Inverse of the distance profile on `(0, 1]`: the distance `t >= 0`
    /// with `h(t) = theta`.
    pub fn inverse_distance_profile(&self, theta: f64) -> Result<f64> {
        if !(theta > 0.0) {
            return Ok(f64::INFINITY);
        }
        if theta >= 1.0 {
            return Ok(0.0);
        }
        match self.family {
            KernelFamily::Gaussian => Ok(((1.0 / theta).ln() / self.gamma).sqrt()),
            KernelFamily::Laplace => Ok((1.0 / theta).ln() / self.gamma),
            other => Err(Error::NotDecomposable(other.name())),
        }
    }
}

fn with_point(e: Error, point: usize) -> Error {
    match e {
        Error::Domain { kernel, coordinate, value, .. } => Error::Domain { kernel, coordinate, value, point: Some(point) },
        other => other,
    }
}

/// Evaluates `K(x, y)`.
pub fn eval_kernel(spec: &KernelSpec, x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    let pairs = x.iter().zip(y.iter());
    Ok(match spec.family {
        KernelFamily::Gaussian => {
            let d2: f64 = pairs.map(|(a, b)| (a - b) * (a - b)).sum();
            (-spec.gamma * d2).exp()
        }
        KernelFamily::Laplace => {
            let d1: f64 = pairs.map(|(a, b)| (a - b).abs()).sum();
            (-spec.gamma * d1).exp()
        }
        KernelFamily::Linear => pairs.map(|(a, b)| a * b).sum(),
        KernelFamily::Quadratic => {
            let dot: f64 = pairs.map(|(a, b)| a * b).sum();
            dot * dot
        }
        KernelFamily::EpsilonNeighborhood => {
            let d2: f64 = pairs.map(|(a, b)| (a - b) * (a - b)).sum();
            if d2.sqrt() <= spec.epsilon {
                1.0
            } else {
                0.0
            }
        }
        KernelFamily::Hellinger | KernelFamily::HistogramIntersection | KernelFamily::AdditiveChi2 => {
            let mut s = 0.0;
            for (i, (&a, &b)) in pairs.enumerate() {
                spec.check_coordinate(i, a)?;
                spec.check_coordinate(i, b)?;
                s += additive_component(spec, a, b);
            }
            s
        }
    })
}

fn additive_component(spec: &KernelSpec, a: f64, b: f64) -> f64 {
    match spec.family {
        KernelFamily::Hellinger => (a * b).sqrt(),
        KernelFamily::HistogramIntersection => a.powf(spec.beta).min(b.powf(spec.beta)),
        KernelFamily::AdditiveChi2 => 2.0 * a * b / (a + b),
        _ => unreachable!("not an additive family"),
    }
}

/// Evaluates the one-dimensional component kernel `K_i(a, b)` for
/// coordinate `i`. Products (gaussian, laplace) or sums (additive families)
/// of these over all coordinates reproduce [`eval_kernel`].
pub fn eval_component_kernel(spec: &KernelSpec, i: usize, a: f64, b: f64) -> Result<f64> {
    match spec.family {
        KernelFamily::Gaussian | KernelFamily::Laplace => spec.distance_profile(a - b),
        KernelFamily::Hellinger | KernelFamily::HistogramIntersection | KernelFamily::AdditiveChi2 => {
            spec.check_coordinate(i, a)?;
            spec.check_coordinate(i, b)?;
            Ok(additive_component(spec, a, b))
        }
        other => Err(Error::NotDecomposable(other.name())),
    }
}

/// Dense symmetric kernel matrix over a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    values: Array2<f64>,
    spec: KernelSpec,
}

impl GramMatrix {
    /// Wraps a precomputed matrix. The matrix must be square and symmetric.
    pub fn from_values(values: Array2<f64>, spec: KernelSpec) -> Result<Self> {
        let n = values.nrows();
        if values.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: values.ncols() });
        }
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        for i in 0..n {
            for j in 0..i {
                if values[[i, j]] != values[[j, i]] {
                    return Err(Error::InvalidParameter(format!("Gram matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { values, spec })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn point_count(&self) -> usize {
        self.values.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }
}

/// Computes the Gram matrix; the upper triangle is evaluated once and
/// mirrored. Rows are computed in parallel.
pub fn gram_matrix(spec: &KernelSpec, data: &Dataset) -> Result<GramMatrix> {
    spec.check_dataset(data)?;
    let n = data.n();
    let pts = data.points();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| eval_kernel(spec, pts.row(i), pts.row(j)).map_err(|e| with_point(e, i))).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;
    let mut values = Array2::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + off;
            values[[i, j]] = v;
            values[[j, i]] = v;
        }
    }
    Ok(GramMatrix { values, spec: *spec })
}

/// Gram matrix of the one-dimensional component kernel on coordinate `dim`.
pub fn component_gram_matrix(spec: &KernelSpec, data: &Dataset, dim: usize) -> Result<GramMatrix> {
    let n = data.n();
    let col = data.points().column(dim);
    let mut values = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = eval_component_kernel(spec, dim, col[i], col[j]).map_err(|e| with_point(e, i))?;
            values[[i, j]] = v;
            values[[j, i]] = v;
        }
    }
    Ok(GramMatrix { values, spec: *spec })
}
