//! Datasets: the in-memory point matrix, CSV ingestion, and the synthetic
//! and counterexample constructions.

mod csv_io;
mod synthetic;

pub use csv_io::{load_csv, read_labels, write_csv, write_labels, LabelColumn};
pub use synthetic::{
    chi2_mixture_probabilities, gen_chi2_mixture, gen_epsilon_counterexample, gen_exkmc_counterexample, gen_featuremap_witnesses,
    gen_halfmoons, gen_quadratic_counterexample, FeatureMapWitnesses, EPSILON_COUNTEREXAMPLE_RADIUS_SQ,
};

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// `n` points in `d` real dimensions with optional ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Array2<f64>,
    labels: Option<Vec<usize>>,
    name: String,
}

impl Dataset {
    pub fn new(name: impl Into<String>, points: Array2<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        if points.ncols() == 0 {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        if let Some(((row, col), v)) = points.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Csv { row, column: col, message: format!("non-finite value {v}") });
        }
        if let Some(l) = &labels {
            if l.len() != points.nrows() {
                return Err(Error::DimensionMismatch { expected: points.nrows(), got: l.len() });
            }
        }
        Ok(Self { points, labels, name: name.into() })
    }

    /// Builds a dataset from row vectors.
    pub fn from_rows(name: impl Into<String>, rows: &[Vec<f64>], labels: Option<Vec<usize>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let d = rows[0].len();
        let mut flat = Vec::with_capacity(n * d);
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: r.len() });
            }
            flat.extend_from_slice(r);
        }
        let points = Array2::from_shape_vec((n, d), flat).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Self::new(name, points, labels)
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn d(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Rescales every coordinate to zero minimum and unit range. Constant
    /// coordinates map to zero.
    pub fn normalized(&self) -> Self {
        let mut points = self.points.clone();
        for mut col in points.columns_mut() {
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let range = hi - lo;
            col.mapv_inplace(|v| if range > 0.0 { (v - lo) / range } else { 0.0 });
        }
        Self { points, labels: self.labels.clone(), name: self.name.clone() }
    }

    /// Sorted distinct values of coordinate `dim`.
    pub fn unique_coordinate_values(&self, dim: usize) -> Vec<f64> {
        let mut v: Vec<f64> = self.points.column(dim).to_vec();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_non_finite_and_bad_labels() {
        assert!(Dataset::new("x", array![[1.0, f64::NAN]], None).is_err());
        assert!(Dataset::new("x", array![[1.0], [2.0]], Some(vec![0])).is_err());
        assert!(Dataset::from_rows("x", &[], None).is_err());
    }

    #[test]
    fn normalization_maps_to_unit_range() {
        let ds = Dataset::new("x", array![[1.0, 5.0], [3.0, 5.0], [2.0, 5.0]], None).unwrap();
        let n = ds.normalized();
        assert_eq!(n.points(), &array![[0.0, 0.0], [1.0, 0.0], [0.5, 0.0]]);
    }
}
