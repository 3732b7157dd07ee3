//! Kernel k-means and axis-aligned threshold trees that approximate it.

pub mod bench;
pub mod datasets;
pub mod error;
pub mod eval;
pub mod features;
pub mod imm;
pub mod kernel_imm;
pub mod kernels;
pub mod kmeans;
pub mod refine;
pub mod tree;

pub use error::{Error, Result};
