//! Robust (ν, μ)-SVM toolkit.
//!
//! Training by a difference-of-convex algorithm, the dual reduced-hull
//! geometry, the breakdown-point parameter-region calculus, contamination
//! experiments and cross-validated model selection.

pub mod cli;
pub mod data;
pub mod float;
pub mod geometry;
pub mod kernel;
pub mod lab;
pub mod model_io;
pub mod objective;
pub mod qp;
pub mod region;
pub mod select;
pub mod trainer;

pub use float::{Float, RegionScalar};

/// Exact scalar for the parameter-region calculus.
pub type Rational = num_rational::Ratio<i64>;
pub type Dataset64 = data::Dataset<f64>;
pub type GramMatrix64 = kernel::GramMatrix<f64>;
pub type KernelSpec64 = kernel::KernelSpec<f64>;
pub type TrainConfig64 = trainer::TrainConfig<f64>;
pub type Model64 = trainer::Model<f64>;
pub type Dataset32 = data::Dataset<f32>;
pub type Model32 = trainer::Model<f32>;
