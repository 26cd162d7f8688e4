//! Penalized least squares on a one-dimensional design, the trade-off
//! `τ(f) = (‖f − f⁰‖_n² + λ² I²(f))^{1/2}` and its Gaussian landscape.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision. Experiments always run in `f64`.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod landscape;
pub mod linalg;
pub mod penalty;
pub mod scalar;
pub mod univariate;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type DesignGrid64 = penalty::DesignGrid<f64>;
pub type DesignGrid32 = penalty::DesignGrid<f32>;
pub type Seminorm64 = penalty::Seminorm<f64>;
pub type Seminorm32 = penalty::Seminorm<f32>;
pub type Problem64 = estimator::Problem<f64>;
pub type Problem32 = estimator::Problem<f32>;
pub type FitResult64 = estimator::FitResult<f64>;
pub type FitResult32 = estimator::FitResult<f32>;
pub type NoiseDraw64 = landscape::NoiseDraw<f64>;
pub type NoiseDraw32 = landscape::NoiseDraw<f32>;
pub type LandscapeCurve64 = landscape::LandscapeCurve<f64>;
pub type LandscapeCurve32 = landscape::LandscapeCurve<f32>;
pub type MonteCarloSummary64 = landscape::MonteCarloSummary<f64>;
pub type MonteCarloSummary32 = landscape::MonteCarloSummary<f32>;
pub type EntropyParams64 = bounds::EntropyParams<f64>;
pub type EntropyParams32 = bounds::EntropyParams<f32>;
