//! Spotlight inversion: focusing a linear inverse problem on a subset of the
//! unknowns by projecting the clutter contribution of the remaining
//! ("nuisance") unknowns out of the data.
//!
//! Given a partitioned observation model `b = A1 x1 + A2 x2 + noise`, the
//! library builds orthonormal bases for the range of `A2` (exact, rank-`r`
//! truncated, or randomized) and reduces the problem to the orthogonal
//! complement of that range, where the `x2` term is annihilated or damped.
//! Companion modules provide the clutter-to-noise diagnostics used to pick
//! the truncation rank, Gaussian posterior and MAP estimators for comparing
//! the reduced model against full-model and marginalization baselines, and a
//! self-contained fan-beam tomography test bed that exercises the whole
//! pipeline on a region-of-interest reconstruction task.
//!
//! All numerical code is generic over the floating-point scalar through
//! [`Scalar`]; `f64` aliases for the main types live at the crate root.

pub mod bayes;
mod error;
pub mod io;
pub mod matrix;
pub mod model;
pub mod projector;
pub mod rng;
pub mod tomo;
pub mod truncation;

pub use error::{Error, Result};

/// Floating-point scalar usable in every numerical routine: `f32` or `f64`.
pub trait Scalar:
    nalgebra::RealField + Copy + num_traits::FromPrimitive + num_traits::ToPrimitive
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` constant into the working scalar type.
#[inline]
pub fn scalar<T: Scalar>(x: f64) -> T {
    nalgebra::convert(x)
}

/// Converts a dimension count into the working scalar type.
#[inline]
pub fn scalar_from_usize<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("usize representable as scalar")
}

pub type Matrix64 = matrix::Matrix<f64>;
pub type CsrMatrix64 = matrix::CsrMatrix<f64>;
pub type Model64 = model::PartitionedForwardModel<f64>;
pub type Prior64 = model::GaussianPriorSpec<f64>;
pub type Basis64 = projector::SpotlightBasis<f64>;
pub type ProjectedModel64 = projector::ProjectedModel<f64>;
pub type ClutterSvd64 = projector::ClutterSvd<f64>;
pub type TruncationAnalysis64 = truncation::TruncationAnalysis<f64>;
pub type Posterior64 = bayes::GaussianPosterior<f64>;
pub type Experiment64 = tomo::LocalTomoExperiment<f64>;

pub type Matrix32 = matrix::Matrix<f32>;
pub type Model32 = model::PartitionedForwardModel<f32>;
pub type Basis32 = projector::SpotlightBasis<f32>;
