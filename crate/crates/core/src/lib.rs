//! Monte Carlo laboratory for the measure and diameter of the Voronoi cell
//! of a conditioned point among `n` i.i.d. samples from a density on `R^d`.
//!
//! The crate is layered bottom-up:
//!
//! - [`special`] and [`geometry`]: log-gamma, regularized incomplete beta and
//!   gamma functions, exact ball/cap/lens volumes and a Monte Carlo estimator
//!   for the volume of a union of balls. Generic over [`Scalar`].
//! - [`rng`] and [`sampling`]: reproducible counter-based random streams,
//!   uniform sampling in balls and the shipped density models with their
//!   ball-measure oracles.
//! - [`wstat`]: samplers for the normalized union volumes `W` and `W_k`.
//! - [`moments`]: estimators, closed forms and bounds for `alpha(d) = E[2/W^2]`
//!   and the moments `E[Z^k] = E[k!/W_k^k]` of the limit law of `n mu(S_1)`.
//! - [`nn`] and [`cellsim`]: exact nearest-neighbor indices and the empirical
//!   cell-measure and cell-diameter experiments.
//!
//! Most estimators are `f64`; the geometric kernels also run in `f32`.

pub mod cellsim;
pub mod error;
pub mod geometry;
pub mod moments;
pub mod nn;
pub mod parallel;
pub mod rng;
pub mod sampling;
pub mod scalar;
pub mod special;
pub mod stats;
pub mod wstat;

pub use error::{Error, Result};
pub use rng::RandomStream;
pub use scalar::Scalar;

/// Double-precision point, the coordinate type used by every estimator.
pub type Point = geometry::Point<f64>;
/// Double-precision ball.
pub type Ball = geometry::Ball<f64>;
/// Double-precision Monte Carlo volume estimate.
pub type VolumeEstimate = geometry::VolumeEstimate<f64>;
/// Single-precision point.
pub type Point32 = geometry::Point<f32>;
/// Single-precision ball.
pub type Ball32 = geometry::Ball<f32>;
