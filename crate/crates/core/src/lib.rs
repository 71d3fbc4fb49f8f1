//! Sequential keypoint density estimation for skeleton-based video anomaly
//! detection.
//!
//! Pose tracks are cut into fixed-length windows, a causally masked network
//! predicts a Gaussian for every keypoint given everything before it, and the
//! negative log-density of each frame's keypoints becomes its anomaly score.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common choices.

pub mod data;
pub mod density;
pub mod error;
pub mod metrics;
pub mod net;
pub mod scalar;
pub mod score;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision network.
pub type Net = net::CausalNet<f64>;
/// Single-precision network.
pub type NetF32 = net::CausalNet<f32>;
pub type Window = data::Window<f64>;
pub type WindowF32 = data::Window<f32>;
pub type Gaussian = density::GaussianParams<f64>;
