//! Cross-domain imitation learning with unbalanced optimal transport
//! co-training.
//!
//! The numeric kernels (`geometry`, `ot`, `dtw`) are generic over
//! [`Scalar`]; the learning pipeline (`synth`, `sampler`, `model`,
//! `trainer`) runs in `f64`. The aliases below fix the kernels to `f64`.

pub mod dtw;
pub mod error;
pub mod geometry;
pub mod model;
pub mod ot;
pub mod sampler;
pub mod scalar;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix = geometry::Matrix<f64>;
pub type CostMatrix = geometry::CostMatrix<f64>;
pub type Marginals = ot::Marginals<f64>;
pub type SinkhornConfig = ot::SinkhornConfig<f64>;
pub type UotConfig = ot::UotConfig<f64>;
pub type TransportPlan = ot::TransportPlan<f64>;
pub type DtwResult = dtw::DtwResult<f64>;
