//! Boundary-enhanced, query-based semantic segmentation on a from-scratch
//! reverse-mode autodiff core.
//!
//! The pipeline, end to end:
//!
//! 1. [`backbone`] extracts a feature pyramid from an RGB image and runs a
//!    single-head transformer encoder block over every scale.
//! 2. [`befbm`] fuses adjacent scales with a pooled sigmoid gate and
//!    supervises each encoded scale against a Sobel edge pyramid.
//! 3. [`decoder`] refines learned queries against the finest fused level
//!    and reads out one mask and one class distribution per query.
//! 4. [`losses`] combines classification, mask and edge terms.
//! 5. [`training`] optimizes the whole model and [`metrics`] scores it.
//!
//! Everything runs in `f64` on the CPU, and every differentiable path is
//! covered by central-difference gradient checks (see [`tensor::grad_check`]
//! and [`verify`]).

pub mod attention;
pub mod backbone;
pub mod befbm;
pub mod commands;
pub mod config;
pub mod data;
pub mod decoder;
pub mod error;
pub mod imaging;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod params;
pub mod rng;
pub mod tensor;
pub mod training;
pub mod verify;

pub use error::{Error, Result};
pub use model::{Model, ModelConfig};
pub use tensor::{Graph, Tensor, Var};
