//! Spatial coherence loss for dense objectness prediction.
//!
//! Each pixel's single-response loss is divided by the mutual response of the
//! pixel and each of its ring neighbours plus a pairwise regulariser, then
//! averaged per ring and summed over adjacency levels with halving weights.
//! Alongside the forward loss this crate provides the analytic gradient (with
//! a finite-difference oracle), weight attention maps, a logit-field
//! simulator for hard-region learning dynamics, saliency metrics, and the
//! file formats used by the `scloss` command-line tool.

pub mod config;
pub mod error;
pub mod golden;
pub mod grad;
pub mod grid;
pub mod imageio;
pub mod kernels;
pub mod loss;
pub mod metrics;
pub mod rng;
pub mod sim;

pub use config::{LossConfig, Reduction, Regularizer, SingleResponse};
pub use error::{Error, Result};
pub use grad::{finite_diff_grad, grad_check, grad_wrt_logits, grad_wrt_probs, GradReport};
pub use grid::{clamp_probabilities, ring_neighbors, FieldMap, GridDims, LabelMap, PixelPos, ProbabilityMap};
pub use loss::{
    attention_map, combine_addon, image_loss, multiclass_image_loss, pixel_level_loss, pixel_loss,
    single_response_map, ClassProbabilities, LossBreakdown,
};
