//! Planar grasp detection toolkit.
//!
//! The crate covers the full pipeline for two-jaw top-down grasping:
//!
//! - [`grasp`]: grasp representations, Gaussian quality-map encoding,
//!   angle encoding/decoding, map-to-grasp decoding and frame transforms.
//! - [`data`]: Cornell- and Jacquard-format dataset parsing, input
//!   assembly, label-consistent augmentation and train/test splits.
//! - [`nn`]: a small reverse-mode tape over `ndarray` tensors with the
//!   operations the detection network needs (convolution, pooling,
//!   normalization, attention gates, pixel shuffle).
//! - [`net`]: the generative detection network itself — downsampling stem,
//!   residual + receptive-field bottleneck, attention-fusion decoder and
//!   four prediction heads — plus checkpointing.
//! - [`train`]: Smooth-L1 objective, Adam optimization loop, metric logs.
//! - [`eval`]: rectangle-metric scoring with exact oriented-rectangle
//!   Jaccard overlap and dataset-level accuracy reports.
//! - [`cli`]: the `graspkit` command-line entry points.

pub mod cli;
pub mod config;
pub mod data;
pub mod eval;
pub mod grasp;
pub mod net;
pub mod nn;
pub mod train;
pub mod viz;

pub use grasp::{
    Calibration, GaussianEncoderConfig, GraspMaps, GraspRectangle, PlanarGrasp, WorldGrasp,
};
pub use net::{Network, NetworkConfig};

