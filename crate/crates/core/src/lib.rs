//! Articulation reconstruction from 3D point trajectories.
//!
//! Pipeline: per-track motion analysis (static / prismatic / revolute /
//! noise), K-means motion clustering with iterative outlier filtering,
//! initialization of an articulation-based deformation field (hybrid
//! center-grid part assignment, per-joint dual quaternions blended per
//! point), tracking-loss optimization with hand-checked reverse-mode
//! gradients, and ground-truth evaluation against a built-in synthetic
//! articulated-scene generator.

pub mod autodiff;
pub mod cluster;
pub mod error;
pub mod eval;
pub mod field;
pub mod geom;
pub mod motion;
pub mod pipeline;
pub mod tracks;
pub mod train;

pub use error::{ArtError, Result};
