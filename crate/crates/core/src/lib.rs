//! Occlusion-aware compositing of CG layers into moving equirectangular
//! video.
//!
//! The pipeline estimates dense TV-L1 optical flow between consecutive
//! panoramas, triangulates per-pixel depth against the direction of motion,
//! fuses depth over time, turns the depth comparison with the CG layer into a
//! foreground probability, and blends the CG layer with per-window
//! visibility targets derived from semantic classes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compositor;
pub mod depth;
pub mod error;
pub mod flow;
pub mod image;
pub mod io;
pub mod par;
pub mod pipeline;
pub mod semantics;
pub mod sphere;
pub mod synth;

pub use error::{Error, Result};
