//! Simulator for progressive, FoV-adaptive streaming of tiled point cloud
//! video.
//!
//! Each tile's delivered level of detail grows logarithmically with its
//! bytes; a tile's quality is the log of the angular resolution it shows the
//! viewer. Every round the downloader predicts where the viewer will look
//! and splits the round's byte budget over all tiles of all buffered frames,
//! patching frames that were downloaded earlier as predictions sharpen.

// `!(x > 0.0)` is written on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocate;
mod error;
pub mod geometry;
pub mod model;
pub mod predict;
pub mod sim;
pub mod traces;

pub use error::{Error, Result};
pub use traces::Video;
