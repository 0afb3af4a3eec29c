//! Layout-conditioned regional cross-attention.
//!
//! The crate turns a layout (a set of bounding boxes with free-form
//! descriptions) into a partition of a visual token grid, encodes the
//! descriptions selected for each region as a grounded key/value sequence,
//! and runs cross-attention region by region. Around that core sit an
//! analytical FLOPs model, the crop-CLIP / SAM-IoU metric pipelines and the
//! file formats used by the `rgk` command line tool.

pub mod cost;
pub mod error;
pub mod grounding;
pub mod io;
pub mod layout;
pub mod matrix;
pub mod metrics;
pub mod region;
pub mod rng;
pub mod xattn;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use grounding::{
    encode_region, sinusoidal_box_encoding, tokenize, GroundedSequence, HashEmbedder,
    NullEmbedding, TextEmbedder, TokenKind,
};
pub use layout::{
    box_area_fraction, crop_layout, rasterize_box, validate_layout, BoundingBox,
    DescriptionTuple, Layout, TokenGrid, Violation,
};
pub use matrix::Matrix;
pub use region::{reorganize, select_descriptions, select_visual, CoveringSet, RegionPartition};
pub use xattn::{
    attention_kernel, naive_forward, regional_forward, AttentionOutput, AttentionState,
    FeatureMap, Mode, StateConfig,
};
