//! File formats. Everything on disk is little-endian binary or JSON with
//! sorted keys and floats rounded to 9 significant digits, so outputs are
//! byte-stable across platforms.

pub mod embeddings;
pub mod features;
pub mod generate;
pub mod json;
pub mod layout_file;
pub mod netpbm;
pub mod report;

pub use json::{format_sig9, round_sig9, to_canonical_string};
pub use layout_file::{load_layout, LayoutFile, ObjectEntry, Strictness};
