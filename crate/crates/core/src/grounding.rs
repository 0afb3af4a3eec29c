//! Sequenced grounding encoding.
//!
//! The descriptions selected for a region become one key/value sequence:
//!
//! ```text
//! [bos] tok(o1)... [sep] tok(o2)... [sep] ... [eos]
//! ```
//!
//! Every row is the text embedding concatenated channel-wise with a box
//! indicator. Text tokens carry the sinusoidal encoding of their object's box;
//! `[bos]`, `[sep]`, `[eos]` and the null token carry all `-1`. A region with
//! no descriptions is encoded as the single null token.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::layout::{BoundingBox, DescriptionTuple};
use crate::rng::{derive_seed, fnv1a, normal_vec, normalize, seeded};
use crate::{Error, Matrix, Result};

pub const DEFAULT_TEXT_DIM: usize = 64;
pub const DEFAULT_BOX_DIM: usize = 32;

pub const BOS: &str = "[bos]";
pub const EOS: &str = "[eos]";
pub const SEP: &str = "[sep]";

/// Lowercases and splits on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Maps token strings to fixed unit vectors.
pub trait TextEmbedder: Send + Sync {
    fn dim(&self) -> usize;

    fn embed(&self, token: &str) -> Vec<f64>;

    fn bos(&self) -> Vec<f64> {
        self.embed(BOS)
    }

    fn eos(&self) -> Vec<f64> {
        self.embed(EOS)
    }

    fn sep(&self) -> Vec<f64> {
        self.embed(SEP)
    }
}

/// Seeded hash embedder: each token string seeds its own normal draw, which
/// is normalized to unit length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    dim: usize,
    seed: u64,
}

impl HashEmbedder {
    pub const MIN_DIM: usize = 8;

    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim < Self::MIN_DIM {
            return Err(Error::InvalidArgument(format!(
                "text embedding dimension {dim} below {}",
                Self::MIN_DIM
            )));
        }
        Ok(Self { dim, seed })
    }
}

impl TextEmbedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, token: &str) -> Vec<f64> {
        let mut rng = seeded(fnv1a(token.as_bytes()) ^ self.seed.wrapping_mul(0x2545_f491_4f6c_dd1d));
        let mut v = normal_vec(&mut rng, self.dim, 1.0);
        normalize(&mut v);
        v
    }
}

/// Embedder backed by a token -> vector table, falling back to a hash
/// embedder of the same dimension for tokens missing from the table.
#[derive(Debug, Clone)]
pub struct TableEmbedder {
    table: HashMap<String, Vec<f64>>,
    fallback: HashEmbedder,
}

impl TableEmbedder {
    /// Vectors are normalized on load. The table must contain `[bos]`,
    /// `[eos]` and `[sep]`.
    pub fn new(table: HashMap<String, Vec<f64>>, fallback_seed: u64) -> Result<Self> {
        let dim = table
            .values()
            .next()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidArgument("empty embedding table".into()))?;
        let fallback = HashEmbedder::new(dim, fallback_seed)?;
        let mut normalized = HashMap::with_capacity(table.len());
        for (k, mut v) in table {
            if v.len() != dim {
                return Err(Error::Shape(format!(
                    "embedding for {k:?} has {} channels, expected {dim}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("embedding table"));
            }
            normalize(&mut v);
            normalized.insert(k, v);
        }
        for special in [BOS, EOS, SEP] {
            if !normalized.contains_key(special) {
                return Err(Error::InvalidArgument(format!(
                    "embedding table lacks {special}"
                )));
            }
        }
        Ok(Self {
            table: normalized,
            fallback,
        })
    }
}

impl TextEmbedder for TableEmbedder {
    fn dim(&self) -> usize {
        self.fallback.dim()
    }

    fn embed(&self, token: &str) -> Vec<f64> {
        match self.table.get(token) {
            Some(v) => v.clone(),
            None => self.fallback.embed(token),
        }
    }
}

/// Substitute description for regions covered by no object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullEmbedding(Vec<f64>);

impl NullEmbedding {
    pub fn seeded(dim: usize, seed: u64) -> Self {
        let mut rng = seeded(derive_seed(seed, "null-embedding"));
        Self(normal_vec(&mut rng, dim, 1.0 / (dim.max(1) as f64).sqrt()))
    }

    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("null embedding"));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Sinusoidal encoding of `(x1, y1, x2, y2)`: `box_dim / 4` channels per
/// coordinate, alternating `sin(c / 10000^(2k/n))` and `cos(...)`.
pub fn sinusoidal_box_encoding(bbox: &BoundingBox, box_dim: usize) -> Result<Vec<f64>> {
    if !box_dim.is_multiple_of(8) {
        return Err(Error::BoxDim(box_dim));
    }
    let per_coord = box_dim / 4;
    let mut out = Vec::with_capacity(box_dim);
    for c in [bbox.x1, bbox.y1, bbox.x2, bbox.y2] {
        for k in 0..per_coord / 2 {
            let freq = libm::pow(10_000.0, (2 * k) as f64 / per_coord as f64);
            out.push(libm::sin(c / freq));
            out.push(libm::cos(c / freq));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Bos,
    Text,
    Sep,
    Eos,
    Null,
}

impl TokenKind {
    pub fn is_special(self) -> bool {
        matches!(self, TokenKind::Bos | TokenKind::Sep | TokenKind::Eos)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundedSequence {
    /// `T x (text_dim + box_dim)`.
    pub tokens: Matrix,
    pub kinds: Vec<TokenKind>,
    pub source_object: Vec<Option<usize>>,
    pub text_dim: usize,
    pub box_dim: usize,
}

impl GroundedSequence {
    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn text_channels(&self, row: usize) -> &[f64] {
        &self.tokens.row(row)[..self.text_dim]
    }

    pub fn box_channels(&self, row: usize) -> &[f64] {
        &self.tokens.row(row)[self.text_dim..]
    }
}

/// Length of the encoded sequence for descriptions with the given token counts.
pub fn sequence_length(token_counts: &[usize]) -> usize {
    match token_counts.len() {
        0 => 1,
        m => 1 + token_counts.iter().sum::<usize>() + (m - 1) + 1,
    }
}

/// Encodes the descriptions of one region. Descriptions are used in the
/// order given; callers pass them ascending by id.
pub fn encode_region(
    descriptions: &[&DescriptionTuple],
    embedder: &dyn TextEmbedder,
    null: &NullEmbedding,
    box_dim: usize,
    use_box_indicator: bool,
) -> Result<GroundedSequence> {
    let text_dim = embedder.dim();
    if null.dim() != text_dim {
        return Err(Error::Shape(format!(
            "null embedding has {} channels, embedder {text_dim}",
            null.dim()
        )));
    }
    let box_dim = if use_box_indicator { box_dim } else { 0 };
    if box_dim % 8 != 0 {
        return Err(Error::BoxDim(box_dim));
    }
    let blank_box = vec![-1.0; box_dim];
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut kinds = Vec::new();
    let mut sources = Vec::new();
    let mut push = |text: Vec<f64>, boxes: &[f64], kind: TokenKind, source: Option<usize>| {
        let mut row = text;
        row.extend_from_slice(boxes);
        rows.push(row);
        kinds.push(kind);
        sources.push(source);
    };

    if descriptions.is_empty() {
        push(null.as_slice().to_vec(), &blank_box, TokenKind::Null, None);
    } else {
        push(embedder.bos(), &blank_box, TokenKind::Bos, None);
        for (i, d) in descriptions.iter().enumerate() {
            if i > 0 {
                push(embedder.sep(), &blank_box, TokenKind::Sep, None);
            }
            let indicator = sinusoidal_box_encoding(&d.bbox, box_dim)?;
            for tok in tokenize(&d.text) {
                push(embedder.embed(&tok), &indicator, TokenKind::Text, Some(d.id));
            }
        }
        push(embedder.eos(), &blank_box, TokenKind::Eos, None);
    }

    Ok(GroundedSequence {
        tokens: Matrix::from_rows(&rows)?,
        kinds,
        source_object: sources,
        text_dim,
        box_dim,
    })
}
