//! Regional cross-attention.
//!
//! Each region of the reorganized token grid cross-attends to the grounded
//! sequence of the objects covering it; the per-region outputs are scattered
//! back into one `N x C` map. The layer returns only its residual
//! contribution, callers add it to their features.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grounding::{
    encode_region, GroundedSequence, HashEmbedder, NullEmbedding, TextEmbedder,
    DEFAULT_BOX_DIM, DEFAULT_TEXT_DIM,
};
use crate::layout::{rasterize_box, DescriptionTuple, Layout, TokenGrid};
use crate::region::{reorganize, select_descriptions, select_visual};
use crate::rng::{derive_seed, normal_matrix, seeded};
use crate::{Error, Matrix, Result};

/// Visual tokens of one feature map, `N x C`, row-major over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    grid: TokenGrid,
    data: Matrix,
}

impl FeatureMap {
    pub fn new(grid: TokenGrid, data: Matrix) -> Result<Self> {
        if data.rows() != grid.len() {
            return Err(Error::Shape(format!(
                "{} feature rows for a {}x{} grid",
                data.rows(),
                grid.height(),
                grid.width()
            )));
        }
        if data.cols() == 0 {
            return Err(Error::Shape("feature map has zero channels".into()));
        }
        if !data.is_finite() {
            return Err(Error::NonFinite("features"));
        }
        Ok(Self { grid, data })
    }

    /// Standard-normal features from `seed`.
    pub fn random(grid: TokenGrid, channels: usize, seed: u64) -> Result<Self> {
        let mut rng = seeded(derive_seed(seed, "features"));
        Self::new(grid, normal_matrix(&mut rng, grid.len(), channels, 1.0))
    }

    pub fn grid(&self) -> TokenGrid {
        self.grid
    }

    pub fn channels(&self) -> usize {
        self.data.cols()
    }

    pub fn data(&self) -> &Matrix {
        &self.data
    }

    pub fn into_data(self) -> Matrix {
        self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateConfig {
    pub channels: usize,
    pub attn_dim: usize,
    pub heads: usize,
    pub text_dim: usize,
    pub box_dim: usize,
    pub seed: u64,
}

impl Default for StateConfig {
    fn default() -> Self {
        Self {
            channels: 64,
            attn_dim: 64,
            heads: 4,
            text_dim: DEFAULT_TEXT_DIM,
            box_dim: DEFAULT_BOX_DIM,
            seed: 0,
        }
    }
}

impl StateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.attn_dim == 0 || self.heads == 0 {
            return Err(Error::InvalidArgument(
                "channels, attention dim and heads must be positive".into(),
            ));
        }
        if !self.attn_dim.is_multiple_of(self.heads) {
            return Err(Error::InvalidArgument(format!(
                "attention dim {} not divisible by {} heads",
                self.attn_dim, self.heads
            )));
        }
        if !self.box_dim.is_multiple_of(8) {
            return Err(Error::BoxDim(self.box_dim));
        }
        Ok(())
    }
}

/// Weights of one regional cross-attention layer.
///
/// `w_k` and `w_v` take the concatenated text and box channels. With the
/// box indicator disabled only their first `text_dim` rows are used.
#[derive(Clone)]
pub struct AttentionState {
    config: StateConfig,
    w_q: Matrix,
    w_k: Matrix,
    w_v: Matrix,
    w_out: Matrix,
    null: NullEmbedding,
    embedder: Arc<dyn TextEmbedder>,
}

impl fmt::Debug for AttentionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AttentionState")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl AttentionState {
    /// Fresh layer with the seeded hash embedder and a zero output projection.
    pub fn new(config: StateConfig) -> Result<Self> {
        let embedder = HashEmbedder::new(config.text_dim, config.seed)?;
        Self::with_embedder(config, Arc::new(embedder))
    }

    pub fn with_embedder(config: StateConfig, embedder: Arc<dyn TextEmbedder>) -> Result<Self> {
        config.validate()?;
        if embedder.dim() != config.text_dim {
            return Err(Error::Shape(format!(
                "embedder dimension {} differs from text_dim {}",
                embedder.dim(),
                config.text_dim
            )));
        }
        let StateConfig {
            channels: c,
            attn_dim: d,
            text_dim,
            box_dim,
            seed,
            ..
        } = config;
        let kv_in = text_dim + box_dim;
        let init = |label: &str, rows: usize, cols: usize| {
            normal_matrix(&mut seeded(derive_seed(seed, label)), rows, cols, 1.0 / (rows as f64).sqrt())
        };
        Ok(Self {
            config,
            w_q: init("w_q", c, d),
            w_k: init("w_k", kv_in, d),
            w_v: init("w_v", kv_in, d),
            w_out: Matrix::zeros(d, c),
            null: NullEmbedding::seeded(text_dim, seed),
            embedder,
        })
    }

    /// Replaces the zero output projection with seeded random weights, as a
    /// trained layer would have.
    pub fn randomize_output(&mut self, seed: u64) {
        let (d, c) = self.w_out.shape();
        self.w_out = normal_matrix(
            &mut seeded(derive_seed(seed, "w_out")),
            d,
            c,
            1.0 / (d as f64).sqrt(),
        );
    }

    pub fn set_output_weights(&mut self, w_out: Matrix) -> Result<()> {
        if w_out.shape() != self.w_out.shape() {
            return Err(Error::Shape(format!(
                "output weights {:?}, expected {:?}",
                w_out.shape(),
                self.w_out.shape()
            )));
        }
        self.w_out = w_out;
        Ok(())
    }

    pub fn config(&self) -> &StateConfig {
        &self.config
    }

    pub fn embedder(&self) -> &dyn TextEmbedder {
        self.embedder.as_ref()
    }

    pub fn null(&self) -> &NullEmbedding {
        &self.null
    }

    pub fn w_q(&self) -> &Matrix {
        &self.w_q
    }

    pub fn w_k(&self) -> &Matrix {
        &self.w_k
    }

    pub fn w_v(&self) -> &Matrix {
        &self.w_v
    }

    pub fn w_out(&self) -> &Matrix {
        &self.w_out
    }

    fn encode(&self, descriptions: &[&DescriptionTuple], indicator: bool) -> Result<GroundedSequence> {
        encode_region(
            descriptions,
            self.embedder.as_ref(),
            &self.null,
            self.config.box_dim,
            indicator,
        )
    }

    /// Key and value projections of a grounded sequence.
    fn project_kv(&self, seq: &GroundedSequence) -> Result<(Matrix, Matrix)> {
        let used = seq.tokens.cols();
        if used == self.w_k.rows() {
            Ok((seq.tokens.matmul(&self.w_k)?, seq.tokens.matmul(&self.w_v)?))
        } else {
            Ok((
                seq.tokens.matmul(&self.w_k.top_rows(used))?,
                seq.tokens.matmul(&self.w_v.top_rows(used))?,
            ))
        }
    }

    fn check_features(&self, features: &FeatureMap) -> Result<()> {
        if features.channels() != self.config.channels {
            return Err(Error::Shape(format!(
                "features have {} channels, state expects {}",
                features.channels(),
                self.config.channels
            )));
        }
        if !features.data().is_finite() {
            return Err(Error::NonFinite("features"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Region reorganization with box indicators.
    #[default]
    Full,
    /// One attention call per object; tokens under several boxes average
    /// their per-object outputs.
    NoReorgAvg,
    /// Region reorganization without box indicator channels.
    NoBoxIndicator,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::NoReorgAvg => "no_reorg_avg",
            Mode::NoBoxIndicator => "no_box_indicator",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Mode::Full),
            "no_reorg_avg" => Ok(Mode::NoReorgAvg),
            "no_box_indicator" => Ok(Mode::NoBoxIndicator),
            other => Err(Error::InvalidArgument(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionDiagnostic {
    /// Object ids attended by the region (empty for background / null).
    pub objects: Vec<usize>,
    pub tokens: usize,
    pub sequence_length: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    /// `N x C` residual contribution.
    pub output: Matrix,
    pub regions: Vec<RegionDiagnostic>,
    /// How many times each output row was finalized; all ones when complete.
    pub row_writes: Vec<u32>,
}

/// Multi-head scaled dot-product attention of `q` (n x d) over `k`, `v` (m x d).
pub fn attention_kernel(q: &Matrix, k: &Matrix, v: &Matrix, heads: usize) -> Result<Matrix> {
    let d = q.cols();
    if k.rows() == 0 {
        return Err(Error::NoKeys);
    }
    if heads == 0 || !d.is_multiple_of(heads) {
        return Err(Error::InvalidArgument(format!(
            "dimension {d} not divisible by {heads} heads"
        )));
    }
    if k.cols() != d || v.cols() != d || v.rows() != k.rows() {
        return Err(Error::Shape(format!(
            "q {:?}, k {:?}, v {:?}",
            q.shape(),
            k.shape(),
            v.shape()
        )));
    }
    let m = k.rows();
    let hd = d / heads;
    let scale = 1.0 / libm::sqrt(hd as f64);
    let mut out = Matrix::zeros(q.rows(), d);
    let mut weights = vec![0.0; m];
    for i in 0..q.rows() {
        let qi = q.row(i);
        for h in 0..heads {
            let span = h * hd..(h + 1) * hd;
            let qh = &qi[span.clone()];
            let mut max = f64::NEG_INFINITY;
            for (j, w) in weights.iter_mut().enumerate() {
                let kh = &k.row(j)[span.clone()];
                *w = qh.iter().zip(kh).map(|(a, b)| a * b).sum::<f64>() * scale;
                max = max.max(*w);
            }
            let mut total = 0.0;
            for w in weights.iter_mut() {
                *w = libm::exp(*w - max);
                total += *w;
            }
            let oh = &mut out.row_mut(i)[span.clone()];
            for (j, w) in weights.iter().enumerate() {
                let p = w / total;
                for (o, val) in oh.iter_mut().zip(&v.row(j)[span.clone()]) {
                    *o += p * val;
                }
            }
        }
    }
    Ok(out)
}

/// Output rows for `tokens` attending to `seq`.
fn attend_tokens(
    features: &FeatureMap,
    state: &AttentionState,
    tokens: &[usize],
    seq: &GroundedSequence,
) -> Result<Matrix> {
    let q = features.data().gather_rows(tokens).matmul(&state.w_q)?;
    let (k, v) = state.project_kv(seq)?;
    attention_kernel(&q, &k, &v, state.config.heads)?.matmul(&state.w_out)
}

pub fn regional_forward(
    features: &FeatureMap,
    layout: &Layout,
    state: &AttentionState,
    mode: Mode,
) -> Result<AttentionOutput> {
    state.check_features(features)?;
    match mode {
        Mode::Full => reorganized_forward(features, layout, state, true),
        Mode::NoBoxIndicator => reorganized_forward(features, layout, state, false),
        Mode::NoReorgAvg => averaged_forward(features, layout, state),
    }
}

fn reorganized_forward(
    features: &FeatureMap,
    layout: &Layout,
    state: &AttentionState,
    indicator: bool,
) -> Result<AttentionOutput> {
    let grid = features.grid();
    let partition = reorganize(layout, &grid);
    let per_region: Vec<(Matrix, RegionDiagnostic)> = (0..partition.len())
        .into_par_iter()
        .map(|ri| {
            let tokens = select_visual(&partition, ri)?;
            let descriptions = select_descriptions(layout, &partition, ri)?;
            let seq = state.encode(&descriptions, indicator)?;
            let rows = attend_tokens(features, state, tokens, &seq)?;
            let diag = RegionDiagnostic {
                objects: descriptions.iter().map(|d| d.id).collect(),
                tokens: tokens.len(),
                sequence_length: seq.len(),
            };
            Ok((rows, diag))
        })
        .collect::<Result<_>>()?;

    let mut output = Matrix::zeros(grid.len(), state.config.channels);
    let mut row_writes = vec![0u32; grid.len()];
    let mut regions = Vec::with_capacity(per_region.len());
    for ((rows, diag), region) in per_region.into_iter().zip(&partition.regions) {
        for (local, &t) in region.tokens.iter().enumerate() {
            output.row_mut(t).copy_from_slice(rows.row(local));
            row_writes[t] += 1;
        }
        regions.push(diag);
    }
    Ok(AttentionOutput {
        output,
        regions,
        row_writes,
    })
}

fn averaged_forward(
    features: &FeatureMap,
    layout: &Layout,
    state: &AttentionState,
) -> Result<AttentionOutput> {
    let grid = features.grid();
    let mut objects: Vec<&DescriptionTuple> = layout.objects.iter().collect();
    objects.sort_by_key(|o| o.id);
    let per_object: Vec<Option<(Vec<usize>, Matrix, usize)>> = objects
        .par_iter()
        .map(|obj| {
            let mask = rasterize_box(&obj.bbox, &grid);
            if mask.is_empty() {
                return Ok(None);
            }
            let seq = state.encode(&[obj], true)?;
            let rows = attend_tokens(features, state, &mask, &seq)?;
            Ok(Some((mask, rows, seq.len())))
        })
        .collect::<Result<_>>()?;

    let channels = state.config.channels;
    let mut sum = Matrix::zeros(grid.len(), channels);
    let mut counts = vec![0u32; grid.len()];
    let mut regions = Vec::new();
    for (obj, entry) in objects.iter().zip(per_object) {
        let Some((mask, rows, seq_len)) = entry else {
            continue;
        };
        for (local, &t) in mask.iter().enumerate() {
            for (s, r) in sum.row_mut(t).iter_mut().zip(rows.row(local)) {
                *s += r;
            }
            counts[t] += 1;
        }
        regions.push(RegionDiagnostic {
            objects: vec![obj.id],
            tokens: mask.len(),
            sequence_length: seq_len,
        });
    }

    let uncovered: Vec<usize> = (0..grid.len()).filter(|&t| counts[t] == 0).collect();
    let mut output = sum;
    for (t, &k) in counts.iter().enumerate() {
        if k > 1 {
            let kf = f64::from(k);
            output.row_mut(t).iter_mut().for_each(|v| *v /= kf);
        }
    }
    if !uncovered.is_empty() {
        let seq = state.encode(&[], true)?;
        let rows = attend_tokens(features, state, &uncovered, &seq)?;
        for (local, &t) in uncovered.iter().enumerate() {
            output.row_mut(t).copy_from_slice(rows.row(local));
        }
        regions.push(RegionDiagnostic {
            objects: Vec::new(),
            tokens: uncovered.len(),
            sequence_length: seq.len(),
        });
    }
    Ok(AttentionOutput {
        output,
        regions,
        row_writes: vec![1; grid.len()],
    })
}

/// Key and value rows of one grounded sequence.
type ProjectedKv = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Per-token reference for the full mode: every token finds its own
/// covering objects from its center, builds their grounded sequence and runs
/// single-query attention with scalar loops. Key/value projections are
/// memoized per object set only to keep the reference tractable.
#[allow(clippy::needless_range_loop)]
pub fn naive_forward(
    features: &FeatureMap,
    layout: &Layout,
    state: &AttentionState,
) -> Result<AttentionOutput> {
    state.check_features(features)?;
    let grid = features.grid();
    let cfg = state.config;
    let (c, d, heads) = (cfg.channels, cfg.attn_dim, cfg.heads);
    let hd = d / heads;
    let scale = 1.0 / (hd as f64).sqrt();

    let mut objects: Vec<&DescriptionTuple> = layout.objects.iter().collect();
    objects.sort_by_key(|o| o.id);
    let mut kv_cache: HashMap<Vec<usize>, ProjectedKv> = HashMap::new();
    let mut output = Matrix::zeros(grid.len(), c);
    let mut row_writes = vec![0u32; grid.len()];

    for t in 0..grid.len() {
        let (x, y) = grid.center(t);
        let covering: Vec<&DescriptionTuple> = objects
            .iter()
            .copied()
            .filter(|o| o.bbox.contains_point(x, y))
            .collect();
        let key: Vec<usize> = covering.iter().map(|o| o.id).collect();
        if !kv_cache.contains_key(&key) {
            let seq = state.encode(&covering, true)?;
            let project = |w: &Matrix| -> Vec<Vec<f64>> {
                (0..seq.len())
                    .map(|r| {
                        let row = seq.tokens.row(r);
                        (0..d)
                            .map(|j| (0..row.len()).map(|i| row[i] * w.get(i, j)).sum())
                            .collect()
                    })
                    .collect()
            };
            let entry = (project(&state.w_k), project(&state.w_v));
            kv_cache.insert(key.clone(), entry);
        }
        let (keys, values) = &kv_cache[&key];

        let v_in = features.data().row(t);
        let q: Vec<f64> = (0..d)
            .map(|j| (0..c).map(|i| v_in[i] * state.w_q.get(i, j)).sum())
            .collect();
        let mut attended = vec![0.0; d];
        for h in 0..heads {
            let lo = h * hd;
            let logits: Vec<f64> = keys
                .iter()
                .map(|k| (lo..lo + hd).map(|j| q[j] * k[j]).sum::<f64>() * scale)
                .collect();
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            for (e, val) in exps.iter().zip(values) {
                for j in lo..lo + hd {
                    attended[j] += e / total * val[j];
                }
            }
        }
        let row = output.row_mut(t);
        for (o, out) in row.iter_mut().enumerate() {
            *out = (0..d).map(|j| attended[j] * state.w_out.get(j, o)).sum();
        }
        row_writes[t] += 1;
    }

    let mut regions: Vec<RegionDiagnostic> = Vec::new();
    let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
    for t in 0..grid.len() {
        let (x, y) = grid.center(t);
        let ids: Vec<usize> = objects
            .iter()
            .filter(|o| o.bbox.contains_point(x, y))
            .map(|o| o.id)
            .collect();
        let slot = *index.entry(ids.clone()).or_insert_with(|| {
            regions.push(RegionDiagnostic {
                sequence_length: kv_cache[&ids].0.len(),
                objects: ids,
                tokens: 0,
            });
            regions.len() - 1
        });
        regions[slot].tokens += 1;
    }
    Ok(AttentionOutput {
        output,
        regions,
        row_writes,
    })
}
