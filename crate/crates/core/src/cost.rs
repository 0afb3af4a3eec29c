//! Analytical FLOPs model and kernel microbenchmarks for layout-conditioning
//! attention layers.
//!
//! A multiply-accumulate counts as 2 FLOPs; softmax and normalization are
//! ignored. Key/value projections take `C`-channel context vectors in every
//! variant so the three variants are directly comparable.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::grounding::{sequence_length, tokenize};
use crate::layout::{rasterize_box, Layout, TokenGrid};
use crate::region::reorganize;
use crate::rng::{derive_seed, normal_matrix, seeded};
use crate::xattn::attention_kernel;
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Cross-attention per reorganized region.
    RegionalCross,
    /// Self-attention over visual tokens concatenated with grounding tokens.
    ExtendedSelf,
    /// Cross-attention per object box; overlapping tokens are processed once
    /// per covering object.
    PerObjectCross,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::RegionalCross, Variant::ExtendedSelf, Variant::PerObjectCross];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::RegionalCross => "regional_cross",
            Variant::ExtendedSelf => "extended_self",
            Variant::PerObjectCross => "per_object_cross",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant {s:?}")))
    }
}

/// Visual tokens attending to a context sequence of `seq_len` tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub tokens: u64,
    pub seq_len: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostConfig {
    pub variant: Variant,
    pub n_tokens: u64,
    pub channels: u64,
    pub attn_dim: u64,
    pub heads: u64,
    /// Grounded text tokens of the whole layout.
    pub t_total: u64,
    pub object_count: u64,
    /// Reorganized regions; token counts sum to `n_tokens`.
    pub regions: Vec<Segment>,
    /// Per-object boxes, plus one background segment for uncovered tokens.
    pub objects: Vec<Segment>,
}

impl CostConfig {
    /// Derives region and object segment sizes from a layout on `grid`.
    pub fn from_layout(
        variant: Variant,
        layout: &Layout,
        grid: &TokenGrid,
        channels: u64,
        attn_dim: u64,
        heads: u64,
    ) -> Self {
        let token_count = |id: usize| layout.object(id).map_or(0, |o| tokenize(&o.text).len());
        let partition = reorganize(layout, grid);
        let regions = partition
            .regions
            .iter()
            .map(|r| {
                let counts: Vec<usize> = r.covering_set.ids().iter().map(|&id| token_count(id)).collect();
                Segment {
                    tokens: r.tokens.len() as u64,
                    seq_len: sequence_length(&counts) as u64,
                }
            })
            .collect();
        let mut covered = vec![false; grid.len()];
        let mut objects = Vec::new();
        for obj in &layout.objects {
            let mask = rasterize_box(&obj.bbox, grid);
            if mask.is_empty() {
                continue;
            }
            mask.iter().for_each(|&t| covered[t] = true);
            objects.push(Segment {
                tokens: mask.len() as u64,
                seq_len: sequence_length(&[token_count(obj.id)]) as u64,
            });
        }
        let uncovered = covered.iter().filter(|c| !**c).count() as u64;
        if uncovered > 0 {
            objects.push(Segment {
                tokens: uncovered,
                seq_len: 1,
            });
        }
        let all: Vec<usize> = layout.objects.iter().map(|o| tokenize(&o.text).len()).collect();
        Self {
            variant,
            n_tokens: grid.len() as u64,
            channels,
            attn_dim,
            heads,
            t_total: sequence_length(&all) as u64,
            object_count: layout.objects.len() as u64,
            regions,
            objects,
        }
    }

    pub fn with_variant(&self, variant: Variant) -> Self {
        Self {
            variant,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("N", self.n_tokens),
            ("C", self.channels),
            ("d", self.attn_dim),
            ("heads", self.heads),
            ("T_total", self.t_total),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be positive")));
        }
        if !self.attn_dim.is_multiple_of(self.heads) {
            return Err(Error::InvalidArgument("d must be divisible by heads".into()));
        }
        match self.variant {
            Variant::ExtendedSelf => {}
            Variant::RegionalCross => {
                let sum: u64 = self.regions.iter().map(|s| s.tokens).sum();
                if sum != self.n_tokens {
                    return Err(Error::InvalidArgument(format!(
                        "region token counts sum to {sum}, N is {}",
                        self.n_tokens
                    )));
                }
                check_segments(&self.regions)?;
            }
            Variant::PerObjectCross => {
                if self.objects.is_empty() {
                    return Err(Error::InvalidArgument("no object segments".into()));
                }
                if self.objects.iter().any(|s| s.tokens > self.n_tokens) {
                    return Err(Error::InvalidArgument("object larger than the grid".into()));
                }
                check_segments(&self.objects)?;
            }
        }
        Ok(())
    }
}

fn check_segments(segments: &[Segment]) -> Result<()> {
    if segments.iter().any(|s| s.tokens == 0 || s.seq_len == 0) {
        return Err(Error::InvalidArgument("segments need tokens and context".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub variant: Variant,
    pub projection: u64,
    pub attention: u64,
    pub output: u64,
    pub total: u64,
}

/// Cost of one cross-attention segment: `n` queries over `m` context tokens.
fn cross_segment(n: u64, m: u64, c: u64, d: u64) -> (u64, u64, u64) {
    let projection = n * c * d * 2 + 2 * m * c * d * 2;
    let attention = 2 * (n * m * d * 2);
    let output = n * d * c * 2;
    (projection, attention, output)
}

pub fn flops(config: &CostConfig) -> Result<CostReport> {
    config.validate()?;
    let (c, d) = (config.channels, config.attn_dim);
    let (projection, attention, output) = match config.variant {
        Variant::ExtendedSelf => {
            let l = config.n_tokens + config.t_total;
            (3 * l * c * d * 2, 2 * (l * l * d * 2), l * d * c * 2)
        }
        Variant::RegionalCross | Variant::PerObjectCross => {
            let segments = if config.variant == Variant::RegionalCross {
                &config.regions
            } else {
                &config.objects
            };
            segments.iter().fold((0, 0, 0), |acc, s| {
                let (p, a, o) = cross_segment(s.tokens, s.seq_len, c, d);
                (acc.0 + p, acc.1 + a, acc.2 + o)
            })
        }
    };
    Ok(CostReport {
        variant: config.variant,
        projection,
        attention,
        output,
        total: projection + attention + output,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostComparison {
    pub reports: Vec<CostReport>,
    /// Total of each variant divided by the extended self-attention total.
    pub ratio_to_extended_self: Vec<(Variant, f64)>,
}

pub fn compare(config: &CostConfig) -> Result<CostComparison> {
    let reports = Variant::ALL
        .iter()
        .map(|&v| flops(&config.with_variant(v)))
        .collect::<Result<Vec<_>>>()?;
    let base = reports[1].total as f64;
    let ratio_to_extended_self = reports.iter().map(|r| (r.variant, r.total as f64 / base)).collect();
    Ok(CostComparison {
        reports,
        ratio_to_extended_self,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchStats {
    pub repetitions: usize,
    pub median_s: f64,
    pub mean_s: f64,
    pub min_s: f64,
    pub max_s: f64,
}

pub const DEFAULT_REPETITIONS: usize = 20;

/// Times one forward of the variant's attention kernels on seeded random
/// inputs of the configured sizes. One warm-up run is excluded.
pub fn benchmark(config: &CostConfig, repetitions: usize, seed: u64) -> Result<BenchStats> {
    config.validate()?;
    if repetitions == 0 {
        return Err(Error::InvalidArgument("repetitions must be at least 1".into()));
    }
    let workload = Workload::new(config, seed)?;
    workload.run()?;
    let mut times = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        std::hint::black_box(workload.run()?);
        times.push(start.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    let n = times.len();
    let median_s = if n % 2 == 1 {
        times[n / 2]
    } else {
        (times[n / 2 - 1] + times[n / 2]) / 2.0
    };
    Ok(BenchStats {
        repetitions,
        median_s,
        mean_s: times.iter().sum::<f64>() / n as f64,
        min_s: times[0],
        max_s: times[n - 1],
    })
}

struct Workload {
    heads: usize,
    visual: Matrix,
    /// `(first token, token count, context)` per attention call.
    calls: Vec<(usize, usize, Matrix)>,
    self_attention: bool,
    w_q: Matrix,
    w_k: Matrix,
    w_v: Matrix,
    w_out: Matrix,
}

impl Workload {
    fn new(config: &CostConfig, seed: u64) -> Result<Self> {
        let c = config.channels as usize;
        let d = config.attn_dim as usize;
        let n = config.n_tokens as usize;
        let mut rng = seeded(derive_seed(seed, "bench"));
        let mut mat = |r: usize, cols: usize| normal_matrix(&mut rng, r, cols, 1.0 / (cols as f64).sqrt());
        let (rows, calls, self_attention) = match config.variant {
            Variant::ExtendedSelf => (n + config.t_total as usize, Vec::new(), true),
            Variant::RegionalCross | Variant::PerObjectCross => {
                let segments = if config.variant == Variant::RegionalCross {
                    &config.regions
                } else {
                    &config.objects
                };
                let mut start = 0;
                let mut calls = Vec::new();
                for s in segments {
                    let len = s.tokens as usize;
                    // Per-object segments may overlap; wrap around the grid.
                    let first = if start + len <= n { start } else { 0 };
                    calls.push((first, len, mat(s.seq_len as usize, c)));
                    start = (first + len) % n;
                }
                (n, calls, false)
            }
        };
        Ok(Self {
            heads: config.heads as usize,
            visual: mat(rows, c),
            calls,
            self_attention,
            w_q: mat(c, d),
            w_k: mat(c, d),
            w_v: mat(c, d),
            w_out: mat(d, c),
        })
    }

    fn run(&self) -> Result<f64> {
        if self.self_attention {
            let q = self.visual.matmul(&self.w_q)?;
            let k = self.visual.matmul(&self.w_k)?;
            let v = self.visual.matmul(&self.w_v)?;
            let out = attention_kernel(&q, &k, &v, self.heads)?.matmul(&self.w_out)?;
            return Ok(out.get(0, 0));
        }
        let mut acc = 0.0;
        for (first, len, context) in &self.calls {
            let idx: Vec<usize> = (*first..first + len).collect();
            let q = self.visual.gather_rows(&idx).matmul(&self.w_q)?;
            let k = context.matmul(&self.w_k)?;
            let v = context.matmul(&self.w_v)?;
            let out = attention_kernel(&q, &k, &v, self.heads)?.matmul(&self.w_out)?;
            acc += out.get(0, 0);
        }
        Ok(acc)
    }
}

pub const CSV_HEADER: [&str; 9] = [
    "variant",
    "N",
    "C",
    "d",
    "heads",
    "objects",
    "T_total",
    "flops_total",
    "time_median_s",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub variant: Variant,
    pub n_tokens: u64,
    pub channels: u64,
    pub attn_dim: u64,
    pub heads: u64,
    pub objects: u64,
    pub t_total: u64,
    pub flops_total: u64,
    pub time_median_s: Option<f64>,
}

impl SweepRow {
    pub fn new(config: &CostConfig, time_median_s: Option<f64>) -> Result<Self> {
        let report = flops(config)?;
        Ok(Self {
            variant: config.variant,
            n_tokens: config.n_tokens,
            channels: config.channels,
            attn_dim: config.attn_dim,
            heads: config.heads,
            objects: config.object_count,
            t_total: config.t_total,
            flops_total: report.total,
            time_median_s,
        })
    }
}

/// FLOPs rows (no timings) for each config, in order.
pub fn sweep(configs: &[CostConfig]) -> Result<Vec<SweepRow>> {
    configs.iter().map(|c| SweepRow::new(c, None)).collect()
}

/// Renders rows with the fixed CSV schema. Times use 9 significant digits.
pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.variant.as_str().to_string(),
            r.n_tokens.to_string(),
            r.channels.to_string(),
            r.attn_dim.to_string(),
            r.heads.to_string(),
            r.objects.to_string(),
            r.t_total.to_string(),
            r.flops_total.to_string(),
            r.time_median_s.map(crate::io::json::format_sig9).unwrap_or_default(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

/// Parses a CSV produced by [`sweep_csv`]; the header must match exactly.
pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Parse(format!("unexpected sweep header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let int = |i: usize| -> Result<u64> {
            rec[i]
                .parse()
                .map_err(|_| Error::Parse(format!("column {} is not an integer: {:?}", CSV_HEADER[i], &rec[i])))
        };
        let time = match &rec[8] {
            "" => None,
            s => Some(
                s.parse::<f64>()
                    .ok()
                    .filter(|t| t.is_finite())
                    .ok_or_else(|| Error::Parse(format!("bad time {s:?}")))?,
            ),
        };
        rows.push(SweepRow {
            variant: rec[0].parse()?,
            n_tokens: int(1)?,
            channels: int(2)?,
            attn_dim: int(3)?,
            heads: int(4)?,
            objects: int(5)?,
            t_total: int(6)?,
            flops_total: int(7)?,
            time_median_s: time,
        });
    }
    Ok(rows)
}

/// Two overlapping objects whose combined grounded sequence is 77 tokens.
pub fn two_object_fixture() -> Layout {
    use crate::layout::BoundingBox;
    let words = |n: usize| vec!["word"; n].join(" ");
    // 1 + 37 + 1 + 37 + 1 = 77.
    Layout::new(512, 512)
        .with_object(BoundingBox { x1: 0.1, y1: 0.1, x2: 0.6, y2: 0.6 }, words(37))
        .with_object(BoundingBox { x1: 0.4, y1: 0.4, x2: 0.9, y2: 0.9 }, words(37))
}

/// The 640-channel, 32x32-token layer plus a 16x16 and 64x64 grid, for all
/// variants, on [`two_object_fixture`].
pub fn default_sweep_configs() -> Vec<CostConfig> {
    let layout = two_object_fixture();
    let mut out = Vec::new();
    for side in [16usize, 32, 64] {
        let grid = TokenGrid::new(side, side).expect("positive");
        for v in Variant::ALL {
            out.push(CostConfig::from_layout(v, &layout, &grid, 640, 640, 8));
        }
    }
    out
}
