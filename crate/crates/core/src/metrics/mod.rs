//! Crop-CLIP and SAM-IoU evaluation pipelines.
//!
//! Both metrics score one generated sample against its conditioning layout.
//! Objects whose box covers less than `lower` or more than `upper` of the
//! image are excluded (strict comparisons, so the bounds themselves are
//! kept). Scores are reported on a 0-100 scale.

pub mod backend;
pub mod text;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::layout::{box_area_fraction, BoundingBox, Layout};
use crate::{Error, Result};

pub use backend::{
    EmbedderBackend, FileEmbedder, FileSegmenter, MockEmbedder, ObjectKey, RectSegmenter,
    SegmenterBackend,
};
pub use text::{
    bucket_descriptions, bucket_histogram, count_syllables, gunning_fog, text_stats, Complexity,
    DescriptionBuckets, LengthBucket, TextStats,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterBounds {
    pub lower: f64,
    pub upper: f64,
}

impl Default for FilterBounds {
    fn default() -> Self {
        Self {
            lower: 0.05,
            upper: 0.50,
        }
    }
}

impl FilterBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(0.0 <= lower && lower < upper && upper <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "filter bounds must satisfy 0 <= lower < upper <= 1, got [{lower}, {upper}]"
            )));
        }
        Ok(Self { lower, upper })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterDecision {
    Keep,
    TooSmall,
    TooLarge,
}

pub fn size_filter(bbox: &BoundingBox, bounds: &FilterBounds) -> FilterDecision {
    let area = box_area_fraction(bbox);
    if area < bounds.lower {
        FilterDecision::TooSmall
    } else if area > bounds.upper {
        FilterDecision::TooLarge
    } else {
        FilterDecision::Keep
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RasterData {
    /// Interleaved 8-bit RGB, row-major.
    Rgb8(Vec<u8>),
    /// Pixels live elsewhere; only the geometry is tracked.
    External { reference: String, x0: u32, y0: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRaster {
    pub width: u32,
    pub height: u32,
    pub data: RasterData,
}

impl ImageRaster {
    pub fn rgb8(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("image dimensions must be positive".into()));
        }
        if pixels.len() as u64 != u64::from(width) * u64::from(height) * 3 {
            return Err(Error::Shape(format!(
                "{} bytes for a {width}x{height} RGB image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data: RasterData::Rgb8(pixels),
        })
    }

    pub fn external(reference: impl Into<String>, width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("image dimensions must be positive".into()));
        }
        Ok(Self {
            width,
            height,
            data: RasterData::External {
                reference: reference.into(),
                x0: 0,
                y0: 0,
            },
        })
    }

    pub fn pixel(&self, x: u32, y: u32) -> Option<[u8; 3]> {
        match &self.data {
            RasterData::Rgb8(p) => {
                let i = ((y * self.width + x) * 3) as usize;
                Some([p[i], p[i + 1], p[i + 2]])
            }
            RasterData::External { .. } => None,
        }
    }
}

/// Pixel rectangle `[x0, x1) x [y0, y1)` of a box, at least one pixel.
pub fn pixel_rect(bbox: &BoundingBox, width: u32, height: u32) -> (u32, u32, u32, u32) {
    let (x0, x1) = axis_span(bbox.x1, bbox.x2, width);
    let (y0, y1) = axis_span(bbox.y1, bbox.y2, height);
    (x0, x1, y0, y1)
}

fn axis_span(lo: f64, hi: f64, n: u32) -> (u32, u32) {
    let nf = f64::from(n);
    let mut a = (lo * nf).round().clamp(0.0, nf) as u32;
    let mut b = (hi * nf).round().clamp(0.0, nf) as u32;
    if b <= a {
        if a >= n {
            a = n - 1;
        }
        b = a + 1;
    }
    (a, b)
}

pub fn crop(image: &ImageRaster, bbox: &BoundingBox) -> ImageRaster {
    let (x0, x1, y0, y1) = pixel_rect(bbox, image.width, image.height);
    let (w, h) = (x1 - x0, y1 - y0);
    let data = match &image.data {
        RasterData::Rgb8(p) => {
            let mut out = Vec::with_capacity((w * h * 3) as usize);
            for y in y0..y1 {
                let start = ((y * image.width + x0) * 3) as usize;
                out.extend_from_slice(&p[start..start + (w * 3) as usize]);
            }
            RasterData::Rgb8(out)
        }
        RasterData::External {
            reference,
            x0: ox,
            y0: oy,
        } => RasterData::External {
            reference: reference.clone(),
            x0: ox + x0,
            y0: oy + y0,
        },
    };
    ImageRaster {
        width: w,
        height: h,
        data,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: u32,
    pub height: u32,
    pub bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("mask dimensions must be positive".into()));
        }
        Ok(Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        })
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.bits[(y * self.width + x) as usize] = value;
    }

    pub fn fill_rect(&mut self, x0: u32, x1: u32, y0: u32, y1: u32) {
        for y in y0..y1.min(self.height) {
            for x in x0..x1.min(self.width) {
                self.set(x, y, true);
            }
        }
    }
}

/// Tightest normalized box around the mask's set pixels.
pub fn circumscribed_rectangle(mask: &BinaryMask) -> Option<BoundingBox> {
    let (mut min_x, mut min_y) = (u32::MAX, u32::MAX);
    let (mut max_x, mut max_y) = (0, 0);
    let mut any = false;
    for y in 0..mask.height {
        let row = &mask.bits[(y * mask.width) as usize..((y + 1) * mask.width) as usize];
        let Some(first) = row.iter().position(|&b| b) else {
            continue;
        };
        let last = row.iter().rposition(|&b| b).unwrap_or(first);
        any = true;
        min_x = min_x.min(first as u32);
        max_x = max_x.max(last as u32);
        min_y = min_y.min(y);
        max_y = y;
    }
    any.then(|| BoundingBox {
        x1: f64::from(min_x) / f64::from(mask.width),
        y1: f64::from(min_y) / f64::from(mask.height),
        x2: f64::from(max_x + 1) / f64::from(mask.width),
        y2: f64::from(max_y + 1) / f64::from(mask.height),
    })
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Shape(format!("vectors of length {} and {}", a.len(), b.len())));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Undefined("cosine similarity of a zero vector"));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    #[serde(rename = "cropclip")]
    CropClip,
    #[serde(rename = "samiou")]
    SamIou,
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricKind::CropClip => "cropclip",
            MetricKind::SamIou => "samiou",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub object_id: usize,
    pub bbox: BoundingBox,
    pub label: String,
    pub score: Option<f64>,
    pub filtered: bool,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub sample_id: String,
    pub objects: Vec<ObjectRecord>,
    /// Mean over unfiltered objects; `None` when nothing was scored.
    pub mean: Option<f64>,
}

impl SampleReport {
    /// Computes the mean over unfiltered scored objects.
    pub fn new(sample_id: &str, objects: Vec<ObjectRecord>) -> Self {
        let scores: Vec<f64> = objects.iter().filter(|o| !o.filtered).filter_map(|o| o.score).collect();
        let mean = (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64);
        Self {
            sample_id: sample_id.to_string(),
            objects,
            mean,
        }
    }

    pub fn scored(&self) -> usize {
        self.objects.iter().filter(|o| !o.filtered).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub kind: MetricKind,
    pub samples: Vec<SampleReport>,
    /// Mean of the per-sample means, skipping samples with nothing scored.
    pub corpus_mean: Option<f64>,
}

impl MetricReport {
    pub fn new(kind: MetricKind, samples: Vec<SampleReport>) -> Self {
        let means: Vec<f64> = samples.iter().filter_map(|s| s.mean).collect();
        let corpus_mean = (!means.is_empty()).then(|| means.iter().sum::<f64>() / means.len() as f64);
        Self {
            kind,
            samples,
            corpus_mean,
        }
    }

    /// Recomputes the derived means and checks them against the stored ones.
    pub fn check_consistency(&self) -> Result<()> {
        let rebuilt = MetricReport::new(
            self.kind,
            self.samples
                .iter()
                .map(|s| SampleReport::new(&s.sample_id, s.objects.clone()))
                .collect(),
        );
        let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (None, None) => true,
            (Some(x), Some(y)) => (x - y).abs() <= 1e-6 * x.abs().max(1.0),
            _ => false,
        };
        let ok = close(rebuilt.corpus_mean, self.corpus_mean)
            && rebuilt.samples.iter().zip(&self.samples).all(|(a, b)| close(a.mean, b.mean));
        if ok {
            Ok(())
        } else {
            Err(Error::Validation("report means disagree with per-object scores".into()))
        }
    }
}

fn filtered_record(obj: &crate::layout::DescriptionTuple, reason: String) -> ObjectRecord {
    ObjectRecord {
        object_id: obj.id,
        bbox: obj.bbox,
        label: obj.text.clone(),
        score: None,
        filtered: true,
        reason: Some(reason),
    }
}

fn filter_reason(decision: FilterDecision) -> Option<String> {
    match decision {
        FilterDecision::Keep => None,
        FilterDecision::TooSmall => Some("too_small".into()),
        FilterDecision::TooLarge => Some("too_large".into()),
    }
}

/// Cosine similarity (x100) between each kept object's crop and its label.
pub fn crop_clip_score(
    sample_id: &str,
    image: &ImageRaster,
    layout: &Layout,
    embedder: &dyn EmbedderBackend,
    bounds: &FilterBounds,
) -> SampleReport {
    let records = layout
        .objects
        .iter()
        .map(|obj| {
            if let Some(reason) = filter_reason(size_filter(&obj.bbox, bounds)) {
                return filtered_record(obj, reason);
            }
            let key = ObjectKey {
                sample_id,
                object_id: obj.id,
            };
            let patch = crop(image, &obj.bbox);
            let score = embedder
                .embed_image(&key, &patch)
                .and_then(|img| Ok((img, embedder.embed_text(&key, &obj.text)?)))
                .and_then(|(img, txt)| cosine_similarity(&img, &txt));
            match score {
                Ok(s) => ObjectRecord {
                    object_id: obj.id,
                    bbox: obj.bbox,
                    label: obj.text.clone(),
                    score: Some(s * 100.0),
                    filtered: false,
                    reason: None,
                },
                Err(e) => filtered_record(obj, format!("backend_error: {e}")),
            }
        })
        .collect();
    SampleReport::new(sample_id, records)
}

/// IoU (x100) between each kept box and the circumscribed rectangle of the
/// segmenter's mask inside it. An empty mask scores 0.
pub fn sam_iou_score(
    sample_id: &str,
    image: &ImageRaster,
    layout: &Layout,
    segmenter: &dyn SegmenterBackend,
    bounds: &FilterBounds,
) -> SampleReport {
    let records = layout
        .objects
        .iter()
        .map(|obj| {
            if let Some(reason) = filter_reason(size_filter(&obj.bbox, bounds)) {
                return filtered_record(obj, reason);
            }
            let key = ObjectKey {
                sample_id,
                object_id: obj.id,
            };
            let mask = segmenter.mask(&key, image, &obj.bbox).and_then(|m| {
                if (m.width, m.height) == (image.width, image.height) {
                    Ok(m)
                } else {
                    Err(Error::Shape(format!(
                        "mask {}x{} for image {}x{}",
                        m.width, m.height, image.width, image.height
                    )))
                }
            });
            match mask {
                Ok(m) => {
                    let iou = circumscribed_rectangle(&m).map_or(0.0, |b| b.iou(&obj.bbox));
                    ObjectRecord {
                        object_id: obj.id,
                        bbox: obj.bbox,
                        label: obj.text.clone(),
                        score: Some(iou * 100.0),
                        filtered: false,
                        reason: None,
                    }
                }
                Err(e) => filtered_record(obj, format!("backend_error: {e}")),
            }
        })
        .collect();
    SampleReport::new(sample_id, records)
}

/// Pearson product-moment correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Shape(format!("{} vs {} samples", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(Error::Undefined("correlation needs at least two samples"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("correlation input"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("correlation with zero variance"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}
