//! Seeded synthetic layouts, a stand-in for a real layout corpus.
//!
//! Each sample draws its own RNG stream from the corpus seed and its index,
//! so sample `i` is the same whatever `count` is.

use std::collections::BTreeMap;

use rand::Rng;

use crate::io::layout_file::{LayoutFile, ObjectEntry};
use crate::metrics::text::{Complexity, LengthBucket};
use crate::metrics::{bucket_descriptions, DescriptionBuckets};
use crate::rng::{derive_seed, seeded};
use crate::{Error, Result};

const BUNDLED: &str = include_str!("../../data/vocabulary.txt");

/// Labels grouped by (complexity, length) bucket.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    cells: BTreeMap<(Complexity, LengthBucket), Vec<String>>,
}

impl Vocabulary {
    /// One label per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let labels: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        let mut cells: BTreeMap<_, Vec<String>> = BTreeMap::new();
        for (label, b) in labels.iter().zip(bucket_descriptions(&labels)) {
            if b.words == 0 {
                return Err(Error::Parse(format!("vocabulary label {label:?} has no words")));
            }
            cells.entry((b.complexity, b.length)).or_default().push(label.to_string());
        }
        if cells.is_empty() {
            return Err(Error::Parse("vocabulary is empty".into()));
        }
        Ok(Self { cells })
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled vocabulary parses")
    }

    pub fn cells(&self) -> &BTreeMap<(Complexity, LengthBucket), Vec<String>> {
        &self.cells
    }

    /// Uniform over non-empty buckets, then uniform within the bucket.
    fn sample<R: Rng>(&self, rng: &mut R) -> &str {
        let cell = self.cells.values().nth(rng.random_range(0..self.cells.len())).expect("cell");
        &cell[rng.random_range(0..cell.len())]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenConfig {
    pub seed: u64,
    pub min_objects: usize,
    pub max_objects: usize,
    /// Probability that a new box is centered inside an earlier one.
    pub overlap_bias: f64,
    pub image_size: [u32; 2],
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            min_objects: 1,
            max_objects: 6,
            overlap_bias: 0.5,
            image_size: [512, 512],
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_objects > self.max_objects {
            return Err(Error::InvalidArgument(format!(
                "min objects {} exceeds max {}",
                self.min_objects, self.max_objects
            )));
        }
        if !(0.0..=1.0).contains(&self.overlap_bias) {
            return Err(Error::InvalidArgument(format!("overlap bias {} not in [0, 1]", self.overlap_bias)));
        }
        if self.image_size.contains(&0) {
            return Err(Error::InvalidArgument("image size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedLayout {
    pub id: String,
    pub file: LayoutFile,
}

fn pixel_span(lo: f64, hi: f64, n: u32) -> (f64, f64) {
    let nf = f64::from(n);
    let a = (lo * nf).round().min(nf - 1.0);
    let b = (hi * nf).round().clamp(a + 1.0, nf);
    (a, b)
}

fn one_layout(config: &GenConfig, vocab: &Vocabulary, index: usize) -> LayoutFile {
    let mut rng = seeded(derive_seed(config.seed, &format!("layout/{index}")));
    let n = rng.random_range(config.min_objects..=config.max_objects);
    let [w, h] = config.image_size;
    let mut boxes: Vec<[f64; 4]> = Vec::with_capacity(n);
    let mut objects = Vec::with_capacity(n);
    for _ in 0..n {
        let bw = rng.random_range(0.1..0.6);
        let bh = rng.random_range(0.1..0.6);
        let (x1, y1) = if !boxes.is_empty() && rng.random_bool(config.overlap_bias) {
            let p = boxes[rng.random_range(0..boxes.len())];
            let cx = rng.random_range(p[0]..p[2]);
            let cy = rng.random_range(p[1]..p[3]);
            ((cx - bw / 2.0).clamp(0.0, 1.0 - bw), (cy - bh / 2.0).clamp(0.0, 1.0 - bh))
        } else {
            (rng.random_range(0.0..1.0 - bw), rng.random_range(0.0..1.0 - bh))
        };
        boxes.push([x1, y1, x1 + bw, y1 + bh]);
        let (px1, px2) = pixel_span(x1, x1 + bw, w);
        let (py1, py2) = pixel_span(y1, y1 + bh, h);
        objects.push(ObjectEntry {
            bbox: [px1, py1, px2, py2],
            label: vocab.sample(&mut rng).to_string(),
        });
    }
    LayoutFile {
        image_size: [w, h],
        caption: None,
        objects,
    }
}

/// Generates `count` layouts named `sample_00000`, `sample_00001`, ...
pub fn generate_layouts(count: usize, config: &GenConfig, vocab: &Vocabulary) -> Result<Vec<GeneratedLayout>> {
    config.validate()?;
    Ok((0..count)
        .map(|i| GeneratedLayout {
            id: format!("sample_{i:05}"),
            file: one_layout(config, vocab, i),
        })
        .collect())
}

/// Buckets of every label in a generated corpus.
pub fn corpus_buckets(layouts: &[GeneratedLayout]) -> Vec<DescriptionBuckets> {
    let labels: Vec<&str> = layouts
        .iter()
        .flat_map(|l| l.file.objects.iter().map(|o| o.label.as_str()))
        .collect();
    bucket_descriptions(&labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::layout_file::Strictness;
    use crate::metrics::bucket_histogram;

    #[test]
    fn bundled_vocabulary_fills_every_bucket() {
        let v = Vocabulary::bundled();
        assert_eq!(v.cells().len(), 9);
    }

    #[test]
    fn generated_corpus_covers_all_buckets() {
        let layouts = generate_layouts(200, &GenConfig::default(), &Vocabulary::bundled()).unwrap();
        let hist = bucket_histogram(&corpus_buckets(&layouts));
        assert!(hist.values().all(|&c| c > 0), "{hist:?}");
    }

    #[test]
    fn deterministic_and_prefix_stable() {
        let cfg = GenConfig {
            seed: 7,
            ..GenConfig::default()
        };
        let v = Vocabulary::bundled();
        let a = generate_layouts(20, &cfg, &v).unwrap();
        let b = generate_layouts(20, &cfg, &v).unwrap();
        assert_eq!(a, b);
        assert_eq!(generate_layouts(5, &cfg, &v).unwrap()[..], a[..5]);
        assert!(generate_layouts(0, &cfg, &v).unwrap().is_empty());
        let other = generate_layouts(20, &GenConfig { seed: 8, ..cfg }, &v).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn layouts_are_valid_and_respect_counts() {
        let cfg = GenConfig {
            min_objects: 2,
            max_objects: 4,
            image_size: [3, 2],
            ..GenConfig::default()
        };
        for g in generate_layouts(100, &cfg, &Vocabulary::bundled()).unwrap() {
            let layout = g.file.to_layout().unwrap();
            assert!((2..=4).contains(&layout.len()));
            let text = serde_json::to_string(&g.file).unwrap();
            LayoutFile::parse(&text, Strictness::Strict).unwrap();
        }
    }

    #[test]
    fn overlap_bias_increases_overlap() {
        let overlap_rate = |bias: f64| {
            let cfg = GenConfig {
                min_objects: 2,
                max_objects: 2,
                overlap_bias: bias,
                ..GenConfig::default()
            };
            let layouts = generate_layouts(300, &cfg, &Vocabulary::bundled()).unwrap();
            layouts
                .iter()
                .filter(|g| {
                    let l = g.file.to_layout().unwrap();
                    l.objects[0].bbox.intersection(&l.objects[1].bbox).is_some()
                })
                .count()
        };
        assert_eq!(overlap_rate(1.0), 300);
        assert!(overlap_rate(0.0) < 300);
    }

    #[test]
    fn bad_configs() {
        let v = Vocabulary::bundled();
        let bad = [
            GenConfig { min_objects: 3, max_objects: 2, ..GenConfig::default() },
            GenConfig { overlap_bias: 1.5, ..GenConfig::default() },
            GenConfig { image_size: [0, 4], ..GenConfig::default() },
        ];
        for c in bad {
            assert!(generate_layouts(1, &c, &v).is_err());
        }
        assert!(Vocabulary::parse("# nothing\n\n").is_err());
        assert!(Vocabulary::parse("...").is_err());
    }
}
