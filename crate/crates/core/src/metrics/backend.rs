//! Embedding and segmentation backends for the metric pipelines.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::grounding::{HashEmbedder, TextEmbedder};
use crate::layout::BoundingBox;
use crate::metrics::{pixel_rect, BinaryMask, ImageRaster, RasterData};
use crate::rng::fnv1a;
use crate::{Error, Result};

/// Identifies one object of one generated sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObjectKey<'a> {
    pub sample_id: &'a str,
    pub object_id: usize,
}

impl ObjectKey<'_> {
    pub fn image_key(&self) -> String {
        format!("{}:{}:image", self.sample_id, self.object_id)
    }

    pub fn text_key(&self) -> String {
        format!("{}:{}:text", self.sample_id, self.object_id)
    }
}

pub trait EmbedderBackend {
    fn dim(&self) -> usize;
    fn embed_image(&self, key: &ObjectKey, crop: &ImageRaster) -> Result<Vec<f64>>;
    fn embed_text(&self, key: &ObjectKey, label: &str) -> Result<Vec<f64>>;
}

pub trait SegmenterBackend {
    /// Binary mask at image resolution for the object inside `bbox`.
    fn mask(&self, key: &ObjectKey, image: &ImageRaster, bbox: &BoundingBox) -> Result<BinaryMask>;
}

/// Content-hash embeddings: image vectors depend only on the crop's pixels
/// (or reference and offset for external images), text vectors only on the
/// label.
#[derive(Debug, Clone)]
pub struct MockEmbedder {
    inner: HashEmbedder,
}

impl MockEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            inner: HashEmbedder::new(dim, seed)?,
        })
    }
}

impl EmbedderBackend for MockEmbedder {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn embed_image(&self, _key: &ObjectKey, crop: &ImageRaster) -> Result<Vec<f64>> {
        let digest = match &crop.data {
            RasterData::Rgb8(p) => fnv1a(p),
            RasterData::External { reference, x0, y0 } => {
                fnv1a(format!("{reference}@{x0},{y0}").as_bytes())
            }
        };
        let tag = format!("image:{digest:016x}:{}x{}", crop.width, crop.height);
        Ok(self.inner.embed(&tag))
    }

    fn embed_text(&self, _key: &ObjectKey, label: &str) -> Result<Vec<f64>> {
        Ok(self.inner.embed(&format!("text:{label}")))
    }
}

/// Precomputed vectors keyed by `"<sample>:<object>:image"` and
/// `"<sample>:<object>:text"`.
#[derive(Debug, Clone)]
pub struct FileEmbedder {
    table: BTreeMap<String, Vec<f64>>,
    dim: usize,
}

impl FileEmbedder {
    pub fn new(table: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        let dim = table.values().next().map_or(0, Vec::len);
        if table.values().any(|v| v.len() != dim) {
            return Err(Error::Shape("embedding vectors differ in length".into()));
        }
        Ok(Self { table, dim })
    }

    fn lookup(&self, key: &str) -> Result<Vec<f64>> {
        self.table
            .get(key)
            .cloned()
            .ok_or_else(|| Error::Backend(format!("no embedding for {key}")))
    }
}

impl EmbedderBackend for FileEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_image(&self, key: &ObjectKey, _crop: &ImageRaster) -> Result<Vec<f64>> {
        self.lookup(&key.image_key())
    }

    fn embed_text(&self, key: &ObjectKey, _label: &str) -> Result<Vec<f64>> {
        self.lookup(&key.text_key())
    }
}

/// Segments exactly the box's pixel rectangle.
#[derive(Debug, Clone, Copy, Default)]
pub struct RectSegmenter;

impl SegmenterBackend for RectSegmenter {
    fn mask(&self, _key: &ObjectKey, image: &ImageRaster, bbox: &BoundingBox) -> Result<BinaryMask> {
        let (x0, x1, y0, y1) = pixel_rect(bbox, image.width, image.height);
        let mut m = BinaryMask::new(image.width, image.height)?;
        m.fill_rect(x0, x1, y0, y1);
        Ok(m)
    }
}

/// Reads `<dir>/<sample>_<object>.pgm`.
#[derive(Debug, Clone)]
pub struct FileSegmenter {
    dir: PathBuf,
}

impl FileSegmenter {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, key: &ObjectKey) -> PathBuf {
        self.dir.join(format!("{}_{}.pgm", key.sample_id, key.object_id))
    }
}

impl SegmenterBackend for FileSegmenter {
    fn mask(&self, key: &ObjectKey, _image: &ImageRaster, _bbox: &BoundingBox) -> Result<BinaryMask> {
        let path = self.path_for(key);
        let bytes = std::fs::read(&path)
            .map_err(|e| Error::Backend(format!("{}: {e}", path.display())))?;
        crate::io::netpbm::parse_pgm_mask(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_embedder_lookup() {
        let mut t = BTreeMap::new();
        t.insert("s:0:image".to_string(), vec![1.0, 0.0]);
        t.insert("s:0:text".to_string(), vec![0.0, 1.0]);
        let e = FileEmbedder::new(t.clone()).unwrap();
        let img = ImageRaster::external("x", 4, 4).unwrap();
        let key = ObjectKey {
            sample_id: "s",
            object_id: 0,
        };
        assert_eq!(e.embed_image(&key, &img).unwrap(), vec![1.0, 0.0]);
        let missing = ObjectKey {
            sample_id: "s",
            object_id: 1,
        };
        assert!(matches!(e.embed_text(&missing, "x"), Err(Error::Backend(_))));
        t.insert("s:1:text".to_string(), vec![0.0]);
        assert!(FileEmbedder::new(t).is_err());
    }

    #[test]
    fn mock_embedder_keys_on_content() {
        let e = MockEmbedder::new(16, 0).unwrap();
        let key = ObjectKey {
            sample_id: "s",
            object_id: 0,
        };
        let a = ImageRaster::rgb8(1, 1, vec![1, 2, 3]).unwrap();
        let b = ImageRaster::rgb8(1, 1, vec![1, 2, 4]).unwrap();
        assert_eq!(e.embed_image(&key, &a).unwrap(), e.embed_image(&key, &a.clone()).unwrap());
        assert_ne!(e.embed_image(&key, &a).unwrap(), e.embed_image(&key, &b).unwrap());
        assert_eq!(e.embed_text(&key, "cat").unwrap(), e.embed_text(&key, "cat").unwrap());
    }

    #[test]
    fn missing_mask_file_is_backend_error() {
        let seg = FileSegmenter::new("/nonexistent-dir");
        let img = ImageRaster::external("x", 4, 4).unwrap();
        let key = ObjectKey {
            sample_id: "s",
            object_id: 3,
        };
        assert!(seg.path_for(&key).ends_with("s_3.pgm"));
        assert!(matches!(seg.mask(&key, &img, &BoundingBox::FULL), Err(Error::Backend(_))));
    }
}
