//! Layout JSON: pixel-space boxes, normalized on load.
//!
//! ```json
//! {"image_size": [512, 512], "caption": "...",
//!  "objects": [{"bbox": [64, 64, 320, 320], "label": "a red apple"}]}
//! ```

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::layout::{validate_layout, BoundingBox, DescriptionTuple, Layout};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectEntry {
    /// `[x1, y1, x2, y2]` in pixels.
    pub bbox: [f64; 4],
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutFile {
    /// `[width, height]` in pixels.
    pub image_size: [u32; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
    #[serde(default)]
    pub objects: Vec<ObjectEntry>,
}

/// How unknown JSON fields are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    /// Unknown fields are an error.
    #[default]
    Strict,
    /// Unknown fields are logged and dropped.
    Lenient,
}

const TOP_FIELDS: [&str; 3] = ["image_size", "caption", "objects"];
const OBJECT_FIELDS: [&str; 2] = ["bbox", "label"];

fn strip_unknown(
    map: &mut serde_json::Map<String, Value>,
    known: &[&str],
    context: &str,
    strictness: Strictness,
) -> Result<()> {
    let unknown: Vec<String> = map.keys().filter(|k| !known.contains(&k.as_str())).cloned().collect();
    for key in unknown {
        match strictness {
            Strictness::Strict => {
                return Err(Error::Validation(format!("unknown field {key:?} in {context}")));
            }
            Strictness::Lenient => {
                log::warn!("ignoring unknown field {key:?} in {context}");
                map.remove(&key);
            }
        }
    }
    Ok(())
}

impl LayoutFile {
    pub fn parse(text: &str, strictness: Strictness) -> Result<Self> {
        let mut value: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let top = value
            .as_object_mut()
            .ok_or_else(|| Error::Parse("layout file must be a JSON object".into()))?;
        strip_unknown(top, &TOP_FIELDS, "layout", strictness)?;
        if let Some(Value::Array(objects)) = top.get_mut("objects") {
            for (i, obj) in objects.iter_mut().enumerate() {
                if let Some(map) = obj.as_object_mut() {
                    strip_unknown(map, &OBJECT_FIELDS, &format!("object {i}"), strictness)?;
                }
            }
        }
        serde_json::from_value(value).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Normalizes to `[0, 1]` coordinates and validates the result.
    pub fn to_layout(&self) -> Result<Layout> {
        let [w, h] = self.image_size;
        if w == 0 || h == 0 {
            return Err(Error::Validation("image_size must be positive".into()));
        }
        let (wf, hf) = (f64::from(w), f64::from(h));
        let objects = self
            .objects
            .iter()
            .enumerate()
            .map(|(id, o)| {
                let [x1, y1, x2, y2] = o.bbox;
                let bbox = BoundingBox {
                    x1: x1 / wf,
                    y1: y1 / hf,
                    x2: x2 / wf,
                    y2: y2 / hf,
                };
                DescriptionTuple::new(id, bbox, o.label.clone())
            })
            .collect();
        let layout = Layout {
            image_width: w,
            image_height: h,
            caption: self.caption.clone(),
            objects,
        };
        let violations = validate_layout(&layout);
        if violations.is_empty() {
            Ok(layout)
        } else {
            let msgs: Vec<String> = violations.iter().map(ToString::to_string).collect();
            Err(Error::Validation(msgs.join("; ")))
        }
    }

    pub fn from_layout(layout: &Layout) -> Self {
        let (wf, hf) = (f64::from(layout.image_width), f64::from(layout.image_height));
        Self {
            image_size: [layout.image_width, layout.image_height],
            caption: layout.caption.clone(),
            objects: layout
                .objects
                .iter()
                .map(|o| ObjectEntry {
                    bbox: [o.bbox.x1 * wf, o.bbox.y1 * hf, o.bbox.x2 * wf, o.bbox.y2 * hf],
                    label: o.text.clone(),
                })
                .collect(),
        }
    }
}

/// Strict parse straight to a validated layout.
pub fn load_layout(text: &str, strictness: Strictness) -> Result<Layout> {
    LayoutFile::parse(text, strictness)?.to_layout()
}
