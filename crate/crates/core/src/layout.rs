//! Layout domain types and box geometry on token grids.
//!
//! Boxes are stored normalized to `[0, 1]` (fractions of image width and
//! height). Pixel coordinates only exist in the file formats under [`crate::io`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Axis-aligned box in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BoundingBox {
    pub const FULL: BoundingBox = BoundingBox {
        x1: 0.0,
        y1: 0.0,
        x2: 1.0,
        y2: 1.0,
    };

    /// Checked constructor; rejects anything that violates `0 <= x1 < x2 <= 1`
    /// (and likewise for y).
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        let b = Self { x1, y1, x2, y2 };
        match b.rule_violations().first() {
            None => Ok(b),
            Some(rule) => Err(Error::InvalidBox {
                x1,
                y1,
                x2,
                y2,
                reason: rule.as_str(),
            }),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.rule_violations().is_empty()
    }

    pub(crate) fn rule_violations(&self) -> Vec<Rule> {
        let coords = [self.x1, self.y1, self.x2, self.y2];
        if coords.iter().any(|c| !c.is_finite()) {
            return vec![Rule::FiniteCoordinates];
        }
        let mut out = Vec::new();
        if self.x1 < 0.0 {
            out.push(Rule::X1NonNegative);
        }
        if self.y1 < 0.0 {
            out.push(Rule::Y1NonNegative);
        }
        if self.x2 > 1.0 {
            out.push(Rule::X2AtMostOne);
        }
        if self.y2 > 1.0 {
            out.push(Rule::Y2AtMostOne);
        }
        if self.x1 >= self.x2 {
            out.push(Rule::XOrdered);
        }
        if self.y1 >= self.y2 {
            out.push(Rule::YOrdered);
        }
        out
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Half-open membership `[x1, x2) x [y1, y2)`, closed where the box
    /// touches the far image edge.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        in_span(x, self.x1, self.x2) && in_span(y, self.y1, self.y2)
    }

    /// Overlap with `other`, or `None` when the interiors do not intersect.
    pub fn intersection(&self, other: &BoundingBox) -> Option<BoundingBox> {
        let x1 = self.x1.max(other.x1);
        let y1 = self.y1.max(other.y1);
        let x2 = self.x2.min(other.x2);
        let y2 = self.y2.min(other.y2);
        (x1 < x2 && y1 < y2).then_some(BoundingBox { x1, y1, x2, y2 })
    }

    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let inter = self.intersection(other).map_or(0.0, |b| b.area());
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            (inter / union).clamp(0.0, 1.0)
        }
    }
}

fn in_span(v: f64, lo: f64, hi: f64) -> bool {
    v >= lo && (v < hi || (hi == 1.0 && v == 1.0))
}

/// One `(box, text)` pair of a layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptionTuple {
    pub id: usize,
    pub bbox: BoundingBox,
    pub text: String,
}

impl DescriptionTuple {
    pub fn new(id: usize, bbox: BoundingBox, text: impl Into<String>) -> Self {
        Self {
            id,
            bbox,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub image_width: u32,
    pub image_height: u32,
    pub caption: Option<String>,
    pub objects: Vec<DescriptionTuple>,
}

impl Layout {
    pub fn new(image_width: u32, image_height: u32) -> Self {
        Self {
            image_width,
            image_height,
            caption: None,
            objects: Vec::new(),
        }
    }

    pub fn with_caption(mut self, caption: impl Into<String>) -> Self {
        self.caption = Some(caption.into());
        self
    }

    /// Appends an object with the next contiguous id.
    pub fn with_object(mut self, bbox: BoundingBox, text: impl Into<String>) -> Self {
        let id = self.objects.len();
        self.objects.push(DescriptionTuple::new(id, bbox, text));
        self
    }

    pub fn object(&self, id: usize) -> Option<&DescriptionTuple> {
        // Ids are normally the list position; fall back to a scan otherwise.
        match self.objects.get(id) {
            Some(o) if o.id == id => Some(o),
            _ => self.objects.iter().find(|o| o.id == id),
        }
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }
}

/// Rule broken by a layout or one of its objects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Rule {
    FiniteCoordinates,
    X1NonNegative,
    Y1NonNegative,
    X2AtMostOne,
    Y2AtMostOne,
    XOrdered,
    YOrdered,
    NonEmptyText,
    ContiguousIds,
    PositiveImageSize,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::FiniteCoordinates => "finite coordinates",
            Rule::X1NonNegative => "0 <= x1",
            Rule::Y1NonNegative => "0 <= y1",
            Rule::X2AtMostOne => "x2 <= 1",
            Rule::Y2AtMostOne => "y2 <= 1",
            Rule::XOrdered => "x1 < x2",
            Rule::YOrdered => "y1 < y2",
            Rule::NonEmptyText => "non-empty text",
            Rule::ContiguousIds => "ids unique and contiguous from 0",
            Rule::PositiveImageSize => "positive image size",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// `None` for layout-level rules.
    pub object_id: Option<usize>,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.object_id {
            Some(id) => write!(f, "object {id}: {}", self.rule),
            None => write!(f, "layout: {}", self.rule),
        }
    }
}

/// Lists every broken invariant; empty means the layout is valid.
pub fn validate_layout(layout: &Layout) -> Vec<Violation> {
    let mut out = Vec::new();
    if layout.image_width == 0 || layout.image_height == 0 {
        out.push(Violation {
            object_id: None,
            rule: Rule::PositiveImageSize,
        });
    }
    let mut seen = vec![false; layout.objects.len()];
    let mut ids_ok = true;
    for obj in &layout.objects {
        match seen.get_mut(obj.id) {
            Some(slot) if !*slot => *slot = true,
            _ => ids_ok = false,
        }
        for rule in obj.bbox.rule_violations() {
            out.push(Violation {
                object_id: Some(obj.id),
                rule,
            });
        }
        if obj.text.trim().is_empty() {
            out.push(Violation {
                object_id: Some(obj.id),
                rule: Rule::NonEmptyText,
            });
        }
    }
    if !ids_ok {
        out.push(Violation {
            object_id: None,
            rule: Rule::ContiguousIds,
        });
    }
    out
}

/// Visual token grid of `height x width` tokens, indexed row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenGrid {
    height: usize,
    width: usize,
}

impl TokenGrid {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidGrid { height, width });
        }
        Ok(Self { height, width })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.height && col < self.width);
        row * self.width + col
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index / self.width, index % self.width)
    }

    /// Normalized `(x, y)` of the token center.
    pub fn center(&self, index: usize) -> (f64, f64) {
        let (row, col) = self.coords(index);
        (
            axis_center(col, self.width),
            axis_center(row, self.height),
        )
    }
}

fn axis_center(i: usize, n: usize) -> f64 {
    (i as f64 + 0.5) / n as f64
}

/// Tokens whose centers fall inside `bbox`, ascending.
pub fn rasterize_box(bbox: &BoundingBox, grid: &TokenGrid) -> Vec<usize> {
    // Membership is separable in x and y, so test each axis once.
    let cols: Vec<usize> = (0..grid.width)
        .filter(|&c| in_span(axis_center(c, grid.width), bbox.x1, bbox.x2))
        .collect();
    let mut out = Vec::new();
    for row in 0..grid.height {
        if in_span(axis_center(row, grid.height), bbox.y1, bbox.y2) {
            out.extend(cols.iter().map(|&c| grid.index(row, c)));
        }
    }
    out
}

pub fn box_area_fraction(bbox: &BoundingBox) -> f64 {
    bbox.area().clamp(0.0, 1.0)
}

pub const DEFAULT_RETENTION: f64 = 0.3;

/// Crops a layout to `crop`, re-normalizing boxes into crop coordinates.
///
/// A box is dropped when less than `retention_threshold` of its area
/// survives the crop. Survivors keep their order and get contiguous ids.
pub fn crop_layout(layout: &Layout, crop: &BoundingBox, retention_threshold: f64) -> Result<Layout> {
    let area = crop.area();
    if area.is_nan() || area <= 0.0 {
        return Err(Error::EmptyCrop);
    }
    if !(0.0..=1.0).contains(&retention_threshold) {
        return Err(Error::InvalidArgument(format!(
            "retention threshold {retention_threshold} outside [0, 1]"
        )));
    }
    let (cw, ch) = (crop.width(), crop.height());
    let mut out = Layout {
        image_width: scaled_dim(layout.image_width, cw),
        image_height: scaled_dim(layout.image_height, ch),
        caption: layout.caption.clone(),
        objects: Vec::new(),
    };
    for obj in &layout.objects {
        let Some(inter) = obj.bbox.intersection(crop) else {
            continue;
        };
        let original = obj.bbox.area();
        if original <= 0.0 || inter.area() / original < retention_threshold {
            continue;
        }
        let bbox = BoundingBox {
            x1: ((inter.x1 - crop.x1) / cw).clamp(0.0, 1.0),
            y1: ((inter.y1 - crop.y1) / ch).clamp(0.0, 1.0),
            x2: ((inter.x2 - crop.x1) / cw).clamp(0.0, 1.0),
            y2: ((inter.y2 - crop.y1) / ch).clamp(0.0, 1.0),
        };
        if !bbox.is_valid() {
            continue;
        }
        let id = out.objects.len();
        out.objects.push(DescriptionTuple::new(id, bbox, obj.text.clone()));
    }
    Ok(out)
}

fn scaled_dim(pixels: u32, fraction: f64) -> u32 {
    ((f64::from(pixels) * fraction).round() as u32).max(1)
}

#[cfg(test)]
mod tests {
    use num_rational::Ratio;
    use proptest::prelude::*;
    use proptest::strategy::ValueTree;

    use super::*;
    use crate::testutil::arb_box;

    fn bx(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox {
        BoundingBox { x1, y1, x2, y2 }
    }

    fn brute_mask(b: &BoundingBox, grid: &TokenGrid) -> Vec<usize> {
        let mut out = Vec::new();
        for row in 0..grid.height() {
            for col in 0..grid.width() {
                let cx = (col as f64 + 0.5) / grid.width() as f64;
                let cy = (row as f64 + 0.5) / grid.height() as f64;
                if cx >= b.x1 && cx < b.x2 && cy >= b.y1 && cy < b.y2 {
                    out.push(row * grid.width() + col);
                }
            }
        }
        out
    }

    #[test]
    fn inverted_interval_reported() {
        let layout = Layout::new(64, 64).with_object(bx(0.2, 0.2, 0.1, 0.8), "thing");
        let v = validate_layout(&layout);
        assert_eq!(
            v,
            vec![Violation {
                object_id: Some(0),
                rule: Rule::XOrdered
            }]
        );
        assert_eq!(v[0].rule.to_string(), "x1 < x2");
    }

    #[test]
    fn empty_layout_is_valid() {
        assert!(validate_layout(&Layout::new(10, 10)).is_empty());
    }

    #[test]
    fn other_violations() {
        let mut layout = Layout::new(0, 10)
            .with_object(bx(-0.1, 0.0, 0.5, 1.2), "  ")
            .with_object(bx(0.0, 0.0, f64::NAN, 1.0), "ok");
        layout.objects[1].id = 0;
        let rules: Vec<_> = validate_layout(&layout).into_iter().map(|v| v.rule).collect();
        assert!(rules.contains(&Rule::PositiveImageSize));
        assert!(rules.contains(&Rule::X1NonNegative));
        assert!(rules.contains(&Rule::Y2AtMostOne));
        assert!(rules.contains(&Rule::NonEmptyText));
        assert!(rules.contains(&Rule::FiniteCoordinates));
        assert!(rules.contains(&Rule::ContiguousIds));
    }

    #[test]
    fn full_box_covers_grid() {
        let grid = TokenGrid::new(4, 4).unwrap();
        assert_eq!(rasterize_box(&BoundingBox::FULL, &grid), (0..16).collect::<Vec<_>>());
    }

    #[test]
    fn quarter_box() {
        let grid = TokenGrid::new(4, 4).unwrap();
        assert_eq!(rasterize_box(&bx(0.0, 0.0, 0.5, 0.5), &grid), vec![0, 1, 4, 5]);
    }

    #[test]
    fn thin_box_may_be_empty() {
        let grid = TokenGrid::new(4, 4).unwrap();
        assert!(rasterize_box(&bx(0.0, 0.0, 0.1, 1.0), &grid).is_empty());
    }

    #[test]
    fn far_edge_is_closed() {
        assert!(BoundingBox::FULL.contains_point(1.0, 1.0));
        assert!(!bx(0.0, 0.0, 0.5, 0.5).contains_point(0.5, 0.25));
        assert!(bx(0.5, 0.0, 1.0, 0.5).contains_point(0.5, 0.25));
    }

    #[test]
    fn rasterize_matches_brute_force() {
        let mut runner = proptest::test_runner::TestRunner::deterministic();
        let strat = (arb_box(), 1usize..=32, 1usize..=32);
        for _ in 0..500 {
            let (b, h, w) = strat.new_tree(&mut runner).unwrap().current();
            let grid = TokenGrid::new(h, w).unwrap();
            assert_eq!(rasterize_box(&b, &grid), brute_mask(&b, &grid), "{b:?} {h}x{w}");
        }
    }

    #[test]
    fn grid_index_round_trip() {
        let grid = TokenGrid::new(3, 7).unwrap();
        for i in 0..grid.len() {
            let (r, c) = grid.coords(i);
            assert_eq!(grid.index(r, c), i);
        }
        assert!(TokenGrid::new(0, 3).is_err());
    }

    #[test]
    fn area_fractions() {
        assert_eq!(box_area_fraction(&BoundingBox::FULL), 1.0);
        assert_eq!(box_area_fraction(&bx(0.25, 0.25, 0.75, 0.75)), 0.25);
        assert!((box_area_fraction(&bx(0.1, 0.2, 0.4, 0.8)) - 0.18).abs() < 1e-15);
    }

    #[test]
    fn crop_full_image_is_identity() {
        let layout = Layout::new(100, 80)
            .with_caption("c")
            .with_object(bx(0.1, 0.2, 0.4, 0.8), "a")
            .with_object(bx(0.5, 0.5, 1.0, 1.0), "b");
        let out = crop_layout(&layout, &BoundingBox::FULL, DEFAULT_RETENTION).unwrap();
        assert_eq!(out, layout);
    }

    #[test]
    fn crop_drops_outside_object() {
        let layout = Layout::new(100, 100)
            .with_object(bx(0.0, 0.0, 0.2, 0.2), "gone")
            .with_object(bx(0.6, 0.6, 0.9, 0.9), "kept");
        let out = crop_layout(&layout, &bx(0.5, 0.5, 1.0, 1.0), 0.3).unwrap();
        assert_eq!(out.objects.len(), 1);
        assert_eq!(out.objects[0].id, 0);
        assert_eq!(out.objects[0].text, "kept");
        assert_eq!((out.image_width, out.image_height), (50, 50));
    }

    #[test]
    fn crop_zero_area_rejected() {
        let zero = bx(0.5, 0.5, 0.5, 0.9);
        assert!(matches!(
            crop_layout(&Layout::new(10, 10), &zero, 0.3),
            Err(Error::EmptyCrop)
        ));
    }

    /// Exact retention and re-normalized coordinates from integer percent
    /// coordinates, independent of the floating-point path.
    fn rational_crop(
        obj: [i64; 4],
        crop: [i64; 4],
        threshold: Ratio<i64>,
    ) -> Option<[Ratio<i64>; 4]> {
        let ix1 = obj[0].max(crop[0]);
        let iy1 = obj[1].max(crop[1]);
        let ix2 = obj[2].min(crop[2]);
        let iy2 = obj[3].min(crop[3]);
        if ix1 >= ix2 || iy1 >= iy2 {
            return None;
        }
        let kept = Ratio::new((ix2 - ix1) * (iy2 - iy1), (obj[2] - obj[0]) * (obj[3] - obj[1]));
        if kept < threshold {
            return None;
        }
        let (cw, ch) = (crop[2] - crop[0], crop[3] - crop[1]);
        Some([
            Ratio::new(ix1 - crop[0], cw),
            Ratio::new(iy1 - crop[1], ch),
            Ratio::new(ix2 - crop[0], cw),
            Ratio::new(iy2 - crop[1], ch),
        ])
    }

    fn pct(v: [i64; 4]) -> BoundingBox {
        bx(
            v[0] as f64 / 100.0,
            v[1] as f64 / 100.0,
            v[2] as f64 / 100.0,
            v[3] as f64 / 100.0,
        )
    }

    fn ratio_f64(r: Ratio<i64>) -> f64 {
        *r.numer() as f64 / *r.denom() as f64
    }

    #[test]
    fn crop_retention_against_rational_oracle() {
        let obj = [0, 0, 40, 50];
        // 10/40 of the width survives: 25% retained, dropped at 0.3.
        let c25 = [30, 0, 100, 100];
        // 14/40 survives: 35% retained, kept.
        let c35 = [26, 0, 100, 100];
        let threshold = Ratio::new(3, 10);
        assert!(rational_crop(obj, c25, threshold).is_none());
        let expected = rational_crop(obj, c35, threshold).unwrap();

        let layout = Layout::new(100, 100).with_object(pct(obj), "o");
        assert!(crop_layout(&layout, &pct(c25), 0.3).unwrap().objects.is_empty());
        let out = crop_layout(&layout, &pct(c35), 0.3).unwrap();
        assert_eq!(out.objects.len(), 1);
        let got = out.objects[0].bbox;
        for (g, e) in [got.x1, got.y1, got.x2, got.y2].into_iter().zip(expected) {
            assert!((g - ratio_f64(e)).abs() < 1e-12, "{g} vs {e}");
        }
    }

    #[test]
    fn crop_matches_rational_oracle_on_grid_coordinates() {
        let mut runner = proptest::test_runner::TestRunner::deterministic();
        let coord = || (0i64..=100, 0i64..=100).prop_filter("ordered", |(a, b)| a != b);
        let strat = (coord(), coord(), coord(), coord(), 0i64..=10);
        for _ in 0..500 {
            let ((a, b), (c, d), (e, f), (g, h), t) = strat.new_tree(&mut runner).unwrap().current();
            let obj = [a.min(b), c.min(d), a.max(b), c.max(d)];
            let crop = [e.min(f), g.min(h), e.max(f), g.max(h)];
            let threshold = Ratio::new(t, 10);
            let layout = Layout::new(100, 100).with_object(pct(obj), "o");
            let out = crop_layout(&layout, &pct(crop), t as f64 / 10.0).unwrap();
            let expected = rational_crop(obj, crop, threshold);
            // Skip cases within rounding distance of the threshold.
            let inter = pct(obj).intersection(&pct(crop));
            if let Some(i) = inter {
                let kept = i.area() / pct(obj).area();
                if (kept - t as f64 / 10.0).abs() < 1e-9 {
                    continue;
                }
            }
            match expected {
                None => assert!(out.objects.is_empty(), "{obj:?} {crop:?} {t}"),
                Some(e) => {
                    let got = out.objects[0].bbox;
                    for (g, e) in [got.x1, got.y1, got.x2, got.y2].into_iter().zip(e) {
                        assert!((g - ratio_f64(e)).abs() < 1e-12);
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn random_valid_layouts_have_no_violations(boxes in proptest::collection::vec(arb_box(), 0..20)) {
            let mut layout = Layout::new(640, 480);
            for b in boxes {
                layout = layout.with_object(b, "an object");
            }
            prop_assert!(validate_layout(&layout).is_empty());
        }

        #[test]
        fn area_fraction_bounded_and_monotone(outer in arb_box(), t in 0.0..1.0f64, u in 0.0..1.0f64) {
            let a = box_area_fraction(&outer);
            prop_assert!((0.0..=1.0).contains(&a));
            // Shrink toward the center to get a contained box.
            let inner = BoundingBox {
                x1: outer.x1 + outer.width() * t / 2.0,
                y1: outer.y1 + outer.height() * u / 2.0,
                x2: outer.x2 - outer.width() * t / 2.0,
                y2: outer.y2 - outer.height() * u / 2.0,
            };
            prop_assert!(box_area_fraction(&inner) <= a);
        }

        #[test]
        fn half_open_rule_classifies_each_center_once(b in arb_box(), h in 1usize..40, w in 1usize..40) {
            let grid = TokenGrid::new(h, w).unwrap();
            let inside = rasterize_box(&b, &grid);
            let mut marks = vec![0u8; grid.len()];
            for &i in &inside {
                marks[i] += 1;
            }
            for (i, &m) in marks.iter().enumerate() {
                let (x, y) = grid.center(i);
                prop_assert!(m <= 1);
                prop_assert_eq!(m == 1, b.contains_point(x, y));
            }
        }

        #[test]
        fn crop_full_is_idempotent(boxes in proptest::collection::vec(arb_box(), 0..10), t in 0.0..=1.0f64) {
            let mut layout = Layout::new(300, 200);
            for b in boxes {
                layout = layout.with_object(b, "x");
            }
            let once = crop_layout(&layout, &BoundingBox::FULL, t).unwrap();
            let twice = crop_layout(&once, &BoundingBox::FULL, t).unwrap();
            prop_assert_eq!(&once, &layout);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn mask_fraction_converges_to_area(b in arb_box()) {
            let grid = TokenGrid::new(256, 256).unwrap();
            let frac = rasterize_box(&b, &grid).len() as f64 / grid.len() as f64;
            prop_assert!((frac - box_area_fraction(&b)).abs() < 0.01);
        }
    }
}
