//! Generators shared by unit tests.

use proptest::prelude::*;
use rand::Rng;

use crate::layout::{BoundingBox, Layout};

pub fn arb_box() -> impl Strategy<Value = BoundingBox> {
    (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64).prop_filter_map(
        "degenerate",
        |(a, b, c, d)| BoundingBox::new(a.min(c), b.min(d), a.max(c), b.max(d)).ok(),
    )
}

pub fn arb_layout(max_objects: usize) -> impl Strategy<Value = Layout> {
    proptest::collection::vec(arb_box(), 0..=max_objects).prop_map(|boxes| {
        boxes
            .into_iter()
            .fold(Layout::new(256, 256), |l, b| l.with_object(b, "o"))
    })
}

pub fn random_box(rng: &mut impl Rng) -> Option<BoundingBox> {
    let (a, b): (f64, f64) = (rng.random(), rng.random());
    let (c, d): (f64, f64) = (rng.random(), rng.random());
    BoundingBox::new(a.min(b), c.min(d), a.max(b), c.max(d)).ok()
}

pub fn random_layout(rng: &mut impl Rng, max_objects: usize) -> Layout {
    const WORDS: [&str; 8] = ["red", "apple", "green", "bowl", "old", "wooden", "chair", "cat"];
    let count = rng.random_range(0..=max_objects);
    let mut layout = Layout::new(512, 512);
    for _ in 0..count {
        if let Some(b) = random_box(rng) {
            let len = rng.random_range(1..=4);
            let text: Vec<&str> = (0..len).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect();
            layout = layout.with_object(b, text.join(" "));
        }
    }
    layout
}

/// Two overlapping boxes: one overlap, two single-object parts, background.
pub fn two_box_layout() -> Layout {
    Layout::new(512, 512)
        .with_object(BoundingBox::new(0.125, 0.125, 0.625, 0.625).unwrap(), "a red apple")
        .with_object(BoundingBox::new(0.375, 0.375, 0.875, 0.875).unwrap(), "a green bowl")
}
