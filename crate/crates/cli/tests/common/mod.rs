#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::Rng;
use rgk_core::{BoundingBox, Layout};

pub const WORDS: [&str; 12] = [
    "red", "apple", "green", "bowl", "old", "wooden", "chair", "cat", "sleeps", "under", "a", "lamp",
];

/// Boxes anywhere, from sub-token slivers to the full image.
pub fn random_box(rng: &mut impl Rng) -> BoundingBox {
    loop {
        let (a, b): (f64, f64) = (rng.random(), rng.random());
        let (c, d): (f64, f64) = (rng.random(), rng.random());
        if let Ok(bx) = BoundingBox::new(a.min(b), c.min(d), a.max(b), c.max(d)) {
            return bx;
        }
    }
}

pub fn random_text(rng: &mut impl Rng) -> String {
    let n = rng.random_range(1..=5);
    (0..n).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

pub fn random_layout(rng: &mut impl Rng, min_objects: usize, max_objects: usize) -> Layout {
    let n = rng.random_range(min_objects..=max_objects);
    (0..n).fold(Layout::new(512, 512), |l, _| {
        let b = random_box(rng);
        l.with_object(b, random_text(rng))
    })
}

/// The overlapping two-box layout: apple top-left, bowl bottom-right.
pub fn two_box_layout() -> Layout {
    Layout::new(512, 512)
        .with_object(BoundingBox::new(0.125, 0.125, 0.625, 0.625).unwrap(), "a red apple")
        .with_object(BoundingBox::new(0.375, 0.375, 0.875, 0.875).unwrap(), "a green bowl")
}

pub const TWO_BOX_JSON: &str = include_str!("../golden/two_box.json");

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn rgk(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rgk"))
        .args(args)
        .current_dir(dir)
        .env_remove("RGK_SEED")
        .output()
        .expect("spawn rgk")
}

pub fn rgk_ok(args: &[&str], dir: &Path) -> Output {
    let out = rgk(args, dir);
    assert!(
        out.status.success(),
        "rgk {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}
