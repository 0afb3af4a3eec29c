//! Replays the checked-in fuzz corpus seeds through the parsers so the seeds
//! stay valid inputs as the formats evolve.

use std::path::PathBuf;

use rgk_core::cost::{parse_sweep_csv, sweep_csv};
use rgk_core::io::embeddings::parse_embeddings;
use rgk_core::io::features::{decode_features, encode_features};
use rgk_core::io::netpbm::{parse_pgm_mask, parse_ppm, write_pgm};
use rgk_core::io::report::parse_metric_report;
use rgk_core::io::{load_layout, Strictness};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.display().to_string(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).unwrap()
}

#[test]
fn layout_seeds_load_leniently() {
    for (name, bytes) in seeds("layout_json") {
        load_layout(text(&bytes), Strictness::Lenient).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn binary_seeds_round_trip() {
    for (name, bytes) in seeds("feature_file") {
        let fm = decode_features(&bytes).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(encode_features(&fm).unwrap(), bytes, "{name}");
    }
    for (name, bytes) in seeds("pgm_mask") {
        let mask = parse_pgm_mask(&bytes).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(parse_pgm_mask(&write_pgm(&mask)).unwrap(), mask, "{name}");
    }
    for (name, bytes) in seeds("ppm_image") {
        parse_ppm(&bytes).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn text_seeds_parse() {
    for (name, bytes) in seeds("embeddings_json") {
        parse_embeddings(text(&bytes)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    for (name, bytes) in seeds("metric_report") {
        parse_metric_report(text(&bytes)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    for (name, bytes) in seeds("sweep_csv") {
        let rows = parse_sweep_csv(text(&bytes)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(parse_sweep_csv(&sweep_csv(&rows).unwrap()).unwrap(), rows);
    }
}

/// Cheap stand-in for a fuzzing session: random byte edits and truncations
/// of every seed must produce `Ok` or `Err`, never a panic.
#[test]
fn mutated_seeds_never_panic() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let targets = [
        "layout_json",
        "feature_file",
        "pgm_mask",
        "ppm_image",
        "embeddings_json",
        "metric_report",
        "sweep_csv",
    ];
    for target in targets {
        for (_, seed) in seeds(target) {
            for _ in 0..500 {
                let mut b = seed.clone();
                for _ in 0..rng.random_range(1..4) {
                    let i = rng.random_range(0..b.len().max(1));
                    match rng.random_range(0..3) {
                        0 if !b.is_empty() => b[i] = rng.random(),
                        1 => b.truncate(i),
                        _ => b.insert(i.min(b.len()), rng.random()),
                    }
                }
                let s = String::from_utf8_lossy(&b);
                match target {
                    "layout_json" => drop(load_layout(&s, Strictness::Strict)),
                    "feature_file" => drop(decode_features(&b)),
                    "pgm_mask" => drop(parse_pgm_mask(&b)),
                    "ppm_image" => drop(parse_ppm(&b)),
                    "embeddings_json" => drop(parse_embeddings(&s)),
                    "metric_report" => drop(parse_metric_report(&s)),
                    _ => drop(parse_sweep_csv(&s)),
                }
            }
        }
    }
}
