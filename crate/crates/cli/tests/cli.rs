mod common;

use std::path::Path;

use rgk_core::io::features::decode_features;
use serde_json::Value;

use common::*;

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("two_box.json"), TWO_BOX_JSON).unwrap();
    dir
}

fn code(args: &[&str], dir: &Path) -> i32 {
    rgk(args, dir).status.code().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn exit_codes() {
    let dir = setup();
    let d = dir.path();
    assert_eq!(code(&["partition", "--layout", "missing.json"], d), 1);
    std::fs::write(d.join("bad.json"), r#"{"image_size":[64,64],"objects":[{"bbox":[10,10,5,5],"label":"x"}]}"#).unwrap();
    assert_eq!(code(&["partition", "--layout", "bad.json"], d), 2);
    std::fs::write(d.join("extra.json"), r#"{"image_size":[64,64],"colour":1}"#).unwrap();
    assert_eq!(code(&["partition", "--layout", "extra.json"], d), 2);
    assert_eq!(code(&["partition", "--layout", "extra.json", "--lenient"], d), 0);
    assert_eq!(code(&["attend", "--layout", "two_box.json", "--out", "o.bin"], d), 1);
    assert_eq!(code(&["partition", "--grid", "0x4", "--layout", "two_box.json"], d), 1);
    assert_eq!(code(&[], d), 1);
    assert_eq!(code(&["--help"], d), 0);
}

#[test]
fn seed_can_come_from_environment() {
    let dir = setup();
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_rgk"))
        .args(["attend", "--layout", "two_box.json", "--grid", "4x4", "--out", "o.bin"])
        .current_dir(dir.path())
        .env("RGK_SEED", "3")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("o.bin").exists());
    assert_eq!(read_json(&dir.path().join("o.json"))["seed"], 3);
}

#[test]
fn duplicate_sample_ids_in_report_are_data_errors() {
    let dir = setup();
    let d = dir.path();
    rgk_ok(&["gen-layouts", "--count", "3", "--seed", "1", "--out-dir", "c"], d);
    rgk_ok(&["eval", "samiou", "--layouts", "c", "--out", "r.json"], d);
    let mut report = read_json(&d.join("r.json"));
    let samples = report["samples"].as_array_mut().unwrap();
    let first = samples[0].clone();
    samples.push(first);
    std::fs::write(d.join("dup.json"), serde_json::to_vec(&report).unwrap()).unwrap();
    let c = code(&["report", "--metric", "dup.json", "--out", "j.csv"], d);
    assert_eq!(c, 2);
    assert!(!d.join("j.csv").exists());
}

#[test]
fn zero_count_writes_nothing() {
    let dir = setup();
    rgk_ok(&["gen-layouts", "--count", "0", "--seed", "1", "--out-dir", "c"], dir.path());
    let n = std::fs::read_dir(dir.path().join("c")).map_or(0, |r| r.count());
    assert_eq!(n, 0);
}

#[test]
fn generated_layouts_round_trip_through_partition() {
    let dir = setup();
    let d = dir.path();
    rgk_ok(&["gen-layouts", "--count", "4", "--seed", "9", "--out-dir", "c"], d);
    for i in 0..4 {
        let name = format!("c/sample_{i:05}.json");
        assert!(d.join(&name).exists(), "{name}");
        rgk_ok(&["partition", "--layout", &name, "--grid", "8x8"], d);
    }
}

#[test]
fn empty_layout_is_one_background_region() {
    let dir = setup();
    let d = dir.path();
    std::fs::write(d.join("empty.json"), r#"{"image_size":[64,64]}"#).unwrap();
    let out = rgk_ok(&["partition", "--layout", "empty.json", "--grid", "4x4"], d);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let regions = v["regions"].as_array().unwrap();
    assert_eq!(regions.len(), 1);
    assert_eq!(regions[0]["covering_set"], serde_json::json!([]));
    assert_eq!(regions[0]["tokens"].as_array().unwrap().len(), 16);
}

#[test]
fn fixture_partition_has_four_regions() {
    let dir = setup();
    let out = rgk_ok(&["partition", "--layout", "two_box.json", "--grid", "8x8"], dir.path());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let sets: Vec<Value> = v["regions"].as_array().unwrap().iter().map(|r| r["covering_set"].clone()).collect();
    assert_eq!(sets, serde_json::json!([[0], [0, 1], [1], []]).as_array().unwrap().clone());
}

#[test]
fn averaging_mode_only_changes_overlap_tokens() {
    let dir = setup();
    let d = dir.path();
    let grid = "8x8";
    for mode in ["full", "no_reorg_avg"] {
        rgk_ok(
            &["attend", "--layout", "two_box.json", "--grid", grid, "--seed", "4", "--mode", mode, "--out", &format!("{mode}.bin")],
            d,
        );
    }
    let full = decode_features(&std::fs::read(d.join("full.bin")).unwrap()).unwrap();
    let avg = decode_features(&std::fs::read(d.join("no_reorg_avg.bin")).unwrap()).unwrap();
    let part: Value =
        serde_json::from_slice(&rgk_ok(&["partition", "--layout", "two_box.json", "--grid", grid], d).stdout).unwrap();
    let overlap: Vec<usize> = part["regions"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["covering_set"].as_array().unwrap().len() > 1)
        .flat_map(|r| r["tokens"].as_array().unwrap().iter().map(|t| t.as_u64().unwrap() as usize))
        .collect();
    assert!(!overlap.is_empty());
    for t in 0..64 {
        let same = full.data().row(t) == avg.data().row(t);
        assert_eq!(same, !overlap.contains(&t), "token {t}");
    }
}

#[test]
fn help_json_lists_every_command() {
    let dir = setup();
    let v: Value = serde_json::from_slice(&rgk_ok(&["--help-json"], dir.path()).stdout).unwrap();
    let text = v.to_string();
    for cmd in ["partition", "attend", "gen-layouts", "flops", "bench", "eval", "report"] {
        assert!(text.contains(cmd), "{cmd}");
    }
}

#[cfg(unix)]
#[test]
fn outputs_are_world_readable() {
    use std::os::unix::fs::PermissionsExt;
    let dir = setup();
    rgk_ok(&["flops", "--out", "f.json"], dir.path());
    let mode = std::fs::metadata(dir.path().join("f.json")).unwrap().permissions().mode();
    assert_eq!(mode & 0o777, 0o644);
}
