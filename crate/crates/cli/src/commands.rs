use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::json;

use rgk_core::cost::{
    benchmark, compare, sweep_csv, two_object_fixture, CostConfig, SweepRow, Variant,
};
use rgk_core::io::embeddings::parse_embeddings;
use rgk_core::io::features::{decode_features, encode_matrix};
use rgk_core::io::generate::{generate_layouts, GenConfig, Vocabulary};
use rgk_core::io::netpbm::parse_ppm;
use rgk_core::io::report::{join_metric_reports, merge_sweeps, parse_metric_report};
use rgk_core::io::{load_layout, to_canonical_string, Strictness};
use rgk_core::metrics::{
    bucket_descriptions, bucket_histogram, crop_clip_score, sam_iou_score, text_stats,
    EmbedderBackend, FileEmbedder, FileSegmenter, FilterBounds, ImageRaster, MetricKind,
    MetricReport, MockEmbedder, RectSegmenter, SegmenterBackend,
};
use rgk_core::rng::fnv1a;
use rgk_core::{regional_forward, reorganize, AttentionState, FeatureMap, Layout, StateConfig, TokenGrid};

use crate::cli::*;
use crate::output::{emit, usage, write_atomic};

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Partition(a) => partition(a),
        Command::Attend(a) => attend(a),
        Command::GenLayouts(a) => gen_layouts(a),
        Command::Flops(a) => flops(a),
        Command::Bench(a) => bench(a),
        Command::Eval(EvalCommand::Cropclip(a)) => eval_metric(MetricKind::CropClip, a),
        Command::Eval(EvalCommand::Samiou(a)) => eval_metric(MetricKind::SamIou, a),
        Command::Eval(EvalCommand::Stats(a)) => eval_stats(a),
        Command::Report(a) => report(a),
    }
}

fn strictness(lenient: bool) -> Strictness {
    if lenient {
        Strictness::Lenient
    } else {
        Strictness::Strict
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_layout(path: &Path, lenient: bool) -> Result<Layout> {
    let text = read_text(path)?;
    load_layout(&text, strictness(lenient)).with_context(|| format!("loading {}", path.display()))
}

fn require_seed(seed: Option<u64>, command: &str) -> Result<u64> {
    seed.ok_or_else(|| usage(format!("{command} needs --seed or RGK_SEED")))
}

/// `(sample id, layout)` for every `*.json` in `dir`, sorted by file name.
fn read_layout_dir(dir: &Path, lenient: bool) -> Result<Vec<(String, Layout)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            Ok((id, read_layout(&p, lenient)?))
        })
        .collect()
}

fn partition(a: PartitionArgs) -> Result<()> {
    let layout = read_layout(&a.input.layout, a.input.lenient)?;
    let grid = TokenGrid::new(a.grid.0, a.grid.1)?;
    let partition = reorganize(&layout, &grid);
    emit(a.out.as_deref(), to_canonical_string(&partition)?.as_bytes())
}

fn attend(a: AttendArgs) -> Result<()> {
    let seed = require_seed(a.seed, "attend")?;
    let layout = read_layout(&a.input.layout, a.input.lenient)?;
    let features = match &a.features {
        Some(path) => {
            let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            decode_features(&bytes).with_context(|| format!("decoding {}", path.display()))?
        }
        None => FeatureMap::random(TokenGrid::new(a.grid.0, a.grid.1)?, a.channels, seed)?,
    };
    let config = StateConfig {
        channels: features.channels(),
        attn_dim: a.attn_dim,
        heads: a.heads,
        seed,
        ..StateConfig::default()
    };
    let mut state = AttentionState::new(config).map_err(|e| usage(e.to_string()))?;
    if !a.zero_init {
        state.randomize_output(seed);
    }
    let out = regional_forward(&features, &layout, &state, a.mode)?;
    let grid = features.grid();
    let bytes = encode_matrix(grid, &out.output)?;
    let max_abs = out.output.as_slice().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diagnostics = json!({
        "mode": a.mode,
        "seed": seed,
        "grid": [grid.height(), grid.width()],
        "channels": config.channels,
        "attn_dim": config.attn_dim,
        "heads": config.heads,
        "zero_init": a.zero_init,
        "regions": out.regions,
        "complete": out.row_writes.iter().all(|&w| w == 1),
        "output_max_abs": max_abs,
        "output_fnv1a": format!("{:016x}", fnv1a(&bytes)),
    });
    write_atomic(&a.out, &bytes)?;
    let diagnostics_path = a.diagnostics.unwrap_or_else(|| a.out.with_extension("json"));
    write_atomic(&diagnostics_path, to_canonical_string(&diagnostics)?.as_bytes())
}

fn gen_layouts(a: GenArgs) -> Result<()> {
    let seed = require_seed(a.seed, "gen-layouts")?;
    let vocab = match &a.vocab {
        Some(p) => Vocabulary::parse(&read_text(p)?)?,
        None => Vocabulary::bundled(),
    };
    let to_u32 = |v: usize| u32::try_from(v).map_err(|_| usage(format!("image size {v} too large")));
    let config = GenConfig {
        seed,
        min_objects: a.min_objects,
        max_objects: a.max_objects,
        overlap_bias: a.overlap_bias,
        image_size: [to_u32(a.image_size.0)?, to_u32(a.image_size.1)?],
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    let layouts = generate_layouts(a.count, &config, &vocab)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    for g in &layouts {
        write_atomic(&a.out_dir.join(format!("{}.json", g.id)), to_canonical_string(&g.file)?.as_bytes())?;
    }
    log::info!("wrote {} layouts to {}", layouts.len(), a.out_dir.display());
    Ok(())
}

fn cost_layout(c: &CostArgs) -> Result<Layout> {
    match &c.layout {
        Some(p) => read_layout(p, c.lenient),
        None => Ok(two_object_fixture()),
    }
}

fn cost_config(c: &CostArgs, layout: &Layout, variant: Variant, grid: (usize, usize)) -> Result<CostConfig> {
    let grid = TokenGrid::new(grid.0, grid.1)?;
    let config = CostConfig::from_layout(variant, layout, &grid, c.channels, c.attn_dim, c.heads);
    config.validate().map_err(|e| usage(e.to_string()))?;
    Ok(config)
}

fn flops(a: FlopsArgs) -> Result<()> {
    let layout = cost_layout(&a.cost)?;
    let text = if a.sweep {
        let mut rows = Vec::new();
        for side in [16, 32, 64] {
            for v in Variant::ALL {
                rows.push(SweepRow::new(&cost_config(&a.cost, &layout, v, (side, side))?, None)?);
            }
        }
        sweep_csv(&rows)?
    } else {
        let config = cost_config(&a.cost, &layout, Variant::RegionalCross, a.grid)?;
        let comparison = compare(&config)?;
        to_canonical_string(&json!({ "config": config, "comparison": comparison }))?
    };
    emit(a.cost.out.as_deref(), text.as_bytes())
}

fn bench(a: BenchArgs) -> Result<()> {
    let seed = require_seed(a.seed, "bench")?;
    if a.reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    let layout = cost_layout(&a.cost)?;
    let variants: Vec<Variant> = match a.variant {
        Some(v) => vec![v.into()],
        None => Variant::ALL.to_vec(),
    };
    let mut rows = Vec::new();
    for &side in &a.sides {
        for &v in &variants {
            let config = cost_config(&a.cost, &layout, v, (side, side))?;
            let stats = benchmark(&config, a.reps, seed)?;
            log::info!("{} N={} median {:.6}s", v.as_str(), config.n_tokens, stats.median_s);
            rows.push(SweepRow::new(&config, Some(stats.median_s))?);
        }
    }
    emit(a.cost.out.as_deref(), sweep_csv(&rows)?.as_bytes())
}

fn load_image(images: Option<&Path>, id: &str, layout: &Layout) -> Result<ImageRaster> {
    if let Some(dir) = images {
        let path = dir.join(format!("{id}.ppm"));
        if path.exists() {
            let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
            return parse_ppm(&bytes).with_context(|| format!("decoding {}", path.display()));
        }
        log::warn!("no image at {}, scoring geometry only", path.display());
    }
    Ok(ImageRaster::external(id, layout.image_width, layout.image_height)?)
}

fn eval_metric(kind: MetricKind, a: MetricArgs) -> Result<()> {
    let bounds = FilterBounds::new(a.lower, a.upper).map_err(|e| usage(e.to_string()))?;
    let samples = read_layout_dir(&a.layouts, a.lenient)?;
    let embedder: Option<Box<dyn EmbedderBackend>> = match (kind, a.backend) {
        (MetricKind::CropClip, BackendArg::Mock) => Some(Box::new(MockEmbedder::new(64, a.seed)?)),
        (MetricKind::CropClip, BackendArg::Files) => {
            let path = a.embeddings.as_ref().ok_or_else(|| usage("--backend files needs --embeddings"))?;
            let table = parse_embeddings(&read_text(path)?).with_context(|| format!("loading {}", path.display()))?;
            Some(Box::new(FileEmbedder::new(table)?))
        }
        _ => None,
    };
    let segmenter: Option<Box<dyn SegmenterBackend>> = match (kind, a.backend) {
        (MetricKind::SamIou, BackendArg::Mock) => Some(Box::new(RectSegmenter)),
        (MetricKind::SamIou, BackendArg::Files) => {
            let dir = a.masks.as_ref().ok_or_else(|| usage("--backend files needs --masks"))?;
            Some(Box::new(FileSegmenter::new(dir)))
        }
        _ => None,
    };
    let mut reports = Vec::with_capacity(samples.len());
    for (id, layout) in &samples {
        let image = load_image(a.images.as_deref(), id, layout)?;
        reports.push(match (&embedder, &segmenter) {
            (Some(e), _) => crop_clip_score(id, &image, layout, e.as_ref(), &bounds),
            (_, Some(s)) => sam_iou_score(id, &image, layout, s.as_ref(), &bounds),
            _ => unreachable!("one backend per metric"),
        });
    }
    let report = MetricReport::new(kind, reports);
    if let Some(path) = &a.csv {
        write_atomic(path, object_csv(&report)?.as_bytes())?;
    }
    emit(a.out.as_deref(), to_canonical_string(&report)?.as_bytes())
}

fn object_csv(report: &MetricReport) -> Result<String> {
    let mut w = csv_writer();
    w.write_record(["sample_id", "object_id", "label", "score", "filtered", "reason"])?;
    for s in &report.samples {
        for o in &s.objects {
            w.write_record([
                s.sample_id.clone(),
                o.object_id.to_string(),
                o.label.clone(),
                o.score.map(rgk_core::io::format_sig9).unwrap_or_default(),
                o.filtered.to_string(),
                o.reason.clone().unwrap_or_default(),
            ])?;
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn eval_stats(a: StatsArgs) -> Result<()> {
    let samples = read_layout_dir(&a.layouts, a.lenient)?;
    let labels: Vec<&str> = samples
        .iter()
        .flat_map(|(_, l)| l.objects.iter().map(|o| o.text.as_str()))
        .collect();
    let histogram: Vec<_> = bucket_histogram(&bucket_descriptions(&labels))
        .into_iter()
        .map(|((c, l), count)| json!({ "complexity": c, "length": l, "count": count }))
        .collect();
    let out = json!({
        "layouts": samples.len(),
        "stats": text_stats(&labels),
        "buckets": histogram,
    });
    emit(a.out.as_deref(), to_canonical_string(&out)?.as_bytes())
}

fn report(a: ReportArgs) -> Result<()> {
    let text = if !a.metrics.is_empty() {
        let reports = a
            .metrics
            .iter()
            .map(|p| parse_metric_report(&read_text(p)?).with_context(|| format!("loading {}", p.display())))
            .collect::<Result<Vec<_>>>()?;
        join_metric_reports(&reports)?
    } else if !a.sweeps.is_empty() {
        let texts = a.sweeps.iter().map(|p| read_text(p)).collect::<Result<Vec<_>>>()?;
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        merge_sweeps(&refs)?
    } else {
        return Err(usage("report needs --metric or --sweep inputs"));
    };
    emit(a.out.as_deref(), text.as_bytes())
}
