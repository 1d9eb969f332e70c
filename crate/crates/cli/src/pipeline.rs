//! Per-batch orchestration: flatness, detection, Agent-1 refinement, fusion,
//! candidate generation and Agent-2 ranking, with all artifacts on disk.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use dropzone_core::agents::{
    build_agent1_request, consult_agent1, rank_zones, refine_vocabulary, Agent1Mode, Agent1Outcome, AgentRole,
    CallContext, PadSafety, Ranking,
};
use dropzone_core::flatness::{flatness_mask, gradient_unsafe, normalize_depth};
use dropzone_core::fusion::{annotate_candidates, fuse_map, render_overlay};
use dropzone_core::imgcore::save_png;
use dropzone_core::semantic::{detect_and_binarize, BBox, FrameRef};
use dropzone_core::zones::{candidate_radius, candidates_json, generate_candidates, no_candidate_artifact};
use dropzone_core::{BinaryMask, CandidateZone, PromptVocabulary, Provenance, RgbImage, SafetyMap};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backends::Backends;
use crate::config::RunConfig;
use crate::dataset::{load_depth, load_rgb, FrameBatch};

pub const RESULT_FILE: &str = "result.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const FINAL_MASK_FILE: &str = "final_mask.png";

/// Everything a batch run decided. Written as `result.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub batch_id: String,
    pub run: usize,
    pub frame_ids: Vec<String>,
    pub decision_frame: String,
    pub preference: String,
    pub initial_vocabulary: PromptVocabulary,
    pub final_vocabulary: PromptVocabulary,
    /// One entry per refinement round.
    pub agent1: Vec<Agent1Outcome>,
    pub pad_safety: PadSafety,
    pub provenance: Provenance,
    pub hpad: Option<BBox>,
    pub radius: f64,
    pub candidates: Vec<CandidateZone>,
    /// `None` when no circle was feasible.
    pub ranking: Option<Ranking>,
}

/// Wall-clock data, kept apart from the deterministic artifacts.
#[derive(Debug, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub batch_id: String,
    pub run: usize,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub stage_ms: BTreeMap<String, f64>,
    pub artifacts: Vec<String>,
    pub error: Option<String>,
}

fn unix_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

struct Stopwatch {
    last: Instant,
    stages: BTreeMap<String, f64>,
}

impl Stopwatch {
    fn new() -> Self {
        Self {
            last: Instant::now(),
            stages: BTreeMap::new(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        *self.stages.entry(stage.to_string()).or_default() += (now - self.last).as_secs_f64() * 1e3;
        self.last = now;
    }
}

/// `<out>/<batch>` for single-run configs, `<out>/<batch>/run_<k>` otherwise.
pub fn batch_dir(out: &Path, batch_id: &str, run: usize, runs: usize) -> PathBuf {
    if runs > 1 {
        out.join(batch_id).join(format!("run_{run}"))
    } else {
        out.join(batch_id)
    }
}

fn write_text(dir: &Path, name: &str, text: &str, written: &mut Vec<String>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    written.push(name.to_string());
    Ok(())
}

fn write_image<P, C>(dir: &Path, name: &str, img: &image::ImageBuffer<P, C>, written: &mut Vec<String>) -> Result<()>
where
    P: image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    save_png(img, &dir.join(name))?;
    written.push(name.to_string());
    Ok(())
}

fn pretty(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("results serialize to JSON");
    s.push('\n');
    s
}

/// Runs one batch and writes its artifacts into `dir`. On failure the
/// manifest records the error next to whatever was already written.
pub fn run_batch(
    batch: &FrameBatch,
    cfg: &RunConfig,
    backends: &Backends,
    preference: &str,
    run: usize,
    dir: &Path,
) -> Result<BatchResult> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut manifest = Manifest {
        batch_id: batch.id.clone(),
        run,
        started_unix_ms: unix_ms(),
        ..Manifest::default()
    };
    let mut watch = Stopwatch::new();
    let outcome = run_batch_inner(batch, cfg, backends, preference, run, dir, &mut watch, &mut manifest.artifacts);
    manifest.stage_ms = watch.stages;
    manifest.finished_unix_ms = unix_ms();
    if let Err(e) = &outcome {
        manifest.error = Some(format!("{e:#}"));
    }
    fs::write(dir.join(MANIFEST_FILE), pretty(&manifest))
        .with_context(|| format!("writing manifest in {}", dir.display()))?;
    outcome
}

#[allow(clippy::too_many_arguments)]
fn run_batch_inner(
    batch: &FrameBatch,
    cfg: &RunConfig,
    backends: &Backends,
    preference: &str,
    run: usize,
    dir: &Path,
    watch: &mut Stopwatch,
    written: &mut Vec<String>,
) -> Result<BatchResult> {
    let rgb: Vec<RgbImage> = batch.frames.iter().map(|f| load_rgb(&f.rgb)).collect::<Result<_>>()?;
    let geometric: Vec<(image::GrayImage, BinaryMask)> = batch
        .frames
        .par_iter()
        .zip(&rgb)
        .map(|(f, img)| {
            let depth = load_depth(&f.depth, img.width() as usize, img.height() as usize)?;
            let norm = normalize_depth(&depth, cfg.flatness.epsilon)?;
            let flat = flatness_mask(&norm, &cfg.flatness)?;
            Ok((norm.to_gray_image(), flat))
        })
        .collect::<Result<_>>()?;
    watch.lap("flatness");

    let decision = batch.decision_frame();
    let frame = FrameRef {
        id: &decision.id,
        image: rgb.last().expect("five frames"),
    };
    let depth_images: Vec<image::GrayImage> = geometric.iter().map(|g| g.0.clone()).collect();
    let flat = &geometric.last().expect("five frames").1;
    let geo_unsafe = gradient_unsafe(flat);
    write_image(dir, "flat_mask.png", &flat.to_gray_image(), written)?;

    let initial_vocabulary = cfg.vocabulary.clone();
    let semantic = detect_and_binarize(&backends.detection, frame, &initial_vocabulary, cfg.theta_d)?;
    let mut map = fuse_map(&semantic, &geo_unsafe, Provenance::Initial)?;
    let mut semantic_final = semantic;
    let overlay_initial = render_overlay(frame.image, &map)?;
    write_image(dir, "overlay_initial.png", &overlay_initial, written)?;
    watch.lap("initial_detection");

    let mut vocab = initial_vocabulary.clone();
    let mut agent1 = Vec::new();
    let mut overlay = overlay_initial;
    let mut pad_safety = PadSafety::Unknown;
    for iteration in 0..cfg.refinement_iterations {
        let request = build_agent1_request(&rgb, &depth_images, &overlay, &vocab, cfg.agent1_mode)?;
        let ctx = CallContext::new(&batch.id, AgentRole::Agent1, run).with_iteration(iteration);
        let outcome = consult_agent1(&backends.vlm, &ctx, &request);
        if let Some(v) = &outcome.verdict {
            pad_safety = v.landing_pad_safe;
            if pad_safety == PadSafety::Unknown && cfg.agent1_mode == Agent1Mode::MultiFrame {
                log::warn!("{}: multi-frame verdict left pad safety undecided", batch.id);
            }
        }
        vocab = refine_vocabulary(&vocab, outcome.verdict.as_ref());
        agent1.push(outcome);
        watch.lap("agent1");

        semantic_final = detect_and_binarize(&backends.detection, frame, &vocab, cfg.theta_d)?;
        map = fuse_map(&semantic_final, &geo_unsafe, Provenance::Refined)?;
        overlay = render_overlay(frame.image, &map)?;
        watch.lap("refined_detection");
    }
    write_image(dir, "semantic_mask.png", &semantic_final.to_gray_image(), written)?;
    write_image(dir, FINAL_MASK_FILE, &map.unsafe_mask.to_gray_image(), written)?;
    write_image(dir, "overlay_final.png", &overlay, written)?;

    let hpad = match backends.detection.locate_hpad(frame) {
        Ok(b) => b,
        Err(e) => {
            log::warn!("{}: pad localization failed, using the default radius: {e}", batch.id);
            None
        }
    };
    let radius = candidate_radius(&cfg.zones, hpad)?;
    let candidates = generate_candidates(&map, &cfg.zones, hpad)?;
    let (w, h) = map.dims();
    write_text(dir, &format!("candidates_{}.json", decision.id), &candidates_json(&candidates, w, h), written)?;
    watch.lap("candidates");

    let ranking = if candidates.is_empty() {
        log::info!("{}: no feasible drop zone", batch.id);
        no_candidate_artifact(&map, frame.image, dir)?;
        written.push(dropzone_core::zones::NO_CANDIDATE_OVERLAY.to_string());
        None
    } else {
        let circles: Vec<_> = candidates.iter().map(|c| (c.index, c.center, c.radius)).collect();
        let annotated = annotate_candidates(&overlay, &circles, &[]);
        let ctx = CallContext::new(&batch.id, AgentRole::Agent2, run);
        let ranking = rank_zones(&backends.vlm, &ctx, &candidates, preference, &rgb, &annotated, cfg.zones.top_n)?;
        let chosen: Vec<usize> = ranking.zones.iter().map(|z| z.index).collect();
        write_image(dir, "ranked_on_overlay.png", &annotate_candidates(&overlay, &circles, &chosen), written)?;
        Some(ranking)
    };
    watch.lap("agent2");

    let result = BatchResult {
        batch_id: batch.id.clone(),
        run,
        frame_ids: batch.frames.iter().map(|f| f.id.clone()).collect(),
        decision_frame: decision.id.clone(),
        preference: preference.to_string(),
        initial_vocabulary,
        final_vocabulary: vocab,
        agent1,
        pad_safety,
        provenance: map.provenance,
        hpad,
        radius,
        candidates,
        ranking,
    };
    let verdict = serde_json::json!({
        "pad_safety": result.pad_safety,
        "verdict": result.agent1.last().and_then(|o| o.verdict.clone()),
        "final_vocabulary": result.final_vocabulary,
    });
    write_text(dir, "verdict.json", &pretty(&verdict), written)?;
    write_text(dir, RESULT_FILE, &pretty(&result), written)?;
    Ok(result)
}

/// A failed batch run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunFailure {
    pub batch_id: String,
    pub run: usize,
    pub error: String,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct RunSummary {
    pub results: Vec<BatchResult>,
    pub failures: Vec<RunFailure>,
}

/// Runs every batch `cfg.runs` times, up to `cfg.workers` jobs at once.
/// Results come back in (batch, run) order regardless of scheduling.
pub fn run_dataset(
    batches: &[FrameBatch],
    cfg: &RunConfig,
    backends: &Backends,
    preferences: &BTreeMap<String, String>,
    out: &Path,
) -> Result<RunSummary> {
    let jobs: Vec<(&FrameBatch, usize)> = batches.iter().flat_map(|b| (0..cfg.runs).map(move |r| (b, r))).collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
    let outcomes: Vec<Result<BatchResult>> = pool.install(|| {
        jobs.par_iter()
            .map(|(batch, run)| {
                let pref = preferences.get(&batch.id).unwrap_or(&cfg.default_preference);
                let dir = batch_dir(out, &batch.id, *run, cfg.runs);
                run_batch(batch, cfg, backends, pref, *run, &dir)
            })
            .collect()
    });
    let mut summary = RunSummary::default();
    for ((batch, run), outcome) in jobs.iter().zip(outcomes) {
        match outcome {
            Ok(r) => summary.results.push(r),
            Err(e) => {
                log::error!("{} run {run} failed: {e:#}", batch.id);
                summary.failures.push(RunFailure {
                    batch_id: batch.id.clone(),
                    run: *run,
                    error: format!("{e:#}"),
                });
            }
        }
    }
    Ok(summary)
}

/// Reads back every `result.json` below `out`, sorted by (batch, run).
pub fn load_results(out: &Path) -> Result<Vec<(BatchResult, PathBuf)>> {
    let mut found = Vec::new();
    let mut stack = vec![out.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if dir == out => return Err(e).with_context(|| format!("reading {}", out.display())),
            Err(_) => continue,
        };
        for entry in entries {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n == RESULT_FILE) {
                let text = fs::read_to_string(&path)?;
                let result: BatchResult =
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                found.push((result, path.parent().expect("file has a parent").to_path_buf()));
            }
        }
    }
    found.sort_by(|a, b| (&a.0.batch_id, a.0.run).cmp(&(&b.0.batch_id, b.0.run)));
    Ok(found)
}

/// The fused unsafe mask a run wrote.
pub fn load_final_map(dir: &Path, provenance: Provenance) -> Result<SafetyMap> {
    Ok(SafetyMap::new(crate::dataset::load_mask(&dir.join(FINAL_MASK_FILE))?, provenance))
}
