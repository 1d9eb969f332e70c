//! Scores finished runs against ground truth: safety-map pixel metrics,
//! drop-zone metrics across feasibility thresholds, pooled curves and the
//! pad-safety success rate.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use dropzone_core::agents::pad_safety_success_rate;
use dropzone_core::metrics::{
    aggregate_stochastic, confusion, curve_auc, pixel_metrics, pooled_curves, pr_csv, roc_csv, threshold_sweep,
    Curves, MetricReport, ZoneSample, PIXEL_METRIC_NAMES,
};
use dropzone_core::zones::{safe_ratio, score_lattice};
use serde::{Deserialize, Serialize};

use crate::dataset::{load_mask, load_pad_truth};
use crate::pipeline::{load_final_map, load_results};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaReport {
    pub eta: f64,
    pub report: MetricReport,
    /// Area under the pooled ROC curve.
    pub pooled_roc_auc: Option<f64>,
    pub curve_note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub pixel: MetricReport,
    pub zones: Vec<EtaReport>,
    pub success_rate: Option<f64>,
    /// Decision frames without a ground-truth mask.
    pub frames_without_gt: Vec<String>,
    /// `<batch>/run_<k>` entries whose final map had no feasible circle.
    pub runs_without_candidates: Vec<String>,
    pub zone_samples: usize,
}

impl EvalReport {
    pub fn to_table(&self) -> String {
        let mut s = String::from("Safety map\n");
        s.push_str(&self.pixel.to_table());
        for z in &self.zones {
            let _ = writeln!(s, "\nDrop zones at eta = {:.2}", z.eta);
            s.push_str(&z.report.to_table());
            match (z.pooled_roc_auc, &z.curve_note) {
                (Some(auc), _) => {
                    let _ = writeln!(s, "pooled ROC-AUC  {auc:.4}");
                }
                (None, Some(note)) => {
                    let _ = writeln!(s, "pooled curves   {note}");
                }
                (None, None) => {}
            }
        }
        match self.success_rate {
            Some(r) => {
                let _ = writeln!(s, "\nPad safety success rate  {r:.4}");
            }
            None => s.push_str("\nPad safety success rate  no ground truth\n"),
        }
        if !self.frames_without_gt.is_empty() {
            let _ = writeln!(s, "Frames without ground truth: {}", self.frames_without_gt.join(", "));
        }
        if !self.runs_without_candidates.is_empty() {
            let _ = writeln!(s, "Runs without feasible zones: {}", self.runs_without_candidates.join(", "));
        }
        s
    }
}

/// Pushes `value` into the run list of `frame`, keeping frames in first-seen order.
fn push_run<T>(table: &mut Vec<(String, Vec<T>)>, frame: &str, value: T) {
    match table.iter_mut().find(|(f, _)| f == frame) {
        Some((_, runs)) => runs.push(value),
        None => table.push((frame.to_string(), vec![value])),
    }
}

/// Evaluates every result below `out` against `<dataset>/gt` and
/// `<dataset>/pad_truth.json`.
pub fn evaluate(dataset: &Path, out: &Path, etas: &[f64]) -> Result<(EvalReport, Vec<(f64, Curves)>)> {
    let results = load_results(out)?;
    let pad_truth = load_pad_truth(&dataset.join("pad_truth.json"))?;

    let mut pixel_runs: Vec<(String, Vec<[Option<f64>; 7]>)> = Vec::new();
    let mut pad_runs: Vec<(String, Vec<bool>)> = Vec::new();
    let mut samples = Vec::new();
    let mut frames_without_gt = Vec::new();
    let mut runs_without_candidates = Vec::new();
    let mut gt_cache: BTreeMap<String, Option<dropzone_core::BinaryMask>> = BTreeMap::new();

    for (result, dir) in &results {
        let frame = &result.decision_frame;
        if result.candidates.is_empty() {
            runs_without_candidates.push(format!("{}/run_{}", result.batch_id, result.run));
        }
        if let Some(&truth) = pad_truth.get(frame) {
            push_run(&mut pad_runs, frame, result.pad_safety.as_bool() == Some(truth));
        }
        let gt_path: PathBuf = dataset.join("gt").join(format!("{frame}.png"));
        let gt = match gt_cache.get(frame) {
            Some(g) => g.clone(),
            None => {
                let g = if gt_path.exists() { Some(load_mask(&gt_path)?) } else { None };
                gt_cache.insert(frame.clone(), g.clone());
                g
            }
        };
        let Some(gt) = gt else {
            if !frames_without_gt.contains(frame) {
                log::warn!("frame {frame}: no ground truth, skipped");
                frames_without_gt.push(frame.clone());
            }
            continue;
        };
        let pred = load_final_map(dir, result.provenance)?.unsafe_mask;
        let counts = confusion(&pred, &gt).with_context(|| format!("comparing {} to ground truth", dir.display()))?;
        push_run(&mut pixel_runs, frame, pixel_metrics(&counts).values());

        for c in score_lattice(&pred, result.radius)? {
            samples.push(ZoneSample {
                predicted: c.safe_ratio,
                truth: safe_ratio(c.center, c.radius, &gt)?,
                frame_id: frame.clone(),
                run: result.run,
            });
        }
    }

    let mut pixel = MetricReport::default();
    for (m, name) in PIXEL_METRIC_NAMES.iter().enumerate() {
        let per_frame: Vec<Vec<Option<f64>>> =
            pixel_runs.iter().map(|(_, runs)| runs.iter().map(|r| r[m]).collect()).collect();
        pixel.push(name, aggregate_stochastic(&per_frame));
    }

    let mut zones = Vec::new();
    let mut curves = Vec::new();
    for (eta, report) in threshold_sweep(&samples, etas) {
        let c = pooled_curves(&samples, eta);
        zones.push(EtaReport {
            eta,
            report,
            pooled_roc_auc: curve_auc(&c.roc),
            curve_note: c.diagnostic.clone(),
        });
        curves.push((eta, c));
    }

    let success_rate = if pad_runs.is_empty() {
        None
    } else {
        let runs: Vec<Vec<bool>> = pad_runs.into_iter().map(|(_, r)| r).collect();
        Some(pad_safety_success_rate(&runs)?)
    };

    Ok((
        EvalReport {
            pixel,
            zones,
            success_rate,
            frames_without_gt,
            runs_without_candidates,
            zone_samples: samples.len(),
        },
        curves,
    ))
}

/// Writes `report.json`, `report.txt` and per-η curve CSVs into `dir`.
pub fn write_report(dir: &Path, report: &EvalReport, curves: &[(f64, Curves)]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(dir.join("report.json"), json)?;
    fs::write(dir.join("report.txt"), report.to_table())?;
    for (eta, c) in curves {
        if c.roc.is_empty() {
            continue;
        }
        fs::write(dir.join(format!("roc_eta{eta:.2}.csv")), roc_csv(&c.roc))?;
        fs::write(dir.join(format!("pr_eta{eta:.2}.csv")), pr_csv(&c.pr))?;
    }
    Ok(())
}
