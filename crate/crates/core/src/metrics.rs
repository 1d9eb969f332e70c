//! Evaluation: pixel confusion metrics for safety maps, drop-zone MAE / AP /
//! ROC-AUC, the run-then-frame aggregation protocol, pooled curves and
//! Cohen's κ.
//!
//! Metrics with a zero denominator are `None` and are left out of every
//! mean rather than being coerced to 0 or 1.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::BinaryMask;

/// Feasibility thresholds swept for drop-zone evaluation.
pub const SWEEP_ETAS: [f64; 4] = [0.95, 0.90, 0.85, 0.80];

/// Pixel counts with "unsafe" as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(pred: &BinaryMask, truth: &BinaryMask) -> Result<ConfusionCounts> {
    Error::check_dims(truth.dims(), pred.dims())?;
    let mut c = ConfusionCounts::default();
    for (&p, &t) in pred.bits().iter().zip(truth.bits()) {
        match (p, t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelMetrics {
    pub iou: Option<f64>,
    pub dice: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
    pub balanced_accuracy: Option<f64>,
}

/// Column order of safety-map reports.
pub const PIXEL_METRIC_NAMES: [&str; 7] = [
    "iou",
    "dice",
    "precision",
    "recall",
    "specificity",
    "accuracy",
    "balanced_accuracy",
];

impl PixelMetrics {
    pub fn values(&self) -> [Option<f64>; 7] {
        [
            self.iou,
            self.dice,
            self.precision,
            self.recall,
            self.specificity,
            self.accuracy,
            self.balanced_accuracy,
        ]
    }
}

pub fn pixel_metrics(c: &ConfusionCounts) -> PixelMetrics {
    let recall = ratio(c.tp, c.tp + c.fn_);
    let specificity = ratio(c.tn, c.tn + c.fp);
    PixelMetrics {
        iou: ratio(c.tp, c.tp + c.fp + c.fn_),
        dice: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
        precision: ratio(c.tp, c.tp + c.fp),
        recall,
        specificity,
        accuracy: ratio(c.tp + c.tn, c.total()),
        balanced_accuracy: recall.zip(specificity).map(|(r, s)| (r + s) / 2.0),
    }
}

/// Predicted and ground-truth safe ratio of one candidate circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneSample {
    pub predicted: f64,
    pub truth: f64,
    pub frame_id: String,
    pub run: usize,
}

/// `(predicted label, true label)` per sample, both `ratio ≥ η`.
pub fn zone_labels(samples: &[ZoneSample], eta: f64) -> Vec<(bool, bool)> {
    samples
        .iter()
        .map(|s| (s.predicted >= eta, s.truth >= eta))
        .collect()
}

pub fn mae(samples: &[ZoneSample]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let sum: f64 = samples.iter().map(|s| (s.predicted - s.truth).abs()).sum();
    Some(sum / samples.len() as f64)
}

/// Indices sorted by descending score; equal scores keep input order.
fn rank_desc(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Mean of precision@k over the ranks `k` of the positives.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len(), "scores and labels differ in length");
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in rank_desc(scores).iter().enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Some(sum / positives as f64)
}

/// Area under the ROC curve via the Mann–Whitney statistic with mid-ranks
/// (a tie between a positive and a negative earns half credit).
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len(), "scores and labels differ in length");
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Rank sums are doubled to stay in integers.
    let mut pos_rank_sum2 = 0u128;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank2 = (i + 1 + j + 1) as u128;
        for &k in &order[i..=j] {
            if labels[k] {
                pos_rank_sum2 += midrank2;
            }
        }
        i = j + 1;
    }
    let (p, n) = (n_pos as u128, n_neg as u128);
    let u2 = pos_rank_sum2 - p * (p + 1);
    Some(u2 as f64 / (2 * p * n) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation across frames.
    pub std: f64,
    /// Frames that contributed.
    pub frames: usize,
}

/// Averages runs within each frame (undefined runs skipped), then reports
/// mean ± population std across frames. Frames without any defined run are
/// dropped; `None` when no frame remains.
pub fn aggregate_stochastic(per_frame_runs: &[Vec<Option<f64>>]) -> Option<MeanStd> {
    let frame_means: Vec<f64> = per_frame_runs
        .iter()
        .enumerate()
        .filter_map(|(i, runs)| {
            let defined: Vec<f64> = runs.iter().flatten().copied().collect();
            if defined.is_empty() {
                log::debug!("frame {i}: no defined run, excluded from aggregate");
                None
            } else {
                Some(defined.iter().sum::<f64>() / defined.len() as f64)
            }
        })
        .collect();
    if frame_means.is_empty() {
        return None;
    }
    let n = frame_means.len() as f64;
    let mean = frame_means.iter().sum::<f64>() / n;
    let var = frame_means.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some(MeanStd {
        mean,
        std: var.sqrt(),
        frames: frame_means.len(),
    })
}

/// Named metrics in a fixed column order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub metrics: Vec<MetricEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub name: String,
    pub value: Option<MeanStd>,
}

impl MetricReport {
    pub fn push(&mut self, name: &str, value: Option<MeanStd>) {
        self.metrics.push(MetricEntry {
            name: name.to_string(),
            value,
        });
    }

    pub fn get(&self, name: &str) -> Option<MeanStd> {
        self.metrics.iter().find(|e| e.name == name).and_then(|e| e.value)
    }

    /// Aligned `metric  mean ± std  (frames)` lines.
    pub fn to_table(&self) -> String {
        let width = self.metrics.iter().map(|e| e.name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for e in &self.metrics {
            match e.value {
                Some(v) => writeln!(
                    out,
                    "{:<width$}  {:.4} ± {:.4}  ({} frames)",
                    e.name, v.mean, v.std, v.frames
                ),
                None => writeln!(out, "{:<width$}  undefined", e.name),
            }
            .expect("writing to a String cannot fail");
        }
        out
    }
}

/// Groups samples by frame (first-appearance order), then by run.
fn group_by_frame_and_run(samples: &[ZoneSample]) -> Vec<Vec<Vec<&ZoneSample>>> {
    let mut frames: Vec<(&str, BTreeMap<usize, Vec<&ZoneSample>>)> = Vec::new();
    for s in samples {
        let slot = match frames.iter().position(|(id, _)| *id == s.frame_id) {
            Some(i) => i,
            None => {
                frames.push((&s.frame_id, BTreeMap::new()));
                frames.len() - 1
            }
        };
        frames[slot].1.entry(s.run).or_default().push(s);
    }
    frames
        .into_iter()
        .map(|(_, runs)| runs.into_values().collect())
        .collect()
}

/// AP, ROC-AUC and MAE at each η: labels are recomputed per η, metrics are
/// taken per (frame, run) and combined with [`aggregate_stochastic`].
pub fn threshold_sweep(samples: &[ZoneSample], etas: &[f64]) -> Vec<(f64, MetricReport)> {
    let grouped = group_by_frame_and_run(samples);
    etas.iter()
        .map(|&eta| {
            let mut ap = Vec::new();
            let mut auc = Vec::new();
            let mut err = Vec::new();
            for runs in &grouped {
                let mut ap_runs = Vec::new();
                let mut auc_runs = Vec::new();
                let mut err_runs = Vec::new();
                for run in runs {
                    let owned: Vec<ZoneSample> = run.iter().map(|s| (*s).clone()).collect();
                    let scores: Vec<f64> = owned.iter().map(|s| s.predicted).collect();
                    let labels: Vec<bool> = zone_labels(&owned, eta).into_iter().map(|(_, y)| y).collect();
                    ap_runs.push(average_precision(&scores, &labels));
                    auc_runs.push(roc_auc(&scores, &labels));
                    err_runs.push(mae(&owned));
                }
                ap.push(ap_runs);
                auc.push(auc_runs);
                err.push(err_runs);
            }
            let mut report = MetricReport::default();
            report.push("ap", aggregate_stochastic(&ap));
            report.push("roc_auc", aggregate_stochastic(&auc));
            report.push("mae", aggregate_stochastic(&err));
            (eta, report)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

/// Dataset-level curves over a pooled prediction set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Curves {
    /// Starts at `(0, 0)` with threshold `+∞`, ends at `(1, 1)`.
    pub roc: Vec<RocPoint>,
    pub pr: Vec<PrPoint>,
    /// Why the curves are empty, if they are.
    pub diagnostic: Option<String>,
}

/// ROC and PR curves over `(ŝ, 1[s ≥ η])` pooled across frames and runs,
/// with one point per distinct score threshold (predict positive when
/// `ŝ ≥ threshold`).
pub fn pooled_curves(samples: &[ZoneSample], eta: f64) -> Curves {
    let scores: Vec<f64> = samples.iter().map(|s| s.predicted).collect();
    let labels: Vec<bool> = samples.iter().map(|s| s.truth >= eta).collect();
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Curves {
            diagnostic: Some(format!(
                "pooled set has {n_pos} positive and {n_neg} negative zones at eta={eta}; curves need both"
            )),
            ..Curves::default()
        };
    }
    let order = rank_desc(&scores);
    let mut roc = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let mut pr = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        roc.push(RocPoint {
            threshold: t,
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
        pr.push(PrPoint {
            threshold: t,
            recall: tp as f64 / n_pos as f64,
            precision: tp as f64 / (tp + fp) as f64,
        });
    }
    Curves {
        roc,
        pr,
        diagnostic: None,
    }
}

/// Trapezoidal area under a ROC polyline.
pub fn curve_auc(roc: &[RocPoint]) -> Option<f64> {
    if roc.len() < 2 {
        return None;
    }
    Some(
        roc.windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
            .sum(),
    )
}

fn fmt_threshold(t: f64) -> String {
    if t.is_infinite() {
        "inf".to_string()
    } else {
        format!("{t}")
    }
}

/// `threshold,fpr,tpr` CSV.
pub fn roc_csv(points: &[RocPoint]) -> String {
    let mut s = String::from("threshold,fpr,tpr\n");
    for p in points {
        writeln!(s, "{},{},{}", fmt_threshold(p.threshold), p.fpr, p.tpr).unwrap();
    }
    s
}

/// `threshold,recall,precision` CSV.
pub fn pr_csv(points: &[PrPoint]) -> String {
    let mut s = String::from("threshold,recall,precision\n");
    for p in points {
        writeln!(s, "{},{},{}", fmt_threshold(p.threshold), p.recall, p.precision).unwrap();
    }
    s
}

/// Unweighted Cohen's κ between two raters over the same items.
///
/// When chance agreement is total (both raters use one and the same
/// category throughout) the observed agreement is perfect too, and κ is
/// reported as 1.
pub fn cohens_kappa<T: Ord>(a: &[T], b: &[T]) -> Result<Option<f64>> {
    if a.len() != b.len() {
        return Err(Error::param(format!(
            "rating lists differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::param("at least one rated item is required"));
    }
    let n = a.len() as f64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64;
    let p_o = agree / n;
    let mut marg: BTreeMap<&T, (usize, usize)> = BTreeMap::new();
    for x in a {
        marg.entry(x).or_default().0 += 1;
    }
    for y in b {
        marg.entry(y).or_default().1 += 1;
    }
    let p_e: f64 = marg
        .values()
        .map(|&(ca, cb)| (ca as f64 / n) * (cb as f64 / n))
        .sum();
    if p_e >= 1.0 {
        return Ok((p_o >= 1.0).then_some(1.0));
    }
    Ok(Some((p_o - p_e) / (1.0 - p_e)))
}
