//! Alternative drop zones: circles on a hex lattice, scored by the share of
//! safe pixels inside each disk and filtered by a feasibility threshold.

use std::cmp::Ordering;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{render_overlay, SafetyMap};
use crate::imgcore::{save_png, BinaryMask, DiskPixels};
use crate::semantic::BBox;
use crate::RgbImage;

pub const NO_CANDIDATE_OVERLAY: &str = "no_candidate_overlay.png";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZoneParams {
    /// Circle radius in pixels when no H pad is located.
    pub default_radius: f64,
    /// Minimum safe ratio for a feasible circle.
    pub eta: f64,
    pub top_k: usize,
    pub top_n: usize,
}

impl Default for ZoneParams {
    fn default() -> Self {
        Self {
            default_radius: 100.0,
            eta: 0.95,
            top_k: 30,
            top_n: 3,
        }
    }
}

impl ZoneParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.default_radius > 0.0) {
            return Err(Error::param("default_radius must be > 0"));
        }
        if !(self.eta >= 0.0 && self.eta <= 1.0) {
            return Err(Error::param(format!("eta must lie in [0, 1], got {}", self.eta)));
        }
        if self.top_n > self.top_k {
            return Err(Error::param(format!(
                "top_n ({}) must not exceed top_k ({})",
                self.top_n, self.top_k
            )));
        }
        Ok(())
    }
}

/// A scored circular candidate. `area` is the pixel count of the disk after
/// clipping to the image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateZone {
    pub index: usize,
    pub center: (f64, f64),
    pub radius: f64,
    pub safe_ratio: f64,
    pub area: usize,
}

impl CandidateZone {
    pub fn distance_to(&self, point: (f64, f64)) -> f64 {
        (self.center.0 - point.0).hypot(self.center.1 - point.1)
    }
}

pub fn image_center(width: usize, height: usize) -> (f64, f64) {
    (width as f64 / 2.0, height as f64 / 2.0)
}

fn touches_image(center: (f64, f64), radius: f64, width: usize, height: usize) -> bool {
    // Nearest pixel of the image to the center, per axis.
    let px = center.0.round().clamp(0.0, width as f64 - 1.0);
    let py = center.1.round().clamp(0.0, height as f64 - 1.0);
    (px - center.0).powi(2) + (py - center.1).powi(2) <= radius * radius
}

/// Hex-lattice centers in row-major order: rows `√3·r` apart starting at
/// `y = r`, columns `2r` apart starting at `x = r`, odd rows shifted by `r`.
/// Only centers whose disk covers at least one pixel are kept. Images
/// narrower and shorter than `2r` get a single center in the middle.
pub fn hex_centers(width: usize, height: usize, radius: f64) -> Result<Vec<(f64, f64)>> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::param(format!("radius must be > 0, got {radius}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::param("image must be non-empty"));
    }
    let (w, h) = (width as f64, height as f64);
    if w < 2.0 * radius && h < 2.0 * radius {
        return Ok(vec![image_center(width, height)]);
    }
    let dy = 3f64.sqrt() * radius;
    let dx = 2.0 * radius;
    let mut centers = Vec::new();
    let mut row = 0usize;
    loop {
        let y = radius + row as f64 * dy;
        if y - radius > h - 1.0 {
            break;
        }
        let offset = if row % 2 == 1 { radius } else { 0.0 };
        let mut col = 0usize;
        loop {
            let x = radius + offset + col as f64 * dx;
            if x - radius > w - 1.0 {
                break;
            }
            if touches_image((x, y), radius, width, height) {
                centers.push((x, y));
            }
            col += 1;
        }
        row += 1;
    }
    if centers.is_empty() {
        centers.push(image_center(width, height));
    }
    Ok(centers)
}

/// Circle radius covering an H-pad bounding box: half its diagonal.
pub fn radius_from_hpad(w: f64, h: f64) -> Result<f64> {
    if !(w > 0.0 && h > 0.0) {
        return Err(Error::param(format!(
            "bounding box sides must be positive, got {w}x{h}"
        )));
    }
    Ok(0.5 * w.hypot(h))
}

/// `(support size, unsafe pixels)` of a clipped disk.
pub fn disk_counts(center: (f64, f64), radius: f64, unsafe_mask: &BinaryMask) -> (usize, usize) {
    let (w, h) = unsafe_mask.dims();
    let mut area = 0;
    let mut bad = 0;
    for (x, y) in DiskPixels::new(center, radius, w, h) {
        area += 1;
        bad += usize::from(unsafe_mask.get(x, y));
    }
    (area, bad)
}

/// `1 - unsafe/|S|` over the clipped disk support `S`.
pub fn safe_ratio(center: (f64, f64), radius: f64, unsafe_mask: &BinaryMask) -> Result<f64> {
    let (area, bad) = disk_counts(center, radius, unsafe_mask);
    if area == 0 {
        return Err(Error::param(format!(
            "disk at ({}, {}) r={radius} has no pixels inside the image",
            center.0, center.1
        )));
    }
    Ok(1.0 - bad as f64 / area as f64)
}

/// Ranking order: safe ratio desc, area desc, distance to `center` asc,
/// index asc.
pub fn compare_candidates(a: &CandidateZone, b: &CandidateZone, center: (f64, f64)) -> Ordering {
    b.safe_ratio
        .total_cmp(&a.safe_ratio)
        .then_with(|| b.area.cmp(&a.area))
        .then_with(|| a.distance_to(center).total_cmp(&b.distance_to(center)))
        .then_with(|| a.index.cmp(&b.index))
}

/// Circle radius for a frame: from the H-pad box when present.
pub fn candidate_radius(params: &ZoneParams, hpad: Option<BBox>) -> Result<f64> {
    match hpad {
        Some(b) => radius_from_hpad(b.w, b.h),
        None => Ok(params.default_radius),
    }
}

/// Every lattice circle with its safe ratio, in lattice order.
pub fn score_lattice(unsafe_mask: &BinaryMask, radius: f64) -> Result<Vec<CandidateZone>> {
    let (w, h) = unsafe_mask.dims();
    hex_centers(w, h, radius)?
        .into_iter()
        .enumerate()
        .filter_map(|(index, center)| {
            let (area, bad) = disk_counts(center, radius, unsafe_mask);
            (area > 0).then(|| {
                Ok(CandidateZone {
                    index,
                    center,
                    radius,
                    safe_ratio: 1.0 - bad as f64 / area as f64,
                    area,
                })
            })
        })
        .collect()
}

/// Feasible candidates (safe ratio ≥ η), best first, at most `top_k`, with
/// indices renumbered `0..k` after sorting.
pub fn generate_candidates(
    map: &SafetyMap,
    params: &ZoneParams,
    hpad: Option<BBox>,
) -> Result<Vec<CandidateZone>> {
    params.validate()?;
    let radius = candidate_radius(params, hpad)?;
    let (w, h) = map.dims();
    let center = image_center(w, h);
    let mut feasible: Vec<CandidateZone> = score_lattice(&map.unsafe_mask, radius)?
        .into_iter()
        .filter(|c| c.safe_ratio >= params.eta)
        .collect();
    feasible.sort_by(|a, b| compare_candidates(a, b, center));
    feasible.truncate(params.top_k);
    for (i, c) in feasible.iter_mut().enumerate() {
        c.index = i;
    }
    Ok(feasible)
}

/// Writes the overlay for a frame without feasible circles as
/// `no_candidate_overlay.png` in `dir`. Overwrites an existing file.
pub fn no_candidate_artifact(map: &SafetyMap, frame: &RgbImage, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(NO_CANDIDATE_OVERLAY);
    save_png(&render_overlay(frame, map)?, &path)?;
    Ok(path)
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

/// Candidate in the resolution-independent form shown to the ranking agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedCandidate {
    pub index: usize,
    pub cx_norm: f64,
    pub cy_norm: f64,
    pub r_norm_w: f64,
    pub r_norm_h: f64,
    pub safe_ratio: f64,
}

/// Coordinates divided by image width/height; every field rounded to 4 decimals.
pub fn normalize_candidates(candidates: &[CandidateZone], width: usize, height: usize) -> Vec<NormalizedCandidate> {
    let (w, h) = (width as f64, height as f64);
    candidates
        .iter()
        .map(|c| NormalizedCandidate {
            index: c.index,
            cx_norm: round4(c.center.0 / w),
            cy_norm: round4(c.center.1 / h),
            r_norm_w: round4(c.radius / w),
            r_norm_h: round4(c.radius / h),
            safe_ratio: round4(c.safe_ratio),
        })
        .collect()
}

/// Pretty JSON array of [`NormalizedCandidate`], newline-terminated.
pub fn candidates_json(candidates: &[CandidateZone], width: usize, height: usize) -> String {
    let mut s = serde_json::to_string_pretty(&normalize_candidates(candidates, width, height))
        .expect("plain numbers always serialize");
    s.push('\n');
    s
}
