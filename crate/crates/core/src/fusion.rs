//! Pessimistic fusion of unsafe masks and the overlay images shown to the
//! agents and written to disk.

use image::Rgb;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::BinaryMask;
use crate::RgbImage;

/// Tint opacity over the RGB base.
pub const OVERLAY_ALPHA: f64 = 0.35;
pub const SAFE_TINT: [u8; 3] = [0, 255, 0];
pub const UNSAFE_TINT: [u8; 3] = [255, 0, 0];
const CIRCLE_COLOR: [u8; 3] = [255, 255, 0];
const RANKED_COLOR: [u8; 3] = [0, 128, 255];
const LABEL_COLOR: [u8; 3] = [255, 255, 255];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// First pass with the prior vocabulary.
    Initial,
    /// After Agent-1 vocabulary refinement.
    Refined,
    GeometricOnly,
    SemanticOnly,
}

/// Binary unsafe map (1 = unsafe) with where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetyMap {
    pub unsafe_mask: BinaryMask,
    pub provenance: Provenance,
}

impl SafetyMap {
    pub fn new(unsafe_mask: BinaryMask, provenance: Provenance) -> Self {
        Self {
            unsafe_mask,
            provenance,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.unsafe_mask.dims()
    }
}

/// Pixelwise OR of the semantic and geometric unsafe masks.
pub fn fuse(semantic: &BinaryMask, geometric: &BinaryMask) -> Result<BinaryMask> {
    semantic.or(geometric)
}

/// [`fuse`] tagged with a provenance.
pub fn fuse_map(semantic: &BinaryMask, geometric: &BinaryMask, provenance: Provenance) -> Result<SafetyMap> {
    Ok(SafetyMap::new(fuse(semantic, geometric)?, provenance))
}

fn blend(base: u8, tint: u8) -> u8 {
    ((1.0 - OVERLAY_ALPHA) * f64::from(base) + OVERLAY_ALPHA * f64::from(tint)).round() as u8
}

/// Red tint over unsafe pixels, green over safe ones.
pub fn render_overlay(rgb: &RgbImage, map: &SafetyMap) -> Result<RgbImage> {
    let dims = (rgb.width() as usize, rgb.height() as usize);
    Error::check_dims(dims, map.dims())?;
    Ok(RgbImage::from_fn(rgb.width(), rgb.height(), |x, y| {
        let tint = if map.unsafe_mask.get(x as usize, y as usize) {
            UNSAFE_TINT
        } else {
            SAFE_TINT
        };
        let Rgb(p) = *rgb.get_pixel(x, y);
        Rgb([blend(p[0], tint[0]), blend(p[1], tint[1]), blend(p[2], tint[2])])
    }))
}

fn put(img: &mut RgbImage, x: i64, y: i64, color: [u8; 3]) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, Rgb(color));
    }
}

/// One-pixel circle outline (midpoint algorithm), clipped to the image.
pub fn draw_circle(img: &mut RgbImage, center: (f64, f64), radius: f64, color: [u8; 3]) {
    let (cx, cy) = (center.0.round() as i64, center.1.round() as i64);
    let r = radius.round() as i64;
    let (mut x, mut y, mut err) = (r, 0i64, 1 - r);
    while x >= y {
        for (dx, dy) in [(x, y), (y, x), (-y, x), (-x, y), (-x, -y), (-y, -x), (y, -x), (x, -y)] {
            put(img, cx + dx, cy + dy, color);
        }
        y += 1;
        if err < 0 {
            err += 2 * y + 1;
        } else {
            x -= 1;
            err += 2 * (y - x) + 1;
        }
    }
}

// 3x5 digit glyphs, one row per u8 (low 3 bits, MSB = left column).
const DIGITS: [[u8; 5]; 10] = [
    [0b111, 0b101, 0b101, 0b101, 0b111],
    [0b010, 0b110, 0b010, 0b010, 0b111],
    [0b111, 0b001, 0b111, 0b100, 0b111],
    [0b111, 0b001, 0b111, 0b001, 0b111],
    [0b101, 0b101, 0b111, 0b001, 0b001],
    [0b111, 0b100, 0b111, 0b001, 0b111],
    [0b111, 0b100, 0b111, 0b101, 0b111],
    [0b111, 0b001, 0b010, 0b010, 0b010],
    [0b111, 0b101, 0b111, 0b101, 0b111],
    [0b111, 0b101, 0b111, 0b001, 0b111],
];

/// Draws `n` in a 3x5 pixel font, scaled by `scale`, centered on `at`.
pub fn draw_number(img: &mut RgbImage, n: usize, at: (f64, f64), scale: u32, color: [u8; 3]) {
    let digits: Vec<usize> = n.to_string().bytes().map(|b| (b - b'0') as usize).collect();
    let s = i64::from(scale.max(1));
    let total_w = (digits.len() as i64 * 4 - 1) * s;
    let x0 = at.0.round() as i64 - total_w / 2;
    let y0 = at.1.round() as i64 - 5 * s / 2;
    for (k, &d) in digits.iter().enumerate() {
        for (row, bits) in DIGITS[d].iter().enumerate() {
            for col in 0..3 {
                if bits & (0b100 >> col) != 0 {
                    for sy in 0..s {
                        for sx in 0..s {
                            put(
                                img,
                                x0 + (k as i64 * 4 + col) * s + sx,
                                y0 + row as i64 * s + sy,
                                color,
                            );
                        }
                    }
                }
            }
        }
    }
}

/// Overlay with every candidate circle outlined and labelled by index.
/// `highlight` circles are drawn in a second color on top.
pub fn annotate_candidates(
    overlay: &RgbImage,
    circles: &[(usize, (f64, f64), f64)],
    highlight: &[usize],
) -> RgbImage {
    let mut img = overlay.clone();
    let scale = (img.width().min(img.height()) / 160).max(1);
    for &(index, center, radius) in circles {
        let color = if highlight.contains(&index) {
            RANKED_COLOR
        } else {
            CIRCLE_COLOR
        };
        draw_circle(&mut img, center, radius, color);
        if highlight.contains(&index) {
            draw_circle(&mut img, center, radius - 1.0, color);
        }
        draw_number(&mut img, index, center, scale, LABEL_COLOR);
    }
    img
}
