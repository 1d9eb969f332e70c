//! Geometry branch: per-frame depth normalization and the gradient-based
//! flatness mask (1 = flat/safe) with its unsafe complement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{
    gaussian_smooth, gradient_magnitude, morph_open_close, remove_small_components, BinaryMask,
    ScalarGrid, StructuringElement,
};

/// Fraction of image pixels used as the small-component threshold when
/// [`FlatnessParams::min_component_area`] is unset.
pub const DEFAULT_MIN_AREA_FRACTION: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlatnessParams {
    /// Gaussian σ applied to normalized depth.
    pub sigma: f64,
    /// Gradient magnitudes strictly below this count as flat evidence.
    pub grad_threshold: f64,
    /// Side of the square voting window (odd).
    pub window: usize,
    /// Minimum share of sub-threshold pixels in the window.
    pub flat_ratio: f64,
    /// Side of the square open/close element (odd).
    pub morph_size: usize,
    /// Components of the flat mask smaller than this are dropped. `None`
    /// means 0.1% of the image.
    pub min_component_area: Option<usize>,
    /// Stabilizer in the min-max normalization denominator.
    pub epsilon: f64,
}

impl Default for FlatnessParams {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            grad_threshold: 1.0,
            window: 3,
            flat_ratio: 0.4,
            morph_size: 5,
            min_component_area: None,
            epsilon: 1e-6,
        }
    }
}

impl FlatnessParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::param(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.grad_threshold > 0.0) {
            return Err(Error::param(format!(
                "grad_threshold must be > 0, got {}",
                self.grad_threshold
            )));
        }
        if self.window == 0 || self.window.is_multiple_of(2) {
            return Err(Error::param(format!(
                "window must be odd and >= 1, got {}",
                self.window
            )));
        }
        if !(0.0..=1.0).contains(&self.flat_ratio) {
            return Err(Error::param(format!(
                "flat_ratio must lie in [0, 1], got {}",
                self.flat_ratio
            )));
        }
        StructuringElement::square(self.morph_size)?;
        if !(self.epsilon > 0.0) {
            return Err(Error::param(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    pub fn min_area_for(&self, width: usize, height: usize) -> usize {
        self.min_component_area
            .unwrap_or_else(|| ((width * height) as f64 * DEFAULT_MIN_AREA_FRACTION) as usize)
    }
}

/// Depth rescaled into `[0, 1)` by per-frame min-max normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedDepth(ScalarGrid);

impl NormalizedDepth {
    pub fn grid(&self) -> &ScalarGrid {
        &self.0
    }

    pub fn into_grid(self) -> ScalarGrid {
        self.0
    }

    /// 8-bit grayscale rendering (near = dark is not assumed; value × 255).
    pub fn to_gray_image(&self) -> image::GrayImage {
        let g = &self.0;
        image::GrayImage::from_fn(g.width() as u32, g.height() as u32, |x, y| {
            let v = g.get(x as usize, y as usize);
            image::Luma([(v * 255.0).round().clamp(0.0, 255.0) as u8])
        })
    }
}

/// `(d - min) / (max - min + ε)`. Constant inputs map to all zeros.
pub fn normalize_depth(depth: &ScalarGrid, epsilon: f64) -> Result<NormalizedDepth> {
    if !(epsilon > 0.0) {
        return Err(Error::param(format!("epsilon must be > 0, got {epsilon}")));
    }
    let lo = depth.min();
    let denom = depth.max() - lo + epsilon;
    Ok(NormalizedDepth(depth.map(|d| (d - lo) / denom)?))
}

/// Raw window vote before any cleanup: a pixel is flat when at least
/// `flat_ratio` of its clipped `window`×`window` neighborhood has gradient
/// magnitude strictly below `grad_threshold`.
pub fn window_vote(gradient: &ScalarGrid, window: usize, grad_threshold: f64, flat_ratio: f64) -> BinaryMask {
    let (w, h) = gradient.dims();
    let r = window / 2;
    let below: Vec<u32> = gradient
        .values()
        .iter()
        .map(|&g| u32::from(g < grad_threshold))
        .collect();

    // Summed-area table for O(1) window counts.
    let mut sat = vec![0u32; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0u32;
        for x in 0..w {
            row += below[y * w + x];
            sat[(y + 1) * (w + 1) + x + 1] = sat[y * (w + 1) + x + 1] + row;
        }
    }

    let mut bits = Vec::with_capacity(w * h);
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(r), (y + r).min(h - 1) + 1);
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(r), (x + r).min(w - 1) + 1);
            let count = sat[y1 * (w + 1) + x1] + sat[y0 * (w + 1) + x0]
                - sat[y0 * (w + 1) + x1]
                - sat[y1 * (w + 1) + x0];
            let area = (x1 - x0) * (y1 - y0);
            bits.push(count as f64 / area as f64 >= flat_ratio);
        }
    }
    BinaryMask::new(w, h, bits).expect("dims come from a valid grid")
}

/// Flatness mask (1 = flat): smooth, gradient, window vote, open/close,
/// small-component removal.
pub fn flatness_mask(depth: &NormalizedDepth, params: &FlatnessParams) -> Result<BinaryMask> {
    params.validate()?;
    let (w, h) = depth.grid().dims();
    if w < params.window || h < params.window {
        return Err(Error::param(format!(
            "image {w}x{h} is smaller than the {0}x{0} window",
            params.window
        )));
    }
    let smooth = gaussian_smooth(depth.grid(), params.sigma)?;
    let gradient = gradient_magnitude(&smooth)?;
    let vote = window_vote(&gradient, params.window, params.grad_threshold, params.flat_ratio);
    let se = StructuringElement::square(params.morph_size)?;
    let cleaned = morph_open_close(&vote, se);
    Ok(remove_small_components(&cleaned, params.min_area_for(w, h)))
}

/// Geometric unsafe mask: the bitwise complement of the flat mask.
pub fn gradient_unsafe(flat: &BinaryMask) -> BinaryMask {
    flat.not()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(w: usize, h: usize, f: impl FnMut(usize, usize) -> f64) -> ScalarGrid {
        ScalarGrid::from_fn(w, h, f).unwrap()
    }

    #[test]
    fn normalize_constant_is_zero() {
        let n = normalize_depth(&ScalarGrid::filled(4, 4, 7.5).unwrap(), 1e-6).unwrap();
        assert!(n.grid().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalize_three_values() {
        let d = ScalarGrid::new(3, 1, vec![0.0, 5.0, 10.0]).unwrap();
        let n = normalize_depth(&d, 1e-6).unwrap();
        let denom = 10.0 + 1e-6;
        assert_eq!(n.grid().values(), &[0.0, 5.0 / denom, 10.0 / denom]);
        assert!(n.grid().max() < 1.0);
        assert!((n.grid().get(1, 0) - 0.49999995).abs() < 1e-12);
    }

    #[test]
    fn normalize_unit_ramp() {
        let d = grid(11, 1, |x, _| x as f64 / 10.0);
        let n = normalize_depth(&d, 1e-6).unwrap();
        for x in 0..11 {
            assert!((n.grid().get(x, 0) - (x as f64 / 10.0) / (1.0 + 1e-6)).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_plane_is_all_flat() {
        let n = normalize_depth(&ScalarGrid::filled(32, 24, 3.0).unwrap(), 1e-6).unwrap();
        assert!(flatness_mask(&n, &FlatnessParams::default()).unwrap().is_all_one());
    }

    #[test]
    fn step_yields_unsafe_band() {
        let d = grid(64, 64, |x, _| if x < 32 { 0.0 } else { 10.0 });
        let n = normalize_depth(&d, 1e-6).unwrap();
        // The band must be wider than the 5x5 element or closing fills it.
        let params = FlatnessParams {
            grad_threshold: 0.02,
            ..FlatnessParams::default()
        };
        let flat = flatness_mask(&n, &params).unwrap();
        let row: String = (0..64).map(|x| if flat.get(x, 10) { '.' } else { '#' }).collect();
        assert_eq!(row.matches('#').count(), row.trim_matches('.').len(), "{row}");
        for y in 0..64 {
            assert!(!flat.get(31, y) && !flat.get(32, y));
            assert!(flat.get(5, y) && flat.get(58, y));
        }
    }

    #[test]
    fn zero_ratio_votes_everything_flat() {
        let d = grid(16, 16, |x, y| ((x * 7 + y * 13) % 5) as f64);
        let n = normalize_depth(&d, 1e-6).unwrap();
        let g = gradient_magnitude(&gaussian_smooth(n.grid(), 1.0).unwrap()).unwrap();
        assert!(window_vote(&g, 3, 1e-9, 0.0).is_all_one());
    }

    #[test]
    fn rejects_tiny_image_and_bad_params() {
        let n = normalize_depth(&ScalarGrid::filled(2, 2, 0.0).unwrap(), 1e-6).unwrap();
        assert!(flatness_mask(&n, &FlatnessParams::default()).is_err());
        let bad = FlatnessParams {
            window: 4,
            ..FlatnessParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = FlatnessParams {
            flat_ratio: 1.5,
            ..FlatnessParams::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn complement_is_an_involution() {
        let m = BinaryMask::from_fn(9, 4, |x, y| (x + y) % 3 == 0).unwrap();
        assert_eq!(gradient_unsafe(&gradient_unsafe(&m)), m);
        assert!(gradient_unsafe(&BinaryMask::ones(3, 3).unwrap()).is_all_zero());
        assert!(gradient_unsafe(&BinaryMask::zeros(3, 3).unwrap()).is_all_one());
    }

    fn noisy(w: usize, h: usize, seed: u64) -> ScalarGrid {
        let mut s = seed | 1;
        grid(w, h, |x, y| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            let step = if x > w / 2 { 4.0 } else { 0.0 };
            0.05 * x as f64 + 0.02 * y as f64 + step + (s % 1000) as f64 / 4000.0
        })
    }

    proptest! {
        #[test]
        fn vote_monotone_in_threshold(seed in any::<u64>(), t1 in 0.001f64..0.3, t2 in 0.001f64..0.3) {
            let n = normalize_depth(&noisy(24, 20, seed), 1e-6).unwrap();
            let g = gradient_magnitude(&gaussian_smooth(n.grid(), 1.0).unwrap()).unwrap();
            let (lo, hi) = (t1.min(t2), t1.max(t2));
            prop_assert!(window_vote(&g, 3, lo, 0.4).is_subset_of(&window_vote(&g, 3, hi, 0.4)));
        }

        #[test]
        fn complement_partitions_pixels(seed in any::<u64>()) {
            let n = normalize_depth(&noisy(20, 20, seed), 1e-6).unwrap();
            let params = FlatnessParams { grad_threshold: 0.05, ..FlatnessParams::default() };
            let flat = flatness_mask(&n, &params).unwrap();
            let unsafe_ = gradient_unsafe(&flat);
            prop_assert!(flat.or(&unsafe_).unwrap().is_all_one());
            prop_assert!(flat.and(&unsafe_).unwrap().is_all_zero());
        }

        #[test]
        fn affine_depth_change_keeps_mask(seed in any::<u64>()) {
            let d = noisy(32, 24, seed);
            let params = FlatnessParams { grad_threshold: 0.05, epsilon: 1e-12, ..FlatnessParams::default() };
            let a = flatness_mask(&normalize_depth(&d, params.epsilon).unwrap(), &params).unwrap();
            let scaled = d.map(|v| 3.0 * v + 7.0).unwrap();
            let b = flatness_mask(&normalize_depth(&scaled, params.epsilon).unwrap(), &params).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
