use super::ScalarGrid;
use crate::error::{Error, Result};

/// Normalized 1-D Gaussian taps for `sigma`, truncated at radius `ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::param(format!("sigma must be positive, got {sigma}")));
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let denom = 2.0 * sigma * sigma;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / denom).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    Ok(taps)
}

#[inline]
fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

/// Separable Gaussian blur with replicate padding (horizontal pass first).
pub fn gaussian_smooth(grid: &ScalarGrid, sigma: f64) -> Result<ScalarGrid> {
    let taps = gaussian_kernel(sigma)?;
    let radius = (taps.len() / 2) as isize;
    let (w, h) = grid.dims();
    let src = grid.values();

    let mut horiz = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                acc += t * row[clamp_index(x as isize + k as isize - radius, w)];
            }
            horiz[y * w + x] = acc;
        }
    }

    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                acc += t * horiz[clamp_index(y as isize + k as isize - radius, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    Ok(ScalarGrid::from_parts(w, h, out))
}

/// Euclidean norm of the discrete gradient: central differences inside,
/// one-sided differences on the border rows and columns.
pub fn gradient_magnitude(grid: &ScalarGrid) -> Result<ScalarGrid> {
    let (w, h) = grid.dims();
    if w < 2 || h < 2 {
        return Err(Error::param(format!(
            "gradient needs at least 2x2 pixels, got {w}x{h}"
        )));
    }
    let v = grid.values();
    let at = |x: usize, y: usize| v[y * w + x];
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let dx = if x == 0 {
                at(1, y) - at(0, y)
            } else if x == w - 1 {
                at(w - 1, y) - at(w - 2, y)
            } else {
                (at(x + 1, y) - at(x - 1, y)) / 2.0
            };
            let dy = if y == 0 {
                at(x, 1) - at(x, 0)
            } else if y == h - 1 {
                at(x, h - 1) - at(x, h - 2)
            } else {
                (at(x, y + 1) - at(x, y - 1)) / 2.0
            };
            out.push((dx * dx + dy * dy).sqrt());
        }
    }
    Ok(ScalarGrid::from_parts(w, h, out))
}
