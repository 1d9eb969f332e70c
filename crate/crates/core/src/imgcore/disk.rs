use super::BinaryMask;

/// Inclusive pixel bounds `(x0, y0, x1, y1)` of a disk clipped to a
/// `width`×`height` image, or `None` when the box misses the image.
pub fn disk_bounds(
    center: (f64, f64),
    radius: f64,
    width: usize,
    height: usize,
) -> Option<(usize, usize, usize, usize)> {
    let (cx, cy) = center;
    let x0 = (cx - radius).ceil().max(0.0);
    let y0 = (cy - radius).ceil().max(0.0);
    let x1 = (cx + radius).floor().min(width as f64 - 1.0);
    let y1 = (cy + radius).floor().min(height as f64 - 1.0);
    if x0 > x1 || y0 > y1 {
        return None;
    }
    Some((x0 as usize, y0 as usize, x1 as usize, y1 as usize))
}

/// Iterator over the pixels `(x, y)` with `(x-cx)² + (y-cy)² ≤ r²`, clipped
/// to the image, in row-major order.
#[derive(Debug, Clone)]
pub struct DiskPixels {
    center: (f64, f64),
    r2: f64,
    bounds: Option<(usize, usize, usize, usize)>,
    x: usize,
    y: usize,
}

impl DiskPixels {
    pub fn new(center: (f64, f64), radius: f64, width: usize, height: usize) -> Self {
        let bounds = disk_bounds(center, radius, width, height);
        let (x, y) = bounds.map_or((0, 0), |(x0, y0, _, _)| (x0, y0));
        Self {
            center,
            r2: radius * radius,
            bounds,
            x,
            y,
        }
    }
}

impl Iterator for DiskPixels {
    type Item = (usize, usize);

    fn next(&mut self) -> Option<(usize, usize)> {
        let (x0, _, x1, y1) = self.bounds?;
        while self.y <= y1 {
            while self.x <= x1 {
                let (x, y) = (self.x, self.y);
                self.x += 1;
                let dx = x as f64 - self.center.0;
                let dy = y as f64 - self.center.1;
                if dx * dx + dy * dy <= self.r2 {
                    return Some((x, y));
                }
            }
            self.x = x0;
            self.y += 1;
        }
        None
    }
}

/// Disk support as a mask. A disk entirely off the image gives an empty mask.
pub fn rasterize_disk(center: (f64, f64), radius: f64, width: usize, height: usize) -> BinaryMask {
    let mut bits = vec![false; width * height];
    for (x, y) in DiskPixels::new(center, radius, width, height) {
        bits[y * width + x] = true;
    }
    BinaryMask::from_parts(width, height, bits)
}
