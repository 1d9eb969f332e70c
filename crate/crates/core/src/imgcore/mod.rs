//! Pixel-grid primitives shared by the geometric and zone stages.
//!
//! All grids are row-major with `index = y * width + x`. Borders use
//! replicate padding for filters and clipped windows for morphology.

mod components;
mod disk;
mod filter;
mod grid;
mod morphology;

pub use components::{label_components, remove_small_components};
pub use disk::{disk_bounds, rasterize_disk, DiskPixels};
pub use filter::{gaussian_kernel, gaussian_smooth, gradient_magnitude};
pub use grid::{BinaryMask, ScalarGrid, StructuringElement};
pub use morphology::{close, dilate, erode, morph_open_close, open};

/// PNG bytes of an image. The encoder settings are fixed so equal pixels
/// always give equal bytes.
pub fn encode_png<P, C>(img: &image::ImageBuffer<P, C>) -> crate::Result<Vec<u8>>
where
    P: image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    use image::ImageEncoder;
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new_with_quality(
        &mut out,
        image::codecs::png::CompressionType::Default,
        image::codecs::png::FilterType::Adaptive,
    )
    .write_image(
        image::EncodableLayout::as_bytes(&**img),
        img.width(),
        img.height(),
        P::COLOR_TYPE,
    )?;
    Ok(out)
}

/// Writes `img` as PNG to `path`, creating parent directories.
pub fn save_png<P, C>(img: &image::ImageBuffer<P, C>, path: &std::path::Path) -> crate::Result<()>
where
    P: image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    let bytes = encode_png(img)?;
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| crate::Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| crate::Error::io(path, e))
}
