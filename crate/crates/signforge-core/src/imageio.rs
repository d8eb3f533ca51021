//! Image file I/O.
//!
//! Decoding accepts PNG and JPEG in any color layout and normalizes to
//! RGBA8. Encoding always writes RGBA8 PNG with one fixed configuration
//! (adaptive filtering, default compression, no ancillary chunks), so
//! identical pixel data yields identical files.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// Decode a PNG or JPEG file into an RGBA8 buffer.
pub fn load_image(path: &Path) -> Result<RasterImage> {
    let img = image::open(path).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let rgba = img.to_rgba8();
    let (w, h) = rgba.dimensions();
    RasterImage::from_raw(w, h, rgba.into_raw())
}

/// Write an RGBA8 PNG with pinned settings.
pub fn save_png(img: &RasterImage, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), img.width(), img.height());
    encoder.set_color(png::ColorType::Rgba);
    encoder.set_depth(png::BitDepth::Eight);
    encoder.set_compression(png::Compression::Balanced);
    encoder.set_filter(png::Filter::Adaptive);
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    writer
        .write_image_data(img.pixels())
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    Ok(())
}

/// Decode a PNG file written by [`save_png`] (or any RGBA-convertible PNG).
pub fn load_png(path: &Path) -> Result<RasterImage> {
    load_image(path)
}

/// Write a baseline JPEG at quality 90. Alpha is dropped. Unlike
/// [`save_png`], JPEG bytes are not guaranteed stable across encoder
/// versions; PNG is the deterministic default.
pub fn save_jpeg(img: &RasterImage, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let rgb: Vec<u8> = img
        .pixels()
        .chunks_exact(4)
        .flat_map(|p| [p[0], p[1], p[2]])
        .collect();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = image::codecs::jpeg::JpegEncoder::new_with_quality(BufWriter::new(file), 90);
    encoder
        .encode(&rgb, img.width(), img.height(), image::ExtendedColorType::Rgb8)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    Ok(())
}
