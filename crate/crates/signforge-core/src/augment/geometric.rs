//! Geometric sprite transforms: rotation, shear, scale, crop, translate.
//!
//! Rotation and shear expand the canvas to the transformed extent and fill
//! exposed regions with transparency; translate keeps the canvas and shifts
//! by whole pixels; crop and scale change dimensions arithmetically.

use crate::error::{Error, Result};
use crate::raster::{quantize, resize_bilinear, RasterImage};

/// Inverse-map `img` through the linear transform `m` (row-major 2x2,
/// applied about the image center), with the output canvas sized to the
/// ceiling of the transformed pixel-rectangle extent.
fn warp_linear(img: &RasterImage, m: [f64; 4]) -> Result<RasterImage> {
    let w = img.width() as f64;
    let h = img.height() as f64;
    // Transformed half-extents of the pixel rectangle corners (+-w/2, +-h/2).
    let corners = [
        (-w / 2.0, -h / 2.0),
        (w / 2.0, -h / 2.0),
        (w / 2.0, h / 2.0),
        (-w / 2.0, h / 2.0),
    ];
    let mut half_w: f64 = 0.0;
    let mut half_h: f64 = 0.0;
    for (x, y) in corners {
        half_w = half_w.max((m[0] * x + m[1] * y).abs());
        half_h = half_h.max((m[2] * x + m[3] * y).abs());
    }
    let out_w = (2.0 * half_w).ceil().max(1.0) as u32;
    let out_h = (2.0 * half_h).ceil().max(1.0) as u32;

    let det = m[0] * m[3] - m[1] * m[2];
    if det.abs() < 1e-12 {
        return Err(Error::Argument("singular transform matrix".into()));
    }
    let inv = [m[3] / det, -m[1] / det, -m[2] / det, m[0] / det];

    let src_cx = (img.width() as f64 - 1.0) / 2.0;
    let src_cy = (img.height() as f64 - 1.0) / 2.0;
    let dst_cx = (out_w as f64 - 1.0) / 2.0;
    let dst_cy = (out_h as f64 - 1.0) / 2.0;

    let mut out = RasterImage::new(out_w, out_h)?;
    for y in 0..out_h {
        let dy = y as f64 - dst_cy;
        for x in 0..out_w {
            let dx = x as f64 - dst_cx;
            let sx = inv[0] * dx + inv[1] * dy + src_cx;
            let sy = inv[2] * dx + inv[3] * dy + src_cy;
            let s = img.sample_bilinear_transparent(sx, sy);
            out.set(x, y, [quantize(s[0]), quantize(s[1]), quantize(s[2]), quantize(s[3])]);
        }
    }
    Ok(out)
}

/// Rotate about the image center. The canvas expands to the rotated extent
/// (`ceil(w|cos| + h|sin|)` by `ceil(w|sin| + h|cos|)`); exposed regions are
/// transparent. Angle 0 is pixel-exact.
pub fn rotate(img: &RasterImage, angle_deg: f64) -> Result<RasterImage> {
    if !(-25.0..=25.0).contains(&angle_deg) {
        return Err(Error::Parameter(format!(
            "rotation angle {angle_deg} outside [-25, 25]"
        )));
    }
    let t = angle_deg.to_radians();
    warp_linear(img, [t.cos(), -t.sin(), t.sin(), t.cos()])
}

/// Horizontal shear about the image center; canvas expands horizontally by
/// `ceil(h * |tan(shear)|)`; transparent fill.
pub fn shear(img: &RasterImage, shear_deg: f64) -> Result<RasterImage> {
    if !(-16.0..=16.0).contains(&shear_deg) {
        return Err(Error::Parameter(format!(
            "shear angle {shear_deg} outside [-16, 16]"
        )));
    }
    let t = shear_deg.to_radians().tan();
    warp_linear(img, [1.0, t, 0.0, 1.0])
}

/// Uniform scale by `factor` via bilinear resize.
pub fn scale(img: &RasterImage, factor: f64) -> Result<RasterImage> {
    if !(0.8..=1.2).contains(&factor) {
        return Err(Error::Parameter(format!(
            "scale factor {factor} outside [0.80, 1.20]"
        )));
    }
    let new_w = ((img.width() as f64 * factor).round() as u32).max(1);
    let new_h = ((img.height() as f64 * factor).round() as u32).max(1);
    resize_bilinear(img, new_w, new_h)
}

/// Remove the given fraction from each side independently. Pixel counts are
/// rounded half away from zero; the remaining window is copied exactly.
pub fn crop(
    img: &RasterImage,
    left_f: f64,
    right_f: f64,
    top_f: f64,
    bottom_f: f64,
) -> Result<RasterImage> {
    for (name, f) in [
        ("left", left_f),
        ("right", right_f),
        ("top", top_f),
        ("bottom", bottom_f),
    ] {
        if !(0.0..=0.30).contains(&f) {
            return Err(Error::Parameter(format!(
                "crop fraction {name}={f} outside [0, 0.30]"
            )));
        }
    }
    let left = (left_f * img.width() as f64).round() as u32;
    let right = (right_f * img.width() as f64).round() as u32;
    let top = (top_f * img.height() as f64).round() as u32;
    let bottom = (bottom_f * img.height() as f64).round() as u32;
    if left + right >= img.width() || top + bottom >= img.height() {
        return Err(Error::Parameter(format!(
            "crop ({left_f}, {right_f}, {top_f}, {bottom_f}) consumes the whole {}x{} image",
            img.width(),
            img.height()
        )));
    }
    let new_w = img.width() - left - right;
    let new_h = img.height() - top - bottom;
    let mut out = RasterImage::new(new_w, new_h)?;
    for y in 0..new_h {
        for x in 0..new_w {
            out.set(x, y, img.get(x + left, y + top));
        }
    }
    Ok(out)
}

/// Shift content by fractions of the image dimensions within a same-size
/// canvas; vacated pixels become transparent. The shift is rounded to whole
/// pixels (half away from zero).
pub fn translate(img: &RasterImage, dx_f: f64, dy_f: f64) -> Result<RasterImage> {
    for (name, f) in [("dx", dx_f), ("dy", dy_f)] {
        if !(-0.10..=0.10).contains(&f) {
            return Err(Error::Parameter(format!(
                "translate fraction {name}={f} outside [-0.10, 0.10]"
            )));
        }
    }
    let dx = (dx_f * img.width() as f64).round() as i64;
    let dy = (dy_f * img.height() as f64).round() as i64;
    if dx == 0 && dy == 0 {
        return Ok(img.clone());
    }
    let mut out = RasterImage::new(img.width(), img.height())?;
    for y in 0..img.height() as i64 {
        let sy = y - dy;
        if sy < 0 || sy >= img.height() as i64 {
            continue;
        }
        for x in 0..img.width() as i64 {
            let sx = x - dx;
            if sx < 0 || sx >= img.width() as i64 {
                continue;
            }
            out.set(x as u32, y as u32, img.get(sx as u32, sy as u32));
        }
    }
    Ok(out)
}
