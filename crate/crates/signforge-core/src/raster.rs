//! Pixel-level primitives shared by every pipeline stage: RGBA8 buffers,
//! alpha-over compositing, bilinear resampling, and tight alpha bounding boxes.
//!
//! All intermediate arithmetic runs in `f64` and is quantized once per
//! operation output with [`quantize`], which rounds half away from zero.
//! Alpha is straight (not premultiplied) throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quantize a floating-point channel value to 8 bits.
///
/// Rounds half away from zero (the behaviour of `f64::round`), then clamps
/// to `[0, 255]`. This is the single rounding mode used by the whole crate.
#[inline]
pub fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// A width x height RGBA8 pixel buffer, row-major, straight alpha.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl RasterImage {
    /// Fully transparent image of the given size.
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Argument(format!(
                "image dimensions must be >= 1, got {width}x{height}"
            )));
        }
        Ok(RasterImage {
            width,
            height,
            pixels: vec![0; width as usize * height as usize * 4],
        })
    }

    /// Image filled with one RGBA value.
    pub fn filled(width: u32, height: u32, rgba: [u8; 4]) -> Result<Self> {
        let mut img = Self::new(width, height)?;
        for px in img.pixels.chunks_exact_mut(4) {
            px.copy_from_slice(&rgba);
        }
        Ok(img)
    }

    /// Wrap an existing RGBA buffer. Length must be `width * height * 4`.
    pub fn from_raw(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Argument(format!(
                "image dimensions must be >= 1, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize * 4;
        if pixels.len() != expected {
            return Err(Error::Argument(format!(
                "pixel buffer length {} does not match {}x{}x4 = {}",
                pixels.len(),
                width,
                height,
                expected
            )));
        }
        Ok(RasterImage {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    fn index(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 4
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> [u8; 4] {
        let i = self.index(x, y);
        [
            self.pixels[i],
            self.pixels[i + 1],
            self.pixels[i + 2],
            self.pixels[i + 3],
        ]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, rgba: [u8; 4]) {
        let i = self.index(x, y);
        self.pixels[i..i + 4].copy_from_slice(&rgba);
    }

    /// Sample with bilinear interpolation on all four channels.
    /// Coordinates are in pixel units where `(0, 0)` is the center of the
    /// top-left pixel. Out-of-range samples clamp to the edge.
    pub fn sample_bilinear_clamped(&self, x: f64, y: f64) -> [f64; 4] {
        let xc = x.clamp(0.0, (self.width - 1) as f64);
        let yc = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = xc.floor() as u32;
        let y0 = yc.floor() as u32;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = xc - x0 as f64;
        let fy = yc - y0 as f64;
        let p00 = self.get(x0, y0);
        let p10 = self.get(x1, y0);
        let p01 = self.get(x0, y1);
        let p11 = self.get(x1, y1);
        let mut out = [0.0; 4];
        for c in 0..4 {
            let top = p00[c] as f64 * (1.0 - fx) + p10[c] as f64 * fx;
            let bot = p01[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
            out[c] = top * (1.0 - fy) + bot * fy;
        }
        out
    }

    /// Sample with bilinear interpolation, treating everything outside the
    /// image as transparent black. Used by the geometric warps so sprite
    /// edges fade into transparency instead of smearing.
    pub fn sample_bilinear_transparent(&self, x: f64, y: f64) -> [f64; 4] {
        if x <= -1.0 || y <= -1.0 || x >= self.width as f64 || y >= self.height as f64 {
            return [0.0; 4];
        }
        let x0 = x.floor() as i64;
        let y0 = y.floor() as i64;
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let fetch = |px: i64, py: i64| -> [f64; 4] {
            if px < 0 || py < 0 || px >= self.width as i64 || py >= self.height as i64 {
                [0.0; 4]
            } else {
                let p = self.get(px as u32, py as u32);
                [p[0] as f64, p[1] as f64, p[2] as f64, p[3] as f64]
            }
        };
        let p00 = fetch(x0, y0);
        let p10 = fetch(x0 + 1, y0);
        let p01 = fetch(x0, y0 + 1);
        let p11 = fetch(x0 + 1, y0 + 1);
        let mut out = [0.0; 4];
        for c in 0..4 {
            let top = p00[c] * (1.0 - fx) + p10[c] * fx;
            let bot = p01[c] * (1.0 - fx) + p11[c] * fx;
            out[c] = top * (1.0 - fy) + bot * fy;
        }
        out
    }
}

/// Pixel-space tight bounding box plus class index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub class_index: u8,
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BBox {
    /// Normalized YOLO coordinates `(cx, cy, w, h)` for an image of the
    /// given dimensions.
    pub fn to_yolo(&self, img_w: u32, img_h: u32) -> [f64; 4] {
        let iw = img_w as f64;
        let ih = img_h as f64;
        [
            (self.x as f64 + self.w as f64 / 2.0) / iw,
            (self.y as f64 + self.h as f64 / 2.0) / ih,
            self.w as f64 / iw,
            self.h as f64 / ih,
        ]
    }

    /// Clip to image bounds. Returns `None` if nothing remains.
    pub fn clipped(&self, img_w: u32, img_h: u32) -> Option<BBox> {
        let x0 = self.x.min(img_w);
        let y0 = self.y.min(img_h);
        let x1 = (self.x + self.w).min(img_w);
        let y1 = (self.y + self.h).min(img_h);
        if x1 <= x0 || y1 <= y0 {
            return None;
        }
        Some(BBox {
            class_index: self.class_index,
            x: x0,
            y: y0,
            w: x1 - x0,
            h: y1 - y0,
        })
    }
}

/// Blend `fg` over `bg` at `offset` with the straight-alpha over operator:
/// `out = a * fg + (1 - a) * bg` per RGB channel with `a = fg_alpha / 255`,
/// and `out_alpha = fg_a + bg_a * (1 - a)`. The foreground must fit fully
/// inside the background.
pub fn alpha_over(fg: &RasterImage, bg: &RasterImage, offset: (u32, u32)) -> Result<RasterImage> {
    let (ox, oy) = offset;
    if ox as u64 + fg.width() as u64 > bg.width() as u64
        || oy as u64 + fg.height() as u64 > bg.height() as u64
    {
        return Err(Error::Placement(format!(
            "{}x{} foreground at ({}, {}) exceeds {}x{} background",
            fg.width(),
            fg.height(),
            ox,
            oy,
            bg.width(),
            bg.height()
        )));
    }
    let mut out = bg.clone();
    for y in 0..fg.height() {
        for x in 0..fg.width() {
            let f = fg.get(x, y);
            if f[3] == 0 {
                continue;
            }
            let b = out.get(ox + x, oy + y);
            let a = f[3] as f64 / 255.0;
            let blended = [
                quantize(a * f[0] as f64 + (1.0 - a) * b[0] as f64),
                quantize(a * f[1] as f64 + (1.0 - a) * b[1] as f64),
                quantize(a * f[2] as f64 + (1.0 - a) * b[2] as f64),
                quantize(f[3] as f64 + b[3] as f64 * (1.0 - a)),
            ];
            out.set(ox + x, oy + y, blended);
        }
    }
    Ok(out)
}

/// Resize with bilinear interpolation on all four channels, edge-clamped.
/// A resize to the original dimensions is pixel-exact.
pub fn resize_bilinear(img: &RasterImage, new_w: u32, new_h: u32) -> Result<RasterImage> {
    if new_w == 0 || new_h == 0 {
        return Err(Error::Argument(format!(
            "resize target must be >= 1, got {new_w}x{new_h}"
        )));
    }
    if new_w == img.width() && new_h == img.height() {
        return Ok(img.clone());
    }
    let mut out = RasterImage::new(new_w, new_h)?;
    let sx = img.width() as f64 / new_w as f64;
    let sy = img.height() as f64 / new_h as f64;
    for y in 0..new_h {
        let src_y = (y as f64 + 0.5) * sy - 0.5;
        for x in 0..new_w {
            let src_x = (x as f64 + 0.5) * sx - 0.5;
            let s = img.sample_bilinear_clamped(src_x, src_y);
            out.set(x, y, [quantize(s[0]), quantize(s[1]), quantize(s[2]), quantize(s[3])]);
        }
    }
    Ok(out)
}

/// Smallest rectangle containing every pixel with alpha > 0, or `None` for a
/// fully transparent image. The class index is set to 0; callers attach the
/// real class.
pub fn tight_alpha_bbox(img: &RasterImage) -> Option<BBox> {
    let mut min_x = u32::MAX;
    let mut min_y = u32::MAX;
    let mut max_x = 0u32;
    let mut max_y = 0u32;
    let mut any = false;
    for y in 0..img.height() {
        let row = y as usize * img.width() as usize * 4;
        for x in 0..img.width() {
            if img.pixels()[row + x as usize * 4 + 3] > 0 {
                any = true;
                min_x = min_x.min(x);
                min_y = min_y.min(y);
                max_x = max_x.max(x);
                max_y = max_y.max(y);
            }
        }
    }
    if !any {
        return None;
    }
    Some(BBox {
        class_index: 0,
        x: min_x,
        y: min_y,
        w: max_x - min_x + 1,
        h: max_y - min_y + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn checker(w: u32, h: u32) -> RasterImage {
        let mut img = RasterImage::new(w, h).unwrap();
        for y in 0..h {
            for x in 0..w {
                let v = if (x + y) % 2 == 0 { 200 } else { 40 };
                img.set(x, y, [v, 255 - v, v / 2, 255]);
            }
        }
        img
    }

    #[test]
    fn alpha_over_transparent_fg_is_identity() {
        let fg = RasterImage::new(3, 3).unwrap();
        let bg = checker(5, 5);
        let out = alpha_over(&fg, &bg, (1, 1)).unwrap();
        assert_eq!(out, bg);
    }

    #[test]
    fn alpha_over_opaque_fg_replaces_rect() {
        let fg = RasterImage::filled(2, 2, [10, 20, 30, 255]).unwrap();
        let bg = checker(4, 4);
        let out = alpha_over(&fg, &bg, (1, 1)).unwrap();
        for y in 1..3 {
            for x in 1..3 {
                assert_eq!(out.get(x, y), [10, 20, 30, 255]);
            }
        }
        assert_eq!(out.get(0, 0), bg.get(0, 0));
    }

    #[test]
    fn alpha_over_half_transparent_blend() {
        // Hand evaluation: a = 128/255, out_r = 128/255 * 200 = 100.39 -> 100.
        let fg = RasterImage::filled(1, 1, [200, 0, 0, 128]).unwrap();
        let bg = RasterImage::filled(1, 1, [0, 0, 0, 255]).unwrap();
        let out = alpha_over(&fg, &bg, (0, 0)).unwrap();
        assert_eq!(out.get(0, 0), [100, 0, 0, 255]);
    }

    #[test]
    fn alpha_over_rejects_out_of_bounds() {
        let fg = RasterImage::new(3, 3).unwrap();
        let bg = RasterImage::new(4, 4).unwrap();
        assert!(matches!(
            alpha_over(&fg, &bg, (2, 0)),
            Err(Error::Placement(_))
        ));
    }

    #[test]
    fn resize_identity_is_pixel_exact() {
        let img = checker(7, 5);
        let out = resize_bilinear(&img, 7, 5).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn resize_constant_stays_constant() {
        let img = RasterImage::filled(3, 4, [77, 88, 99, 255]).unwrap();
        let out = resize_bilinear(&img, 9, 2).unwrap();
        for y in 0..2 {
            for x in 0..9 {
                assert_eq!(out.get(x, y), [77, 88, 99, 255]);
            }
        }
    }

    #[test]
    fn resize_2x1_to_4x1_matches_hand_weights() {
        // Source centers at 0 and 1; dst x maps to ((x + 0.5) / 2) - 0.5.
        // x=0 -> -0.25 (clamped, p0), x=1 -> 0.25, x=2 -> 0.75, x=3 -> 1.25 (clamped, p1).
        // Channel value 0..255: lerp(0, 255, 0.25) = 63.75 -> 64; 0.75 -> 191.25 -> 191.
        let mut img = RasterImage::new(2, 1).unwrap();
        img.set(0, 0, [0, 0, 0, 255]);
        img.set(1, 0, [255, 255, 255, 255]);
        let out = resize_bilinear(&img, 4, 1).unwrap();
        let expected = [0u8, 64, 191, 255];
        for (x, want) in expected.iter().enumerate() {
            let got = out.get(x as u32, 0);
            assert_eq!(got[0], *want, "x={x}");
            assert_eq!(got[3], 255);
        }
    }

    #[test]
    fn resize_rejects_zero_dimension() {
        let img = checker(2, 2);
        assert!(resize_bilinear(&img, 0, 3).is_err());
        assert!(resize_bilinear(&img, 3, 0).is_err());
    }

    #[test]
    fn bbox_of_transparent_is_none() {
        let img = RasterImage::new(4, 4).unwrap();
        assert_eq!(tight_alpha_bbox(&img), None);
    }

    #[test]
    fn bbox_of_opaque_is_full() {
        let img = RasterImage::filled(6, 3, [1, 2, 3, 255]).unwrap();
        let bb = tight_alpha_bbox(&img).unwrap();
        assert_eq!((bb.x, bb.y, bb.w, bb.h), (0, 0, 6, 3));
    }

    #[test]
    fn bbox_two_pixel_case() {
        // alpha > 0 only at (1,1) and (2,3): brute-force scan of all 16
        // pixels gives x in {1,2}, y in {1,3} -> (1, 1, 2, 3).
        let mut img = RasterImage::new(4, 4).unwrap();
        img.set(1, 1, [0, 0, 0, 10]);
        img.set(2, 3, [0, 0, 0, 200]);
        let bb = tight_alpha_bbox(&img).unwrap();
        assert_eq!((bb.x, bb.y, bb.w, bb.h), (1, 1, 2, 3));
    }

    #[test]
    fn yolo_roundtrip() {
        let bb = BBox {
            class_index: 2,
            x: 10,
            y: 20,
            w: 30,
            h: 40,
        };
        let [cx, cy, w, h] = bb.to_yolo(100, 200);
        assert!((cx - 0.25).abs() < 1e-12);
        assert!((cy - 0.2).abs() < 1e-12);
        assert!((w - 0.3).abs() < 1e-12);
        assert!((h - 0.2).abs() < 1e-12);
    }

    /// Brute-force oracle: scan every pixel. This IS the definition of the
    /// tight alpha bbox; the implementation must agree with it.
    fn bbox_oracle(img: &RasterImage) -> Option<(u32, u32, u32, u32)> {
        let mut coords = vec![];
        for y in 0..img.height() {
            for x in 0..img.width() {
                if img.get(x, y)[3] > 0 {
                    coords.push((x, y));
                }
            }
        }
        let min_x = coords.iter().map(|c| c.0).min()?;
        let max_x = coords.iter().map(|c| c.0).max()?;
        let min_y = coords.iter().map(|c| c.1).min()?;
        let max_y = coords.iter().map(|c| c.1).max()?;
        Some((min_x, min_y, max_x - min_x + 1, max_y - min_y + 1))
    }

    proptest! {
        #[test]
        fn alpha_over_channels_never_wrap(
            fr in 0u8..=255, fgc in 0u8..=255, fb in 0u8..=255, fa in 0u8..=255,
            br in 0u8..=255, bgc in 0u8..=255, bb in 0u8..=255,
        ) {
            let fg = RasterImage::filled(1, 1, [fr, fgc, fb, fa]).unwrap();
            let bg = RasterImage::filled(1, 1, [br, bgc, bb, 255]).unwrap();
            let out = alpha_over(&fg, &bg, (0, 0)).unwrap();
            let o = out.get(0, 0);
            // u8 cannot wrap by type, so check the blend stays between endpoints.
            prop_assert!(o[0] >= fr.min(br) && o[0] <= fr.max(br));
            prop_assert_eq!(o[3], 255);
        }

        #[test]
        fn transparent_overlay_is_identity_on_random_bg(
            pixels in proptest::collection::vec(0u8..=255, 5 * 4 * 4)
        ) {
            let bg = RasterImage::from_raw(5, 4, pixels).unwrap();
            let fg = RasterImage::new(5, 4).unwrap();
            let out = alpha_over(&fg, &bg, (0, 0)).unwrap();
            prop_assert_eq!(out, bg);
        }

        #[test]
        fn bbox_matches_exhaustive_scan(
            alphas in proptest::collection::vec(0u8..=255, 6 * 5)
        ) {
            let mut img = RasterImage::new(6, 5).unwrap();
            for (i, a) in alphas.iter().enumerate() {
                let x = (i % 6) as u32;
                let y = (i / 6) as u32;
                img.set(x, y, [0, 0, 0, *a]);
            }
            let got = tight_alpha_bbox(&img).map(|b| (b.x, b.y, b.w, b.h));
            prop_assert_eq!(got, bbox_oracle(&img));
        }

        #[test]
        fn resize_has_requested_dims(w in 1u32..12, h in 1u32..12, nw in 1u32..20, nh in 1u32..20) {
            let img = checker(w, h);
            let out = resize_bilinear(&img, nw, nh).unwrap();
            prop_assert_eq!((out.width(), out.height()), (nw, nh));
        }
    }
}
