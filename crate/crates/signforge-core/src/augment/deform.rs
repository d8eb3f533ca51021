//! Deformation transforms composed onto sign variants: piecewise affine
//! grid warps, perspective warps via a 4-point homography, and a baseline
//! JPEG compression roundtrip.

use crate::error::{Error, Result};
use crate::raster::{quantize, RasterImage};
use crate::rng::StreamRng;

// ---------------------------------------------------------------------------
// Homography
// ---------------------------------------------------------------------------

/// Solve the 3x3 homography (h33 = 1) mapping the four `src` points onto
/// the four `dst` points, by Gaussian elimination with partial pivoting on
/// the standard 8x8 system.
pub fn solve_homography(src: [[f64; 2]; 4], dst: [[f64; 2]; 4]) -> Result<[[f64; 3]; 3]> {
    let mut a = [[0.0f64; 9]; 8];
    for i in 0..4 {
        let [x, y] = src[i];
        let [u, v] = dst[i];
        a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -x * u, -y * u, u];
        a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -x * v, -y * v, v];
    }
    // Forward elimination.
    for col in 0..8 {
        let pivot = (col..8)
            .max_by(|&r1, &r2| a[r1][col].abs().partial_cmp(&a[r2][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-12 {
            return Err(Error::Argument(
                "degenerate corner correspondence, homography is singular".into(),
            ));
        }
        a.swap(col, pivot);
        let pivot_row = a[col];
        for row in a.iter_mut().skip(col + 1) {
            let f = row[col] / pivot_row[col];
            for (v, p) in row.iter_mut().zip(pivot_row.iter()).skip(col) {
                *v -= f * p;
            }
        }
    }
    // Back substitution.
    let mut h = [0.0f64; 8];
    for row in (0..8).rev() {
        let mut acc = a[row][8];
        for k in row + 1..8 {
            acc -= a[row][k] * h[k];
        }
        h[row] = acc / a[row][row];
    }
    Ok([
        [h[0], h[1], h[2]],
        [h[3], h[4], h[5]],
        [h[6], h[7], 1.0],
    ])
}

/// Apply a homography to a point.
pub fn apply_homography(h: &[[f64; 3]; 3], p: [f64; 2]) -> [f64; 2] {
    let w = h[2][0] * p[0] + h[2][1] * p[1] + h[2][2];
    [
        (h[0][0] * p[0] + h[0][1] * p[1] + h[0][2]) / w,
        (h[1][0] * p[0] + h[1][1] * p[1] + h[1][2]) / w,
    ]
}

fn image_corners(w: u32, h: u32) -> [[f64; 2]; 4] {
    let wf = w as f64;
    let hf = h as f64;
    [
        [-0.5, -0.5],
        [wf - 0.5, -0.5],
        [wf - 0.5, hf - 0.5],
        [-0.5, hf - 0.5],
    ]
}

/// Perspective warp: each corner of the image is displaced by independent
/// uniform offsets in `[-d, d]` with `d = strength * min(w, h) / 10`; the
/// homography from the corner correspondences is inverse-mapped with
/// bilinear sampling and transparent fill. Canvas size is unchanged.
///
/// Draw order: corners in (TL, TR, BR, BL) order, x offset then y offset.
pub fn perspective_warp(img: &RasterImage, strength: f64, rng: &mut StreamRng) -> Result<RasterImage> {
    if !(0.0..=0.9).contains(&strength) {
        return Err(Error::Parameter(format!(
            "perspective strength {strength} outside [0, 0.9]"
        )));
    }
    let d = strength * img.width().min(img.height()) as f64 / 10.0;
    let src = image_corners(img.width(), img.height());
    let mut dst = src;
    for corner in &mut dst {
        corner[0] += rng.uniform(-d, d);
        corner[1] += rng.uniform(-d, d);
    }
    // Solve the output-to-source map directly for inverse sampling.
    let h_inv = solve_homography(dst, src)?;
    let mut out = RasterImage::new(img.width(), img.height())?;
    for y in 0..img.height() {
        for x in 0..img.width() {
            let [sx, sy] = apply_homography(&h_inv, [x as f64, y as f64]);
            let s = img.sample_bilinear_transparent(sx, sy);
            out.set(x, y, [quantize(s[0]), quantize(s[1]), quantize(s[2]), quantize(s[3])]);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Piecewise affine
// ---------------------------------------------------------------------------

/// Piecewise affine warp on a 4x4 control grid. The four interior control
/// points are displaced by independent uniform offsets in `[-d, d]` with
/// `d = strength * min(w, h) / 20`; each grid cell is split into two
/// triangles and inverse-mapped affinely with bilinear sampling.
///
/// Draw order: interior points row-major ((1,1), (2,1), (1,2), (2,2) in
/// (col,row) terms), x offset then y offset.
pub fn piecewise_affine(img: &RasterImage, strength: f64, rng: &mut StreamRng) -> Result<RasterImage> {
    if !(0.0..=0.9).contains(&strength) {
        return Err(Error::Parameter(format!(
            "piecewise affine strength {strength} outside [0, 0.9]"
        )));
    }
    let w = img.width() as f64;
    let h = img.height() as f64;
    let d = strength * img.width().min(img.height()) as f64 / 20.0;

    // Source grid over the pixel rectangle; boundary points stay fixed.
    let gx = |i: usize| -0.5 + i as f64 * w / 3.0;
    let gy = |j: usize| -0.5 + j as f64 * h / 3.0;
    let mut src_pts = [[0.0f64; 2]; 16];
    for j in 0..4 {
        for i in 0..4 {
            src_pts[j * 4 + i] = [gx(i), gy(j)];
        }
    }
    let mut dst_pts = src_pts;
    for j in 1..3 {
        for i in 1..3 {
            dst_pts[j * 4 + i][0] += rng.uniform(-d, d);
            dst_pts[j * 4 + i][1] += rng.uniform(-d, d);
        }
    }

    // Two triangles per cell, indices into the 16-point grid.
    let mut tris: Vec<[usize; 3]> = Vec::with_capacity(18);
    for j in 0..3 {
        for i in 0..3 {
            let p00 = j * 4 + i;
            let p10 = j * 4 + i + 1;
            let p01 = (j + 1) * 4 + i;
            let p11 = (j + 1) * 4 + i + 1;
            tris.push([p00, p10, p01]);
            tris.push([p10, p11, p01]);
        }
    }

    let barycentric = |tri: &[usize; 3], px: f64, py: f64| -> Option<[f64; 3]> {
        let a = dst_pts[tri[0]];
        let b = dst_pts[tri[1]];
        let c = dst_pts[tri[2]];
        let den = (b[1] - c[1]) * (a[0] - c[0]) + (c[0] - b[0]) * (a[1] - c[1]);
        if den.abs() < 1e-12 {
            return None;
        }
        let u = ((b[1] - c[1]) * (px - c[0]) + (c[0] - b[0]) * (py - c[1])) / den;
        let v = ((c[1] - a[1]) * (px - c[0]) + (a[0] - c[0]) * (py - c[1])) / den;
        let t = 1.0 - u - v;
        const EPS: f64 = 1e-9;
        if u >= -EPS && v >= -EPS && t >= -EPS {
            Some([u, v, t])
        } else {
            None
        }
    };

    let mut out = RasterImage::new(img.width(), img.height())?;
    for y in 0..img.height() {
        let py = y as f64;
        for x in 0..img.width() {
            let px = x as f64;
            // Hint: the undisplaced cell containing this pixel; displacements
            // are small, so its two triangles almost always match.
            let ci = (((px + 0.5) * 3.0 / w) as usize).min(2);
            let cj = (((py + 0.5) * 3.0 / h) as usize).min(2);
            let hint = (cj * 3 + ci) * 2;
            let mut mapped = None;
            for idx in [hint, hint + 1].into_iter().chain(0..tris.len()) {
                let tri = &tris[idx];
                if let Some([u, v, t]) = barycentric(tri, px, py) {
                    let a = src_pts[tri[0]];
                    let b = src_pts[tri[1]];
                    let c = src_pts[tri[2]];
                    mapped = Some([
                        u * a[0] + v * b[0] + t * c[0],
                        u * a[1] + v * b[1] + t * c[1],
                    ]);
                    break;
                }
            }
            if let Some([sx, sy]) = mapped {
                let s = img.sample_bilinear_transparent(sx, sy);
                out.set(x, y, [quantize(s[0]), quantize(s[1]), quantize(s[2]), quantize(s[3])]);
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// JPEG compression roundtrip
// ---------------------------------------------------------------------------

/// ITU-T T.81 Annex K luminance quantization table, natural order.
#[rustfmt::skip]
const LUMA_QUANT: [i32; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61,
    12, 12, 14, 19, 26, 58, 60, 55,
    14, 13, 16, 24, 40, 57, 69, 56,
    14, 17, 22, 29, 51, 87, 80, 62,
    18, 22, 37, 56, 68, 109, 103, 77,
    24, 35, 55, 64, 81, 104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// ITU-T T.81 Annex K chrominance quantization table, natural order.
#[rustfmt::skip]
const CHROMA_QUANT: [i32; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99,
    18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99,
    47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
];

/// IJG quality scaling: `scale = 5000/q` below 50, else `200 - 2q`;
/// entries clamped to `[1, 255]`.
fn scaled_quant_table(base: &[i32; 64], quality: i64) -> [f64; 64] {
    let q = quality.clamp(1, 100);
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let mut out = [0.0f64; 64];
    for (o, b) in out.iter_mut().zip(base.iter()) {
        *o = ((*b as i64 * scale + 50) / 100).clamp(1, 255) as f64;
    }
    out
}

fn dct_cos_table() -> [[f64; 8]; 8] {
    let mut t = [[0.0f64; 8]; 8];
    for (x, row) in t.iter_mut().enumerate() {
        for (u, v) in row.iter_mut().enumerate() {
            *v = ((2.0 * x as f64 + 1.0) * u as f64 * std::f64::consts::PI / 16.0).cos();
        }
    }
    t
}

/// Run one plane through the DCT-quantize-dequantize-IDCT cycle that a
/// baseline JPEG codec applies. Entropy coding is lossless, so this is the
/// complete pixel effect of an encode/decode roundtrip.
fn quantize_plane(plane: &mut [f64], pw: usize, ph: usize, table: &[f64; 64]) {
    let cos = dct_cos_table();
    let c = |u: usize| if u == 0 { std::f64::consts::FRAC_1_SQRT_2 } else { 1.0 };
    let bw = pw.div_ceil(8);
    let bh = ph.div_ceil(8);
    let mut block = [0.0f64; 64];
    let mut freq = [0.0f64; 64];
    for by in 0..bh {
        for bx in 0..bw {
            // Gather with edge replication and level shift.
            for y in 0..8 {
                let sy = (by * 8 + y).min(ph - 1);
                for x in 0..8 {
                    let sx = (bx * 8 + x).min(pw - 1);
                    block[y * 8 + x] = plane[sy * pw + sx] - 128.0;
                }
            }
            // Forward DCT, quantize, dequantize.
            for v in 0..8 {
                for u in 0..8 {
                    let mut acc = 0.0;
                    for y in 0..8 {
                        for x in 0..8 {
                            acc += block[y * 8 + x] * cos[x][u] * cos[y][v];
                        }
                    }
                    let coef = 0.25 * c(u) * c(v) * acc;
                    let q = table[v * 8 + u];
                    freq[v * 8 + u] = (coef / q).round() * q;
                }
            }
            // Inverse DCT and scatter (skip replicated padding).
            for y in 0..8 {
                let dy = by * 8 + y;
                if dy >= ph {
                    continue;
                }
                for x in 0..8 {
                    let dx = bx * 8 + x;
                    if dx >= pw {
                        continue;
                    }
                    let mut acc = 0.0;
                    for v in 0..8 {
                        for u in 0..8 {
                            acc += c(u) * c(v) * freq[v * 8 + u] * cos[x][u] * cos[y][v];
                        }
                    }
                    plane[dy * pw + dx] = 0.25 * acc + 128.0;
                }
            }
        }
    }
}

/// Simulate a baseline JPEG encode/decode of the RGB channels at quality
/// `q = 100 - strength`: JFIF YCbCr conversion, 4:2:0 chroma subsampling,
/// 8x8 DCT quantization with IJG-scaled Annex K tables, then the reverse.
/// Alpha passes through unchanged.
pub fn jpeg_roundtrip(img: &RasterImage, strength: i64) -> Result<RasterImage> {
    if !(0..=85).contains(&strength) {
        return Err(Error::Parameter(format!(
            "jpeg strength {strength} outside [0, 85]"
        )));
    }
    let quality = 100 - strength;
    let w = img.width() as usize;
    let h = img.height() as usize;

    // RGB -> YCbCr (JFIF), rounded to integers as an encoder would.
    let mut y_plane = vec![0.0f64; w * h];
    let mut cb_full = vec![0.0f64; w * h];
    let mut cr_full = vec![0.0f64; w * h];
    for (i, px) in img.pixels().chunks_exact(4).enumerate() {
        let r = px[0] as f64;
        let g = px[1] as f64;
        let b = px[2] as f64;
        y_plane[i] = (0.299 * r + 0.587 * g + 0.114 * b).round().clamp(0.0, 255.0);
        cb_full[i] = (128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b).round().clamp(0.0, 255.0);
        cr_full[i] = (128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b).round().clamp(0.0, 255.0);
    }

    // 4:2:0 subsampling by 2x2 box average.
    let cw = w.div_ceil(2);
    let ch = h.div_ceil(2);
    let subsample = |full: &[f64]| -> Vec<f64> {
        let mut sub = vec![0.0f64; cw * ch];
        for sy in 0..ch {
            for sx in 0..cw {
                let mut acc = 0.0;
                let mut n = 0.0;
                for dy in 0..2 {
                    for dx in 0..2 {
                        let x = sx * 2 + dx;
                        let y = sy * 2 + dy;
                        if x < w && y < h {
                            acc += full[y * w + x];
                            n += 1.0;
                        }
                    }
                }
                sub[sy * cw + sx] = acc / n;
            }
        }
        sub
    };
    let mut cb = subsample(&cb_full);
    let mut cr = subsample(&cr_full);

    let luma_table = scaled_quant_table(&LUMA_QUANT, quality);
    let chroma_table = scaled_quant_table(&CHROMA_QUANT, quality);
    quantize_plane(&mut y_plane, w, h, &luma_table);
    quantize_plane(&mut cb, cw, ch, &chroma_table);
    quantize_plane(&mut cr, cw, ch, &chroma_table);

    // Upsample chroma by replication and convert back.
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let yy = y_plane[i];
            let cbv = cb[(y / 2) * cw + x / 2] - 128.0;
            let crv = cr[(y / 2) * cw + x / 2] - 128.0;
            let r = yy + 1.402 * crv;
            let g = yy - 0.344136 * cbv - 0.714136 * crv;
            let b = yy + 1.772 * cbv;
            let a = img.get(x as u32, y as u32)[3];
            out.set(x as u32, y as u32, [quantize(r), quantize(g), quantize(b), a]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{RngKey, StageTag};

    fn rng(n: u64) -> StreamRng {
        RngKey::new(99, n, StageTag::VariantRender).stream()
    }

    fn sprite(w: u32, h: u32) -> RasterImage {
        let mut img = RasterImage::new(w, h).unwrap();
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                img.set(x, y, [(x * 19 % 256) as u8, (y * 23 % 256) as u8, 77, 255]);
            }
        }
        img
    }

    #[test]
    fn homography_identity_within_tolerance() {
        let pts = [[0.0, 0.0], [10.0, 0.0], [10.0, 8.0], [0.0, 8.0]];
        let h = solve_homography(pts, pts).unwrap();
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        for r in 0..3 {
            for c in 0..3 {
                assert!((h[r][c] - id[r][c]).abs() < 1e-9, "h[{r}][{c}] = {}", h[r][c]);
            }
        }
    }

    #[test]
    fn homography_maps_corners_to_targets() {
        let mut r = rng(1);
        for _ in 0..100 {
            let src = [[0.0, 0.0], [64.0, 0.0], [64.0, 48.0], [0.0, 48.0]];
            let mut dst = src;
            for corner in &mut dst {
                corner[0] += r.uniform(-6.0, 6.0);
                corner[1] += r.uniform(-6.0, 6.0);
            }
            let h = solve_homography(src, dst).unwrap();
            for i in 0..4 {
                let mapped = apply_homography(&h, src[i]);
                assert!((mapped[0] - dst[i][0]).abs() < 1e-6);
                assert!((mapped[1] - dst[i][1]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn homography_preserves_collinearity() {
        let mut r = rng(2);
        let src = [[0.0, 0.0], [32.0, 0.0], [32.0, 32.0], [0.0, 32.0]];
        let mut dst = src;
        for corner in &mut dst {
            corner[0] += r.uniform(-3.0, 3.0);
            corner[1] += r.uniform(-3.0, 3.0);
        }
        let h = solve_homography(src, dst).unwrap();
        for _ in 0..50 {
            let a = [r.uniform(0.0, 32.0), r.uniform(0.0, 32.0)];
            let b = [r.uniform(0.0, 32.0), r.uniform(0.0, 32.0)];
            let t = r.next_f64();
            let c = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            let (ma, mb, mc) = (
                apply_homography(&h, a),
                apply_homography(&h, b),
                apply_homography(&h, c),
            );
            // Perpendicular distance of mc from line (ma, mb).
            let (dx, dy) = (mb[0] - ma[0], mb[1] - ma[1]);
            let len = (dx * dx + dy * dy).sqrt();
            if len < 1e-6 {
                continue;
            }
            let dist = ((mc[0] - ma[0]) * dy - (mc[1] - ma[1]) * dx).abs() / len;
            assert!(dist < 1e-3, "collinearity broken: {dist}");
        }
    }

    #[test]
    fn perspective_zero_strength_is_identity() {
        let img = sprite(17, 13);
        let out = perspective_warp(&img, 0.0, &mut rng(3)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn perspective_deterministic_and_bounded() {
        let img = sprite(24, 24);
        let a = perspective_warp(&img, 0.5, &mut rng(4)).unwrap();
        let b = perspective_warp(&img, 0.5, &mut rng(4)).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.width(), a.height()), (24, 24));
        assert!(perspective_warp(&img, 1.0, &mut rng(4)).is_err());
    }

    #[test]
    fn piecewise_zero_strength_is_identity() {
        let img = sprite(19, 11);
        let out = piecewise_affine(&img, 0.0, &mut rng(5)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn piecewise_transparent_stays_transparent() {
        let img = RasterImage::new(12, 12).unwrap();
        let out = piecewise_affine(&img, 0.8, &mut rng(6)).unwrap();
        assert!(out.pixels().chunks_exact(4).all(|p| p[3] == 0));
    }

    #[test]
    fn piecewise_fixed_seed_reproducible() {
        let img = sprite(30, 30);
        let a = piecewise_affine(&img, 0.6, &mut rng(7)).unwrap();
        let b = piecewise_affine(&img, 0.6, &mut rng(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn jpeg_preserves_dimensions_and_alpha() {
        let mut img = sprite(21, 15);
        img.set(0, 0, [0, 0, 0, 0]);
        img.set(5, 5, [10, 20, 30, 117]);
        for s in [0i64, 40, 85] {
            let out = jpeg_roundtrip(&img, s).unwrap();
            assert_eq!((out.width(), out.height()), (21, 15));
            for (o, i) in out.pixels().chunks_exact(4).zip(img.pixels().chunks_exact(4)) {
                assert_eq!(o[3], i[3], "alpha changed at strength {s}");
            }
        }
        assert!(jpeg_roundtrip(&img, 86).is_err());
        assert!(jpeg_roundtrip(&img, -1).is_err());
    }

    #[test]
    fn jpeg_quality_100_near_lossless_on_smooth_gradient() {
        // Gray gradient: chroma is constant 128, so subsampling is exact and
        // the only error source is step-1 DCT quantization.
        let mut img = RasterImage::new(32, 32).unwrap();
        for y in 0..32 {
            for x in 0..32 {
                let v = (x * 4 + y * 2) as u8;
                img.set(x, y, [v, v, v, 255]);
            }
        }
        let out = jpeg_roundtrip(&img, 0).unwrap();
        let mut max_err = 0i64;
        for (o, i) in out.pixels().chunks_exact(4).zip(img.pixels().chunks_exact(4)) {
            for c in 0..3 {
                max_err = max_err.max((o[c] as i64 - i[c] as i64).abs());
            }
        }
        assert!(max_err <= 2, "max roundtrip error {max_err} at q=100");
    }

    #[test]
    fn jpeg_strength_85_visibly_lossy() {
        let img = sprite(32, 32);
        let out = jpeg_roundtrip(&img, 85).unwrap();
        let mut abs_sum = 0u64;
        let mut n = 0u64;
        for (o, i) in out.pixels().chunks_exact(4).zip(img.pixels().chunks_exact(4)) {
            for c in 0..3 {
                abs_sum += (o[c] as i64 - i[c] as i64).unsigned_abs();
                n += 1;
            }
        }
        let mae = abs_sum as f64 / n as f64;
        assert!(mae > 0.0, "strength 85 left a textured image untouched");
    }
}
