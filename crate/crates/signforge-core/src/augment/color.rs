//! Color-filter sprite transforms: brightness, uniform noise, gaussian
//! blur, linear contrast, median blur.
//!
//! Alpha is untouched by every op except [`gaussian_blur`], which blurs all
//! four channels.

use crate::error::{Error, Result};
use crate::raster::{quantize, RasterImage};
use crate::rng::StreamRng;

/// Multiply RGB by `factor` and clamp; alpha untouched.
pub fn brightness(img: &RasterImage, factor: f64) -> Result<RasterImage> {
    if !(0.5..=2.0).contains(&factor) {
        return Err(Error::Parameter(format!(
            "brightness factor {factor} outside [0.50, 2.00]"
        )));
    }
    let mut out = img.clone();
    for px in out.pixels_mut().chunks_exact_mut(4) {
        for c in &mut px[..3] {
            *c = quantize(*c as f64 * factor);
        }
    }
    Ok(out)
}

/// Add independent integer noise uniform in `[-amplitude, +amplitude]` to
/// each RGB sample (row-major, channels in RGB order), clamped; alpha
/// untouched.
pub fn add_uniform_noise(img: &RasterImage, amplitude: i64, rng: &mut StreamRng) -> Result<RasterImage> {
    if !(1..=80).contains(&amplitude) {
        return Err(Error::Parameter(format!(
            "noise amplitude {amplitude} outside (0, 80]"
        )));
    }
    let mut out = img.clone();
    for px in out.pixels_mut().chunks_exact_mut(4) {
        for c in &mut px[..3] {
            let n = rng.uniform_i64(-amplitude, amplitude);
            *c = (*c as i64 + n).clamp(0, 255) as u8;
        }
    }
    Ok(out)
}

/// Build a normalized 1D Gaussian kernel with radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = kernel.iter().sum();
    for w in &mut kernel {
        *w /= sum;
    }
    kernel
}

/// Separable Gaussian blur on all four channels, radius `ceil(3 sigma)`,
/// edge-clamped. Both passes run in floating point; quantization happens
/// once on the final output.
pub fn gaussian_blur(img: &RasterImage, sigma: f64) -> Result<RasterImage> {
    if !(sigma > 0.0 && sigma <= 3.0) {
        return Err(Error::Parameter(format!(
            "blur sigma {sigma} outside (0, 3.0]"
        )));
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as i64;
    let w = img.width() as i64;
    let h = img.height() as i64;

    // Horizontal pass into a float buffer.
    let mut mid = vec![0.0f64; (w * h * 4) as usize];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0f64; 4];
            for (k, weight) in kernel.iter().enumerate() {
                let sx = (x + k as i64 - radius).clamp(0, w - 1);
                let p = img.get(sx as u32, y as u32);
                for c in 0..4 {
                    acc[c] += *weight * p[c] as f64;
                }
            }
            let base = ((y * w + x) * 4) as usize;
            mid[base..base + 4].copy_from_slice(&acc);
        }
    }

    // Vertical pass, quantized on write.
    let mut out = RasterImage::new(img.width(), img.height())?;
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0f64; 4];
            for (k, weight) in kernel.iter().enumerate() {
                let sy = (y + k as i64 - radius).clamp(0, h - 1);
                let base = ((sy * w + x) * 4) as usize;
                for c in 0..4 {
                    acc[c] += *weight * mid[base + c];
                }
            }
            out.set(
                x as u32,
                y as u32,
                [quantize(acc[0]), quantize(acc[1]), quantize(acc[2]), quantize(acc[3])],
            );
        }
    }
    Ok(out)
}

/// `out = round(128 + alpha * (in - 128))`, clamped; RGB only.
pub fn linear_contrast(img: &RasterImage, alpha: f64) -> Result<RasterImage> {
    if !(0.25..=1.0).contains(&alpha) {
        return Err(Error::Parameter(format!(
            "contrast alpha {alpha} outside [0.25, 1.00]"
        )));
    }
    let mut out = img.clone();
    for px in out.pixels_mut().chunks_exact_mut(4) {
        for c in &mut px[..3] {
            *c = quantize(128.0 + alpha * (*c as f64 - 128.0));
        }
    }
    Ok(out)
}

/// k x k median per RGB channel with an edge-clamped window; alpha untouched.
pub fn median_blur(img: &RasterImage, k: u32) -> Result<RasterImage> {
    if k != 3 && k != 5 {
        return Err(Error::Parameter(format!("median kernel {k} not in {{3, 5}}")));
    }
    let r = (k / 2) as i64;
    let w = img.width() as i64;
    let h = img.height() as i64;
    let mut out = img.clone();
    let mut window = Vec::with_capacity((k * k) as usize);
    for y in 0..h {
        for x in 0..w {
            let mut px = img.get(x as u32, y as u32);
            for (c, ch) in px.iter_mut().enumerate().take(3) {
                window.clear();
                for dy in -r..=r {
                    for dx in -r..=r {
                        let sx = (x + dx).clamp(0, w - 1);
                        let sy = (y + dy).clamp(0, h - 1);
                        window.push(img.get(sx as u32, sy as u32)[c]);
                    }
                }
                window.sort_unstable();
                *ch = window[window.len() / 2];
            }
            out.set(x as u32, y as u32, px);
        }
    }
    Ok(out)
}
