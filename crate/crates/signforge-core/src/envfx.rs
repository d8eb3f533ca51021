//! Stage 3: environmental conditions. Seven photometric/overlay effects
//! (rain, snow, fog, sun flare, day, night, dawn) that never change image
//! dimensions or the sign bounding box.

use serde::{Deserialize, Serialize};

use crate::augment::color::gaussian_blur;
use crate::error::Result;
use crate::raster::{quantize, RasterImage};
use crate::rng::StreamRng;

/// One environmental condition with its sampled parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvCondition {
    Rain {
        streaks: u32,
        slant_deg: f64,
        length_range: [f64; 2],
        color: [u8; 3],
        opacity: f64,
        blur_sigma: f64,
    },
    Snow {
        flakes: u32,
        radius_range: [f64; 2],
        opacity: f64,
        brightness: f64,
    },
    Fog {
        opacity: f64,
        color: [u8; 3],
    },
    SunFlare {
        center_x: f64,
        center_y: f64,
        radius: f64,
        peak: f64,
    },
    Day {
        brightness: f64,
        red_shift: f64,
        blue_shift: f64,
    },
    Night {
        gamma: f64,
        blue_shift: f64,
    },
    Dawn {
        color: [u8; 3],
        opacity: f64,
        brightness: f64,
    },
}

impl EnvCondition {
    pub fn kind_name(&self) -> &'static str {
        match self {
            EnvCondition::Rain { .. } => "rain",
            EnvCondition::Snow { .. } => "snow",
            EnvCondition::Fog { .. } => "fog",
            EnvCondition::SunFlare { .. } => "sun_flare",
            EnvCondition::Day { .. } => "day",
            EnvCondition::Night { .. } => "night",
            EnvCondition::Dawn { .. } => "dawn",
        }
    }
}

/// Per-kind sampling parameters, overridable from the pipeline config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct EnvFxConfig {
    pub rain: RainConfig,
    pub snow: SnowConfig,
    pub fog: FogConfig,
    pub sun_flare: SunFlareConfig,
    pub day: DayConfig,
    pub night: NightConfig,
    pub dawn: DawnConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RainConfig {
    pub streak_count: [u32; 2],
    pub length_range: [f64; 2],
    pub slant_deg: [f64; 2],
    pub color: [u8; 3],
    pub opacity: f64,
    pub blur_sigma: f64,
}

impl Default for RainConfig {
    fn default() -> Self {
        RainConfig {
            streak_count: [80, 150],
            length_range: [15.0, 35.0],
            slant_deg: [-20.0, 20.0],
            color: [200, 200, 210],
            opacity: 0.35,
            blur_sigma: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnowConfig {
    pub flake_count: [u32; 2],
    pub radius_range: [f64; 2],
    pub opacity: f64,
    pub brightness: f64,
}

impl Default for SnowConfig {
    fn default() -> Self {
        SnowConfig {
            flake_count: [100, 200],
            radius_range: [1.0, 3.0],
            opacity: 0.8,
            brightness: 1.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FogConfig {
    pub opacity_range: [f64; 2],
    pub color: [u8; 3],
}

impl Default for FogConfig {
    fn default() -> Self {
        FogConfig {
            opacity_range: [0.30, 0.60],
            color: [230, 230, 235],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SunFlareConfig {
    /// Radius as a fraction of image width.
    pub radius_range: [f64; 2],
    pub peak: f64,
}

impl Default for SunFlareConfig {
    fn default() -> Self {
        SunFlareConfig {
            radius_range: [0.10, 0.25],
            peak: 180.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DayConfig {
    pub brightness: f64,
    pub red_shift: f64,
    pub blue_shift: f64,
}

impl Default for DayConfig {
    fn default() -> Self {
        DayConfig {
            brightness: 1.10,
            red_shift: 6.0,
            blue_shift: -6.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NightConfig {
    pub gamma: f64,
    pub blue_shift: f64,
}

impl Default for NightConfig {
    fn default() -> Self {
        NightConfig {
            gamma: 2.2,
            blue_shift: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DawnConfig {
    pub color: [u8; 3],
    pub opacity: f64,
    pub brightness: f64,
}

impl Default for DawnConfig {
    fn default() -> Self {
        DawnConfig {
            color: [255, 140, 60],
            opacity: 0.18,
            brightness: 0.95,
        }
    }
}


/// Number of environmental conditions, and their canonical order.
pub const ENV_CONDITION_COUNT: u32 = 7;

/// Sample the condition for position `slot` (0..7) in the canonical order
/// rain, snow, fog, sun flare, day, night, dawn. `width`/`height` are the
/// scene dimensions (needed to place the sun flare).
pub fn sample_condition(
    slot: u32,
    cfg: &EnvFxConfig,
    width: u32,
    height: u32,
    rng: &mut StreamRng,
) -> EnvCondition {
    match slot {
        0 => EnvCondition::Rain {
            streaks: rng.uniform_i64(cfg.rain.streak_count[0] as i64, cfg.rain.streak_count[1] as i64)
                as u32,
            slant_deg: rng.uniform(cfg.rain.slant_deg[0], cfg.rain.slant_deg[1]),
            length_range: cfg.rain.length_range,
            color: cfg.rain.color,
            opacity: cfg.rain.opacity,
            blur_sigma: cfg.rain.blur_sigma,
        },
        1 => EnvCondition::Snow {
            flakes: rng.uniform_i64(cfg.snow.flake_count[0] as i64, cfg.snow.flake_count[1] as i64)
                as u32,
            radius_range: cfg.snow.radius_range,
            opacity: cfg.snow.opacity,
            brightness: cfg.snow.brightness,
        },
        2 => EnvCondition::Fog {
            opacity: rng.uniform(cfg.fog.opacity_range[0], cfg.fog.opacity_range[1]),
            color: cfg.fog.color,
        },
        3 => EnvCondition::SunFlare {
            center_x: rng.uniform(0.0, width as f64),
            center_y: rng.uniform(0.0, height as f64 / 3.0),
            radius: rng.uniform(cfg.sun_flare.radius_range[0], cfg.sun_flare.radius_range[1])
                * width as f64,
            peak: cfg.sun_flare.peak,
        },
        4 => EnvCondition::Day {
            brightness: cfg.day.brightness,
            red_shift: cfg.day.red_shift,
            blue_shift: cfg.day.blue_shift,
        },
        5 => EnvCondition::Night {
            gamma: cfg.night.gamma,
            blue_shift: cfg.night.blue_shift,
        },
        _ => EnvCondition::Dawn {
            color: cfg.dawn.color,
            opacity: cfg.dawn.opacity,
            brightness: cfg.dawn.brightness,
        },
    }
}

fn blend_solid(img: &mut RasterImage, color: [u8; 3], opacity: f64) {
    if opacity == 0.0 {
        return;
    }
    for px in img.pixels_mut().chunks_exact_mut(4) {
        for c in 0..3 {
            px[c] = quantize((1.0 - opacity) * px[c] as f64 + opacity * color[c] as f64);
        }
    }
}

fn scale_rgb(img: &mut RasterImage, factor: f64) {
    if factor == 1.0 {
        return;
    }
    for px in img.pixels_mut().chunks_exact_mut(4) {
        for v in &mut px[..3] {
            *v = quantize(*v as f64 * factor);
        }
    }
}

fn shift_channel(img: &mut RasterImage, channel: usize, delta: f64) {
    if delta == 0.0 {
        return;
    }
    for px in img.pixels_mut().chunks_exact_mut(4) {
        px[channel] = quantize(px[channel] as f64 + delta);
    }
}

/// Blend `color` into the pixel at integer coordinates with the given
/// weight (coverage times opacity), skipping out-of-bounds positions.
fn blend_at(img: &mut RasterImage, x: i64, y: i64, color: [u8; 3], weight: f64) {
    if x < 0 || y < 0 || x >= img.width() as i64 || y >= img.height() as i64 || weight <= 0.0 {
        return;
    }
    let mut px = img.get(x as u32, y as u32);
    for c in 0..3 {
        px[c] = quantize((1.0 - weight) * px[c] as f64 + weight * color[c] as f64);
    }
    img.set(x as u32, y as u32, px);
}

/// Draw a 1-px anti-aliased segment by sampling along its length and
/// splitting coverage bilinearly over the four neighbouring pixels.
fn draw_streak(
    img: &mut RasterImage,
    start: (f64, f64),
    dir: (f64, f64),
    len: f64,
    color: [u8; 3],
    opacity: f64,
) {
    let steps = len.ceil() as usize;
    for s in 0..=steps {
        let t = s as f64;
        if t > len {
            break;
        }
        let x = start.0 + dir.0 * t;
        let y = start.1 + dir.1 * t;
        let xf = x.floor();
        let yf = y.floor();
        let fx = x - xf;
        let fy = y - yf;
        blend_at(img, xf as i64, yf as i64, color, opacity * (1.0 - fx) * (1.0 - fy));
        blend_at(img, xf as i64 + 1, yf as i64, color, opacity * fx * (1.0 - fy));
        blend_at(img, xf as i64, yf as i64 + 1, color, opacity * (1.0 - fx) * fy);
        blend_at(img, xf as i64 + 1, yf as i64 + 1, color, opacity * fx * fy);
    }
}

fn draw_disc(img: &mut RasterImage, cx: f64, cy: f64, radius: f64, color: [u8; 3], opacity: f64) {
    let r_out = radius + 1.0;
    let x0 = (cx - r_out).floor() as i64;
    let x1 = (cx + r_out).ceil() as i64;
    let y0 = (cy - r_out).floor() as i64;
    let y1 = (cy + r_out).ceil() as i64;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            // Soft 1-px edge.
            let coverage = (radius + 0.5 - d).clamp(0.0, 1.0);
            blend_at(img, x, y, color, opacity * coverage);
        }
    }
}

/// Apply an environmental condition. Output dimensions always equal input
/// dimensions; `rng` drives per-streak/per-flake randomness at render time.
pub fn apply_condition(img: &RasterImage, cond: &EnvCondition, rng: &mut StreamRng) -> Result<RasterImage> {
    let mut out = img.clone();
    match cond {
        EnvCondition::Rain {
            streaks,
            slant_deg,
            length_range,
            color,
            opacity,
            blur_sigma,
        } => {
            let slant = slant_deg.to_radians();
            // Streaks run downward with a common slant off vertical.
            let dx = slant.sin();
            let dy = slant.cos();
            for _ in 0..*streaks {
                let x0 = rng.uniform(0.0, img.width() as f64);
                let y0 = rng.uniform(0.0, img.height() as f64);
                let len = rng.uniform(length_range[0], length_range[1]);
                draw_streak(&mut out, (x0, y0), (dx, dy), len, *color, *opacity);
            }
            if *blur_sigma > 0.0 {
                out = gaussian_blur(&out, *blur_sigma)?;
            }
        }
        EnvCondition::Snow {
            flakes,
            radius_range,
            opacity,
            brightness,
        } => {
            scale_rgb(&mut out, *brightness);
            for _ in 0..*flakes {
                let cx = rng.uniform(0.0, img.width() as f64);
                let cy = rng.uniform(0.0, img.height() as f64);
                let r = rng.uniform(radius_range[0], radius_range[1]);
                draw_disc(&mut out, cx, cy, r, [255, 255, 255], *opacity);
            }
        }
        EnvCondition::Fog { opacity, color } => {
            blend_solid(&mut out, *color, *opacity);
        }
        EnvCondition::SunFlare {
            center_x,
            center_y,
            radius,
            peak,
        } => {
            if *radius > 0.0 {
                for y in 0..out.height() {
                    for x in 0..out.width() {
                        let d2 = (x as f64 - center_x).powi(2) + (y as f64 - center_y).powi(2);
                        let r2 = radius * radius;
                        if d2 < r2 {
                            let add = peak * (1.0 - d2 / r2);
                            let mut px = out.get(x, y);
                            for v in &mut px[..3] {
                                *v = quantize(*v as f64 + add);
                            }
                            out.set(x, y, px);
                        }
                    }
                }
            }
        }
        EnvCondition::Day {
            brightness,
            red_shift,
            blue_shift,
        } => {
            scale_rgb(&mut out, *brightness);
            shift_channel(&mut out, 0, *red_shift);
            shift_channel(&mut out, 2, *blue_shift);
        }
        EnvCondition::Night { gamma, blue_shift } => {
            if *gamma != 1.0 {
                for px in out.pixels_mut().chunks_exact_mut(4) {
                    for v in &mut px[..3] {
                        *v = quantize(255.0 * (*v as f64 / 255.0).powf(*gamma));
                    }
                }
            }
            shift_channel(&mut out, 2, *blue_shift);
        }
        EnvCondition::Dawn {
            color,
            opacity,
            brightness,
        } => {
            blend_solid(&mut out, *color, *opacity);
            scale_rgb(&mut out, *brightness);
        }
    }
    Ok(out)
}
