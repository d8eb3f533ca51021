//! Stage 4: obstacle-based occlusion. Ingests obstacle cutouts extracted
//! from COCO instance annotations (car/truck/bus/person polygons) and
//! overlays them on composites with randomized position, size, and
//! transparency. Sign bounding boxes are never altered by occlusion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{alpha_over, quantize, resize_bilinear, BBox, RasterImage};
use crate::rng::StreamRng;

/// The four COCO categories used as obstacles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObstacleCategory {
    Car,
    Truck,
    Bus,
    Person,
}

pub const OBSTACLE_CATEGORIES: [ObstacleCategory; 4] = [
    ObstacleCategory::Car,
    ObstacleCategory::Truck,
    ObstacleCategory::Bus,
    ObstacleCategory::Person,
];

impl ObstacleCategory {
    pub fn name(self) -> &'static str {
        match self {
            ObstacleCategory::Car => "car",
            ObstacleCategory::Truck => "truck",
            ObstacleCategory::Bus => "bus",
            ObstacleCategory::Person => "person",
        }
    }
}

impl std::str::FromStr for ObstacleCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "car" => Ok(ObstacleCategory::Car),
            "truck" => Ok(ObstacleCategory::Truck),
            "bus" => Ok(ObstacleCategory::Bus),
            "person" => Ok(ObstacleCategory::Person),
            other => Err(Error::Config(format!(
                "unknown obstacle category '{other}', valid names: car, truck, bus, person"
            ))),
        }
    }
}

impl std::fmt::Display for ObstacleCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// An obstacle cutout: RGBA image transparent outside the object.
#[derive(Debug, Clone)]
pub struct ObstacleAsset {
    pub id: String,
    pub category: ObstacleCategory,
    pub cutout: RasterImage,
}

impl ObstacleAsset {
    pub fn new(id: String, category: ObstacleCategory, cutout: RasterImage) -> Result<Self> {
        if cutout.pixels().chunks_exact(4).all(|p| p[3] == 0) {
            return Err(Error::Asset(format!(
                "obstacle '{id}' has no visible pixels (all alpha = 0)"
            )));
        }
        Ok(ObstacleAsset {
            id,
            category,
            cutout,
        })
    }
}

// ---------------------------------------------------------------------------
// COCO instance ingestion
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct CocoDocument {
    #[serde(default)]
    images: Vec<CocoImage>,
    #[serde(default)]
    annotations: Vec<CocoAnnotation>,
    #[serde(default)]
    categories: Vec<CocoCategory>,
}

#[derive(Debug, Deserialize)]
struct CocoImage {
    id: u64,
    file_name: String,
}

#[derive(Debug, Deserialize)]
struct CocoAnnotation {
    image_id: u64,
    category_id: u64,
    #[serde(default)]
    segmentation: Option<CocoSegmentation>,
    #[serde(default, deserialize_with = "deserialize_iscrowd")]
    iscrowd: bool,
}

fn deserialize_iscrowd<'de, D>(deserializer: D) -> std::result::Result<bool, D::Error>
where
    D: serde::Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum IsCrowd {
        Bool(bool),
        Int(u8),
    }
    Ok(match IsCrowd::deserialize(deserializer)? {
        IsCrowd::Bool(b) => b,
        IsCrowd::Int(i) => i != 0,
    })
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum CocoSegmentation {
    /// Polygons: flat [x1, y1, x2, y2, ...] lists.
    Polygons(Vec<Vec<f64>>),
    /// Anything else (RLE masks for crowd regions); skipped.
    Rle(#[allow(dead_code)] serde_json::Value),
}

#[derive(Debug, Deserialize)]
struct CocoCategory {
    id: u64,
    name: String,
}

/// One extracted instance: source image file, category, polygon list.
#[derive(Debug, Clone, PartialEq)]
pub struct CocoInstance {
    pub file_name: String,
    pub category: ObstacleCategory,
    pub polygons: Vec<Vec<f64>>,
}

/// Byte offset of a (1-based) line/column position in `text`.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let mut remaining = line.saturating_sub(1);
    let mut offset = 0;
    for (i, b) in text.bytes().enumerate() {
        if remaining == 0 {
            break;
        }
        if b == b'\n' {
            remaining -= 1;
            offset = i + 1;
        }
    }
    offset + column.saturating_sub(1)
}

/// Parse a COCO instances document and return the polygon annotations whose
/// category name is in `categories`. Crowd and RLE annotations are skipped;
/// image ids are joined to file names.
pub fn parse_coco_instances(
    annotation_text: &str,
    categories: &[String],
) -> Result<Vec<CocoInstance>> {
    let wanted: Vec<ObstacleCategory> = categories
        .iter()
        .map(|name| name.parse::<ObstacleCategory>())
        .collect::<Result<_>>()?;

    let doc: CocoDocument = serde_json::from_str(annotation_text).map_err(|e| Error::Parse {
        offset: byte_offset(annotation_text, e.line(), e.column()),
        message: e.to_string(),
    })?;

    let file_by_id: std::collections::HashMap<u64, &str> = doc
        .images
        .iter()
        .map(|img| (img.id, img.file_name.as_str()))
        .collect();
    let category_by_id: std::collections::HashMap<u64, ObstacleCategory> = doc
        .categories
        .iter()
        .filter_map(|c| {
            c.name
                .parse::<ObstacleCategory>()
                .ok()
                .filter(|cat| wanted.contains(cat))
                .map(|cat| (c.id, cat))
        })
        .collect();

    let mut out = Vec::new();
    for ann in &doc.annotations {
        if ann.iscrowd {
            continue;
        }
        let Some(category) = category_by_id.get(&ann.category_id).copied() else {
            continue;
        };
        let Some(file_name) = file_by_id.get(&ann.image_id) else {
            continue;
        };
        let polygons = match &ann.segmentation {
            Some(CocoSegmentation::Polygons(polys)) => polys
                .iter()
                .filter(|p| p.len() >= 6)
                .cloned()
                .collect::<Vec<_>>(),
            _ => continue,
        };
        if polygons.is_empty() {
            continue;
        }
        out.push(CocoInstance {
            file_name: file_name.to_string(),
            category,
            polygons,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Polygon rasterization and cutout extraction
// ---------------------------------------------------------------------------

/// Binary mask with image dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub width: u32,
    pub height: u32,
    pub inside: Vec<bool>,
}

/// Even-odd scanline fill of a flat `[x1, y1, x2, y2, ...]` polygon: a
/// pixel is set when its center lies inside the polygon. Crossings use the
/// half-open rule `(y1 > yc) != (y2 > yc)` so shared vertices count once.
pub fn rasterize_polygon(polygon: &[f64], w: u32, h: u32) -> Result<Mask> {
    if polygon.len() < 6 || !polygon.len().is_multiple_of(2) {
        return Err(Error::Argument(format!(
            "polygon needs >= 3 (x, y) vertices, got {} coordinates",
            polygon.len()
        )));
    }
    let n = polygon.len() / 2;
    let mut inside = vec![false; w as usize * h as usize];
    let mut crossings: Vec<f64> = Vec::with_capacity(n);
    for y in 0..h {
        let yc = y as f64 + 0.5;
        crossings.clear();
        for i in 0..n {
            let (x1, y1) = (polygon[2 * i], polygon[2 * i + 1]);
            let j = (i + 1) % n;
            let (x2, y2) = (polygon[2 * j], polygon[2 * j + 1]);
            if (y1 > yc) != (y2 > yc) {
                crossings.push(x1 + (yc - y1) * (x2 - x1) / (y2 - y1));
            }
        }
        crossings.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // A center is inside when an odd number of crossings lie strictly
        // to its right.
        let mut p = 0;
        for x in 0..w {
            let xc = x as f64 + 0.5;
            while p < crossings.len() && crossings[p] <= xc {
                p += 1;
            }
            if (crossings.len() - p) % 2 == 1 {
                inside[(y * w + x) as usize] = true;
            }
        }
    }
    Ok(Mask {
        width: w,
        height: h,
        inside,
    })
}

/// Copy RGB under the mask, set alpha to 255 inside and 0 outside, and crop
/// to the mask's tight bounding box.
pub fn extract_cutout(image: &RasterImage, mask: &Mask) -> Result<RasterImage> {
    if mask.width != image.width() || mask.height != image.height() {
        return Err(Error::Argument(format!(
            "mask {}x{} does not match image {}x{}",
            mask.width,
            mask.height,
            image.width(),
            image.height()
        )));
    }
    let mut min_x = u32::MAX;
    let mut min_y = u32::MAX;
    let mut max_x = 0u32;
    let mut max_y = 0u32;
    let mut any = false;
    for y in 0..mask.height {
        for x in 0..mask.width {
            if mask.inside[(y * mask.width + x) as usize] {
                any = true;
                min_x = min_x.min(x);
                min_y = min_y.min(y);
                max_x = max_x.max(x);
                max_y = max_y.max(y);
            }
        }
    }
    if !any {
        return Err(Error::Extraction("mask selects no pixels".into()));
    }
    let w = max_x - min_x + 1;
    let h = max_y - min_y + 1;
    let mut out = RasterImage::new(w, h)?;
    for y in 0..h {
        for x in 0..w {
            let sx = min_x + x;
            let sy = min_y + y;
            let src = image.get(sx, sy);
            let a = if mask.inside[(sy * mask.width + sx) as usize] {
                255
            } else {
                0
            };
            out.set(x, y, [src[0], src[1], src[2], a]);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Occlusion sampling and overlay
// ---------------------------------------------------------------------------

/// Sampling ranges for the occlusion stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OcclusionConfig {
    /// Obstacle width as a fraction of sign bbox width.
    pub scale_range: [f64; 2],
    pub opacity_range: [f64; 2],
    /// Accepted alpha-weighted coverage of the sign bbox.
    pub coverage_window: [f64; 2],
    pub max_attempts: u32,
}

impl Default for OcclusionConfig {
    fn default() -> Self {
        OcclusionConfig {
            scale_range: [0.3, 0.8],
            opacity_range: [0.7, 1.0],
            coverage_window: [0.1, 0.5],
            max_attempts: 100,
        }
    }
}

impl OcclusionConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.coverage_window;
        if !(lo > 0.0 && hi < 1.0 && lo < hi) {
            return Err(Error::Config(format!(
                "occlusion.coverage_window [{lo}, {hi}] must satisfy 0 < lo < hi < 1"
            )));
        }
        if !(self.opacity_range[0] >= 0.0
            && self.opacity_range[1] <= 1.0
            && self.opacity_range[0] <= self.opacity_range[1])
        {
            return Err(Error::Config(format!(
                "occlusion.opacity_range {:?} must lie within [0, 1]",
                self.opacity_range
            )));
        }
        if !(self.scale_range[0] > 0.0 && self.scale_range[0] <= self.scale_range[1]) {
            return Err(Error::Config(format!(
                "occlusion.scale_range {:?} must be positive and ordered",
                self.scale_range
            )));
        }
        Ok(())
    }
}

/// Resolved occlusion parameters for one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcclusionParams {
    pub obstacle_id: String,
    /// Obstacle width as a fraction of the sign bbox width.
    pub scale: f64,
    /// Scaled obstacle size in pixels.
    pub size: [u32; 2],
    /// Top-left scene position; may hang off the scene (clipped on overlay).
    pub position: [i64; 2],
    pub opacity: f64,
    /// Achieved alpha-weighted fraction of the sign bbox hidden by the
    /// obstacle footprint (opacity not included).
    pub coverage: f64,
}

/// Alpha-weighted fraction of `bbox` covered by `scaled` placed at `pos`.
pub fn coverage_fraction(bbox: &BBox, scaled: &RasterImage, pos: [i64; 2]) -> f64 {
    let mut acc = 0.0;
    for oy in 0..scaled.height() as i64 {
        let sy = pos[1] + oy;
        if sy < bbox.y as i64 || sy >= (bbox.y + bbox.h) as i64 {
            continue;
        }
        for ox in 0..scaled.width() as i64 {
            let sx = pos[0] + ox;
            if sx < bbox.x as i64 || sx >= (bbox.x + bbox.w) as i64 {
                continue;
            }
            acc += scaled.get(ox as u32, oy as u32)[3] as f64 / 255.0;
        }
    }
    acc / (bbox.w as f64 * bbox.h as f64)
}

fn scaled_dims(obstacle: &ObstacleAsset, bbox: &BBox, scale: f64) -> Result<(u32, u32)> {
    let target_w = scale * bbox.w as f64;
    let factor = target_w / obstacle.cutout.width() as f64;
    let w = target_w.round().max(1.0) as u32;
    let h = (obstacle.cutout.height() as f64 * factor).round().max(1.0) as u32;
    if w < 2 || h < 2 {
        return Err(Error::Asset(format!(
            "obstacle '{}' scales to {}x{}, smaller than 2x2",
            obstacle.id, w, h
        )));
    }
    Ok((w, h))
}

/// Rejection-sample scale, position, and opacity until the achieved
/// alpha-weighted coverage of `sign_bbox` falls inside the window (at most
/// `max_attempts` tries). On exhaustion the obstacle is centered on the
/// bbox at the smallest scale reaching the window's lower edge.
///
/// Draw order per attempt: scale, x, y, opacity.
pub fn sample_occlusion(
    sign_bbox: &BBox,
    obstacle: &ObstacleAsset,
    rng: &mut StreamRng,
    cfg: &OcclusionConfig,
) -> Result<OcclusionParams> {
    cfg.validate()?;
    let [lo, hi] = cfg.coverage_window;
    for _ in 0..cfg.max_attempts {
        let scale = rng.uniform(cfg.scale_range[0], cfg.scale_range[1]);
        let (w, h) = scaled_dims(obstacle, sign_bbox, scale)?;
        // Any position where the obstacle rectangle meets the bbox.
        let x = rng.uniform_i64(
            sign_bbox.x as i64 - w as i64 + 1,
            sign_bbox.x as i64 + sign_bbox.w as i64 - 1,
        );
        let y = rng.uniform_i64(
            sign_bbox.y as i64 - h as i64 + 1,
            sign_bbox.y as i64 + sign_bbox.h as i64 - 1,
        );
        let opacity = rng.uniform(cfg.opacity_range[0], cfg.opacity_range[1]);
        let scaled = resize_bilinear(&obstacle.cutout, w, h)?;
        let coverage = coverage_fraction(sign_bbox, &scaled, [x, y]);
        if coverage >= lo && coverage <= hi {
            return Ok(OcclusionParams {
                obstacle_id: obstacle.id.clone(),
                scale,
                size: [w, h],
                position: [x, y],
                opacity,
                coverage,
            });
        }
    }
    // Fallback: centered, smallest scale achieving >= lo.
    let opacity = rng.uniform(cfg.opacity_range[0], cfg.opacity_range[1]);
    let mut best: Option<(f64, u32, u32, [i64; 2], f64)> = None;
    let mut scale = cfg.scale_range[0];
    while scale <= 3.0 {
        let (w, h) = scaled_dims(obstacle, sign_bbox, scale)?;
        let pos = [
            sign_bbox.x as i64 + (sign_bbox.w as i64 - w as i64) / 2,
            sign_bbox.y as i64 + (sign_bbox.h as i64 - h as i64) / 2,
        ];
        let scaled = resize_bilinear(&obstacle.cutout, w, h)?;
        let coverage = coverage_fraction(sign_bbox, &scaled, pos);
        if coverage >= lo {
            return Ok(OcclusionParams {
                obstacle_id: obstacle.id.clone(),
                scale,
                size: [w, h],
                position: pos,
                opacity,
                coverage,
            });
        }
        if best.map(|b| coverage > b.0).unwrap_or(true) {
            best = Some((coverage, w, h, pos, scale));
        }
        scale += 0.05;
    }
    let (coverage, w, h, pos, scale) = best.expect("scale sweep always evaluates");
    Ok(OcclusionParams {
        obstacle_id: obstacle.id.clone(),
        scale,
        size: [w, h],
        position: pos,
        opacity,
        coverage,
    })
}

/// Multiply the obstacle's alpha by `params.opacity` and alpha-over it at
/// `params.position`, clipping to the scene bounds.
pub fn overlay_obstacle(
    scene: &RasterImage,
    obstacle: &ObstacleAsset,
    params: &OcclusionParams,
) -> Result<RasterImage> {
    let scaled = resize_bilinear(&obstacle.cutout, params.size[0], params.size[1])?;
    // Clip to the visible window.
    let [px, py] = params.position;
    let x0 = px.max(0);
    let y0 = py.max(0);
    let x1 = (px + scaled.width() as i64).min(scene.width() as i64);
    let y1 = (py + scaled.height() as i64).min(scene.height() as i64);
    if x0 >= x1 || y0 >= y1 {
        return Ok(scene.clone());
    }
    let w = (x1 - x0) as u32;
    let h = (y1 - y0) as u32;
    let mut clipped = RasterImage::new(w, h)?;
    for y in 0..h {
        for x in 0..w {
            let mut sample = scaled.get((x0 - px) as u32 + x, (y0 - py) as u32 + y);
            sample[3] = quantize(sample[3] as f64 * params.opacity);
            clipped.set(x, y, sample);
        }
    }
    alpha_over(&clipped, scene, (x0 as u32, y0 as u32))
}
