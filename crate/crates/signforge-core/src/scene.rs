//! Stage 2: integrate sign variants into background scenes at annotated
//! placements, producing composites plus detection bounding boxes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{alpha_over, resize_bilinear, tight_alpha_bbox, BBox, RasterImage};

/// A manually annotated rectangle where a sign may be inserted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Placement {
    pub fn as_array(&self) -> [u32; 4] {
        [self.x, self.y, self.w, self.h]
    }
}

/// A background scene with its placement slots.
#[derive(Debug, Clone)]
pub struct BackgroundAsset {
    pub id: String,
    pub image: RasterImage,
    pub placements: Vec<Placement>,
}

impl BackgroundAsset {
    pub fn new(id: String, image: RasterImage, placements: Vec<Placement>) -> Result<Self> {
        if placements.is_empty() {
            return Err(Error::Config(format!(
                "background '{id}' has no placements"
            )));
        }
        for p in &placements {
            if p.w < 4 || p.h < 4 {
                return Err(Error::Config(format!(
                    "background '{id}': placement {}x{} is smaller than 4x4",
                    p.w, p.h
                )));
            }
            if p.x as u64 + p.w as u64 > image.width() as u64
                || p.y as u64 + p.h as u64 > image.height() as u64
            {
                return Err(Error::Config(format!(
                    "background '{id}': placement ({}, {}, {}, {}) exceeds {}x{} bounds",
                    p.x,
                    p.y,
                    p.w,
                    p.h,
                    image.width(),
                    image.height()
                )));
            }
        }
        Ok(BackgroundAsset {
            id,
            image,
            placements,
        })
    }
}

/// Resize the variant to the placement extents, blend it over the scene,
/// and return the composite plus the tight alpha bbox of the placed sprite
/// in scene coordinates. A fully transparent variant yields no bbox and is
/// rejected.
pub fn composite(
    bg: &BackgroundAsset,
    variant: &RasterImage,
    placement: Placement,
    class_index: u8,
    record_id: u64,
) -> Result<(RasterImage, BBox)> {
    let resized = resize_bilinear(variant, placement.w, placement.h)?;
    let local = tight_alpha_bbox(&resized).ok_or(Error::NoBbox { record_id })?;
    let scene = alpha_over(&resized, &bg.image, (placement.x, placement.y))?;
    let bbox = BBox {
        class_index,
        x: placement.x + local.x,
        y: placement.y + local.y,
        w: local.w,
        h: local.h,
    }
    .clipped(scene.width(), scene.height())
    .ok_or(Error::NoBbox { record_id })?;
    Ok((scene, bbox))
}
