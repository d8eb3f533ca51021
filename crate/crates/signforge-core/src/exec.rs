//! Plan execution: render every record through its stage chain and write
//! images, labels, and the manifest. Work is data-parallel over records;
//! because each record's randomness is a pure function of (seed, ordinal,
//! stage), output bytes do not depend on worker count or scheduling.

use std::path::PathBuf;

use rayon::prelude::*;

use crate::assets::AssetCatalog;
use crate::augment::render_variant;
use crate::config::{ImageFormat, PipelineConfig};
use crate::envfx::apply_condition;
use crate::error::{Error, Result};
use crate::imageio::{save_jpeg, save_png};
use crate::manifest::{
    write_manifest, yolo_label_line, ManifestHeader, ManifestLine, MANIFEST_FILE, TOOL_VERSION,
};
use crate::occlusion::{overlay_obstacle, sample_occlusion, OcclusionParams};
use crate::plan::{Plan, PlanRecord};
use crate::raster::{BBox, RasterImage};
use crate::rng::{RngKey, StageTag};
use crate::scene;

/// Outcome of a run.
#[derive(Debug)]
pub struct RunSummary {
    pub manifest_path: PathBuf,
    pub emitted: u64,
    /// Record ids rejected because the variant had no visible pixels.
    pub rejected: Vec<u64>,
}

/// A fully rendered record, before any file I/O.
pub struct RenderedRecord {
    pub image: RasterImage,
    pub bbox: BBox,
    pub occlusion: Option<OcclusionParams>,
}

/// Render one record through variant, composite, environment, and
/// occlusion. Returns `Ok(None)` when the variant has no visible pixels
/// (the record is rejected, not fatal).
pub fn render_record(
    record: &PlanRecord,
    config: &PipelineConfig,
    catalog: &AssetCatalog,
    seed: u64,
) -> Result<Option<RenderedRecord>> {
    let sign = &catalog.signs[record.sign_index];
    let variant_img = render_variant(&sign.image, &record.variant)?;

    let bg = &catalog.backgrounds[record.background_index];
    let (mut image, bbox) = match scene::composite(
        bg,
        &variant_img,
        record.placement,
        sign.class.index(),
        record.record_id,
    ) {
        Ok(pair) => pair,
        Err(Error::NoBbox { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };

    if let Some(cond) = &record.env {
        let mut env_rng = RngKey::new(seed, record.env_ordinal, StageTag::EnvRender).stream();
        image = apply_condition(&image, cond, &mut env_rng)?;
    }

    let mut occlusion = None;
    if let Some(planned) = &record.occlusion {
        let obstacle = &catalog.obstacles[planned.obstacle_index];
        let mut occ_rng = RngKey::new(seed, record.record_id, StageTag::OcclusionRender).stream();
        let params = sample_occlusion(&bbox, obstacle, &mut occ_rng, &config.occlusion)?;
        image = overlay_obstacle(&image, obstacle, &params)?;
        occlusion = Some(params);
    }

    Ok(Some(RenderedRecord {
        image,
        bbox,
        occlusion,
    }))
}

fn relative_image_path(record_id: u64, format: ImageFormat) -> String {
    format!("images/{record_id:09}.{}", format.extension())
}

fn relative_label_path(record_id: u64) -> String {
    format!("labels/{record_id:09}.txt")
}

/// Execute a plan: render all records in parallel, write one PNG and one
/// label per record, then the manifest in record order. Rejected records
/// are logged in the summary and leave no files.
pub fn execute(plan: &Plan, config: &PipelineConfig, catalog: &AssetCatalog) -> Result<RunSummary> {
    let out_dir = &config.output_dir;
    std::fs::create_dir_all(out_dir.join("images")).map_err(|e| Error::io(out_dir, e))?;
    std::fs::create_dir_all(out_dir.join("labels")).map_err(|e| Error::io(out_dir, e))?;

    let threads = if config.jobs == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        config.jobs
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;

    let results: Result<Vec<Option<ManifestLine>>> = pool.install(|| {
        plan.records
            .par_iter()
            .map(|record| -> Result<Option<ManifestLine>> {
                let rendered = render_record(record, config, catalog, plan.seed)?;
                let Some(rendered) = rendered else {
                    return Ok(None);
                };
                let image_rel = relative_image_path(record.record_id, config.image_format);
                let label_rel = relative_label_path(record.record_id);
                let bbox_yolo = rendered
                    .bbox
                    .to_yolo(rendered.image.width(), rendered.image.height());
                match config.image_format {
                    ImageFormat::Png => save_png(&rendered.image, &out_dir.join(&image_rel))?,
                    ImageFormat::Jpeg => save_jpeg(&rendered.image, &out_dir.join(&image_rel))?,
                }
                let label_path = out_dir.join(&label_rel);
                std::fs::write(
                    &label_path,
                    yolo_label_line(rendered.bbox.class_index, bbox_yolo),
                )
                .map_err(|e| Error::io(&label_path, e))?;
                let sign = &catalog.signs[record.sign_index];
                let bg = &catalog.backgrounds[record.background_index];
                Ok(Some(ManifestLine {
                    record_id: record.record_id,
                    image: image_rel,
                    label: label_rel,
                    class_index: rendered.bbox.class_index,
                    class_name: sign.class.name().to_string(),
                    bbox_px: [
                        rendered.bbox.x,
                        rendered.bbox.y,
                        rendered.bbox.w,
                        rendered.bbox.h,
                    ],
                    bbox_yolo,
                    sign_id: sign.id.clone(),
                    variant: record.variant.params.clone(),
                    background_id: bg.id.clone(),
                    placement: record.placement.as_array(),
                    env: record.env.clone(),
                    occlusion: rendered.occlusion,
                }))
            })
            .collect()
    });
    let results = results?;

    let mut lines = Vec::with_capacity(results.len());
    let mut rejected = Vec::new();
    for (record, line) in plan.records.iter().zip(results) {
        match line {
            Some(line) => lines.push(line),
            None => rejected.push(record.record_id),
        }
    }

    let header = ManifestHeader {
        config_hash: config.content_hash(),
        seed: plan.seed,
        tool_version: TOOL_VERSION.to_string(),
    };
    let manifest_path = out_dir.join(MANIFEST_FILE);
    write_manifest(&manifest_path, &header, &lines)?;

    Ok(RunSummary {
        manifest_path,
        emitted: lines.len() as u64,
        rejected,
    })
}
