//! Manifest emission and label formatting. The manifest is JSONL: a header
//! object (config hash, seed, tool version) followed by one object per
//! emitted output with the full provenance chain. Labels are YOLO text
//! lines with six-decimal normalized coordinates.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::VariantParams;
use crate::envfx::EnvCondition;
use crate::error::{Error, Result};
use crate::occlusion::OcclusionParams;
use crate::raster::BBox;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
}

/// One emitted output. Field order is fixed; serialization must not change
/// across runs for determinism checks to hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestLine {
    pub record_id: u64,
    pub image: String,
    pub label: String,
    pub class_index: u8,
    pub class_name: String,
    pub bbox_px: [u32; 4],
    pub bbox_yolo: [f64; 4],
    pub sign_id: String,
    pub variant: VariantParams,
    pub background_id: String,
    pub placement: [u32; 4],
    pub env: Option<EnvCondition>,
    pub occlusion: Option<OcclusionParams>,
}

/// Render a YOLO label line: `<class> <cx> <cy> <w> <h>`, six decimals,
/// newline-terminated.
pub fn yolo_label_line(class_index: u8, bbox_yolo: [f64; 4]) -> String {
    format!(
        "{} {:.6} {:.6} {:.6} {:.6}\n",
        class_index, bbox_yolo[0], bbox_yolo[1], bbox_yolo[2], bbox_yolo[3]
    )
}

/// Normalized YOLO coordinates for a pixel bbox in a scene of given size.
pub fn bbox_to_yolo(bbox: &BBox, img_w: u32, img_h: u32) -> [f64; 4] {
    bbox.to_yolo(img_w, img_h)
}

/// Parse one YOLO label line back into `(class_index, [cx, cy, w, h])`.
pub fn parse_yolo_line(line: &str) -> Result<(u8, [f64; 4])> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(Error::Argument(format!(
            "label line has {} fields, expected 5",
            fields.len()
        )));
    }
    let class: u8 = fields[0]
        .parse()
        .map_err(|e| Error::Argument(format!("bad class index '{}': {e}", fields[0])))?;
    let mut vals = [0.0f64; 4];
    for (v, f) in vals.iter_mut().zip(&fields[1..]) {
        *v = f
            .parse()
            .map_err(|e| Error::Argument(format!("bad label value '{f}': {e}")))?;
    }
    Ok((class, vals))
}

/// Write the manifest: header first, then lines in record order.
pub fn write_manifest(path: &Path, header: &ManifestHeader, lines: &[ManifestLine]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let to_io = |e: serde_json::Error| Error::io(path, std::io::Error::other(e));
    let mut buf = serde_json::to_string(header).map_err(to_io)?;
    buf.push('\n');
    w.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))?;
    for line in lines {
        let mut buf = serde_json::to_string(line).map_err(to_io)?;
        buf.push('\n');
        w.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Read a manifest back. Errors carry 1-based line numbers.
pub fn read_manifest(path: &Path) -> Result<(ManifestHeader, Vec<ManifestLine>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut lines = reader.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| Error::Manifest {
        line: 1,
        message: "empty manifest".into(),
    })?;
    let first = first.map_err(|e| Error::io(path, e))?;
    let header: ManifestHeader = serde_json::from_str(&first).map_err(|e| Error::Manifest {
        line: 1,
        message: format!("bad header: {e}"),
    })?;
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ManifestLine = serde_json::from_str(&line).map_err(|e| Error::Manifest {
            line: idx + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok((header, records))
}
