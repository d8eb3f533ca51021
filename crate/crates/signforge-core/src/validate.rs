//! Dataset validation: re-check every manifest line against the files on
//! disk. Used by the `validate` subcommand and the test suites.

use std::path::Path;

use crate::error::Result;
use crate::imageio::load_png;
use crate::manifest::{read_manifest, MANIFEST_FILE};

/// One problem found in a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// 1-based manifest line (header is line 1).
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Validate a generated dataset directory. Checks per manifest line:
/// the image and label files exist, the PNG decodes, label values lie in
/// [0, 1] with six-decimal formatting, the class index is in [0, 5], and
/// the label bbox reconstructs the manifest pixel bbox within 1 px.
pub fn validate_dataset(dataset_dir: &Path) -> Result<Vec<Violation>> {
    let manifest_path = dataset_dir.join(MANIFEST_FILE);
    let (_, lines) = read_manifest(&manifest_path)?;
    let mut violations = Vec::new();
    for (i, record) in lines.iter().enumerate() {
        let line_no = i + 2; // header occupies line 1
        let mut fail = |message: String| {
            violations.push(Violation {
                line: line_no,
                message,
            });
        };

        if record.class_index > 5 {
            fail(format!("class index {} outside [0, 5]", record.class_index));
        }

        let image_path = dataset_dir.join(&record.image);
        let dims = match load_png(&image_path) {
            Ok(img) => Some((img.width(), img.height())),
            Err(e) => {
                fail(format!("image {}: {e}", record.image));
                None
            }
        };

        let label_path = dataset_dir.join(&record.label);
        let label_text = match std::fs::read_to_string(&label_path) {
            Ok(text) => Some(text),
            Err(e) => {
                fail(format!("label {}: {e}", record.label));
                None
            }
        };

        if let Some(text) = label_text {
            match check_label(&text, record, dims) {
                Ok(()) => {}
                Err(msgs) => {
                    for m in msgs {
                        fail(m);
                    }
                }
            }
        }
    }
    Ok(violations)
}

/// Check one label file's content against its manifest record.
fn check_label(
    text: &str,
    record: &crate::manifest::ManifestLine,
    dims: Option<(u32, u32)>,
) -> std::result::Result<(), Vec<String>> {
    let mut problems = Vec::new();
    let line = text.trim_end_matches('\n');
    let fields: Vec<&str> = line.split(' ').collect();
    if fields.len() != 5 {
        problems.push(format!("label has {} fields, expected 5", fields.len()));
        return Err(problems);
    }
    match fields[0].parse::<i64>() {
        Ok(c) if (0..=5).contains(&c) => {
            if c as u8 != record.class_index {
                problems.push(format!(
                    "label class {c} does not match manifest class {}",
                    record.class_index
                ));
            }
        }
        Ok(c) => problems.push(format!("label class {c} outside [0, 5]")),
        Err(e) => problems.push(format!("bad label class '{}': {e}", fields[0])),
    }
    let mut values = [0.0f64; 4];
    for (k, field) in fields[1..].iter().enumerate() {
        match field.split_once('.') {
            Some((_, frac)) if frac.len() == 6 && frac.bytes().all(|b| b.is_ascii_digit()) => {}
            _ => problems.push(format!("label value '{field}' is not six-decimal formatted")),
        }
        match field.parse::<f64>() {
            Ok(v) if (0.0..=1.0).contains(&v) => values[k] = v,
            Ok(v) => problems.push(format!("label value {v} outside [0, 1]")),
            Err(e) => problems.push(format!("bad label value '{field}': {e}")),
        }
    }
    if let Some((w, h)) = dims {
        // Reconstruct the pixel bbox from the normalized label.
        let cx = values[0] * w as f64;
        let cy = values[1] * h as f64;
        let bw = values[2] * w as f64;
        let bh = values[3] * h as f64;
        let x = cx - bw / 2.0;
        let y = cy - bh / 2.0;
        let px = record.bbox_px;
        let checks = [
            (x, px[0] as f64, "x"),
            (y, px[1] as f64, "y"),
            (bw, px[2] as f64, "w"),
            (bh, px[3] as f64, "h"),
        ];
        for (got, want, name) in checks {
            if (got - want).abs() > 1.0 {
                problems.push(format!(
                    "label bbox {name} = {got:.2} deviates from manifest {want} by more than 1 px"
                ));
            }
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(problems)
    }
}
