//! Dataset statistics from a manifest: per-class counts, imbalance ratio,
//! and per-stage provenance histograms.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::SIGN_CLASSES;
use crate::error::Result;
use crate::manifest::read_manifest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub total: u64,
    pub per_class: [u64; 6],
    /// Max per-class count over min (among classes present); 1.0 when
    /// perfectly balanced or only one class exists.
    pub imbalance_ratio: f64,
    pub variant_ops: BTreeMap<String, u64>,
    pub env_conditions: BTreeMap<String, u64>,
    pub occluded: u64,
    pub unoccluded: u64,
}

/// Compute statistics over a manifest file.
pub fn dataset_stats(manifest_path: &Path) -> Result<DatasetStats> {
    let (_, lines) = read_manifest(manifest_path)?;
    let mut per_class = [0u64; 6];
    let mut variant_ops = BTreeMap::new();
    let mut env_conditions = BTreeMap::new();
    let mut occluded = 0;
    let mut unoccluded = 0;
    for line in &lines {
        if let Some(slot) = per_class.get_mut(line.class_index as usize) {
            *slot += 1;
        }
        *variant_ops
            .entry(line.variant.op.kind_name().to_string())
            .or_insert(0) += 1;
        let env_key = line
            .env
            .as_ref()
            .map(|e| e.kind_name().to_string())
            .unwrap_or_else(|| "none".to_string());
        *env_conditions.entry(env_key).or_insert(0) += 1;
        if line.occlusion.is_some() {
            occluded += 1;
        } else {
            unoccluded += 1;
        }
    }
    Ok(DatasetStats {
        total: lines.len() as u64,
        per_class,
        imbalance_ratio: imbalance_ratio(&per_class),
        variant_ops,
        env_conditions,
        occluded,
        unoccluded,
    })
}

/// Max over min among nonzero class counts; 1.0 for empty or single-class.
pub fn imbalance_ratio(per_class: &[u64; 6]) -> f64 {
    let present: Vec<u64> = per_class.iter().copied().filter(|n| *n > 0).collect();
    match (present.iter().max(), present.iter().min()) {
        (Some(max), Some(min)) if *min > 0 => *max as f64 / *min as f64,
        _ => 1.0,
    }
}

impl std::fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "records: {}", self.total)?;
        writeln!(f, "per-class counts:")?;
        for (c, n) in self.per_class.iter().enumerate() {
            writeln!(f, "  {:<14} {n}", SIGN_CLASSES[c].name())?;
        }
        writeln!(f, "imbalance ratio (max/min): {:.2}", self.imbalance_ratio)?;
        writeln!(f, "variant ops:")?;
        for (op, n) in &self.variant_ops {
            writeln!(f, "  {op:<16} {n}")?;
        }
        writeln!(f, "environment conditions:")?;
        for (cond, n) in &self.env_conditions {
            writeln!(f, "  {cond:<16} {n}")?;
        }
        writeln!(f, "occluded: {}  unoccluded: {}", self.occluded, self.unoccluded)
    }
}
