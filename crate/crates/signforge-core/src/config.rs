//! Pipeline configuration: a single JSON file holding asset paths, stage
//! toggles, parameter ranges, balance mode, and execution settings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::AugmentRanges;
use crate::envfx::EnvFxConfig;
use crate::error::{Error, Result};
use crate::occlusion::OcclusionConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[derive(Default)]
pub enum LabelFormat {
    #[default]
    Yolo,
}


/// Output image encoding. PNG is the deterministic default; JPEG bytes
/// may vary across encoder versions and are offered for size only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[derive(Default)]
pub enum ImageFormat {
    #[default]
    Png,
    Jpeg,
}


impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Png => "png",
            ImageFormat::Jpeg => "jpg",
        }
    }
}

/// Which multiplying stages run. Variant generation and background
/// compositing are always on; environment and occlusion can be disabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageToggles {
    pub environment: bool,
    pub occlusion: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        StageToggles {
            environment: true,
            occlusion: true,
        }
    }
}

/// Balance mode: per-class variant multiplicities are raised so each class
/// lands within 5% of `target` final images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalanceConfig {
    pub target: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Sign corpus manifest: CSV with header `file,class`.
    pub signs: PathBuf,
    /// Directory holding background images (PNG or JPEG).
    pub backgrounds_dir: PathBuf,
    /// Placements file: CSV with header `background,x,y,w,h`.
    pub placements: PathBuf,
    /// Obstacle cutouts manifest: CSV with header `file,category,source_image`.
    /// Required when the occlusion stage is enabled.
    pub obstacles: Option<PathBuf>,
    pub stages: StageToggles,
    pub augment: AugmentRanges,
    pub env: EnvFxConfig,
    pub occlusion: OcclusionConfig,
    pub balance: Option<BalanceConfig>,
    pub output_dir: PathBuf,
    pub label_format: LabelFormat,
    pub image_format: ImageFormat,
    pub seed: u64,
    /// Worker threads; 0 means one per logical CPU.
    pub jobs: usize,
    /// Render only the first N canonical records.
    pub limit: Option<u64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            signs: PathBuf::from("signs.csv"),
            backgrounds_dir: PathBuf::from("backgrounds"),
            placements: PathBuf::from("placements.csv"),
            obstacles: None,
            stages: StageToggles::default(),
            augment: AugmentRanges::default(),
            env: EnvFxConfig::default(),
            occlusion: OcclusionConfig::default(),
            balance: None,
            output_dir: PathBuf::from("out"),
            label_format: LabelFormat::Yolo,
            image_format: ImageFormat::Png,
            seed: 0,
            jobs: 0,
            limit: None,
        }
    }
}

impl PipelineConfig {
    /// Parse a JSON config file. Paths stay relative to the process working
    /// directory unless made absolute by [`PipelineConfig::rebase`].
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    /// Resolve relative asset paths against `base` (typically the config
    /// file's directory).
    pub fn rebase(mut self, base: &Path) -> Self {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        fix(&mut self.signs);
        fix(&mut self.backgrounds_dir);
        fix(&mut self.placements);
        if let Some(ref mut o) = self.obstacles {
            fix(o);
        }
        fix(&mut self.output_dir);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.augment.validate()?;
        self.occlusion.validate()?;
        if self.stages.occlusion && self.obstacles.is_none() {
            return Err(Error::Config(
                "occlusion stage is enabled but no `obstacles` cutouts manifest is configured".into(),
            ));
        }
        if let Some(balance) = &self.balance {
            if balance.target == 0 {
                return Err(Error::Config("balance.target must be positive".into()));
            }
        }
        Ok(())
    }

    /// Stage multiplier for the environment stage (7 when enabled, else 1).
    pub fn env_factor(&self) -> u64 {
        if self.stages.environment {
            crate::envfx::ENV_CONDITION_COUNT as u64
        } else {
            1
        }
    }

    /// Stage multiplier for the occlusion stage (3 when enabled, else 1).
    pub fn occlusion_factor(&self) -> u64 {
        if self.stages.occlusion {
            3
        } else {
            1
        }
    }

    /// Hex SHA-256 of the canonical JSON serialization; stamped into the
    /// manifest header so runs can be traced to their exact configuration.
    /// Execution-only settings (worker count, output directory) are
    /// normalized out: they cannot change output bytes, so runs at
    /// different parallelism hash identically.
    pub fn content_hash(&self) -> String {
        let mut canon = self.clone();
        canon.jobs = 0;
        canon.output_dir = PathBuf::new();
        let json = serde_json::to_string(&canon).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        let mut out = String::with_capacity(64);
        for b in digest {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_roundtrips_through_json() {
        let config = PipelineConfig::default();
        let json = serde_json::to_string_pretty(&config).unwrap();
        let back: PipelineConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = serde_json::from_str::<PipelineConfig>(r#"{"sings": "x.csv"}"#).unwrap_err();
        assert!(err.to_string().contains("sings"));
    }

    #[test]
    fn occlusion_without_obstacles_rejected() {
        let config = PipelineConfig::default();
        assert!(matches!(config.validate(), Err(Error::Config(_))));
        let mut off = config.clone();
        off.stages.occlusion = false;
        assert!(off.validate().is_ok());
    }

    #[test]
    fn out_of_bound_augment_range_rejected() {
        let mut config = PipelineConfig::default();
        config.stages.occlusion = false;
        config.augment.rotate_deg = [-30.0, 25.0];
        assert!(config.validate().is_err());
    }

    #[test]
    fn content_hash_tracks_changes() {
        let mut a = PipelineConfig::default();
        a.stages.occlusion = false;
        let h1 = a.content_hash();
        a.seed = 99;
        let h2 = a.content_hash();
        assert_ne!(h1, h2);
        assert_eq!(h1.len(), 64);
    }

    #[test]
    fn stage_factors() {
        let mut config = PipelineConfig::default();
        assert_eq!(config.env_factor(), 7);
        assert_eq!(config.occlusion_factor(), 3);
        config.stages.environment = false;
        config.stages.occlusion = false;
        assert_eq!(config.env_factor(), 1);
        assert_eq!(config.occlusion_factor(), 1);
    }
}
