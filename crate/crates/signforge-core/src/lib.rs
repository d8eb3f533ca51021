//! Deterministic synthetic traffic-sign dataset generation.
//!
//! The pipeline turns a small corpus of sign sprites, annotated background
//! scenes, and obstacle cutouts into a large labeled object-detection
//! dataset through four stages: sign variant generation (x11), background
//! compositing (x backgrounds), environmental conditions (x7), and
//! obstacle occlusion (x3). Every random draw is a pure function of
//! `(seed, index, stage)`, so output bytes are reproducible regardless of
//! worker count or scheduling.

pub mod assets;
pub mod augment;
pub mod config;
pub mod envfx;
pub mod error;
pub mod exec;
pub mod imageio;
pub mod manifest;
pub mod occlusion;
pub mod plan;
pub mod raster;
pub mod rng;
pub mod scene;
pub mod stats;
pub mod validate;

pub use error::{Error, Result};
