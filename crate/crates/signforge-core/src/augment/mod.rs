//! Stage 1: sign variant generation. Each sign sprite produces `k` variants
//! (11 by default): index 0 is the untouched original, the next indices
//! cycle through five geometric ops and five color ops, and every
//! non-original variant composes one deformation drawn uniformly from
//! {none, piecewise affine, perspective, jpeg compression}.

pub mod color;
pub mod deform;
pub mod geometric;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::RasterImage;
use crate::rng::{RngKey, StageTag, StreamRng};

/// The six sign classes, indexed alphabetically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignClass {
    Informational,
    Priority,
    Prohibitory,
    Regulatory,
    Service,
    Warning,
}

pub const SIGN_CLASSES: [SignClass; 6] = [
    SignClass::Informational,
    SignClass::Priority,
    SignClass::Prohibitory,
    SignClass::Regulatory,
    SignClass::Service,
    SignClass::Warning,
];

impl SignClass {
    pub fn index(self) -> u8 {
        SIGN_CLASSES.iter().position(|c| *c == self).unwrap() as u8
    }

    pub fn from_index(i: u8) -> Option<SignClass> {
        SIGN_CLASSES.get(i as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            SignClass::Informational => "informational",
            SignClass::Priority => "priority",
            SignClass::Prohibitory => "prohibitory",
            SignClass::Regulatory => "regulatory",
            SignClass::Service => "service",
            SignClass::Warning => "warning",
        }
    }
}

impl std::str::FromStr for SignClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "informational" => Ok(SignClass::Informational),
            "priority" => Ok(SignClass::Priority),
            "prohibitory" => Ok(SignClass::Prohibitory),
            "regulatory" => Ok(SignClass::Regulatory),
            "service" => Ok(SignClass::Service),
            "warning" => Ok(SignClass::Warning),
            other => Err(Error::Config(format!(
                "unknown sign class '{other}', expected one of: informational, priority, prohibitory, regulatory, service, warning"
            ))),
        }
    }
}

impl std::fmt::Display for SignClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A sign sprite: RGBA image with transparency outside the sign shape.
#[derive(Debug, Clone)]
pub struct SignAsset {
    pub id: String,
    pub class: SignClass,
    pub image: RasterImage,
}

impl SignAsset {
    pub fn new(id: String, class: SignClass, image: RasterImage) -> Result<Self> {
        if image.pixels().chunks_exact(4).all(|p| p[3] == 0) {
            return Err(Error::Asset(format!(
                "sign '{id}' has no visible pixels (all alpha = 0)"
            )));
        }
        Ok(SignAsset { id, class, image })
    }
}

/// The primary transform applied to a variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VariantOp {
    Original,
    Rotate { angle_deg: f64 },
    Shear { shear_deg: f64 },
    Scale { factor: f64 },
    Crop { left: f64, right: f64, top: f64, bottom: f64 },
    Translate { dx: f64, dy: f64 },
    Brightness { factor: f64 },
    Noise { amplitude: i64 },
    GaussianBlur { sigma: f64 },
    LinearContrast { alpha: f64 },
    MedianBlur { kernel: u32 },
}

impl VariantOp {
    pub fn kind_name(&self) -> &'static str {
        match self {
            VariantOp::Original => "original",
            VariantOp::Rotate { .. } => "rotate",
            VariantOp::Shear { .. } => "shear",
            VariantOp::Scale { .. } => "scale",
            VariantOp::Crop { .. } => "crop",
            VariantOp::Translate { .. } => "translate",
            VariantOp::Brightness { .. } => "brightness",
            VariantOp::Noise { .. } => "noise",
            VariantOp::GaussianBlur { .. } => "gaussian_blur",
            VariantOp::LinearContrast { .. } => "linear_contrast",
            VariantOp::MedianBlur { .. } => "median_blur",
        }
    }
}

/// Deformation composed after the primary op.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Deformation {
    None,
    PiecewiseAffine { strength: f64 },
    Perspective { strength: f64 },
    JpegCompression { strength: i64 },
}

/// Full parameter record for one variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantParams {
    pub index: u32,
    #[serde(flatten)]
    pub op: VariantOp,
    pub deformation: Deformation,
}

/// A variant plus the seed that drives its pixel-level randomness (noise
/// fields, warp offsets). The seed is drawn from the same parameter stream
/// so a plan fully determines the rendered pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantPlan {
    #[serde(flatten)]
    pub params: VariantParams,
    #[serde(skip)]
    pub pixel_seed: u64,
}

/// Sampling ranges for variant parameters. Defaults follow the augmentation
/// schedule; configured overrides must stay inside these hard bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentRanges {
    pub rotate_deg: [f64; 2],
    pub shear_deg: [f64; 2],
    pub scale: [f64; 2],
    pub crop_max: f64,
    pub translate_max: f64,
    /// Restrict translation to upward shifts only (dy in [-max, 0], dx = 0).
    pub translate_upward_only: bool,
    pub brightness: [f64; 2],
    pub noise_amplitude: [i64; 2],
    pub blur_sigma_max: f64,
    pub contrast_alpha: [f64; 2],
    pub median_kernels: Vec<u32>,
    pub warp_strength_max: f64,
    pub jpeg_strength: [i64; 2],
}

impl Default for AugmentRanges {
    fn default() -> Self {
        AugmentRanges {
            rotate_deg: [-25.0, 25.0],
            shear_deg: [-16.0, 16.0],
            scale: [0.80, 1.20],
            crop_max: 0.30,
            translate_max: 0.10,
            translate_upward_only: false,
            brightness: [0.50, 2.00],
            noise_amplitude: [1, 80],
            blur_sigma_max: 3.0,
            contrast_alpha: [0.25, 1.00],
            median_kernels: vec![3, 5],
            warp_strength_max: 0.9,
            jpeg_strength: [0, 85],
        }
    }
}

impl AugmentRanges {
    /// Reject configurations that step outside the hard parameter bounds.
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, lo: f64, hi: f64, bound: [f64; 2]| -> Result<()> {
            if lo > hi || lo < bound[0] || hi > bound[1] {
                return Err(Error::Config(format!(
                    "augment.{name} [{lo}, {hi}] must lie within [{}, {}]",
                    bound[0], bound[1]
                )));
            }
            Ok(())
        };
        check("rotate_deg", self.rotate_deg[0], self.rotate_deg[1], [-25.0, 25.0])?;
        check("shear_deg", self.shear_deg[0], self.shear_deg[1], [-16.0, 16.0])?;
        check("scale", self.scale[0], self.scale[1], [0.80, 1.20])?;
        if !(0.0..=0.30).contains(&self.crop_max) {
            return Err(Error::Config(format!(
                "augment.crop_max {} must lie within [0, 0.30]",
                self.crop_max
            )));
        }
        if !(0.0..=0.10).contains(&self.translate_max) {
            return Err(Error::Config(format!(
                "augment.translate_max {} must lie within [0, 0.10]",
                self.translate_max
            )));
        }
        check("brightness", self.brightness[0], self.brightness[1], [0.50, 2.00])?;
        if self.noise_amplitude[0] < 1
            || self.noise_amplitude[1] > 80
            || self.noise_amplitude[0] > self.noise_amplitude[1]
        {
            return Err(Error::Config(format!(
                "augment.noise_amplitude {:?} must lie within [1, 80]",
                self.noise_amplitude
            )));
        }
        if !(self.blur_sigma_max > 0.0 && self.blur_sigma_max <= 3.0) {
            return Err(Error::Config(format!(
                "augment.blur_sigma_max {} must lie within (0, 3.0]",
                self.blur_sigma_max
            )));
        }
        check("contrast_alpha", self.contrast_alpha[0], self.contrast_alpha[1], [0.25, 1.00])?;
        if self.median_kernels.is_empty() || self.median_kernels.iter().any(|k| *k != 3 && *k != 5) {
            return Err(Error::Config(format!(
                "augment.median_kernels {:?} must be a nonempty subset of {{3, 5}}",
                self.median_kernels
            )));
        }
        if !(self.warp_strength_max > 0.0 && self.warp_strength_max <= 0.9) {
            return Err(Error::Config(format!(
                "augment.warp_strength_max {} must lie within (0, 0.9]",
                self.warp_strength_max
            )));
        }
        if self.jpeg_strength[0] < 0
            || self.jpeg_strength[1] > 85
            || self.jpeg_strength[0] > self.jpeg_strength[1]
        {
            return Err(Error::Config(format!(
                "augment.jpeg_strength {:?} must lie within [0, 85]",
                self.jpeg_strength
            )));
        }
        Ok(())
    }
}

/// The ten non-original op kinds in variant-index order: five geometric,
/// then five color.
const OP_CYCLE: usize = 10;

fn sample_op(slot: usize, ranges: &AugmentRanges, rng: &mut StreamRng) -> VariantOp {
    match slot {
        0 => VariantOp::Rotate {
            angle_deg: rng.uniform(ranges.rotate_deg[0], ranges.rotate_deg[1]),
        },
        1 => VariantOp::Shear {
            shear_deg: rng.uniform(ranges.shear_deg[0], ranges.shear_deg[1]),
        },
        2 => VariantOp::Scale {
            factor: rng.uniform(ranges.scale[0], ranges.scale[1]),
        },
        3 => VariantOp::Crop {
            left: rng.uniform(0.0, ranges.crop_max),
            right: rng.uniform(0.0, ranges.crop_max),
            top: rng.uniform(0.0, ranges.crop_max),
            bottom: rng.uniform(0.0, ranges.crop_max),
        },
        4 => {
            if ranges.translate_upward_only {
                VariantOp::Translate {
                    dx: 0.0,
                    dy: rng.uniform(-ranges.translate_max, 0.0),
                }
            } else {
                VariantOp::Translate {
                    dx: rng.uniform(-ranges.translate_max, ranges.translate_max),
                    dy: rng.uniform(-ranges.translate_max, ranges.translate_max),
                }
            }
        }
        5 => VariantOp::Brightness {
            factor: rng.uniform(ranges.brightness[0], ranges.brightness[1]),
        },
        6 => VariantOp::Noise {
            amplitude: rng.uniform_i64(ranges.noise_amplitude[0], ranges.noise_amplitude[1]),
        },
        7 => VariantOp::GaussianBlur {
            sigma: rng.uniform_open_lo(0.0, ranges.blur_sigma_max),
        },
        8 => VariantOp::LinearContrast {
            alpha: rng.uniform(ranges.contrast_alpha[0], ranges.contrast_alpha[1]),
        },
        9 => VariantOp::MedianBlur {
            kernel: ranges.median_kernels[rng.uniform_index(ranges.median_kernels.len())],
        },
        _ => unreachable!("op slot {slot} out of range"),
    }
}

fn sample_deformation(ranges: &AugmentRanges, rng: &mut StreamRng) -> Deformation {
    match rng.uniform_index(4) {
        0 => Deformation::None,
        1 => Deformation::PiecewiseAffine {
            strength: rng.uniform_open_lo(0.0, ranges.warp_strength_max),
        },
        2 => Deformation::Perspective {
            strength: rng.uniform_open_lo(0.0, ranges.warp_strength_max),
        },
        _ => Deformation::JpegCompression {
            strength: rng.uniform_i64(ranges.jpeg_strength[0], ranges.jpeg_strength[1]),
        },
    }
}

/// Sample the parameter plans for `count` variants of one sign from a
/// single stream, in the documented order: variant index ascending; per
/// variant the op parameters in declaration order, then the deformation
/// kind, its strength, and finally one draw reserving the variant's
/// pixel-randomness seed.
pub fn sample_variant_plans(
    count: u32,
    ranges: &AugmentRanges,
    rng: &mut StreamRng,
) -> Vec<VariantPlan> {
    let mut plans = Vec::with_capacity(count as usize);
    plans.push(VariantPlan {
        params: VariantParams {
            index: 0,
            op: VariantOp::Original,
            deformation: Deformation::None,
        },
        pixel_seed: 0,
    });
    for index in 1..count {
        let op = sample_op((index as usize - 1) % OP_CYCLE, ranges, rng);
        let deformation = sample_deformation(ranges, rng);
        let pixel_seed = rng.next_u64();
        plans.push(VariantPlan {
            params: VariantParams {
                index,
                op,
                deformation,
            },
            pixel_seed,
        });
    }
    plans
}

/// Render one variant: apply the primary op, then the deformation. Pixel
/// randomness (noise field, warp offsets) comes from a stream opened on the
/// plan's pixel seed, so re-rendering is reproducible anywhere.
pub fn render_variant(sign: &RasterImage, plan: &VariantPlan) -> Result<RasterImage> {
    let mut pixel_rng = RngKey::new(plan.pixel_seed, 0, StageTag::VariantRender).stream();
    let base = match &plan.params.op {
        VariantOp::Original => sign.clone(),
        VariantOp::Rotate { angle_deg } => geometric::rotate(sign, *angle_deg)?,
        VariantOp::Shear { shear_deg } => geometric::shear(sign, *shear_deg)?,
        VariantOp::Scale { factor } => geometric::scale(sign, *factor)?,
        VariantOp::Crop { left, right, top, bottom } => {
            geometric::crop(sign, *left, *right, *top, *bottom)?
        }
        VariantOp::Translate { dx, dy } => geometric::translate(sign, *dx, *dy)?,
        VariantOp::Brightness { factor } => color::brightness(sign, *factor)?,
        VariantOp::Noise { amplitude } => color::add_uniform_noise(sign, *amplitude, &mut pixel_rng)?,
        VariantOp::GaussianBlur { sigma } => color::gaussian_blur(sign, *sigma)?,
        VariantOp::LinearContrast { alpha } => color::linear_contrast(sign, *alpha)?,
        VariantOp::MedianBlur { kernel } => color::median_blur(sign, *kernel)?,
    };
    match &plan.params.deformation {
        Deformation::None => Ok(base),
        Deformation::PiecewiseAffine { strength } => {
            deform::piecewise_affine(&base, *strength, &mut pixel_rng)
        }
        Deformation::Perspective { strength } => {
            deform::perspective_warp(&base, *strength, &mut pixel_rng)
        }
        Deformation::JpegCompression { strength } => deform::jpeg_roundtrip(&base, *strength),
    }
}

/// Produce the full variant set for a sign: parameter plans plus rendered
/// images. Exactly `count` outputs, the first pixel-identical to the input.
pub fn make_variants(
    sign: &SignAsset,
    count: u32,
    ranges: &AugmentRanges,
    rng: &mut StreamRng,
) -> Result<Vec<(RasterImage, VariantPlan)>> {
    let plans = sample_variant_plans(count, ranges, rng);
    plans
        .into_iter()
        .map(|plan| Ok((render_variant(&sign.image, &plan)?, plan)))
        .collect()
}

/// Default variant multiplicity: the original plus each of the ten ops once.
pub const DEFAULT_VARIANTS_PER_SIGN: u32 = 11;

#[cfg(test)]
mod tests {
    use super::*;

    fn test_sign() -> SignAsset {
        let mut img = RasterImage::new(24, 24).unwrap();
        for y in 3..21 {
            for x in 3..21 {
                img.set(x, y, [200, 30, 40, 255]);
            }
        }
        SignAsset::new("s0".into(), SignClass::Warning, img).unwrap()
    }

    fn stream(seed: u64) -> StreamRng {
        RngKey::new(seed, 0, StageTag::VariantParams).stream()
    }

    #[test]
    fn eleven_variants_first_is_original() {
        let sign = test_sign();
        let out = make_variants(&sign, DEFAULT_VARIANTS_PER_SIGN, &AugmentRanges::default(), &mut stream(3)).unwrap();
        assert_eq!(out.len(), 11);
        assert_eq!(out[0].0, sign.image);
        assert_eq!(out[0].1.params.op, VariantOp::Original);
        // Indices 1..=5 geometric, 6..=10 color, in declaration order.
        let kinds: Vec<&str> = out.iter().map(|(_, p)| p.params.op.kind_name()).collect();
        assert_eq!(
            kinds,
            [
                "original", "rotate", "shear", "scale", "crop", "translate",
                "brightness", "noise", "gaussian_blur", "linear_contrast", "median_blur"
            ]
        );
    }

    #[test]
    fn corpus_arithmetic_matches_elevenfold_expansion() {
        // 88 signs at 11 variants each -> 968.
        assert_eq!(88 * DEFAULT_VARIANTS_PER_SIGN, 968);
        assert_eq!(220 * DEFAULT_VARIANTS_PER_SIGN, 2420);
    }

    #[test]
    fn fixed_seed_reproduces_parameter_log() {
        let ranges = AugmentRanges::default();
        let a = sample_variant_plans(11, &ranges, &mut stream(42));
        let b = sample_variant_plans(11, &ranges, &mut stream(42));
        assert_eq!(a, b);
        let c = sample_variant_plans(11, &ranges, &mut stream(43));
        assert_ne!(a, c);
    }

    #[test]
    fn sampled_parameters_lie_in_ranges() {
        let ranges = AugmentRanges::default();
        for seed in 0..50 {
            for plan in sample_variant_plans(11, &ranges, &mut stream(seed)) {
                match plan.params.op {
                    VariantOp::Original => assert_eq!(plan.params.index, 0),
                    VariantOp::Rotate { angle_deg } => assert!((-25.0..=25.0).contains(&angle_deg)),
                    VariantOp::Shear { shear_deg } => assert!((-16.0..=16.0).contains(&shear_deg)),
                    VariantOp::Scale { factor } => assert!((0.8..=1.2).contains(&factor)),
                    VariantOp::Crop { left, right, top, bottom } => {
                        for f in [left, right, top, bottom] {
                            assert!((0.0..=0.30).contains(&f));
                        }
                    }
                    VariantOp::Translate { dx, dy } => {
                        assert!((-0.10..=0.10).contains(&dx) && (-0.10..=0.10).contains(&dy));
                    }
                    VariantOp::Brightness { factor } => assert!((0.5..=2.0).contains(&factor)),
                    VariantOp::Noise { amplitude } => assert!((1..=80).contains(&amplitude)),
                    VariantOp::GaussianBlur { sigma } => assert!(sigma > 0.0 && sigma <= 3.0),
                    VariantOp::LinearContrast { alpha } => assert!((0.25..=1.0).contains(&alpha)),
                    VariantOp::MedianBlur { kernel } => assert!(kernel == 3 || kernel == 5),
                }
                match plan.params.deformation {
                    Deformation::None => {}
                    Deformation::PiecewiseAffine { strength } | Deformation::Perspective { strength } => {
                        assert!(strength > 0.0 && strength <= 0.9);
                    }
                    Deformation::JpegCompression { strength } => assert!((0..=85).contains(&strength)),
                }
            }
        }
    }

    #[test]
    fn extended_counts_cycle_through_ops() {
        let plans = sample_variant_plans(23, &AugmentRanges::default(), &mut stream(7));
        assert_eq!(plans.len(), 23);
        assert_eq!(plans[11].params.op.kind_name(), "rotate");
        assert_eq!(plans[21].params.op.kind_name(), "rotate");
        assert_eq!(plans[22].params.op.kind_name(), "shear");
    }

    #[test]
    fn upward_only_translate_restricts_sampling() {
        let ranges = AugmentRanges {
            translate_upward_only: true,
            ..AugmentRanges::default()
        };
        for seed in 0..30 {
            for plan in sample_variant_plans(11, &ranges, &mut stream(seed)) {
                if let VariantOp::Translate { dx, dy } = plan.params.op {
                    assert_eq!(dx, 0.0);
                    assert!((-0.10..=0.0).contains(&dy));
                }
            }
        }
    }

    #[test]
    fn rejects_all_transparent_sign() {
        let img = RasterImage::new(8, 8).unwrap();
        assert!(SignAsset::new("t".into(), SignClass::Priority, img).is_err());
    }

    #[test]
    fn transparent_input_stays_transparent_under_geometric_ops() {
        let mut img = RasterImage::new(10, 10).unwrap();
        img.set(5, 5, [1, 1, 1, 255]);
        let sign = SignAsset::new("x".into(), SignClass::Service, img).unwrap();
        let variants = make_variants(&sign, 11, &AugmentRanges::default(), &mut stream(9)).unwrap();
        for (image, plan) in &variants {
            // Color ops leave alpha untouched except gaussian blur.
            match plan.params.op {
                VariantOp::Brightness { .. }
                | VariantOp::Noise { .. }
                | VariantOp::LinearContrast { .. }
                | VariantOp::MedianBlur { .. }
                    if plan.params.deformation == Deformation::None => {
                        let alphas: Vec<u8> =
                            image.pixels().chunks_exact(4).map(|p| p[3]).collect();
                        let orig: Vec<u8> =
                            sign.image.pixels().chunks_exact(4).map(|p| p[3]).collect();
                        assert_eq!(alphas, orig, "{} changed alpha", plan.params.op.kind_name());
                    }
                _ => {}
            }
        }
    }

    #[test]
    fn class_indices_are_alphabetical() {
        assert_eq!(SignClass::Informational.index(), 0);
        assert_eq!(SignClass::Priority.index(), 1);
        assert_eq!(SignClass::Prohibitory.index(), 2);
        assert_eq!(SignClass::Regulatory.index(), 3);
        assert_eq!(SignClass::Service.index(), 4);
        assert_eq!(SignClass::Warning.index(), 5);
        assert_eq!("WARNING".parse::<SignClass>().unwrap(), SignClass::Warning);
        assert!("bogus".parse::<SignClass>().is_err());
    }
}
