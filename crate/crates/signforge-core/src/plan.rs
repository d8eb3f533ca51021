//! Plan construction: exact stage-count algebra, balance mode, and the
//! canonical record enumeration with all pixel-independent parameters
//! sampled eagerly from counter-based streams.

use serde::{Deserialize, Serialize};

use crate::assets::AssetCatalog;
use crate::augment::{sample_variant_plans, SignClass, VariantPlan, DEFAULT_VARIANTS_PER_SIGN, SIGN_CLASSES};
use crate::config::PipelineConfig;
use crate::envfx::{sample_condition, EnvCondition};
use crate::error::{Error, Result};
use crate::rng::{RngKey, StageTag};
use crate::scene::Placement;

/// Per-class counts at each stage boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRow {
    pub initial: u64,
    pub variants: u64,
    pub composites: u64,
    pub environment: u64,
    pub occlusion: u64,
}

/// The full count table: one row per class plus totals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    pub rows: [CountRow; 6],
    pub backgrounds: u64,
    pub env_factor: u64,
    pub occlusion_factor: u64,
    /// Variant multiplicity per class (11 unless balance mode raised it).
    pub multiplicities: [u64; 6],
}

impl CountTable {
    /// Compute the table from per-class sign counts and the stage factors.
    pub fn compute(
        class_counts: [u64; 6],
        multiplicities: [u64; 6],
        backgrounds: u64,
        env_factor: u64,
        occlusion_factor: u64,
    ) -> CountTable {
        let mut rows = [CountRow {
            initial: 0,
            variants: 0,
            composites: 0,
            environment: 0,
            occlusion: 0,
        }; 6];
        for c in 0..6 {
            let initial = class_counts[c];
            let variants = initial * multiplicities[c];
            let composites = variants * backgrounds;
            let environment = composites * env_factor;
            let occlusion = environment * occlusion_factor;
            rows[c] = CountRow {
                initial,
                variants,
                composites,
                environment,
                occlusion,
            };
        }
        CountTable {
            rows,
            backgrounds,
            env_factor,
            occlusion_factor,
            multiplicities,
        }
    }

    pub fn totals(&self) -> CountRow {
        let mut t = CountRow {
            initial: 0,
            variants: 0,
            composites: 0,
            environment: 0,
            occlusion: 0,
        };
        for r in &self.rows {
            t.initial += r.initial;
            t.variants += r.variants;
            t.composites += r.composites;
            t.environment += r.environment;
            t.occlusion += r.occlusion;
        }
        t
    }

    /// Total records the plan will enumerate (the last active stage column).
    pub fn total_records(&self) -> u64 {
        self.totals().occlusion
    }
}

impl std::fmt::Display for CountTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{:<14} {:>9} {:>11} {:>12} {:>13} {:>13}",
            "class", "initial", "variants", "composites", "environment", "occlusion"
        )?;
        for (c, row) in self.rows.iter().enumerate() {
            writeln!(
                f,
                "{:<14} {:>9} {:>11} {:>12} {:>13} {:>13}",
                SIGN_CLASSES[c].name(),
                row.initial,
                row.variants,
                row.composites,
                row.environment,
                row.occlusion
            )?;
        }
        let t = self.totals();
        writeln!(
            f,
            "{:<14} {:>9} {:>11} {:>12} {:>13} {:>13}",
            "total", t.initial, t.variants, t.composites, t.environment, t.occlusion
        )?;
        // The per-class expansion law under the current factors.
        let b = self.backgrounds;
        let e = self.env_factor;
        let o = self.occlusion_factor;
        let k = self.multiplicities;
        if k.iter().all(|m| *m == k[0]) {
            writeln!(
                f,
                "law: n -> {}n -> {}n -> {}n -> {}n",
                k[0],
                k[0] * b,
                k[0] * b * e,
                k[0] * b * e * o
            )?;
        } else {
            for (c, m) in k.iter().enumerate() {
                if self.rows[c].initial > 0 {
                    writeln!(
                        f,
                        "law[{}]: n -> {}n -> {}n -> {}n -> {}n",
                        SIGN_CLASSES[c].name(),
                        m,
                        m * b,
                        m * b * e,
                        m * b * e * o
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// Published reference figures for the original corpus configuration
/// (220 signs over 20 backgrounds, all stages on). Two cells are internally
/// inconsistent with the stage laws and are flagged by [`reference_deltas`]:
/// prohibitory variants (printed 99 where 36 x 11 = 396, contradicting its
/// own next column 7,920 = 396 x 20) and the regulatory environment cell
/// (printed 28,980 where 4,180 x 7 = 29,260, propagating to 86,940).
pub const REFERENCE_TABLE: [[u64; 5]; 6] = [
    [88, 968, 19_360, 135_520, 406_560],
    [9, 99, 1_980, 13_860, 41_580],
    [36, 99, 7_920, 55_440, 166_320],
    [19, 209, 4_180, 28_980, 86_940],
    [20, 220, 4_400, 30_800, 92_400],
    [48, 528, 10_560, 73_920, 221_760],
];

/// Published totals row for the reference configuration.
pub const REFERENCE_TOTALS: [u64; 5] = [220, 2_420, 48_400, 338_520, 1_015_560];

/// Differences between a computed table and the published reference
/// figures: `(class, stage column, computed, published)`.
pub fn reference_deltas(table: &CountTable) -> Vec<(usize, usize, u64, u64)> {
    let mut deltas = Vec::new();
    for (c, row) in table.rows.iter().enumerate() {
        let computed = [
            row.initial,
            row.variants,
            row.composites,
            row.environment,
            row.occlusion,
        ];
        for (stage, (got, want)) in computed.iter().zip(REFERENCE_TABLE[c].iter()).enumerate() {
            if got != want {
                deltas.push((c, stage, *got, *want));
            }
        }
    }
    deltas
}

/// Balance mode: choose per-class variant multiplicities so each class's
/// final count lands within 5% of `target`. `k_c = round(target / (n_c *
/// backgrounds * env * occ))`, clamped to at least the default 11.
pub fn balance_factors(
    class_counts: [u64; 6],
    target: u64,
    backgrounds: u64,
    env_factor: u64,
    occlusion_factor: u64,
) -> Result<[u64; 6]> {
    let per_variant = backgrounds * env_factor * occlusion_factor;
    if per_variant == 0 {
        return Err(Error::Config("balance mode needs at least one background".into()));
    }
    let mut ks = [DEFAULT_VARIANTS_PER_SIGN as u64; 6];
    let mut max_count = 0u64;
    for c in 0..6 {
        let n = class_counts[c];
        if n == 0 {
            continue;
        }
        max_count = max_count.max(n);
        let ideal = target as f64 / (n * per_variant) as f64;
        ks[c] = (ideal.round() as u64).max(DEFAULT_VARIANTS_PER_SIGN as u64);
    }
    // Feasibility: every class within 5% of target.
    for c in 0..6 {
        let n = class_counts[c];
        if n == 0 {
            continue;
        }
        let final_count = n * ks[c] * per_variant;
        let deviation = (final_count as f64 - target as f64).abs() / target as f64;
        if deviation > 0.05 {
            let minimum = max_count * DEFAULT_VARIANTS_PER_SIGN as u64 * per_variant;
            return Err(Error::Config(format!(
                "balance target {target} is infeasible: class {} would reach {final_count} \
                 ({:.1}% off); the minimum feasible target is {minimum} (the largest class at \
                 the default x{} multiplicity)",
                SIGN_CLASSES[c].name(),
                deviation * 100.0,
                DEFAULT_VARIANTS_PER_SIGN
            )));
        }
    }
    Ok(ks)
}

/// Occlusion slot of a record: 0 is the unoccluded copy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedOcclusion {
    /// 1 or 2 (slot 0 carries `None`).
    pub slot: u32,
    pub obstacle_index: usize,
}

/// One planned output image with its full provenance chain. Pixel work
/// needs nothing beyond this record, the asset catalog, and the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanRecord {
    pub record_id: u64,
    pub sign_index: usize,
    pub class: SignClass,
    pub variant: VariantPlan,
    pub background_index: usize,
    pub placement_index: usize,
    pub placement: Placement,
    /// Ordinal of the (composite, condition) pair; keys the environment
    /// render stream so the three occlusion siblings share one conditioned
    /// scene.
    pub env_ordinal: u64,
    pub env: Option<EnvCondition>,
    pub occlusion: Option<PlannedOcclusion>,
}

/// The full deterministic plan.
#[derive(Debug, Clone)]
pub struct Plan {
    pub records: Vec<PlanRecord>,
    pub counts: CountTable,
    pub seed: u64,
}

/// Compute the count table from per-class sign counts and a background
/// count. Exact integer arithmetic; this is what `plan` prints.
pub fn plan_counts_from(
    config: &PipelineConfig,
    class_counts: [u64; 6],
    backgrounds: u64,
) -> Result<CountTable> {
    if backgrounds == 0 {
        return Err(Error::Config("no backgrounds loaded".into()));
    }
    let ks = match &config.balance {
        Some(balance) => balance_factors(
            class_counts,
            balance.target,
            backgrounds,
            config.env_factor(),
            config.occlusion_factor(),
        )?,
        None => [DEFAULT_VARIANTS_PER_SIGN as u64; 6],
    };
    Ok(CountTable::compute(
        class_counts,
        ks,
        backgrounds,
        config.env_factor(),
        config.occlusion_factor(),
    ))
}

/// Count table for a loaded catalog.
pub fn plan_counts(config: &PipelineConfig, catalog: &AssetCatalog) -> Result<CountTable> {
    plan_counts_from(
        config,
        catalog.class_counts(),
        catalog.backgrounds.len() as u64,
    )
}

/// Enumerate the plan in canonical order: sign, variant, background,
/// condition, occlusion slot. Every random parameter that does not depend
/// on rendered pixels is sampled here from `(seed, ordinal, stage)` keys,
/// so the plan is a pure function of (config, catalog).
pub fn build_plan(config: &PipelineConfig, catalog: &AssetCatalog) -> Result<Plan> {
    let counts = plan_counts(config, catalog)?;
    if config.stages.occlusion && catalog.obstacles.is_empty() {
        return Err(Error::Config(
            "occlusion stage is enabled but the obstacle pool is empty".into(),
        ));
    }
    let seed = config.seed;
    let env_slots = config.env_factor();
    let occ_slots = config.occlusion_factor();
    let backgrounds = catalog.backgrounds.len() as u64;
    let limit = config.limit.unwrap_or(u64::MAX);
    // Cap the preallocation; full-scale plans grow the vec incrementally.
    let capacity = counts.total_records().min(limit).min(1 << 20) as usize;

    let mut records = Vec::with_capacity(capacity);
    let mut record_id = 0u64;
    let mut variant_ordinal = 0u64;
    'signs: for (sign_index, sign) in catalog.signs.iter().enumerate() {
        let k = counts.multiplicities[sign.class.index() as usize] as u32;
        let mut param_rng = RngKey::new(seed, sign_index as u64, StageTag::VariantParams).stream();
        let variant_plans = sample_variant_plans(k, &config.augment, &mut param_rng);
        for variant in variant_plans {
            let v_ord = variant_ordinal;
            variant_ordinal += 1;
            for (background_index, bg) in catalog.backgrounds.iter().enumerate() {
                let composite_ordinal = v_ord * backgrounds + background_index as u64;
                let placement_index = if bg.placements.len() > 1 {
                    RngKey::new(seed, composite_ordinal, StageTag::Placement)
                        .stream()
                        .uniform_index(bg.placements.len())
                } else {
                    0
                };
                let placement = bg.placements[placement_index];
                for env_slot in 0..env_slots {
                    let env_ordinal = composite_ordinal * env_slots + env_slot;
                    let env = if config.stages.environment {
                        let mut env_rng =
                            RngKey::new(seed, env_ordinal, StageTag::EnvParams).stream();
                        Some(sample_condition(
                            env_slot as u32,
                            &config.env,
                            bg.image.width(),
                            bg.image.height(),
                            &mut env_rng,
                        ))
                    } else {
                        None
                    };
                    for occ_slot in 0..occ_slots {
                        let occlusion = if config.stages.occlusion && occ_slot > 0 {
                            let mut occ_rng =
                                RngKey::new(seed, record_id, StageTag::OcclusionChoice).stream();
                            Some(PlannedOcclusion {
                                slot: occ_slot as u32,
                                obstacle_index: occ_rng.uniform_index(catalog.obstacles.len()),
                            })
                        } else {
                            None
                        };
                        records.push(PlanRecord {
                            record_id,
                            sign_index,
                            class: sign.class,
                            variant: variant.clone(),
                            background_index,
                            placement_index,
                            placement,
                            env_ordinal,
                            env: env.clone(),
                            occlusion,
                        });
                        record_id += 1;
                        if record_id >= limit {
                            break 'signs;
                        }
                    }
                }
            }
        }
    }
    Ok(Plan {
        records,
        counts,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::SignAsset;
    use crate::occlusion::{ObstacleAsset, ObstacleCategory};
    use crate::raster::RasterImage;
    use crate::scene::BackgroundAsset;

    fn catalog(signs_per_class: [u64; 6], backgrounds: usize, obstacles: usize) -> AssetCatalog {
        let mut signs = Vec::new();
        for (c, n) in signs_per_class.iter().enumerate() {
            for i in 0..*n {
                let img = RasterImage::filled(16, 16, [200, 0, 0, 255]).unwrap();
                signs.push(
                    SignAsset::new(format!("s{c}_{i}"), SIGN_CLASSES[c], img).unwrap(),
                );
            }
        }
        let bgs = (0..backgrounds)
            .map(|b| {
                let img = RasterImage::filled(64, 48, [90, 90, 90, 255]).unwrap();
                BackgroundAsset::new(
                    format!("bg{b}"),
                    img,
                    vec![Placement { x: 8, y: 8, w: 16, h: 16 }],
                )
                .unwrap()
            })
            .collect();
        let pool = (0..obstacles)
            .map(|o| {
                ObstacleAsset::new(
                    format!("ob{o}"),
                    ObstacleCategory::Car,
                    RasterImage::filled(8, 8, [10, 10, 10, 255]).unwrap(),
                )
                .unwrap()
            })
            .collect();
        AssetCatalog {
            signs,
            backgrounds: bgs,
            obstacles: pool,
        }
    }

    const REFERENCE_COUNTS: [u64; 6] = [88, 9, 36, 19, 20, 48];

    #[test]
    fn count_table_matches_stage_laws_for_reference_corpus() {
        let table = CountTable::compute(REFERENCE_COUNTS, [11; 6], 20, 7, 3);
        // Informational row.
        assert_eq!(table.rows[0].variants, 968);
        assert_eq!(table.rows[0].composites, 19_360);
        assert_eq!(table.rows[0].environment, 135_520);
        assert_eq!(table.rows[0].occlusion, 406_560);
        // Priority: 9 -> 99 -> 1,980 -> 13,860 -> 41,580.
        assert_eq!(
            [
                table.rows[1].variants,
                table.rows[1].composites,
                table.rows[1].environment,
                table.rows[1].occlusion
            ],
            [99, 1_980, 13_860, 41_580]
        );
        // Totals under the laws.
        let t = table.totals();
        assert_eq!(t.initial, 220);
        assert_eq!(t.variants, 2_420);
        assert_eq!(t.composites, 48_400);
        assert_eq!(t.environment, 338_800);
        assert_eq!(t.occlusion, 1_016_400);
    }

    #[test]
    fn reference_deltas_flag_exactly_the_inconsistent_cells() {
        let table = CountTable::compute(REFERENCE_COUNTS, [11; 6], 20, 7, 3);
        let deltas = reference_deltas(&table);
        // Prohibitory variants, regulatory environment + occlusion.
        assert_eq!(deltas.len(), 3);
        assert!(deltas.contains(&(2, 1, 396, 99)));
        assert!(deltas.contains(&(3, 3, 29_260, 28_980)));
        assert!(deltas.contains(&(3, 4, 87_780, 86_940)));
    }

    #[test]
    fn empty_corpus_gives_zero_table() {
        let table = CountTable::compute([0; 6], [11; 6], 20, 7, 3);
        assert_eq!(table.total_records(), 0);
    }

    #[test]
    fn balance_equal_counts_equal_factors() {
        let ks = balance_factors([10, 10, 10, 10, 10, 10], 924_000, 20, 7, 3).unwrap();
        assert!(ks.iter().all(|k| *k == ks[0]));
    }

    #[test]
    fn balance_example_informational_vs_priority() {
        // Target = informational's default total; priority's factor lands
        // near 11 * 88 / 9 and final totals agree within 5%.
        let counts = [88, 9, 0, 0, 0, 0];
        let target = 88 * 11 * 20 * 21;
        let ks = balance_factors(counts, target, 20, 7, 3).unwrap();
        assert_eq!(ks[0], 11);
        assert_eq!(ks[1], (11.0 * 88.0 / 9.0_f64).round() as u64);
        let final_info = 88 * ks[0] * 20 * 21;
        let final_prio = 9 * ks[1] * 20 * 21;
        let ratio = final_prio.max(final_info) as f64 / final_prio.min(final_info) as f64;
        assert!(ratio <= 1.05, "ratio {ratio}");
    }

    #[test]
    fn balance_infeasible_target_explains_minimum() {
        let err = balance_factors(REFERENCE_COUNTS, 1_000, 20, 7, 3).unwrap_err();
        let msg = err.to_string();
        // Minimum feasible: largest class (88) at x11 over 20 * 21.
        assert!(msg.contains(&(88u64 * 11 * 20 * 21).to_string()), "{msg}");
    }

    #[test]
    fn plan_sizes_follow_count_laws() {
        let mut config = PipelineConfig::default();
        config.stages.occlusion = true;
        config.obstacles = Some("cutouts.csv".into());
        let cat = catalog([1, 0, 0, 0, 0, 1], 2, 2);
        let plan = build_plan(&config, &cat).unwrap();
        // 2 signs x 11 x 2 backgrounds x 7 x 3.
        assert_eq!(plan.records.len(), 2 * 11 * 2 * 7 * 3);
        // Dense, duplicate-free ids.
        for (i, r) in plan.records.iter().enumerate() {
            assert_eq!(r.record_id, i as u64);
        }
    }

    #[test]
    fn plan_stage_toggles_change_factors() {
        let mut config = PipelineConfig::default();
        config.stages.environment = false;
        config.stages.occlusion = false;
        let cat = catalog([1, 0, 0, 0, 0, 0], 1, 0);
        let plan = build_plan(&config, &cat).unwrap();
        assert_eq!(plan.records.len(), 11);
        assert!(plan.records.iter().all(|r| r.env.is_none() && r.occlusion.is_none()));
    }

    #[test]
    fn plan_limit_takes_canonical_prefix() {
        let mut config = PipelineConfig::default();
        config.stages.occlusion = false;
        config.limit = Some(25);
        let cat = catalog([1, 1, 0, 0, 0, 0], 2, 0);
        let full_config = PipelineConfig {
            limit: None,
            ..config.clone()
        };
        let full = build_plan(&full_config, &cat).unwrap();
        let limited = build_plan(&config, &cat).unwrap();
        assert_eq!(limited.records.len(), 25);
        assert_eq!(&full.records[..25], &limited.records[..]);
    }

    #[test]
    fn occlusion_slots_cycle_with_unoccluded_first() {
        let config = PipelineConfig {
            obstacles: Some("cutouts.csv".into()),
            ..PipelineConfig::default()
        };
        let cat = catalog([1, 0, 0, 0, 0, 0], 1, 3);
        let plan = build_plan(&config, &cat).unwrap();
        for chunk in plan.records.chunks(3) {
            assert!(chunk[0].occlusion.is_none());
            assert_eq!(chunk[1].occlusion.as_ref().unwrap().slot, 1);
            assert_eq!(chunk[2].occlusion.as_ref().unwrap().slot, 2);
            // The three siblings share the conditioned scene.
            assert_eq!(chunk[0].env_ordinal, chunk[1].env_ordinal);
            assert_eq!(chunk[0].env, chunk[1].env);
        }
    }

    #[test]
    fn env_conditions_cycle_in_canonical_order() {
        let mut config = PipelineConfig::default();
        config.stages.occlusion = false;
        let cat = catalog([1, 0, 0, 0, 0, 0], 1, 0);
        let plan = build_plan(&config, &cat).unwrap();
        let kinds: Vec<&str> = plan.records[..7]
            .iter()
            .map(|r| r.env.as_ref().unwrap().kind_name())
            .collect();
        assert_eq!(kinds, ["rain", "snow", "fog", "sun_flare", "day", "night", "dawn"]);
    }

    #[test]
    fn plan_is_reproducible_for_fixed_seed() {
        let mut config = PipelineConfig {
            obstacles: Some("cutouts.csv".into()),
            seed: 1234,
            ..PipelineConfig::default()
        };
        let cat = catalog([2, 0, 1, 0, 0, 0], 2, 2);
        let a = build_plan(&config, &cat).unwrap();
        let b = build_plan(&config, &cat).unwrap();
        assert_eq!(a.records, b.records);
        config.seed = 1235;
        let c = build_plan(&config, &cat).unwrap();
        assert_ne!(a.records, c.records);
    }
}
