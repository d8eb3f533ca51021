//! Command-line surface for the signforge dataset generator.
//!
//! Exit codes: 0 success, 1 validation/configuration error, 2 runtime
//! failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use signforge_core::assets::{
    count_backgrounds, load_backgrounds, load_obstacles, load_signs, sign_class_counts,
    AssetCatalog,
};
use signforge_core::augment::SIGN_CLASSES;
use signforge_core::config::PipelineConfig;
use signforge_core::error::Error;
use signforge_core::exec::execute;
use signforge_core::imageio::{load_image, save_png};
use signforge_core::occlusion::{extract_cutout, parse_coco_instances, rasterize_polygon, Mask};
use signforge_core::plan::{build_plan, plan_counts_from, reference_deltas, REFERENCE_TOTALS};
use signforge_core::stats::dataset_stats;
use signforge_core::validate::validate_dataset;

#[derive(Parser)]
#[command(
    name = "signforge",
    version,
    about = "Deterministic synthetic traffic-sign dataset generator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the per-class, per-stage count table for a configuration.
    Plan(PlanArgs),
    /// Generate the dataset: images, labels, and manifest.
    Run(RunArgs),
    /// Summarize a generated manifest: class counts, imbalance, provenance.
    Stats(StatsArgs),
    /// Re-check a generated dataset against its manifest.
    Validate(ValidateArgs),
    /// Extract obstacle cutouts from a COCO instances file.
    ExtractObstacles(ExtractArgs),
}

#[derive(Args)]
struct PlanArgs {
    /// Pipeline config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Also print deltas against the published reference figures for the
    /// original 220-sign / 20-background corpus.
    #[arg(long)]
    paper_check: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Pipeline config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the worker count (0 = one per CPU).
    #[arg(long)]
    jobs: Option<usize>,
    /// Render only the first N canonical records.
    #[arg(long)]
    limit: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Allow writing into an existing non-empty output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct StatsArgs {
    /// Path to a manifest.jsonl.
    #[arg(long)]
    manifest: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// Dataset directory containing manifest.jsonl.
    #[arg(long)]
    dataset: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    /// COCO instances JSON.
    #[arg(long)]
    coco: PathBuf,
    /// Directory holding the source images named in the annotations.
    #[arg(long)]
    images: PathBuf,
    /// Output directory for cutout PNGs and cutouts.csv.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated category names to extract.
    #[arg(long, default_value = "car,truck,bus,person", value_delimiter = ',')]
    categories: Vec<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems are validation errors (exit 1); help and
            // version displays are successes.
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Plan(args) => cmd_plan(args),
        Command::Run(args) => cmd_run(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Validate(args) => cmd_validate(args),
        Command::ExtractObstacles(args) => cmd_extract_obstacles(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let user_error = e
                .downcast_ref::<Error>()
                .map(|core| core.is_user_error())
                .unwrap_or(false);
            if user_error {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn load_config(path: &Path) -> anyhow::Result<PipelineConfig> {
    let config = PipelineConfig::from_file(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    Ok(config.rebase(base))
}

fn cmd_plan(args: PlanArgs) -> anyhow::Result<ExitCode> {
    let config = load_config(&args.config)?;
    let class_counts = sign_class_counts(&config.signs)?;
    let backgrounds = count_backgrounds(&config.placements)?;
    let table = plan_counts_from(&config, class_counts, backgrounds)?;
    print!("{table}");
    println!("total records: {}", table.total_records());
    if args.paper_check {
        println!();
        println!("reference check (published figures for 220 signs / 20 backgrounds):");
        let deltas = reference_deltas(&table);
        if deltas.is_empty() {
            println!("  all cells match the published table");
        } else {
            const STAGE_NAMES: [&str; 5] =
                ["initial", "variants", "composites", "environment", "occlusion"];
            for (class, stage, computed, published) in &deltas {
                println!(
                    "  {} {}: computed {} vs published {} (delta {:+})",
                    SIGN_CLASSES[*class].name(),
                    STAGE_NAMES[*stage],
                    computed,
                    published,
                    *computed as i64 - *published as i64
                );
            }
            println!("  the published environment/occlusion totals are short of the stage laws");
            println!("  by exactly the flagged cells' deltas");
        }
        let totals = table.totals();
        let computed = [
            totals.initial,
            totals.variants,
            totals.composites,
            totals.environment,
            totals.occlusion,
        ];
        println!(
            "  totals computed {:?} vs published {:?}",
            computed, REFERENCE_TOTALS
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn load_catalog(config: &PipelineConfig) -> anyhow::Result<AssetCatalog> {
    let signs = load_signs(&config.signs)?;
    let backgrounds = load_backgrounds(&config.placements, &config.backgrounds_dir)?;
    let obstacles = match (&config.obstacles, config.stages.occlusion) {
        (Some(path), _) => load_obstacles(path)?,
        (None, false) => Vec::new(),
        (None, true) => {
            return Err(Error::Config(
                "occlusion stage is enabled but no obstacles manifest is configured".into(),
            )
            .into())
        }
    };
    Ok(AssetCatalog {
        signs,
        backgrounds,
        obstacles,
    })
}

fn cmd_run(args: RunArgs) -> anyhow::Result<ExitCode> {
    let mut config = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(jobs) = args.jobs {
        config.jobs = jobs;
    }
    if let Some(limit) = args.limit {
        config.limit = Some(limit);
    }
    if let Some(out) = args.out {
        config.output_dir = out;
    }
    config.validate()?;

    if config.output_dir.exists() {
        let non_empty = std::fs::read_dir(&config.output_dir)
            .map(|mut entries| entries.next().is_some())
            .unwrap_or(false);
        if non_empty && !args.force {
            return Err(Error::Config(format!(
                "output directory {} is not empty; pass --force to overwrite",
                config.output_dir.display()
            ))
            .into());
        }
    }

    let catalog = load_catalog(&config)?;
    let plan = build_plan(&config, &catalog)?;
    println!(
        "plan: {} records (seed {}, {} signs, {} backgrounds)",
        plan.records.len(),
        plan.seed,
        catalog.signs.len(),
        catalog.backgrounds.len()
    );
    let summary = execute(&plan, &config, &catalog)?;
    println!(
        "wrote {} images + labels under {}",
        summary.emitted,
        config.output_dir.display()
    );
    println!("manifest: {}", summary.manifest_path.display());
    if !summary.rejected.is_empty() {
        println!(
            "rejected {} records with no visible sign pixels: {:?}",
            summary.rejected.len(),
            summary.rejected
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_stats(args: StatsArgs) -> anyhow::Result<ExitCode> {
    let stats = dataset_stats(&args.manifest)?;
    print!("{stats}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(args: ValidateArgs) -> anyhow::Result<ExitCode> {
    let violations = validate_dataset(&args.dataset)?;
    if violations.is_empty() {
        println!("0 violations");
        Ok(ExitCode::SUCCESS)
    } else {
        for v in &violations {
            println!("{v}");
        }
        println!("{} violations", violations.len());
        Ok(ExitCode::from(1))
    }
}

fn cmd_extract_obstacles(args: ExtractArgs) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(&args.coco).map_err(|e| Error::io(&args.coco, e))?;
    let instances = parse_coco_instances(&text, &args.categories)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;

    let mut manifest = String::from("file,category,source_image\n");
    let mut emitted = 0u64;
    let mut skipped = 0u64;
    for (i, instance) in instances.iter().enumerate() {
        let source = args.images.join(&instance.file_name);
        let image = load_image(&source)?;
        // Union of the instance's polygons.
        let mut mask = Mask {
            width: image.width(),
            height: image.height(),
            inside: vec![false; image.width() as usize * image.height() as usize],
        };
        for poly in &instance.polygons {
            let part = rasterize_polygon(poly, image.width(), image.height())?;
            for (m, p) in mask.inside.iter_mut().zip(part.inside.iter()) {
                *m |= *p;
            }
        }
        let cutout = match extract_cutout(&image, &mask) {
            Ok(c) => c,
            Err(Error::Extraction(_)) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let file = format!("{}_{i:04}.png", instance.category);
        save_png(&cutout, &args.out.join(&file))?;
        manifest.push_str(&format!(
            "{file},{},{}\n",
            instance.category, instance.file_name
        ));
        emitted += 1;
    }
    let manifest_path = args.out.join("cutouts.csv");
    std::fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))?;
    println!("extracted {emitted} cutouts to {}", args.out.display());
    if skipped > 0 {
        println!("skipped {skipped} annotations with empty masks");
    }
    Ok(ExitCode::SUCCESS)
}
