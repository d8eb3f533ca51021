//! Shared fixture builders for the integration and acceptance suites:
//! synthetic sign sprites, background scenes, and obstacle cutouts written
//! to a temp directory with their CSV manifests.

use std::path::Path;

use signforge_core::augment::SIGN_CLASSES;
use signforge_core::config::PipelineConfig;
use signforge_core::imageio::save_png;
use signforge_core::raster::RasterImage;

/// A filled disc sprite with a contrasting ring, transparent outside.
pub fn sign_sprite(size: u32, rgb: [u8; 3]) -> RasterImage {
    let mut img = RasterImage::new(size, size).unwrap();
    let c = (size as f64 - 1.0) / 2.0;
    let r_outer = size as f64 * 0.42;
    let r_inner = size as f64 * 0.28;
    for y in 0..size {
        for x in 0..size {
            let d = ((x as f64 - c).powi(2) + (y as f64 - c).powi(2)).sqrt();
            if d <= r_inner {
                img.set(x, y, [rgb[0], rgb[1], rgb[2], 255]);
            } else if d <= r_outer {
                img.set(x, y, [255 - rgb[0], 255 - rgb[1], 255 - rgb[2], 255]);
            }
        }
    }
    img
}

/// A textured opaque background scene.
pub fn background_scene(w: u32, h: u32, phase: u32) -> RasterImage {
    let mut img = RasterImage::new(w, h).unwrap();
    for y in 0..h {
        for x in 0..w {
            let r = (60 + (x * 140 / w) + phase * 17) % 256;
            let g = (90 + (y * 120 / h) + phase * 31) % 256;
            let b = (110 + ((x + y) * 70 / (w + h)) + phase * 7) % 256;
            img.set(x, y, [r as u8, g as u8, b as u8, 255]);
        }
    }
    img
}

/// An opaque ellipse cutout, transparent at the corners.
pub fn obstacle_cutout(w: u32, h: u32, rgb: [u8; 3]) -> RasterImage {
    let mut img = RasterImage::new(w, h).unwrap();
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    for y in 0..h {
        for x in 0..w {
            let nx = (x as f64 - cx) / (w as f64 / 2.0);
            let ny = (y as f64 - cy) / (h as f64 / 2.0);
            if nx * nx + ny * ny <= 1.0 {
                img.set(x, y, [rgb[0], rgb[1], rgb[2], 255]);
            }
        }
    }
    img
}

/// Write a complete input corpus under `dir` and return a config wired to
/// it. `signs_per_class[c]` sprites of class `c`; every background gets one
/// placement except the first, which gets two (exercising the seeded
/// placement choice).
pub fn build_fixture(
    dir: &Path,
    signs_per_class: [u64; 6],
    backgrounds: u32,
    obstacles: u32,
) -> PipelineConfig {
    let signs_dir = dir.join("signs");
    std::fs::create_dir_all(&signs_dir).unwrap();
    let mut signs_csv = String::from("file,class\n");
    for (c, n) in signs_per_class.iter().enumerate() {
        for i in 0..*n {
            let name = format!("{}_{i}.png", SIGN_CLASSES[c].name());
            let rgb = [
                (40 + c * 36) as u8,
                (200 - c * 25) as u8,
                (60 + (i as usize % 5) * 38) as u8,
            ];
            save_png(&sign_sprite(48, rgb), &signs_dir.join(&name)).unwrap();
            signs_csv.push_str(&format!("signs/{name},{}\n", SIGN_CLASSES[c].name()));
        }
    }
    std::fs::write(dir.join("signs.csv"), signs_csv).unwrap();

    let bg_dir = dir.join("backgrounds");
    std::fs::create_dir_all(&bg_dir).unwrap();
    let mut placements_csv = String::from("background,x,y,w,h\n");
    for b in 0..backgrounds {
        let name = format!("bg{b}.png");
        save_png(&background_scene(256, 192, b), &bg_dir.join(&name)).unwrap();
        placements_csv.push_str(&format!("{name},{},{},56,42\n", 30 + b * 9, 24 + b * 5));
        if b == 0 {
            placements_csv.push_str(&format!("{name},150,110,48,36\n"));
        }
    }
    std::fs::write(dir.join("placements.csv"), placements_csv).unwrap();

    let ob_dir = dir.join("obstacles");
    std::fs::create_dir_all(&ob_dir).unwrap();
    let mut cutouts_csv = String::from("file,category,source_image\n");
    let categories = ["car", "truck", "bus", "person"];
    for o in 0..obstacles {
        let name = format!("ob{o}.png");
        let rgb = [30 + (o as u8) * 40, 35, 45];
        save_png(&obstacle_cutout(28, 20, rgb), &ob_dir.join(&name)).unwrap();
        cutouts_csv.push_str(&format!(
            "{name},{},src{o}.jpg\n",
            categories[o as usize % 4]
        ));
    }
    std::fs::write(ob_dir.join("cutouts.csv"), cutouts_csv).unwrap();

    PipelineConfig {
        signs: dir.join("signs.csv"),
        backgrounds_dir: bg_dir,
        placements: dir.join("placements.csv"),
        obstacles: Some(ob_dir.join("cutouts.csv")),
        output_dir: dir.join("out"),
        ..PipelineConfig::default()
    }
}
