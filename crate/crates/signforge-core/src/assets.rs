//! Corpus loading: sign sprites, background scenes with placements, and
//! obstacle cutout pools, each described by a small CSV manifest with
//! image paths resolved relative to the CSV file.

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use crate::augment::{SignAsset, SignClass};
use crate::error::{Error, Result};
use crate::imageio::load_image;
use crate::occlusion::{ObstacleAsset, ObstacleCategory};
use crate::raster::RasterImage;
use crate::scene::{BackgroundAsset, Placement};

/// Everything a plan needs in memory, loaded once and shared read-only.
#[derive(Debug, Clone)]
pub struct AssetCatalog {
    pub signs: Vec<SignAsset>,
    pub backgrounds: Vec<BackgroundAsset>,
    pub obstacles: Vec<ObstacleAsset>,
}

impl AssetCatalog {
    /// Per-class sign counts, indexed by class index.
    pub fn class_counts(&self) -> [u64; 6] {
        let mut counts = [0u64; 6];
        for sign in &self.signs {
            counts[sign.class.index() as usize] += 1;
        }
        counts
    }
}

fn file_stem(path: &str) -> String {
    Path::new(path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string())
}

#[derive(Debug, Deserialize)]
struct SignRow {
    file: String,
    class: String,
}

/// Load the sign corpus from a `file,class` CSV. Image paths resolve
/// relative to the CSV's directory; ids are the file stems.
pub fn load_signs(csv_path: &Path) -> Result<Vec<SignAsset>> {
    let base = csv_path.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::Reader::from_path(csv_path)
        .map_err(|e| Error::Config(format!("cannot read sign manifest {}: {e}", csv_path.display())))?;
    let mut signs = Vec::new();
    let mut seen = HashMap::new();
    for (line, row) in reader.deserialize::<SignRow>().enumerate() {
        let row = row.map_err(|e| {
            Error::Config(format!("sign manifest {} line {}: {e}", csv_path.display(), line + 2))
        })?;
        let class: SignClass = row.class.parse()?;
        let id = file_stem(&row.file);
        if let Some(prev) = seen.insert(id.clone(), line) {
            return Err(Error::Config(format!(
                "sign manifest {}: duplicate sign id '{id}' (lines {} and {})",
                csv_path.display(),
                prev + 2,
                line + 2
            )));
        }
        let image = load_image(&base.join(&row.file))?;
        signs.push(SignAsset::new(id, class, image)?);
    }
    if signs.is_empty() {
        return Err(Error::Config(format!(
            "sign manifest {} lists no signs",
            csv_path.display()
        )));
    }
    Ok(signs)
}

#[derive(Debug, Deserialize)]
struct PlacementRow {
    background: String,
    x: u32,
    y: u32,
    w: u32,
    h: u32,
}

/// Load backgrounds from a `background,x,y,w,h` placements CSV plus an
/// image directory. Backgrounds are ordered by first appearance in the
/// CSV; a background may carry several placements. Scene images are forced
/// fully opaque on load.
pub fn load_backgrounds(placements_csv: &Path, backgrounds_dir: &Path) -> Result<Vec<BackgroundAsset>> {
    let mut reader = csv::Reader::from_path(placements_csv).map_err(|e| {
        Error::Config(format!(
            "cannot read placements {}: {e}",
            placements_csv.display()
        ))
    })?;
    let mut order: Vec<String> = Vec::new();
    let mut grouped: HashMap<String, Vec<Placement>> = HashMap::new();
    for (line, row) in reader.deserialize::<PlacementRow>().enumerate() {
        let row = row.map_err(|e| {
            Error::Config(format!(
                "placements {} line {}: {e}",
                placements_csv.display(),
                line + 2
            ))
        })?;
        if !grouped.contains_key(&row.background) {
            order.push(row.background.clone());
        }
        grouped.entry(row.background).or_default().push(Placement {
            x: row.x,
            y: row.y,
            w: row.w,
            h: row.h,
        });
    }
    if order.is_empty() {
        return Err(Error::Config(format!(
            "placements {} lists no backgrounds",
            placements_csv.display()
        )));
    }
    let mut backgrounds = Vec::with_capacity(order.len());
    for file in order {
        let mut image = load_image(&backgrounds_dir.join(&file))?;
        for px in image.pixels_mut().chunks_exact_mut(4) {
            px[3] = 255;
        }
        let placements = grouped.remove(&file).unwrap();
        backgrounds.push(BackgroundAsset::new(file_stem(&file), image, placements)?);
    }
    Ok(backgrounds)
}

#[derive(Debug, Deserialize)]
struct CutoutRow {
    file: String,
    category: String,
    #[serde(default)]
    #[allow(dead_code)]
    source_image: String,
}

/// Load the obstacle pool from a `file,category,source_image` cutouts CSV.
pub fn load_obstacles(cutouts_csv: &Path) -> Result<Vec<ObstacleAsset>> {
    let base = cutouts_csv.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::Reader::from_path(cutouts_csv).map_err(|e| {
        Error::Config(format!(
            "cannot read cutouts manifest {}: {e}",
            cutouts_csv.display()
        ))
    })?;
    let mut obstacles = Vec::new();
    for (line, row) in reader.deserialize::<CutoutRow>().enumerate() {
        let row = row.map_err(|e| {
            Error::Config(format!(
                "cutouts manifest {} line {}: {e}",
                cutouts_csv.display(),
                line + 2
            ))
        })?;
        let category: ObstacleCategory = row.category.parse()?;
        let cutout = load_image(&base.join(&row.file))?;
        obstacles.push(ObstacleAsset::new(file_stem(&row.file), category, cutout)?);
    }
    Ok(obstacles)
}

/// Turn a raw loaded image into a checked background (used by tests).
pub fn background_from_image(id: String, image: RasterImage, placements: Vec<Placement>) -> Result<BackgroundAsset> {
    BackgroundAsset::new(id, image, placements)
}

/// Count signs per class from the manifest alone, without decoding images.
/// Fast path for `plan`, which only needs the count algebra.
pub fn sign_class_counts(csv_path: &Path) -> Result<[u64; 6]> {
    let mut reader = csv::Reader::from_path(csv_path)
        .map_err(|e| Error::Config(format!("cannot read sign manifest {}: {e}", csv_path.display())))?;
    let mut counts = [0u64; 6];
    let mut seen = HashMap::new();
    for (line, row) in reader.deserialize::<SignRow>().enumerate() {
        let row = row.map_err(|e| {
            Error::Config(format!("sign manifest {} line {}: {e}", csv_path.display(), line + 2))
        })?;
        let class: SignClass = row.class.parse()?;
        let id = file_stem(&row.file);
        if seen.insert(id.clone(), line).is_some() {
            return Err(Error::Config(format!(
                "sign manifest {}: duplicate sign id '{id}'",
                csv_path.display()
            )));
        }
        counts[class.index() as usize] += 1;
    }
    if counts.iter().sum::<u64>() == 0 {
        return Err(Error::Config(format!(
            "sign manifest {} lists no signs",
            csv_path.display()
        )));
    }
    Ok(counts)
}

/// Count distinct backgrounds in a placements CSV without decoding images.
pub fn count_backgrounds(placements_csv: &Path) -> Result<u64> {
    let mut reader = csv::Reader::from_path(placements_csv).map_err(|e| {
        Error::Config(format!(
            "cannot read placements {}: {e}",
            placements_csv.display()
        ))
    })?;
    let mut names = std::collections::HashSet::new();
    for (line, row) in reader.deserialize::<PlacementRow>().enumerate() {
        let row = row.map_err(|e| {
            Error::Config(format!(
                "placements {} line {}: {e}",
                placements_csv.display(),
                line + 2
            ))
        })?;
        names.insert(row.background);
    }
    if names.is_empty() {
        return Err(Error::Config(format!(
            "placements {} lists no backgrounds",
            placements_csv.display()
        )));
    }
    Ok(names.len() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imageio::save_png;

    fn write_sprite(dir: &Path, name: &str, rgba: [u8; 4]) {
        let img = RasterImage::filled(8, 8, rgba).unwrap();
        save_png(&img, &dir.join(name)).unwrap();
    }

    #[test]
    fn sign_corpus_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        write_sprite(dir.path(), "stop.png", [200, 0, 0, 255]);
        write_sprite(dir.path(), "yield.png", [220, 200, 0, 255]);
        std::fs::write(
            dir.path().join("signs.csv"),
            "file,class\nstop.png,Prohibitory\nyield.png,WARNING\n",
        )
        .unwrap();
        let signs = load_signs(&dir.path().join("signs.csv")).unwrap();
        assert_eq!(signs.len(), 2);
        assert_eq!(signs[0].id, "stop");
        assert_eq!(signs[0].class, SignClass::Prohibitory);
        assert_eq!(signs[1].class, SignClass::Warning);
    }

    #[test]
    fn sign_corpus_rejects_duplicates_and_bad_class() {
        let dir = tempfile::tempdir().unwrap();
        write_sprite(dir.path(), "a.png", [1, 2, 3, 255]);
        std::fs::write(
            dir.path().join("dup.csv"),
            "file,class\na.png,service\na.png,service\n",
        )
        .unwrap();
        assert!(load_signs(&dir.path().join("dup.csv")).is_err());
        std::fs::write(dir.path().join("bad.csv"), "file,class\na.png,mystery\n").unwrap();
        assert!(load_signs(&dir.path().join("bad.csv")).is_err());
    }

    #[test]
    fn backgrounds_grouped_in_first_appearance_order() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["b1.png", "b2.png"] {
            let img = RasterImage::filled(64, 48, [90, 90, 90, 255]).unwrap();
            save_png(&img, &dir.path().join(name)).unwrap();
        }
        std::fs::write(
            dir.path().join("placements.csv"),
            "background,x,y,w,h\nb2.png,4,4,16,12\nb1.png,8,8,20,16\nb2.png,30,20,10,10\n",
        )
        .unwrap();
        let bgs = load_backgrounds(&dir.path().join("placements.csv"), dir.path()).unwrap();
        assert_eq!(bgs.len(), 2);
        assert_eq!(bgs[0].id, "b2");
        assert_eq!(bgs[0].placements.len(), 2);
        assert_eq!(bgs[1].id, "b1");
        assert_eq!(bgs[1].placements.len(), 1);
    }

    #[test]
    fn obstacle_pool_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        write_sprite(dir.path(), "car_0.png", [10, 10, 10, 255]);
        std::fs::write(
            dir.path().join("cutouts.csv"),
            "file,category,source_image\ncar_0.png,car,street.jpg\n",
        )
        .unwrap();
        let pool = load_obstacles(&dir.path().join("cutouts.csv")).unwrap();
        assert_eq!(pool.len(), 1);
        assert_eq!(pool[0].category, ObstacleCategory::Car);
    }
}
