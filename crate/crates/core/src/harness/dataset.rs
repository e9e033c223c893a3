use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{write_atomic, HarnessError};
use crate::par::Execution;
use crate::visualcodec::{resize_with, RasterImage};

/// Side length of every prepared image.
pub const PREPARED_SIZE: u32 = 1024;
/// Sources with a side below this are rejected.
pub const MIN_SOURCE_SIDE: u32 = 64;
pub const MANIFEST_FILE: &str = "manifest.json";
const MANIFEST_SCHEMA: u32 = 1;
const SOURCE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    /// Source file name, relative to the source directory.
    pub source: String,
    pub source_sha256: String,
    pub source_width: u32,
    pub source_height: u32,
    /// Prepared PNG, relative to the manifest.
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub size: u32,
    pub entries: Vec<ManifestEntry>,
}

/// Dimensions after scaling the shorter side to `size`, rounding the longer
/// side half away from zero.
pub fn scaled_dims(width: u32, height: u32, size: u32) -> (u32, u32) {
    let scale = |long: u32, short: u32| -> u32 {
        let (long, short, size) = (u64::from(long), u64::from(short), u64::from(size));
        ((2 * long * size + short) / (2 * short)) as u32
    };
    if width <= height {
        (size, scale(height, width))
    } else {
        (scale(width, height), size)
    }
}

/// Scale-then-centre-crop to `size`x`size`; an odd excess leaves the extra
/// pixel on the right or bottom.
pub fn prepare_image(image: &RasterImage, size: u32) -> RasterImage {
    let (w, h) = scaled_dims(image.width(), image.height(), size);
    let scaled = resize_with(image, w, h, Execution::default());
    let (x0, y0) = ((w - size) / 2, (h - size) / 2);
    if (x0, y0, w, h) == (0, 0, size, size) {
        return scaled;
    }
    RasterImage::from_fn(size, size, |x, y| scaled.pixel(x0 + x, y0 + y))
}

fn source_files(src: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(src).map_err(|e| HarnessError::io(src, e))? {
        let path = entry.map_err(|e| HarnessError::io(src, e))?.path();
        let known = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| SOURCE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if path.is_file() && known {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn file_id(path: &Path) -> Result<String, HarnessError> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .ok_or_else(|| HarnessError::Dataset(format!("{}: file name is not valid UTF-8", path.display())))
}

pub fn prepare_dataset(src: &Path, dst: &Path) -> Result<Manifest, HarnessError> {
    prepare_dataset_with_size(src, dst, PREPARED_SIZE)
}

/// Prepares every PNG/JPEG in `src` (sorted by name) into `dst` and writes
/// `dst/manifest.json`.
pub fn prepare_dataset_with_size(src: &Path, dst: &Path, size: u32) -> Result<Manifest, HarnessError> {
    if size == 0 {
        return Err(HarnessError::Dataset("prepared size must be positive".into()));
    }
    let files = source_files(src)?;
    if files.is_empty() {
        return Err(HarnessError::Dataset(format!("{}: no PNG or JPEG images", src.display())));
    }
    let mut ids = BTreeSet::new();
    for f in &files {
        let id = file_id(f)?;
        if !ids.insert(id.clone()) {
            return Err(HarnessError::Dataset(format!("duplicate image id `{id}` in {}", src.display())));
        }
    }
    std::fs::create_dir_all(dst).map_err(|e| HarnessError::io(dst, e))?;

    let entries = Execution::default()
        .map_slice(&files, |path| -> Result<ManifestEntry, HarnessError> {
            let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
            let image = image::load_from_memory(&bytes)
                .map_err(|e| HarnessError::Dataset(format!("{}: {e}", path.display())))?
                .into_rgb8();
            let (sw, sh) = image.dimensions();
            if sw.min(sh) < MIN_SOURCE_SIDE {
                return Err(HarnessError::Dataset(format!(
                    "{}: {sw}x{sh} is below the {MIN_SOURCE_SIDE} px minimum side",
                    path.display()
                )));
            }
            let raster = RasterImage::new(sw, sh, image.into_raw())?;
            let id = file_id(path)?;
            let file = format!("{id}.png");
            write_atomic(&dst.join(&file), &prepare_image(&raster, size).to_png())?;
            Ok(ManifestEntry {
                source: path.file_name().unwrap_or_default().to_string_lossy().into_owned(),
                source_sha256: hex::encode(Sha256::digest(&bytes)),
                source_width: sw,
                source_height: sh,
                file,
                id,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let manifest = Manifest {
        schema: MANIFEST_SCHEMA,
        size,
        entries,
    };
    let mut json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    json.push(b'\n');
    write_atomic(&dst.join(MANIFEST_FILE), &json)?;
    Ok(manifest)
}

/// `(id, path)` of every prepared image: the manifest entries when a
/// manifest exists, otherwise every PNG in the directory, sorted by id.
pub fn list_dataset(dir: &Path) -> Result<Vec<(String, PathBuf)>, HarnessError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut images = if manifest_path.is_file() {
        let bytes = std::fs::read(&manifest_path).map_err(|e| HarnessError::io(&manifest_path, e))?;
        let manifest: Manifest = serde_json::from_slice(&bytes)
            .map_err(|e| HarnessError::Dataset(format!("{}: {e}", manifest_path.display())))?;
        manifest
            .entries
            .into_iter()
            .map(|e| (e.id, dir.join(e.file)))
            .collect::<Vec<_>>()
    } else {
        source_files(dir)?
            .into_iter()
            .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
            .map(|p| Ok((file_id(&p)?, p)))
            .collect::<Result<Vec<_>, HarnessError>>()?
    };
    images.sort();
    if let Some(w) = images.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(HarnessError::Dataset(format!("duplicate image id `{}`", w[0].0)));
    }
    Ok(images)
}
