//! Regenerates the binary fixtures under `fixtures/` from the text captions
//! and procedural scenes. Run after an intentional format change:
//!
//! ```text
//! cargo run -p genzip --example write_fixtures
//! ```
//!
//! The pinned values in `fixtures/codec0/pinned.json` are re-measured too,
//! so review the diff before committing.

use std::fs;
use std::path::Path;

use genzip::container::{serialize, Container, VisualPayload, CODEC_BUILTIN};
use genzip::harness::corpus::synthetic_scene;
use genzip::metrics::psnr;
use genzip::textcodec::deflate_raw;
use genzip::visualcodec::{decode_builtin, downsample8, encode_builtin, CodecSettings};
use genzip::RasterImage;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");

    let text_dir = root.join("text");
    let mut names: Vec<_> = fs::read_dir(&text_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    names.sort();
    for txt in names {
        fs::write(txt.with_extension("bin"), deflate_raw(&fs::read(&txt)?))?;
    }

    let codec_dir = root.join("codec0");
    fs::create_dir_all(&codec_dir)?;
    let scenes: Vec<(&str, RasterImage)> = [("scene_a", 11u64), ("scene_b", 12)]
        .into_iter()
        .map(|(name, seed)| (name, downsample8(&synthetic_scene(seed, 1024, 1024))))
        .collect();
    let mut pinned = serde_json::Map::new();
    for (name, image) in &scenes {
        image.save_png(&codec_dir.join(format!("{name}.png")))?;
        let q50 = encode_builtin(image, &CodecSettings::new(50)?)?;
        let q35 = encode_builtin(image, &CodecSettings::new(35)?)?;
        fs::write(codec_dir.join(format!("{name}_q35.bin")), &q35)?;
        let value = psnr(image, &decode_builtin(&q50)?)?;
        pinned.insert(
            name.to_string(),
            serde_json::json!({ "q50_psnr_db": value, "q50_bytes": q50.len(), "q35_bytes": q35.len() }),
        );
    }
    let gray = RasterImage::filled(16, 16, [128, 128, 128]);
    fs::write(
        codec_dir.join("gray16_q50.bin"),
        encode_builtin(&gray, &CodecSettings::new(50)?)?,
    )?;
    fs::write(
        codec_dir.join("pinned.json"),
        serde_json::to_string_pretty(&pinned)? + "\n",
    )?;

    let container_dir = root.join("container");
    fs::create_dir_all(&container_dir)?;
    let text_only = Container::new(1024, 1024, Some(fs::read(text_dir.join("caption30.bin"))?), None)?;
    fs::write(container_dir.join("text_only.gzc"), serialize(&text_only)?)?;
    let multimodal = Container::new(
        1024,
        1024,
        Some(fs::read(text_dir.join("caption15.bin"))?),
        Some(VisualPayload {
            codec_id: CODEC_BUILTIN,
            data: fs::read(codec_dir.join("scene_a_q35.bin"))?,
        }),
    )?;
    fs::write(container_dir.join("multimodal.gzc"), serialize(&multimodal)?)?;
    println!("fixtures written under {}", root.display());
    Ok(())
}
