use std::path::PathBuf;
use std::sync::Arc;

use genzip::backends::MockBackend;
use genzip::metrics::psnr;
use genzip::par::Execution;
use genzip::visualcodec::{
    cubic_kernel, dct, decode_builtin, decode_builtin_with, downsample8, downsample8_with,
    encode_builtin, encode_builtin_with, resize_with, upsample_to, CodecError, CodecRegistry,
    CodecSettings, RateTarget,
};
use genzip::RasterImage;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/codec0")
}

fn scene(name: &str) -> RasterImage {
    RasterImage::open(&fixture_dir().join(format!("{name}.png"))).unwrap()
}

fn q(quality: u8) -> CodecSettings {
    CodecSettings::new(quality).unwrap()
}

fn noise(seed: u64, w: u32, h: u32) -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..w * h * 3).map(|_| rng.gen()).collect();
    RasterImage::new(w, h, samples).unwrap()
}

/// Textbook double-sum DCT-II with orthonormal scaling.
fn naive_dct(block: &dct::Block) -> dct::Block {
    let alpha = |k: usize| if k == 0 { (0.125f64).sqrt() } else { 0.5 };
    std::array::from_fn(|i| {
        let (u, v) = (i % 8, i / 8);
        let mut sum = 0.0;
        for y in 0..8 {
            for x in 0..8 {
                sum += block[y * 8 + x]
                    * (((2 * x + 1) * u) as f64 * std::f64::consts::PI / 16.0).cos()
                    * (((2 * y + 1) * v) as f64 * std::f64::consts::PI / 16.0).cos();
            }
        }
        alpha(u) * alpha(v) * sum
    })
}

#[test]
fn dct_preserves_energy_on_random_blocks() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let block: dct::Block = std::array::from_fn(|_| rng.gen_range(-128.0..128.0));
        let coeffs = dct::forward(&block);
        let e_in: f64 = block.iter().map(|v| v * v).sum();
        let e_out: f64 = coeffs.iter().map(|v| v * v).sum();
        assert!(((e_in - e_out) / e_in).abs() < 1e-6);
        let back = dct::inverse(&coeffs);
        assert!(block.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-9));
    }
}

#[test]
fn dct_matches_textbook_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..3 {
        let block: dct::Block = std::array::from_fn(|_| rng.gen_range(-128.0..128.0));
        let fast = dct::forward(&block);
        let slow = naive_dct(&block);
        assert!(fast.iter().zip(&slow).all(|(a, b)| (a - b).abs() < 1e-9));
    }
}

#[test]
fn rate_is_weakly_monotone_in_quality() {
    for name in ["scene_a", "scene_b"] {
        let img = scene(name);
        let sizes: Vec<usize> = (1..=9)
            .map(|k| encode_builtin(&img, &q(10 * k)).unwrap().len())
            .collect();
        assert!(sizes.windows(2).all(|w| w[0] <= w[1]), "{name}: {sizes:?}");
        assert!(sizes[1] < sizes[7], "{name}: q20 should cost less than q80");
    }
}

#[test]
fn uniform_gray_roundtrips_exactly() {
    let golden = std::fs::read(fixture_dir().join("gray16_q50.bin")).unwrap();
    let gray16 = RasterImage::filled(16, 16, [128; 3]);
    assert_eq!(encode_builtin(&gray16, &q(50)).unwrap(), golden);
    for (w, h) in [(16, 16), (13, 7), (128, 128)] {
        let gray = RasterImage::filled(w, h, [128; 3]);
        let sizes: Vec<usize> = [1, 35, 100]
            .iter()
            .map(|&quality| {
                let bytes = encode_builtin(&gray, &q(quality)).unwrap();
                assert_eq!(decode_builtin(&bytes).unwrap(), gray);
                bytes.len()
            })
            .collect();
        assert!(sizes.iter().all(|&s| s == sizes[0]), "{sizes:?}");
    }
}

#[test]
fn scene_fixtures_match_pinned_measurements() {
    let pinned: serde_json::Value =
        serde_json::from_slice(&std::fs::read(fixture_dir().join("pinned.json")).unwrap()).unwrap();
    for name in ["scene_a", "scene_b"] {
        let img = scene(name);
        assert_eq!(img.dims(), (128, 128));
        let q35 = encode_builtin(&img, &q(35)).unwrap();
        assert_eq!(q35, std::fs::read(fixture_dir().join(format!("{name}_q35.bin"))).unwrap());
        let q50 = encode_builtin(&img, &q(50)).unwrap();
        let value = psnr(&img, &decode_builtin(&q50).unwrap()).unwrap();
        let expected = pinned[name]["q50_psnr_db"].as_f64().unwrap();
        assert!(value >= 28.0, "{name}: {value}");
        assert!((value - expected).abs() < 1e-9, "{name}: {value} vs pinned {expected}");
        assert_eq!(q50.len() as u64, pinned[name]["q50_bytes"].as_u64().unwrap());
    }
}

#[test]
fn quality_100_is_nearly_idempotent() {
    for img in [scene("scene_a"), scene("scene_b"), noise(1, 40, 24)] {
        let first = decode_builtin(&encode_builtin(&img, &q(100)).unwrap()).unwrap();
        let second = decode_builtin(&encode_builtin(&first, &q(100)).unwrap()).unwrap();
        let p1 = psnr(&img, &first).unwrap();
        let p2 = psnr(&first, &second).unwrap();
        assert!(p2 >= p1 - 0.5, "first {p1} second {p2}");
    }
}

#[test]
fn sequential_and_parallel_paths_agree() {
    let img = scene("scene_b");
    let seq = encode_builtin_with(&img, &q(35), Execution::Sequential).unwrap();
    let par = encode_builtin_with(&img, &q(35), Execution::Parallel).unwrap();
    assert_eq!(seq, par);
    assert_eq!(
        decode_builtin_with(&seq, Execution::Sequential).unwrap(),
        decode_builtin_with(&seq, Execution::Parallel).unwrap()
    );
    let big = noise(5, 203, 97);
    assert_eq!(
        downsample8_with(&big, Execution::Sequential),
        downsample8_with(&big, Execution::Parallel)
    );
    assert_eq!(
        resize_with(&big, 61, 150, Execution::Sequential),
        resize_with(&big, 61, 150, Execution::Parallel)
    );
}

#[test]
fn malformed_streams() {
    let good = encode_builtin(&noise(2, 24, 16), &q(50)).unwrap();
    let malformed = |bytes: &[u8]| matches!(decode_builtin(bytes), Err(CodecError::Malformed(_)));
    let inconsistent = |bytes: &[u8]| matches!(decode_builtin(bytes), Err(CodecError::Inconsistent(_)));

    assert!(malformed(&good[..4]));
    let mut zero_q = good.clone();
    zero_q[0] = 0;
    assert!(malformed(&zero_q));
    assert!(malformed(&good[..good.len() - 1]));
    let mut garbage = good[..5].to_vec();
    garbage.extend_from_slice(&[0xff; 12]);
    assert!(malformed(&garbage));

    // Header claims a larger image than the symbols cover.
    let mut taller = good.clone();
    taller[3..5].copy_from_slice(&64u16.to_be_bytes());
    assert!(inconsistent(&taller));
    // And a smaller one leaves symbols over.
    let mut shorter = good.clone();
    shorter[3..5].copy_from_slice(&8u16.to_be_bytes());
    assert!(inconsistent(&shorter));
}

#[test]
fn registry_roundtrips_external_payloads() {
    let registry = CodecRegistry::new().with_external(Arc::new(MockBackend));
    let img = noise(9, 16, 16);
    let payload = registry.encode(1, &img, &RateTarget::Bpp(0.01)).unwrap();
    assert_eq!(payload, img.to_png());
    assert_eq!(registry.decode(1, &payload).unwrap(), img);
    assert!(matches!(
        CodecRegistry::new().decode(1, &payload),
        Err(CodecError::UnknownCodec(1))
    ));
    assert!(matches!(
        registry.encode(0, &img, &RateTarget::Bpp(0.01)),
        Err(CodecError::UnsupportedTarget { .. })
    ));
}

#[test]
fn downsample_oracles() {
    let big = RasterImage::filled(1024, 1024, [10, 200, 77]);
    let small = downsample8(&big);
    assert_eq!(small.dims(), (128, 128));
    assert!(small.samples().chunks(3).all(|p| p == [10, 200, 77]));

    // Block of 0..63: mean 31.5 rounds half away from zero to 32.
    let ramp = RasterImage::from_fn(8, 8, |x, y| [(y * 8 + x) as u8, 0, 255]);
    assert_eq!(downsample8(&ramp).samples(), &[32, 0, 255]);

    // Ragged edges replicate the last column and row.
    let img = noise(4, 13, 9);
    let out = downsample8(&img);
    assert_eq!(out.dims(), (2, 2));
    for (ox, oy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
        for c in 0..3 {
            let mut sum = 0u32;
            for dy in 0..8 {
                for dx in 0..8 {
                    let x = (ox * 8 + dx).min(12);
                    let y = (oy * 8 + dy).min(8);
                    sum += u32::from(img.pixel(x, y)[c]);
                }
            }
            assert_eq!(u32::from(out.pixel(ox, oy)[c]), (sum + 32) / 64);
        }
    }
}

/// Direct 2-D cubic convolution over the full neighbourhood, no separable
/// passes and no intermediate buffers.
fn resize_oracle(img: &RasterImage, w: u32, h: u32) -> RasterImage {
    let (sw, sh) = (f64::from(img.width()), f64::from(img.height()));
    let (fx, fy) = (sw / f64::from(w), sh / f64::from(h));
    let (stretch_x, stretch_y) = (fx.max(1.0), fy.max(1.0));
    RasterImage::from_fn(w, h, |x, y| {
        let cx = (f64::from(x) + 0.5) * fx - 0.5;
        let cy = (f64::from(y) + 0.5) * fy - 0.5;
        let mut acc = [0.0f64; 3];
        let mut total = 0.0;
        let xr = (cx - 2.0 * stretch_x).floor() as i64..=(cx + 2.0 * stretch_x).ceil() as i64;
        let yr = (cy - 2.0 * stretch_y).floor() as i64..=(cy + 2.0 * stretch_y).ceil() as i64;
        for j in yr {
            for i in xr.clone() {
                let wgt = cubic_kernel((i as f64 - cx) / stretch_x)
                    * cubic_kernel((j as f64 - cy) / stretch_y);
                let p = img.pixel_clamped(i, j);
                for c in 0..3 {
                    acc[c] += wgt * f64::from(p[c]);
                }
                total += wgt;
            }
        }
        acc.map(|v| (v / total).round().clamp(0.0, 255.0) as u8)
    })
}

fn assert_close(a: &RasterImage, b: &RasterImage, tol: u8) {
    assert_eq!(a.dims(), b.dims());
    for (i, (x, y)) in a.samples().iter().zip(b.samples()).enumerate() {
        assert!(x.abs_diff(*y) <= tol, "sample {i}: {x} vs {y}");
    }
}

#[test]
fn bicubic_checkerboard_matches_direct_convolution() {
    let board = RasterImage::from_fn(2, 2, |x, y| if (x + y) % 2 == 0 { [0; 3] } else { [255; 3] });
    for (w, h) in [(4, 4), (8, 8), (16, 16), (5, 3)] {
        assert_close(&upsample_to(&board, w, h), &resize_oracle(&board, w, h), 1);
    }
}

#[test]
fn constant_images_survive_resizing() {
    let flat = RasterImage::filled(17, 11, [3, 128, 250]);
    for (w, h) in [(128, 96), (5, 4), (17, 11), (40, 3)] {
        assert_eq!(upsample_to(&flat, w, h), RasterImage::filled(w, h, [3, 128, 250]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn codec_preserves_dimensions(w in 8u32..=200, h in 8u32..=200, seed in any::<u64>(), quality in 1u8..=100) {
        let img = noise(seed, w, h);
        let bytes = encode_builtin(&img, &q(quality)).unwrap();
        prop_assert_eq!(decode_builtin(&bytes).unwrap().dims(), (w, h));
    }

    #[test]
    fn resize_matches_oracle(sw in 1u32..24, sh in 1u32..24, w in 1u32..40, h in 1u32..40, seed in any::<u64>()) {
        let img = noise(seed, sw, sh);
        let out = resize_with(&img, w, h, Execution::Sequential);
        prop_assert_eq!(out.dims(), (w, h));
        let oracle = resize_oracle(&img, w, h);
        for (x, y) in out.samples().iter().zip(oracle.samples()) {
            prop_assert!(x.abs_diff(*y) <= 1);
        }
    }
}
