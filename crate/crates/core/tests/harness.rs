use std::path::Path;
use std::sync::Arc;

use genzip::backends::{BackendError, Backends, GenerationBackend, GenerationRequest, Generated};
use genzip::container::{serialize, HEADER_LEN};
use genzip::harness::corpus::synthetic_scene;
use genzip::harness::{
    container_path, decode_file, encode, list_dataset, prepare_dataset, rate_of_file, read_results,
    run_matrix_with, HarnessError, Mode, RunConfig, DEFAULT_QUALITY, MANIFEST_FILE, RESULTS_FILE,
};
use genzip::visualcodec::CodecError;
use genzip::RasterImage;
use sha2::{Digest, Sha256};

fn write_sources(dir: &Path) {
    synthetic_scene(1, 2048, 1536).save_png(&dir.join("wide.png")).unwrap();
    for i in 0..9u32 {
        let (w, h) = (1024 + 128 * (i % 3), 1024 + 64 * (i / 3));
        synthetic_scene(u64::from(i) + 2, w, h)
            .save_png(&dir.join(format!("img{i}.png")))
            .unwrap();
    }
}

#[test]
fn prepare_dataset_end_to_end() {
    let src = tempfile::tempdir().unwrap();
    let dst = tempfile::tempdir().unwrap();
    write_sources(src.path());

    let manifest = prepare_dataset(src.path(), dst.path()).unwrap();
    assert_eq!(manifest.entries.len(), 10);
    assert_eq!(manifest.size, 1024);
    let ids: Vec<_> = manifest.entries.iter().map(|e| e.id.as_str()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);

    for entry in &manifest.entries {
        let out = RasterImage::open(&dst.path().join(&entry.file)).unwrap();
        assert_eq!(out.dims(), (1024, 1024));
        let bytes = std::fs::read(src.path().join(&entry.source)).unwrap();
        assert_eq!(entry.source_sha256, hex::encode(Sha256::digest(&bytes)));
    }
    let wide = manifest.entries.iter().find(|e| e.id == "wide").unwrap();
    assert_eq!((wide.source_width, wide.source_height), (2048, 1536));

    let listed = list_dataset(dst.path()).unwrap();
    assert_eq!(listed.len(), 10);
    assert!(dst.path().join(MANIFEST_FILE).is_file());

    // Rerunning produces identical bytes.
    let again = tempfile::tempdir().unwrap();
    prepare_dataset(src.path(), again.path()).unwrap();
    for entry in &manifest.entries {
        assert_eq!(
            std::fs::read(dst.path().join(&entry.file)).unwrap(),
            std::fs::read(again.path().join(&entry.file)).unwrap()
        );
    }
}

#[test]
fn small_and_duplicate_sources_are_rejected() {
    let src = tempfile::tempdir().unwrap();
    RasterImage::filled(63, 200, [1; 3]).save_png(&src.path().join("tiny.png")).unwrap();
    let err = prepare_dataset(src.path(), &src.path().join("out")).unwrap_err();
    assert!(matches!(err.root(), HarnessError::Dataset(_)), "{err}");

    let src = tempfile::tempdir().unwrap();
    RasterImage::filled(80, 80, [1; 3]).save_png(&src.path().join("a.png")).unwrap();
    std::fs::copy(src.path().join("a.png"), src.path().join("a.jpg")).unwrap();
    assert!(prepare_dataset(src.path(), &src.path().join("out")).is_err());
}

#[test]
fn corrupted_visual_payload_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let image = synthetic_scene(5, 256, 256);
    let backends = Backends::mock();
    let mode = Mode::preset("multi15", DEFAULT_QUALITY).unwrap();
    let encoded = encode(&image, &mode, &backends).unwrap();
    let mut bytes = serialize(&encoded.container).unwrap();
    let text_len = encoded.container.text_payload.as_ref().unwrap().len();
    // Skip the header, the text length octet and the text, the codec id
    // and the two-octet visual length, then zero the codec quality octet.
    assert!(text_len < 128);
    let quality_at = HEADER_LEN + 1 + text_len + 1 + 1;
    let visual_len = encoded.container.visual_payload.as_ref().unwrap().data.len();
    let quality_at = if visual_len >= 128 { quality_at + 1 } else { quality_at };
    assert_eq!(bytes[quality_at], DEFAULT_QUALITY);
    bytes[quality_at] = 0;
    let path = dir.path().join("broken.gzc");
    std::fs::write(&path, &bytes).unwrap();

    let err = decode_file(&path, &backends, &[1], 0).unwrap_err();
    assert!(err.to_string().contains("broken.gzc"), "{err}");
    assert!(matches!(err.root(), HarnessError::Codec(CodecError::Malformed(_))), "{err:?}");

    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    let err = decode_file(&path, &backends, &[1], 0).unwrap_err();
    assert!(err.to_string().contains("broken.gzc"));
    assert!(matches!(err.root(), HarnessError::Container(_)));
    assert!(rate_of_file(&path).is_err());
}

#[test]
fn decode_returns_each_repeat_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let image = synthetic_scene(6, 128, 96);
    let backends = Backends::mock();
    let mode = Mode::preset("multi15", DEFAULT_QUALITY).unwrap();
    let encoded = encode(&image, &mode, &backends).unwrap();
    let path = dir.path().join("x.gzc");
    std::fs::write(&path, serialize(&encoded.container).unwrap()).unwrap();

    let decoded = decode_file(&path, &backends, &[1, 2, 3], 100).unwrap();
    assert!(decoded.caption.is_some());
    assert_eq!(decoded.condition.as_ref().unwrap().dims(), (16, 12));
    let order: Vec<u32> = decoded.reconstructions.iter().map(|(r, _)| *r).collect();
    assert_eq!(order, [1, 2, 3]);
    for img in decoded.into_images().unwrap() {
        assert_eq!(img.dims(), (128, 96));
    }
    assert_eq!(rate_of_file(&path).unwrap(), encoded.rate);
}

/// Fails every request whose seed is even.
struct Flaky;

impl GenerationBackend for Flaky {
    fn generate(&self, request: &GenerationRequest) -> Result<Generated, BackendError> {
        if request.seed.unwrap_or(0) % 2 == 0 {
            return Err(BackendError::EmptyCaption);
        }
        genzip::backends::MockBackend.generate(request)
    }
}

#[test]
fn failed_generations_are_reported_and_skipped() {
    let data = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    synthetic_scene(8, 96, 80).save_png(&data.path().join("only.png")).unwrap();
    let mut config = RunConfig::new(data.path(), out.path());
    config.modes = vec![Mode::parse("name=custom;text=20;visual=builtin:50", DEFAULT_QUALITY).unwrap()];
    config.repeats = 3;
    config.seed_base = 0;
    let backends = Backends {
        generation: Arc::new(Flaky),
        ..Backends::mock()
    };

    let outcome = run_matrix_with(&config, &backends).unwrap();
    assert!(!outcome.is_complete());
    // Seeds 1 and 3 succeed; seed 2 fails.
    assert_eq!(outcome.records_written, 2);
    assert_eq!(outcome.failures.len(), 1);
    assert_eq!(outcome.failures[0].repeat_index, Some(2));
    let rows = read_results(&out.path().join(RESULTS_FILE)).unwrap();
    let repeats: Vec<u32> = rows.iter().map(|r| r.repeat_index).collect();
    assert_eq!(repeats, [1, 3]);
    assert!(container_path(out.path(), "only", "custom").is_file());

    // A rerun with a healthy backend fills in only the missing repeat.
    let outcome = run_matrix_with(&config, &Backends::mock()).unwrap();
    assert!(outcome.is_complete());
    assert_eq!((outcome.records_written, outcome.records_resumed), (1, 2));
}
