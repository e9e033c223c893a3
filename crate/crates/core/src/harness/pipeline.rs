use std::path::Path;

use super::{HarnessError, Mode, VisualMode};
use crate::backends::{Backends, Generated, GenerationRequest};
use crate::container::{self, Container, VisualPayload, CODEC_BUILTIN, CODEC_EXTERNAL};
use crate::metrics::{bpp, RateReport};
use crate::par::Execution;
use crate::prompting::{
    build_prompt, spatial_coverage_score, validate_caption, DimensionSet, PromptSpec,
    ValidationReport,
};
use crate::textcodec::{compress_text, decompress_text, Caption};
use crate::visualcodec::{downsample8, CodecSettings, RasterImage, RateTarget};

/// Result of encoding one image under one mode.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub container: Container,
    pub rate: RateReport,
    /// Present when the text branch ran.
    pub caption: Option<ValidationReport>,
}

impl Encoded {
    pub fn spatial_coverage(&self) -> Option<f64> {
        self.caption
            .as_ref()
            .map(|r| spatial_coverage_score(&r.caption))
    }
}

/// Encoder path: caption then compress; downsample then code; pack.
pub fn encode(image: &RasterImage, mode: &Mode, backends: &Backends) -> Result<Encoded, HarnessError> {
    mode.validate()?;
    let (width, height) = match (u16::try_from(image.width()), u16::try_from(image.height())) {
        (Ok(w), Ok(h)) => (w, h),
        _ => {
            return Err(HarnessError::Dataset(format!(
                "{}x{} exceeds the 65535 pixel container limit",
                image.width(),
                image.height()
            )))
        }
    };

    let caption = if mode.has_text() {
        let spec = PromptSpec::new(mode.text_budget, mode.prompt_variant)
            .map_err(|e| HarnessError::InvalidMode(e.to_string()))?;
        let instruction = build_prompt(&spec, &DimensionSet::default());
        let raw = backends
            .caption
            .caption(image, &instruction, mode.text_budget)
            .map_err(|e| HarnessError::from(e).context("caption backend"))?;
        let report = validate_caption(&raw, &spec);
        if !report.within_budget {
            log::warn!(
                "{mode}: caption had {} words, truncated to {}",
                report.word_count,
                mode.text_budget
            );
        }
        Some(report)
    } else {
        None
    };
    let text_payload = caption.as_ref().map(|r| compress_text(&r.caption));

    let visual_payload = match mode.visual {
        VisualMode::None => None,
        VisualMode::Builtin { quality } => {
            let settings = CodecSettings::new(quality)?;
            let data = backends
                .codecs
                .encode(CODEC_BUILTIN, &downsample8(image), &RateTarget::Quality(settings))?;
            Some(VisualPayload {
                codec_id: CODEC_BUILTIN,
                data,
            })
        }
        VisualMode::External { target_bpp } => {
            let data = backends
                .codecs
                .encode(CODEC_EXTERNAL, &downsample8(image), &RateTarget::Bpp(target_bpp))?;
            Some(VisualPayload {
                codec_id: CODEC_EXTERNAL,
                data,
            })
        }
    };

    let container = Container::new(width, height, text_payload, visual_payload)?;
    let rate = bpp(&container);
    Ok(Encoded {
        container,
        rate,
        caption,
    })
}

/// Unpacked conditions and the generated reconstructions.
#[derive(Debug)]
pub struct Decoded {
    pub caption: Option<Caption>,
    pub condition: Option<RasterImage>,
    /// `(repeat_index, outcome)` in ascending repeat order.
    pub reconstructions: Vec<(u32, Result<Generated, HarnessError>)>,
}

impl Decoded {
    /// All reconstructions, failing on the first generation error.
    pub fn into_images(self) -> Result<Vec<RasterImage>, HarnessError> {
        self.reconstructions
            .into_iter()
            .map(|(_, r)| r.map(|g| g.image))
            .collect()
    }
}

/// Decoder path. Issues one generation request per entry of `repeats`, each
/// with seed `seed_base + repeat_index`. Generation failures are reported per
/// repeat; container and codec failures fail the whole call.
pub fn decode(
    container: &Container,
    backends: &Backends,
    repeats: &[u32],
    seed_base: u64,
) -> Result<Decoded, HarnessError> {
    container.validate()?;
    let caption = container
        .text_payload
        .as_deref()
        .map(decompress_text)
        .transpose()?;
    let condition = container
        .visual_payload
        .as_ref()
        .map(|v| backends.codecs.decode(v.codec_id, &v.data))
        .transpose()?;

    let (width, height) = (
        u32::from(container.header.width),
        u32::from(container.header.height),
    );
    let reconstructions = Execution::default().map_slice(repeats, |&repeat_index| {
        let request = GenerationRequest {
            prompt_text: caption.as_ref().map(|c| c.text().to_string()),
            condition_image: condition.clone(),
            target_width: width,
            target_height: height,
            seed: Some(seed_base + u64::from(repeat_index)),
            repeat_index,
        };
        let outcome = backends
            .generation
            .generate(&request)
            .map_err(|e| HarnessError::from(e).context(format!("generation, repeat {repeat_index}")));
        (repeat_index, outcome)
    });
    Ok(Decoded {
        caption,
        condition,
        reconstructions,
    })
}

/// Reads, parses and decodes a `.gzc` file; errors name the file.
pub fn decode_file(
    path: &Path,
    backends: &Backends,
    repeats: &[u32],
    seed_base: u64,
) -> Result<Decoded, HarnessError> {
    let ctx = |e: HarnessError| e.context(path.display().to_string());
    let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    let container = container::deserialize(&bytes).map_err(|e| ctx(e.into()))?;
    decode(&container, backends, repeats, seed_base).map_err(ctx)
}

/// Rate fields re-derived from a persisted container.
pub fn rate_of_file(path: &Path) -> Result<RateReport, HarnessError> {
    let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    let container = container::deserialize(&bytes)
        .map_err(|e| HarnessError::from(e).context(path.display().to_string()))?;
    Ok(bpp(&container))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::DEFAULT_QUALITY;
    use crate::visualcodec::upsample_to;

    fn image() -> RasterImage {
        RasterImage::from_fn(64, 48, |x, y| [(x * 4) as u8, (y * 5) as u8, 90])
    }

    #[test]
    fn text_only_encode_is_deterministic() {
        let mode = Mode::preset("text30", DEFAULT_QUALITY).unwrap();
        let backends = Backends::mock();
        let a = encode(&image(), &mode, &backends).unwrap();
        let b = encode(&image(), &mode, &backends).unwrap();
        assert!(a.container.header.text_present());
        assert!(!a.container.header.visual_present());
        assert_eq!(
            container::serialize(&a.container).unwrap(),
            container::serialize(&b.container).unwrap()
        );
        assert_eq!(a.rate.bits_total, container::container_bits(&a.container));
        assert!(a.spatial_coverage().unwrap() > 0.0);
    }

    #[test]
    fn visual_only_payload_is_downsampled() {
        let mode = Mode::preset("visual", DEFAULT_QUALITY).unwrap();
        let backends = Backends::mock();
        let enc = encode(&image(), &mode, &backends).unwrap();
        assert!(!enc.container.header.text_present());
        let v = enc.container.visual_payload.as_ref().unwrap();
        assert_eq!(backends.codecs.decode(v.codec_id, &v.data).unwrap().dims(), (8, 6));
        assert!(enc.caption.is_none());
    }

    #[test]
    fn multimodal_decode_matches_upsampled_condition() {
        let mode = Mode::preset("multi15", DEFAULT_QUALITY).unwrap();
        let backends = Backends::mock();
        let enc = encode(&image(), &mode, &backends).unwrap();
        let dec = decode(&enc.container, &backends, &[1, 2, 3], 0).unwrap();
        let cond = dec.condition.clone().unwrap();
        assert_eq!(dec.caption.as_ref().unwrap().word_count(), 15);
        let images = dec.into_images().unwrap();
        assert_eq!(images.len(), 3);
        for img in images {
            assert_eq!(img, upsample_to(&cond, 64, 48));
        }
    }

    #[test]
    fn external_mode_uses_codec_slot() {
        let mode = Mode::parse("name=ext;visual=external:0.05", DEFAULT_QUALITY).unwrap();
        let backends = Backends::mock();
        let enc = encode(&image(), &mode, &backends).unwrap();
        let v = enc.container.visual_payload.as_ref().unwrap();
        assert_eq!(v.codec_id, CODEC_EXTERNAL);
        assert_eq!(v.data, downsample8(&image()).to_png());

        let mut no_external = Backends::mock();
        no_external.codecs = crate::visualcodec::CodecRegistry::new();
        assert!(matches!(
            encode(&image(), &mode, &no_external),
            Err(HarnessError::Codec(crate::visualcodec::CodecError::UnknownCodec(1)))
        ));
    }
}
