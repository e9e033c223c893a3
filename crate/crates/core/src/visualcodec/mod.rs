//! The visual condition: 8x downsampling, bicubic resizing, and the codecs
//! that carry the small image.

mod builtin;
pub mod dct;
mod raster;
mod resample;

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

pub use builtin::{
    decode_builtin, decode_builtin_with, encode_builtin, encode_builtin_with, rgb_to_ycbcr,
    scaled_table, ycbcr_to_rgb, CHROMA_QUANT, LUMA_QUANT, STREAM_HEADER_LEN, ZIGZAG,
};
pub use raster::RasterImage;
pub use resample::{
    cubic_kernel, downsample8, downsample8_with, resize_with, upsample_to, DOWNSAMPLE_FACTOR,
};

use crate::container::{CODEC_BUILTIN, CODEC_EXTERNAL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodecError {
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("quality must be in 1..=100, got {0}")]
    InvalidQuality(u8),
    #[error("malformed codec stream: {0}")]
    Malformed(String),
    #[error("codec stream inconsistent with its header: {0}")]
    Inconsistent(String),
    #[error("unknown codec id {0}")]
    UnknownCodec(u8),
    #[error("codec {codec_id} does not accept target {target}")]
    UnsupportedTarget { codec_id: u8, target: String },
    #[error("external codec failed: {0}")]
    External(String),
}

/// Settings of the built-in codec. Chroma is always subsampled 4:2:0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodecSettings {
    pub quality: u8,
}

impl CodecSettings {
    pub fn new(quality: u8) -> Result<Self, CodecError> {
        let settings = Self { quality };
        settings.validate()?;
        Ok(settings)
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        if (1..=100).contains(&self.quality) {
            Ok(())
        } else {
            Err(CodecError::InvalidQuality(self.quality))
        }
    }
}

/// Rate target handed to a codec.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateTarget {
    /// Built-in codec quality.
    Quality(CodecSettings),
    /// Bits per pixel of the coded (downsampled) image, for external codecs.
    Bpp(f64),
}

impl std::fmt::Display for RateTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RateTarget::Quality(s) => write!(f, "quality {}", s.quality),
            RateTarget::Bpp(b) => write!(f, "{b} bpp"),
        }
    }
}

pub trait VisualCodec: Send + Sync {
    fn encode(&self, image: &RasterImage, target: &RateTarget) -> Result<Vec<u8>, CodecError>;
    fn decode(&self, data: &[u8]) -> Result<RasterImage, CodecError>;
}

/// Codec id 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinCodec;

impl VisualCodec for BuiltinCodec {
    fn encode(&self, image: &RasterImage, target: &RateTarget) -> Result<Vec<u8>, CodecError> {
        match target {
            RateTarget::Quality(settings) => encode_builtin(image, settings),
            other => Err(CodecError::UnsupportedTarget {
                codec_id: CODEC_BUILTIN,
                target: other.to_string(),
            }),
        }
    }

    fn decode(&self, data: &[u8]) -> Result<RasterImage, CodecError> {
        decode_builtin(data)
    }
}

/// Dispatches by codec id. The built-in codec is always registered; an
/// external codec can be attached under id 1.
#[derive(Clone)]
pub struct CodecRegistry {
    codecs: BTreeMap<u8, Arc<dyn VisualCodec>>,
}

impl Default for CodecRegistry {
    fn default() -> Self {
        let mut codecs: BTreeMap<u8, Arc<dyn VisualCodec>> = BTreeMap::new();
        codecs.insert(CODEC_BUILTIN, Arc::new(BuiltinCodec));
        Self { codecs }
    }
}

impl CodecRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_external(mut self, codec: Arc<dyn VisualCodec>) -> Self {
        self.codecs.insert(CODEC_EXTERNAL, codec);
        self
    }

    pub fn contains(&self, codec_id: u8) -> bool {
        self.codecs.contains_key(&codec_id)
    }

    fn get(&self, codec_id: u8) -> Result<&Arc<dyn VisualCodec>, CodecError> {
        self.codecs
            .get(&codec_id)
            .ok_or(CodecError::UnknownCodec(codec_id))
    }

    pub fn encode(
        &self,
        codec_id: u8,
        image: &RasterImage,
        target: &RateTarget,
    ) -> Result<Vec<u8>, CodecError> {
        self.get(codec_id)?.encode(image, target)
    }

    pub fn decode(&self, codec_id: u8, data: &[u8]) -> Result<RasterImage, CodecError> {
        self.get(codec_id)?.decode(data)
    }
}
