//! JSON bodies of the backend endpoints. Images travel as base64 PNG.
//!
//! | endpoint                | request                                   | response                 |
//! |-------------------------|-------------------------------------------|--------------------------|
//! | `POST /v1/caption`      | `{image, prompt, max_words}`              | `{caption}`              |
//! | `POST /v1/generate`     | `{prompt?, image?, width, height, seed?}` | `{image}`                |
//! | `POST /v1/embed`        | `{image}`                                 | `{embedding, dim}`       |
//! | `POST /v1/codec/encode` | `{image, target_bpp}`                     | `{data}`                 |
//! | `POST /v1/codec/decode` | `{data}`                                  | `{image}`                |
//! | `POST /v1/metrics`      | `{reference, image}`                      | `{metrics: {name: num}}` |

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::visualcodec::RasterImage;

pub fn encode_image(image: &RasterImage) -> String {
    STANDARD.encode(image.to_png())
}

pub fn decode_image(b64: &str) -> Result<RasterImage, String> {
    let bytes = STANDARD.decode(b64).map_err(|e| e.to_string())?;
    RasterImage::from_png(&bytes).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRequest {
    pub image: String,
    pub prompt: String,
    pub max_words: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionResponse {
    pub caption: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub image: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub image: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub embedding: Vec<f64>,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecEncodeRequest {
    pub image: String,
    pub target_bpp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecEncodeResponse {
    pub data: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecDecodeRequest {
    pub data: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecDecodeResponse {
    pub image: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRequest {
    pub reference: String,
    pub image: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsResponse {
    pub metrics: BTreeMap<String, f64>,
}
