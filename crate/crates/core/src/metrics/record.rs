use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const RECORD_SCHEMA: u32 = 1;

/// One `(image, mode, repeat)` row of `results.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub schema: u32,
    pub image_id: String,
    pub mode_name: String,
    pub repeat_index: u32,
    pub bpp: f64,
    pub bits_total: u64,
    pub bits_text: u64,
    pub bits_visual: u64,
    pub bits_overhead: u64,
    pub psnr_db: f64,
    pub ssim: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embed_cosine: Option<f64>,
    /// `mock` or `http`; mock cosines are not comparable with CLIP scores.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embed_backend: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_metrics: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spatial_coverage: Option<f64>,
    pub resized_flag: bool,
    pub wall_time_s: f64,
}

impl EvalRecord {
    /// Identity of the row for resume bookkeeping.
    pub fn key(&self) -> (String, String, u32) {
        (self.image_id.clone(), self.mode_name.clone(), self.repeat_index)
    }
}
