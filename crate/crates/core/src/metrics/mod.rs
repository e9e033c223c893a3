//! Rate accounting and the quality panel.

mod aggregate;
mod fidelity;
mod rate;
mod record;

use std::collections::BTreeMap;

use thiserror::Error;

pub use aggregate::{aggregate, ImageModeMean, MetricStats, ModeSummary, Summary};
pub use fidelity::{embed_cosine, psnr, ssim, ssim_with, PSNR_CAP_DB, SSIM_WINDOW};
pub use rate::{bpp, RateReport};
pub use record::{EvalRecord, RECORD_SCHEMA};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(String, String),
    #[error("image {width}x{height} is smaller than the {window}x{window} SSIM window")]
    TooSmall { width: u32, height: u32, window: usize },
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("cannot aggregate an empty record list")]
    Empty,
}

/// Quality measurements of one reconstruction against its original.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QualityPanel {
    pub psnr_db: f64,
    pub ssim: f64,
    pub embed_cosine: Option<f64>,
    /// Scores from an external metric service (e.g. no-reference IQA models).
    pub external_metrics: Option<BTreeMap<String, f64>>,
}
