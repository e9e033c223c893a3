//! Orchestration: dataset preparation, the encode/decode pipeline, the
//! experiment matrix, and report files.

mod config;
pub mod corpus;
mod dataset;
mod matrix;
mod mode;
mod pipeline;
mod report;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{BackendsConfig, RoleConfig, RunConfig};
pub use dataset::{
    list_dataset, prepare_dataset, prepare_dataset_with_size, prepare_image, scaled_dims, Manifest,
    ManifestEntry, MANIFEST_FILE, MIN_SOURCE_SIDE, PREPARED_SIZE,
};
pub use matrix::{
    container_path, run_matrix, run_matrix_with, CellFailure, MatrixOutcome, CONTAINERS_DIR,
    CURVES_FILE, RESULTS_FILE, SUMMARY_FILE,
};
pub use mode::{Mode, VisualMode, ALL_PRESETS, DEFAULT_QUALITY, MATRIX_PRESETS};
pub use pipeline::{decode, decode_file, encode, rate_of_file, Decoded, Encoded};
pub use report::{
    read_results, write_curves_csv, write_report, write_summary_csv, CURVES_HEADER, SUMMARY_HEADER,
};

pub use crate::metrics::EvalRecord;

use crate::backends::BackendError;
use crate::container::{ContainerError, ValidationError};
use crate::metrics::MetricsError;
use crate::textcodec::TextCodecError;
use crate::visualcodec::CodecError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid mode {0}")]
    InvalidMode(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Text(#[from] TextCodecError),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{context}: {source}")]
    Context {
        context: String,
        source: Box<HarnessError>,
    },
}

impl HarnessError {
    pub fn context(self, context: impl Into<String>) -> Self {
        HarnessError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, below any context wrappers.
    pub fn root(&self) -> &HarnessError {
        match self {
            HarnessError::Context { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| HarnessError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}
