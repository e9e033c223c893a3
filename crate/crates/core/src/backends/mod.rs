//! External AI services (captioning, generation, embedding, external codec,
//! metric scoring) behind small traits, with HTTP clients and deterministic
//! offline mocks.

mod endpoint;
mod http;
mod limiter;
mod mock;
pub mod wire;

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

pub use endpoint::{BackendEndpoint, CaptionAdapter, API_KEY_ENV};
pub use http::HttpBackend;
pub use limiter::{Limiter, Permit};
pub use mock::{mock_caption_text, mock_embedding, MockBackend, MOCK_EMBED_DIM};

use crate::textcodec::Caption;
use crate::visualcodec::{CodecRegistry, RasterImage};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("invalid endpoint: {0}")]
    InvalidEndpoint(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("request to {url} timed out after {attempts} attempt(s)")]
    Timeout { url: String, attempts: u32 },
    #[error("could not reach {url} after {attempts} attempt(s): {message}")]
    Connection {
        url: String,
        attempts: u32,
        message: String,
    },
    #[error("{url} answered HTTP {status}: {body}")]
    HttpStatus {
        url: String,
        status: u16,
        body: String,
    },
    #[error("malformed response from {url}: {message}")]
    MalformedResponse { url: String, message: String },
    #[error("backend returned an empty caption")]
    EmptyCaption,
    #[error("backend returned an undecodable image: {0}")]
    UndecodableImage(String),
    #[error("backend returned a zero embedding vector")]
    DegenerateEmbedding,
    #[error("deadline exceeded before the request to {0} could complete")]
    DeadlineExceeded(String),
}

/// Input to a generation call.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub prompt_text: Option<String>,
    pub condition_image: Option<RasterImage>,
    pub target_width: u32,
    pub target_height: u32,
    pub seed: Option<u64>,
    pub repeat_index: u32,
}

impl GenerationRequest {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.prompt_text.is_none() && self.condition_image.is_none() {
            return Err(BackendError::InvalidRequest(
                "needs a prompt, a condition image, or both".into(),
            ));
        }
        if self.target_width == 0 || self.target_height == 0 {
            return Err(BackendError::InvalidRequest(format!(
                "target dimensions must be positive, got {}x{}",
                self.target_width, self.target_height
            )));
        }
        Ok(())
    }
}

/// A generated image at the requested dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub image: RasterImage,
    /// The backend answered with other dimensions and the client resized.
    pub resized: bool,
}

pub trait CaptionBackend: Send + Sync {
    fn caption(
        &self,
        image: &RasterImage,
        instruction: &str,
        budget: usize,
    ) -> Result<Caption, BackendError>;
}

pub trait GenerationBackend: Send + Sync {
    fn generate(&self, request: &GenerationRequest) -> Result<Generated, BackendError>;
}

pub trait EmbeddingBackend: Send + Sync {
    /// Unit-norm embedding.
    fn embed(&self, image: &RasterImage) -> Result<Vec<f64>, BackendError>;

    /// Short label stored with every cosine, e.g. `mock` or `http`.
    fn label(&self) -> &str;
}

/// Scores a reconstruction with externally hosted quality models.
pub trait MetricBackend: Send + Sync {
    fn score(
        &self,
        reference: &RasterImage,
        candidate: &RasterImage,
    ) -> Result<BTreeMap<String, f64>, BackendError>;
}

/// One backend per role, plus the visual codec registry.
#[derive(Clone)]
pub struct Backends {
    pub caption: Arc<dyn CaptionBackend>,
    pub generation: Arc<dyn GenerationBackend>,
    pub embedding: Option<Arc<dyn EmbeddingBackend>>,
    pub metrics: Option<Arc<dyn MetricBackend>>,
    pub codecs: CodecRegistry,
}

impl Backends {
    /// Every role served by [`MockBackend`], including the external codec slot.
    pub fn mock() -> Self {
        let mock = Arc::new(MockBackend);
        Self {
            caption: mock.clone(),
            generation: mock.clone(),
            embedding: Some(mock.clone()),
            metrics: None,
            codecs: CodecRegistry::new().with_external(mock),
        }
    }
}

/// L2-normalizes a vector; zero vectors are degenerate.
pub fn normalize(mut v: Vec<f64>) -> Result<Vec<f64>, BackendError> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(BackendError::DegenerateEmbedding);
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(v)
}
