use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use super::wire::{self, decode_image, encode_image};
use super::{
    normalize, BackendEndpoint, BackendError, CaptionAdapter, CaptionBackend, EmbeddingBackend,
    Generated, GenerationBackend, GenerationRequest, Limiter, MetricBackend,
};
use crate::container::CODEC_EXTERNAL;
use crate::textcodec::Caption;
use crate::visualcodec::{upsample_to, CodecError, RasterImage, RateTarget, VisualCodec};

const ERROR_BODY_PREVIEW: usize = 200;

/// JSON-over-HTTP client for one endpoint. Every role trait is implemented;
/// configure one instance per role.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    endpoint: BackendEndpoint,
    adapter: CaptionAdapter,
    client: Client,
    limiter: Arc<Limiter>,
    deadline: Option<Instant>,
}

enum Failure {
    Retryable(BackendError),
    Fatal(BackendError),
}

impl HttpBackend {
    pub fn new(endpoint: BackendEndpoint) -> Result<Self, BackendError> {
        let client = Client::builder()
            .build()
            .map_err(|e| BackendError::InvalidEndpoint(e.to_string()))?;
        let limiter = Arc::new(Limiter::new(endpoint.parallelism_limit()));
        Ok(Self {
            endpoint,
            adapter: CaptionAdapter::Native,
            client,
            limiter,
            deadline: None,
        })
    }

    pub fn with_adapter(mut self, adapter: CaptionAdapter) -> Self {
        self.adapter = adapter;
        self
    }

    /// Requests (including retries and backoff) give up at `deadline`.
    pub fn with_deadline(mut self, deadline: Instant) -> Self {
        self.deadline = Some(deadline);
        self
    }

    pub fn endpoint(&self) -> &BackendEndpoint {
        &self.endpoint
    }

    pub fn limiter(&self) -> &Limiter {
        &self.limiter
    }

    fn remaining(&self, url: &str) -> Result<Option<Duration>, BackendError> {
        match self.deadline {
            None => Ok(None),
            Some(d) => {
                let left = d.saturating_duration_since(Instant::now());
                if left.is_zero() {
                    Err(BackendError::DeadlineExceeded(url.to_string()))
                } else {
                    Ok(Some(left))
                }
            }
        }
    }

    fn attempt(&self, url: &str, body: &[u8], attempts: u32) -> Result<Vec<u8>, Failure> {
        let mut timeout = self.endpoint.timeout();
        if let Some(left) = self.remaining(url).map_err(Failure::Fatal)? {
            timeout = timeout.min(left);
        }
        let mut request = self
            .client
            .post(url)
            .timeout(timeout)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_vec());
        if let Some(key) = self.endpoint.api_key() {
            request = request.bearer_auth(key);
        }

        let transport = |e: reqwest::Error| {
            if e.is_timeout() {
                Failure::Retryable(BackendError::Timeout {
                    url: url.to_string(),
                    attempts,
                })
            } else {
                Failure::Retryable(BackendError::Connection {
                    url: url.to_string(),
                    attempts,
                    message: e.to_string(),
                })
            }
        };

        let _permit = self.limiter.acquire();
        let response = request.send().map_err(transport)?;
        let status = response.status();
        let bytes = response.bytes().map_err(transport)?;
        if status.is_success() {
            return Ok(bytes.to_vec());
        }
        let text = String::from_utf8_lossy(&bytes);
        let err = BackendError::HttpStatus {
            url: url.to_string(),
            status: status.as_u16(),
            body: text.chars().take(ERROR_BODY_PREVIEW).collect(),
        };
        if status.is_server_error()
            || status == StatusCode::TOO_MANY_REQUESTS
            || status == StatusCode::REQUEST_TIMEOUT
        {
            Err(Failure::Retryable(err))
        } else {
            Err(Failure::Fatal(err))
        }
    }

    /// POSTs `body` as JSON and decodes the JSON answer, retrying transport
    /// failures, 408, 429 and 5xx with exponential backoff.
    pub fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        path: &str,
        body: &Req,
    ) -> Result<Resp, BackendError> {
        let url = self.endpoint.url(path);
        let payload = serde_json::to_vec(body)
            .map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
        let mut attempts = 0;
        let bytes = loop {
            attempts += 1;
            match self.attempt(&url, &payload, attempts) {
                Ok(bytes) => break bytes,
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(e)) => {
                    if attempts > self.endpoint.max_retries() {
                        return Err(e);
                    }
                    let wait = self.endpoint.backoff(attempts - 1);
                    if let Some(left) = self.remaining(&url)? {
                        if wait >= left {
                            return Err(BackendError::DeadlineExceeded(url));
                        }
                    }
                    log::warn!("{url}: {e}; retrying in {wait:?}");
                    std::thread::sleep(wait);
                }
            }
        };
        serde_json::from_slice(&bytes).map_err(|e| BackendError::MalformedResponse {
            url,
            message: e.to_string(),
        })
    }

    fn malformed(&self, path: &str, message: impl Into<String>) -> BackendError {
        BackendError::MalformedResponse {
            url: self.endpoint.url(path),
            message: message.into(),
        }
    }

    fn chat_caption(
        &self,
        model: &str,
        image: &RasterImage,
        instruction: &str,
        budget: usize,
    ) -> Result<String, BackendError> {
        const PATH: &str = "v1/chat/completions";
        let body = json!({
            "model": model,
            "messages": [{
                "role": "user",
                "content": [
                    {"type": "text", "text": instruction},
                    {"type": "image_url", "image_url": {
                        "url": format!("data:image/png;base64,{}", encode_image(image))
                    }}
                ]
            }],
            // Roughly four tokens per word leaves room for punctuation.
            "max_tokens": budget.saturating_mul(4).max(16),
        });
        let answer: serde_json::Value = self.post(PATH, &body)?;
        answer
            .pointer("/choices/0/message/content")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .ok_or_else(|| self.malformed(PATH, "missing choices[0].message.content"))
    }
}

impl CaptionBackend for HttpBackend {
    fn caption(
        &self,
        image: &RasterImage,
        instruction: &str,
        budget: usize,
    ) -> Result<Caption, BackendError> {
        let text = match &self.adapter {
            CaptionAdapter::Native => {
                let req = wire::CaptionRequest {
                    image: encode_image(image),
                    prompt: instruction.to_string(),
                    max_words: budget,
                };
                let resp: wire::CaptionResponse = self.post("v1/caption", &req)?;
                resp.caption
            }
            CaptionAdapter::ChatCompletions { model } => {
                self.chat_caption(model, image, instruction, budget)?
            }
        };
        let text = text.trim();
        if text.is_empty() {
            return Err(BackendError::EmptyCaption);
        }
        Ok(Caption::sanitized(text))
    }
}

impl GenerationBackend for HttpBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<Generated, BackendError> {
        request.validate()?;
        let req = wire::GenerateRequest {
            prompt: request.prompt_text.clone(),
            image: request.condition_image.as_ref().map(encode_image),
            width: request.target_width,
            height: request.target_height,
            seed: request.seed,
        };
        let resp: wire::GenerateResponse = self.post("v1/generate", &req)?;
        let image = decode_image(&resp.image).map_err(BackendError::UndecodableImage)?;
        let target = (request.target_width, request.target_height);
        if image.dims() == target {
            return Ok(Generated {
                image,
                resized: false,
            });
        }
        log::info!(
            "generator answered {}x{} for a {}x{} request; resizing",
            image.width(),
            image.height(),
            target.0,
            target.1
        );
        Ok(Generated {
            image: upsample_to(&image, target.0, target.1),
            resized: true,
        })
    }
}

impl EmbeddingBackend for HttpBackend {
    fn embed(&self, image: &RasterImage) -> Result<Vec<f64>, BackendError> {
        const PATH: &str = "v1/embed";
        let req = wire::EmbedRequest {
            image: encode_image(image),
        };
        let resp: wire::EmbedResponse = self.post(PATH, &req)?;
        if resp.embedding.len() != resp.dim || resp.dim == 0 {
            return Err(self.malformed(
                PATH,
                format!(
                    "embedding has {} values but dim is {}",
                    resp.embedding.len(),
                    resp.dim
                ),
            ));
        }
        normalize(resp.embedding)
    }

    fn label(&self) -> &str {
        "http"
    }
}

impl MetricBackend for HttpBackend {
    fn score(
        &self,
        reference: &RasterImage,
        candidate: &RasterImage,
    ) -> Result<BTreeMap<String, f64>, BackendError> {
        let req = wire::MetricsRequest {
            reference: encode_image(reference),
            image: encode_image(candidate),
        };
        let resp: wire::MetricsResponse = self.post("v1/metrics", &req)?;
        Ok(resp.metrics)
    }
}

impl HttpBackend {
    pub fn external_encode(
        &self,
        image: &RasterImage,
        target_bpp: f64,
    ) -> Result<Vec<u8>, BackendError> {
        const PATH: &str = "v1/codec/encode";
        let req = wire::CodecEncodeRequest {
            image: encode_image(image),
            target_bpp,
        };
        let resp: wire::CodecEncodeResponse = self.post(PATH, &req)?;
        let data = STANDARD
            .decode(resp.data)
            .map_err(|e| self.malformed(PATH, e.to_string()))?;
        if data.is_empty() {
            return Err(self.malformed(PATH, "empty payload"));
        }
        Ok(data)
    }

    pub fn external_decode(&self, data: &[u8]) -> Result<RasterImage, BackendError> {
        let req = wire::CodecDecodeRequest {
            data: STANDARD.encode(data),
        };
        let resp: wire::CodecDecodeResponse = self.post("v1/codec/decode", &req)?;
        decode_image(&resp.image).map_err(BackendError::UndecodableImage)
    }
}

impl VisualCodec for HttpBackend {
    fn encode(&self, image: &RasterImage, target: &RateTarget) -> Result<Vec<u8>, CodecError> {
        match target {
            RateTarget::Bpp(bpp) => self
                .external_encode(image, *bpp)
                .map_err(|e| CodecError::External(e.to_string())),
            other => Err(CodecError::UnsupportedTarget {
                codec_id: CODEC_EXTERNAL,
                target: other.to_string(),
            }),
        }
    }

    fn decode(&self, data: &[u8]) -> Result<RasterImage, CodecError> {
        self.external_decode(data)
            .map_err(|e| CodecError::External(e.to_string()))
    }
}
