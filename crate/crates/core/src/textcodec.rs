//! Lossless caption coding with raw DEFLATE (RFC 1951, no zlib wrapper).

use std::fmt;
use std::io::Write;

use flate2::{Compression, Decompress, FlushDecompress, Status};
use thiserror::Error;

/// Decompressed captions larger than this are rejected.
pub const MAX_CAPTION_BYTES: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TextCodecError {
    #[error("malformed DEFLATE stream: {0}")]
    Malformed(String),
    #[error("decompressed caption is not valid UTF-8")]
    Encoding,
    #[error("caption contains control character {0:?}")]
    ControlCharacter(char),
    #[error("word budget must be at least 1")]
    InvalidBudget,
}

/// A caption and its whitespace-delimited word count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Caption {
    text: String,
    word_count: usize,
}

impl Caption {
    /// Accepts text containing no control characters except `\n`.
    pub fn new(text: impl Into<String>) -> Result<Self, TextCodecError> {
        let text = text.into();
        if let Some(c) = text.chars().find(|&c| c.is_control() && c != '\n') {
            return Err(TextCodecError::ControlCharacter(c));
        }
        let word_count = count_words(&text);
        Ok(Self { text, word_count })
    }

    /// Like [`Caption::new`] but replaces offending control characters
    /// (tabs, carriage returns, ...) with spaces. Used on backend output.
    pub fn sanitized(text: &str) -> Self {
        let text: String = text
            .chars()
            .map(|c| if c.is_control() && c != '\n' { ' ' } else { c })
            .collect();
        Self::new(text).expect("control characters were replaced")
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn word_count(&self) -> usize {
        self.word_count
    }

    pub fn into_text(self) -> String {
        self.text
    }
}

impl fmt::Display for Caption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Number of maximal non-whitespace runs.
pub fn count_words(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Raw DEFLATE at maximum effort.
pub fn deflate_raw(data: &[u8]) -> Vec<u8> {
    let mut encoder = flate2::write::DeflateEncoder::new(Vec::new(), Compression::best());
    encoder
        .write_all(data)
        .expect("writing into a Vec cannot fail");
    encoder.finish().expect("writing into a Vec cannot fail")
}

/// Inflates a raw DEFLATE stream that must end exactly at the end of `data`.
pub fn inflate_raw(data: &[u8], limit: usize) -> Result<Vec<u8>, TextCodecError> {
    let mut inflater = Decompress::new(false);
    // One spare octet so that exceeding the limit is observable.
    let cap = limit.saturating_add(1);
    let mut out = Vec::with_capacity(data.len().saturating_mul(4).clamp(64, cap));
    loop {
        if out.len() == out.capacity() {
            out.reserve((out.len() + 1024).min(cap - out.len()));
        }
        let consumed = inflater.total_in() as usize;
        let produced = out.len();
        let status = inflater
            .decompress_vec(&data[consumed..], &mut out, FlushDecompress::None)
            .map_err(|e| TextCodecError::Malformed(e.to_string()))?;
        if out.len() > limit {
            return Err(TextCodecError::Malformed(format!(
                "output exceeds {limit} octets"
            )));
        }
        match status {
            Status::StreamEnd => break,
            Status::Ok | Status::BufError => {
                let progressed =
                    inflater.total_in() as usize != consumed || out.len() != produced;
                if !progressed {
                    return Err(TextCodecError::Malformed("truncated stream".into()));
                }
            }
        }
    }
    let consumed = inflater.total_in() as usize;
    if consumed != data.len() {
        return Err(TextCodecError::Malformed(format!(
            "{} octet(s) after end of stream",
            data.len() - consumed
        )));
    }
    Ok(out)
}

pub fn compress_text(caption: &Caption) -> Vec<u8> {
    deflate_raw(caption.text.as_bytes())
}

pub fn decompress_text(bytes: &[u8]) -> Result<Caption, TextCodecError> {
    let raw = inflate_raw(bytes, MAX_CAPTION_BYTES)?;
    let text = String::from_utf8(raw).map_err(|_| TextCodecError::Encoding)?;
    Caption::new(text)
}

/// Keeps the first `budget` words, joined by single spaces. Captions already
/// within budget are returned untouched.
pub fn truncate_to_budget(caption: &Caption, budget: usize) -> Result<Caption, TextCodecError> {
    if budget == 0 {
        return Err(TextCodecError::InvalidBudget);
    }
    if caption.word_count <= budget {
        return Ok(caption.clone());
    }
    let text = caption
        .text
        .split_whitespace()
        .take(budget)
        .collect::<Vec<_>>()
        .join(" ");
    Ok(Caption {
        text,
        word_count: budget,
    })
}
