use serde::{Deserialize, Serialize};

use crate::container::{container_bits, Container, HEADER_LEN};

/// Bit budget of a container split into payload and framing terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub bits_total: u64,
    pub bits_text: u64,
    pub bits_visual: u64,
    /// Header, length prefixes and the codec id octet.
    pub bits_overhead: u64,
    pub pixels: u64,
    pub bpp: f64,
}

pub fn bpp(container: &Container) -> RateReport {
    let bits_total = container_bits(container);
    let bits_text = container
        .text_payload
        .as_ref()
        .map_or(0, |t| 8 * t.len() as u64);
    let bits_visual = container
        .visual_payload
        .as_ref()
        .map_or(0, |v| 8 * v.data.len() as u64);
    let bits_overhead = bits_total - bits_text - bits_visual;
    debug_assert!(bits_overhead >= 8 * HEADER_LEN as u64);
    let pixels = container.header.pixel_count();
    RateReport {
        bits_total,
        bits_text,
        bits_visual,
        bits_overhead,
        pixels,
        bpp: bits_total as f64 / pixels as f64,
    }
}
