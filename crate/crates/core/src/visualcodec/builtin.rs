//! Codec 0: a deterministic block-transform coder for the visual condition.
//!
//! Stream layout: `[u8 quality][u16be width][u16be height]` followed by a raw
//! DEFLATE stream of symbols. Symbols are zigzag-signed LEB128 integers laid
//! out plane by plane (Y, Cb, Cr) and block by block in raster order:
//!
//! ```text
//! block := dc_delta (run level)* 0 0
//! ```
//!
//! `dc_delta` is relative to the previous block's DC in the same plane (the
//! first block predicts 0), `run` counts zero AC coefficients in zigzag order
//! before a nonzero `level`, and the pair `0 0` ends the block.

use super::dct::{self, Block};
use super::resample::clamp_u8;
use super::{CodecError, CodecSettings, RasterImage};
use crate::par::Execution;
use crate::textcodec::{deflate_raw, inflate_raw};

pub const STREAM_HEADER_LEN: usize = 5;

/// Reference luminance quantization table, row-major.
pub const LUMA_QUANT: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// Reference chrominance quantization table, row-major.
pub const CHROMA_QUANT: [u16; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99, //
    18, 21, 26, 66, 99, 99, 99, 99, //
    24, 26, 56, 99, 99, 99, 99, 99, //
    47, 66, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99,
];

/// Row-major index of the k-th coefficient in zigzag order.
pub const ZIGZAG: [usize; 64] = [
    0, 1, 8, 16, 9, 2, 3, 10, //
    17, 24, 32, 25, 18, 11, 4, 5, //
    12, 19, 26, 33, 40, 48, 41, 34, //
    27, 20, 13, 6, 7, 14, 21, 28, //
    35, 42, 49, 56, 57, 50, 43, 36, //
    29, 22, 15, 23, 30, 37, 44, 51, //
    58, 59, 52, 45, 38, 31, 39, 46, //
    53, 60, 61, 54, 47, 55, 62, 63,
];

/// Scales a reference table for `quality` in `1..=100`.
pub fn scaled_table(base: &[u16; 64], quality: u8) -> [u16; 64] {
    let q = u32::from(quality);
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    std::array::from_fn(|i| ((u32::from(base[i]) * scale + 50) / 100).clamp(1, 255) as u16)
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Plane {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl Plane {
    fn at_clamped(&self, x: u32, y: u32) -> u8 {
        let x = x.min(self.width - 1);
        let y = y.min(self.height - 1);
        self.data[(y * self.width + x) as usize]
    }

    fn blocks_x(&self) -> u32 {
        self.width.div_ceil(8)
    }

    fn block_count(&self) -> usize {
        (self.blocks_x() * self.height.div_ceil(8)) as usize
    }
}

fn chroma_dims(width: u32, height: u32) -> (u32, u32) {
    (width.div_ceil(2), height.div_ceil(2))
}

/// BT.601 full-range forward conversion, rounded half away from zero.
pub fn rgb_to_ycbcr(rgb: [u8; 3]) -> [u8; 3] {
    let [r, g, b] = rgb.map(f64::from);
    let y = 0.299 * r + 0.587 * g + 0.114 * b;
    let cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
    let cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
    [clamp_u8(y), clamp_u8(cb), clamp_u8(cr)]
}

pub fn ycbcr_to_rgb(ycc: [u8; 3]) -> [u8; 3] {
    let y = f64::from(ycc[0]);
    let cb = f64::from(ycc[1]) - 128.0;
    let cr = f64::from(ycc[2]) - 128.0;
    [
        clamp_u8(y + 1.402 * cr),
        clamp_u8(y - 0.344136 * cb - 0.714136 * cr),
        clamp_u8(y + 1.772 * cb),
    ]
}

fn split_planes(image: &RasterImage) -> [Plane; 3] {
    let (w, h) = image.dims();
    let n = (w * h) as usize;
    let mut planes: [Vec<u8>; 3] = std::array::from_fn(|_| Vec::with_capacity(n));
    for px in image.samples().chunks_exact(3) {
        let ycc = rgb_to_ycbcr([px[0], px[1], px[2]]);
        for c in 0..3 {
            planes[c].push(ycc[c]);
        }
    }
    let [y, cb, cr] = planes;
    let full = |data| Plane {
        width: w,
        height: h,
        data,
    };
    [full(y), subsample(&full(cb)), subsample(&full(cr))]
}

/// 2x2 mean with edge replication, rounded half away from zero.
fn subsample(plane: &Plane) -> Plane {
    let (cw, ch) = chroma_dims(plane.width, plane.height);
    let mut data = Vec::with_capacity((cw * ch) as usize);
    for y in 0..ch {
        for x in 0..cw {
            let sum: u32 = [(0, 0), (1, 0), (0, 1), (1, 1)]
                .iter()
                .map(|&(dx, dy)| u32::from(plane.at_clamped(2 * x + dx, 2 * y + dy)))
                .sum();
            data.push(((sum + 2) / 4) as u8);
        }
    }
    Plane {
        width: cw,
        height: ch,
        data,
    }
}

fn quantize_plane(plane: &Plane, table: &[u16; 64], exec: Execution) -> Vec<[i32; 64]> {
    let bx = plane.blocks_x();
    exec.map_range(plane.block_count(), |b| {
        let (ox, oy) = ((b as u32 % bx) * 8, (b as u32 / bx) * 8);
        let block: Block = std::array::from_fn(|i| {
            f64::from(plane.at_clamped(ox + (i % 8) as u32, oy + (i / 8) as u32)) - 128.0
        });
        let coeffs = dct::forward(&block);
        std::array::from_fn(|i| (coeffs[i] / f64::from(table[i])).round() as i32)
    })
}

fn reconstruct_plane(
    width: u32,
    height: u32,
    blocks: &[[i32; 64]],
    table: &[u16; 64],
    exec: Execution,
) -> Plane {
    let bx = width.div_ceil(8);
    let pixels: Vec<[u8; 64]> = exec.map_slice(blocks, |q| {
        let coeffs: Block = std::array::from_fn(|i| f64::from(q[i]) * f64::from(table[i]));
        dct::inverse(&coeffs).map(|v| clamp_u8(v + 128.0))
    });
    let mut data = vec![0u8; (width * height) as usize];
    for (b, px) in pixels.iter().enumerate() {
        let (ox, oy) = ((b as u32 % bx) * 8, (b as u32 / bx) * 8);
        for i in 0..64 {
            let (x, y) = (ox + (i % 8) as u32, oy + (i / 8) as u32);
            if x < width && y < height {
                data[(y * width + x) as usize] = px[i];
            }
        }
    }
    Plane {
        width,
        height,
        data,
    }
}

fn zigzag_encode(v: i32) -> u32 {
    ((v << 1) ^ (v >> 31)) as u32
}

fn zigzag_decode(v: u32) -> i32 {
    ((v >> 1) as i32) ^ -((v & 1) as i32)
}

fn push_symbol(out: &mut Vec<u8>, v: i32) {
    crate::container::write_leb128(out, zigzag_encode(v));
}

fn emit_blocks(out: &mut Vec<u8>, blocks: &[[i32; 64]]) {
    let mut prev_dc = 0;
    for q in blocks {
        push_symbol(out, q[0] - prev_dc);
        prev_dc = q[0];
        let mut run = 0;
        for &idx in &ZIGZAG[1..] {
            let level = q[idx];
            if level == 0 {
                run += 1;
            } else {
                push_symbol(out, run);
                push_symbol(out, level);
                run = 0;
            }
        }
        push_symbol(out, 0);
        push_symbol(out, 0);
    }
}

pub fn encode_builtin(image: &RasterImage, settings: &CodecSettings) -> Result<Vec<u8>, CodecError> {
    encode_builtin_with(image, settings, Execution::default())
}

pub fn encode_builtin_with(
    image: &RasterImage,
    settings: &CodecSettings,
    exec: Execution,
) -> Result<Vec<u8>, CodecError> {
    settings.validate()?;
    let (w, h) = image.dims();
    let (w16, h16) = match (u16::try_from(w), u16::try_from(h)) {
        (Ok(w), Ok(h)) => (w, h),
        _ => {
            return Err(CodecError::InvalidImage(format!(
                "{w}x{h} exceeds the 65535 pixel stream limit"
            )))
        }
    };
    let luma = scaled_table(&LUMA_QUANT, settings.quality);
    let chroma = scaled_table(&CHROMA_QUANT, settings.quality);

    let mut symbols = Vec::new();
    for (i, plane) in split_planes(image).iter().enumerate() {
        let table = if i == 0 { &luma } else { &chroma };
        emit_blocks(&mut symbols, &quantize_plane(plane, table, exec));
    }

    let mut out = Vec::with_capacity(STREAM_HEADER_LEN + symbols.len() / 4);
    out.push(settings.quality);
    out.extend_from_slice(&w16.to_be_bytes());
    out.extend_from_slice(&h16.to_be_bytes());
    out.extend_from_slice(&deflate_raw(&symbols));
    Ok(out)
}

struct SymbolReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl SymbolReader<'_> {
    fn next(&mut self) -> Result<i32, CodecError> {
        let mut value: u64 = 0;
        for i in 0..5 {
            let Some(&byte) = self.bytes.get(self.pos) else {
                return Err(CodecError::Inconsistent(
                    "symbol stream ended before all blocks were decoded".into(),
                ));
            };
            self.pos += 1;
            value |= u64::from(byte & 0x7f) << (7 * i);
            if byte & 0x80 == 0 {
                let v = u32::try_from(value)
                    .map_err(|_| CodecError::Malformed("symbol exceeds 32 bits".into()))?;
                return Ok(zigzag_decode(v));
            }
        }
        Err(CodecError::Malformed("overlong symbol".into()))
    }
}

fn read_blocks(reader: &mut SymbolReader<'_>, count: usize) -> Result<Vec<[i32; 64]>, CodecError> {
    let mut blocks = Vec::with_capacity(count);
    let mut prev_dc = 0i32;
    for _ in 0..count {
        let mut q = [0i32; 64];
        prev_dc = prev_dc
            .checked_add(reader.next()?)
            .ok_or_else(|| CodecError::Malformed("DC overflow".into()))?;
        q[0] = prev_dc;
        let mut k = 1usize;
        loop {
            let run = reader.next()?;
            let level = reader.next()?;
            if run == 0 && level == 0 {
                break;
            }
            if run < 0 || level == 0 {
                return Err(CodecError::Malformed(format!(
                    "invalid run/level pair ({run}, {level})"
                )));
            }
            k += run as usize;
            if k > 63 {
                return Err(CodecError::Inconsistent(
                    "run exceeds the 63 AC coefficients of a block".into(),
                ));
            }
            q[ZIGZAG[k]] = level;
            k += 1;
        }
        blocks.push(q);
    }
    Ok(blocks)
}

pub fn decode_builtin(bytes: &[u8]) -> Result<RasterImage, CodecError> {
    decode_builtin_with(bytes, Execution::default())
}

pub fn decode_builtin_with(bytes: &[u8], exec: Execution) -> Result<RasterImage, CodecError> {
    if bytes.len() < STREAM_HEADER_LEN {
        return Err(CodecError::Malformed("stream shorter than its header".into()));
    }
    let quality = bytes[0];
    let width = u32::from(u16::from_be_bytes([bytes[1], bytes[2]]));
    let height = u32::from(u16::from_be_bytes([bytes[3], bytes[4]]));
    if !(1..=100).contains(&quality) {
        return Err(CodecError::Malformed(format!("quality {quality} out of range")));
    }
    if width == 0 || height == 0 {
        return Err(CodecError::Malformed("zero image dimension".into()));
    }
    let (cw, ch) = chroma_dims(width, height);
    let dims = [(width, height), (cw, ch), (cw, ch)];
    let counts: Vec<usize> = dims
        .iter()
        .map(|&(w, h)| (w.div_ceil(8) * h.div_ceil(8)) as usize)
        .collect();
    // Worst case: every coefficient as a 5-octet run and level.
    let limit = counts.iter().sum::<usize>() * 64 * 10 + 16;
    let symbols = inflate_raw(&bytes[STREAM_HEADER_LEN..], limit)
        .map_err(|e| CodecError::Malformed(e.to_string()))?;

    let luma = scaled_table(&LUMA_QUANT, quality);
    let chroma = scaled_table(&CHROMA_QUANT, quality);
    let mut reader = SymbolReader {
        bytes: &symbols,
        pos: 0,
    };
    let mut planes = Vec::with_capacity(3);
    for (i, (&(w, h), &count)) in dims.iter().zip(&counts).enumerate() {
        let blocks = read_blocks(&mut reader, count)?;
        let table = if i == 0 { &luma } else { &chroma };
        planes.push(reconstruct_plane(w, h, &blocks, table, exec));
    }
    if reader.pos != symbols.len() {
        return Err(CodecError::Inconsistent(format!(
            "{} symbol octet(s) left after the last block",
            symbols.len() - reader.pos
        )));
    }

    let (y, cb, cr) = (&planes[0], &planes[1], &planes[2]);
    let mut samples = Vec::with_capacity((width * height * 3) as usize);
    for py in 0..height {
        for px in 0..width {
            let ycc = [
                y.data[(py * width + px) as usize],
                cb.at_clamped(px / 2, py / 2),
                cr.at_clamped(px / 2, py / 2),
            ];
            samples.extend_from_slice(&ycbcr_to_rgb(ycc));
        }
    }
    RasterImage::new(width, height, samples)
}
