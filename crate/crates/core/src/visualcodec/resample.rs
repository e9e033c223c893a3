//! Box-filter downsampling by 8 and Catmull-Rom bicubic resizing.

use super::RasterImage;
use crate::par::Execution;

pub const DOWNSAMPLE_FACTOR: u32 = 8;

/// Catmull-Rom parameter.
const CUBIC_A: f64 = -0.5;

/// Cubic convolution kernel with `a = -0.5`.
pub fn cubic_kernel(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((CUBIC_A + 2.0) * x - (CUBIC_A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((CUBIC_A * x - 5.0 * CUBIC_A) * x + 8.0 * CUBIC_A) * x - 4.0 * CUBIC_A
    } else {
        0.0
    }
}

pub(crate) fn clamp_u8(v: f64) -> u8 {
    // f64::round rounds half away from zero.
    v.round().clamp(0.0, 255.0) as u8
}

pub fn downsample8(image: &RasterImage) -> RasterImage {
    downsample8_with(image, Execution::default())
}

/// Output is `ceil(w/8) x ceil(h/8)`; each output pixel is the rounded mean
/// of an 8x8 block of the edge-replicated input.
pub fn downsample8_with(image: &RasterImage, exec: Execution) -> RasterImage {
    let f = DOWNSAMPLE_FACTOR;
    let out_w = image.width().div_ceil(f);
    let out_h = image.height().div_ceil(f);
    let row_len = out_w as usize * 3;
    let mut samples = vec![0u8; row_len * out_h as usize];
    exec.for_each_chunk_mut(&mut samples, row_len, |oy, row| {
        for ox in 0..out_w {
            let mut sum = [0u32; 3];
            for dy in 0..f {
                let y = i64::from(oy as u32 * f + dy);
                for dx in 0..f {
                    let x = i64::from(ox * f + dx);
                    let p = image.pixel_clamped(x, y);
                    for c in 0..3 {
                        sum[c] += u32::from(p[c]);
                    }
                }
            }
            let n = f * f;
            for c in 0..3 {
                // Integer round-half-up equals half-away-from-zero for sums >= 0.
                row[ox as usize * 3 + c] = ((sum[c] + n / 2) / n) as u8;
            }
        }
    });
    RasterImage::new(out_w, out_h, samples).expect("dimensions are consistent")
}

/// Bicubic resize to `width x height`.
pub fn upsample_to(image: &RasterImage, width: u32, height: u32) -> RasterImage {
    resize_with(image, width, height, Execution::default())
}

/// Separable Catmull-Rom resize with pixel-centre alignment and edge
/// replication. When shrinking an axis the kernel is stretched by the scale
/// factor so every source pixel contributes. Samples are rounded half away
/// from zero and clamped to `[0, 255]` only after both passes.
pub fn resize_with(image: &RasterImage, width: u32, height: u32, exec: Execution) -> RasterImage {
    assert!(width > 0 && height > 0, "target dimensions must be positive");
    if image.dims() == (width, height) {
        return image.clone();
    }
    let (src_w, src_h) = image.dims();
    let xs = taps(src_w, width);
    let ys = taps(src_h, height);

    // Horizontal pass: src_h rows of `width` pixels.
    let mid_row = width as usize * 3;
    let mut mid = vec![0f64; mid_row * src_h as usize];
    let src = image.samples();
    exec.for_each_chunk_mut(&mut mid, mid_row, |y, row| {
        let src_row = &src[y * src_w as usize * 3..(y + 1) * src_w as usize * 3];
        for (ox, tap) in xs.iter().enumerate() {
            for c in 0..3 {
                row[ox * 3 + c] = tap
                    .iter()
                    .map(|&(i, w)| w * f64::from(src_row[i * 3 + c]))
                    .sum();
            }
        }
    });

    let out_row = mid_row;
    let mut samples = vec![0u8; out_row * height as usize];
    exec.for_each_chunk_mut(&mut samples, out_row, |oy, row| {
        for (x, out) in row.iter_mut().enumerate() {
            let v: f64 = ys[oy]
                .iter()
                .map(|&(i, w)| w * mid[i * mid_row + x])
                .sum();
            *out = clamp_u8(v);
        }
    });
    RasterImage::new(width, height, samples).expect("dimensions are consistent")
}

/// Per output index: (source index, weight) pairs, weights summing to one.
fn taps(src: u32, dst: u32) -> Vec<Vec<(usize, f64)>> {
    let scale = f64::from(src) / f64::from(dst);
    let stretch = scale.max(1.0);
    let support = 2.0 * stretch;
    (0..dst)
        .map(|o| {
            let center = (f64::from(o) + 0.5) * scale - 0.5;
            let lo = (center - support).floor() as i64;
            let hi = (center + support).ceil() as i64;
            let mut tap: Vec<(usize, f64)> = Vec::with_capacity((hi - lo + 1) as usize);
            for i in lo..=hi {
                let w = cubic_kernel((i as f64 - center) / stretch);
                if w == 0.0 {
                    continue;
                }
                let idx = i.clamp(0, i64::from(src) - 1) as usize;
                match tap.iter_mut().find(|(j, _)| *j == idx) {
                    Some(entry) => entry.1 += w,
                    None => tap.push((idx, w)),
                }
            }
            let total: f64 = tap.iter().map(|(_, w)| w).sum();
            tap.iter_mut().for_each(|(_, w)| *w /= total);
            tap
        })
        .collect()
}
