use super::MetricsError;
use crate::par::Execution;
use crate::visualcodec::RasterImage;

pub const PSNR_CAP_DB: f64 = 99.0;
pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const SSIM_L: f64 = 255.0;

fn same_dims(a: &RasterImage, b: &RasterImage) -> Result<(), MetricsError> {
    if a.dims() != b.dims() {
        return Err(MetricsError::DimensionMismatch(
            format!("{}x{}", a.width(), a.height()),
            format!("{}x{}", b.width(), b.height()),
        ));
    }
    Ok(())
}

/// PSNR over all three channels; identical images report [`PSNR_CAP_DB`].
pub fn psnr(a: &RasterImage, b: &RasterImage) -> Result<f64, MetricsError> {
    same_dims(a, b)?;
    let sse: u64 = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(&x, &y)| {
            let d = i64::from(x) - i64::from(y);
            (d * d) as u64
        })
        .sum();
    if sse == 0 {
        return Ok(PSNR_CAP_DB);
    }
    let mse = sse as f64 / a.samples().len() as f64;
    Ok((10.0 * (255.0 * 255.0 / mse).log10()).min(PSNR_CAP_DB))
}

pub fn ssim(a: &RasterImage, b: &RasterImage) -> Result<f64, MetricsError> {
    ssim_with(a, b, Execution::default())
}

/// Single-scale SSIM on BT.601 luma with an 11x11 Gaussian window
/// (sigma 1.5), averaged over every window fully inside the image.
pub fn ssim_with(a: &RasterImage, b: &RasterImage, exec: Execution) -> Result<f64, MetricsError> {
    same_dims(a, b)?;
    let (w, h) = (a.width() as usize, a.height() as usize);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricsError::TooSmall {
            width: a.width(),
            height: a.height(),
            window: SSIM_WINDOW,
        });
    }
    let x = luma(a);
    let y = luma(b);
    let kernel = gaussian_kernel();
    let (ow, oh) = (w - SSIM_WINDOW + 1, h - SSIM_WINDOW + 1);

    // Horizontal pass of the five moment maps: [x, y, x^2, y^2, xy].
    let mut horiz = vec![[0f64; 5]; ow * h];
    exec.for_each_chunk_mut(&mut horiz, ow, |row, out| {
        let base = row * w;
        for (ox, acc) in out.iter_mut().enumerate() {
            let mut m = [0f64; 5];
            for (k, &g) in kernel.iter().enumerate() {
                let (p, q) = (x[base + ox + k], y[base + ox + k]);
                m[0] += g * p;
                m[1] += g * q;
                m[2] += g * p * p;
                m[3] += g * q * q;
                m[4] += g * p * q;
            }
            *acc = m;
        }
    });

    let c1 = (SSIM_K1 * SSIM_L).powi(2);
    let c2 = (SSIM_K2 * SSIM_L).powi(2);
    let row_sums: Vec<f64> = exec.map_range(oh, |oy| {
        let mut total = 0.0;
        for ox in 0..ow {
            let mut m = [0f64; 5];
            for (k, &g) in kernel.iter().enumerate() {
                let h = &horiz[(oy + k) * ow + ox];
                for i in 0..5 {
                    m[i] += g * h[i];
                }
            }
            let (mx, my) = (m[0], m[1]);
            let vx = m[2] - mx * mx;
            let vy = m[3] - my * my;
            let cxy = m[4] - mx * my;
            total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
        total
    });
    Ok(row_sums.iter().sum::<f64>() / (ow * oh) as f64)
}

fn luma(image: &RasterImage) -> Vec<f64> {
    image
        .samples()
        .chunks_exact(3)
        .map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]))
        .collect()
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let raw: [f64; SSIM_WINDOW] = std::array::from_fn(|i| {
        let d = i as f64 - half;
        (-(d * d) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
    });
    let sum: f64 = raw.iter().sum();
    raw.map(|v| v / sum)
}

/// Cosine similarity `u.v / (|u| |v|)`.
pub fn embed_cosine(u: &[f64], v: &[f64]) -> Result<f64, MetricsError> {
    if u.len() != v.len() {
        return Err(MetricsError::DimensionMismatch(
            u.len().to_string(),
            v.len().to_string(),
        ));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(MetricsError::ZeroVector);
    }
    Ok(dot / (nu * nv))
}
