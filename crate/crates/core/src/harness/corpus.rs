//! Procedural outdoor scenes used as an offline stand-in corpus.
//!
//! Each scene has a graded sky with a sun, a ridge line, textured ground, and
//! a handful of buildings and trees. Everything is a pure function of the
//! seed, so fixtures regenerate bit-identically.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::visualcodec::RasterImage;

type Rgb = [f64; 3];

fn lerp(a: Rgb, b: Rgb, t: f64) -> Rgb {
    std::array::from_fn(|i| a[i] + (b[i] - a[i]) * t)
}

fn rand_color(rng: &mut ChaCha8Rng, lo: Rgb, hi: Rgb) -> Rgb {
    std::array::from_fn(|i| rng.gen_range(lo[i]..=hi[i]))
}

/// Multi-octave bilinear value noise; each octave lies in `[-weight, weight]`
/// and the lattice wraps, so any non-negative coordinate is valid.
struct ValueNoise {
    octaves: Vec<(f64, usize, usize, Vec<f64>)>,
}

impl ValueNoise {
    fn new(rng: &mut ChaCha8Rng, width: u32, height: u32, cells: &[(f64, f64)]) -> Self {
        let octaves = cells
            .iter()
            .map(|&(cell, weight)| {
                let cols = (f64::from(width) / cell).ceil() as usize + 2;
                let rows = (f64::from(height) / cell).ceil() as usize + 2;
                let grid = (0..cols * rows)
                    .map(|_| weight * rng.gen_range(-1.0..=1.0))
                    .collect();
                (cell, cols, rows, grid)
            })
            .collect();
        Self { octaves }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        self.octaves
            .iter()
            .map(|(cell, cols, rows, grid)| {
                let (gx, gy) = (x / cell, y / cell);
                let (ix, iy) = (gx.floor() as usize, gy.floor() as usize);
                let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
                let (tx, ty) = (smooth(gx.fract()), smooth(gy.fract()));
                let v = |cx: usize, cy: usize| grid[(cy % rows) * cols + cx % cols];
                let top = v(ix, iy) + (v(ix + 1, iy) - v(ix, iy)) * tx;
                let bottom = v(ix, iy + 1) + (v(ix + 1, iy + 1) - v(ix, iy + 1)) * tx;
                top + (bottom - top) * ty
            })
            .sum()
    }
}

enum Shape {
    Rect {
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
        color: Rgb,
    },
    Ellipse {
        cx: f64,
        cy: f64,
        rx: f64,
        ry: f64,
        color: Rgb,
    },
}

impl Shape {
    fn color_at(&self, x: f64, y: f64) -> Option<Rgb> {
        match *self {
            Shape::Rect {
                x0,
                y0,
                x1,
                y1,
                color,
            } => (x >= x0 && x < x1 && y >= y0 && y < y1).then_some(color),
            Shape::Ellipse {
                cx,
                cy,
                rx,
                ry,
                color,
            } => {
                let d = ((x - cx) / rx).powi(2) + ((y - cy) / ry).powi(2);
                (d <= 1.0).then(|| color.map(|c| c * (1.0 - 0.25 * d)))
            }
        }
    }
}

/// A deterministic outdoor scene of the given size.
pub fn synthetic_scene(seed: u64, width: u32, height: u32) -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (f64::from(width), f64::from(height));
    let unit = w.min(h) / 1024.0;

    let sky_top = rand_color(&mut rng, [20.0, 60.0, 120.0], [110.0, 160.0, 235.0]);
    let sky_low = rand_color(&mut rng, [150.0, 150.0, 150.0], [250.0, 220.0, 210.0]);
    let horizon = h * rng.gen_range(0.38..0.6);
    let ridge_color = rand_color(&mut rng, [50.0, 60.0, 60.0], [120.0, 130.0, 140.0]);
    let ground_near = rand_color(&mut rng, [40.0, 60.0, 20.0], [170.0, 150.0, 90.0]);
    let ground_far = rand_color(&mut rng, [70.0, 100.0, 40.0], [200.0, 190.0, 130.0]);
    let ridge: Vec<(f64, f64, f64)> = (0..4)
        .map(|k| {
            (
                rng.gen_range(1.0..4.0) * (k + 1) as f64,
                rng.gen_range(0.0..std::f64::consts::TAU),
                h * rng.gen_range(0.01..0.06) / (k + 1) as f64,
            )
        })
        .collect();

    let mut shapes = Vec::new();
    let sun_r = rng.gen_range(30.0..70.0) * unit;
    shapes.push(Shape::Ellipse {
        cx: rng.gen_range(0.1..0.9) * w,
        cy: rng.gen_range(0.08..0.3) * horizon,
        rx: sun_r,
        ry: sun_r,
        color: rand_color(&mut rng, [230.0, 200.0, 120.0], [255.0, 250.0, 220.0]),
    });
    for _ in 0..rng.gen_range(2..6) {
        let bw = rng.gen_range(60.0..220.0) * unit;
        let bh = rng.gen_range(80.0..360.0) * unit;
        let x0 = rng.gen_range(0.0..w - bw);
        let base = horizon + rng.gen_range(0.0..0.15) * h;
        shapes.push(Shape::Rect {
            x0,
            y0: base - bh,
            x1: x0 + bw,
            y1: base,
            color: rand_color(&mut rng, [60.0, 50.0, 50.0], [220.0, 200.0, 190.0]),
        });
    }
    for _ in 0..rng.gen_range(2..7) {
        let r = rng.gen_range(40.0..120.0) * unit;
        shapes.push(Shape::Ellipse {
            cx: rng.gen_range(0.0..w),
            cy: horizon + rng.gen_range(0.05..0.4) * h,
            rx: r,
            ry: r * rng.gen_range(1.0..1.6),
            color: rand_color(&mut rng, [20.0, 60.0, 20.0], [90.0, 150.0, 70.0]),
        });
    }

    let texture = ValueNoise::new(
        &mut rng,
        width,
        height,
        &[(96.0 * unit, 14.0), (24.0 * unit, 7.0), (6.0 * unit, 4.0)],
    );
    let haze = ValueNoise::new(&mut rng, width, height, &[(160.0 * unit, 6.0)]);

    RasterImage::from_fn(width, height, |px, py| {
        let (x, y) = (f64::from(px) + 0.5, f64::from(py) + 0.5);
        let ridge_y = horizon
            - h * 0.08
            - ridge
                .iter()
                .map(|(f, p, a)| a * (f * x / w * std::f64::consts::TAU + p).sin())
                .sum::<f64>();
        let mut color = if y < ridge_y {
            let c = lerp(sky_top, sky_low, (y / ridge_y).clamp(0.0, 1.0));
            let n = haze.at(x, y);
            c.map(|v| v + n)
        } else if y < horizon {
            let n = texture.at(x, y) * 0.6;
            ridge_color.map(|v| v + n)
        } else {
            let t = ((y - horizon) / (h - horizon)).clamp(0.0, 1.0);
            let n = texture.at(x, y);
            lerp(ground_far, ground_near, t).map(|v| v + n)
        };
        for shape in &shapes {
            if let Some(c) = shape.color_at(x, y) {
                let n = texture.at(x + 311.0, y + 173.0) * 0.5;
                color = c.map(|v| v + n);
            }
        }
        color.map(|v| v.round().clamp(0.0, 255.0) as u8)
    })
}
