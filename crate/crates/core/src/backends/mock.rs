//! Deterministic stand-ins for every backend role.
//!
//! * caption: starts with `mock caption {h}` (`h` = first 8 hex digits of the
//!   image hash), then describes a 3x3 grid of the image in raster order
//!   (with position words only when the instruction asks for raster order),
//!   then pads with hash-chosen detail words up to the word budget.
//! * generate: bicubic upsample of the condition image when present,
//!   otherwise a flat image coloured by the first three octets of the SHA-256
//!   of the prompt. Seeds are ignored.
//! * embed: L2-normalized 8-bin-per-channel colour histogram (24 values).
//! * external codec: echo; the payload is the PNG of the image.

use sha2::{Digest, Sha256};

use super::{
    normalize, BackendError, CaptionBackend, EmbeddingBackend, Generated, GenerationBackend,
    GenerationRequest,
};
use crate::prompting::RASTER_SCAN_CLAUSE;
use crate::textcodec::{truncate_to_budget, Caption};
use crate::visualcodec::{upsample_to, CodecError, RasterImage, RateTarget, VisualCodec};

pub const MOCK_EMBED_DIM: usize = 24;

#[derive(Debug, Clone, Copy, Default)]
pub struct MockBackend;

const POSITIONS: [&str; 9] = [
    "top left",
    "top center",
    "top right",
    "middle left",
    "center",
    "middle right",
    "bottom left",
    "bottom center",
    "bottom right",
];

const PALETTE: [(&str, [u8; 3]); 16] = [
    ("black", [20, 20, 20]),
    ("white", [240, 240, 240]),
    ("gray", [128, 128, 128]),
    ("red", [200, 40, 40]),
    ("orange", [230, 130, 40]),
    ("yellow", [230, 210, 60]),
    ("green", [60, 150, 60]),
    ("olive", [110, 120, 50]),
    ("teal", [40, 130, 130]),
    ("cyan", [90, 200, 220]),
    ("blue", [50, 90, 200]),
    ("navy", [25, 35, 90]),
    ("purple", [120, 60, 160]),
    ("pink", [230, 140, 170]),
    ("brown", [110, 70, 40]),
    ("beige", [210, 190, 150]),
];

const NOUNS: [&str; 48] = [
    "sky", "clouds", "hills", "trees", "grass", "water", "river", "road", "wall", "roof",
    "window", "door", "fence", "field", "rocks", "sand", "shore", "waves", "bridge", "tower",
    "house", "street", "car", "boat", "person", "dog", "bird", "flowers", "bushes", "path",
    "mountain", "forest", "lake", "building", "bench", "lamp", "sign", "table", "shadow",
    "reflection", "garden", "railing", "stairs", "cliff", "snow", "leaves", "pole", "tiles",
];

const DETAILS: [&str; 40] = [
    "soft", "sharp", "textured", "smooth", "weathered", "glossy", "matte", "wooden", "stone",
    "metal", "distant", "nearby", "tall", "low", "narrow", "wide", "curved", "straight",
    "scattered", "dense", "sunlit", "shaded", "hazy", "crisp", "faded", "vivid", "warm", "cool",
    "rough", "grainy", "layered", "patterned", "striped", "rounded", "angular", "thin", "thick",
    "bright", "dim", "tiny",
];

/// Byte stream derived from a seed by chained SHA-256.
struct HashStream {
    seed: [u8; 32],
    counter: u32,
    buf: [u8; 32],
    pos: usize,
}

impl HashStream {
    fn new(seed: [u8; 32]) -> Self {
        Self {
            seed,
            counter: 0,
            buf: [0; 32],
            pos: 32,
        }
    }

    fn next_byte(&mut self) -> u8 {
        if self.pos == 32 {
            let mut h = Sha256::new();
            h.update(self.seed);
            h.update(self.counter.to_be_bytes());
            self.buf = h.finalize().into();
            self.counter += 1;
            self.pos = 0;
        }
        self.pos += 1;
        self.buf[self.pos - 1]
    }

    fn pick<'a>(&mut self, words: &[&'a str]) -> &'a str {
        words[usize::from(self.next_byte()) % words.len()]
    }
}

fn nearest_color(rgb: [f64; 3]) -> &'static str {
    PALETTE
        .iter()
        .min_by(|(_, a), (_, b)| {
            let d = |c: &[u8; 3]| -> f64 {
                (0..3).map(|i| (rgb[i] - f64::from(c[i])).powi(2)).sum()
            };
            d(a).total_cmp(&d(b))
        })
        .map(|(name, _)| *name)
        .expect("palette is not empty")
}

fn cell_means(image: &RasterImage) -> [[f64; 3]; 9] {
    let (w, h) = image.dims();
    std::array::from_fn(|cell| {
        let (cx, cy) = ((cell % 3) as u32, (cell / 3) as u32);
        let (x0, x1) = (cx * w / 3, ((cx + 1) * w / 3).max(cx * w / 3 + 1));
        let (y0, y1) = (cy * h / 3, ((cy + 1) * h / 3).max(cy * h / 3 + 1));
        let mut sum = [0f64; 3];
        let mut n = 0f64;
        for y in y0..y1.min(h) {
            for x in x0..x1.min(w) {
                let p = image.pixel(x, y);
                for c in 0..3 {
                    sum[c] += f64::from(p[c]);
                }
                n += 1.0;
            }
        }
        sum.map(|s| s / n.max(1.0))
    })
}

/// The mock captioner's output before budget enforcement by the caller.
pub fn mock_caption_text(image: &RasterImage, instruction: &str, budget: usize) -> String {
    let hash = image.content_hash();
    let mut words: Vec<String> = vec![
        "mock".into(),
        "caption".into(),
        hex::encode(&hash[..4]),
    ];
    let structured = instruction.contains(RASTER_SCAN_CLAUSE);
    let mut stream = HashStream::new(hash);
    for (cell, mean) in cell_means(image).iter().enumerate() {
        let luma = 0.299 * mean[0] + 0.587 * mean[1] + 0.114 * mean[2];
        let tone = match luma {
            l if l < 70.0 => "dark",
            l if l > 180.0 => "light",
            _ => "muted",
        };
        let mut phrase = Vec::new();
        if structured {
            phrase.extend(POSITIONS[cell].split(' ').map(str::to_string));
        }
        phrase.push(tone.to_string());
        phrase.push(nearest_color(*mean).to_string());
        phrase.push(format!("{},", stream.pick(&NOUNS)));
        words.extend(phrase);
    }
    while words.len() < budget {
        words.push(stream.pick(&DETAILS).to_string());
        words.push(format!("{},", stream.pick(&NOUNS)));
    }
    words.truncate(budget.max(1));
    let mut text = words.join(" ");
    if text.ends_with(',') {
        text.pop();
        text.push('.');
    }
    text
}

/// L2-normalized 8-bin-per-channel histogram.
pub fn mock_embedding(image: &RasterImage) -> Vec<f64> {
    let mut hist = vec![0f64; MOCK_EMBED_DIM];
    for px in image.samples().chunks_exact(3) {
        for c in 0..3 {
            hist[c * 8 + usize::from(px[c] / 32)] += 1.0;
        }
    }
    normalize(hist).expect("a non-empty image fills at least one bin")
}

impl CaptionBackend for MockBackend {
    fn caption(
        &self,
        image: &RasterImage,
        instruction: &str,
        budget: usize,
    ) -> Result<Caption, BackendError> {
        let caption = Caption::sanitized(&mock_caption_text(image, instruction, budget));
        Ok(truncate_to_budget(&caption, budget.max(1)).expect("budget is at least 1"))
    }
}

impl GenerationBackend for MockBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<Generated, BackendError> {
        request.validate()?;
        let (w, h) = (request.target_width, request.target_height);
        let image = match (&request.condition_image, &request.prompt_text) {
            (Some(condition), _) => upsample_to(condition, w, h),
            (None, Some(prompt)) => {
                let digest: [u8; 32] = Sha256::digest(prompt.as_bytes()).into();
                RasterImage::filled(w, h, [digest[0], digest[1], digest[2]])
            }
            (None, None) => unreachable!("validated above"),
        };
        Ok(Generated {
            image,
            resized: false,
        })
    }
}

impl EmbeddingBackend for MockBackend {
    fn embed(&self, image: &RasterImage) -> Result<Vec<f64>, BackendError> {
        Ok(mock_embedding(image))
    }

    fn label(&self) -> &str {
        "mock"
    }
}

impl VisualCodec for MockBackend {
    fn encode(&self, image: &RasterImage, _target: &RateTarget) -> Result<Vec<u8>, CodecError> {
        Ok(image.to_png())
    }

    fn decode(&self, data: &[u8]) -> Result<RasterImage, CodecError> {
        RasterImage::from_png(data)
    }
}
