use std::collections::BTreeMap;

use super::{EvalRecord, MetricsError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricStats {
    pub count: usize,
    pub mean: f64,
    /// Sample (n - 1) standard deviation; 0 when `count == 1`.
    pub stddev: f64,
}

impl MetricStats {
    fn of(values: &[f64]) -> Self {
        let count = values.len();
        let mean = values.iter().sum::<f64>() / count as f64;
        let stddev = if count < 2 {
            0.0
        } else {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (count - 1) as f64).sqrt()
        };
        Self {
            count,
            mean,
            stddev,
        }
    }
}

/// Means over the repeats of one image under one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageModeMean {
    pub image_id: String,
    pub mode_name: String,
    pub repeats: usize,
    pub metrics: BTreeMap<String, MetricStats>,
}

/// Per-mode statistics over the per-image means.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSummary {
    pub mode_name: String,
    pub images: usize,
    pub records: usize,
    pub resized: usize,
    pub metrics: BTreeMap<String, MetricStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub per_image_mode: Vec<ImageModeMean>,
    pub per_mode: Vec<ModeSummary>,
}

fn metric_values(r: &EvalRecord) -> Vec<(String, f64)> {
    let mut out = vec![
        ("bpp".to_string(), r.bpp),
        ("psnr_db".to_string(), r.psnr_db),
        ("ssim".to_string(), r.ssim),
    ];
    if let Some(c) = r.embed_cosine {
        out.push(("embed_cosine".to_string(), c));
    }
    if let Some(s) = r.spatial_coverage {
        out.push(("spatial_coverage".to_string(), s));
    }
    if let Some(ext) = &r.external_metrics {
        out.extend(ext.iter().map(|(k, v)| (format!("ext:{k}"), *v)));
    }
    out
}

/// Groups records by `(image, mode)`, averages repeats, then averages the
/// per-image means for each mode. Output order depends only on ids, never
/// on input order.
pub fn aggregate(records: &[EvalRecord]) -> Result<Summary, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut groups: BTreeMap<(&str, &str), Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.mode_name.as_str(), r.image_id.as_str()))
            .or_default()
            .push(r);
    }

    let mut per_image_mode = Vec::with_capacity(groups.len());
    for ((mode, image), mut rows) in groups {
        rows.sort_by(|a, b| {
            a.repeat_index
                .cmp(&b.repeat_index)
                .then(a.wall_time_s.total_cmp(&b.wall_time_s))
        });
        let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for r in &rows {
            for (name, v) in metric_values(r) {
                values.entry(name).or_default().push(v);
            }
        }
        per_image_mode.push(ImageModeMean {
            image_id: image.to_string(),
            mode_name: mode.to_string(),
            repeats: rows.len(),
            metrics: values
                .iter()
                .map(|(k, v)| (k.clone(), MetricStats::of(v)))
                .collect(),
        });
    }

    let mut per_mode = Vec::new();
    for chunk in per_image_mode.chunk_by(|a, b| a.mode_name == b.mode_name) {
        let mode_name = chunk[0].mode_name.clone();
        let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for m in chunk {
            for (name, stats) in &m.metrics {
                values.entry(name.clone()).or_default().push(stats.mean);
            }
        }
        let in_mode = records.iter().filter(|r| r.mode_name == mode_name);
        per_mode.push(ModeSummary {
            images: chunk.len(),
            records: in_mode.clone().count(),
            resized: in_mode.filter(|r| r.resized_flag).count(),
            metrics: values
                .iter()
                .map(|(k, v)| (k.clone(), MetricStats::of(v)))
                .collect(),
            mode_name,
        });
    }
    Ok(Summary {
        per_image_mode,
        per_mode,
    })
}
