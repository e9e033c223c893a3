use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{write_atomic, HarnessError};
use crate::metrics::{aggregate, EvalRecord, ModeSummary, Summary};

/// Long format: one row per `(mode, metric)`.
pub const SUMMARY_HEADER: [&str; 8] = [
    "mode", "metric", "count", "mean", "stddev", "images", "records", "resized",
];

/// One row per mode, ordered by mean bpp.
pub const CURVES_HEADER: [&str; 7] = [
    "mode",
    "bpp_mean",
    "psnr_db_mean",
    "ssim_mean",
    "embed_cosine_mean",
    "embed_backend",
    "spatial_coverage_mean",
];

/// Parses `results.jsonl`, skipping blank lines.
pub fn read_results(path: &Path) -> Result<Vec<EvalRecord>, HarnessError> {
    let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut records = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| {
            HarnessError::Dataset(format!("{}:{}: {e}", path.display(), n + 1))
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Embedding backend label per mode; `mixed` when records disagree.
fn embed_labels(records: &[EvalRecord]) -> BTreeMap<&str, &str> {
    let mut labels: BTreeMap<&str, &str> = BTreeMap::new();
    for r in records {
        if let Some(label) = r.embed_backend.as_deref() {
            labels
                .entry(r.mode_name.as_str())
                .and_modify(|l| {
                    if *l != label {
                        *l = "mixed";
                    }
                })
                .or_insert(label);
        }
    }
    labels
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>, HarnessError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| HarnessError::Dataset(format!("csv: {e}"));
    writer.write_record(header).map_err(fail)?;
    for row in rows {
        writer.write_record(&row).map_err(fail)?;
    }
    writer
        .into_inner()
        .map_err(|e| HarnessError::Dataset(format!("csv: {e}")))
}

fn summary_rows(summary: &Summary, labels: &BTreeMap<&str, &str>) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for mode in &summary.per_mode {
        for (metric, stats) in &mode.metrics {
            let metric = match (metric.as_str(), labels.get(mode.mode_name.as_str())) {
                ("embed_cosine", Some(label)) => format!("embed_cosine({label})"),
                _ => metric.clone(),
            };
            rows.push(vec![
                mode.mode_name.clone(),
                metric,
                stats.count.to_string(),
                stats.mean.to_string(),
                stats.stddev.to_string(),
                mode.images.to_string(),
                mode.records.to_string(),
                mode.resized.to_string(),
            ]);
        }
    }
    rows
}

fn curve_rows(summary: &Summary, labels: &BTreeMap<&str, &str>) -> Vec<Vec<String>> {
    let mean = |m: &ModeSummary, key: &str| {
        m.metrics
            .get(key)
            .map(|s| s.mean.to_string())
            .unwrap_or_default()
    };
    let mut modes: Vec<&ModeSummary> = summary.per_mode.iter().collect();
    modes.sort_by(|a, b| {
        let bpp = |m: &ModeSummary| m.metrics.get("bpp").map_or(0.0, |s| s.mean);
        bpp(a).total_cmp(&bpp(b)).then_with(|| a.mode_name.cmp(&b.mode_name))
    });
    modes
        .into_iter()
        .map(|m| {
            vec![
                m.mode_name.clone(),
                mean(m, "bpp"),
                mean(m, "psnr_db"),
                mean(m, "ssim"),
                mean(m, "embed_cosine"),
                labels
                    .get(m.mode_name.as_str())
                    .map(|l| l.to_string())
                    .unwrap_or_default(),
                mean(m, "spatial_coverage"),
            ]
        })
        .collect()
}

/// Writes the per-mode summary. Embedding cosines carry their backend label,
/// e.g. `embed_cosine(mock)`, since mock scores are not CLIP scores.
pub fn write_summary_csv(records: &[EvalRecord], path: &Path) -> Result<Summary, HarnessError> {
    let summary = aggregate(records)?;
    let bytes = csv_bytes(&SUMMARY_HEADER, summary_rows(&summary, &embed_labels(records)))?;
    write_atomic(path, &bytes)?;
    Ok(summary)
}

pub fn write_curves_csv(records: &[EvalRecord], path: &Path) -> Result<Summary, HarnessError> {
    let summary = aggregate(records)?;
    let bytes = csv_bytes(&CURVES_HEADER, curve_rows(&summary, &embed_labels(records)))?;
    write_atomic(path, &bytes)?;
    Ok(summary)
}

/// Both report files from one aggregation.
pub fn write_report(
    records: &[EvalRecord],
    summary_path: &Path,
    curves_path: &Path,
) -> Result<Summary, HarnessError> {
    let summary = aggregate(records)?;
    let labels = embed_labels(records);
    write_atomic(summary_path, &csv_bytes(&SUMMARY_HEADER, summary_rows(&summary, &labels))?)?;
    write_atomic(curves_path, &csv_bytes(&CURVES_HEADER, curve_rows(&summary, &labels))?)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::RECORD_SCHEMA;

    fn record(image: &str, mode: &str, repeat: u32, bpp: f64) -> EvalRecord {
        EvalRecord {
            schema: RECORD_SCHEMA,
            image_id: image.into(),
            mode_name: mode.into(),
            repeat_index: repeat,
            bpp,
            bits_total: 8,
            bits_text: 0,
            bits_visual: 0,
            bits_overhead: 8,
            psnr_db: 20.0,
            ssim: 0.5,
            embed_cosine: Some(0.75),
            embed_backend: Some("mock".into()),
            external_metrics: None,
            spatial_coverage: None,
            resized_flag: false,
            wall_time_s: 0.1,
        }
    }

    #[test]
    fn report_files_have_documented_columns() {
        let dir = tempfile::tempdir().unwrap();
        let records = vec![
            record("a", "hi", 1, 0.004),
            record("a", "lo", 1, 0.001),
            record("b", "lo", 1, 0.003),
        ];
        let (s, c) = (dir.path().join("summary.csv"), dir.path().join("curves.csv"));
        write_report(&records, &s, &c).unwrap();

        let summary = std::fs::read_to_string(&s).unwrap();
        let mut lines = summary.lines();
        assert_eq!(lines.next().unwrap(), SUMMARY_HEADER.join(","));
        let lo_bpp: Vec<&str> = summary
            .lines()
            .find(|l| l.starts_with("lo,bpp,"))
            .unwrap()
            .split(',')
            .collect();
        assert_eq!(lo_bpp[2..4], ["2", "0.002"]);
        assert!((lo_bpp[4].parse::<f64>().unwrap() - 2e-6f64.sqrt()).abs() < 1e-15);
        assert_eq!(lo_bpp[5..], ["2", "2", "0"]);
        assert!(summary.contains("lo,embed_cosine(mock),2,0.75,0,2,2,0"));

        let curves = std::fs::read_to_string(&c).unwrap();
        let rows: Vec<&str> = curves.lines().collect();
        assert_eq!(rows[0], CURVES_HEADER.join(","));
        assert_eq!(rows[1], "lo,0.002,20,0.5,0.75,mock,");
        assert!(rows[2].starts_with("hi,0.004,"));
    }

    #[test]
    fn results_parse_errors_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.jsonl");
        let line = serde_json::to_string(&record("a", "m", 1, 0.1)).unwrap();
        std::fs::write(&path, format!("{line}\n\n{{oops\n")).unwrap();
        let err = read_results(&path).unwrap_err().to_string();
        assert!(err.contains("results.jsonl:3"), "{err}");
    }
}
