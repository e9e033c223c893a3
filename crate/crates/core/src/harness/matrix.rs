use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::pipeline::{decode, encode};
use super::{list_dataset, write_atomic, write_report, HarnessError, Mode, RunConfig};
use crate::backends::Backends;
use crate::container::{self, Container};
use crate::metrics::{bpp, embed_cosine, psnr, ssim, EvalRecord, RECORD_SCHEMA};
use crate::par::Execution;
use crate::prompting::spatial_coverage_score;
use crate::visualcodec::RasterImage;

pub const RESULTS_FILE: &str = "results.jsonl";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const CURVES_FILE: &str = "curves.csv";
pub const CONTAINERS_DIR: &str = "containers";

/// A matrix cell or repeat that produced no record.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub image_id: String,
    pub mode_name: String,
    /// `None` when the whole cell failed before any generation.
    pub repeat_index: Option<u32>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixOutcome {
    pub records_written: usize,
    /// Rows already present from an earlier run.
    pub records_resumed: usize,
    pub failures: Vec<CellFailure>,
    pub results_path: PathBuf,
    pub summary_path: PathBuf,
    pub curves_path: PathBuf,
}

impl MatrixOutcome {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// File holding the container of one `(image, mode)` cell.
pub fn container_path(output_dir: &Path, image_id: &str, mode_name: &str) -> PathBuf {
    output_dir
        .join(CONTAINERS_DIR)
        .join(format!("{image_id}__{mode_name}.gzc"))
}

pub fn run_matrix(config: &RunConfig) -> Result<MatrixOutcome, HarnessError> {
    let backends = config.backends.build()?;
    run_matrix_with(config, &backends)
}

/// Loads existing rows, dropping a torn final line left by an interrupted
/// run. Any other unparsable line is an error.
fn load_existing(path: &Path) -> Result<Vec<EvalRecord>, HarnessError> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(HarnessError::io(path, e)),
    };
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    if complete < bytes.len() {
        log::warn!(
            "{}: dropping {} bytes of an incomplete final row",
            path.display(),
            bytes.len() - complete
        );
        let file = OpenOptions::new()
            .write(true)
            .open(path)
            .map_err(|e| HarnessError::io(path, e))?;
        file.set_len(complete as u64)
            .map_err(|e| HarnessError::io(path, e))?;
    }
    let text = std::str::from_utf8(&bytes[..complete])
        .map_err(|e| HarnessError::Dataset(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l)
                .map_err(|e| HarnessError::Dataset(format!("{}:{}: {e}", path.display(), n + 1)))
        })
        .collect()
}

struct Cell<'a> {
    image_id: &'a str,
    image_path: &'a Path,
    mode: &'a Mode,
    repeats: Vec<u32>,
}

type CellResult = (Vec<EvalRecord>, Vec<CellFailure>);

/// The persisted container when present, otherwise a fresh encode that is
/// then persisted. Returns the container and its encode time.
fn cell_container(
    cell: &Cell,
    image: &RasterImage,
    path: &Path,
    backends: &Backends,
) -> Result<(Container, f64), HarnessError> {
    if path.is_file() {
        let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
        let container = container::deserialize(&bytes)
            .map_err(|e| HarnessError::from(e).context(path.display().to_string()))?;
        return Ok((container, 0.0));
    }
    let start = Instant::now();
    let encoded = encode(image, cell.mode, backends)?;
    let elapsed = start.elapsed().as_secs_f64();
    write_atomic(path, &container::serialize(&encoded.container)?)?;
    Ok((encoded.container, elapsed))
}

fn run_cell(cell: &Cell, config: &RunConfig, backends: &Backends) -> CellResult {
    let fail = |repeat_index: Option<u32>, e: HarnessError| CellFailure {
        image_id: cell.image_id.to_string(),
        mode_name: cell.mode.name.clone(),
        repeat_index,
        error: e.to_string(),
    };
    let context = format!("image {} mode {}", cell.image_id, cell.mode);

    let prepared = (|| {
        let image = RasterImage::open(cell.image_path)
            .map_err(|e| HarnessError::from(e).context(cell.image_path.display().to_string()))?;
        let path = container_path(&config.output_dir, cell.image_id, &cell.mode.name);
        let (container, encode_s) = cell_container(cell, &image, &path, backends)?;
        let reference_embedding = backends
            .embedding
            .as_ref()
            .map(|e| e.embed(&image).map(|v| (v, e.label().to_string())))
            .transpose()?;
        let start = Instant::now();
        let decoded = decode(&container, backends, &cell.repeats, config.seed_base)
            .map_err(|e| e.context(path.display().to_string()))?;
        let decode_s = start.elapsed().as_secs_f64();
        Ok::<_, HarnessError>((image, container, encode_s, reference_embedding, decoded, decode_s))
    })();
    let (image, container, encode_s, reference_embedding, decoded, decode_s) = match prepared {
        Ok(p) => p,
        Err(e) => return (Vec::new(), vec![fail(None, e.context(context))]),
    };

    let rate = bpp(&container);
    let coverage = decoded.caption.as_ref().map(spatial_coverage_score);
    let per_repeat_decode = decode_s / cell.repeats.len().max(1) as f64;
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (repeat_index, outcome) in decoded.reconstructions {
        let start = Instant::now();
        let record = outcome.and_then(|generated| {
            let reconstruction = &generated.image;
            let embed = match (&reference_embedding, &backends.embedding) {
                (Some((reference, label)), Some(backend)) => {
                    let v = backend.embed(reconstruction)?;
                    Some((embed_cosine(reference, &v)?, label.clone()))
                }
                _ => None,
            };
            let external_metrics = backends
                .metrics
                .as_ref()
                .map(|m| m.score(&image, reconstruction))
                .transpose()?;
            Ok(EvalRecord {
                schema: RECORD_SCHEMA,
                image_id: cell.image_id.to_string(),
                mode_name: cell.mode.name.clone(),
                repeat_index,
                bpp: rate.bpp,
                bits_total: rate.bits_total,
                bits_text: rate.bits_text,
                bits_visual: rate.bits_visual,
                bits_overhead: rate.bits_overhead,
                psnr_db: psnr(&image, reconstruction)?,
                ssim: ssim(&image, reconstruction)?,
                embed_cosine: embed.as_ref().map(|(c, _)| *c),
                embed_backend: embed.map(|(_, l)| l),
                external_metrics,
                spatial_coverage: coverage,
                resized_flag: generated.resized,
                wall_time_s: encode_s + per_repeat_decode + start.elapsed().as_secs_f64(),
            })
        });
        match record {
            Ok(r) => records.push(r),
            Err(e) => {
                let e = e.context(format!("{context} repeat {repeat_index}"));
                failures.push(fail(Some(repeat_index), e));
            }
        }
    }
    (records, failures)
}

/// Runs every `(image, mode, repeat)` cell not already in `results.jsonl`,
/// appending rows in a fixed cell order, then rewrites the summary files
/// from all rows. Failing cells are logged, skipped and reported.
pub fn run_matrix_with(config: &RunConfig, backends: &Backends) -> Result<MatrixOutcome, HarnessError> {
    config.validate()?;
    let out = &config.output_dir;
    let containers = out.join(CONTAINERS_DIR);
    std::fs::create_dir_all(&containers).map_err(|e| HarnessError::io(&containers, e))?;
    let images = list_dataset(&config.dataset_dir)?;
    if images.is_empty() {
        return Err(HarnessError::Dataset(format!(
            "{}: no images",
            config.dataset_dir.display()
        )));
    }

    let results_path = out.join(RESULTS_FILE);
    let existing = load_existing(&results_path)?;
    let done: BTreeSet<(String, String, u32)> = existing.iter().map(EvalRecord::key).collect();

    let cells: Vec<Cell> = images
        .iter()
        .flat_map(|(id, path)| config.modes.iter().map(move |mode| (id, path, mode)))
        .filter_map(|(id, path, mode)| {
            let repeats: Vec<u32> = (1..=config.repeats)
                .filter(|r| !done.contains(&(id.clone(), mode.name.clone(), *r)))
                .collect();
            (!repeats.is_empty()).then_some(Cell {
                image_id: id,
                image_path: path,
                mode,
                repeats,
            })
        })
        .collect();

    let mut appender = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&results_path)
        .map_err(|e| HarnessError::io(&results_path, e))?;
    let mut written = Vec::new();
    let mut failures = Vec::new();
    let mut write_error = None;
    Execution::default().ordered_for_each(
        cells.len(),
        config.worker_count(),
        |i| run_cell(&cells[i], config, backends),
        |_, (records, cell_failures)| {
            for f in &cell_failures {
                log::error!("{}/{}: {}", f.image_id, f.mode_name, f.error);
            }
            failures.extend(cell_failures);
            if write_error.is_none() {
                if let Err(e) = append(&mut appender, &records) {
                    write_error = Some(HarnessError::io(&results_path, e));
                }
            }
            written.extend(records);
        },
    );
    if let Some(e) = write_error {
        return Err(e);
    }

    let records_written = written.len();
    let mut all = existing;
    all.extend(written);
    let summary_path = out.join(SUMMARY_FILE);
    let curves_path = out.join(CURVES_FILE);
    if !all.is_empty() {
        write_report(&all, &summary_path, &curves_path)?;
    }
    if !failures.is_empty() {
        log::warn!("{} matrix cells or repeats failed", failures.len());
    }
    Ok(MatrixOutcome {
        records_written,
        records_resumed: all.len() - records_written,
        failures,
        results_path,
        summary_path,
        curves_path,
    })
}

fn append(file: &mut File, records: &[EvalRecord]) -> std::io::Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).map_err(std::io::Error::other)?;
        buf.push(b'\n');
    }
    file.write_all(&buf)?;
    file.flush()
}
