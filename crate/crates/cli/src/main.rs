use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use genzip::backends::Backends;
use genzip::container;
use genzip::harness::{
    self, corpus::synthetic_scene, BackendsConfig, HarnessError, Mode, RunConfig, DEFAULT_QUALITY,
    PREPARED_SIZE,
};
use genzip::RasterImage;

#[derive(Parser)]
#[command(name = "genzip", version, about = "Generative image compression toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resize and centre-crop a folder of images into a dataset.
    Prepare {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        dst: PathBuf,
        #[arg(long, default_value_t = PREPARED_SIZE)]
        size: u32,
    },
    /// Encode one image into a .gzc container.
    Encode {
        #[arg(long)]
        image: PathBuf,
        /// Preset name or `name=..;text=N;visual=..;variant=..`.
        #[arg(long)]
        mode: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_QUALITY)]
        quality: u8,
        #[command(flatten)]
        backends: BackendArgs,
    },
    /// Reconstruct images from a .gzc container.
    Decode {
        #[arg(long)]
        container: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
        repeats: u32,
        #[arg(long, default_value_t = 0)]
        seed_base: u64,
        #[command(flatten)]
        backends: BackendArgs,
    },
    /// Run the experiment matrix described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Serve every backend role with its offline mock.
        #[arg(long)]
        mock_backends: bool,
    },
    /// Aggregate results.jsonl into summary and curve CSVs.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to curves.csv next to --out.
        #[arg(long)]
        curves: Option<PathBuf>,
    },
    /// Write procedurally generated scenes, an offline stand-in corpus.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: u64,
        #[arg(long, default_value_t = PREPARED_SIZE)]
        size: u32,
        #[arg(long, default_value_t = 0)]
        seed_base: u64,
    },
}

#[derive(Args)]
struct BackendArgs {
    /// Config file whose backend sections select the services.
    #[arg(long)]
    backend_config: Option<PathBuf>,
    /// Serve every backend role with its offline mock, overriding any config.
    #[arg(long)]
    mock_backends: bool,
}

impl BackendArgs {
    fn build(&self) -> Result<Backends, HarnessError> {
        match (&self.backend_config, self.mock_backends) {
            (_, true) => Ok(Backends::mock()),
            (Some(path), false) => BackendsConfig::from_file(path)?.build(),
            (None, false) => Err(HarnessError::Config(
                "no backends selected: pass --backend-config FILE or --mock-backends".into(),
            )),
        }
    }
}

fn create_dir(path: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(path).map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<ExitCode, HarnessError> {
    match cli.command {
        Command::Prepare { src, dst, size } => {
            let manifest = harness::prepare_dataset_with_size(&src, &dst, size)?;
            println!("prepared {} images into {}", manifest.entries.len(), dst.display());
        }
        Command::Encode {
            image,
            mode,
            out,
            quality,
            backends,
        } => {
            let backends = backends.build()?;
            let mode = Mode::parse(&mode, quality)?;
            let raster = RasterImage::open(&image)
                .map_err(|e| HarnessError::from(e).context(image.display().to_string()))?;
            let encoded = harness::encode(&raster, &mode, &backends)
                .map_err(|e| e.context(format!("{} mode {mode}", image.display())))?;
            let bytes = container::serialize(&encoded.container)?;
            std::fs::write(&out, &bytes).map_err(|e| HarnessError::Io {
                path: out.clone(),
                source: e,
            })?;
            let r = &encoded.rate;
            println!(
                "{}: {} bytes, {:.6} bpp (text {} bits, visual {} bits, overhead {} bits)",
                out.display(),
                bytes.len(),
                r.bpp,
                r.bits_text,
                r.bits_visual,
                r.bits_overhead
            );
        }
        Command::Decode {
            container,
            out_dir,
            repeats,
            seed_base,
            backends,
        } => {
            let backends = backends.build()?;
            let indices: Vec<u32> = (1..=repeats).collect();
            let decoded = harness::decode_file(&container, &backends, &indices, seed_base)?;
            create_dir(&out_dir)?;
            if let Some(caption) = &decoded.caption {
                println!("caption: {caption}");
            }
            let stem = container
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "decoded".into());
            let mut failed = 0;
            for (repeat, outcome) in decoded.reconstructions {
                match outcome {
                    Ok(generated) => {
                        let path = out_dir.join(format!("{stem}_r{repeat}.png"));
                        generated.image.save_png(&path).map_err(|e| HarnessError::Io {
                            path: path.clone(),
                            source: e,
                        })?;
                        println!("{}", path.display());
                    }
                    Err(e) => {
                        eprintln!("error: repeat {repeat}: {e}");
                        failed += 1;
                    }
                }
            }
            if failed > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Run {
            config,
            mock_backends,
        } => {
            let mut config = RunConfig::from_file(&config)?;
            if mock_backends {
                config = config.with_mock_backends();
            }
            let outcome = harness::run_matrix(&config)?;
            println!(
                "{} rows written, {} resumed, {} failures",
                outcome.records_written,
                outcome.records_resumed,
                outcome.failures.len()
            );
            for f in &outcome.failures {
                eprintln!("failed: {} / {}: {}", f.image_id, f.mode_name, f.error);
            }
            println!("results: {}", outcome.results_path.display());
            if !outcome.is_complete() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Report {
            results,
            out,
            curves,
        } => {
            let records = harness::read_results(&results)?;
            let curves = curves.unwrap_or_else(|| {
                out.parent()
                    .unwrap_or(Path::new("."))
                    .join(harness::CURVES_FILE)
            });
            for parent in [out.parent(), curves.parent()].into_iter().flatten() {
                create_dir(parent)?;
            }
            let summary = harness::write_report(&records, &out, &curves)?;
            println!(
                "{} records, {} modes -> {}, {}",
                records.len(),
                summary.per_mode.len(),
                out.display(),
                curves.display()
            );
        }
        Command::Synth {
            out_dir,
            count,
            size,
            seed_base,
        } => {
            create_dir(&out_dir)?;
            for seed in seed_base..seed_base + count {
                let path = out_dir.join(format!("scene{seed:04}.png"));
                synthetic_scene(seed, size, size)
                    .save_png(&path)
                    .map_err(|e| HarnessError::Io {
                        path: path.clone(),
                        source: e,
                    })?;
            }
            println!("wrote {count} scenes to {}", out_dir.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
