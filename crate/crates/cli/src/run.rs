//! Single-image and directory runs.

use std::fs;
use std::path::{Path, PathBuf};

use dualexp::image::{self, save, save_gray};
use dualexp::pipeline::Corrected;
use dualexp::{correct, SolveStats};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct TimingReport {
    pub forward_s: f64,
    pub reverse_s: f64,
    /// Both passes; they run concurrently, so this can be below the sum.
    pub illumination_s: f64,
    pub fusion_s: f64,
    pub total_s: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SolverReport {
    pub iterations: usize,
    pub residual: f64,
}

impl From<SolveStats> for SolverReport {
    fn from(s: SolveStats) -> Self {
        Self {
            iterations: s.iterations,
            residual: s.residual,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub input: PathBuf,
    pub output: PathBuf,
    pub width: usize,
    pub height: usize,
    pub timings: TimingReport,
    pub forward_solve: SolverReport,
    pub reverse_solve: SolverReport,
    pub pyramid_levels: usize,
    /// Largest excursion of the unclamped fusion outside [0, 1].
    pub fusion_overshoot: f64,
    pub intermediates: Vec<PathBuf>,
    pub config: PipelineConfig,
}

#[derive(Clone, Debug, Serialize)]
pub struct Failure {
    pub input: PathBuf,
    pub exit_code: i32,
    pub error: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct BatchSummary {
    pub processed: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub failures: Vec<Failure>,
}

#[derive(Clone, Debug)]
pub struct BatchOutcome {
    pub reports: Vec<RunReport>,
    pub summary: BatchSummary,
}

impl BatchOutcome {
    /// Zero while at least one image made it through; otherwise the code of
    /// the first failure.
    pub fn exit_code(&self) -> i32 {
        match self.summary.failures.first() {
            Some(f) if self.summary.succeeded == 0 => f.exit_code,
            _ => 0,
        }
    }
}

/// `out.png` with `suffix` becomes `out{suffix}.png` in the same directory.
pub fn sibling(output: &Path, suffix: &str) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    output.with_file_name(format!("{stem}{suffix}.png"))
}

fn write_intermediates(result: &Corrected, output: &Path) -> dualexp::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut gray = |field, suffix: &str| {
        let path = sibling(output, suffix);
        save_gray(field, &path)?;
        written.push(path);
        Ok::<_, dualexp::Error>(())
    };
    gray(&result.dual.forward.illumination, "_lf")?;
    gray(&result.dual.reverse.illumination, "_lr")?;
    for (k, map) in result.fusion.maps.maps.iter().enumerate() {
        gray(map, &format!("_w{k}"))?;
    }
    for (img, suffix) in [
        (&result.dual.triplet.underexposure_corrected, "_under"),
        (&result.dual.triplet.overexposure_corrected, "_over"),
    ] {
        let path = sibling(output, suffix);
        save(img, &path)?;
        written.push(path);
    }
    Ok(written)
}

/// Corrects one image. Nothing is written unless the whole pipeline
/// succeeds.
pub fn run_single(config: &PipelineConfig) -> Result<RunReport, CliError> {
    let params = config.params();
    params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let img = image::load(&config.input)?;
    let result = correct(&img, &params)?;
    save(&result.image, &config.output)?;
    let intermediates = if config.save_intermediates {
        write_intermediates(&result, &config.output)?
    } else {
        Vec::new()
    };
    let t = result.timings;
    Ok(RunReport {
        input: config.input.clone(),
        output: config.output.clone(),
        width: img.width(),
        height: img.height(),
        timings: TimingReport {
            forward_s: t.forward.as_secs_f64(),
            reverse_s: t.reverse.as_secs_f64(),
            illumination_s: t.illumination.as_secs_f64(),
            fusion_s: t.fusion.as_secs_f64(),
            total_s: t.total.as_secs_f64(),
        },
        forward_solve: result.dual.forward.stats.into(),
        reverse_solve: result.dual.reverse.stats.into(),
        pyramid_levels: result.fusion.levels,
        fusion_overshoot: result.fusion.overshoot,
        intermediates,
        config: config.clone(),
    })
}

fn is_supported(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    dualexp::Error::Io {
        path: path.to_path_buf(),
        source,
    }
    .into()
}

/// Corrects every PNG/JPEG directly inside `config.input`, writing
/// `<stem>.png` into `config.output` (created if needed). Per-file failures
/// are recorded and do not stop the batch.
pub fn run_batch(config: &PipelineConfig) -> Result<BatchOutcome, CliError> {
    config.params().validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut inputs: Vec<PathBuf> = fs::read_dir(&config.input)
        .map_err(|e| io_error(&config.input, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| is_supported(p))
        .collect();
    if inputs.is_empty() {
        return Err(CliError::Usage(format!(
            "no PNG or JPEG images in {}",
            config.input.display()
        )));
    }
    inputs.sort();
    fs::create_dir_all(&config.output).map_err(|e| io_error(&config.output, e))?;

    let results: Vec<Result<RunReport, Failure>> = inputs
        .par_iter()
        .map(|input| {
            let stem = input.file_stem().unwrap_or_default().to_string_lossy();
            let one = PipelineConfig {
                input: input.clone(),
                output: config.output.join(format!("{stem}.png")),
                ..config.clone()
            };
            run_single(&one).map_err(|e| Failure {
                input: input.clone(),
                exit_code: e.exit_code(),
                error: e.to_string(),
            })
        })
        .collect();

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(report) => reports.push(report),
            Err(f) => failures.push(f),
        }
    }
    Ok(BatchOutcome {
        summary: BatchSummary {
            processed: inputs.len(),
            succeeded: reports.len(),
            failed: failures.len(),
            failures,
        },
        reports,
    })
}

