//! Command-line flags and the validated configuration they produce.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use dualexp::fusion::FusionMode;
use dualexp::{Affinity, FusionParams, IlluminationParams, PipelineParams, PyramidDepth, SolverSettings};
use serde::Serialize;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionModeArg {
    /// Binary maps keeping the best image per pixel.
    #[value(name = "wta", alias = "winner-take-all")]
    WinnerTakeAll,
    /// Quality maps normalized to sum to one.
    Normalized,
}

#[derive(Parser, Debug)]
#[command(
    name = "dualexp",
    version,
    allow_negative_numbers = true,
    about = "Corrects under- and overexposed regions of photos",
    long_about = "Estimates a smooth illumination map for the image and for its inverse, \
                  corrects both, and fuses the two corrections with the original.\n\n\
                  With a directory as --input every PNG/JPEG inside is processed and written \
                  under --output with the same stem and a .png extension."
)]
struct Args {
    /// Input image, or a directory of images.
    #[arg(long)]
    input: PathBuf,
    /// Output PNG, or the output directory in batch mode.
    #[arg(long)]
    output: PathBuf,
    /// Smoothness strength of the illumination map.
    #[arg(long, default_value_t = 0.15, value_parser = non_negative)]
    lambda: f64,
    /// Illumination exponent, in (0, 1].
    #[arg(long, default_value_t = 0.6, value_parser = unit_exponent)]
    gamma: f64,
    /// Spatial spread of the texture window, in pixels.
    #[arg(long, default_value_t = 3.0, value_parser = positive)]
    sigma: f64,
    /// Side of the texture window in pixels; odd and at least 3.
    #[arg(long, default_value_t = 15, value_parser = odd_window)]
    window: usize,
    /// Stabilizer in the weight denominators.
    #[arg(long, default_value_t = 1e-3, value_parser = positive)]
    eps: f64,
    /// Pyramid depth: "auto" or a level count.
    #[arg(long, default_value = "auto", value_parser = pyramid_depth)]
    levels: PyramidDepth,
    /// How quality maps become blend weights.
    #[arg(long, value_enum, default_value = "wta")]
    fusion_mode: FusionModeArg,
    /// Also write illuminations, the two corrections and the fusion maps.
    #[arg(long)]
    save_intermediates: bool,
    /// Relative residual at which the linear solver stops.
    #[arg(long, default_value_t = 1e-5, value_parser = positive)]
    cg_tol: f64,
    /// Iteration budget of the linear solver.
    #[arg(long, default_value_t = 5000, value_parser = clap::value_parser!(u64).range(1..))]
    cg_max_iter: u64,
    /// Use squared pixel distance in the texture window Gaussian.
    #[arg(long)]
    squared_affinity: bool,
}

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err("must be finite".into())
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    number(s).and_then(|v| if v >= 0.0 { Ok(v) } else { Err("must be >= 0".into()) })
}

fn positive(s: &str) -> Result<f64, String> {
    number(s).and_then(|v| if v > 0.0 { Ok(v) } else { Err("must be > 0".into()) })
}

fn unit_exponent(s: &str) -> Result<f64, String> {
    number(s).and_then(|v| {
        if v > 0.0 && v <= 1.0 {
            Ok(v)
        } else {
            Err("must lie in (0, 1]".into())
        }
    })
}

fn odd_window(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|_| format!("`{s}` is not a positive integer"))?;
    if v >= 3 && v % 2 == 1 {
        Ok(v)
    } else {
        Err("must be odd and at least 3".into())
    }
}

fn pyramid_depth(s: &str) -> Result<PyramidDepth, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(PyramidDepth::Auto);
    }
    match s.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(PyramidDepth::Levels(n)),
        _ => Err("must be `auto` or a positive integer".into()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    pub lambda: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub window: usize,
    pub eps: f64,
    /// `None` means automatic depth.
    pub levels: Option<usize>,
    pub fusion_mode: FusionModeArg,
    pub save_intermediates: bool,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub squared_affinity: bool,
}

impl PipelineConfig {
    /// Defaults for everything except the paths.
    pub fn new(input: impl Into<PathBuf>, output: impl Into<PathBuf>) -> Self {
        let p = PipelineParams::default();
        Self {
            input: input.into(),
            output: output.into(),
            lambda: p.illumination.lambda,
            gamma: p.illumination.gamma,
            sigma: p.illumination.sigma,
            window: p.illumination.window,
            eps: p.illumination.eps,
            levels: None,
            fusion_mode: FusionModeArg::WinnerTakeAll,
            save_intermediates: false,
            cg_tol: p.solver.tolerance,
            cg_max_iter: p.solver.max_iterations,
            squared_affinity: false,
        }
    }

    pub fn params(&self) -> PipelineParams {
        PipelineParams {
            illumination: IlluminationParams {
                lambda: self.lambda,
                gamma: self.gamma,
                sigma: self.sigma,
                window: self.window,
                eps: self.eps,
                affinity: if self.squared_affinity {
                    Affinity::SquaredEuclidean
                } else {
                    Affinity::Euclidean
                },
                ..Default::default()
            },
            solver: SolverSettings {
                tolerance: self.cg_tol,
                max_iterations: self.cg_max_iter,
                ..Default::default()
            },
            fusion: FusionParams {
                levels: self.levels.map_or(PyramidDepth::Auto, PyramidDepth::Levels),
                mode: match self.fusion_mode {
                    FusionModeArg::WinnerTakeAll => FusionMode::WinnerTakeAll,
                    FusionModeArg::Normalized => FusionMode::Normalized,
                },
                ..Default::default()
            },
        }
    }
}

/// Parses `argv` (program name first).
///
/// Help and version requests come back as [`CliError::Info`] so the caller
/// can print them and exit successfully.
pub fn parse_args<I, T>(argv: I) -> Result<PipelineConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = Args::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => CliError::Info(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    })?;
    let config = PipelineConfig {
        input: args.input,
        output: args.output,
        lambda: args.lambda,
        gamma: args.gamma,
        sigma: args.sigma,
        window: args.window,
        eps: args.eps,
        levels: match args.levels {
            PyramidDepth::Auto => None,
            PyramidDepth::Levels(n) => Some(n),
        },
        fusion_mode: args.fusion_mode,
        save_intermediates: args.save_intermediates,
        cg_tol: args.cg_tol,
        cg_max_iter: usize::try_from(args.cg_max_iter).unwrap_or(usize::MAX),
        squared_affinity: args.squared_affinity,
    };
    config.params().validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}
