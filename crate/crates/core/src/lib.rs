//! Automatic exposure correction for under-, over- and mixed-exposure
//! photographs.
//!
//! The input is corrected twice: once by dividing by a smoothed
//! illumination estimate (brightening dark regions), and once the same way
//! on the inverted image (darkening blown regions after re-inversion). The
//! two corrections and the original are then merged with winner-take-all
//! exposure fusion.
//!
//! ```no_run
//! use dualexp::{image, pipeline::{correct, PipelineParams}};
//!
//! let img = image::load("input.jpg")?;
//! let out = correct(&img, &PipelineParams::default())?;
//! image::save(&out.image, "output.png")?;
//! # Ok::<(), dualexp::Error>(())
//! ```

pub mod dual;
pub mod error;
pub mod fusion;
pub mod illumination;
pub mod image;
pub mod pipeline;
pub mod pyramid;
pub mod scenes;
pub mod solver;

pub use dual::{correct_overexposure, correct_underexposure, make_triplet, ExposureTriplet};
pub use error::{Error, Result};
pub use fusion::{fuse, FusionMode, FusionParams, PyramidDepth, QualityMaps};
pub use illumination::{Affinity, IlluminationParams};
pub use image::{RasterImage, ScalarField};
pub use pipeline::{correct, PipelineParams};
pub use pyramid::ImagePyramid;
pub use solver::{SolveStats, SolverSettings, SparseSystem};
