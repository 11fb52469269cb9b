//! End-to-end correction: dual illumination passes, then fusion.

use std::time::{Duration, Instant};

use crate::dual::{self, DualResult};
use crate::error::Result;
use crate::fusion::{self, FusionParams, FusionResult};
use crate::illumination::IlluminationParams;
use crate::image::RasterImage;
use crate::solver::SolverSettings;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PipelineParams {
    pub illumination: IlluminationParams,
    pub solver: SolverSettings,
    pub fusion: FusionParams,
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        self.illumination.validate()?;
        self.solver.validate()?;
        self.fusion.validate()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Timings {
    pub forward: Duration,
    pub reverse: Duration,
    /// Wall time of both passes together.
    pub illumination: Duration,
    pub fusion: Duration,
    pub total: Duration,
}

#[derive(Clone, Debug)]
pub struct Corrected {
    pub image: RasterImage,
    pub dual: DualResult,
    pub fusion: FusionResult,
    pub timings: Timings,
}

pub fn correct(img: &RasterImage, params: &PipelineParams) -> Result<Corrected> {
    params.validate()?;
    let start = Instant::now();
    let dual = dual::dual_passes(img, &params.illumination, &params.solver)?;
    let illumination = start.elapsed();
    let fusion_start = Instant::now();
    let fusion = fusion::fuse_detailed(&dual.triplet, &params.fusion)?;
    let fusion_time = fusion_start.elapsed();
    Ok(Corrected {
        image: fusion.image.clone(),
        timings: Timings {
            forward: dual.forward.elapsed,
            reverse: dual.reverse.elapsed,
            illumination,
            fusion: fusion_time,
            total: start.elapsed(),
        },
        dual,
        fusion,
    })
}
