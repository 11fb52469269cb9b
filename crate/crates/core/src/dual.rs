//! Forward and reverse illumination passes.
//!
//! Correcting underexposure brightens through a Retinex division. An
//! overexposed region becomes underexposed once the image is inverted, so
//! the same correction applied to `1 - I` and inverted back darkens it.

use std::time::{Duration, Instant};

use crate::error::Result;
use crate::illumination::{self, IlluminationParams};
use crate::image::{invert, RasterImage, ScalarField};
use crate::solver::{SolveStats, SolverSettings};

/// The fusion input sequence `[under-corrected, over-corrected, original]`.
#[derive(Clone, Debug)]
pub struct ExposureTriplet {
    pub underexposure_corrected: RasterImage,
    pub overexposure_corrected: RasterImage,
    pub original: RasterImage,
}

impl ExposureTriplet {
    /// Images in fusion order; the order decides winner-take-all ties.
    pub fn sequence(&self) -> [&RasterImage; 3] {
        [
            &self.underexposure_corrected,
            &self.overexposure_corrected,
            &self.original,
        ]
    }
}

/// One correction pass with its illumination and bookkeeping.
#[derive(Clone, Debug)]
pub struct Pass {
    pub corrected: RasterImage,
    /// Illumination of the image the pass ran on (the inverted input for the
    /// reverse pass).
    pub illumination: ScalarField,
    pub stats: SolveStats,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct DualResult {
    pub triplet: ExposureTriplet,
    pub forward: Pass,
    pub reverse: Pass,
}

fn forward_pass(img: &RasterImage, params: &IlluminationParams, settings: &SolverSettings) -> Result<Pass> {
    let start = Instant::now();
    let solution = illumination::estimate(img, params, settings)?;
    let corrected = illumination::recover(img, &solution.field, params.gamma, params.illum_floor);
    Ok(Pass {
        corrected,
        illumination: solution.field,
        stats: solution.stats,
        elapsed: start.elapsed(),
    })
}

fn reverse_pass(img: &RasterImage, params: &IlluminationParams, settings: &SolverSettings) -> Result<Pass> {
    let start = Instant::now();
    let mut pass = forward_pass(&invert(img), params, settings)?;
    pass.corrected = invert(&pass.corrected);
    pass.elapsed = start.elapsed();
    Ok(pass)
}

/// Brightens underexposed regions. Never darkens a pixel.
pub fn correct_underexposure(
    img: &RasterImage,
    params: &IlluminationParams,
    settings: &SolverSettings,
) -> Result<RasterImage> {
    forward_pass(img, params, settings).map(|p| p.corrected)
}

/// Darkens overexposed regions: `invert(correct_underexposure(invert(img)))`.
pub fn correct_overexposure(
    img: &RasterImage,
    params: &IlluminationParams,
    settings: &SolverSettings,
) -> Result<RasterImage> {
    reverse_pass(img, params, settings).map(|p| p.corrected)
}

/// Runs both passes (concurrently) and keeps everything they produced.
pub fn dual_passes(
    img: &RasterImage,
    params: &IlluminationParams,
    settings: &SolverSettings,
) -> Result<DualResult> {
    let (forward, reverse) = rayon::join(
        || forward_pass(img, params, settings),
        || reverse_pass(img, params, settings),
    );
    let (forward, reverse) = (forward?, reverse?);
    Ok(DualResult {
        triplet: ExposureTriplet {
            underexposure_corrected: forward.corrected.clone(),
            overexposure_corrected: reverse.corrected.clone(),
            original: img.clone(),
        },
        forward,
        reverse,
    })
}

pub fn make_triplet(
    img: &RasterImage,
    params: &IlluminationParams,
    settings: &SolverSettings,
) -> Result<ExposureTriplet> {
    dual_passes(img, params, settings).map(|d| d.triplet)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> (IlluminationParams, SolverSettings) {
        (IlluminationParams::default(), SolverSettings::default())
    }

    fn constant(v: f64) -> RasterImage {
        RasterImage::filled(9, 7, [v; 3])
    }

    #[test]
    fn constant_closed_forms() {
        let (p, s) = defaults();
        let under = correct_underexposure(&constant(0.25), &p, &s).unwrap();
        assert!((under.get(4, 3)[0] - 0.25f64.powf(0.4)).abs() < 1e-12);
        assert!((under.get(4, 3)[0] - 0.5743).abs() < 1e-4);
        let over = correct_overexposure(&constant(0.75), &p, &s).unwrap();
        assert!((over.get(4, 3)[0] - (1.0 - 0.25f64.powf(0.4))).abs() < 1e-12);
        assert!((over.get(4, 3)[0] - 0.4257).abs() < 1e-4);
    }

    #[test]
    fn mid_gray_triplet() {
        let (p, s) = defaults();
        let t = make_triplet(&constant(0.5), &p, &s).unwrap();
        let f = t.underexposure_corrected.get(0, 0)[0];
        let r = t.overexposure_corrected.get(0, 0)[0];
        assert!((f - 0.5f64.powf(0.4)).abs() < 1e-12 && (f - 0.7579).abs() < 1e-4);
        assert!((r - (1.0 - 0.5f64.powf(0.4))).abs() < 1e-12 && (r - 0.2421).abs() < 1e-4);
        assert_eq!(t.original, constant(0.5));
    }

    #[test]
    fn black_and_white_are_fixed_points() {
        let (p, s) = defaults();
        for v in [0.0, 1.0] {
            let img = constant(v);
            let t = make_triplet(&img, &p, &s).unwrap();
            for out in t.sequence() {
                assert_eq!(out, &img);
            }
        }
    }

    #[test]
    fn reverse_is_inverted_forward() {
        let (p, s) = defaults();
        let img = RasterImage::from_fn(17, 11, |x, y| {
            let v = ((x * 7 + y * 13) % 23) as f64 / 22.0;
            [v, (v * 0.5 + 0.3).min(1.0), 1.0 - v]
        });
        let over = correct_overexposure(&img, &p, &s).unwrap();
        let expect = invert(&correct_underexposure(&invert(&img), &p, &s).unwrap());
        assert_eq!(over, expect);
        let d = dual_passes(&img, &p, &s).unwrap();
        assert_eq!(d.triplet.overexposure_corrected, over);
        assert_eq!(d.triplet.underexposure_corrected, correct_underexposure(&img, &p, &s).unwrap());
    }
}
