//! Exposure fusion of the corrected sequence.
//!
//! Each image gets a per-pixel quality score, the product of contrast,
//! saturation and well-exposedness. By default only the best image at each
//! pixel keeps a (unit) weight; the weight maps are then blended across
//! scales with Laplacian pyramids so that the hard selection leaves no seams.

use crate::dual::ExposureTriplet;
use crate::error::{Error, Result};
use crate::image::{clamp01, to_gray, Pixel, RasterImage, ScalarField};
use crate::pyramid::{self, auto_depth, ImagePyramid, PyramidKind};

/// Per-pixel sums below this are treated as zero by `normalize_maps`.
const DEGENERATE_SUM: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FusionMode {
    /// Binary maps selecting the best image per pixel.
    #[default]
    WinnerTakeAll,
    /// Quality maps divided by their per-pixel sum.
    Normalized,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PyramidDepth {
    #[default]
    Auto,
    Levels(usize),
}

impl PyramidDepth {
    pub fn resolve(self, width: usize, height: usize) -> Result<usize> {
        let max = auto_depth(width, height);
        match self {
            PyramidDepth::Auto => Ok(max),
            PyramidDepth::Levels(n) if n >= 1 && n <= max => Ok(n),
            PyramidDepth::Levels(n) => Err(Error::InvalidArgument(format!(
                "pyramid depth {n} outside 1..={max} for a {width}x{height} image"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FusionParams {
    pub beta_contrast: f64,
    pub beta_saturation: f64,
    pub beta_exposedness: f64,
    /// Spread of the well-exposedness Gaussian around 0.5.
    pub sigma_e: f64,
    pub levels: PyramidDepth,
    pub mode: FusionMode,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            beta_contrast: 1.0,
            beta_saturation: 1.0,
            beta_exposedness: 1.0,
            sigma_e: 0.2,
            levels: PyramidDepth::Auto,
            mode: FusionMode::WinnerTakeAll,
        }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<()> {
        for (name, b) in [
            ("contrast", self.beta_contrast),
            ("saturation", self.beta_saturation),
            ("well-exposedness", self.beta_exposedness),
        ] {
            if !(b >= 0.0) || !b.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "{name} exponent must be >= 0, got {b}"
                )));
            }
        }
        if !(self.sigma_e > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sigma_e must be > 0, got {}",
                self.sigma_e
            )));
        }
        if self.levels == PyramidDepth::Levels(0) {
            return Err(Error::InvalidArgument("pyramid needs at least one level".into()));
        }
        Ok(())
    }
}

/// One weight map per sequence image.
#[derive(Clone, Debug)]
pub struct QualityMaps {
    pub maps: Vec<ScalarField>,
    pub mode: FusionMode,
}

/// `|laplacian(luma)|` with the 4-neighbour kernel and replicated borders.
pub fn contrast_measure(img: &RasterImage) -> ScalarField {
    let gray = to_gray(img);
    let (w, h) = gray.dims();
    ScalarField::from_fn(w, h, |x, y| {
        let c = gray.get(x, y);
        let left = gray.get(x.saturating_sub(1), y);
        let right = gray.get((x + 1).min(w - 1), y);
        let up = gray.get(x, y.saturating_sub(1));
        let down = gray.get(x, (y + 1).min(h - 1));
        (left + right + up + down - 4.0 * c).abs()
    })
}

/// Population standard deviation of the three channels.
pub fn saturation_measure(img: &RasterImage) -> ScalarField {
    img.map(|[r, g, b]| {
        let mu = (r + g + b) / 3.0;
        (((r - mu).powi(2) + (g - mu).powi(2) + (b - mu).powi(2)) / 3.0).sqrt()
    })
}

/// Product over channels of a Gaussian centred on 0.5.
pub fn wellexposedness_measure(img: &RasterImage, sigma_e: f64) -> ScalarField {
    let k = 2.0 * sigma_e * sigma_e;
    img.map(|p| {
        p.iter()
            .map(|&c| (-(c - 0.5) * (c - 0.5) / k).exp())
            .product()
    })
}

/// `C^bc * S^bs * E^be` per pixel.
pub fn visual_quality(img: &RasterImage, params: &FusionParams) -> ScalarField {
    let c = contrast_measure(img);
    let s = saturation_measure(img);
    let e = wellexposedness_measure(img, params.sigma_e);
    let cs = c.zip_map(&s, |c, s| {
        c.powf(params.beta_contrast) * s.powf(params.beta_saturation)
    });
    cs.zip_map(&e, |cs, e| cs * e.powf(params.beta_exposedness))
}

fn check_sequence(fields: &[ScalarField]) -> Result<()> {
    let first = fields
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty quality sequence".into()))?;
    if fields.iter().any(|f| !f.same_dims(first)) {
        return Err(Error::InvalidArgument("quality maps differ in size".into()));
    }
    Ok(())
}

/// Keeps only the per-pixel maximum; ties go to the lowest index.
pub fn winner_take_all(fields: &[ScalarField]) -> Result<QualityMaps> {
    check_sequence(fields)?;
    let (w, h) = fields[0].dims();
    let mut maps = vec![ScalarField::filled(w, h, 0.0); fields.len()];
    for i in 0..w * h {
        let mut best = 0;
        for (k, f) in fields.iter().enumerate().skip(1) {
            if f.as_slice()[i] > fields[best].as_slice()[i] {
                best = k;
            }
        }
        maps[best].as_mut_slice()[i] = 1.0;
    }
    Ok(QualityMaps {
        maps,
        mode: FusionMode::WinnerTakeAll,
    })
}

/// Divides by the per-pixel sum; near-zero sums get uniform weights.
pub fn normalize_maps(fields: &[ScalarField]) -> Result<QualityMaps> {
    check_sequence(fields)?;
    let (w, h) = fields[0].dims();
    let k = fields.len();
    let mut maps = vec![ScalarField::filled(w, h, 0.0); k];
    for i in 0..w * h {
        let sum: f64 = fields.iter().map(|f| f.as_slice()[i]).sum();
        for (m, f) in maps.iter_mut().zip(fields) {
            m.as_mut_slice()[i] = if sum < DEGENERATE_SUM {
                1.0 / k as f64
            } else {
                f.as_slice()[i] / sum
            };
        }
    }
    Ok(QualityMaps {
        maps,
        mode: FusionMode::Normalized,
    })
}

/// Multiresolution blend of `images` under `weights`, without clamping.
///
/// Level `l` of the result is `sum_k gauss(weight_k)_l * laplace(image_k)_l`,
/// accumulated in sequence order.
pub fn blend(images: &[&RasterImage], weights: &QualityMaps, levels: usize) -> Result<RasterImage> {
    if images.is_empty() || images.len() != weights.maps.len() {
        return Err(Error::InvalidArgument(format!(
            "{} images but {} weight maps",
            images.len(),
            weights.maps.len()
        )));
    }
    let (w, h) = images[0].dims();
    if images.iter().any(|i| i.dims() != (w, h)) || weights.maps.iter().any(|m| m.dims() != (w, h)) {
        return Err(Error::InvalidArgument("fusion inputs differ in size".into()));
    }

    let per_image: Vec<Result<(ImagePyramid<[f64; 3]>, ImagePyramid<f64>)>> = {
        use rayon::prelude::*;
        images
            .par_iter()
            .zip(weights.maps.par_iter())
            .map(|(img, map)| {
                Ok((
                    pyramid::laplacian_pyramid(*img, levels)?,
                    pyramid::gaussian_pyramid(map, levels)?,
                ))
            })
            .collect()
    };
    let per_image = per_image.into_iter().collect::<Result<Vec<_>>>()?;

    let fused_levels = (0..levels)
        .map(|l| {
            let (lw, lh) = per_image[0].0.levels[l].dims();
            let mut acc = RasterImage::filled(lw, lh, [0.0; 3]);
            for (lap, gauss) in &per_image {
                let detail = lap.levels[l].as_slice();
                let weight = gauss.levels[l].as_slice();
                for ((a, &d), &g) in acc.as_mut_slice().iter_mut().zip(detail).zip(weight) {
                    *a = a.add(d.scale(g));
                }
            }
            acc
        })
        .collect();
    pyramid::collapse(&ImagePyramid {
        levels: fused_levels,
        kind: PyramidKind::Laplacian,
    })
}

/// Fused image plus what went into it.
#[derive(Clone, Debug)]
pub struct FusionResult {
    pub image: RasterImage,
    pub maps: QualityMaps,
    /// How far the unclamped blend left `[0, 1]`.
    pub overshoot: f64,
    pub levels: usize,
}

pub fn fuse_detailed(triplet: &ExposureTriplet, params: &FusionParams) -> Result<FusionResult> {
    params.validate()?;
    let seq = triplet.sequence();
    let (w, h) = seq[0].dims();
    let levels = params.levels.resolve(w, h)?;
    let quality: Vec<ScalarField> = seq.iter().map(|img| visual_quality(img, params)).collect();
    let maps = match params.mode {
        FusionMode::WinnerTakeAll => winner_take_all(&quality)?,
        FusionMode::Normalized => normalize_maps(&quality)?,
    };
    let raw = blend(&seq, &maps, levels)?;
    let overshoot = raw
        .as_slice()
        .iter()
        .flatten()
        .map(|&v| (v - 1.0).max(-v))
        .fold(0.0, f64::max);
    Ok(FusionResult {
        image: clamp01(&raw),
        maps,
        overshoot,
        levels,
    })
}

pub fn fuse(triplet: &ExposureTriplet, params: &FusionParams) -> Result<RasterImage> {
    fuse_detailed(triplet, params).map(|r| r.image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::max_abs_diff;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pixel(p: [f64; 3]) -> RasterImage {
        RasterImage::filled(1, 1, p)
    }

    fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> RasterImage {
        RasterImage::from_fn(w, h, |_, _| [rng.random(), rng.random(), rng.random()])
    }

    #[test]
    fn contrast_cases() {
        let flat = RasterImage::filled(6, 5, [0.4; 3]);
        assert!(contrast_measure(&flat).as_slice().iter().all(|&v| v == 0.0));

        let mut dot = RasterImage::filled(5, 5, [0.0; 3]);
        dot.set(2, 2, [1.0; 3]);
        let c = contrast_measure(&dot);
        assert!((c.get(2, 2) - 4.0).abs() < 1e-12);
        assert!((c.get(1, 2) - 1.0).abs() < 1e-12);

        let ramp = RasterImage::from_fn(8, 6, |x, y| [0.05 * x as f64 + 0.03 * y as f64; 3]);
        let c = contrast_measure(&ramp);
        for y in 1..5 {
            for x in 1..7 {
                assert!(c.get(x, y) < 1e-12);
            }
        }
    }

    #[test]
    fn saturation_cases() {
        assert_eq!(saturation_measure(&pixel([0.3; 3])).get(0, 0), 0.0);
        let expect = (2.0f64 / 9.0).sqrt();
        assert!((saturation_measure(&pixel([1.0, 0.0, 0.0])).get(0, 0) - expect).abs() < 1e-15);
        assert!((saturation_measure(&pixel([1.0, 1.0, 0.0])).get(0, 0) - expect).abs() < 1e-15);
        assert!((expect - 0.4714).abs() < 1e-4);
    }

    #[test]
    fn wellexposedness_cases() {
        assert_eq!(wellexposedness_measure(&pixel([0.5; 3]), 0.2).get(0, 0), 1.0);
        let black = wellexposedness_measure(&pixel([0.0; 3]), 0.2).get(0, 0);
        assert!((black - (-9.375f64).exp()).abs() < 1e-18);
        assert!((black - 8.5e-5).abs() < 1e-6);
        let mut last = 0.0;
        for i in 0..=50 {
            let v = wellexposedness_measure(&pixel([i as f64 / 100.0, 0.2, 0.9]), 0.2).get(0, 0);
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn visual_quality_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let img = random_image(&mut rng, 4, 4);
        let zero = FusionParams {
            beta_contrast: 0.0,
            beta_saturation: 0.0,
            beta_exposedness: 0.0,
            ..Default::default()
        };
        assert!(visual_quality(&img, &zero).as_slice().iter().all(|&v| v == 1.0));
        let flat = RasterImage::filled(4, 4, [0.2, 0.5, 0.7]);
        assert!(visual_quality(&flat, &FusionParams::default()).as_slice().iter().all(|&v| v == 0.0));

        // Step-by-step product, pixel by pixel.
        let q = visual_quality(&img, &FusionParams::default());
        let gray: Vec<f64> = img.as_slice().iter().map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).collect();
        let g = |x: isize, y: isize| gray[(y.clamp(0, 3) * 4 + x.clamp(0, 3)) as usize];
        for y in 0..4isize {
            for x in 0..4isize {
                let c = (g(x - 1, y) + g(x + 1, y) + g(x, y - 1) + g(x, y + 1) - 4.0 * g(x, y)).abs();
                let p = img.get(x as usize, y as usize);
                let m = (p[0] + p[1] + p[2]) / 3.0;
                let s = (p.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / 3.0).sqrt();
                let e: f64 = p.iter().map(|v| (-(v - 0.5) * (v - 0.5) / 0.08).exp()).product();
                assert!((q.get(x as usize, y as usize) - c * s * e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn winner_take_all_cases() {
        let f = |v: f64| ScalarField::filled(1, 1, v);
        let m = winner_take_all(&[f(0.2), f(0.5), f(0.3)]).unwrap();
        let picks: Vec<f64> = m.maps.iter().map(|m| m.get(0, 0)).collect();
        assert_eq!(picks, vec![0.0, 1.0, 0.0]);
        let m = winner_take_all(&[f(0.4), f(0.4), f(0.4)]).unwrap();
        let picks: Vec<f64> = m.maps.iter().map(|m| m.get(0, 0)).collect();
        assert_eq!(picks, vec![1.0, 0.0, 0.0]);
        let m = winner_take_all(&[ScalarField::filled(3, 2, 0.7)]).unwrap();
        assert!(m.maps[0].as_slice().iter().all(|&v| v == 1.0));
        assert!(winner_take_all(&[]).is_err());
        assert!(winner_take_all(&[f(0.1), ScalarField::filled(2, 1, 0.0)]).is_err());
    }

    #[test]
    fn normalize_cases() {
        let f = |v: f64| ScalarField::filled(1, 1, v);
        let m = normalize_maps(&[f(1.0), f(1.0), f(2.0)]).unwrap();
        let got: Vec<f64> = m.maps.iter().map(|m| m.get(0, 0)).collect();
        assert_eq!(got, vec![0.25, 0.25, 0.5]);
        let m = normalize_maps(&[f(0.0), f(0.0), f(0.0)]).unwrap();
        assert!(m.maps.iter().all(|m| m.get(0, 0) == 1.0 / 3.0));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let fields: Vec<ScalarField> = (0..3)
            .map(|_| ScalarField::from_fn(9, 9, |_, _| rng.random::<f64>() * rng.random::<f64>()))
            .collect();
        let m = normalize_maps(&fields).unwrap();
        for i in 0..81 {
            let s: f64 = m.maps.iter().map(|m| m.as_slice()[i]).sum();
            assert!((s - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn identical_triplet_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let img = random_image(&mut rng, 23, 18);
        let t = ExposureTriplet {
            underexposure_corrected: img.clone(),
            overexposure_corrected: img.clone(),
            original: img.clone(),
        };
        for mode in [FusionMode::WinnerTakeAll, FusionMode::Normalized] {
            let params = FusionParams { mode, ..Default::default() };
            assert!(max_abs_diff(&fuse(&t, &params).unwrap(), &img) <= 1e-6);
        }
    }

    #[test]
    fn forced_selection_returns_that_image() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let imgs: Vec<RasterImage> = (0..3).map(|_| random_image(&mut rng, 16, 13)).collect();
        let refs: Vec<&RasterImage> = imgs.iter().collect();
        for k in 0..3 {
            let maps = QualityMaps {
                maps: (0..3)
                    .map(|j| ScalarField::filled(16, 13, if j == k { 1.0 } else { 0.0 }))
                    .collect(),
                mode: FusionMode::WinnerTakeAll,
            };
            let out = blend(&refs, &maps, auto_depth(16, 13)).unwrap();
            assert!(max_abs_diff(&out, &imgs[k]) <= 1e-6);
        }
    }

    #[test]
    fn permutation_invariance_without_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let imgs: Vec<RasterImage> = (0..3).map(|_| random_image(&mut rng, 20, 20)).collect();
        let params = FusionParams::default();
        let quality: Vec<ScalarField> = imgs.iter().map(|i| visual_quality(i, &params)).collect();
        let fuse_order = |order: [usize; 3]| {
            let q: Vec<ScalarField> = order.iter().map(|&i| quality[i].clone()).collect();
            let refs: Vec<&RasterImage> = order.iter().map(|&i| &imgs[i]).collect();
            blend(&refs, &winner_take_all(&q).unwrap(), 3).unwrap()
        };
        let a = fuse_order([0, 1, 2]);
        let b = fuse_order([2, 0, 1]);
        assert!(max_abs_diff(&a, &b) <= 1e-6);
    }

    #[test]
    fn depth_and_param_errors() {
        let img = RasterImage::filled(8, 8, [0.5; 3]);
        let t = ExposureTriplet {
            underexposure_corrected: img.clone(),
            overexposure_corrected: img.clone(),
            original: img,
        };
        let deep = FusionParams { levels: PyramidDepth::Levels(5), ..Default::default() };
        assert!(matches!(fuse(&t, &deep), Err(Error::InvalidArgument(_))));
        let bad = FusionParams { sigma_e: 0.0, ..Default::default() };
        assert!(fuse(&t, &bad).is_err());
        let neg = FusionParams { beta_saturation: -1.0, ..Default::default() };
        assert!(neg.validate().is_err());
    }
}
