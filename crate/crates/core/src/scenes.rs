//! Deterministic procedural photographs for tests and benchmarks.
//!
//! A scene is a textured reflectance layer multiplied by a smooth lighting
//! layer and an exposure gain, then clipped and quantized to 8 bits like a
//! camera JPEG/PNG would be.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::{RasterImage, Rgb, ScalarField};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exposure {
    /// Global gain applied to a well-lit scene.
    Gain(f64),
    /// Bright backdrop above `horizon` (fraction of height) at `sky` gain,
    /// dark foreground below at `ground` gain.
    Backlit { sky: f64, ground: f64, horizon: f64 },
}

/// Bilinearly interpolated random lattice, values in [0, 1].
fn value_noise(rng: &mut ChaCha8Rng, w: usize, h: usize, cell: f64) -> ScalarField {
    let gw = (w as f64 / cell).ceil() as usize + 2;
    let gh = (h as f64 / cell).ceil() as usize + 2;
    let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.random()).collect();
    ScalarField::from_fn(w, h, |x, y| {
        let (fx, fy) = (x as f64 / cell, y as f64 / cell);
        let (ix, iy) = (fx.floor() as usize, fy.floor() as usize);
        let (tx, ty) = (fx - ix as f64, fy - iy as f64);
        let (tx, ty) = (tx * tx * (3.0 - 2.0 * tx), ty * ty * (3.0 - 2.0 * ty));
        let at = |i: usize, j: usize| lattice[j * gw + i];
        let top = at(ix, iy) * (1.0 - tx) + at(ix + 1, iy) * tx;
        let bottom = at(ix, iy + 1) * (1.0 - tx) + at(ix + 1, iy + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    })
}

fn palette(rng: &mut ChaCha8Rng) -> Rgb {
    let base: f64 = rng.random_range(0.35..0.95);
    [
        (base * rng.random_range(0.5..1.1)).min(1.0),
        (base * rng.random_range(0.5..1.1)).min(1.0),
        (base * rng.random_range(0.5..1.1)).min(1.0),
    ]
}

/// Reflectance in roughly [0.05, 1]: colored regions, a few objects and
/// fine texture.
fn reflectance(rng: &mut ChaCha8Rng, w: usize, h: usize) -> RasterImage {
    let regions = value_noise(rng, w, h, (w.min(h) as f64 / 3.0).max(2.0));
    let texture = value_noise(rng, w, h, 2.5);
    let colors: Vec<Rgb> = (0..4).map(|_| palette(rng)).collect();
    let discs: Vec<(f64, f64, f64, Rgb)> = (0..rng.random_range(2..6))
        .map(|_| {
            (
                rng.random_range(0.0..w as f64),
                rng.random_range(0.0..h as f64),
                rng.random_range(0.05..0.25) * w.min(h) as f64,
                palette(rng),
            )
        })
        .collect();
    let stripes = rng.random_range(3.0..9.0);
    RasterImage::from_fn(w, h, |x, y| {
        let r = regions.get(x, y);
        let idx = ((r * 4.0) as usize).min(3);
        let mut c = colors[idx];
        for &(cx, cy, rad, col) in &discs {
            let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            if d < rad {
                c = col;
            }
        }
        let stripe = if ((x as f64 + 0.5 * y as f64) / stripes).floor() as i64 % 2 == 0 { 1.0 } else { 0.85 };
        let t = 0.75 + 0.25 * texture.get(x, y);
        c.map(|v| (v * t * stripe).clamp(0.05, 1.0))
    })
}

/// Smooth lighting in (0, 1]: a broad gradient plus a soft spotlight.
fn lighting(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ScalarField {
    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (sx, sy) = (rng.random_range(0.0..w as f64), rng.random_range(0.0..h as f64));
    let spread = rng.random_range(0.3..0.8) * w.max(h) as f64;
    let diag = ((w * w + h * h) as f64).sqrt();
    ScalarField::from_fn(w, h, |x, y| {
        let g = 0.5 + 0.5 * ((x as f64 * angle.cos() + y as f64 * angle.sin()) / diag);
        let d2 = (x as f64 - sx).powi(2) + (y as f64 - sy).powi(2);
        let spot = (-d2 / (2.0 * spread * spread)).exp();
        (0.45 + 0.3 * g + 0.35 * spot).min(1.0)
    })
}

fn quantize(img: RasterImage) -> RasterImage {
    img.map(|p| p.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() / 255.0))
}

/// The unexposed scene: reflectance times lighting, before any gain.
pub fn radiance(seed: u64, width: usize, height: usize) -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let refl = reflectance(&mut rng, width, height);
    let light = lighting(&mut rng, width, height);
    refl.zip_map(&light, |p, l| p.map(|v| v * l))
}

/// A quantized photo of scene `seed` under `exposure`.
pub fn photo(seed: u64, width: usize, height: usize, exposure: Exposure) -> RasterImage {
    let scene = radiance(seed, width, height);
    let exposed = match exposure {
        Exposure::Gain(g) => scene.map(|p| p.map(|v| v * g)),
        Exposure::Backlit { sky, ground, horizon } => {
            let edge = horizon * height as f64;
            RasterImage::from_fn(width, height, |x, y| {
                // Soft transition over a few rows.
                let t = ((y as f64 - edge) / 3.0).clamp(-1.0, 1.0) * 0.5 + 0.5;
                let gain = sky * (1.0 - t) + ground * t;
                scene.get(x, y).map(|v| v * gain)
            })
        }
    };
    quantize(exposed)
}

/// A well-exposed reference photo of scene `seed`.
pub fn reference(seed: u64, width: usize, height: usize) -> RasterImage {
    photo(seed, width, height, Exposure::Gain(1.0))
}

/// Named test corpus of `count` photos cycling through underexposed,
/// overexposed, backlit and well-exposed conditions at assorted sizes,
/// including odd dimensions.
pub fn corpus(count: usize) -> Vec<(String, RasterImage)> {
    const SIZES: [(usize, usize); 6] = [(96, 64), (81, 57), (64, 96), (127, 90), (72, 72), (101, 67)];
    (0..count)
        .map(|i| {
            let seed = 1000 + i as u64;
            let (w, h) = SIZES[i % SIZES.len()];
            let (label, exposure) = match i % 4 {
                0 => ("under", Exposure::Gain(0.2 + 0.05 * (i % 3) as f64)),
                1 => ("over", Exposure::Gain(1.8 + 0.3 * (i % 3) as f64)),
                2 => (
                    "backlit",
                    Exposure::Backlit {
                        sky: 2.2,
                        ground: 0.3,
                        horizon: 0.4 + 0.05 * (i % 3) as f64,
                    },
                ),
                _ => ("normal", Exposure::Gain(1.0)),
            };
            (format!("{label}_{i:02}"), photo(seed, w, h, exposure))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let a = photo(3, 40, 30, Exposure::Gain(0.3));
        assert_eq!(a, photo(3, 40, 30, Exposure::Gain(0.3)));
        assert!(a.as_slice().iter().flatten().all(|&v| (0.0..=1.0).contains(&v)));
        assert_ne!(a, photo(4, 40, 30, Exposure::Gain(0.3)));
    }

    #[test]
    fn exposure_conditions_differ_in_brightness() {
        let mean = |img: &RasterImage| crate::image::to_gray(img).mean();
        let under = photo(5, 64, 48, Exposure::Gain(0.25));
        let normal = reference(5, 64, 48);
        let over = photo(5, 64, 48, Exposure::Gain(2.0));
        assert!(mean(&under) < 0.2);
        assert!(mean(&under) < mean(&normal) && mean(&normal) < mean(&over));
        let clipped = over.as_slice().iter().flatten().filter(|&&v| v == 1.0).count();
        assert!(clipped > 0);
    }

    #[test]
    fn corpus_is_varied() {
        let c = corpus(24);
        assert_eq!(c.len(), 24);
        assert!(c.iter().any(|(_, img)| img.width() % 2 == 1));
        assert!(c.iter().any(|(n, _)| n.starts_with("backlit")));
    }
}
