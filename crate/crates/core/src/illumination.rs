//! Illumination estimation and Retinex-style recovery.
//!
//! The initial illumination is the per-pixel maximum channel. It is refined
//! by a weighted least squares smoother whose edge weights come from a
//! windowed, Gaussian-weighted ratio of gradient magnitudes: textures whose
//! gradients cancel inside the window get large weights (strong smoothing),
//! coherent structure edges get small weights (preserved).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{RasterImage, ScalarField};
use crate::solver::{self, Solution, SolverSettings};

/// Distance used inside the spatial Gaussian.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Affinity {
    /// `exp(-d / (2 sigma^2))` with plain Euclidean distance `d`.
    #[default]
    Euclidean,
    /// `exp(-d^2 / (2 sigma^2))`, the usual Gaussian.
    SquaredEuclidean,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IlluminationParams {
    /// Weight of the smoothness term.
    pub lambda: f64,
    /// Exponent applied to the illumination before division.
    pub gamma: f64,
    /// Spatial Gaussian standard deviation, in pixels.
    pub sigma: f64,
    /// Side of the square texture window, odd.
    pub window: usize,
    /// Stabilizer in the weight denominators.
    pub eps: f64,
    /// Lower bound on the illumination used when dividing.
    pub illum_floor: f64,
    pub affinity: Affinity,
}

impl Default for IlluminationParams {
    fn default() -> Self {
        Self {
            lambda: 0.15,
            gamma: 0.6,
            sigma: 3.0,
            window: 15,
            eps: 1e-3,
            illum_floor: 1e-6,
            affinity: Affinity::Euclidean,
        }
    }
}

impl IlluminationParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return bad(format!("sigma must be > 0, got {}", self.sigma));
        }
        if self.window < 3 || self.window % 2 == 0 {
            return bad(format!("window must be odd and >= 3, got {}", self.window));
        }
        if !(self.eps > 0.0) {
            return bad(format!("eps must be > 0, got {}", self.eps));
        }
        if !(self.illum_floor > 0.0) {
            return bad(format!("illumination floor must be > 0, got {}", self.illum_floor));
        }
        Ok(())
    }
}

/// Max over RGB at every pixel.
pub fn initial_illumination(img: &RasterImage) -> ScalarField {
    img.map(|[r, g, b]| r.max(g).max(b))
}

/// `window x window` kernel of spatial affinities to the centre pixel.
pub fn gaussian_affinity(sigma: f64, window: usize, affinity: Affinity) -> Result<ScalarField> {
    if window % 2 == 0 {
        return Err(Error::InvalidArgument(format!("window must be odd, got {window}")));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be > 0, got {sigma}")));
    }
    let r = (window / 2) as f64;
    let denom = 2.0 * sigma * sigma;
    Ok(ScalarField::from_fn(window, window, |x, y| {
        let (dx, dy) = (x as f64 - r, y as f64 - r);
        let d2 = dx * dx + dy * dy;
        let d = match affinity {
            Affinity::Euclidean => d2.sqrt(),
            Affinity::SquaredEuclidean => d2,
        };
        (-d / denom).exp()
    }))
}

/// Forward difference along x; zero on the last column.
pub fn diff_x(f: &ScalarField) -> ScalarField {
    let w = f.width();
    ScalarField::from_fn(w, f.height(), |x, y| {
        if x + 1 < w {
            f.get(x + 1, y) - f.get(x, y)
        } else {
            0.0
        }
    })
}

/// Forward difference along y; zero on the last row.
pub fn diff_y(f: &ScalarField) -> ScalarField {
    let h = f.height();
    ScalarField::from_fn(f.width(), h, |x, y| {
        if y + 1 < h {
            f.get(x, y + 1) - f.get(x, y)
        } else {
            0.0
        }
    })
}

/// Windowed texture term for one derivative field:
/// `T_p = sum_q K(p,q) / (|sum_q K(p,q) * d_q| + eps)`.
///
/// Windows that overhang the border only sum over in-image pixels, in both
/// numerator and denominator.
pub fn texture_weight(derivative: &ScalarField, kernel: &ScalarField, eps: f64) -> ScalarField {
    let (w, h) = derivative.dims();
    let k = kernel.width();
    assert_eq!(k, kernel.height(), "kernel must be square");
    let r = (k / 2) as isize;
    let d = derivative.as_slice();
    let kern = kernel.as_slice();

    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let y = y as isize;
        let ky0 = (r - y).max(0) as usize;
        let ky1 = (r + (h as isize - 1 - y)).min(2 * r) as usize;
        for (x, t) in row.iter_mut().enumerate() {
            let x = x as isize;
            let kx0 = (r - x).max(0) as usize;
            let kx1 = (r + (w as isize - 1 - x)).min(2 * r) as usize;
            let mut mass = 0.0;
            let mut response = 0.0;
            for ky in ky0..=ky1 {
                let sy = (y + ky as isize - r) as usize;
                let krow = &kern[ky * k..(ky + 1) * k];
                let start = (sy * w) as isize + x - r;
                for kx in kx0..=kx1 {
                    let g = krow[kx];
                    mass += g;
                    response += g * d[(start + kx as isize) as usize];
                }
            }
            *t = mass / (response.abs() + eps);
        }
    });
    ScalarField::from_vec(w, h, out).expect("same dimensions as input")
}

/// Edge weights `w = T / (|d L'| + eps)` along x and y.
pub fn smoothness_weights(
    initial: &ScalarField,
    params: &IlluminationParams,
) -> Result<(ScalarField, ScalarField)> {
    let kernel = gaussian_affinity(params.sigma, params.window, params.affinity)?;
    let eps = params.eps;
    let weights = |d: ScalarField| {
        let t = texture_weight(&d, &kernel, eps);
        t.zip_map(&d, |t, g| t / (g.abs() + eps))
    };
    let (wx, wy) = rayon::join(|| weights(diff_x(initial)), || weights(diff_y(initial)));
    Ok((wx, wy))
}

/// Refined illumination: the smoothed max-channel map.
pub fn estimate(
    img: &RasterImage,
    params: &IlluminationParams,
    settings: &SolverSettings,
) -> Result<Solution> {
    params.validate()?;
    let initial = initial_illumination(img);
    let (wx, wy) = smoothness_weights(&initial, params)?;
    let system = solver::assemble(&initial, &wx, &wy, params.lambda)?;
    solver::solve_cg(&system, settings)
}

/// `I / max(L, floor)^gamma`, clamped to `[0, 1]`.
pub fn recover(img: &RasterImage, illum: &ScalarField, gamma: f64, illum_floor: f64) -> RasterImage {
    img.zip_map(illum, |p, l| {
        let scale = l.max(illum_floor).powf(gamma);
        p.map(|v| (v / scale).clamp(0.0, 1.0))
    })
}
