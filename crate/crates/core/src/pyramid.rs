//! Burt–Adelson Gaussian and Laplacian pyramids.
//!
//! Filtering uses the separable 5-tap binomial kernel `[1, 4, 6, 4, 1] / 16`
//! with replicated borders. Reduction keeps every other sample starting at
//! index 0, so a level of size `n` has a parent of size `ceil(n / 2)`.
//! Expansion treats the coarse level as a zero-interleaved signal (borders
//! replicated on the coarse grid) filtered by twice the kernel.

use crate::error::{Error, Result};
use crate::image::{Pixel, Plane};

const TAPS: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PyramidKind {
    Gaussian,
    Laplacian,
}

#[derive(Clone, Debug)]
pub struct ImagePyramid<P> {
    /// Level 0 is full resolution.
    pub levels: Vec<Plane<P>>,
    pub kind: PyramidKind,
}

/// Deepest pyramid allowed for a `width x height` image:
/// `floor(log2(min(width, height))) - 1`, at least 1.
pub fn auto_depth(width: usize, height: usize) -> usize {
    let m = width.min(height).max(1);
    let log2 = (usize::BITS - 1 - m.leading_zeros()) as usize;
    log2.saturating_sub(1).max(1)
}

fn check_depth(width: usize, height: usize, levels: usize) -> Result<()> {
    let max = auto_depth(width, height);
    if levels == 0 || levels > max {
        return Err(Error::InvalidArgument(format!(
            "pyramid depth {levels} outside 1..={max} for a {width}x{height} image"
        )));
    }
    Ok(())
}

#[inline]
fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Separable binomial blur with replicated borders.
pub fn blur<P: Pixel>(src: &Plane<P>) -> Plane<P> {
    let (w, h) = src.dims();
    let rows = Plane::from_fn(w, h, |x, y| {
        let row = src.row(y);
        TAPS.iter().enumerate().fold(P::zero(), |acc, (k, &t)| {
            acc.add(row[clamp_index(x as isize + k as isize - 2, w)].scale(t))
        })
    });
    Plane::from_fn(w, h, |x, y| {
        TAPS.iter().enumerate().fold(P::zero(), |acc, (k, &t)| {
            acc.add(rows.get(x, clamp_index(y as isize + k as isize - 2, h)).scale(t))
        })
    })
}

/// Blur, then keep even-indexed samples.
pub fn reduce<P: Pixel>(src: &Plane<P>) -> Plane<P> {
    let blurred = blur(src);
    let (w, h) = src.dims();
    Plane::from_fn(w.div_ceil(2), h.div_ceil(2), |x, y| blurred.get(2 * x, 2 * y))
}

// Fine sample `x` of the zero-interleaved, 2x-kernel filtered coarse signal:
// only even taps hit a coarse sample.
#[inline]
fn expand_taps(x: usize, coarse_len: usize, mut f: impl FnMut(usize, f64)) {
    for (k, &t) in TAPS.iter().enumerate() {
        let j = x as isize + k as isize - 2;
        if j.rem_euclid(2) == 0 {
            f(clamp_index(j.div_euclid(2), coarse_len), 2.0 * t);
        }
    }
}

/// Upsamples `src` to exactly `width x height`.
pub fn expand<P: Pixel>(src: &Plane<P>, width: usize, height: usize) -> Plane<P> {
    let (cw, ch) = src.dims();
    let rows = Plane::from_fn(width, ch, |x, y| {
        let row = src.row(y);
        let mut acc = P::zero();
        expand_taps(x, cw, |i, t| acc = acc.add(row[i].scale(t)));
        acc
    });
    Plane::from_fn(width, height, |x, y| {
        let mut acc = P::zero();
        expand_taps(y, ch, |j, t| acc = acc.add(rows.get(x, j).scale(t)));
        acc
    })
}

pub fn gaussian_pyramid<P: Pixel>(src: &Plane<P>, levels: usize) -> Result<ImagePyramid<P>> {
    check_depth(src.width(), src.height(), levels)?;
    let mut out = Vec::with_capacity(levels);
    out.push(src.clone());
    for _ in 1..levels {
        let next = reduce(out.last().expect("non-empty"));
        out.push(next);
    }
    Ok(ImagePyramid {
        levels: out,
        kind: PyramidKind::Gaussian,
    })
}

pub fn laplacian_pyramid<P: Pixel>(src: &Plane<P>, levels: usize) -> Result<ImagePyramid<P>> {
    let gauss = gaussian_pyramid(src, levels)?.levels;
    let mut out: Vec<Plane<P>> = gauss
        .windows(2)
        .map(|pair| {
            let (fine, coarse) = (&pair[0], &pair[1]);
            fine.zip_map(&expand(coarse, fine.width(), fine.height()), P::sub)
        })
        .collect();
    out.push(gauss.last().expect("non-empty").clone());
    Ok(ImagePyramid {
        levels: out,
        kind: PyramidKind::Laplacian,
    })
}

/// Inverts `laplacian_pyramid`.
pub fn collapse<P: Pixel>(pyr: &ImagePyramid<P>) -> Result<Plane<P>> {
    if pyr.kind != PyramidKind::Laplacian {
        return Err(Error::InvalidArgument("only Laplacian pyramids can be collapsed".into()));
    }
    let mut levels = pyr.levels.iter().rev();
    let mut acc = levels
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty pyramid".into()))?
        .clone();
    for detail in levels {
        acc = detail.zip_map(&expand(&acc, detail.width(), detail.height()), P::add);
    }
    Ok(acc)
}
