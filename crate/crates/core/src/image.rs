//! Raster containers and PNG/JPEG input/output.
//!
//! All pixel values are stored as `f64` in the encoded (non-linearized)
//! domain, normalized so that the integer type maximum maps to `1.0`.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::{DynamicImage, ImageFormat, ImageReader};

use crate::error::{Error, Result};

/// An RGB triplet.
pub type Rgb = [f64; 3];

/// Per-pixel arithmetic needed by the generic filters and pyramids.
pub trait Pixel: Copy + Send + Sync + PartialEq + std::fmt::Debug {
    fn zero() -> Self;
    fn add(self, other: Self) -> Self;
    fn sub(self, other: Self) -> Self;
    fn scale(self, factor: f64) -> Self;
}

impl Pixel for f64 {
    #[inline]
    fn zero() -> Self {
        0.0
    }
    #[inline]
    fn add(self, other: Self) -> Self {
        self + other
    }
    #[inline]
    fn sub(self, other: Self) -> Self {
        self - other
    }
    #[inline]
    fn scale(self, factor: f64) -> Self {
        self * factor
    }
}

impl Pixel for Rgb {
    #[inline]
    fn zero() -> Self {
        [0.0; 3]
    }
    #[inline]
    fn add(self, o: Self) -> Self {
        [self[0] + o[0], self[1] + o[1], self[2] + o[2]]
    }
    #[inline]
    fn sub(self, o: Self) -> Self {
        [self[0] - o[0], self[1] - o[1], self[2] - o[2]]
    }
    #[inline]
    fn scale(self, f: f64) -> Self {
        [self[0] * f, self[1] * f, self[2] * f]
    }
}

/// A dense row-major grid of pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane<P> {
    width: usize,
    height: usize,
    data: Vec<P>,
}

/// H×W RGB raster, nominally in `[0, 1]`.
pub type RasterImage = Plane<Rgb>;

/// H×W single-channel map (illuminations, weights, quality maps).
pub type ScalarField = Plane<f64>;

impl<P: Pixel> Plane<P> {
    /// Builds a plane from row-major data.
    pub fn from_vec(width: usize, height: usize, data: Vec<P>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "expected {} pixels for {width}x{height}, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn filled(width: usize, height: usize, value: P) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> P) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> P {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: P) {
        self.data[y * self.width + x] = value;
    }

    pub fn as_slice(&self) -> &[P] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [P] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<P> {
        self.data
    }

    pub fn row(&self, y: usize) -> &[P] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Applies `f` to every pixel.
    pub fn map<Q: Pixel>(&self, f: impl Fn(P) -> Q) -> Plane<Q> {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&p| f(p)).collect(),
        }
    }

    /// Combines two planes of equal size pixel by pixel.
    ///
    /// # Panics
    /// If the dimensions differ.
    pub fn zip_map<Q: Pixel, R: Pixel>(&self, other: &Plane<Q>, f: impl Fn(P, Q) -> R) -> Plane<R> {
        assert_eq!(self.dims(), other.dims(), "plane dimensions differ");
        Plane {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn same_dims<Q>(&self, other: &Plane<Q>) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Swaps rows and columns.
    pub fn transpose(&self) -> Self {
        Self::from_fn(self.height, self.width, |x, y| self.get(y, x))
    }
}

impl ScalarField {
    pub fn min_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Mean absolute forward difference over both axes (anisotropic TV per pixel).
    pub fn mean_total_variation(&self) -> f64 {
        let (w, h) = self.dims();
        let mut tv = 0.0;
        for y in 0..h {
            for x in 0..w {
                let v = self.get(x, y);
                if x + 1 < w {
                    tv += (self.get(x + 1, y) - v).abs();
                }
                if y + 1 < h {
                    tv += (self.get(x, y + 1) - v).abs();
                }
            }
        }
        tv / self.data.len() as f64
    }

    /// Replicates the field into all three channels.
    pub fn to_rgb(&self) -> RasterImage {
        self.map(|v| [v, v, v])
    }
}

impl RasterImage {
    /// Extracts one channel.
    pub fn channel(&self, c: usize) -> ScalarField {
        self.map(|p| p[c])
    }
}

/// Maximum absolute per-channel difference between two rasters of the same size.
pub fn max_abs_diff(a: &RasterImage, b: &RasterImage) -> f64 {
    assert!(a.same_dims(b), "raster dimensions differ");
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .flat_map(|(p, q)| (0..3).map(move |c| (p[c] - q[c]).abs()))
        .fold(0.0, f64::max)
}

/// Loads a PNG or JPEG as an RGB raster in `[0, 1]`.
///
/// 16-bit sources are scaled by 1/65535, everything else by 1/255. Gray
/// inputs are replicated to RGB and alpha is dropped.
pub fn load(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = ImageReader::open(path)
        .map_err(io_err)?
        .with_guessed_format()
        .map_err(io_err)?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Jpeg) => {}
        Some(other) => {
            return Err(Error::Format(format!(
                "{}: {other:?} is not supported, expected PNG or JPEG",
                path.display()
            )))
        }
        None => {
            return Err(Error::Format(format!(
                "{}: unrecognized image format",
                path.display()
            )))
        }
    }
    let decoded = reader.decode().map_err(|e| match e {
        image::ImageError::IoError(source) => io_err(source),
        other => Error::Format(format!("{}: {other}", path.display())),
    })?;
    Ok(from_dynamic(&decoded))
}

fn from_dynamic(img: &DynamicImage) -> RasterImage {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let wide = matches!(
        img,
        DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
            | DynamicImage::ImageRgb16(_)
            | DynamicImage::ImageRgba16(_)
    );
    let data = if wide {
        img.to_rgb16()
            .pixels()
            .map(|p| p.0.map(|v| f64::from(v) / 65535.0))
            .collect()
    } else {
        img.to_rgb8()
            .pixels()
            .map(|p| p.0.map(|v| f64::from(v) / 255.0))
            .collect()
    };
    RasterImage::from_vec(w, h, data).expect("decoder returned consistent dimensions")
}

/// Encodes a channel value as a byte, `round(v * 255)` with halves rounding up.
#[inline]
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// Writes an 8-bit RGB PNG. Values outside `[0, 1]` are saturated.
pub fn save(img: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = img.as_slice().iter().flat_map(|p| p.map(quantize)).collect();
    let buf = image::RgbImage::from_raw(img.width() as u32, img.height() as u32, bytes)
        .expect("buffer length matches dimensions");
    write_png(&DynamicImage::ImageRgb8(buf), path.as_ref())
}

/// Writes a scalar field as an 8-bit grayscale PNG.
pub fn save_gray(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = field.as_slice().iter().map(|&v| quantize(v)).collect();
    let buf = image::GrayImage::from_raw(field.width() as u32, field.height() as u32, bytes)
        .expect("buffer length matches dimensions");
    write_png(&DynamicImage::ImageLuma8(buf), path.as_ref())
}

fn write_png(img: &DynamicImage, path: &Path) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    img.write_to(&mut out, ImageFormat::Png).map_err(|e| match e {
        image::ImageError::IoError(source) => io_err(source),
        other => Error::Format(other.to_string()),
    })?;
    out.into_inner()
        .map_err(|e| io_err(e.into_error()))?
        .sync_all()
        .map_err(io_err)
}

/// `1 - v` on every channel.
pub fn invert(img: &RasterImage) -> RasterImage {
    img.map(|p| p.map(|v| 1.0 - v))
}

pub fn clamp01(img: &RasterImage) -> RasterImage {
    img.map(|p| p.map(|v| v.clamp(0.0, 1.0)))
}

/// BT.601 luma.
pub fn to_gray(img: &RasterImage) -> ScalarField {
    img.map(|[r, g, b]| 0.299 * r + 0.587 * g + 0.114 * b)
}
