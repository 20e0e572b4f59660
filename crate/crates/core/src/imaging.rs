//! Raster decoding, the ingestion quality gate, and normalization to the
//! grayscale working resolution used by feature extraction.

use std::fmt;
use std::path::Path;

use image::{DynamicImage, ImageFormat, ImageReader};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("cannot read {path}: {cause}")]
    Io { path: String, cause: std::io::Error },
    #[error("unsupported or corrupt image: {0}")]
    Format(String),
    #[error("invalid preprocessing config: {0}")]
    Config(String),
}

/// Decoded 8-bit image, row-major, 1 (gray) or 3 (RGB) channels.
#[derive(Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "RasterImage{{{}x{}x{}}}",
            self.width, self.height, self.channels
        )
    }
}

impl RasterImage {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::Format(format!(
                "degenerate dimensions {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(ImagingError::Format(format!(
                "unsupported channel count {channels}"
            )));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(ImagingError::Format(format!(
                "pixel buffer has {} bytes, expected {expected}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Single-colour image; `value` is repeated across all channels.
    pub fn filled(width: u32, height: u32, channels: u8, value: u8) -> Result<Self, ImagingError> {
        let len = width as usize * height as usize * channels as usize;
        Self::new(width, height, channels, vec![value; len])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let c = self.channels as usize;
        let i = (y as usize * self.width as usize + x as usize) * c;
        &self.data[i..i + c]
    }

    fn from_dynamic(img: DynamicImage) -> Result<Self, ImagingError> {
        let color = img.color();
        if color.has_color() {
            let rgb = img.to_rgb8();
            let (w, h) = rgb.dimensions();
            Self::new(w, h, 3, rgb.into_raw())
        } else {
            let luma = img.to_luma8();
            let (w, h) = luma.dimensions();
            Self::new(w, h, 1, luma.into_raw())
        }
    }

    /// Encode as PNG. Used for fixtures and the synthetic corpus writer.
    pub fn save_png(&self, path: &Path) -> Result<(), ImagingError> {
        let color = if self.channels == 3 {
            image::ExtendedColorType::Rgb8
        } else {
            image::ExtendedColorType::L8
        };
        image::save_buffer_with_format(
            path,
            &self.data,
            self.width,
            self.height,
            color,
            ImageFormat::Png,
        )
        .map_err(|e| match e {
            image::ImageError::IoError(source) => ImagingError::Io {
                path: path.display().to_string(),
                cause: source,
            },
            other => ImagingError::Format(other.to_string()),
        })
    }
}

/// Decode a PNG or JPEG file. Alpha is dropped; 16-bit samples are reduced to 8 bits.
pub fn load_image(path: &Path) -> Result<RasterImage, ImagingError> {
    let bytes = std::fs::read(path).map_err(|source| ImagingError::Io {
        path: path.display().to_string(),
        cause: source,
    })?;
    decode_image(&bytes)
}

pub fn decode_image(bytes: &[u8]) -> Result<RasterImage, ImagingError> {
    if bytes.is_empty() {
        return Err(ImagingError::Format("empty file".into()));
    }
    let reader = ImageReader::new(std::io::Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| ImagingError::Format(e.to_string()))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Jpeg) => {}
        Some(other) => {
            return Err(ImagingError::Format(format!(
                "{other:?} is not an accepted format (PNG or JPEG only)"
            )))
        }
        None => return Err(ImagingError::Format("unrecognized image signature".into())),
    }
    let img = reader
        .decode()
        .map_err(|e| ImagingError::Format(e.to_string()))?;
    RasterImage::from_dynamic(img)
}

/// Grayscale intensities in `[0, 1]`, row-major.
#[derive(Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GrayImage{{{}x{}}}", self.width, self.height)
    }
}

impl GrayImage {
    /// Values are clamped into `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        assert!(width > 0 && height > 0, "empty gray image");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(ImagingError::Format(format!(
                "buffer of {} values does not describe a {width}x{height} image",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data: data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Minimum accepted side length at corpus ingestion.
    pub min_ingest_dim: u32,
    pub working_width: usize,
    pub working_height: usize,
    /// Gaussian denoise std-dev in source pixels; 0 disables smoothing.
    pub denoise_sigma: f32,
    pub gate_override: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            min_ingest_dim: 350,
            working_width: 100,
            working_height: 100,
            denoise_sigma: 0.5,
            gate_override: false,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<(), ImagingError> {
        if self.working_width < 16 || self.working_height < 16 {
            return Err(ImagingError::Config(format!(
                "working resolution {}x{} is below 16x16",
                self.working_width, self.working_height
            )));
        }
        if !(self.denoise_sigma >= 0.0 && self.denoise_sigma.is_finite()) {
            return Err(ImagingError::Config(format!(
                "denoise_sigma must be finite and >= 0, got {}",
                self.denoise_sigma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateDecision {
    Accept,
    /// Below the gate but let through by `gate_override`.
    AcceptWithWarning(String),
    Reject(String),
}

impl GateDecision {
    pub fn is_accepted(&self) -> bool {
        !matches!(self, GateDecision::Reject(_))
    }
}

pub fn quality_gate(img: &RasterImage, cfg: &PreprocessConfig) -> GateDecision {
    let (w, h) = (img.width(), img.height());
    if w.min(h) >= cfg.min_ingest_dim {
        return GateDecision::Accept;
    }
    let short = if w <= h { ("width", w) } else { ("height", h) };
    let reason = format!(
        "{} {} px is below the {} px minimum ({}x{})",
        short.0, short.1, cfg.min_ingest_dim, w, h
    );
    if cfg.gate_override {
        GateDecision::AcceptWithWarning(reason)
    } else {
        GateDecision::Reject(reason)
    }
}

const LUMA_R: f32 = 0.299;
const LUMA_G: f32 = 0.587;
const LUMA_B: f32 = 0.114;

pub fn to_grayscale(img: &RasterImage) -> Result<GrayImage, ImagingError> {
    let data: Vec<f32> = match img.channels() {
        1 => img.data().iter().map(|&v| v as f32 / 255.0).collect(),
        3 => img
            .data()
            .chunks_exact(3)
            .map(|p| {
                let l = LUMA_R * p[0] as f32 + LUMA_G * p[1] as f32 + LUMA_B * p[2] as f32;
                (l / 255.0).clamp(0.0, 1.0)
            })
            .collect(),
        c => {
            return Err(ImagingError::Format(format!(
                "unsupported channel count {c}"
            )))
        }
    };
    GrayImage::from_vec(img.width() as usize, img.height() as usize, data)
}

/// Grayscale, denoise, then resample to exactly the working resolution.
pub fn preprocess(img: &RasterImage, cfg: &PreprocessConfig) -> Result<GrayImage, ImagingError> {
    cfg.validate()?;
    let gray = to_grayscale(img)?;
    let smooth = gaussian_blur(&gray, cfg.denoise_sigma);
    Ok(resize_bilinear(
        &smooth,
        cfg.working_width,
        cfg.working_height,
    ))
}

/// Normalized 1-D Gaussian taps with radius `ceil(4 sigma)`.
pub(crate) fn gaussian_kernel(sigma: f32) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil().max(1.0) as i32;
    let denom = 2.0 * sigma as f64 * sigma as f64;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i as f64 * i as f64) / denom).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Separable Gaussian blur with edge replication. `sigma <= 0` copies the input.
pub fn gaussian_blur(img: &GrayImage, sigma: f32) -> GrayImage {
    let mut data = blur_buffer(img.width, img.height, &img.data, sigma);
    data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    GrayImage {
        width: img.width,
        height: img.height,
        data,
    }
}

/// Unclamped separable blur of a row-major buffer.
pub(crate) fn blur_buffer(w: usize, h: usize, src: &[f32], sigma: f32) -> Vec<f32> {
    if sigma <= 0.0 {
        return src.to_vec();
    }
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;

    let mut tmp = vec![0f64; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0f64;
            for (k, &t) in kernel.iter().enumerate() {
                acc += t * row[clamp(x as isize + k as isize - r, w)] as f64;
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0f64;
            for (k, &t) in kernel.iter().enumerate() {
                acc += t * tmp[clamp(y as isize + k as isize - r, h) * w + x];
            }
            out[y * w + x] = acc as f32;
        }
    }
    out
}

/// Per-output-sample source taps for a triangle (bilinear) filter. When
/// shrinking, the triangle support widens with the scale factor so every
/// source pixel contributes; when enlarging it is plain linear interpolation.
fn triangle_taps(src: usize, dst: usize) -> Vec<(usize, Vec<f64>)> {
    let scale = src as f64 / dst as f64;
    let support = scale.max(1.0);
    (0..dst)
        .map(|i| {
            let center = (i as f64 + 0.5) * scale;
            let lo = ((center - support).floor().max(0.0)) as usize;
            let hi = ((center + support).ceil() as usize).min(src);
            let mut weights: Vec<f64> = (lo..hi)
                .map(|j| {
                    let d = ((j as f64 + 0.5 - center) / support).abs();
                    (1.0 - d).max(0.0)
                })
                .collect();
            let sum: f64 = weights.iter().sum();
            if sum > 0.0 {
                weights.iter_mut().for_each(|w| *w /= sum);
            }
            // Trim zero-weight edges so the first tap index is meaningful.
            let first = weights.iter().position(|&w| w > 0.0).unwrap_or(0);
            let last = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
            (lo + first, weights[first..=last].to_vec())
        })
        .collect()
}

/// Separable bilinear resample to `width x height` (aspect ratio is not kept).
pub fn resize_bilinear(img: &GrayImage, width: usize, height: usize) -> GrayImage {
    if img.width == width && img.height == height {
        return img.clone();
    }
    let xs = triangle_taps(img.width, width);
    let ys = triangle_taps(img.height, height);

    let mut tmp = vec![0f64; width * img.height];
    for y in 0..img.height {
        let row = &img.data[y * img.width..(y + 1) * img.width];
        for (x, (start, taps)) in xs.iter().enumerate() {
            tmp[y * width + x] = taps
                .iter()
                .enumerate()
                .map(|(k, &t)| t * row[start + k] as f64)
                .sum();
        }
    }
    let mut out = vec![0f32; width * height];
    for (y, (start, taps)) in ys.iter().enumerate() {
        for x in 0..width {
            let v: f64 = taps
                .iter()
                .enumerate()
                .map(|(k, &t)| t * tmp[(start + k) * width + x])
                .sum();
            out[y * width + x] = (v as f32).clamp(0.0, 1.0);
        }
    }
    GrayImage {
        width,
        height,
        data: out,
    }
}

/// Bilinear resample of an 8-bit raster, channel by channel.
pub fn resize_raster(img: &RasterImage, width: u32, height: u32) -> RasterImage {
    let c = img.channels() as usize;
    let (sw, sh) = (img.width() as usize, img.height() as usize);
    let (dw, dh) = (width as usize, height as usize);
    let mut out = vec![0u8; dw * dh * c];
    for ch in 0..c {
        let plane: Vec<f32> = img
            .data()
            .iter()
            .skip(ch)
            .step_by(c)
            .map(|&v| v as f32 / 255.0)
            .collect();
        let gray = GrayImage {
            width: sw,
            height: sh,
            data: plane,
        };
        let resized = resize_bilinear(&gray, dw, dh);
        for (i, v) in resized.data.iter().enumerate() {
            out[i * c + ch] = (v * 255.0).round() as u8;
        }
    }
    RasterImage {
        width,
        height,
        channels: img.channels(),
        data: out,
    }
}
