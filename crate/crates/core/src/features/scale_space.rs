use crate::imaging::{blur_buffer, GrayImage};

use super::{FeatureError, SiftConfig, DESCRIPTOR_PATCH};

/// Blur already present in a freshly preprocessed image.
const ASSUMED_INPUT_SIGMA: f32 = 0.5;

/// A single real-valued level of the pyramid. DoG planes may be negative.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Plane {
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    fn blurred(&self, sigma: f32) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: blur_buffer(self.width, self.height, &self.data, sigma),
        }
    }

    /// Keeps every second pixel in both directions (floor halving).
    fn halved(&self) -> Plane {
        let (w, h) = (self.width / 2, self.height / 2);
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                data.push(self.at(2 * x, 2 * y));
            }
        }
        Plane {
            width: w,
            height: h,
            data,
        }
    }

    fn minus(&self, other: &Plane) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Octave {
    /// `scales_per_octave + 3` progressively blurred levels.
    pub gaussians: Vec<Plane>,
    /// `scales_per_octave + 2` differences of adjacent gaussian levels.
    pub dogs: Vec<Plane>,
}

impl Octave {
    pub fn width(&self) -> usize {
        self.gaussians[0].width
    }

    pub fn height(&self) -> usize {
        self.gaussians[0].height
    }
}

#[derive(Debug, Clone)]
pub struct ScaleSpace {
    pub octaves: Vec<Octave>,
    pub base_sigma: f32,
    pub scales_per_octave: usize,
}

impl ScaleSpace {
    /// Blur of gaussian level `level` relative to its own octave's sampling grid.
    pub fn level_sigma(&self, level: f32) -> f32 {
        self.base_sigma * 2f32.powf(level / self.scales_per_octave as f32)
    }
}

pub fn build_scale_space(img: &GrayImage, cfg: &SiftConfig) -> Result<ScaleSpace, FeatureError> {
    cfg.validate()?;
    let min_side = img.width().min(img.height());
    if min_side < 2 * DESCRIPTOR_PATCH {
        return Err(FeatureError::ImageTooSmall {
            width: img.width(),
            height: img.height(),
            min: 2 * DESCRIPTOR_PATCH,
        });
    }

    let s = cfg.scales_per_octave as usize;
    let sigma0 = cfg.base_sigma;
    let k = 2f64.powf(1.0 / s as f64);
    // Incremental blur taking level i-1 to level i.
    let increments: Vec<f32> = (1..s + 3)
        .map(|i| {
            let prev = sigma0 as f64 * k.powi(i as i32 - 1);
            let total = prev * k;
            (total * total - prev * prev).sqrt() as f32
        })
        .collect();

    let input = Plane {
        width: img.width(),
        height: img.height(),
        data: img.data().to_vec(),
    };
    let seed_sigma = (sigma0 * sigma0 - ASSUMED_INPUT_SIGMA * ASSUMED_INPUT_SIGMA)
        .max(0.0)
        .sqrt();
    let mut base = input.blurred(seed_sigma);

    let mut octaves = Vec::with_capacity(cfg.octaves as usize);
    for o in 0..cfg.octaves as usize {
        if o > 0 {
            let next = octaves_last(&octaves).gaussians[s].halved();
            if next.width.min(next.height) < 4 {
                break;
            }
            base = next;
        }
        let mut gaussians = Vec::with_capacity(s + 3);
        gaussians.push(base.clone());
        for inc in &increments {
            let blurred = gaussians.last().unwrap().blurred(*inc);
            gaussians.push(blurred);
        }
        let dogs = gaussians.windows(2).map(|w| w[1].minus(&w[0])).collect();
        octaves.push(Octave { gaussians, dogs });
    }

    Ok(ScaleSpace {
        octaves,
        base_sigma: sigma0,
        scales_per_octave: s,
    })
}

fn octaves_last(octaves: &[Octave]) -> &Octave {
    octaves.last().expect("at least one octave built")
}
