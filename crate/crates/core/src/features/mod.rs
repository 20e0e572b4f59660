//! Scale-invariant interest points and 128-dimensional gradient descriptors.
//!
//! The pipeline is the classic one: a Gaussian / difference-of-Gaussian
//! pyramid, 3x3x3 extrema refined to sub-pixel accuracy, contrast and edge
//! rejection, dominant orientations from a 36-bin histogram, and a 4x4x8
//! orientation histogram descriptor in the keypoint's rotated frame.

mod descriptor;
mod detect;
mod scale_space;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::GrayImage;
use crate::label::PatternLabel;

pub use descriptor::compute_descriptors;
pub use detect::{detect_keypoints, ScaleSpaceKeypoint};
pub use scale_space::{build_scale_space, Octave, Plane, ScaleSpace};

pub const DESCRIPTOR_LEN: usize = 128;
/// Side of the descriptor patch, in pixels, at the base blur.
pub const DESCRIPTOR_PATCH: usize = 16;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("image {width}x{height} is too small for feature extraction (need at least {min} px per side)")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("invalid feature config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SiftConfig {
    pub octaves: u32,
    pub scales_per_octave: u32,
    pub base_sigma: f32,
    /// Minimum |DoG| at the refined extremum, on intensities in `[0, 1]`.
    pub contrast_threshold: f32,
    /// Maximum principal-curvature ratio.
    pub edge_threshold: f32,
    pub magnitude_clamp: f32,
    /// Spawn extra keypoints for histogram peaks within 80% of the maximum.
    pub duplicate_orientations: bool,
}

impl Default for SiftConfig {
    fn default() -> Self {
        Self {
            octaves: 4,
            scales_per_octave: 3,
            base_sigma: 1.6,
            contrast_threshold: 0.03,
            edge_threshold: 10.0,
            magnitude_clamp: 0.2,
            duplicate_orientations: true,
        }
    }
}

impl SiftConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        let bad = |msg: String| Err(FeatureError::Config(msg));
        if self.octaves < 1 {
            return bad("octaves must be >= 1".into());
        }
        if self.scales_per_octave < 1 {
            return bad("scales_per_octave must be >= 1".into());
        }
        for (name, v) in [
            ("base_sigma", self.base_sigma),
            ("contrast_threshold", self.contrast_threshold),
            ("edge_threshold", self.edge_threshold),
            ("magnitude_clamp", self.magnitude_clamp),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        Ok(())
    }
}

/// Interest point in working-image pixel coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Keypoint {
    pub x: f32,
    pub y: f32,
    /// Blur in working-image pixels.
    pub scale: f32,
    /// Radians in `[0, 2pi)`.
    pub orientation: f32,
    pub response: f32,
}

/// Unit-norm, non-negative, 128 values.
#[derive(Clone, PartialEq)]
pub struct Descriptor(pub [f32; DESCRIPTOR_LEN]);

impl std::fmt::Debug for Descriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Descriptor([{:.3}, {:.3}, ...])", self.0[0], self.0[1])
    }
}

impl Descriptor {
    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn norm(&self) -> f32 {
        self.0.iter().map(|v| v * v).sum::<f32>().sqrt()
    }

    pub fn distance_squared(&self, other: &Descriptor) -> f32 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// Keypoints and their descriptors for one image, plus identity metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub image_id: String,
    pub label: Option<PatternLabel>,
    keypoints: Vec<Keypoint>,
    descriptors: Vec<Descriptor>,
}

impl FeatureSet {
    pub fn new(
        image_id: impl Into<String>,
        label: Option<PatternLabel>,
        keypoints: Vec<Keypoint>,
        descriptors: Vec<Descriptor>,
    ) -> Self {
        assert_eq!(
            keypoints.len(),
            descriptors.len(),
            "keypoints and descriptors must be parallel"
        );
        Self {
            image_id: image_id.into(),
            label,
            keypoints,
            descriptors,
        }
    }

    pub fn empty(image_id: impl Into<String>, label: Option<PatternLabel>) -> Self {
        Self::new(image_id, label, Vec::new(), Vec::new())
    }

    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    pub fn keypoints(&self) -> &[Keypoint] {
        &self.keypoints
    }

    pub fn descriptors(&self) -> &[Descriptor] {
        &self.descriptors
    }

    /// Same features under a different identity.
    pub fn relabeled(&self, image_id: impl Into<String>, label: Option<PatternLabel>) -> Self {
        Self {
            image_id: image_id.into(),
            label,
            ..self.clone()
        }
    }
}

pub fn extract_features(
    img: &GrayImage,
    cfg: &SiftConfig,
    image_id: impl Into<String>,
    label: Option<PatternLabel>,
) -> Result<FeatureSet, FeatureError> {
    let space = build_scale_space(img, cfg)?;
    let keypoints = detect_keypoints(&space, cfg);
    let (kps, descs) = compute_descriptors(&space, &keypoints, cfg)
        .into_iter()
        .unzip();
    Ok(FeatureSet::new(image_id, label, kps, descs))
}
