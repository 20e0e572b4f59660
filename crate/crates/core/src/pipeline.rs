//! Image-to-features pipeline and the configuration fingerprint that ties an
//! index to the settings its features were extracted with.

use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::features::{extract_features, FeatureError, FeatureSet, SiftConfig};
use crate::imaging::{
    preprocess, quality_gate, GateDecision, ImagingError, PreprocessConfig, RasterImage,
};
use crate::label::PatternLabel;
use crate::matching::MatchConfig;

/// SHA-256 over the settings that influence extracted features.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint(pub [u8; 32]);

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|b| write!(f, "{b:02x}"))
    }
}

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fingerprint({self})")
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("quality gate: {0}")]
    Gate(String),
    #[error("preprocess: {0}")]
    Preprocess(ImagingError),
    #[error("features: {0}")]
    Features(FeatureError),
}

/// Every tunable setting, as read from a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub preprocess: PreprocessConfig,
    pub sift: SiftConfig,
    pub matching: MatchConfig,
}

impl Settings {
    pub fn pipeline(&self) -> Pipeline {
        Pipeline {
            preprocess: self.preprocess.clone(),
            sift: self.sift.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Pipeline {
    pub preprocess: PreprocessConfig,
    pub sift: SiftConfig,
}

impl Pipeline {
    pub fn validate(&self) -> Result<(), String> {
        self.preprocess.validate().map_err(|e| e.to_string())?;
        self.sift.validate().map_err(|e| e.to_string())
    }

    /// Gate settings are excluded: they decide which images get in, not what
    /// their features look like.
    pub fn fingerprint(&self) -> Fingerprint {
        let p = &self.preprocess;
        let s = &self.sift;
        let mut h = Sha256::new();
        h.update(b"archlens-features/1");
        h.update((p.working_width as u64).to_le_bytes());
        h.update((p.working_height as u64).to_le_bytes());
        h.update(p.denoise_sigma.to_le_bytes());
        h.update(s.octaves.to_le_bytes());
        h.update(s.scales_per_octave.to_le_bytes());
        h.update(s.base_sigma.to_le_bytes());
        h.update(s.contrast_threshold.to_le_bytes());
        h.update(s.edge_threshold.to_le_bytes());
        h.update(s.magnitude_clamp.to_le_bytes());
        h.update([s.duplicate_orientations as u8]);
        Fingerprint(h.finalize().into())
    }

    /// Gate, preprocess and extract. A gate override downgrades a rejection
    /// to a logged warning.
    pub fn extract(
        &self,
        img: &RasterImage,
        image_id: &str,
        label: Option<PatternLabel>,
    ) -> Result<FeatureSet, PipelineError> {
        match quality_gate(img, &self.preprocess) {
            GateDecision::Accept => {}
            GateDecision::AcceptWithWarning(reason) => {
                warn!("{image_id}: {reason} (gate overridden)")
            }
            GateDecision::Reject(reason) => return Err(PipelineError::Gate(reason)),
        }
        let gray = preprocess(img, &self.preprocess).map_err(PipelineError::Preprocess)?;
        let fs = extract_features(&gray, &self.sift, image_id, label)
            .map_err(PipelineError::Features)?;
        if fs.is_empty() {
            warn!("{image_id}: no keypoints survived extraction");
        }
        Ok(fs)
    }
}
