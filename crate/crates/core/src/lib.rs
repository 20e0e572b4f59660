//! Architecture diagram recognition and quality-attribute evaluation.
//!
//! Diagrams are normalized to a small grayscale working image, described by
//! scale-invariant keypoints, and compared pairwise by the fraction of
//! mutually matched descriptors. A labeled corpus of feature sets supports
//! rank-1 classification, recognition-rate evaluation, and a knowledge base
//! that maps the recognized pattern to quality-attribute strengths,
//! weaknesses, and remedial tactics.

pub mod evaluation;
pub mod features;
pub mod imaging;
pub mod index;
pub mod knowledge;
pub mod label;
pub mod matching;
pub mod pipeline;
pub mod synthetic;

pub use evaluation::{
    class_subset_crr, classify, genuine_imposter_split, leave_one_out_crr, Classification,
    CrrReport, EvaluationError, SamplingPolicy, ScoreDistributions, SubsetCrrCurve,
};

pub use features::{extract_features, Descriptor, FeatureError, FeatureSet, Keypoint, SiftConfig};
pub use imaging::{GrayImage, ImagingError, PreprocessConfig, RasterImage};
pub use index::{
    build_index, compute_pairwise_scores, load_index, query, save_index, BuildReport, ImageIndex,
    IndexError, IndexRecord, Ranked, ScoreMatrix,
};
pub use knowledge::{
    evaluate_design, load_kb, EvaluationReport, KbError, KnowledgeBase, QaRef, Tactic,
};
pub use label::PatternLabel;
pub use matching::{compare, dissimilarity_score, MatchConfig, MatchResult};
pub use pipeline::{Fingerprint, Pipeline, Settings};
