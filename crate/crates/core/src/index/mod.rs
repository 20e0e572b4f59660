//! The labeled corpus of feature sets: building it from a directory tree,
//! persisting it, and ranking it against a query.

mod format;

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use thiserror::Error;

use crate::features::FeatureSet;
use crate::imaging::load_image;
use crate::label::UnknownLabel;
use crate::matching::{compare, MatchConfig, MatchError};
use crate::pipeline::{Fingerprint, Pipeline};

pub use crate::label::PatternLabel;
pub use format::{load_index, save_index, FORMAT_VERSION, MAGIC};

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("{}: {cause}", path.display())]
    Io {
        path: PathBuf,
        cause: std::io::Error,
    },
    #[error("dataset directory `{dir}` is not a pattern label: {cause}")]
    UnknownLabel { dir: String, cause: UnknownLabel },
    #[error("no indexable images under {}", .0.display())]
    EmptyDataset(PathBuf),
    #[error("duplicate image id `{0}`")]
    DuplicateId(String),
    #[error("corrupt index file: {0}")]
    Corrupt(String),
    #[error("incompatible index format version {found} (this build reads version {expected})")]
    Incompatible { found: u32, expected: u32 },
    #[error("query features were extracted with config {query}, index uses {index}")]
    ConfigMismatch {
        index: Fingerprint,
        query: Fingerprint,
    },
    #[error("score matrix has dimension {dim} but the index holds {records} records")]
    MatrixShape { dim: usize, records: usize },
    #[error("invalid pipeline config: {0}")]
    Config(String),
    #[error(transparent)]
    Match(#[from] MatchError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexRecord {
    /// Dataset-relative path, `<label>/<file>`; it doubles as the source path.
    pub image_id: String,
    pub label: PatternLabel,
    pub features: FeatureSet,
}

impl IndexRecord {
    /// The feature set's own id and label are overwritten so the three never disagree.
    pub fn new(image_id: impl Into<String>, label: PatternLabel, features: FeatureSet) -> Self {
        let image_id = image_id.into();
        let features = features.relabeled(image_id.clone(), Some(label));
        Self {
            image_id,
            label,
            features,
        }
    }

    pub fn source_path(&self, dataset_root: &Path) -> PathBuf {
        dataset_root.join(&self.image_id)
    }
}

/// Square matrix of pairwise dissimilarity scores, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    dim: usize,
    values: Vec<f64>,
}

impl ScoreMatrix {
    pub fn from_vec(dim: usize, values: Vec<f64>) -> Option<Self> {
        (values.len() == dim * dim).then_some(Self { dim, values })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                values.push(f(i, j));
            }
        }
        Self { dim, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

/// A score matrix together with the matching settings that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct CachedScores {
    pub matching: MatchConfig,
    pub matrix: ScoreMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageIndex {
    fingerprint: Fingerprint,
    records: Vec<IndexRecord>,
    scores: Option<CachedScores>,
}

impl ImageIndex {
    pub fn new(fingerprint: Fingerprint, records: Vec<IndexRecord>) -> Result<Self, IndexError> {
        let mut seen = BTreeSet::new();
        for r in &records {
            if !seen.insert(r.image_id.as_str()) {
                return Err(IndexError::DuplicateId(r.image_id.clone()));
            }
        }
        Ok(Self {
            fingerprint,
            records,
            scores: None,
        })
    }

    pub fn with_scores(mut self, scores: CachedScores) -> Result<Self, IndexError> {
        if scores.matrix.dim() != self.records.len() {
            return Err(IndexError::MatrixShape {
                dim: scores.matrix.dim(),
                records: self.records.len(),
            });
        }
        self.scores = Some(scores);
        Ok(self)
    }

    pub fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }

    pub fn records(&self) -> &[IndexRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn scores(&self) -> Option<&CachedScores> {
        self.scores.as_ref()
    }

    pub fn labels(&self) -> Vec<PatternLabel> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.image_id.as_str()).collect()
    }

    /// Distinct labels present, in canonical order.
    pub fn label_set(&self) -> Vec<PatternLabel> {
        let set: BTreeSet<_> = self.records.iter().map(|r| r.label).collect();
        set.into_iter().collect()
    }

    /// The cached matrix if it was computed with `cfg`, otherwise a fresh one.
    pub fn score_matrix(
        &self,
        cfg: &MatchConfig,
    ) -> Result<std::borrow::Cow<'_, ScoreMatrix>, IndexError> {
        match &self.scores {
            Some(c) if &c.matching == cfg => Ok(std::borrow::Cow::Borrowed(&c.matrix)),
            _ => compute_pairwise_scores(self, cfg).map(std::borrow::Cow::Owned),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildReport {
    pub indexed: usize,
    pub rejected: Vec<Rejection>,
}

impl fmt::Display for BuildReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rejected {
            writeln!(f, "REJECTED {} {}", r.path, r.reason)?;
        }
        write!(
            f,
            "INDEXED {} REJECTED {}",
            self.indexed,
            self.rejected.len()
        )
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IndexError + '_ {
    move |source| IndexError::Io {
        path: path.to_path_buf(),
        cause: source,
    }
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn sorted_entries(dir: &Path) -> Result<Vec<fs::DirEntry>, IndexError> {
    let mut entries = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .collect::<Result<Vec<_>, _>>()
        .map_err(io_err(dir))?;
    entries.sort_by_key(|e| e.file_name());
    Ok(entries)
}

/// Lists `(image_id, label, path)` for every image file, in label-directory
/// then file-name order. Loose files at the root are ignored.
fn scan_dataset(root: &Path) -> Result<Vec<(String, PatternLabel, PathBuf)>, IndexError> {
    let mut out = Vec::new();
    for entry in sorted_entries(root)? {
        let path = entry.path();
        if !path.is_dir() {
            continue;
        }
        let dir = entry.file_name().to_string_lossy().into_owned();
        let label: PatternLabel = dir.parse().map_err(|source| IndexError::UnknownLabel {
            dir: dir.clone(),
            cause: source,
        })?;
        for file in sorted_entries(&path)? {
            let fp = file.path();
            if fp.is_file() && is_image(&fp) {
                let id = format!("{dir}/{}", file.file_name().to_string_lossy());
                out.push((id, label, fp));
            }
        }
    }
    Ok(out)
}

/// Indexes `<root>/<label>/<image>` files. Images that fail to decode, fail
/// the quality gate, or fail extraction go to the report instead.
pub fn build_index(
    root: &Path,
    pipeline: &Pipeline,
) -> Result<(ImageIndex, BuildReport), IndexError> {
    pipeline.validate().map_err(IndexError::Config)?;
    let files = scan_dataset(root)?;
    if files.is_empty() {
        return Err(IndexError::EmptyDataset(root.to_path_buf()));
    }
    let outcomes: Vec<Result<IndexRecord, Rejection>> = files
        .par_iter()
        .map(|(id, label, path)| {
            let reject = |reason: String| Rejection {
                path: id.clone(),
                reason,
            };
            let img = load_image(path).map_err(|e| reject(e.to_string()))?;
            let fs = pipeline
                .extract(&img, id, Some(*label))
                .map_err(|e| reject(e.to_string()))?;
            Ok(IndexRecord::new(id.clone(), *label, fs))
        })
        .collect();

    let mut records = Vec::new();
    let mut report = BuildReport::default();
    for o in outcomes {
        match o {
            Ok(r) => records.push(r),
            Err(rej) => {
                warn!("rejected {}: {}", rej.path, rej.reason);
                report.rejected.push(rej);
            }
        }
    }
    if records.is_empty() {
        return Err(IndexError::EmptyDataset(root.to_path_buf()));
    }
    report.indexed = records.len();
    info!(
        "indexed {} images, rejected {}",
        report.indexed,
        report.rejected.len()
    );
    Ok((ImageIndex::new(pipeline.fingerprint(), records)?, report))
}

/// All pairwise scores. Each unordered pair is matched once and mirrored; the
/// diagonal is zero by convention.
pub fn compute_pairwise_scores(
    index: &ImageIndex,
    cfg: &MatchConfig,
) -> Result<ScoreMatrix, IndexError> {
    cfg.validate()?;
    let recs = index.records();
    let n = recs.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| compare(&recs[i].features, &recs[j].features, cfg).map(|m| m.score))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(ScoreMatrix::from_fn(n, |i, j| match i.cmp(&j) {
        Ordering::Equal => 0.0,
        Ordering::Less => upper[i][j - i - 1],
        Ordering::Greater => upper[j][i - j - 1],
    }))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Ranked {
    pub image_id: String,
    pub label: PatternLabel,
    pub score: f64,
}

/// Ascending score, then image id.
pub fn rank_order(a: (f64, &str), b: (f64, &str)) -> Ordering {
    a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1))
}

/// Scores `q` against every record whose id differs from `exclude`.
pub(crate) fn rank_all(
    index: &ImageIndex,
    q: &FeatureSet,
    cfg: &MatchConfig,
    exclude: Option<&str>,
) -> Result<Vec<Ranked>, IndexError> {
    cfg.validate()?;
    let mut ranked = index
        .records()
        .par_iter()
        .filter(|r| Some(r.image_id.as_str()) != exclude)
        .map(|r| {
            compare(q, &r.features, cfg).map(|m| Ranked {
                image_id: r.image_id.clone(),
                label: r.label,
                score: m.score,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    ranked.sort_by(|a, b| rank_order((a.score, &a.image_id), (b.score, &b.image_id)));
    Ok(ranked)
}

/// Top-`k` records by ascending dissimilarity to `q`, ties by image id.
pub fn query(
    index: &ImageIndex,
    q: &FeatureSet,
    q_fingerprint: Fingerprint,
    k: usize,
    cfg: &MatchConfig,
) -> Result<Vec<Ranked>, IndexError> {
    if q_fingerprint != index.fingerprint() {
        return Err(IndexError::ConfigMismatch {
            index: index.fingerprint(),
            query: q_fingerprint,
        });
    }
    let mut ranked = rank_all(index, q, cfg, None)?;
    ranked.truncate(k);
    Ok(ranked)
}
