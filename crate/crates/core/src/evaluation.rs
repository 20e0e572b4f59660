//! Rank-1 classification, correct recognition rate, genuine/imposter score
//! distributions, and recognition rate as a function of the number of classes.

use std::collections::BTreeMap;

use log::warn;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureSet;
use crate::index::{rank_all, rank_order, ImageIndex, IndexError, Ranked, ScoreMatrix};
use crate::label::PatternLabel;
use crate::matching::MatchConfig;

/// Default number of subsets evaluated per `k` when enumeration would exceed it.
pub const DEFAULT_SAMPLE_CAP: usize = 200;

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("the index is empty")]
    EmptyIndex,
    #[error("leave-one-out needs at least 2 records, the index has {0}")]
    TooFewRecords(usize),
    #[error("the index holds a single label ({0}); recognition rate would be trivially 100%")]
    SingleLabel(PatternLabel),
    #[error("score matrix is {dim}x{dim} but {records} records were given")]
    Misaligned { dim: usize, records: usize },
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: PatternLabel,
    pub score: f64,
    /// The nearest records, best first.
    pub evidence: Vec<Ranked>,
    /// Set when the rank-1 score is 1.0, i.e. nothing matched at all.
    pub low_confidence: bool,
}

/// Assigns the label of the least dissimilar record, never `q` itself.
pub fn classify(
    index: &ImageIndex,
    q: &FeatureSet,
    cfg: &MatchConfig,
    top_k: usize,
) -> Result<Classification, EvaluationError> {
    let mut ranked = rank_all(index, q, cfg, Some(&q.image_id))?;
    let best = ranked.first().cloned().ok_or(EvaluationError::EmptyIndex)?;
    let low_confidence = q.is_empty() || best.score >= 1.0;
    if low_confidence {
        warn!(
            "{}: rank-1 score {:.3}, the assigned label {} carries no evidence",
            q.image_id, best.score, best.label
        );
    }
    ranked.truncate(top_k.max(1));
    Ok(Classification {
        label: best.label,
        score: best.score,
        evidence: ranked,
        low_confidence,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCrr {
    pub label: PatternLabel,
    pub n: usize,
    pub x: usize,
    pub crr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrrReport {
    pub n: usize,
    pub x: usize,
    /// Percentage, `100 x / n`.
    pub crr: f64,
    pub per_class: Vec<ClassCrr>,
    /// Row and column order of `confusion`.
    pub labels: Vec<PatternLabel>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

pub fn crr_percent(x: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        100.0 * x as f64 / n as f64
    }
}

fn check_aligned(
    m: &ScoreMatrix,
    labels: &[PatternLabel],
    ids: &[&str],
) -> Result<(), EvaluationError> {
    if m.dim() != labels.len() || labels.len() != ids.len() {
        return Err(EvaluationError::Misaligned {
            dim: m.dim(),
            records: labels.len().max(ids.len()),
        });
    }
    Ok(())
}

/// Index of the rank-1 neighbour of `i` among `candidates`.
fn rank1(
    m: &ScoreMatrix,
    ids: &[&str],
    i: usize,
    candidates: impl Iterator<Item = usize>,
) -> Option<usize> {
    candidates
        .filter(|&j| j != i)
        .min_by(|&a, &b| rank_order((m.get(i, a), ids[a]), (m.get(i, b), ids[b])))
}

/// Leave-one-out recognition rate from a precomputed score matrix.
pub fn leave_one_out_from_matrix(
    m: &ScoreMatrix,
    labels: &[PatternLabel],
    ids: &[&str],
) -> Result<CrrReport, EvaluationError> {
    check_aligned(m, labels, ids)?;
    let n = labels.len();
    if n < 2 {
        return Err(EvaluationError::TooFewRecords(n));
    }
    let present: Vec<PatternLabel> = {
        let mut v = labels.to_vec();
        v.sort();
        v.dedup();
        v
    };
    if present.len() < 2 {
        return Err(EvaluationError::SingleLabel(present[0]));
    }
    let predictions: Vec<PatternLabel> = (0..n)
        .map(|i| labels[rank1(m, ids, i, 0..n).expect("n >= 2")])
        .collect();
    Ok(tally(&present, labels, &predictions))
}

fn tally(
    present: &[PatternLabel],
    truth: &[PatternLabel],
    predicted: &[PatternLabel],
) -> CrrReport {
    let pos = |l: PatternLabel| present.binary_search(&l).expect("label present");
    let k = present.len();
    let mut confusion = vec![vec![0usize; k]; k];
    for (t, p) in truth.iter().zip(predicted) {
        confusion[pos(*t)][pos(*p)] += 1;
    }
    let per_class: Vec<ClassCrr> = present
        .iter()
        .enumerate()
        .map(|(r, &label)| {
            let n = confusion[r].iter().sum();
            let x = confusion[r][r];
            ClassCrr {
                label,
                n,
                x,
                crr: crr_percent(x, n),
            }
        })
        .collect();
    let n = truth.len();
    let x = per_class.iter().map(|c| c.x).sum();
    CrrReport {
        n,
        x,
        crr: crr_percent(x, n),
        per_class,
        labels: present.to_vec(),
        confusion,
    }
}

pub fn leave_one_out_crr(
    index: &ImageIndex,
    cfg: &MatchConfig,
) -> Result<CrrReport, EvaluationError> {
    let m = index.score_matrix(cfg)?;
    leave_one_out_from_matrix(&m, &index.labels(), &index.ids())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub count: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
}

impl DistributionSummary {
    fn of(scores: &[f64]) -> Self {
        let count = scores.len();
        if count == 0 {
            return Self {
                count,
                mean: None,
                median: None,
            };
        }
        let mut sorted = scores.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if count % 2 == 1 {
            sorted[count / 2]
        } else {
            (sorted[count / 2 - 1] + sorted[count / 2]) / 2.0
        };
        Self {
            count,
            mean: Some(sorted.iter().sum::<f64>() / count as f64),
            median: Some(median),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreDistributions {
    /// How pairs were counted; always `"ordered"` (each image against every other).
    pub policy: &'static str,
    pub genuine: Vec<f64>,
    pub imposter: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub policy: String,
    pub total_pairs: usize,
    pub genuine: DistributionSummary,
    pub imposter: DistributionSummary,
}

impl ScoreDistributions {
    pub fn report(&self) -> DistributionReport {
        DistributionReport {
            policy: self.policy.to_string(),
            total_pairs: self.genuine.len() + self.imposter.len(),
            genuine: DistributionSummary::of(&self.genuine),
            imposter: DistributionSummary::of(&self.imposter),
        }
    }
}

/// Splits off-diagonal entries by label equality, over ordered pairs.
pub fn genuine_imposter_split(m: &ScoreMatrix, labels: &[PatternLabel]) -> ScoreDistributions {
    assert_eq!(m.dim(), labels.len(), "matrix and labels must be aligned");
    let mut genuine = Vec::new();
    let mut imposter = Vec::new();
    for i in 0..labels.len() {
        for j in 0..labels.len() {
            if i == j {
                continue;
            }
            if labels[i] == labels[j] {
                genuine.push(m.get(i, j));
            } else {
                imposter.push(m.get(i, j));
            }
        }
    }
    ScoreDistributions {
        policy: "ordered",
        genuine,
        imposter,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetCrr {
    pub labels: Vec<PatternLabel>,
    pub n: usize,
    pub x: usize,
    pub crr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetCrrPoint {
    pub k: usize,
    /// `C(K, k)`.
    pub total_subsets: u64,
    pub exhaustive: bool,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub subsets: Vec<SubsetCrr>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetCrrCurve {
    pub seed: u64,
    pub sample_cap: usize,
    pub points: Vec<SubsetCrrPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingPolicy {
    pub seed: u64,
    /// Enumerate every subset when there are at most this many, otherwise
    /// draw this many distinct ones uniformly.
    pub sample_cap: usize,
}

impl Default for SamplingPolicy {
    fn default() -> Self {
        Self {
            seed: 0,
            sample_cap: DEFAULT_SAMPLE_CAP,
        }
    }
}

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// The `rank`-th `k`-subset of `0..n` in lexicographic order.
fn unrank_combination(n: usize, k: usize, mut rank: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut next = 0;
    for slot in 0..k {
        loop {
            let with_next = binomial(n - next - 1, k - slot - 1);
            if rank < with_next {
                out.push(next);
                next += 1;
                break;
            }
            rank -= with_next;
            next += 1;
        }
    }
    out
}

fn subsets_for(n: usize, k: usize, policy: &SamplingPolicy) -> (u64, bool, Vec<Vec<usize>>) {
    let total = binomial(n, k);
    if total <= policy.sample_cap as u64 {
        return (
            total,
            true,
            (0..total).map(|r| unrank_combination(n, k, r)).collect(),
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    rng.set_stream(k as u64);
    let mut ranks: Vec<u64> = sample(&mut rng, total as usize, policy.sample_cap)
        .into_iter()
        .map(|r| r as u64)
        .collect();
    ranks.sort_unstable();
    (
        total,
        false,
        ranks
            .into_iter()
            .map(|r| unrank_combination(n, k, r))
            .collect(),
    )
}

/// Recognition rate restricted to every (or a sample of every) `k`-class
/// subset, for `k = 2..=K`.
pub fn class_subset_crr_from_matrix(
    m: &ScoreMatrix,
    labels: &[PatternLabel],
    ids: &[&str],
    policy: &SamplingPolicy,
) -> Result<SubsetCrrCurve, EvaluationError> {
    // Full leave-one-out validates shape, record count and label count.
    leave_one_out_from_matrix(m, labels, ids)?;
    let present: Vec<PatternLabel> = {
        let mut v = labels.to_vec();
        v.sort();
        v.dedup();
        v
    };
    let class_of: Vec<usize> = labels
        .iter()
        .map(|l| present.binary_search(l).unwrap())
        .collect();
    let n = labels.len();
    // Each query's neighbours, best first; a subset's rank-1 is the first
    // neighbour whose class is in the subset.
    let neighbours: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut js: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            js.sort_by(|&a, &b| rank_order((m.get(i, a), ids[a]), (m.get(i, b), ids[b])));
            js
        })
        .collect();

    let big_k = present.len();
    let mut points = Vec::new();
    for k in 2..=big_k {
        let (total, exhaustive, subsets) = subsets_for(big_k, k, policy);
        let results: Vec<SubsetCrr> = subsets
            .par_iter()
            .map(|s| {
                let mut member = vec![false; big_k];
                s.iter().for_each(|&c| member[c] = true);
                let (mut sn, mut sx) = (0, 0);
                for i in (0..n).filter(|&i| member[class_of[i]]) {
                    sn += 1;
                    if let Some(&j) = neighbours[i].iter().find(|&&j| member[class_of[j]]) {
                        sx += (class_of[j] == class_of[i]) as usize;
                    }
                }
                SubsetCrr {
                    labels: s.iter().map(|&c| present[c]).collect(),
                    n: sn,
                    x: sx,
                    crr: crr_percent(sx, sn),
                }
            })
            .collect();
        let crrs: Vec<f64> = results.iter().map(|r| r.crr).collect();
        points.push(SubsetCrrPoint {
            k,
            total_subsets: total,
            exhaustive,
            mean: crrs.iter().sum::<f64>() / crrs.len() as f64,
            min: crrs.iter().copied().fold(f64::INFINITY, f64::min),
            max: crrs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            subsets: results,
        });
    }
    Ok(SubsetCrrCurve {
        seed: policy.seed,
        sample_cap: policy.sample_cap,
        points,
    })
}

pub fn class_subset_crr(
    index: &ImageIndex,
    cfg: &MatchConfig,
    policy: &SamplingPolicy,
) -> Result<SubsetCrrCurve, EvaluationError> {
    let m = index.score_matrix(cfg)?;
    class_subset_crr_from_matrix(&m, &index.labels(), &index.ids(), policy)
}

/// Record counts per label, in canonical label order.
pub fn label_counts(labels: &[PatternLabel]) -> BTreeMap<PatternLabel, usize> {
    let mut out = BTreeMap::new();
    for l in labels {
        *out.entry(*l).or_insert(0) += 1;
    }
    out
}
