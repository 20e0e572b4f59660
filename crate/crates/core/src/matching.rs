//! Descriptor correspondence and the pairwise dissimilarity score
//! `1 - N_ab / min(N_a, N_b)`.

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureSet;

#[derive(Debug, Error, PartialEq)]
pub enum MatchError {
    #[error("{n_ab} correspondences exceed min({n_a}, {n_b})")]
    TooManyMatches { n_a: usize, n_b: usize, n_ab: usize },
    #[error("invalid match config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    /// Nearest / second-nearest distance ratio must be strictly below this.
    pub ratio_threshold: f32,
    pub require_mutual: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            ratio_threshold: 0.75,
            require_mutual: true,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<(), MatchError> {
        if !(self.ratio_threshold > 0.0 && self.ratio_threshold <= 1.0) {
            return Err(MatchError::Config(format!(
                "ratio_threshold must be in (0, 1], got {}",
                self.ratio_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub index_a: usize,
    pub index_b: usize,
    pub distance: f32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dissimilarity {
    pub score: f64,
    /// Set when one side had no keypoints; the score is then 1.0 by convention.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub n_a: usize,
    pub n_b: usize,
    pub n_ab: usize,
    pub score: f64,
    pub degenerate: bool,
    pub correspondences: Vec<Correspondence>,
}

pub fn dissimilarity_score(
    n_a: usize,
    n_b: usize,
    n_ab: usize,
) -> Result<Dissimilarity, MatchError> {
    let min = n_a.min(n_b);
    if n_ab > min {
        return Err(MatchError::TooManyMatches { n_a, n_b, n_ab });
    }
    if min == 0 {
        return Ok(Dissimilarity {
            score: 1.0,
            degenerate: true,
        });
    }
    Ok(Dissimilarity {
        score: 1.0 - n_ab as f64 / min as f64,
        degenerate: false,
    })
}

/// Best and runner-up distance (squared) for one query row, ties to the lowest index.
#[derive(Debug, Clone, Copy)]
struct Nearest {
    index: usize,
    best: f32,
    second: f32,
}

impl Nearest {
    fn passes_ratio(&self, ratio: f32) -> bool {
        // d1 / d2 < t  <=>  d1^2 < t^2 d2^2; a missing runner-up never vetoes.
        self.second.is_infinite() || self.best < ratio * ratio * self.second
    }
}

fn nearest_along<I: Iterator<Item = f32>>(dists: I) -> Option<Nearest> {
    let mut n: Option<Nearest> = None;
    for (j, d) in dists.enumerate() {
        match n.as_mut() {
            None => {
                n = Some(Nearest {
                    index: j,
                    best: d,
                    second: f32::INFINITY,
                })
            }
            Some(cur) => {
                if d < cur.best {
                    cur.second = cur.best;
                    cur.best = d;
                    cur.index = j;
                } else if d < cur.second {
                    cur.second = d;
                }
            }
        }
    }
    n
}

/// One-to-one correspondences between two feature sets.
///
/// Each descriptor of `a` is paired with its nearest descriptor in `b` if the
/// ratio test passes. With `require_mutual`, the pair must also be the nearest
/// neighbour in the reverse direction and pass the ratio test there as well,
/// which makes the result independent of argument order.
pub fn match_descriptors(a: &FeatureSet, b: &FeatureSet, cfg: &MatchConfig) -> Vec<Correspondence> {
    let (da, db) = (a.descriptors(), b.descriptors());
    if da.is_empty() || db.is_empty() {
        return Vec::new();
    }
    let nb = db.len();
    let dist: Vec<f32> = da
        .iter()
        .flat_map(|x| db.iter().map(move |y| x.distance_squared(y)))
        .collect();
    let forward: Vec<Nearest> = (0..da.len())
        .map(|i| nearest_along(dist[i * nb..(i + 1) * nb].iter().copied()).unwrap())
        .collect();

    if !cfg.require_mutual {
        // Keep the closest claimant per target so the result stays one-to-one.
        let mut claimed: Vec<Option<usize>> = vec![None; nb];
        for (i, f) in forward.iter().enumerate() {
            if !f.passes_ratio(cfg.ratio_threshold) {
                continue;
            }
            match claimed[f.index] {
                Some(prev) if forward[prev].best <= f.best => {}
                _ => claimed[f.index] = Some(i),
            }
        }
        return claimed
            .iter()
            .enumerate()
            .filter_map(|(j, c)| c.map(|i| correspondence(i, j, forward[i].best)))
            .collect();
    }

    let backward: Vec<Nearest> = (0..nb)
        .map(|j| nearest_along((0..da.len()).map(|i| dist[i * nb + j])).unwrap())
        .collect();
    forward
        .iter()
        .enumerate()
        .filter(|(i, f)| {
            let back = &backward[f.index];
            back.index == *i
                && f.passes_ratio(cfg.ratio_threshold)
                && back.passes_ratio(cfg.ratio_threshold)
        })
        .map(|(i, f)| correspondence(i, f.index, f.best))
        .collect()
}

fn correspondence(i: usize, j: usize, d2: f32) -> Correspondence {
    Correspondence {
        index_a: i,
        index_b: j,
        distance: d2.sqrt(),
    }
}

pub fn compare(
    a: &FeatureSet,
    b: &FeatureSet,
    cfg: &MatchConfig,
) -> Result<MatchResult, MatchError> {
    let correspondences = match_descriptors(a, b, cfg);
    let (n_a, n_b, n_ab) = (a.len(), b.len(), correspondences.len());
    let d = dissimilarity_score(n_a, n_b, n_ab)?;
    if d.degenerate {
        warn!(
            "comparing {} ({n_a} keypoints) with {} ({n_b} keypoints): empty feature set, score forced to 1.0",
            a.image_id, b.image_id
        );
    }
    Ok(MatchResult {
        n_a,
        n_b,
        n_ab,
        score: d.score,
        degenerate: d.degenerate,
        correspondences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{Descriptor, Keypoint, DESCRIPTOR_LEN};
    use proptest::prelude::*;

    fn kp(i: usize) -> Keypoint {
        Keypoint {
            x: i as f32,
            y: 0.0,
            scale: 1.6,
            orientation: 0.0,
            response: 0.1,
        }
    }

    fn unit(values: &[f32]) -> Descriptor {
        let mut d = [0f32; DESCRIPTOR_LEN];
        d[..values.len()].copy_from_slice(values);
        let n = d.iter().map(|v| v * v).sum::<f32>().sqrt();
        d.iter_mut().for_each(|v| *v /= n);
        Descriptor(d)
    }

    fn set(id: &str, descs: Vec<Descriptor>) -> FeatureSet {
        FeatureSet::new(id, None, (0..descs.len()).map(kp).collect(), descs)
    }

    fn arb_set(max: usize) -> impl Strategy<Value = FeatureSet> {
        proptest::collection::vec(proptest::collection::vec(0.0f32..1.0, 6), 0..max).prop_map(
            |rows| {
                let descs = rows
                    .iter()
                    .map(|r| {
                        let mut v = r.clone();
                        v[0] += 1e-3;
                        unit(&v)
                    })
                    .collect();
                set("p", descs)
            },
        )
    }

    #[test]
    fn score_arithmetic() {
        assert_eq!(dissimilarity_score(100, 80, 40).unwrap().score, 0.5);
        assert_eq!(dissimilarity_score(50, 50, 50).unwrap().score, 0.0);
        let d = dissimilarity_score(0, 120, 0).unwrap();
        assert_eq!(d.score, 1.0);
        assert!(d.degenerate);
        assert_eq!(
            dissimilarity_score(10, 5, 6),
            Err(MatchError::TooManyMatches {
                n_a: 10,
                n_b: 5,
                n_ab: 6
            })
        );
    }

    #[test]
    fn self_match_is_total() {
        let a = set(
            "a",
            vec![
                unit(&[1.0, 0.0]),
                unit(&[0.0, 1.0]),
                unit(&[1.0, 1.0]),
                unit(&[0.0, 0.0, 1.0]),
            ],
        );
        let r = compare(&a, &a, &MatchConfig::default()).unwrap();
        assert_eq!(r.n_ab, 4);
        assert_eq!(r.score, 0.0);
        assert!(r.correspondences.iter().all(|c| c.index_a == c.index_b));
    }

    #[test]
    fn empty_side_is_degenerate() {
        let a = set("a", vec![unit(&[1.0])]);
        let b = set("b", vec![]);
        assert!(match_descriptors(&a, &b, &MatchConfig::default()).is_empty());
        let r = compare(&a, &b, &MatchConfig::default()).unwrap();
        assert_eq!(r.score, 1.0);
        assert!(r.degenerate);
    }

    #[test]
    fn ambiguous_match_is_rejected() {
        // b has two equidistant candidates for a's only descriptor.
        let a = set("a", vec![unit(&[1.0, 0.0, 0.0])]);
        let b = set("b", vec![unit(&[1.0, 1.0, 0.0]), unit(&[1.0, 0.0, 1.0])]);
        assert!(match_descriptors(&a, &b, &MatchConfig::default()).is_empty());
        let lax = MatchConfig {
            ratio_threshold: 1.0,
            require_mutual: true,
        };
        // Exactly tied distances still fail d1 < d2.
        assert!(match_descriptors(&a, &b, &lax).is_empty());
    }

    #[test]
    fn single_candidate_passes_ratio() {
        let a = set("a", vec![unit(&[1.0, 0.3])]);
        let b = set("b", vec![unit(&[1.0, 0.0])]);
        assert_eq!(match_descriptors(&a, &b, &MatchConfig::default()).len(), 1);
    }

    #[test]
    fn duplicate_descriptors_do_not_self_match() {
        let a = set("a", vec![unit(&[1.0]), unit(&[1.0])]);
        let r = compare(&a, &a, &MatchConfig::default()).unwrap();
        assert_eq!(r.n_ab, 0);
    }

    #[test]
    fn config_validation() {
        assert!(MatchConfig::default().validate().is_ok());
        for bad in [0.0, -0.5, 1.5, f32::NAN] {
            let c = MatchConfig {
                ratio_threshold: bad,
                require_mutual: true,
            };
            assert!(c.validate().is_err(), "{bad}");
        }
    }

    fn one_to_one(cs: &[Correspondence]) -> bool {
        let mut a: Vec<usize> = cs.iter().map(|c| c.index_a).collect();
        let mut b: Vec<usize> = cs.iter().map(|c| c.index_b).collect();
        a.sort_unstable();
        b.sort_unstable();
        a.windows(2).all(|w| w[0] != w[1]) && b.windows(2).all(|w| w[0] != w[1])
    }

    proptest! {
        #[test]
        fn symmetric_bounded_and_one_to_one(a in arb_set(24), b in arb_set(24), ratio in 0.3f32..=1.0) {
            let cfg = MatchConfig { ratio_threshold: ratio, require_mutual: true };
            let ab = compare(&a, &b, &cfg).unwrap();
            let ba = compare(&b, &a, &cfg).unwrap();
            prop_assert_eq!(ab.score, ba.score);
            prop_assert!((0.0..=1.0).contains(&ab.score));
            prop_assert!(ab.n_ab <= ab.n_a.min(ab.n_b));
            prop_assert!(one_to_one(&ab.correspondences));

            let loose = MatchConfig { ratio_threshold: ratio, require_mutual: false };
            let r = compare(&a, &b, &loose).unwrap();
            prop_assert!(one_to_one(&r.correspondences));
            prop_assert!((0.0..=1.0).contains(&r.score));
        }

        #[test]
        fn extra_match_strictly_lowers_score(n_a in 1usize..500, n_b in 1usize..500, frac in 0.0f64..1.0) {
            let min = n_a.min(n_b);
            let n_ab = ((min as f64) * frac) as usize;
            prop_assume!(n_ab < min);
            let s0 = dissimilarity_score(n_a, n_b, n_ab).unwrap().score;
            let s1 = dissimilarity_score(n_a, n_b, n_ab + 1).unwrap().score;
            prop_assert!(s1 < s0);
        }
    }
}
