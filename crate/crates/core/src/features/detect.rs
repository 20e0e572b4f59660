use std::f32::consts::TAU;

use super::scale_space::{Octave, Plane, ScaleSpace};
use super::{Keypoint, SiftConfig};

const MAX_REFINE_STEPS: usize = 5;
const ORIENTATION_BINS: usize = 36;
const ORIENTATION_SIGMA_FACTOR: f32 = 1.5;
const ORIENTATION_PEAK_RATIO: f32 = 0.8;

/// A keypoint together with where it lives in the pyramid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSpaceKeypoint {
    pub keypoint: Keypoint,
    pub octave: usize,
    /// Fractional Gaussian level matching the keypoint's scale; gradients are
    /// interpolated between the two levels around it.
    pub level: f32,
    /// Position and blur in the octave's own sampling grid.
    pub octave_x: f32,
    pub octave_y: f32,
    pub octave_sigma: f32,
}

/// Refined extremum before orientation assignment.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Extremum {
    pub octave: usize,
    pub x: f32,
    pub y: f32,
    /// Fractional DoG layer index.
    pub layer: f32,
    pub value: f32,
}

pub fn detect_keypoints(space: &ScaleSpace, cfg: &SiftConfig) -> Vec<ScaleSpaceKeypoint> {
    find_extrema(space, cfg)
        .into_iter()
        .flat_map(|e| assign_orientations(space, cfg, &e))
        .collect()
}

pub(crate) fn find_extrema(space: &ScaleSpace, cfg: &SiftConfig) -> Vec<Extremum> {
    let s = space.scales_per_octave;
    let prefilter = 0.5 * cfg.contrast_threshold;
    let mut out = Vec::new();
    for (o, octave) in space.octaves.iter().enumerate() {
        let (w, h) = (octave.width(), octave.height());
        if w < 3 || h < 3 {
            continue;
        }
        for layer in 1..=s {
            let (below, here, above) = (
                &octave.dogs[layer - 1],
                &octave.dogs[layer],
                &octave.dogs[layer + 1],
            );
            for y in 1..h - 1 {
                for x in 1..w - 1 {
                    let v = here.at(x, y);
                    if v.abs() <= prefilter || !is_extremum(v, x, y, below, here, above) {
                        continue;
                    }
                    if let Some(e) = refine(space, cfg, o, x, y, layer) {
                        out.push(e);
                    }
                }
            }
        }
    }
    out
}

/// 26-neighbourhood extremum test. Plateaus of exactly equal values, common
/// in rendered images, would have no strict extremum at all, so ties are
/// broken by scan order (layer, row, column): a sample must strictly beat the
/// neighbours before it and at least equal the ones after it.
fn is_extremum(v: f32, x: usize, y: usize, below: &Plane, here: &Plane, above: &Plane) -> bool {
    let mut is_max = true;
    let mut is_min = true;
    for (p, plane) in [below, here, above].into_iter().enumerate() {
        for dy in 0..3 {
            for dx in 0..3 {
                let key = (p, dy, dx);
                if key == (1, 1, 1) {
                    continue;
                }
                let n = plane.at(x + dx - 1, y + dy - 1);
                if key < (1, 1, 1) {
                    is_max &= v > n;
                    is_min &= v < n;
                } else {
                    is_max &= v >= n;
                    is_min &= v <= n;
                }
            }
        }
        if !is_max && !is_min {
            return false;
        }
    }
    is_max || is_min
}

/// Quadratic sub-pixel / sub-scale refinement followed by the contrast and
/// principal-curvature tests.
fn refine(
    space: &ScaleSpace,
    cfg: &SiftConfig,
    octave: usize,
    x0: usize,
    y0: usize,
    layer0: usize,
) -> Option<Extremum> {
    let dogs = &space.octaves[octave].dogs;
    let s = space.scales_per_octave;
    let (w, h) = (dogs[0].width as isize, dogs[0].height as isize);
    let (mut x, mut y, mut l) = (x0 as isize, y0 as isize, layer0 as isize);
    let mut previous: Option<Fit> = None;

    for _ in 0..MAX_REFINE_STEPS {
        let (lu, xu, yu) = (l as usize, x as usize, y as usize);
        let d = Derivatives::at(&dogs[lu - 1], &dogs[lu], &dogs[lu + 1], xu, yu);
        let offset = d.solve()?;
        let fit = Fit {
            at: (x, y, l),
            offset,
            centre: dogs[lu].at(xu, yu),
            d,
        };
        let next = (
            x + offset[0].round() as isize,
            y + offset[1].round() as isize,
            l + offset[2].round() as isize,
        );
        // A peak roughly halfway between two samples can fit past 0.5 from
        // both sides; rather than bounce, keep whichever fit lands closer.
        if let Some(prev) = previous.filter(|p| p.at == next && fit.spread() < 1.0) {
            let best = if prev.spread() < fit.spread() {
                prev
            } else {
                fit
            };
            return best.accept(cfg, octave);
        }
        if fit.spread() < 0.5 {
            return fit.accept(cfg, octave);
        }
        previous = Some(fit);
        (x, y, l) = next;
        if l < 1 || l > s as isize || x < 1 || x >= w - 1 || y < 1 || y >= h - 1 {
            return None;
        }
    }
    None
}

/// Quadratic fit around one DoG sample.
struct Fit {
    at: (isize, isize, isize),
    offset: [f32; 3],
    centre: f32,
    d: Derivatives,
}

impl Fit {
    fn spread(&self) -> f32 {
        self.offset.iter().fold(0.0f32, |m, o| m.max(o.abs()))
    }

    fn accept(&self, cfg: &SiftConfig, octave: usize) -> Option<Extremum> {
        let (g, o) = (&self.d.grad, &self.offset);
        let value = self.centre + 0.5 * (g[0] * o[0] + g[1] * o[1] + g[2] * o[2]);
        if value.abs() < cfg.contrast_threshold || !passes_edge_test(&self.d, cfg.edge_threshold) {
            return None;
        }
        Some(Extremum {
            octave,
            x: self.at.0 as f32 + o[0],
            y: self.at.1 as f32 + o[1],
            layer: self.at.2 as f32 + o[2],
            value,
        })
    }
}

/// `tr(H)^2 / det(H) < (r + 1)^2 / r` on the spatial 2x2 Hessian.
pub(crate) fn passes_edge_test_raw(dxx: f32, dyy: f32, dxy: f32, ratio: f32) -> bool {
    let tr = dxx + dyy;
    let det = dxx * dyy - dxy * dxy;
    det > 0.0 && tr * tr * ratio < (ratio + 1.0) * (ratio + 1.0) * det
}

fn passes_edge_test(d: &Derivatives, ratio: f32) -> bool {
    passes_edge_test_raw(d.hess[0][0], d.hess[1][1], d.hess[0][1], ratio)
}

struct Derivatives {
    grad: [f32; 3],
    hess: [[f32; 3]; 3],
}

impl Derivatives {
    fn at(below: &Plane, here: &Plane, above: &Plane, x: usize, y: usize) -> Self {
        let c = here.at(x, y);
        let dx = 0.5 * (here.at(x + 1, y) - here.at(x - 1, y));
        let dy = 0.5 * (here.at(x, y + 1) - here.at(x, y - 1));
        let ds = 0.5 * (above.at(x, y) - below.at(x, y));
        let dxx = here.at(x + 1, y) + here.at(x - 1, y) - 2.0 * c;
        let dyy = here.at(x, y + 1) + here.at(x, y - 1) - 2.0 * c;
        let dss = above.at(x, y) + below.at(x, y) - 2.0 * c;
        let dxy = 0.25
            * (here.at(x + 1, y + 1) - here.at(x - 1, y + 1) - here.at(x + 1, y - 1)
                + here.at(x - 1, y - 1));
        let dxs = 0.25
            * (above.at(x + 1, y) - above.at(x - 1, y) - below.at(x + 1, y) + below.at(x - 1, y));
        let dys = 0.25
            * (above.at(x, y + 1) - above.at(x, y - 1) - below.at(x, y + 1) + below.at(x, y - 1));
        Self {
            grad: [dx, dy, ds],
            hess: [[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]],
        }
    }

    /// Offset `-H^-1 g`; `None` when the Hessian is singular.
    fn solve(&self) -> Option<[f32; 3]> {
        let h = self.hess.map(|r| r.map(|v| v as f64));
        let g = self.grad.map(|v| v as f64);
        let det = h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1])
            - h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0])
            + h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0]);
        if det.abs() < 1e-18 {
            return None;
        }
        let inv = [
            [
                h[1][1] * h[2][2] - h[1][2] * h[2][1],
                h[0][2] * h[2][1] - h[0][1] * h[2][2],
                h[0][1] * h[1][2] - h[0][2] * h[1][1],
            ],
            [
                h[1][2] * h[2][0] - h[1][0] * h[2][2],
                h[0][0] * h[2][2] - h[0][2] * h[2][0],
                h[0][2] * h[1][0] - h[0][0] * h[1][2],
            ],
            [
                h[1][0] * h[2][1] - h[1][1] * h[2][0],
                h[0][1] * h[2][0] - h[0][0] * h[2][1],
                h[0][0] * h[1][1] - h[0][1] * h[1][0],
            ],
        ];
        let mut out = [0f32; 3];
        for (i, row) in inv.iter().enumerate() {
            let v = -(row[0] * g[0] + row[1] * g[1] + row[2] * g[2]) / det;
            if !v.is_finite() {
                return None;
            }
            out[i] = v as f32;
        }
        Some(out)
    }
}

/// Central-difference gradient at an interior pixel and a fractional
/// Gaussian level, linear between the two levels around it:
/// (magnitude, angle in [0, 2pi)). Rounding to the nearest level instead makes a keypoint whose
/// scale sits near a level boundary flip between two different blurs.
#[inline]
pub(crate) fn gradient_at(octave: &Octave, level: f32, x: usize, y: usize) -> (f32, f32) {
    let lo = level.floor() as usize;
    let f = level - lo as f32;
    let a = &octave.gaussians[lo];
    let (mut dx, mut dy) = (
        a.at(x + 1, y) - a.at(x - 1, y),
        a.at(x, y + 1) - a.at(x, y - 1),
    );
    if f > 0.0 {
        let b = &octave.gaussians[lo + 1];
        dx += f * (b.at(x + 1, y) - b.at(x - 1, y) - dx);
        dy += f * (b.at(x, y + 1) - b.at(x, y - 1) - dy);
    }
    polar(dx, dy)
}

#[inline]
fn polar(dx: f32, dy: f32) -> (f32, f32) {
    let mut angle = dy.atan2(dx);
    if angle < 0.0 {
        angle += TAU;
    }
    if angle >= TAU {
        angle -= TAU;
    }
    ((dx * dx + dy * dy).sqrt(), angle)
}

fn assign_orientations(
    space: &ScaleSpace,
    cfg: &SiftConfig,
    e: &Extremum,
) -> Vec<ScaleSpaceKeypoint> {
    let s = space.scales_per_octave;
    let octave = &space.octaves[e.octave];
    // DoG layer l spans gaussian levels l and l+1; its nominal blur is that of level l.
    let octave_sigma = space.level_sigma(e.layer);
    let level = e.layer.clamp(1.0, (s + 1) as f32);
    let plane = &octave.gaussians[0];
    let (w, h) = (plane.width as isize, plane.height as isize);

    let sigma_w = ORIENTATION_SIGMA_FACTOR * octave_sigma;
    let radius = (3.0 * sigma_w).round() as isize;
    let (cx, cy) = (e.x.round() as isize, e.y.round() as isize);
    let mut hist = [0f32; ORIENTATION_BINS];
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let (px, py) = (cx + dx, cy + dy);
            if px < 1 || py < 1 || px >= w - 1 || py >= h - 1 {
                continue;
            }
            let rx = px as f32 - e.x;
            let ry = py as f32 - e.y;
            let r2 = rx * rx + ry * ry;
            if r2 > (radius * radius) as f32 {
                continue;
            }
            let (mag, angle) = gradient_at(octave, level, px as usize, py as usize);
            let weight = (-r2 / (2.0 * sigma_w * sigma_w)).exp();
            let bin = angle * ORIENTATION_BINS as f32 / TAU;
            let b0 = bin.floor();
            let frac = bin - b0;
            let b0 = (b0 as usize) % ORIENTATION_BINS;
            hist[b0] += weight * mag * (1.0 - frac);
            hist[(b0 + 1) % ORIENTATION_BINS] += weight * mag * frac;
        }
    }
    let hist = smooth_circular(&hist);

    let max = hist.iter().copied().fold(0f32, f32::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let scale_factor = 2f32.powi(e.octave as i32);
    let make = |orientation: f32| ScaleSpaceKeypoint {
        keypoint: Keypoint {
            x: e.x * scale_factor,
            y: e.y * scale_factor,
            scale: octave_sigma * scale_factor,
            orientation,
            response: e.value.abs(),
        },
        octave: e.octave,
        level,
        octave_x: e.x,
        octave_y: e.y,
        octave_sigma,
    };

    let peaks: Vec<usize> = (0..ORIENTATION_BINS)
        .filter(|&i| {
            let prev = hist[(i + ORIENTATION_BINS - 1) % ORIENTATION_BINS];
            let next = hist[(i + 1) % ORIENTATION_BINS];
            hist[i] > prev && hist[i] >= next
        })
        .collect();
    let chosen: Vec<usize> = if cfg.duplicate_orientations {
        peaks
            .into_iter()
            .filter(|&i| hist[i] >= ORIENTATION_PEAK_RATIO * max)
            .collect()
    } else {
        // First bin attaining the maximum.
        hist.iter().position(|&v| v == max).into_iter().collect()
    };

    chosen
        .into_iter()
        .map(|i| {
            let prev = hist[(i + ORIENTATION_BINS - 1) % ORIENTATION_BINS];
            let next = hist[(i + 1) % ORIENTATION_BINS];
            let denom = prev - 2.0 * hist[i] + next;
            let offset = if denom.abs() > f32::EPSILON {
                (0.5 * (prev - next) / denom).clamp(-0.5, 0.5)
            } else {
                0.0
            };
            // Bin centres sit at integer bin indices because votes are split linearly.
            let mut angle = (i as f32 + offset) * TAU / ORIENTATION_BINS as f32;
            if angle < 0.0 {
                angle += TAU;
            }
            if angle >= TAU {
                angle -= TAU;
            }
            make(angle)
        })
        .collect()
}

/// One pass of the circular [1 4 6 4 1] / 16 filter.
fn smooth_circular(hist: &[f32; ORIENTATION_BINS]) -> [f32; ORIENTATION_BINS] {
    let n = ORIENTATION_BINS;
    let mut out = [0f32; ORIENTATION_BINS];
    for (i, o) in out.iter_mut().enumerate() {
        *o = (hist[(i + n - 2) % n] + hist[(i + 2) % n]) * (1.0 / 16.0)
            + (hist[(i + n - 1) % n] + hist[(i + 1) % n]) * (4.0 / 16.0)
            + hist[i] * (6.0 / 16.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::build_scale_space;
    use crate::imaging::GrayImage;

    #[test]
    fn edge_test_rejects_ridge_like_curvature() {
        // Strong curvature across, nearly none along: an edge.
        assert!(!passes_edge_test_raw(-1.0, -0.01, 0.0, 10.0));
        // Isotropic blob.
        assert!(passes_edge_test_raw(-1.0, -1.0, 0.0, 10.0));
        // Saddle.
        assert!(!passes_edge_test_raw(-1.0, 1.0, 0.0, 10.0));
        // Exactly at the ratio boundary r = 10: eigenvalues 10 and 1.
        assert!(!passes_edge_test_raw(10.0, 1.0, 0.0, 10.0));
        assert!(passes_edge_test_raw(9.0, 1.0, 0.0, 10.0));
    }

    #[test]
    fn constant_image_has_no_keypoints() {
        let img = GrayImage::from_fn(100, 100, |_, _| 0.7);
        let ss = build_scale_space(&img, &SiftConfig::default()).unwrap();
        assert!(detect_keypoints(&ss, &SiftConfig::default()).is_empty());
    }

    fn blob(sigma: f32) -> GrayImage {
        GrayImage::from_fn(100, 100, |x, y| {
            let (dx, dy) = (x as f32 - 50.0, y as f32 - 50.0);
            (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
        })
    }

    /// Independent scan of the DoG stack for 26-neighbourhood extrema, ties
    /// going to the earliest sample in (layer, row, column) order.
    fn brute_extrema(ss: &ScaleSpace) -> Vec<(usize, usize, usize, usize)> {
        let mut out = vec![];
        for (o, oct) in ss.octaves.iter().enumerate() {
            for l in 1..oct.dogs.len() - 1 {
                for y in 1..oct.height() - 1 {
                    for x in 1..oct.width() - 1 {
                        let v = oct.dogs[l].at(x, y);
                        let (mut max, mut min) = (true, true);
                        for ll in l - 1..=l + 1 {
                            for yy in y - 1..=y + 1 {
                                for xx in x - 1..=x + 1 {
                                    let n = oct.dogs[ll].at(xx, yy);
                                    match (ll, yy, xx).cmp(&(l, y, x)) {
                                        std::cmp::Ordering::Equal => {}
                                        std::cmp::Ordering::Less => {
                                            max &= v > n;
                                            min &= v < n;
                                        }
                                        std::cmp::Ordering::Greater => {
                                            max &= v >= n;
                                            min &= v <= n;
                                        }
                                    }
                                }
                            }
                        }
                        if max || min {
                            out.push((o, l, x, y));
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn plateau_extrema_are_found_once() {
        // Even-sided squares centre their response between pixels, leaving
        // exact ties in the DoG.
        for side in [6usize, 8] {
            let img = GrayImage::from_fn(100, 100, |x, y| {
                let hit = |c: usize| c >= 30 && c < 30 + side;
                if hit(x) && hit(y) {
                    0.1
                } else {
                    1.0
                }
            });
            let cfg = SiftConfig::default();
            let ss = build_scale_space(&img, &cfg).unwrap();
            let found = find_extrema(&ss, &cfg);
            assert!(!found.is_empty(), "side {side}: nothing detected");
            let c = 30.0 + (side as f32 - 1.0) / 2.0;
            for e in &found {
                assert!(
                    (e.x - c).abs() < 1.0 && (e.y - c).abs() < 1.0,
                    "side {side}: {e:?}"
                );
            }
            let mut keys: Vec<_> = found
                .iter()
                .map(|e| (e.octave, e.layer.to_bits(), e.x.to_bits(), e.y.to_bits()))
                .collect();
            keys.sort();
            keys.dedup();
            assert_eq!(
                keys.len(),
                found.len(),
                "side {side}: duplicate extrema {found:?}"
            );
        }
    }

    #[test]
    fn gaussian_blob_yields_central_keypoint() {
        let cfg = SiftConfig::default();
        let ss = build_scale_space(&blob(3.0), &cfg).unwrap();
        let brute = brute_extrema(&ss);
        assert!(
            brute.iter().any(|&(o, _, x, y)| {
                let f = 1usize << o;
                (x * f).abs_diff(50) <= 2 && (y * f).abs_diff(50) <= 2
            }),
            "oracle found no central extremum: {brute:?}"
        );
        let kps = detect_keypoints(&ss, &cfg);
        assert!(
            kps.iter().any(|k| {
                let p = &k.keypoint;
                ((p.x - 50.0).powi(2) + (p.y - 50.0).powi(2)).sqrt() <= 2.0
            }),
            "{kps:?}"
        );
    }

    /// A vertical step edge whose height varies slowly along y, so the edge
    /// has genuine but elongated DoG extrema for the curvature test to act on.
    fn textured_edge() -> GrayImage {
        GrayImage::from_fn(100, 100, |x, y| {
            let bright = 0.85 + 0.05 * (std::f32::consts::TAU * y as f32 / 12.0).cos();
            if x >= 50 {
                bright
            } else {
                0.1
            }
        })
    }

    fn on_edge_interior(k: &ScaleSpaceKeypoint) -> bool {
        let p = &k.keypoint;
        (p.x - 49.5).abs() < 3.0 && p.y > 25.0 && p.y < 75.0
    }

    #[test]
    fn curvature_test_suppresses_edge_responses() {
        let img = textured_edge();
        let cfg = SiftConfig::default();
        let ss = build_scale_space(&img, &cfg).unwrap();
        let kept = detect_keypoints(&ss, &cfg);
        assert!(
            !kept.iter().any(on_edge_interior),
            "edge keypoints survived: {:?}",
            kept.iter()
                .filter(|k| on_edge_interior(k))
                .collect::<Vec<_>>()
        );

        let lax = SiftConfig {
            edge_threshold: 1e9,
            ..cfg
        };
        let all = detect_keypoints(&ss, &lax);
        assert!(
            all.iter().any(on_edge_interior),
            "without the curvature test the edge should respond"
        );
    }

    #[test]
    fn orientation_duplicates_are_config_gated() {
        let img = GrayImage::from_fn(100, 100, |x, y| {
            let inside = (30..70).contains(&x) && (30..70).contains(&y);
            if inside {
                0.9
            } else {
                0.1
            }
        });
        let on = SiftConfig::default();
        let off = SiftConfig {
            duplicate_orientations: false,
            ..on.clone()
        };
        let ss = build_scale_space(&img, &on).unwrap();
        let with = detect_keypoints(&ss, &on);
        let without = detect_keypoints(&ss, &off);
        assert!(with.len() >= without.len());
        assert_eq!(find_extrema(&ss, &on).len(), without.len());
    }
}
