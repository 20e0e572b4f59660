use std::f32::consts::TAU;

use super::detect::{gradient_at, ScaleSpaceKeypoint};
use super::scale_space::ScaleSpace;
use super::{Descriptor, Keypoint, SiftConfig, DESCRIPTOR_LEN, DESCRIPTOR_PATCH};

const GRID: usize = 4;
const ORI_BINS: usize = 8;

/// Computes a descriptor for every keypoint whose support window fits inside
/// its octave. Keypoints that fall off the border, or whose gradient patch is
/// completely flat, are dropped.
pub fn compute_descriptors(
    space: &ScaleSpace,
    keypoints: &[ScaleSpaceKeypoint],
    cfg: &SiftConfig,
) -> Vec<(Keypoint, Descriptor)> {
    keypoints
        .iter()
        .filter_map(|k| describe(space, k, cfg).map(|d| (k.keypoint.clone(), d)))
        .collect()
}

/// Width of one spatial cell in octave pixels. The full 4x4 patch spans
/// `DESCRIPTOR_PATCH` pixels at the base blur and grows linearly with scale.
fn cell_width(space: &ScaleSpace, octave_sigma: f32) -> f32 {
    (DESCRIPTOR_PATCH as f32 / GRID as f32) * octave_sigma / space.base_sigma
}

/// Radius of the disc circumscribing the rotated patch, plus one pixel for
/// the central-difference gradient.
pub(crate) fn support_radius(space: &ScaleSpace, octave_sigma: f32) -> f32 {
    cell_width(space, octave_sigma) * GRID as f32 * 0.5 * std::f32::consts::SQRT_2 + 1.0
}

fn describe(space: &ScaleSpace, k: &ScaleSpaceKeypoint, cfg: &SiftConfig) -> Option<Descriptor> {
    let octave = &space.octaves[k.octave];
    let plane = &octave.gaussians[0];
    let (w, h) = (plane.width as f32, plane.height as f32);
    let support = support_radius(space, k.octave_sigma);
    if k.octave_x - support < 0.0
        || k.octave_y - support < 0.0
        || k.octave_x + support > w - 1.0
        || k.octave_y + support > h - 1.0
    {
        return None;
    }

    let cw = cell_width(space, k.octave_sigma);
    let (sin_t, cos_t) = k.keypoint.orientation.sin_cos();
    // Samples up to half a cell beyond the patch still feed the outer cells.
    let reach = (cw * (GRID as f32 * 0.5 + 0.5) * std::f32::consts::SQRT_2).ceil() as isize;
    let (cx, cy) = (k.octave_x.round() as isize, k.octave_y.round() as isize);
    // Gaussian window with sigma of half the patch width, in cell units.
    let window = GRID as f32 * 0.5;
    let inv_two_var = 1.0 / (2.0 * window * window);

    // Padded grid so trilinear spill-over needs no bounds checks.
    const P: usize = GRID + 2;
    let mut hist = [[[0f32; ORI_BINS]; P]; P];
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            let (px, py) = (cx + dx, cy + dy);
            if px < 1 || py < 1 || px >= plane.width as isize - 1 || py >= plane.height as isize - 1
            {
                continue;
            }
            let ox = px as f32 - k.octave_x;
            let oy = py as f32 - k.octave_y;
            let rx = (cos_t * ox + sin_t * oy) / cw;
            let ry = (-sin_t * ox + cos_t * oy) / cw;
            // Cell centres are at -1.5, -0.5, 0.5, 1.5.
            let col = rx + GRID as f32 * 0.5 - 0.5;
            let row = ry + GRID as f32 * 0.5 - 0.5;
            if col <= -1.0 || row <= -1.0 || col >= GRID as f32 || row >= GRID as f32 {
                continue;
            }
            let (mag, angle) = gradient_at(octave, k.level, px as usize, py as usize);
            if mag == 0.0 {
                continue;
            }
            let mut rel = angle - k.keypoint.orientation;
            if rel < 0.0 {
                rel += TAU;
            }
            if rel >= TAU {
                rel -= TAU;
            }
            let weight = mag * (-(rx * rx + ry * ry) * inv_two_var).exp();
            let obin = rel * ORI_BINS as f32 / TAU;

            let (r0, c0, o0) = (row.floor(), col.floor(), obin.floor());
            let (fr, fc, fo) = (row - r0, col - c0, obin - o0);
            let (r0, c0) = ((r0 + 1.0) as usize, (c0 + 1.0) as usize);
            let o0 = o0 as usize % ORI_BINS;
            let o1 = (o0 + 1) % ORI_BINS;
            for (ri, wr) in [(r0, 1.0 - fr), (r0 + 1, fr)] {
                for (ci, wc) in [(c0, 1.0 - fc), (c0 + 1, fc)] {
                    let v = weight * wr * wc;
                    hist[ri][ci][o0] += v * (1.0 - fo);
                    hist[ri][ci][o1] += v * fo;
                }
            }
        }
    }

    let mut values = [0f32; DESCRIPTOR_LEN];
    for r in 0..GRID {
        for c in 0..GRID {
            let base = (r * GRID + c) * ORI_BINS;
            values[base..base + ORI_BINS].copy_from_slice(&hist[r + 1][c + 1]);
        }
    }
    normalize(&mut values)?;
    for v in values.iter_mut() {
        *v = v.min(cfg.magnitude_clamp);
    }
    normalize(&mut values)?;
    Some(Descriptor(values))
}

fn normalize(v: &mut [f32; DESCRIPTOR_LEN]) -> Option<()> {
    let norm = v
        .iter()
        .map(|x| (*x as f64) * (*x as f64))
        .sum::<f64>()
        .sqrt();
    if norm.is_nan() || norm <= 1e-12 {
        return None;
    }
    for x in v.iter_mut() {
        *x = (*x as f64 / norm) as f32;
    }
    Some(())
}
