//! Deterministic block-and-line diagram generator.
//!
//! Used for test fixtures, benchmarks and the demo corpus. Each family has a
//! fixed layout and a family-specific set of pseudo-text label glyphs; the
//! per-image seed jitters geometry and resamples a fraction of glyph cells,
//! both controlled by `variation`.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imaging::{ImagingError, RasterImage};
use crate::label::PatternLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiagramFamily {
    Layered,
    PipeAndFilter,
    ClientServer,
    PeerToPeer,
    Microservices,
    EventBus,
    Microkernel,
    ModelViewController,
}

impl DiagramFamily {
    pub const ALL: [DiagramFamily; 8] = [
        DiagramFamily::Layered,
        DiagramFamily::PipeAndFilter,
        DiagramFamily::ClientServer,
        DiagramFamily::PeerToPeer,
        DiagramFamily::Microservices,
        DiagramFamily::EventBus,
        DiagramFamily::Microkernel,
        DiagramFamily::ModelViewController,
    ];

    pub fn label(self) -> PatternLabel {
        match self {
            DiagramFamily::Layered => PatternLabel::Layered,
            DiagramFamily::PipeAndFilter => PatternLabel::PipeAndFilter,
            DiagramFamily::ClientServer => PatternLabel::ClientServer,
            DiagramFamily::PeerToPeer => PatternLabel::PeerToPeer,
            DiagramFamily::Microservices => PatternLabel::Microservices,
            DiagramFamily::EventBus => PatternLabel::EventBus,
            DiagramFamily::Microkernel => PatternLabel::Microkernel,
            DiagramFamily::ModelViewController => PatternLabel::ModelViewController,
        }
    }

    fn ordinal(self) -> u64 {
        Self::ALL.iter().position(|f| *f == self).unwrap() as u64
    }

    /// Free spot in the family layout for its pictogram.
    fn icon_anchor(self) -> (f32, f32) {
        match self {
            DiagramFamily::Layered => (0.1, 0.5),
            DiagramFamily::PipeAndFilter => (0.17, 0.18),
            DiagramFamily::ClientServer => (0.11, 0.89),
            DiagramFamily::PeerToPeer => (0.11, 0.11),
            DiagramFamily::Microservices => (0.88, 0.58),
            DiagramFamily::EventBus => (0.27, 0.37),
            DiagramFamily::Microkernel => (0.5, 0.13),
            DiagramFamily::ModelViewController => (0.13, 0.2),
        }
    }

    fn fill(self) -> [u8; 3] {
        match self {
            DiagramFamily::Layered => [200, 220, 255],
            DiagramFamily::PipeAndFilter => [255, 230, 190],
            DiagramFamily::ClientServer => [210, 250, 210],
            DiagramFamily::PeerToPeer => [250, 210, 230],
            DiagramFamily::Microservices => [230, 230, 230],
            DiagramFamily::EventBus => [255, 250, 200],
            DiagramFamily::Microkernel => [220, 200, 250],
            DiagramFamily::ModelViewController => [200, 240, 240],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticDiagram {
    pub family: DiagramFamily,
    pub seed: u64,
    /// 0 reproduces the family template exactly; 1 gives fully image-specific glyphs.
    pub variation: f32,
}

const INK: [u8; 3] = [30, 30, 40];

impl SyntheticDiagram {
    pub fn new(family: DiagramFamily, seed: u64, variation: f32) -> Self {
        Self {
            family,
            seed,
            variation: variation.clamp(0.0, 1.0),
        }
    }

    pub fn render(&self, size: u32) -> RasterImage {
        let mut canvas = Canvas::new(size);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (self.family.ordinal() << 56));
        let jitter = 0.03 * self.variation;
        let mut j = move |v: f32| v + rng.random_range(-1.0f32..=1.0) * jitter;
        let ctx = GlyphContext {
            family: self.family,
            seed: self.seed,
            variation: self.variation,
        };
        let fill = self.family.fill();
        let stroke = 0.012;

        match self.family {
            DiagramFamily::Layered => {
                for i in 0..4 {
                    let y = j(0.08 + i as f32 * 0.22);
                    let b = Rect::new(j(0.2), y, 0.72, 0.15);
                    canvas.boxed(b, fill, stroke);
                    ctx.label(&mut canvas, b, i);
                    if i < 3 {
                        let x = j(0.56);
                        canvas.arrow((x, y + 0.15), (x, y + 0.22), stroke);
                    }
                }
            }
            DiagramFamily::PipeAndFilter => {
                let y = j(0.42);
                for i in 0..4 {
                    let b = Rect::new(j(0.04 + i as f32 * 0.245), j(y), 0.17, 0.16);
                    canvas.boxed(b, fill, stroke);
                    ctx.label(&mut canvas, b, i);
                    if i < 3 {
                        canvas.arrow((b.x + b.w, b.y + 0.08), (b.x + 0.245, b.y + 0.08), stroke);
                    }
                }
                canvas.filled_circle((j(0.5), j(0.2)), 0.06, INK);
                canvas.stroke_circle((j(0.5), j(0.8)), 0.08, stroke);
            }
            DiagramFamily::ClientServer => {
                let server = Rect::new(j(0.38), j(0.38), 0.24, 0.24);
                canvas.boxed(server, fill, stroke * 1.5);
                ctx.label(&mut canvas, server, 0);
                let center = (server.x + 0.12, server.y + 0.12);
                for i in 0..5 {
                    let a = i as f32 * std::f32::consts::TAU / 5.0 - 1.2;
                    let (cx, cy) = (j(0.5 + 0.36 * a.cos()), j(0.5 + 0.36 * a.sin()));
                    let c = Rect::new(cx - 0.07, cy - 0.05, 0.14, 0.10);
                    canvas.line(center, (cx, cy), stroke * 0.8);
                    canvas.boxed(c, [255, 255, 255], stroke);
                    ctx.label(&mut canvas, c, i + 1);
                }
                canvas.boxed(server, fill, stroke * 1.5);
                ctx.label(&mut canvas, server, 0);
            }
            DiagramFamily::PeerToPeer => {
                let pts: Vec<(f32, f32)> = (0..6)
                    .map(|i| {
                        let a = i as f32 * std::f32::consts::TAU / 6.0;
                        (j(0.5 + 0.34 * a.cos()), j(0.5 + 0.34 * a.sin()))
                    })
                    .collect();
                for (i, p) in pts.iter().enumerate() {
                    for q in &pts[i + 1..] {
                        canvas.line(*p, *q, stroke * 0.6);
                    }
                }
                for (i, p) in pts.iter().enumerate() {
                    canvas.filled_circle(*p, 0.11, fill);
                    canvas.stroke_circle(*p, 0.11, stroke);
                    ctx.label(
                        &mut canvas,
                        Rect::new(p.0 - 0.09, p.1 - 0.06, 0.18, 0.12),
                        i,
                    );
                }
            }
            DiagramFamily::Microservices => {
                let gateway = Rect::new(j(0.1), j(0.05), 0.8, 0.1);
                canvas.boxed(gateway, [90, 90, 110], stroke);
                for r in 0..3 {
                    for c in 0..3 {
                        let b = Rect::new(
                            j(0.05 + c as f32 * 0.26),
                            j(0.25 + r as f32 * 0.25),
                            0.2,
                            0.16,
                        );
                        canvas.line((b.x + 0.1, gateway.y + 0.1), (b.x + 0.1, b.y), stroke * 0.5);
                        canvas.boxed(b, fill, stroke);
                        canvas.hatch(b, 0.03, stroke * 0.4);
                        ctx.label(&mut canvas, b, r * 3 + c);
                    }
                }
            }
            DiagramFamily::EventBus => {
                let bus = Rect::new(j(0.03), j(0.46), 0.94, 0.08);
                canvas.fill_rect(bus, INK);
                for i in 0..4 {
                    let x = j(0.06 + i as f32 * 0.235);
                    let top = Rect::new(x, j(0.12), 0.18, 0.16);
                    let bottom = Rect::new(x + 0.02, j(0.72), 0.16, 0.16);
                    canvas.arrow((top.x + 0.09, top.y + top.h), (top.x + 0.09, bus.y), stroke);
                    canvas.arrow(
                        (bottom.x + 0.08, bus.y + bus.h),
                        (bottom.x + 0.08, bottom.y),
                        stroke,
                    );
                    canvas.boxed(top, fill, stroke);
                    canvas.boxed(bottom, fill, stroke);
                    ctx.label(&mut canvas, top, i);
                    ctx.label(&mut canvas, bottom, i + 4);
                }
            }
            DiagramFamily::Microkernel => {
                let core = Rect::new(j(0.33), j(0.33), 0.34, 0.34);
                canvas.boxed(core, fill, stroke * 2.0);
                canvas.stroke_rect(Rect::new(core.x + 0.05, core.y + 0.05, 0.24, 0.24), stroke);
                ctx.label(
                    &mut canvas,
                    Rect::new(core.x + 0.08, core.y + 0.1, 0.18, 0.14),
                    0,
                );
                for (i, (dx, dy)) in [(-1.0f32, -1.0f32), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)]
                    .into_iter()
                    .enumerate()
                {
                    let (cx, cy) = (j(0.5 + dx * 0.32), j(0.5 + dy * 0.32));
                    let p = Rect::new(cx - 0.1, cy - 0.08, 0.2, 0.16);
                    canvas.line((0.5 + dx * 0.17, 0.5 + dy * 0.17), (cx, cy), stroke);
                    canvas.boxed(p, [255, 255, 255], stroke);
                    canvas.filled_circle((p.x + 0.03, p.y + 0.03), 0.015, INK);
                    ctx.label(&mut canvas, p, i + 1);
                }
            }
            DiagramFamily::ModelViewController => {
                let m = Rect::new(j(0.32), j(0.05), 0.36, 0.26);
                let v = Rect::new(j(0.03), j(0.66), 0.36, 0.26);
                let c = Rect::new(j(0.61), j(0.66), 0.36, 0.26);
                canvas.arrow((c.x + 0.05, c.y), (m.x + 0.31, m.y + m.h), stroke);
                canvas.arrow((m.x + 0.05, m.y + m.h), (v.x + 0.31, v.y), stroke);
                canvas.arrow((v.x + v.w, v.y + 0.1), (c.x, c.y + 0.1), stroke);
                for (i, b) in [m, v, c].into_iter().enumerate() {
                    canvas.boxed(b, fill, stroke);
                    canvas.fill_rect(Rect::new(b.x, b.y, b.w, 0.04), INK);
                    ctx.label(&mut canvas, Rect::new(b.x, b.y + 0.04, b.w, b.h - 0.04), i);
                }
            }
        }
        let (cx, cy) = self.family.icon_anchor();
        canvas.icon(self.family, (j(cx), j(cy)), 0.15);
        canvas.into_raster()
    }
}

/// Render `per_class` diagrams for each family under `<root>/<label>/NNN.png`.
pub fn write_corpus(
    root: &Path,
    families: &[DiagramFamily],
    per_class: usize,
    size: u32,
    variation: f32,
    seed: u64,
) -> Result<usize, ImagingError> {
    let mut written = 0;
    for family in families {
        let dir = root.join(family.label().as_str());
        std::fs::create_dir_all(&dir).map_err(|source| ImagingError::Io {
            path: dir.display().to_string(),
            cause: source,
        })?;
        for i in 0..per_class {
            let img =
                SyntheticDiagram::new(*family, seed.wrapping_add(i as u64), variation).render(size);
            img.save_png(&dir.join(format!("{i:03}.png")))?;
            written += 1;
        }
    }
    Ok(written)
}

struct GlyphContext {
    family: DiagramFamily,
    seed: u64,
    variation: f32,
}

impl GlyphContext {
    /// Pseudo-text: a grid of square blocks at a fixed pitch, as many as fit
    /// the label area. Cells come from the family template unless resampled
    /// from the image seed.
    fn label(&self, canvas: &mut Canvas, area: Rect, slot: usize) {
        const PITCH: f32 = 0.08;
        let cols = ((area.w * 0.9 / PITCH) as usize).max(1);
        let rows = ((area.h * 0.85 / PITCH) as usize).max(1);
        let mut template =
            ChaCha8Rng::seed_from_u64(0xA5A5 ^ (self.family.ordinal() << 8) ^ slot as u64);
        let mut own =
            ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ slot as u64);
        let (gw, gh) = (cols as f32 * PITCH, rows as f32 * PITCH);
        let cell = PITCH * 0.65;
        let x0 = area.x + (area.w - gw) * 0.5 + (PITCH - cell) * 0.5;
        let y0 = area.y + (area.h - gh) * 0.5 + (PITCH - cell) * 0.5;
        for r in 0..rows {
            for c in 0..cols {
                let mut on = template.random_bool(0.5);
                if own.random::<f32>() < self.variation {
                    on = own.random_bool(0.5);
                }
                if on {
                    let at = Rect::new(x0 + c as f32 * PITCH, y0 + r as f32 * PITCH, cell, cell);
                    canvas.fill_rect(at, INK);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    x: f32,
    y: f32,
    w: f32,
    h: f32,
}

impl Rect {
    fn new(x: f32, y: f32, w: f32, h: f32) -> Self {
        Self { x, y, w, h }
    }
}

/// RGB canvas addressed in unit coordinates.
struct Canvas {
    size: u32,
    data: Vec<u8>,
}

impl Canvas {
    fn new(size: u32) -> Self {
        Self {
            size,
            data: vec![255; (size * size * 3) as usize],
        }
    }

    fn into_raster(self) -> RasterImage {
        RasterImage::new(self.size, self.size, 3, self.data).expect("canvas buffer is well formed")
    }

    fn px(&self, v: f32) -> f32 {
        v * self.size as f32
    }

    fn put(&mut self, x: i64, y: i64, color: [u8; 3]) {
        let n = self.size as i64;
        if x < 0 || y < 0 || x >= n || y >= n {
            return;
        }
        let i = ((y * n + x) * 3) as usize;
        self.data[i..i + 3].copy_from_slice(&color);
    }

    /// Paint every pixel whose centre satisfies `inside`, within a unit-space box.
    fn paint(
        &mut self,
        bounds: (f32, f32, f32, f32),
        color: [u8; 3],
        inside: impl Fn(f32, f32) -> bool,
    ) {
        let (x0, y0, x1, y1) = bounds;
        let (px0, py0) = (
            self.px(x0).floor() as i64 - 1,
            self.px(y0).floor() as i64 - 1,
        );
        let (px1, py1) = (self.px(x1).ceil() as i64 + 1, self.px(y1).ceil() as i64 + 1);
        let s = self.size as f32;
        for y in py0..=py1 {
            for x in px0..=px1 {
                if inside((x as f32 + 0.5) / s, (y as f32 + 0.5) / s) {
                    self.put(x, y, color);
                }
            }
        }
    }

    fn fill_rect(&mut self, r: Rect, color: [u8; 3]) {
        self.paint((r.x, r.y, r.x + r.w, r.y + r.h), color, |x, y| {
            x >= r.x && x < r.x + r.w && y >= r.y && y < r.y + r.h
        });
    }

    fn stroke_rect(&mut self, r: Rect, width: f32) {
        let hw = width * 0.5;
        let outer = Rect::new(r.x - hw, r.y - hw, r.w + width, r.h + width);
        self.paint(
            (outer.x, outer.y, outer.x + outer.w, outer.y + outer.h),
            INK,
            |x, y| {
                let inside_outer =
                    x >= outer.x && x < outer.x + outer.w && y >= outer.y && y < outer.y + outer.h;
                let inside_inner =
                    x >= r.x + hw && x < r.x + r.w - hw && y >= r.y + hw && y < r.y + r.h - hw;
                inside_outer && !inside_inner
            },
        );
    }

    fn boxed(&mut self, r: Rect, fill: [u8; 3], width: f32) {
        self.fill_rect(r, fill);
        self.stroke_rect(r, width);
    }

    fn line(&mut self, a: (f32, f32), b: (f32, f32), width: f32) {
        let hw = width * 0.5;
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len2 = (dx * dx + dy * dy).max(1e-12);
        let bounds = (
            a.0.min(b.0) - hw,
            a.1.min(b.1) - hw,
            a.0.max(b.0) + hw,
            a.1.max(b.1) + hw,
        );
        self.paint(bounds, INK, |x, y| {
            let t = (((x - a.0) * dx + (y - a.1) * dy) / len2).clamp(0.0, 1.0);
            let (qx, qy) = (a.0 + t * dx - x, a.1 + t * dy - y);
            qx * qx + qy * qy <= hw * hw
        });
    }

    fn arrow(&mut self, from: (f32, f32), to: (f32, f32), width: f32) {
        let (dx, dy) = (to.0 - from.0, to.1 - from.1);
        let len = (dx * dx + dy * dy).sqrt().max(1e-6);
        let (ux, uy) = (dx / len, dy / len);
        let head = (width * 3.5).min(len * 0.5);
        let base = (to.0 - ux * head, to.1 - uy * head);
        self.line(from, base, width);
        let (px, py) = (-uy * head * 0.6, ux * head * 0.6);
        let tri = [to, (base.0 + px, base.1 + py), (base.0 - px, base.1 - py)];
        self.triangle(tri);
    }

    fn triangle(&mut self, t: [(f32, f32); 3]) {
        let xs = t.map(|p| p.0);
        let ys = t.map(|p| p.1);
        let bounds = (
            xs.iter().copied().fold(f32::MAX, f32::min),
            ys.iter().copied().fold(f32::MAX, f32::min),
            xs.iter().copied().fold(f32::MIN, f32::max),
            ys.iter().copied().fold(f32::MIN, f32::max),
        );
        let edge = |a: (f32, f32), b: (f32, f32), x: f32, y: f32| {
            (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0)
        };
        self.paint(bounds, INK, |x, y| {
            let e = [
                edge(t[0], t[1], x, y),
                edge(t[1], t[2], x, y),
                edge(t[2], t[0], x, y),
            ];
            e.iter().all(|&v| v >= 0.0) || e.iter().all(|&v| v <= 0.0)
        });
    }

    /// One pictogram per family, `s` across, centred on `c`.
    fn icon(&mut self, family: DiagramFamily, c: (f32, f32), s: f32) {
        let h = s * 0.5;
        match family {
            DiagramFamily::Layered => {
                // Database cylinder.
                self.fill_rect(
                    Rect::new(c.0 - h * 0.8, c.1 - h * 0.7, s * 0.8, s * 0.7),
                    INK,
                );
                self.filled_circle((c.0, c.1 + h * 0.1), h * 0.35, [255, 255, 255]);
                self.fill_rect(
                    Rect::new(c.0 - h * 0.8, c.1 - h, s * 0.8, h * 0.2),
                    [120, 120, 120],
                );
            }
            DiagramFamily::PipeAndFilter => {
                // Gear.
                for k in 0..8 {
                    let a = k as f32 * std::f32::consts::TAU / 8.0;
                    self.line(c, (c.0 + h * a.cos(), c.1 + h * a.sin()), s * 0.18);
                }
                self.filled_circle(c, h * 0.7, INK);
                self.filled_circle(c, h * 0.3, [255, 255, 255]);
            }
            DiagramFamily::ClientServer => {
                // Monitor on a stand.
                self.fill_rect(Rect::new(c.0 - h, c.1 - h, s, s * 0.6), INK);
                self.fill_rect(
                    Rect::new(c.0 - h * 0.75, c.1 - h * 0.75, s * 0.75, s * 0.38),
                    [160, 200, 255],
                );
                self.triangle([
                    (c.0, c.1 + h * 0.1),
                    (c.0 - h * 0.5, c.1 + h),
                    (c.0 + h * 0.5, c.1 + h),
                ]);
            }
            DiagramFamily::PeerToPeer => {
                // Cloud.
                self.filled_circle((c.0 - h * 0.45, c.1 + h * 0.15), h * 0.45, INK);
                self.filled_circle((c.0 + h * 0.1, c.1 - h * 0.2), h * 0.6, INK);
                self.filled_circle((c.0 + h * 0.6, c.1 + h * 0.2), h * 0.4, INK);
                self.fill_rect(
                    Rect::new(c.0 - h * 0.45, c.1 + h * 0.1, h * 1.05, h * 0.5),
                    INK,
                );
            }
            DiagramFamily::Microservices => {
                // Container: a hexagon with a hollow centre.
                let pts: Vec<(f32, f32)> = (0..6)
                    .map(|k| {
                        let a = k as f32 * std::f32::consts::TAU / 6.0 + 0.52;
                        (c.0 + h * a.cos(), c.1 + h * a.sin())
                    })
                    .collect();
                for k in 0..6 {
                    self.triangle([c, pts[k], pts[(k + 1) % 6]]);
                }
                self.fill_rect(
                    Rect::new(c.0 - h * 0.25, c.1 - h * 0.25, h * 0.5, h * 0.5),
                    [255, 255, 255],
                );
            }
            DiagramFamily::EventBus => {
                // Lightning bolt.
                self.triangle([
                    (c.0 + h * 0.3, c.1 - h),
                    (c.0 - h * 0.6, c.1 + h * 0.15),
                    (c.0 + h * 0.1, c.1 + h * 0.15),
                ]);
                self.triangle([
                    (c.0 - h * 0.3, c.1 + h),
                    (c.0 + h * 0.6, c.1 - h * 0.15),
                    (c.0 - h * 0.1, c.1 - h * 0.15),
                ]);
            }
            DiagramFamily::Microkernel => {
                // Target rings.
                self.filled_circle(c, h, INK);
                self.filled_circle(c, h * 0.66, [255, 255, 255]);
                self.filled_circle(c, h * 0.33, INK);
            }
            DiagramFamily::ModelViewController => {
                // Actor.
                self.filled_circle((c.0, c.1 - h * 0.6), h * 0.3, INK);
                self.triangle([
                    (c.0, c.1 - h * 0.3),
                    (c.0 - h * 0.55, c.1 + h),
                    (c.0 + h * 0.55, c.1 + h),
                ]);
                self.line(
                    (c.0 - h * 0.8, c.1 - h * 0.05),
                    (c.0 + h * 0.8, c.1 - h * 0.05),
                    s * 0.1,
                );
            }
        }
    }

    fn filled_circle(&mut self, c: (f32, f32), r: f32, color: [u8; 3]) {
        self.paint((c.0 - r, c.1 - r, c.0 + r, c.1 + r), color, |x, y| {
            (x - c.0).powi(2) + (y - c.1).powi(2) <= r * r
        });
    }

    fn stroke_circle(&mut self, c: (f32, f32), r: f32, width: f32) {
        let hw = width * 0.5;
        self.paint(
            (c.0 - r - hw, c.1 - r - hw, c.0 + r + hw, c.1 + r + hw),
            INK,
            |x, y| {
                let d = ((x - c.0).powi(2) + (y - c.1).powi(2)).sqrt();
                (d - r).abs() <= hw
            },
        );
    }

    /// Diagonal hatching clipped to a rectangle.
    fn hatch(&mut self, r: Rect, spacing: f32, width: f32) {
        let hw = width * 0.5;
        self.paint((r.x, r.y, r.x + r.w, r.y + r.h), INK, |x, y| {
            if x < r.x || x >= r.x + r.w || y < r.y || y >= r.y + r.h {
                return false;
            }
            let t = (x - r.x + y - r.y) / spacing;
            (t - t.round()).abs() * spacing / std::f32::consts::SQRT_2 <= hw
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rendering_is_deterministic() {
        let d = SyntheticDiagram::new(DiagramFamily::ClientServer, 7, 0.3);
        assert_eq!(d.render(200), d.render(200));
    }

    #[test]
    fn seeds_and_families_differ() {
        let a = SyntheticDiagram::new(DiagramFamily::Layered, 1, 0.5).render(200);
        let b = SyntheticDiagram::new(DiagramFamily::Layered, 2, 0.5).render(200);
        let c = SyntheticDiagram::new(DiagramFamily::EventBus, 1, 0.5).render(200);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_variation_reproduces_template() {
        let a = SyntheticDiagram::new(DiagramFamily::Microkernel, 1, 0.0).render(120);
        let b = SyntheticDiagram::new(DiagramFamily::Microkernel, 99, 0.0).render(120);
        assert_eq!(a, b);
    }
}
