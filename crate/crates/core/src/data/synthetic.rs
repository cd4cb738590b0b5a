//! Seeded stroke-pattern images, a desk-scale stand-in for MNIST-like data.
//!
//! Each class owns a fixed prototype made of a few line strokes; the
//! prototype depends only on the class index, so train and test sets drawn
//! with different seeds share classes. A sample is its class prototype
//! shifted by a few pixels, scaled in intensity, overlaid with one random
//! distractor stroke and uniform pixel noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SyntheticConfig {
    pub num_classes: usize,
    pub per_class: usize,
    pub image_size: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            num_classes: 10,
            per_class: 100,
            image_size: 28,
            seed: 0,
        }
    }
}

const STROKES_PER_CLASS: usize = 3;
const PROTOTYPE_SEED: u64 = 0x57_4c_50_52_4f_54_4f;
const MAX_SHIFT: i32 = 2;
const NOISE: f32 = 0.15;
const DISTRACTOR_INTENSITY: f32 = 0.5;
/// Half-width of a stroke, in pixels.
const STROKE_RADIUS: f32 = 1.1;

#[derive(Clone, Copy)]
struct Stroke {
    a: (f32, f32),
    b: (f32, f32),
}

fn random_stroke(rng: &mut ChaCha8Rng, lo: f32, hi: f32) -> Stroke {
    let mut p = || (rng.gen_range(lo..hi), rng.gen_range(lo..hi));
    let a = p();
    let mut b = p();
    // keep strokes long enough to be visible
    while (a.0 - b.0).hypot(a.1 - b.1) < 0.3 {
        b = p();
    }
    Stroke { a, b }
}

fn prototype(class: usize) -> [Stroke; STROKES_PER_CLASS] {
    let mut rng = ChaCha8Rng::seed_from_u64(PROTOTYPE_SEED.wrapping_add(class as u64));
    std::array::from_fn(|_| random_stroke(&mut rng, 0.15, 0.85))
}

fn segment_distance(p: (f32, f32), s: &Stroke) -> f32 {
    let (dx, dy) = (s.b.0 - s.a.0, s.b.1 - s.a.1);
    let len2 = dx * dx + dy * dy;
    let t = (((p.0 - s.a.0) * dx + (p.1 - s.a.1) * dy) / len2).clamp(0.0, 1.0);
    (p.0 - (s.a.0 + t * dx)).hypot(p.1 - (s.a.1 + t * dy))
}

fn draw(canvas: &mut [f32], size: usize, stroke: &Stroke, shift: (i32, i32), intensity: f32) {
    let scale = size as f32;
    let to_px = |(x, y): (f32, f32)| (x * scale + shift.0 as f32, y * scale + shift.1 as f32);
    let s = Stroke {
        a: to_px(stroke.a),
        b: to_px(stroke.b),
    };
    for y in 0..size {
        for x in 0..size {
            let d = segment_distance((x as f32 + 0.5, y as f32 + 0.5), &s);
            let v = intensity * (1.0 - d / STROKE_RADIUS).max(0.0);
            let px = &mut canvas[y * size + x];
            *px = px.max(v);
        }
    }
}

pub fn synthetic_dataset(cfg: &SyntheticConfig) -> Result<Dataset> {
    if cfg.num_classes == 0 || cfg.per_class == 0 || cfg.image_size == 0 {
        return Err(Error::InvalidArgument(
            "synthetic dataset counts must be positive".into(),
        ));
    }
    let size = cfg.image_size;
    let prototypes: Vec<_> = (0..cfg.num_classes).map(prototype).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.num_classes * cfg.per_class;
    let mut images = Vec::with_capacity(n * size * size);
    let mut labels = Vec::with_capacity(n);
    let mut canvas = vec![0.0f32; size * size];
    for i in 0..n {
        let label = i % cfg.num_classes;
        canvas.fill(0.0);
        let shift = (
            rng.gen_range(-MAX_SHIFT..=MAX_SHIFT),
            rng.gen_range(-MAX_SHIFT..=MAX_SHIFT),
        );
        let intensity = rng.gen_range(0.7f32..1.0);
        for stroke in &prototypes[label] {
            draw(&mut canvas, size, stroke, shift, intensity);
        }
        let distractor = random_stroke(&mut rng, 0.05, 0.95);
        draw(&mut canvas, size, &distractor, (0, 0), DISTRACTOR_INTENSITY);
        for px in canvas.iter_mut() {
            *px = (*px + rng.gen_range(-NOISE..NOISE)).clamp(0.0, 1.0);
        }
        images.extend_from_slice(&canvas);
        labels.push(label);
    }
    Dataset::new(
        format!(
            "synthetic(classes={},per_class={},size={},seed={})",
            cfg.num_classes, cfg.per_class, size, cfg.seed
        ),
        (1, size, size),
        cfg.num_classes,
        images,
        labels,
    )
}
