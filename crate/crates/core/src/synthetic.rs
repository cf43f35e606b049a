//! Procedural clips for tests, examples and the toy training run: a smooth
//! textured background with one moving rectangle as the annotated foreground.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::media_io::{Clip, Frame, FrameSequence, Mask};

/// Parameters of a synthetic clip collection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToyClips {
    pub clips: usize,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub seed: u64,
}

impl Default for ToyClips {
    fn default() -> Self {
        Self {
            clips: 2,
            frames: 16,
            height: 128,
            width: 128,
            seed: 0,
        }
    }
}

impl ToyClips {
    pub fn generate(&self) -> Result<Vec<Clip>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.clips)
            .map(|i| moving_box_clip(format!("toy{i:02}"), self.frames, (self.height, self.width), &mut rng))
            .collect()
    }
}

struct Background {
    base: [f32; 3],
    tilt: [f32; 3],
    freq: (f32, f32),
    phase: f32,
}

impl Background {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut c = || rng.random_range(0.2f32..0.6);
        let base = [c(), c(), c()];
        let tilt = [
            rng.random_range(-0.2f32..0.2),
            rng.random_range(-0.2f32..0.2),
            rng.random_range(-0.2f32..0.2),
        ];
        Self {
            base,
            tilt,
            freq: (rng.random_range(1.0f32..4.0), rng.random_range(1.0f32..4.0)),
            phase: rng.random_range(0.0f32..std::f32::consts::TAU),
        }
    }

    fn at(&self, c: usize, u: f32, v: f32, drift: f32) -> f32 {
        let wave = ((u * self.freq.0 + drift) * std::f32::consts::TAU + self.phase).sin()
            * (v * self.freq.1 * std::f32::consts::TAU).cos();
        self.base[c] + self.tilt[c] * (u - v) + 0.1 * wave
    }
}

/// One clip of `frames` frames at `(height, width)` with per-frame masks.
pub fn moving_box_clip(name: impl Into<String>, frames: usize, size: (usize, usize), rng: &mut ChaCha8Rng) -> Result<Clip> {
    let (h, w) = size;
    let bg = Background::random(rng);
    let color = [
        rng.random_range(0.6f32..1.0),
        rng.random_range(0.0f32..0.4),
        rng.random_range(0.3f32..0.9),
    ];
    let bh = (h as f32 * rng.random_range(0.25f32..0.4)).max(2.0);
    let bw = (w as f32 * rng.random_range(0.2f32..0.35)).max(2.0);
    let mut y0 = rng.random_range(0.0..(h as f32 - bh).max(1.0));
    let mut x0 = rng.random_range(0.0..(w as f32 - bw).max(1.0));
    let mut vy = rng.random_range(-1.5f32..1.5);
    let mut vx = rng.random_range(-2.5f32..2.5);
    let drift = rng.random_range(-0.02f32..0.02);

    let mut out_frames = Vec::with_capacity(frames);
    let mut masks = Vec::with_capacity(frames);
    for t in 0..frames {
        let inside = |y: usize, x: usize| {
            let (y, x) = (y as f32, x as f32);
            y >= y0 && y < y0 + bh && x >= x0 && x < x0 + bw
        };
        let frame = Frame::from_fn(h, w, 3, |c, y, x| {
            if inside(y, x) {
                let stripe = if (((x as f32 - x0) / 4.0) as usize).is_multiple_of(2) { 0.0 } else { 0.1 };
                color[c] - stripe
            } else {
                bg.at(c, x as f32 / w as f32, y as f32 / h as f32, drift * t as f32)
            }
        });
        masks.push(Mask::from_fn(h, w, |y, x| if inside(y, x) { 1.0 } else { 0.0 }));
        out_frames.push(frame);

        y0 += vy;
        x0 += vx;
        if y0 < 0.0 || y0 + bh > h as f32 {
            vy = -vy;
            y0 = y0.clamp(0.0, h as f32 - bh);
        }
        if x0 < 0.0 || x0 + bw > w as f32 {
            vx = -vx;
            x0 = x0.clamp(0.0, w as f32 - bw);
        }
    }
    Clip::new(name, FrameSequence::new(out_frames, 30.0)?, Some(masks))
}

/// Uniform noise frame.
pub fn noise_frame(height: usize, width: usize, rng: &mut ChaCha8Rng) -> Frame {
    let data: Vec<f32> = (0..3 * height * width).map(|_| rng.random::<f32>()).collect();
    Frame::new(height, width, 3, data).expect("values in [0, 1)")
}
