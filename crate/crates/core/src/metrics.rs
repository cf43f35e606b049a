//! Quality metrics: bidirectional patch similarity between a source frame and
//! its retargeted counterpart, and temporal stability of a frame sequence.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media_io::{self, Frame, FrameSequence};

/// Square patch geometry; patches always lie fully inside the frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub patch_size: usize,
    pub stride: usize,
}

impl Default for PatchSpec {
    fn default() -> Self {
        Self {
            patch_size: 7,
            stride: 4,
        }
    }
}

impl PatchSpec {
    pub fn new(patch_size: usize, stride: usize) -> Result<Self> {
        let spec = Self { patch_size, stride };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 || self.stride == 0 {
            return Err(Error::domain(format!(
                "patch size and stride must be >= 1, got {}/{}",
                self.patch_size, self.stride
            )));
        }
        Ok(())
    }

    /// Top-left offsets along an axis of length `extent`.
    pub fn offsets(&self, extent: usize) -> Vec<usize> {
        if extent < self.patch_size {
            return Vec::new();
        }
        (0..=extent - self.patch_size).step_by(self.stride).collect()
    }

    /// Number of patches in an `(height, width)` frame.
    pub fn count(&self, dims: (usize, usize)) -> usize {
        self.offsets(dims.0).len() * self.offsets(dims.1).len()
    }
}

/// Sum of squared differences over all pixels and channels of two equally
/// shaped patches.
pub fn patch_ssd(p: &Frame, q: &Frame) -> Result<f64> {
    if p.dims() != q.dims() || p.channels() != q.channels() {
        return Err(Error::shape(format!(
            "patches differ in shape: {}x{:?} vs {}x{:?}",
            p.channels(),
            p.dims(),
            q.channels(),
            q.dims()
        )));
    }
    Ok(ssd(p.data(), q.data(), f64::INFINITY))
}

/// Squared distance accumulated in order; stops once the partial sum exceeds
/// `bound`, in which case the returned value is only known to be `> bound`.
#[inline]
fn ssd(a: &[f32], b: &[f32], bound: f64) -> f64 {
    let mut s = 0.0f64;
    for (chunk_a, chunk_b) in a.chunks(16).zip(b.chunks(16)) {
        for (&x, &y) in chunk_a.iter().zip(chunk_b) {
            let d = x as f64 - y as f64;
            s += d * d;
        }
        if s > bound {
            return s;
        }
    }
    s
}

/// All patches of a frame, each flattened channel-major.
fn patches(f: &Frame, spec: &PatchSpec) -> Vec<Vec<f32>> {
    let k = spec.patch_size;
    let (ys, xs) = (spec.offsets(f.height()), spec.offsets(f.width()));
    let mut out = Vec::with_capacity(ys.len() * xs.len());
    for &y0 in &ys {
        for &x0 in &xs {
            let mut p = Vec::with_capacity(f.channels() * k * k);
            for c in 0..f.channels() {
                for y in y0..y0 + k {
                    for x in x0..x0 + k {
                        p.push(f.get(c, y, x));
                    }
                }
            }
            out.push(p);
        }
    }
    out
}

/// For every patch of `from`, the smallest distance to any patch of `to`.
/// Exhaustive search with exact early termination.
fn nearest(from: &[Vec<f32>], to: &[Vec<f32>]) -> Vec<f64> {
    from.par_iter()
        .map(|p| {
            let mut best = f64::INFINITY;
            for q in to {
                let d = ssd(p, q, best);
                if d < best {
                    best = d;
                }
            }
            best
        })
        .collect()
}

fn check_metric_frames(fs: &Frame, ft: &Frame, spec: &PatchSpec) -> Result<()> {
    spec.validate()?;
    if fs.channels() != ft.channels() {
        return Err(Error::shape(format!(
            "frames have {} and {} channels",
            fs.channels(),
            ft.channels()
        )));
    }
    for (name, f) in [("source", fs), ("target", ft)] {
        if spec.count(f.dims()) == 0 {
            return Err(Error::domain(format!(
                "{name} frame {:?} is smaller than a {}x{} patch",
                f.dims(),
                spec.patch_size,
                spec.patch_size
            )));
        }
    }
    Ok(())
}

/// Bidirectional patch error: for each patch of either frame, the distance to
/// its nearest patch in the other frame, summed over both directions and
/// divided by the combined patch count. Frames may differ in size.
pub fn bidirectional_error(fs: &Frame, ft: &Frame, spec: &PatchSpec) -> Result<f64> {
    check_metric_frames(fs, ft, spec)?;
    let ps = patches(fs, spec);
    let pt = patches(ft, spec);
    let completeness: f64 = nearest(&ps, &pt).iter().sum();
    let coherence: f64 = nearest(&pt, &ps).iter().sum();
    Ok((completeness + coherence) / (ps.len() + pt.len()) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BidirReport {
    pub per_frame: Vec<f64>,
    pub mean: f64,
}

/// Per-frame bidirectional error of aligned frame pairs and its mean.
pub fn mean_error(src: &FrameSequence, ret: &FrameSequence, spec: &PatchSpec) -> Result<BidirReport> {
    if src.len() != ret.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} source frames vs {} retargeted frames",
            src.len(),
            ret.len()
        )));
    }
    if src.is_empty() {
        return Err(Error::domain("cannot evaluate empty sequences"));
    }
    let per_frame = src
        .frames()
        .iter()
        .zip(ret.frames())
        .map(|(a, b)| bidirectional_error(a, b, spec))
        .collect::<Result<Vec<_>>>()?;
    let mean = per_frame.iter().sum::<f64>() / per_frame.len() as f64;
    Ok(BidirReport { per_frame, mean })
}

/// Normalized absolute difference of two equally sized frames: values are
/// taken to 8-bit, the per-pixel channel mean of `|a - b|` is summed and
/// divided by `H * W` and by 100.
pub fn frame_difference(ft: &Frame, ft_1: &Frame) -> Result<f64> {
    if ft.dims() != ft_1.dims() || ft.channels() != ft_1.channels() {
        return Err(Error::shape(format!(
            "frames differ in shape: {:?} vs {:?}",
            ft.dims(),
            ft_1.dims()
        )));
    }
    let (h, w) = ft.dims();
    let plane = h * w;
    let channels = ft.channels();
    let (a, b) = (ft.data(), ft_1.data());
    let mut total = 0u64;
    for i in 0..plane {
        for c in 0..channels {
            let j = c * plane + i;
            total += (media_io::quantize(a[j]) as i32 - media_io::quantize(b[j]) as i32).unsigned_abs() as u64;
        }
    }
    Ok(total as f64 / channels as f64 / plane as f64 / 100.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Difference of each frame to its predecessor, starting with the second frame.
    pub differences: Vec<f64>,
    pub stb: f64,
}

/// Mean frame-to-predecessor difference over the `n - 1` adjacent pairs.
pub fn stability(seq: &FrameSequence) -> Result<StabilityReport> {
    let n = seq.len();
    if n < 2 {
        return Err(Error::domain(format!("stability needs at least 2 frames, got {n}")));
    }
    let frames = seq.frames();
    let differences = (1..n)
        .into_par_iter()
        .map(|t| frame_difference(&frames[t], &frames[t - 1]))
        .collect::<Result<Vec<_>>>()?;
    let stb = differences.iter().sum::<f64>() / (n - 1) as f64;
    Ok(StabilityReport { differences, stb })
}
